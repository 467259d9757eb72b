use thiserror::Error;

use crate::ids::{AccountId, ChoreId, HouseId, ItemId, ProposalId, ResidentId};
use crate::time::Timestamp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("unknown house {0}")]
    UnknownHouse(HouseId),
    #[error("house {0} already exists")]
    DuplicateHouse(HouseId),
    #[error("resident {0} is already active")]
    DuplicateResident(ResidentId),
    #[error("resident {0} is not active")]
    UnknownResident(ResidentId),
    #[error("identifier must be non-empty")]
    EmptyId,
    #[error("timestamp {at} precedes last event at {last}")]
    ClockRegression { at: Timestamp, last: Timestamp },
    #[error("corrupt log: {0}")]
    CorruptLog(String),
    #[error("invalid config at `{path}`: {message}")]
    ConfigInvalid { path: String, message: String },
    #[error("invalid month {0}")]
    InvalidMonth(String),
    #[error("month has not ended")]
    MonthNotEnded,

    #[error("voting window must be positive")]
    InvalidWindow,
    #[error("minimum upvotes must be at least 1")]
    InvalidThreshold,
    #[error("unknown proposal {0}")]
    UnknownProposal(ProposalId),
    #[error("proposal {0} is closed")]
    ProposalClosed(ProposalId),
    #[error("voter {0} is not an active resident")]
    UnknownVoter(ResidentId),

    #[error("unknown chore {0}")]
    UnknownChore(ChoreId),
    #[error("chore has no accrued value")]
    ZeroValue,
    #[error("an active chore is already named {0:?}")]
    DuplicateName(String),
    #[error("invalid exemption range")]
    InvalidRange,

    #[error("preferred and deprioritized chore are the same")]
    SameChore,
    #[error("no active chores")]
    NoChores,
    #[error("invalid priority parameters: {0}")]
    InvalidPriorityParams(String),

    #[error("residents cannot give karma to themselves")]
    SelfKarma,
    #[error("residents cannot challenge themselves")]
    SelfChallenge,
    #[error("stake must be in (0, {max}] hearts")]
    ExcessiveStake { max: f64 },
    #[error("stake must be a positive multiple of a quarter heart")]
    InvalidStake,

    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("an account is already named {0:?}")]
    DuplicateAccountName(String),
    #[error("unknown buy-list item {0}")]
    UnknownItem(ItemId),
    #[error("price must be positive")]
    NonPositivePrice,
    #[error("insufficient funds: balance {balance} cents, price {price} cents")]
    InsufficientFunds { balance: i64, price: i64 },

    #[error("event store unavailable: {0}")]
    StoreUnavailable(String),
}

impl EngineError {
    /// Stable machine-readable name, e.g. `ZeroValue`.
    pub fn code(&self) -> &'static str {
        use EngineError::*;
        match self {
            UnknownHouse(..) => "UnknownHouse",
            DuplicateHouse(..) => "DuplicateHouse",
            DuplicateResident(..) => "DuplicateResident",
            UnknownResident(..) => "UnknownResident",
            EmptyId => "EmptyId",
            ClockRegression { .. } => "ClockRegression",
            CorruptLog(..) => "CorruptLog",
            ConfigInvalid { .. } => "ConfigInvalid",
            InvalidMonth(..) => "InvalidMonth",
            MonthNotEnded => "MonthNotEnded",
            InvalidWindow => "InvalidWindow",
            InvalidThreshold => "InvalidThreshold",
            UnknownProposal(..) => "UnknownProposal",
            ProposalClosed(..) => "ProposalClosed",
            UnknownVoter(..) => "UnknownVoter",
            UnknownChore(..) => "UnknownChore",
            ZeroValue => "ZeroValue",
            DuplicateName(..) => "DuplicateName",
            InvalidRange => "InvalidRange",
            SameChore => "SameChore",
            NoChores => "NoChores",
            InvalidPriorityParams(..) => "InvalidPriorityParams",
            SelfKarma => "SelfKarma",
            SelfChallenge => "SelfChallenge",
            ExcessiveStake { .. } => "ExcessiveStake",
            InvalidStake => "InvalidStake",
            UnknownAccount(..) => "UnknownAccount",
            DuplicateAccountName(..) => "DuplicateAccountName",
            UnknownItem(..) => "UnknownItem",
            NonPositivePrice => "NonPositivePrice",
            InsufficientFunds { .. } => "InsufficientFunds",
            StoreUnavailable(..) => "StoreUnavailable",
        }
    }
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;
