//! Event payloads. Each variant is one kind of state transition; together
//! they are the complete record of a house.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::chores::ObligationStatement;
use crate::config::HouseConfig;
use crate::consensus::{Direction, Outcome, ProposalKind};
use crate::hearts::{HeartCause, SanctionSignal};
use crate::ids::{AccountId, ChoreId, ItemId, ProposalId, ResidentId};
use crate::things::{Cents, PurchaseItem, PurchaseStatus};
use crate::time::{Timestamp, YearMonth};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum ChoreAmendment {
    Add {
        name: String,
        #[serde(default)]
        description: String,
    },
    Retire {
        chore: ChoreId,
    },
    Edit {
        chore: ChoreId,
        name: String,
        #[serde(default)]
        description: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum BuyListAmendment {
    Add {
        name: String,
        #[serde(default)]
        vendor_hint: String,
        typical_price: Cents,
    },
    Retire { item: ItemId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum AccountAmendment {
    Create { name: String, monthly_refill: Cents },
    Rename { account: AccountId, name: String },
    RetargetRefill { account: AccountId, monthly_refill: Cents },
}

/// What a proposal is about.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Subject {
    ChoreClaim {
        chore: ChoreId,
        claimant: ResidentId,
        value: f64,
    },
    ChoreAmendment {
        amendment: ChoreAmendment,
    },
    HeartChallenge {
        challenger: ResidentId,
        challengee: ResidentId,
        stake: f64,
        reason: String,
    },
    Purchase {
        item: PurchaseItem,
        price: Cents,
        account: AccountId,
    },
    BuyListAmendment {
        amendment: BuyListAmendment,
    },
    AccountAmendment {
        amendment: AccountAmendment,
    },
}

impl Subject {
    pub fn kind(&self) -> ProposalKind {
        match self {
            Subject::ChoreClaim { .. } => ProposalKind::ChoreClaim,
            Subject::ChoreAmendment { .. } => ProposalKind::ChoreAmendment,
            Subject::HeartChallenge { .. } => ProposalKind::HeartChallenge,
            Subject::Purchase { .. } => ProposalKind::Purchase,
            Subject::BuyListAmendment { .. } => ProposalKind::BuyListAmendment,
            Subject::AccountAmendment { .. } => ProposalKind::AccountAmendment,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all_fields = "camelCase")]
pub enum EventBody {
    HouseCreated {
        config: HouseConfig,
    },
    ConfigUpdated {
        config: HouseConfig,
    },
    ResidentAdded {
        resident: ResidentId,
    },
    ResidentRemoved {
        resident: ResidentId,
    },
    ChoreAdded {
        chore: ChoreId,
        name: String,
        description: String,
    },
    ChoreEdited {
        chore: ChoreId,
        name: String,
        description: String,
    },
    ChoreRetired {
        chore: ChoreId,
        discarded: f64,
    },
    PreferenceSubmitted {
        resident: ResidentId,
        preferred: ChoreId,
        deprioritized: ChoreId,
    },
    ExemptionDeclared {
        resident: ResidentId,
        from_day: NaiveDate,
        to_day: NaiveDate,
    },
    ProposalOpened {
        proposal: ProposalId,
        kind: ProposalKind,
        proposer: Option<ResidentId>,
        min_upvotes: u32,
        require_majority: bool,
        window_ms: u64,
        subject: Subject,
    },
    BallotCast {
        proposal: ProposalId,
        voter: ResidentId,
        direction: Direction,
    },
    ProposalResolved {
        proposal: ProposalId,
        outcome: Outcome,
        upvotes: u32,
        downvotes: u32,
        resolved_at: Timestamp,
    },
    ClaimVerified {
        proposal: ProposalId,
        chore: ChoreId,
        claimant: ResidentId,
        points: f64,
        month: YearMonth,
    },
    ClaimRejected {
        proposal: ProposalId,
        chore: ChoreId,
        restored: f64,
    },
    AmendmentVoided {
        proposal: ProposalId,
        reason: String,
    },
    HeartsChanged {
        resident: ResidentId,
        delta: f64,
        cause: HeartCause,
        month: Option<YearMonth>,
    },
    SanctionSignaled {
        resident: ResidentId,
        signal: SanctionSignal,
    },
    KarmaRecorded {
        giver: ResidentId,
        recipient: ResidentId,
        source_message: Option<String>,
    },
    ObligationsResolved {
        month: YearMonth,
        statements: Vec<ObligationStatement>,
    },
    KarmaAwardsClosed {
        month: YearMonth,
    },
    HeartsTicked {
        month: YearMonth,
    },
    AccountCreated {
        account: AccountId,
        name: String,
        monthly_refill: Cents,
    },
    AccountRenamed {
        account: AccountId,
        name: String,
    },
    AccountRefillChanged {
        account: AccountId,
        monthly_refill: Cents,
    },
    AccountRefilled {
        account: AccountId,
        month: YearMonth,
        amount: Cents,
    },
    PurchaseSettled {
        proposal: ProposalId,
        account: AccountId,
        price: Cents,
        buyer: ResidentId,
        status: PurchaseStatus,
    },
    BuyListItemAdded {
        item: ItemId,
        name: String,
        vendor_hint: String,
        typical_price: Cents,
    },
    BuyListItemRetired {
        item: ItemId,
    },
}

impl EventBody {
    pub fn kind_name(&self) -> &'static str {
        match self {
            EventBody::HouseCreated { .. } => "HouseCreated",
            EventBody::ConfigUpdated { .. } => "ConfigUpdated",
            EventBody::ResidentAdded { .. } => "ResidentAdded",
            EventBody::ResidentRemoved { .. } => "ResidentRemoved",
            EventBody::ChoreAdded { .. } => "ChoreAdded",
            EventBody::ChoreEdited { .. } => "ChoreEdited",
            EventBody::ChoreRetired { .. } => "ChoreRetired",
            EventBody::PreferenceSubmitted { .. } => "PreferenceSubmitted",
            EventBody::ExemptionDeclared { .. } => "ExemptionDeclared",
            EventBody::ProposalOpened { .. } => "ProposalOpened",
            EventBody::BallotCast { .. } => "BallotCast",
            EventBody::ProposalResolved { .. } => "ProposalResolved",
            EventBody::ClaimVerified { .. } => "ClaimVerified",
            EventBody::ClaimRejected { .. } => "ClaimRejected",
            EventBody::AmendmentVoided { .. } => "AmendmentVoided",
            EventBody::HeartsChanged { .. } => "HeartsChanged",
            EventBody::SanctionSignaled { .. } => "SanctionSignaled",
            EventBody::KarmaRecorded { .. } => "KarmaRecorded",
            EventBody::ObligationsResolved { .. } => "ObligationsResolved",
            EventBody::KarmaAwardsClosed { .. } => "KarmaAwardsClosed",
            EventBody::HeartsTicked { .. } => "HeartsTicked",
            EventBody::AccountCreated { .. } => "AccountCreated",
            EventBody::AccountRenamed { .. } => "AccountRenamed",
            EventBody::AccountRefillChanged { .. } => "AccountRefillChanged",
            EventBody::AccountRefilled { .. } => "AccountRefilled",
            EventBody::PurchaseSettled { .. } => "PurchaseSettled",
            EventBody::BuyListItemAdded { .. } => "BuyListItemAdded",
            EventBody::BuyListItemRetired { .. } => "BuyListItemRetired",
        }
    }
}
