//! Governance engine for shared houses.
//!
//! Three mechanisms run as one deterministic, event-sourced state machine
//! per house:
//!
//! - **Chores**: a continuous auction. Undone chores accrue points at rates
//!   set by pairwise priority preferences; residents claim them and owe
//!   a monthly quota.
//! - **Hearts**: a norm-compliance ledger with karma awards, challenges,
//!   shortfall penalties and drift back to a baseline.
//! - **Things**: shared accounts with monthly refills and purchase
//!   approvals whose threshold grows with price.
//!
//! All three share one lazy-consensus voting primitive. Every state change
//! is an [`Event`]; [`replay`] rebuilds the full state from a log.
//!
//! Numeric kernels (priority aggregation, accrual) are generic over
//! [`Scalar`]; engine state uses the [`Points`] alias. Money is integer
//! [`Cents`].

pub mod chores;
pub mod config;
pub mod consensus;
pub mod engine;
pub mod error;
pub mod events;
pub mod hearts;
pub mod ids;
pub mod ledger;
pub mod prioritization;
pub mod roster;
pub mod scalar;
pub mod things;
pub mod time;

pub use config::HouseConfig;
pub use consensus::{Direction, Outcome, ProposalKind};
pub use engine::{replay, Engine, EngineState, HouseState, PurchaseRequest};
pub use error::{EngineError, Result};
pub use events::{AccountAmendment, BuyListAmendment, ChoreAmendment, EventBody, Subject};
pub use hearts::{HeartCause, SanctionSignal};
pub use ids::{AccountId, ChoreId, HouseId, ItemId, ProposalId, ResidentId};
pub use ledger::{Event, Journal};
pub use scalar::Scalar;
pub use things::{Cents, PurchaseItem, PurchaseStatus};
pub use time::{Calendar, Clock, ManualClock, SystemClock, Timestamp, YearMonth};

/// Chore points.
pub type Points = f64;
/// Hearts, in quarter steps.
pub type Hearts = f64;
/// Priority weights as used by the engine.
pub type Weights = prioritization::PriorityDistribution<Points>;
