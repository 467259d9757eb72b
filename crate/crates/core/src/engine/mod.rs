//! The engine: per-house state derived entirely from the event log, plus the
//! command surface that appends to it.
//!
//! Every command first advances the house's time-driven processes (proposal
//! resolution and monthly jobs) up to the command's timestamp, then
//! validates, then emits events. Events are applied as they are emitted and
//! handed to the journal before the command returns.

mod apply;
mod commands;
mod queries;
mod scheduler;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::chores::{ChoreBoard, Claim, ExemptionRecord, ObligationStatement};
use crate::config::HouseConfig;
use crate::consensus::ProposalBook;
use crate::error::{EngineError, Result};
use crate::events::{EventBody, Subject};
use crate::hearts::HeartsBook;
use crate::ids::{HouseId, ProposalId, ResidentId};
use crate::ledger::{check_order, Event, Journal, NullJournal};
use crate::prioritization::PreferenceBook;
use crate::roster::Roster;
use crate::things::ThingsBook;
use crate::time::{Calendar, Clock, Timestamp, YearMonth};

pub use commands::PurchaseRequest;
pub use queries::{ChoreView, HeartsBoardRow, PriorityView};

/// Everything known about one house.
#[derive(Clone, Debug, PartialEq)]
pub struct HouseState {
    pub id: HouseId,
    pub config: HouseConfig,
    pub calendar: Calendar,
    pub created_at: Timestamp,
    pub first_month: YearMonth,
    pub roster: Roster,
    pub chores: ChoreBoard,
    pub preferences: PreferenceBook,
    pub proposals: ProposalBook<Subject>,
    pub claims: BTreeMap<ProposalId, Claim>,
    pub exemptions: Vec<ExemptionRecord>,
    /// Verified claim credits, booked to the month the claim's window closed.
    pub earned: BTreeMap<YearMonth, BTreeMap<ResidentId, f64>>,
    pub statements: BTreeMap<YearMonth, Vec<ObligationStatement>>,
    pub hearts: HeartsBook,
    pub things: ThingsBook,
    pub karma_closed: BTreeSet<YearMonth>,
    /// Last month whose monthly jobs have all run.
    pub closed_through: Option<YearMonth>,
}

/// State of every house, derived from a log prefix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EngineState {
    houses: BTreeMap<HouseId, HouseState>,
    last: Option<(u64, Timestamp)>,
}

impl EngineState {
    pub fn house(&self, id: &HouseId) -> Result<&HouseState> {
        self.houses.get(id).ok_or_else(|| EngineError::UnknownHouse(id.clone()))
    }

    pub fn houses(&self) -> impl Iterator<Item = &HouseState> {
        self.houses.values()
    }

    pub fn next_seq(&self) -> u64 {
        self.last.map_or(0, |(seq, _)| seq + 1)
    }

    pub fn last_at(&self) -> Timestamp {
        self.last.map_or(Timestamp(0), |(_, at)| at)
    }

    pub fn apply(&mut self, event: &Event) -> Result<()> {
        check_order(self.last, event)?;
        match &event.body {
            EventBody::HouseCreated { config } => {
                if self.houses.contains_key(&event.house) {
                    return Err(EngineError::CorruptLog(format!("house {} created twice", event.house)));
                }
                let house = HouseState::new(event.house.clone(), config.clone(), event.at)?;
                self.houses.insert(event.house.clone(), house);
            }
            body => {
                let house = self
                    .houses
                    .get_mut(&event.house)
                    .ok_or_else(|| EngineError::CorruptLog(format!("event for unknown house {}", event.house)))?;
                house.apply(event.at, body)?;
            }
        }
        self.last = Some((event.seq, event.at));
        Ok(())
    }
}

/// Rebuilds state from a log. Pure: the same log always yields the same state.
pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<EngineState> {
    let mut state = EngineState::default();
    for e in events {
        state.apply(e)?;
    }
    Ok(state)
}

pub struct Engine {
    state: EngineState,
    log: Vec<Event>,
    flushed: usize,
    journal: Box<dyn Journal>,
    clock: Arc<dyn Clock>,
    poisoned: Option<String>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("events", &self.log.len())
            .field("houses", &self.state.houses.len())
            .field("poisoned", &self.poisoned)
            .finish()
    }
}

impl Engine {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Engine::with_journal(clock, Box::new(NullJournal))
    }

    pub fn with_journal(clock: Arc<dyn Clock>, journal: Box<dyn Journal>) -> Self {
        Engine {
            state: EngineState::default(),
            log: Vec::new(),
            flushed: 0,
            journal,
            clock,
            poisoned: None,
        }
    }

    /// Restores an engine from a durable log. The events are assumed to be
    /// already persisted in `journal`.
    pub fn from_log(clock: Arc<dyn Clock>, events: Vec<Event>, journal: Box<dyn Journal>) -> Result<Self> {
        let state = replay(&events)?;
        let flushed = events.len();
        Ok(Engine {
            state,
            log: events,
            flushed,
            journal,
            clock,
            poisoned: None,
        })
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn house(&self, id: &HouseId) -> Result<&HouseState> {
        self.state.house(id)
    }

    pub fn log(&self) -> &[Event] {
        &self.log
    }

    /// The clock's time, never earlier than the last event.
    pub fn now(&self) -> Timestamp {
        self.clock.now().max(self.state.last_at())
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned.is_some()
    }

    fn begin(&self, at: Timestamp) -> Result<()> {
        if let Some(reason) = &self.poisoned {
            return Err(EngineError::StoreUnavailable(reason.clone()));
        }
        let last = self.state.last_at();
        if at < last {
            return Err(EngineError::ClockRegression { at, last });
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        if self.flushed == self.log.len() {
            return Ok(());
        }
        match self.journal.append(&self.log[self.flushed..]) {
            Ok(()) => {
                self.flushed = self.log.len();
                Ok(())
            }
            Err(e) => {
                // In-memory state is now ahead of the durable log; refuse
                // further writes until rebuilt from the store.
                let reason = e.to_string();
                self.poisoned = Some(reason.clone());
                Err(EngineError::StoreUnavailable(reason))
            }
        }
    }

    /// Runs `f` against one house after bringing it up to `at`.
    fn transact<T>(&mut self, house: &HouseId, at: Timestamp, f: impl FnOnce(&mut Tx<'_>) -> Result<T>) -> Result<T> {
        self.begin(at)?;
        self.state.house(house)?;
        let result = {
            let mut tx = Tx {
                state: &mut self.state,
                log: &mut self.log,
                house: house.clone(),
                at,
            };
            scheduler::advance(&mut tx).and_then(|_| f(&mut tx))
        };
        self.flush()?;
        result
    }
}

/// A command in progress against one house.
pub(crate) struct Tx<'a> {
    state: &'a mut EngineState,
    log: &'a mut Vec<Event>,
    house: HouseId,
    at: Timestamp,
}

impl Tx<'_> {
    fn house(&self) -> &HouseState {
        &self.state.houses[&self.house]
    }

    fn emit(&mut self, body: EventBody) -> Result<()> {
        let event = Event {
            seq: self.state.next_seq(),
            at: self.at,
            house: self.house.clone(),
            body,
        };
        self.state.apply(&event)?;
        self.log.push(event);
        Ok(())
    }
}
