//! The command surface. Each command advances its house to `at`, validates
//! against the advanced state, and only then emits events.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{scheduler, Engine, Tx};
use crate::chores::{Claim, ObligationStatement};
use crate::config::HouseConfig;
use crate::consensus::{quorum, Direction, Resolution, VoteRule};
use crate::error::{EngineError, Result};
use crate::events::{AccountAmendment, BuyListAmendment, ChoreAmendment, EventBody, Subject};
use crate::hearts::{HeartCause, HeartEvent, KarmaRecognition};
use crate::ids::{AccountId, ChoreId, HouseId, ProposalId, ResidentId};
use crate::ledger::Event;
use crate::roster::ResidentRecord;
use crate::things::{min_upvotes_for_price, Cents, LedgerEntry, LedgerKind, PurchaseItem, PurchaseProposal};
use crate::time::{Timestamp, YearMonth};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PurchaseRequest {
    pub proposer: ResidentId,
    pub item: PurchaseItem,
    pub price: Cents,
    pub account: AccountId,
}

impl Tx<'_> {
    fn check_active(&self, resident: &ResidentId) -> Result<()> {
        self.house().roster.check_active(resident)
    }

    fn open(
        &mut self,
        proposer: Option<ResidentId>,
        rule: VoteRule,
        subject: Subject,
        implicit_upvote: bool,
    ) -> Result<ProposalId> {
        rule.validate()?;
        let proposal = self.house().proposals.next_id();
        let voter = proposer.clone().filter(|_| implicit_upvote);
        self.emit(EventBody::ProposalOpened {
            proposal,
            kind: subject.kind(),
            proposer,
            min_upvotes: rule.min_upvotes,
            require_majority: rule.require_majority,
            window_ms: rule.window_ms,
            subject,
        })?;
        if let Some(voter) = voter {
            self.emit(EventBody::BallotCast {
                proposal,
                voter,
                direction: Direction::Up,
            })?;
        }
        Ok(proposal)
    }

    fn amendment_rule(&self, fraction: f64) -> VoteRule {
        let h = self.house();
        VoteRule {
            window_ms: h.config.windows.amendment_ms(),
            min_upvotes: quorum(h.roster.active_count(), fraction, 1),
            require_majority: true,
        }
    }
}

impl Engine {
    /// Appends events produced by `f` and returns them alongside its result.
    fn transact_events<T>(
        &mut self,
        house: &HouseId,
        at: Timestamp,
        f: impl FnOnce(&mut Tx<'_>) -> Result<T>,
    ) -> Result<(T, Vec<Event>)> {
        let start = self.log.len();
        let out = self.transact(house, at, f)?;
        Ok((out, self.log[start..].to_vec()))
    }

    pub fn create_house(&mut self, id: &HouseId, config: HouseConfig, at: Timestamp) -> Result<()> {
        self.begin(at)?;
        if self.state.houses.contains_key(id) {
            return Err(EngineError::DuplicateHouse(id.clone()));
        }
        config.validate()?;
        let result = (|| {
            let mut tx = Tx {
                state: &mut self.state,
                log: &mut self.log,
                house: id.clone(),
                at,
            };
            tx.emit(EventBody::HouseCreated { config: config.clone() })?;
            for (i, c) in config.chores.iter().enumerate() {
                tx.emit(EventBody::ChoreAdded {
                    chore: ChoreId(i as u64),
                    name: c.name.clone(),
                    description: c.description.clone(),
                })?;
            }
            let month = tx.house().calendar.month_of(at);
            for (i, a) in config.accounts.iter().enumerate() {
                let account = AccountId(i as u64);
                tx.emit(EventBody::AccountCreated {
                    account,
                    name: a.name.clone(),
                    monthly_refill: Cents(a.monthly_refill_cents),
                })?;
                tx.emit(EventBody::AccountRefilled {
                    account,
                    month,
                    amount: Cents(a.monthly_refill_cents),
                })?;
            }
            for (i, item) in config.buy_list.iter().enumerate() {
                tx.emit(EventBody::BuyListItemAdded {
                    item: crate::ids::ItemId(i as u64),
                    name: item.name.clone(),
                    vendor_hint: item.vendor_hint.clone(),
                    typical_price: Cents(item.typical_price_cents),
                })?;
            }
            Ok(())
        })();
        self.flush()?;
        result
    }

    /// Replaces a house's configuration. The timezone is fixed at creation.
    pub fn update_config(&mut self, house: &HouseId, config: HouseConfig, at: Timestamp) -> Result<()> {
        self.transact(house, at, |tx| {
            config.validate()?;
            if config.timezone != tx.house().config.timezone {
                return Err(EngineError::ConfigInvalid {
                    path: "timezone".into(),
                    message: "cannot change after creation".into(),
                });
            }
            tx.emit(EventBody::ConfigUpdated { config })
        })
    }

    pub fn add_resident(&mut self, house: &HouseId, id: &ResidentId, at: Timestamp) -> Result<ResidentRecord> {
        self.transact(house, at, |tx| {
            tx.house().roster.check_add(id)?;
            tx.emit(EventBody::ResidentAdded { resident: id.clone() })?;
            Ok(tx.house().roster.get(id).expect("added").clone())
        })
    }

    pub fn remove_resident(&mut self, house: &HouseId, id: &ResidentId, at: Timestamp) -> Result<ResidentRecord> {
        self.transact(house, at, |tx| {
            tx.check_active(id)?;
            tx.emit(EventBody::ResidentRemoved { resident: id.clone() })?;
            Ok(tx.house().roster.get(id).expect("known").clone())
        })
    }

    /// Freezes the chore's current value and opens a claim proposal carrying
    /// the claimant's implicit upvote.
    pub fn claim_chore(&mut self, house: &HouseId, chore: ChoreId, claimant: &ResidentId, at: Timestamp) -> Result<Claim> {
        self.transact(house, at, |tx| {
            tx.check_active(claimant)?;
            let h = tx.house();
            let value = h.chores.value_at(chore, at, &h.calendar)?;
            if !(value > 0.0) {
                return Err(EngineError::ZeroValue);
            }
            let rule = VoteRule {
                window_ms: h.config.windows.claim_ms(),
                min_upvotes: h.config.claims.min_upvotes(value),
                require_majority: true,
            };
            let subject = Subject::ChoreClaim {
                chore,
                claimant: claimant.clone(),
                value,
            };
            let id = tx.open(Some(claimant.clone()), rule, subject, true)?;
            Ok(tx.house().claims[&id].clone())
        })
    }

    pub fn propose_chore_amendment(
        &mut self,
        house: &HouseId,
        proposer: &ResidentId,
        amendment: ChoreAmendment,
        at: Timestamp,
    ) -> Result<ProposalId> {
        self.transact(house, at, |tx| {
            tx.check_active(proposer)?;
            let chores = &tx.house().chores;
            match &amendment {
                ChoreAmendment::Add { name, .. } => {
                    if name.is_empty() {
                        return Err(EngineError::ConfigInvalid {
                            path: "name".into(),
                            message: "must be non-empty".into(),
                        });
                    }
                    if chores.active_by_name(name).is_some() {
                        return Err(EngineError::DuplicateName(name.clone()));
                    }
                }
                ChoreAmendment::Retire { chore } => {
                    chores.active_chore(*chore)?;
                }
                ChoreAmendment::Edit { chore, name, .. } => {
                    chores.active_chore(*chore)?;
                    if chores.active_by_name(name).is_some_and(|other| other != *chore) {
                        return Err(EngineError::DuplicateName(name.clone()));
                    }
                }
            }
            let rule = tx.amendment_rule(tx.house().config.quorum.chore_amendment);
            tx.open(Some(proposer.clone()), rule, Subject::ChoreAmendment { amendment }, false)
        })
    }

    /// Declares days away; they reduce the resident's obligation for the
    /// months they fall in. Ranges may not start before the current month.
    pub fn declare_exemption(
        &mut self,
        house: &HouseId,
        resident: &ResidentId,
        from_day: NaiveDate,
        to_day: NaiveDate,
        at: Timestamp,
    ) -> Result<()> {
        self.transact(house, at, |tx| {
            tx.check_active(resident)?;
            let current = tx.house().calendar.month_of(at);
            if to_day < from_day || YearMonth::of_date(from_day) < current {
                return Err(EngineError::InvalidRange);
            }
            tx.emit(EventBody::ExemptionDeclared {
                resident: resident.clone(),
                from_day,
                to_day,
            })
        })
    }

    pub fn submit_preference(
        &mut self,
        house: &HouseId,
        resident: &ResidentId,
        preferred: ChoreId,
        deprioritized: ChoreId,
        at: Timestamp,
    ) -> Result<()> {
        self.transact(house, at, |tx| {
            tx.check_active(resident)?;
            if preferred == deprioritized {
                return Err(EngineError::SameChore);
            }
            let chores = &tx.house().chores;
            chores.active_chore(preferred)?;
            chores.active_chore(deprioritized)?;
            tx.emit(EventBody::PreferenceSubmitted {
                resident: resident.clone(),
                preferred,
                deprioritized,
            })
        })
    }

    pub fn cast_ballot(
        &mut self,
        house: &HouseId,
        proposal: ProposalId,
        voter: &ResidentId,
        direction: Direction,
        at: Timestamp,
    ) -> Result<()> {
        self.transact(house, at, |tx| {
            tx.house().proposals.check_ballot(proposal, at)?;
            if !tx.house().roster.is_active(voter) {
                return Err(EngineError::UnknownVoter(voter.clone()));
            }
            tx.emit(EventBody::BallotCast {
                proposal,
                voter: voter.clone(),
                direction,
            })
        })
    }

    /// Resolves every proposal of `house` whose window has elapsed by `at`
    /// (running any monthly jobs on the way) and returns the resolutions.
    pub fn resolve_due(&mut self, house: &HouseId, at: Timestamp) -> Result<Vec<Resolution>> {
        let ((), events) = self.transact_events(house, at, |_| Ok(()))?;
        Ok(events
            .into_iter()
            .filter_map(|e| match e.body {
                EventBody::ProposalResolved {
                    proposal,
                    outcome,
                    upvotes,
                    downvotes,
                    resolved_at,
                } => Some(Resolution {
                    proposal,
                    outcome,
                    upvotes,
                    downvotes,
                    resolved_at,
                }),
                _ => None,
            })
            .collect())
    }

    /// Advances every house to `at`; returns the events this produced.
    pub fn run_scheduler_tick(&mut self, at: Timestamp) -> Result<Vec<Event>> {
        self.begin(at)?;
        let houses: Vec<HouseId> = self.state.houses.keys().cloned().collect();
        let mut out = Vec::new();
        for h in houses {
            out.extend(self.transact_events(&h, at, |_| Ok(()))?.1);
        }
        Ok(out)
    }

    /// Obligation statements of a month that has ended by `at`.
    pub fn monthly_resolution(&mut self, house: &HouseId, month: YearMonth, at: Timestamp) -> Result<Vec<ObligationStatement>> {
        self.transact(house, at, |tx| {
            let h = tx.house();
            if h.calendar.month_end(month) > at {
                return Err(EngineError::MonthNotEnded);
            }
            Ok(h.statements.get(&month).cloned().unwrap_or_default())
        })
    }

    /// Karma heart awards for a month that has ended by `at`.
    pub fn award_monthly_karma_hearts(&mut self, house: &HouseId, month: YearMonth, at: Timestamp) -> Result<Vec<HeartEvent>> {
        self.transact(house, at, |tx| {
            let h = tx.house();
            if h.calendar.month_end(month) > at {
                return Err(EngineError::MonthNotEnded);
            }
            Ok(h
                .hearts
                .history()
                .iter()
                .filter(|e| e.cause == HeartCause::KarmaAward && e.month == Some(month))
                .cloned()
                .collect())
        })
    }

    /// Refill ledger entries for a month that has started by `at`. Refills
    /// run once per account and month.
    pub fn monthly_refill(&mut self, house: &HouseId, month: YearMonth, at: Timestamp) -> Result<Vec<LedgerEntry>> {
        self.transact(house, at, |tx| {
            let h = tx.house();
            if h.calendar.month_start(month) > at {
                return Err(EngineError::MonthNotEnded);
            }
            if h.calendar.month_of(at) == month {
                let pending: Vec<_> = h
                    .things
                    .accounts()
                    .filter(|a| !a.refilled.contains(&month))
                    .map(|a| (a.id, a.monthly_refill))
                    .collect();
                for (account, amount) in pending {
                    tx.emit(EventBody::AccountRefilled { account, month, amount })?;
                }
            }
            Ok(tx
                .house()
                .things
                .ledger()
                .iter()
                .filter(|e| e.kind == LedgerKind::Refill && e.month == Some(month))
                .cloned()
                .collect())
        })
    }

    pub fn record_karma(
        &mut self,
        house: &HouseId,
        giver: &ResidentId,
        recipient: &ResidentId,
        source_message: Option<String>,
        at: Timestamp,
    ) -> Result<KarmaRecognition> {
        self.transact(house, at, |tx| {
            if giver == recipient {
                return Err(EngineError::SelfKarma);
            }
            tx.check_active(giver)?;
            tx.check_active(recipient)?;
            tx.emit(EventBody::KarmaRecorded {
                giver: giver.clone(),
                recipient: recipient.clone(),
                source_message,
            })?;
            Ok(tx.house().hearts.recognitions().last().expect("recorded").clone())
        })
    }

    /// Opens a challenge. `stake` defaults to the policy's default stake.
    pub fn open_challenge(
        &mut self,
        house: &HouseId,
        challenger: &ResidentId,
        challengee: &ResidentId,
        stake: Option<f64>,
        reason: String,
        at: Timestamp,
    ) -> Result<ProposalId> {
        self.transact(house, at, |tx| {
            if challenger == challengee {
                return Err(EngineError::SelfChallenge);
            }
            tx.check_active(challenger)?;
            tx.check_active(challengee)?;
            let h = tx.house();
            let stake = stake.unwrap_or(h.config.hearts.default_stake);
            h.config.hearts.check_stake(stake)?;
            let q = &h.config.quorum;
            let rule = VoteRule {
                window_ms: h.config.windows.challenge_ms(),
                min_upvotes: quorum(h.roster.active_count(), q.challenge, q.challenge_min),
                require_majority: true,
            };
            let subject = Subject::HeartChallenge {
                challenger: challenger.clone(),
                challengee: challengee.clone(),
                stake,
                reason,
            };
            tx.open(Some(challenger.clone()), rule, subject, false)
        })
    }

    /// Audited manual correction of a resident's hearts.
    pub fn adjust_hearts(&mut self, house: &HouseId, resident: &ResidentId, delta: f64, at: Timestamp) -> Result<f64> {
        self.transact(house, at, |tx| {
            if tx.house().roster.get(resident).is_none() {
                return Err(EngineError::UnknownResident(resident.clone()));
            }
            if !crate::hearts::is_quarter_step(delta.abs()) {
                return Err(EngineError::InvalidStake);
            }
            scheduler::change_hearts(tx, resident, delta, HeartCause::ManualAdjust, None)?;
            Ok(tx.house().hearts.balance(resident).expect("opened"))
        })
    }

    /// Opens a purchase proposal carrying the proposer's implicit upvote.
    pub fn propose_purchase(&mut self, house: &HouseId, req: PurchaseRequest, at: Timestamp) -> Result<PurchaseProposal> {
        self.transact(house, at, |tx| {
            tx.check_active(&req.proposer)?;
            if req.price.0 <= 0 {
                return Err(EngineError::NonPositivePrice);
            }
            let h = tx.house();
            let account = h.things.account(req.account)?;
            match &req.item {
                PurchaseItem::Listed { item } => {
                    h.things.active_item(*item)?;
                }
                PurchaseItem::FreeForm { name } => {
                    if name.is_empty() {
                        return Err(EngineError::ConfigInvalid {
                            path: "item.name".into(),
                            message: "must be non-empty".into(),
                        });
                    }
                }
            }
            if req.price > account.balance {
                return Err(EngineError::InsufficientFunds {
                    balance: account.balance.0,
                    price: req.price.0,
                });
            }
            let t = &h.config.things;
            let rule = VoteRule {
                window_ms: h.config.windows.purchase_ms(),
                min_upvotes: min_upvotes_for_price(req.price, t.step(), t.free_form_surcharge, req.item.is_free_form()),
                require_majority: true,
            };
            let subject = Subject::Purchase {
                item: req.item,
                price: req.price,
                account: req.account,
            };
            let id = tx.open(Some(req.proposer), rule, subject, true)?;
            Ok(tx.house().things.purchase(id).expect("opened").clone())
        })
    }

    pub fn propose_account_amendment(
        &mut self,
        house: &HouseId,
        proposer: &ResidentId,
        amendment: AccountAmendment,
        at: Timestamp,
    ) -> Result<ProposalId> {
        self.transact(house, at, |tx| {
            tx.check_active(proposer)?;
            let things = &tx.house().things;
            match &amendment {
                AccountAmendment::Create { name, monthly_refill } => {
                    if name.is_empty() {
                        return Err(EngineError::ConfigInvalid {
                            path: "name".into(),
                            message: "must be non-empty".into(),
                        });
                    }
                    things.check_account_name(name, None)?;
                    if monthly_refill.0 < 0 {
                        return Err(EngineError::NonPositivePrice);
                    }
                }
                AccountAmendment::Rename { account, name } => {
                    things.account(*account)?;
                    things.check_account_name(name, Some(*account))?;
                }
                AccountAmendment::RetargetRefill { account, monthly_refill } => {
                    things.account(*account)?;
                    if monthly_refill.0 < 0 {
                        return Err(EngineError::NonPositivePrice);
                    }
                }
            }
            let rule = tx.amendment_rule(tx.house().config.quorum.account_amendment);
            tx.open(Some(proposer.clone()), rule, Subject::AccountAmendment { amendment }, false)
        })
    }

    pub fn propose_buy_list_amendment(
        &mut self,
        house: &HouseId,
        proposer: &ResidentId,
        amendment: BuyListAmendment,
        at: Timestamp,
    ) -> Result<ProposalId> {
        self.transact(house, at, |tx| {
            tx.check_active(proposer)?;
            let things = &tx.house().things;
            match &amendment {
                BuyListAmendment::Add { name, typical_price, .. } => {
                    if things.active_item_by_name(name).is_some() {
                        return Err(EngineError::DuplicateName(name.clone()));
                    }
                    if typical_price.0 <= 0 {
                        return Err(EngineError::NonPositivePrice);
                    }
                }
                BuyListAmendment::Retire { item } => {
                    things.active_item(*item)?;
                }
            }
            let rule = tx.amendment_rule(tx.house().config.quorum.buy_list_amendment);
            tx.open(Some(proposer.clone()), rule, Subject::BuyListAmendment { amendment }, false)
        })
    }
}
