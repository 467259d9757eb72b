//! Time-driven processes: proposal resolution and the monthly jobs.
//!
//! Months close in calendar order. Before a month closes, every proposal
//! whose window ended inside it is resolved (in deadline order, ties by id),
//! then the four monthly jobs run in a fixed order:
//! obligations → refill → karma → hearts tick. Each job leaves a marker
//! event, so advancing twice to the same instant is a no-op.

use super::Tx;
use crate::consensus::Outcome;
use crate::error::Result;
use crate::events::{AccountAmendment, BuyListAmendment, ChoreAmendment, EventBody, Subject};
use crate::hearts::{karma_winners, HeartCause};
use crate::ids::{ProposalId, ResidentId};
use crate::time::YearMonth;

/// Shortfalls below this many points are rounding noise, not shirking.
const SHORTFALL_EPSILON: f64 = 1e-9;

/// Brings the transaction's house up to `tx.at`.
pub(crate) fn advance(tx: &mut Tx<'_>) -> Result<()> {
    loop {
        let h = tx.house();
        let open = h.closed_through.map_or(h.first_month, YearMonth::succ);
        let boundary = h.calendar.month_end(open);
        for id in h.proposals.due(tx.at, boundary) {
            resolve_one(tx, id)?;
        }
        if boundary > tx.at {
            return Ok(());
        }
        close_month(tx, open)?;
    }
}

fn resolve_one(tx: &mut Tx<'_>, id: ProposalId) -> Result<()> {
    let h = tx.house();
    let resolution = h.proposals.evaluate(id)?;
    let subject = h.proposals.get(id).expect("due proposal exists").subject.clone();
    let passed = resolution.outcome == Outcome::Passed;
    tx.emit(EventBody::ProposalResolved {
        proposal: id,
        outcome: resolution.outcome,
        upvotes: resolution.upvotes,
        downvotes: resolution.downvotes,
        resolved_at: resolution.resolved_at,
    })?;

    match subject {
        Subject::ChoreClaim { chore, claimant, .. } => {
            let value = tx.house().claims[&id].value_at_claim;
            if passed {
                let month = tx.house().calendar.month_of(resolution.resolved_at);
                tx.emit(EventBody::ClaimVerified {
                    proposal: id,
                    chore,
                    claimant,
                    points: value,
                    month,
                })
            } else {
                tx.emit(EventBody::ClaimRejected {
                    proposal: id,
                    chore,
                    restored: value,
                })
            }
        }
        Subject::HeartChallenge {
            challenger,
            challengee,
            stake,
            ..
        } => {
            let loser = if passed { challengee } else { challenger };
            change_hearts(tx, &loser, -stake, HeartCause::ChallengeLoss, None)
        }
        Subject::Purchase { price, account, .. } => {
            let h = tx.house();
            let status = h.things.settlement_for(id, passed)?;
            let buyer = h.things.purchase(id).expect("purchase exists").proposer.clone();
            tx.emit(EventBody::PurchaseSettled {
                proposal: id,
                account,
                price,
                buyer,
                status,
            })
        }
        _ if !passed => Ok(()),
        Subject::ChoreAmendment { amendment } => apply_chore_amendment(tx, id, amendment),
        Subject::BuyListAmendment { amendment } => apply_buy_list_amendment(tx, id, amendment),
        Subject::AccountAmendment { amendment } => {
            let month = tx.house().calendar.month_of(resolution.resolved_at);
            apply_account_amendment(tx, id, amendment, month)
        }
    }
}

fn void(tx: &mut Tx<'_>, proposal: ProposalId, reason: String) -> Result<()> {
    tx.emit(EventBody::AmendmentVoided { proposal, reason })
}

// Amendments are re-validated at resolution time: the list may have changed
// while the vote was open.

fn apply_chore_amendment(tx: &mut Tx<'_>, id: ProposalId, amendment: ChoreAmendment) -> Result<()> {
    let h = tx.house();
    match amendment {
        ChoreAmendment::Add { name, description } => {
            if h.chores.active_by_name(&name).is_some() {
                return void(tx, id, format!("an active chore is already named {name:?}"));
            }
            let chore = h.chores.next_id();
            tx.emit(EventBody::ChoreAdded {
                chore,
                name,
                description,
            })
        }
        ChoreAmendment::Retire { chore } => match h.chores.value_at(chore, tx.at, &h.calendar) {
            Ok(discarded) => tx.emit(EventBody::ChoreRetired { chore, discarded }),
            Err(e) => void(tx, id, e.to_string()),
        },
        ChoreAmendment::Edit {
            chore,
            name,
            description,
        } => {
            if let Err(e) = h.chores.active_chore(chore) {
                return void(tx, id, e.to_string());
            }
            if h.chores.active_by_name(&name).is_some_and(|other| other != chore) {
                return void(tx, id, format!("an active chore is already named {name:?}"));
            }
            tx.emit(EventBody::ChoreEdited {
                chore,
                name,
                description,
            })
        }
    }
}

fn apply_buy_list_amendment(tx: &mut Tx<'_>, id: ProposalId, amendment: BuyListAmendment) -> Result<()> {
    let h = tx.house();
    match amendment {
        BuyListAmendment::Add {
            name,
            vendor_hint,
            typical_price,
        } => {
            if h.things.active_item_by_name(&name).is_some() {
                return void(tx, id, format!("an active item is already named {name:?}"));
            }
            let item = h.things.next_item_id();
            tx.emit(EventBody::BuyListItemAdded {
                item,
                name,
                vendor_hint,
                typical_price,
            })
        }
        BuyListAmendment::Retire { item } => match h.things.active_item(item) {
            Ok(_) => tx.emit(EventBody::BuyListItemRetired { item }),
            Err(e) => void(tx, id, e.to_string()),
        },
    }
}

fn apply_account_amendment(tx: &mut Tx<'_>, id: ProposalId, amendment: AccountAmendment, month: YearMonth) -> Result<()> {
    let h = tx.house();
    match amendment {
        AccountAmendment::Create { name, monthly_refill } => {
            if let Err(e) = h.things.check_account_name(&name, None) {
                return void(tx, id, e.to_string());
            }
            let account = h.things.next_account_id();
            tx.emit(EventBody::AccountCreated {
                account,
                name,
                monthly_refill,
            })?;
            tx.emit(EventBody::AccountRefilled {
                account,
                month,
                amount: monthly_refill,
            })
        }
        AccountAmendment::Rename { account, name } => {
            if let Err(e) = h.things.account(account).and_then(|_| h.things.check_account_name(&name, Some(account))) {
                return void(tx, id, e.to_string());
            }
            tx.emit(EventBody::AccountRenamed { account, name })
        }
        AccountAmendment::RetargetRefill { account, monthly_refill } => {
            if let Err(e) = h.things.account(account) {
                return void(tx, id, e.to_string());
            }
            tx.emit(EventBody::AccountRefillChanged {
                account,
                monthly_refill,
            })
        }
    }
}

/// Emits a clamped heart change, plus a sanction signal when the resident's
/// sanction level moves.
pub(crate) fn change_hearts(
    tx: &mut Tx<'_>,
    resident: &ResidentId,
    requested: f64,
    cause: HeartCause,
    month: Option<YearMonth>,
) -> Result<()> {
    let h = tx.house();
    let policy = &h.config.hearts;
    let delta = h.hearts.effective_delta(resident, requested, policy);
    let before = h.hearts.last_signal(resident);
    tx.emit(EventBody::HeartsChanged {
        resident: resident.clone(),
        delta,
        cause,
        month,
    })?;
    let h = tx.house();
    let balance = h.hearts.balance(resident).expect("account opened");
    let signal = h.config.hearts.sanction(balance);
    if signal != before {
        tx.emit(EventBody::SanctionSignaled {
            resident: resident.clone(),
            signal,
        })?;
    }
    Ok(())
}

fn close_month(tx: &mut Tx<'_>, month: YearMonth) -> Result<()> {
    // 1. Obligations and shortfall penalties.
    if !tx.house().statements.contains_key(&month) {
        let statements = tx.house().obligations(month);
        tx.emit(EventBody::ObligationsResolved {
            month,
            statements: statements.clone(),
        })?;
        for s in &statements {
            let h = tx.house();
            let shortfall = s.shortfall();
            if shortfall <= SHORTFALL_EPSILON || !h.roster.is_active(&s.resident) {
                continue;
            }
            let penalty = h.config.hearts.shortfall_penalty(shortfall, s.owed_points);
            if penalty > 0.0 {
                change_hearts(tx, &s.resident, -penalty, HeartCause::ChoreShortfall, Some(month))?;
            }
        }
    }

    // 2. Refill for the month about to start.
    let next = month.succ();
    let refills: Vec<_> = tx
        .house()
        .things
        .accounts()
        .filter(|a| !a.refilled.contains(&next))
        .map(|a| (a.id, a.monthly_refill))
        .collect();
    for (account, amount) in refills {
        tx.emit(EventBody::AccountRefilled { account, month: next, amount })?;
    }

    // 3. Karma awards.
    if !tx.house().karma_closed.contains(&month) {
        let h = tx.house();
        let slots = h.config.hearts.karma_slots(h.roster.active_count());
        let winners: Vec<_> = karma_winners(&h.hearts.karma_tallies(month), slots)
            .into_iter()
            .filter(|r| h.roster.is_active(r))
            .collect();
        let award = h.config.hearts.karma_award;
        for r in &winners {
            change_hearts(tx, r, award, HeartCause::KarmaAward, Some(month))?;
        }
        tx.emit(EventBody::KarmaAwardsClosed { month })?;
    }

    // 4. Regeneration and fading.
    let h = tx.house();
    let ticks: Vec<_> = h
        .roster
        .active()
        .into_iter()
        .filter_map(|r| {
            let bal = h.hearts.balance(&r)?;
            let (delta, cause) = h.config.hearts.tick_delta(bal);
            (delta != 0.0).then_some((r, delta, cause))
        })
        .collect();
    for (r, delta, cause) in ticks {
        change_hearts(tx, &r, delta, cause, Some(month))?;
    }
    tx.emit(EventBody::HeartsTicked { month })
}
