use std::collections::{BTreeMap, BTreeSet};

use super::HouseState;
use crate::chores::{ChoreBoard, Claim, ClaimStatus, ExemptionRecord};
use crate::consensus::{ProposalBook, Resolution, VoteRule};
use crate::config::HouseConfig;
use crate::error::{EngineError, Result};
use crate::events::{EventBody, Subject};
use crate::hearts::{HeartsBook, KarmaRecognition};
use crate::ids::HouseId;
use crate::prioritization::{compute_priorities, PreferenceBook, PreferenceInput, PriorityDistribution};
use crate::roster::Roster;
use crate::things::{PurchaseProposal, PurchaseStatus, ThingsBook};
use crate::time::Timestamp;

fn corrupt(msg: impl Into<String>) -> EngineError {
    EngineError::CorruptLog(msg.into())
}

impl HouseState {
    pub(crate) fn new(id: HouseId, config: HouseConfig, at: Timestamp) -> Result<Self> {
        config.validate()?;
        let calendar = config.calendar()?;
        Ok(HouseState {
            id,
            calendar,
            created_at: at,
            first_month: calendar.month_of(at),
            roster: Roster::default(),
            chores: ChoreBoard::new(at, config.accrual_cap_multiple),
            preferences: PreferenceBook::default(),
            proposals: ProposalBook::default(),
            claims: BTreeMap::new(),
            exemptions: Vec::new(),
            earned: BTreeMap::new(),
            statements: BTreeMap::new(),
            hearts: HeartsBook::default(),
            things: ThingsBook::default(),
            karma_closed: BTreeSet::new(),
            closed_through: None,
            config,
        })
    }

    /// Recomputes emission and weights from the current roster, chore list
    /// and preferences. Callers checkpoint the chore board first.
    fn refresh_schedule(&mut self) -> Result<()> {
        let ids = self.chores.active_ids();
        if ids.is_empty() {
            self.chores.set_emission(0.0);
            self.chores.set_weights(PriorityDistribution::default());
            return Ok(());
        }
        let active = self.roster.active();
        let matrix = self.preferences.matrix(&ids, &active);
        let floor = self.config.priorities.floor_share / ids.len() as f64;
        let weights = compute_priorities(&matrix, self.config.priorities.damping, floor)?;
        self.chores
            .set_emission(self.config.points_per_resident_per_month * active.len() as f64);
        self.chores.set_weights(weights);
        Ok(())
    }

    pub(crate) fn apply(&mut self, at: Timestamp, body: &EventBody) -> Result<()> {
        let cal = self.calendar;
        match body {
            EventBody::HouseCreated { .. } => return Err(corrupt("house created twice")),
            EventBody::ConfigUpdated { config } => {
                config.validate()?;
                if config.timezone != self.config.timezone {
                    return Err(EngineError::ConfigInvalid {
                        path: "timezone".into(),
                        message: "cannot change after creation".into(),
                    });
                }
                self.chores.checkpoint(at, &cal);
                self.config = config.clone();
                self.chores.set_cap_multiple(config.accrual_cap_multiple);
                self.refresh_schedule()?;
            }
            EventBody::ResidentAdded { resident } => {
                self.chores.checkpoint(at, &cal);
                self.roster.add(resident, at)?;
                self.hearts.open_account(resident, self.config.hearts.baseline);
                self.refresh_schedule()?;
            }
            EventBody::ResidentRemoved { resident } => {
                self.chores.checkpoint(at, &cal);
                self.roster.remove(resident, at)?;
                self.refresh_schedule()?;
            }
            EventBody::ChoreAdded {
                chore,
                name,
                description,
            } => {
                self.chores.checkpoint(at, &cal);
                self.chores.add(*chore, name.clone(), description.clone(), at)?;
                self.refresh_schedule()?;
            }
            EventBody::ChoreEdited {
                chore,
                name,
                description,
            } => {
                self.chores.edit(*chore, name.clone(), description.clone())?;
            }
            EventBody::ChoreRetired { chore, .. } => {
                self.chores.checkpoint(at, &cal);
                self.chores.retire(*chore)?;
                self.refresh_schedule()?;
            }
            EventBody::PreferenceSubmitted {
                resident,
                preferred,
                deprioritized,
            } => {
                self.chores.checkpoint(at, &cal);
                self.preferences.submit(PreferenceInput {
                    resident: resident.clone(),
                    preferred: *preferred,
                    deprioritized: *deprioritized,
                    at,
                });
                self.refresh_schedule()?;
            }
            EventBody::ExemptionDeclared {
                resident,
                from_day,
                to_day,
            } => {
                self.exemptions.push(ExemptionRecord {
                    resident: resident.clone(),
                    from_day: *from_day,
                    to_day: *to_day,
                    declared_at: at,
                });
            }
            EventBody::ProposalOpened {
                proposal,
                kind,
                proposer,
                min_upvotes,
                require_majority,
                window_ms,
                subject,
            } => {
                if subject.kind() != *kind {
                    return Err(corrupt(format!("{proposal}: kind does not match subject")));
                }
                let rule = VoteRule {
                    window_ms: *window_ms,
                    min_upvotes: *min_upvotes,
                    require_majority: *require_majority,
                };
                self.proposals
                    .open(*proposal, *kind, proposer.clone(), rule, subject.clone(), at)?;
                match subject {
                    Subject::ChoreClaim { chore, claimant, .. } => {
                        self.chores.checkpoint(at, &cal);
                        let frozen = self.chores.freeze(*chore)?;
                        self.claims.insert(
                            *proposal,
                            Claim {
                                chore: *chore,
                                claimant: claimant.clone(),
                                value_at_claim: frozen,
                                proposal: *proposal,
                                claimed_at: at,
                                status: ClaimStatus::Pending,
                            },
                        );
                    }
                    Subject::Purchase { item, price, account } => {
                        let proposer = proposer
                            .clone()
                            .ok_or_else(|| corrupt(format!("{proposal}: purchase without proposer")))?;
                        self.things.open_purchase(PurchaseProposal {
                            proposal: *proposal,
                            item: item.clone(),
                            price: *price,
                            account: *account,
                            proposer,
                            opened_at: at,
                            status: PurchaseStatus::Pending,
                        });
                    }
                    _ => {}
                }
            }
            EventBody::BallotCast {
                proposal,
                voter,
                direction,
            } => {
                self.proposals.cast(*proposal, voter.clone(), *direction, at)?;
            }
            EventBody::ProposalResolved {
                proposal,
                outcome,
                upvotes,
                downvotes,
                resolved_at,
            } => {
                self.proposals.record_resolution(Resolution {
                    proposal: *proposal,
                    outcome: *outcome,
                    upvotes: *upvotes,
                    downvotes: *downvotes,
                    resolved_at: *resolved_at,
                })?;
            }
            EventBody::ClaimVerified {
                proposal,
                claimant,
                month,
                ..
            } => {
                let claim = self.pending_claim(*proposal)?;
                let value = claim.value_at_claim;
                claim.status = ClaimStatus::Verified;
                self.chores.release_to_claimant(value);
                *self
                    .earned
                    .entry(*month)
                    .or_default()
                    .entry(claimant.clone())
                    .or_default() += value;
            }
            EventBody::ClaimRejected { proposal, .. } => {
                let claim = self.pending_claim(*proposal)?;
                let (chore, value) = (claim.chore, claim.value_at_claim);
                claim.status = ClaimStatus::Rejected;
                self.chores.checkpoint(at, &cal);
                self.chores.restore(chore, value);
            }
            EventBody::AmendmentVoided { .. } => {}
            EventBody::HeartsChanged {
                resident,
                delta,
                cause,
                month,
            } => {
                self.hearts
                    .apply(resident, *delta, *cause, *month, at, &self.config.hearts);
            }
            EventBody::SanctionSignaled { resident, signal } => {
                self.hearts.set_signal(resident, *signal);
            }
            EventBody::KarmaRecorded {
                giver,
                recipient,
                source_message,
            } => {
                let rec = KarmaRecognition {
                    giver: giver.clone(),
                    recipient: recipient.clone(),
                    at,
                    source_message: source_message.clone(),
                };
                self.hearts.record_karma(rec, cal.month_of(at));
            }
            EventBody::ObligationsResolved { month, statements } => {
                if self.statements.insert(*month, statements.clone()).is_some() {
                    return Err(corrupt(format!("obligations for {month} resolved twice")));
                }
            }
            EventBody::KarmaAwardsClosed { month } => {
                self.karma_closed.insert(*month);
            }
            EventBody::HeartsTicked { month } => {
                self.closed_through = Some(*month);
            }
            EventBody::AccountCreated {
                account,
                name,
                monthly_refill,
            } => {
                self.things
                    .create_account(*account, name.clone(), *monthly_refill, at)?;
            }
            EventBody::AccountRenamed { account, name } => {
                self.things.rename_account(*account, name.clone())?;
            }
            EventBody::AccountRefillChanged {
                account,
                monthly_refill,
            } => {
                self.things.retarget_refill(*account, *monthly_refill)?;
            }
            EventBody::AccountRefilled { account, month, amount } => {
                self.things.refill(*account, *month, *amount, at)?;
            }
            EventBody::PurchaseSettled { proposal, status, .. } => {
                self.things.settle(*proposal, *status, at)?;
            }
            EventBody::BuyListItemAdded {
                item,
                name,
                vendor_hint,
                typical_price,
            } => {
                self.things
                    .add_item(*item, name.clone(), vendor_hint.clone(), *typical_price)?;
            }
            EventBody::BuyListItemRetired { item } => {
                self.things.retire_item(*item)?;
            }
        }
        Ok(())
    }

    fn pending_claim(&mut self, proposal: crate::ids::ProposalId) -> Result<&mut Claim> {
        self.claims
            .get_mut(&proposal)
            .filter(|c| c.status == ClaimStatus::Pending)
            .ok_or_else(|| corrupt(format!("{proposal} is not a pending claim")))
    }
}
