//! Lazy-consensus voting shared by chore claims, challenges, purchases and
//! list amendments.
//!
//! A proposal stays open for a fixed window. It passes when it collects at
//! least `min_upvotes` positive ballots and, if `require_majority` is set,
//! strictly more upvotes than downvotes. Silence never approves anything.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::{ProposalId, ResidentId};
use crate::time::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ProposalKind {
    ChoreClaim,
    ChoreAmendment,
    HeartChallenge,
    Purchase,
    BuyListAmendment,
    AccountAmendment,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Outcome {
    Passed,
    Failed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub upvotes: u32,
    pub downvotes: u32,
}

/// The resolution rule.
pub fn passes(tally: Tally, min_upvotes: u32, require_majority: bool) -> bool {
    tally.upvotes >= min_upvotes && (!require_majority || tally.upvotes > tally.downvotes)
}

/// `ceil(active × fraction)`, never below `floor`.
pub fn quorum(active: usize, fraction: f64, floor: u32) -> u32 {
    ((active as f64 * fraction).ceil() as u32).max(floor)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ballot {
    pub voter: ResidentId,
    pub direction: Direction,
    pub at: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Resolution {
    pub proposal: ProposalId,
    pub outcome: Outcome,
    pub upvotes: u32,
    pub downvotes: u32,
    pub resolved_at: Timestamp,
}

/// Voting parameters of a proposal, fixed when it opens.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VoteRule {
    pub window_ms: u64,
    pub min_upvotes: u32,
    pub require_majority: bool,
}

impl VoteRule {
    pub fn validate(&self) -> Result<()> {
        if self.window_ms == 0 {
            return Err(EngineError::InvalidWindow);
        }
        if self.min_upvotes == 0 {
            return Err(EngineError::InvalidThreshold);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Proposal<S> {
    pub id: ProposalId,
    pub kind: ProposalKind,
    pub proposer: Option<ResidentId>,
    pub opened_at: Timestamp,
    pub rule: VoteRule,
    pub subject: S,
    pub ballots: BTreeMap<ResidentId, Ballot>,
    pub resolution: Option<Resolution>,
}

impl<S> Proposal<S> {
    pub fn deadline(&self) -> Timestamp {
        self.opened_at.plus(self.rule.window_ms)
    }

    pub fn is_open_at(&self, at: Timestamp) -> bool {
        self.resolution.is_none() && at < self.deadline()
    }

    pub fn tally(&self) -> Tally {
        let mut t = Tally::default();
        for b in self.ballots.values() {
            match b.direction {
                Direction::Up => t.upvotes += 1,
                Direction::Down => t.downvotes += 1,
            }
        }
        t
    }
}

/// All proposals of a house, with an index of open proposals by deadline.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalBook<S> {
    proposals: BTreeMap<ProposalId, Proposal<S>>,
    due: BTreeSet<(Timestamp, ProposalId)>,
    next_id: u64,
}

impl<S> Default for ProposalBook<S> {
    fn default() -> Self {
        ProposalBook {
            proposals: BTreeMap::new(),
            due: BTreeSet::new(),
            next_id: 0,
        }
    }
}

impl<S> ProposalBook<S> {
    pub fn next_id(&self) -> ProposalId {
        ProposalId(self.next_id)
    }

    pub fn get(&self, id: ProposalId) -> Option<&Proposal<S>> {
        self.proposals.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Proposal<S>> {
        self.proposals.values()
    }

    pub fn open_at(&self, at: Timestamp) -> impl Iterator<Item = &Proposal<S>> {
        self.due
            .iter()
            .filter_map(|(_, id)| self.proposals.get(id))
            .filter(move |p| p.is_open_at(at))
    }

    /// Opens a proposal under the next sequential id.
    pub fn open(
        &mut self,
        id: ProposalId,
        kind: ProposalKind,
        proposer: Option<ResidentId>,
        rule: VoteRule,
        subject: S,
        at: Timestamp,
    ) -> Result<()> {
        rule.validate()?;
        if id != self.next_id() {
            return Err(EngineError::CorruptLog(format!(
                "proposal id {id} out of sequence (expected {})",
                self.next_id()
            )));
        }
        self.next_id += 1;
        let p = Proposal {
            id,
            kind,
            proposer,
            opened_at: at,
            rule,
            subject,
            ballots: BTreeMap::new(),
            resolution: None,
        };
        self.due.insert((p.deadline(), id));
        self.proposals.insert(id, p);
        Ok(())
    }

    pub fn check_ballot(&self, id: ProposalId, at: Timestamp) -> Result<&Proposal<S>> {
        let p = self.proposals.get(&id).ok_or(EngineError::UnknownProposal(id))?;
        if !p.is_open_at(at) {
            return Err(EngineError::ProposalClosed(id));
        }
        Ok(p)
    }

    /// Records a ballot, replacing the voter's earlier ballot on the same
    /// proposal.
    pub fn cast(&mut self, id: ProposalId, voter: ResidentId, direction: Direction, at: Timestamp) -> Result<()> {
        self.check_ballot(id, at)?;
        let p = self.proposals.get_mut(&id).expect("checked");
        p.ballots.insert(voter.clone(), Ballot { voter, direction, at });
        Ok(())
    }

    /// Open proposals whose window has elapsed by `at` and whose deadline is
    /// strictly before `before`, in deadline order.
    pub fn due(&self, at: Timestamp, before: Timestamp) -> Vec<ProposalId> {
        self.due
            .iter()
            .take_while(|(deadline, _)| *deadline <= at && *deadline < before)
            .map(|(_, id)| *id)
            .collect()
    }

    /// Evaluates a due proposal without recording anything.
    pub fn evaluate(&self, id: ProposalId) -> Result<Resolution> {
        let p = self.proposals.get(&id).ok_or(EngineError::UnknownProposal(id))?;
        let tally = p.tally();
        let outcome = if passes(tally, p.rule.min_upvotes, p.rule.require_majority) {
            Outcome::Passed
        } else {
            Outcome::Failed
        };
        Ok(Resolution {
            proposal: id,
            outcome,
            upvotes: tally.upvotes,
            downvotes: tally.downvotes,
            resolved_at: p.deadline(),
        })
    }

    pub fn record_resolution(&mut self, resolution: Resolution) -> Result<()> {
        let id = resolution.proposal;
        let p = self.proposals.get_mut(&id).ok_or(EngineError::UnknownProposal(id))?;
        if p.resolution.is_some() {
            return Err(EngineError::CorruptLog(format!("{id} resolved twice")));
        }
        self.due.remove(&(p.deadline(), id));
        p.resolution = Some(resolution);
        Ok(())
    }
}
