//! Hearts: a symbolic norm-compliance ledger.
//!
//! Everyone starts at a baseline of five hearts. Karma and regeneration add
//! hearts; lost challenges, chore shortfalls and fading remove them. Balances
//! live in `[0, max_hearts]` and move in quarter-heart steps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::ResidentId;
use crate::time::{Timestamp, YearMonth};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "snake_case")]
pub struct HeartsPolicy {
    pub baseline: f64,
    pub max_hearts: f64,
    /// Hearts regained per monthly tick while below baseline.
    pub regen_rate: f64,
    /// Hearts lost per monthly tick while above baseline.
    pub fade_rate: f64,
    pub karma_award: f64,
    /// Top-K karma recipients with `K = max(1, floor(active / divisor))`.
    pub karma_divisor: u32,
    pub max_stake: f64,
    pub default_stake: f64,
    /// Shortfall penalties as `(upper bound on shortfall / owed, hearts)`,
    /// ascending; anything beyond the last bound costs `severe_penalty`.
    pub shortfall_tiers: Vec<(f64, f64)>,
    pub severe_penalty: f64,
    /// Balances below this (and above zero) draw a warning.
    pub warning_below: f64,
}

impl Default for HeartsPolicy {
    fn default() -> Self {
        HeartsPolicy {
            baseline: 5.0,
            max_hearts: 7.0,
            regen_rate: 0.25,
            fade_rate: 0.25,
            karma_award: 0.5,
            karma_divisor: 4,
            max_stake: 2.0,
            default_stake: 1.0,
            shortfall_tiers: vec![(0.25, 0.5), (0.5, 1.0)],
            severe_penalty: 1.5,
            warning_below: 3.0,
        }
    }
}

pub fn is_quarter_step(v: f64) -> bool {
    (v * 4.0).fract() == 0.0
}

impl HeartsPolicy {
    pub fn clamp(&self, hearts: f64) -> f64 {
        hearts.clamp(0.0, self.max_hearts)
    }

    /// Penalty for missing `shortfall` of `owed` points.
    pub fn shortfall_penalty(&self, shortfall: f64, owed: f64) -> f64 {
        if shortfall <= 0.0 || owed <= 0.0 {
            return 0.0;
        }
        let fraction = shortfall / owed;
        self.shortfall_tiers
            .iter()
            .find(|(bound, _)| fraction <= *bound)
            .map_or(self.severe_penalty, |(_, hearts)| *hearts)
    }

    /// Signed drift toward baseline for one monthly tick.
    pub fn tick_delta(&self, hearts: f64) -> (f64, HeartCause) {
        if hearts < self.baseline {
            ((self.baseline - hearts).min(self.regen_rate), HeartCause::Regeneration)
        } else if hearts > self.baseline {
            (-(hearts - self.baseline).min(self.fade_rate), HeartCause::Fade)
        } else {
            (0.0, HeartCause::Regeneration)
        }
    }

    pub fn karma_slots(&self, active_residents: usize) -> usize {
        (active_residents / self.karma_divisor.max(1) as usize).max(1)
    }

    pub fn check_stake(&self, stake: f64) -> Result<()> {
        if !(stake > 0.0) || !is_quarter_step(stake) {
            return Err(EngineError::InvalidStake);
        }
        if stake > self.max_stake {
            return Err(EngineError::ExcessiveStake { max: self.max_stake });
        }
        Ok(())
    }

    pub fn sanction(&self, hearts: f64) -> SanctionSignal {
        if hearts <= 0.0 {
            SanctionSignal::Financial
        } else if hearts < self.warning_below {
            SanctionSignal::Warning
        } else {
            SanctionSignal::None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum HeartCause {
    KarmaAward,
    ChallengeLoss,
    ChoreShortfall,
    Regeneration,
    Fade,
    ManualAdjust,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SanctionSignal {
    None,
    Warning,
    Financial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HeartEvent {
    pub resident: ResidentId,
    pub delta: f64,
    pub cause: HeartCause,
    pub at: Timestamp,
    pub balance: f64,
    /// Month a monthly pathway (shortfall, karma, tick) settled.
    pub month: Option<YearMonth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KarmaRecognition {
    pub giver: ResidentId,
    pub recipient: ResidentId,
    pub at: Timestamp,
    pub source_message: Option<String>,
}

/// Recipients of the top `slots` distinct karma tallies; ties at the cutoff
/// are all included and zero tallies never win.
pub fn karma_winners(tallies: &BTreeMap<ResidentId, u32>, slots: usize) -> Vec<ResidentId> {
    let mut counts: Vec<u32> = tallies.values().copied().filter(|c| *c > 0).collect();
    if counts.is_empty() || slots == 0 {
        return Vec::new();
    }
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let cutoff = counts[(slots - 1).min(counts.len() - 1)];
    tallies
        .iter()
        .filter(|(_, c)| **c >= cutoff && **c > 0)
        .map(|(r, _)| r.clone())
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeartsBook {
    balances: BTreeMap<ResidentId, f64>,
    history: Vec<HeartEvent>,
    karma: BTreeMap<YearMonth, BTreeMap<ResidentId, u32>>,
    recognitions: Vec<KarmaRecognition>,
    signals: BTreeMap<ResidentId, SanctionSignal>,
}

impl HeartsBook {
    pub fn open_account(&mut self, resident: &ResidentId, baseline: f64) {
        self.balances.entry(resident.clone()).or_insert(baseline);
    }

    pub fn balance(&self, resident: &ResidentId) -> Option<f64> {
        self.balances.get(resident).copied()
    }

    pub fn balances(&self) -> &BTreeMap<ResidentId, f64> {
        &self.balances
    }

    pub fn history(&self) -> &[HeartEvent] {
        &self.history
    }

    pub fn history_of<'a>(&'a self, resident: &'a ResidentId) -> impl Iterator<Item = &'a HeartEvent> + 'a {
        self.history.iter().filter(move |e| &e.resident == resident)
    }

    /// Effective delta after clamping a requested change.
    pub fn effective_delta(&self, resident: &ResidentId, requested: f64, policy: &HeartsPolicy) -> f64 {
        let cur = self.balance(resident).unwrap_or(policy.baseline);
        policy.clamp(cur + requested) - cur
    }

    pub fn apply(
        &mut self,
        resident: &ResidentId,
        delta: f64,
        cause: HeartCause,
        month: Option<YearMonth>,
        at: Timestamp,
        policy: &HeartsPolicy,
    ) -> f64 {
        let bal = self.balances.entry(resident.clone()).or_insert(policy.baseline);
        *bal = policy.clamp(*bal + delta);
        let balance = *bal;
        self.history.push(HeartEvent {
            resident: resident.clone(),
            delta,
            cause,
            at,
            balance,
            month,
        });
        balance
    }

    pub fn record_karma(&mut self, rec: KarmaRecognition, month: YearMonth) {
        *self
            .karma
            .entry(month)
            .or_default()
            .entry(rec.recipient.clone())
            .or_default() += 1;
        self.recognitions.push(rec);
    }

    pub fn karma_tallies(&self, month: YearMonth) -> BTreeMap<ResidentId, u32> {
        self.karma.get(&month).cloned().unwrap_or_default()
    }

    pub fn recognitions(&self) -> &[KarmaRecognition] {
        &self.recognitions
    }

    pub fn last_signal(&self, resident: &ResidentId) -> SanctionSignal {
        self.signals.get(resident).copied().unwrap_or(SanctionSignal::None)
    }

    pub fn set_signal(&mut self, resident: &ResidentId, signal: SanctionSignal) {
        self.signals.insert(resident.clone(), signal);
    }
}
