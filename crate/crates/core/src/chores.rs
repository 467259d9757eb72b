//! Continuous-auction chore scheduler.
//!
//! Every month the house mints `points_per_resident × active residents`
//! points. They flow into chores in proportion to the priority weights, so an
//! undone chore's value rises linearly until someone claims it. Rates are
//! piecewise constant: whenever the roster, the weights or the chore list
//! change, every chore is checkpointed and the new rate applies from that
//! instant on.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::{ChoreId, ProposalId, ResidentId};
use crate::prioritization::PriorityDistribution;
use crate::scalar::Scalar;
use crate::time::{Calendar, Timestamp, YearMonth};

/// Value after accruing for `months` (in month units) at
/// `weight × monthly_emission` points per month.
pub fn accrue<F: Scalar>(accrued: F, weight: F, monthly_emission: F, months: F) -> F {
    accrued + weight * monthly_emission * months
}

/// Accrual ceiling: `multiple × weight × monthly_emission`.
pub fn accrual_cap<F: Scalar>(weight: F, monthly_emission: F, multiple: Option<F>) -> Option<F> {
    multiple.map(|m| m * weight * monthly_emission)
}

/// Owed points for a resident-month:
/// `points × (active_days − exempt_days) / days_in_month`, never negative.
pub fn owed_points<F: Scalar>(points_per_month: F, active_days: F, exempt_days: F, days_in_month: F) -> F {
    (points_per_month * (active_days - exempt_days) / days_in_month).max(F::zero())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Chore {
    pub id: ChoreId,
    pub name: String,
    pub description: String,
    pub active: bool,
    pub created_at: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChoreValueState {
    pub chore: ChoreId,
    pub accrued_points: f64,
    pub last_event_at: Timestamp,
}

/// Where every minted point currently sits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PointBalance {
    pub emitted: f64,
    pub credited: f64,
    pub accrued: f64,
    pub escrow: f64,
    pub retired: f64,
    pub capped: f64,
}

impl PointBalance {
    pub fn accounted(&self) -> f64 {
        self.credited + self.accrued + self.escrow + self.retired + self.capped
    }

    pub fn discrepancy(&self) -> f64 {
        self.emitted - self.accounted()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ClaimStatus {
    Pending,
    Verified,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Claim {
    pub chore: ChoreId,
    pub claimant: ResidentId,
    pub value_at_claim: f64,
    pub proposal: ProposalId,
    pub claimed_at: Timestamp,
    pub status: ClaimStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExemptionRecord {
    pub resident: ResidentId,
    pub from_day: NaiveDate,
    pub to_day: NaiveDate,
    pub declared_at: Timestamp,
}

/// Distinct exempt calendar days of `resident` within `month`.
pub fn exempt_days<'a>(records: impl IntoIterator<Item = &'a ExemptionRecord>, resident: &ResidentId, month: YearMonth) -> u32 {
    let mut days = BTreeSet::new();
    for rec in records.into_iter().filter(|r| &r.resident == resident) {
        let start = rec.from_day.max(month.first_day());
        let end = rec.to_day.min(month.last_day());
        let mut d = start;
        while d <= end {
            days.insert(d);
            d = d.succ_opt().expect("date in range");
        }
    }
    days.len() as u32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObligationStatement {
    pub resident: ResidentId,
    pub month: YearMonth,
    pub owed_points: f64,
    pub earned_points: f64,
    pub active_days: f64,
    pub exempt_days: u32,
}

impl ObligationStatement {
    pub fn shortfall(&self) -> f64 {
        (self.owed_points - self.earned_points).max(0.0)
    }
}

/// Chore list, accrued values and the emission schedule of one house.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoreBoard {
    chores: BTreeMap<ChoreId, Chore>,
    values: BTreeMap<ChoreId, ChoreValueState>,
    weights: PriorityDistribution<f64>,
    monthly_emission: f64,
    cap_multiple: Option<f64>,
    checkpoint_at: Timestamp,
    ledger: PointBalance,
    next_id: u64,
}

impl ChoreBoard {
    pub fn new(at: Timestamp, cap_multiple: Option<f64>) -> Self {
        ChoreBoard {
            chores: BTreeMap::new(),
            values: BTreeMap::new(),
            weights: PriorityDistribution::default(),
            monthly_emission: 0.0,
            cap_multiple,
            checkpoint_at: at,
            ledger: PointBalance::default(),
            next_id: 0,
        }
    }

    pub fn next_id(&self) -> ChoreId {
        ChoreId(self.next_id)
    }

    pub fn chore(&self, id: ChoreId) -> Option<&Chore> {
        self.chores.get(&id)
    }

    pub fn chores(&self) -> impl Iterator<Item = &Chore> {
        self.chores.values()
    }

    pub fn active_chore(&self, id: ChoreId) -> Result<&Chore> {
        self.chores
            .get(&id)
            .filter(|c| c.active)
            .ok_or(EngineError::UnknownChore(id))
    }

    pub fn active_ids(&self) -> Vec<ChoreId> {
        self.values.keys().copied().collect()
    }

    pub fn active_by_name(&self, name: &str) -> Option<ChoreId> {
        self.chores.values().find(|c| c.active && c.name == name).map(|c| c.id)
    }

    pub fn weights(&self) -> &PriorityDistribution<f64> {
        &self.weights
    }

    pub fn monthly_emission(&self) -> f64 {
        self.monthly_emission
    }

    pub fn value_state(&self, id: ChoreId) -> Option<&ChoreValueState> {
        self.values.get(&id)
    }

    pub fn cap(&self, id: ChoreId) -> Option<f64> {
        accrual_cap(self.weights.get(id), self.monthly_emission, self.cap_multiple)
    }

    fn raw_value(&self, id: ChoreId, at: Timestamp, cal: &Calendar) -> f64 {
        let state = &self.values[&id];
        let months = cal.month_fraction(state.last_event_at, at);
        accrue(state.accrued_points, self.weights.get(id), self.monthly_emission, months)
    }

    /// Live value of an active chore at `at` (not before the last checkpoint).
    pub fn value_at(&self, id: ChoreId, at: Timestamp, cal: &Calendar) -> Result<f64> {
        self.active_chore(id)?;
        let raw = self.raw_value(id, at, cal);
        Ok(match self.cap(id) {
            Some(cap) => raw.min(cap),
            None => raw,
        })
    }

    /// Accrual rate in points per millisecond during the month containing `at`.
    pub fn rate_per_ms(&self, id: ChoreId, at: Timestamp, cal: &Calendar) -> Result<f64> {
        self.active_chore(id)?;
        let month = cal.month_of(at);
        Ok(self.weights.get(id) * self.monthly_emission / cal.month_len_ms(month) as f64)
    }

    /// Freezes accrual up to `at` under the current rates.
    pub fn checkpoint(&mut self, at: Timestamp, cal: &Calendar) {
        if at <= self.checkpoint_at {
            return;
        }
        if !self.values.is_empty() {
            self.ledger.emitted += self.monthly_emission * cal.month_fraction(self.checkpoint_at, at);
        }
        let ids = self.active_ids();
        for id in ids {
            let raw = self.raw_value(id, at, cal);
            let capped = self.cap(id).map_or(raw, |c| raw.min(c));
            self.ledger.capped += raw - capped;
            let state = self.values.get_mut(&id).expect("active");
            state.accrued_points = capped;
            state.last_event_at = at;
        }
        self.checkpoint_at = at;
    }

    /// Callers checkpoint first.
    pub fn set_emission(&mut self, monthly_emission: f64) {
        self.monthly_emission = monthly_emission;
    }

    /// Callers checkpoint first. Values above the new ceilings are written off.
    pub fn set_weights(&mut self, weights: PriorityDistribution<f64>) {
        self.weights = weights;
        self.enforce_caps();
    }

    pub fn set_cap_multiple(&mut self, multiple: Option<f64>) {
        self.cap_multiple = multiple;
        self.enforce_caps();
    }

    fn enforce_caps(&mut self) {
        for id in self.active_ids() {
            if let Some(cap) = self.cap(id) {
                let state = self.values.get_mut(&id).expect("active");
                if state.accrued_points > cap {
                    self.ledger.capped += state.accrued_points - cap;
                    state.accrued_points = cap;
                }
            }
        }
    }

    pub fn add(&mut self, id: ChoreId, name: String, description: String, at: Timestamp) -> Result<()> {
        if id != self.next_id() {
            return Err(EngineError::CorruptLog(format!("{id} out of sequence")));
        }
        if self.active_by_name(&name).is_some() {
            return Err(EngineError::DuplicateName(name));
        }
        self.next_id += 1;
        self.chores.insert(
            id,
            Chore {
                id,
                name,
                description,
                active: true,
                created_at: at,
            },
        );
        self.values.insert(
            id,
            ChoreValueState {
                chore: id,
                accrued_points: 0.0,
                last_event_at: at,
            },
        );
        Ok(())
    }

    pub fn edit(&mut self, id: ChoreId, name: String, description: String) -> Result<()> {
        self.active_chore(id)?;
        if self.active_by_name(&name).is_some_and(|other| other != id) {
            return Err(EngineError::DuplicateName(name));
        }
        let chore = self.chores.get_mut(&id).expect("checked");
        chore.name = name;
        chore.description = description;
        Ok(())
    }

    /// Deactivates a chore; its accrued value is written off and returned.
    /// Callers checkpoint first.
    pub fn retire(&mut self, id: ChoreId) -> Result<f64> {
        self.active_chore(id)?;
        self.chores.get_mut(&id).expect("checked").active = false;
        let state = self.values.remove(&id).expect("active");
        self.weights.weights.remove(&id);
        self.ledger.retired += state.accrued_points;
        Ok(state.accrued_points)
    }

    /// Moves a chore's value into claim escrow and resets it to zero.
    /// Callers checkpoint first.
    pub fn freeze(&mut self, id: ChoreId) -> Result<f64> {
        self.active_chore(id)?;
        let state = self.values.get_mut(&id).expect("active");
        let v = state.accrued_points;
        state.accrued_points = 0.0;
        self.ledger.escrow += v;
        Ok(v)
    }

    pub fn release_to_claimant(&mut self, value: f64) {
        self.ledger.escrow -= value;
        self.ledger.credited += value;
    }

    /// Returns escrowed value to the chore, or writes it off if the chore has
    /// been retired meanwhile. Callers checkpoint first.
    pub fn restore(&mut self, id: ChoreId, value: f64) {
        self.ledger.escrow -= value;
        match self.values.get_mut(&id) {
            Some(state) => {
                state.accrued_points += value;
                self.enforce_caps();
            }
            None => self.ledger.retired += value,
        }
    }

    /// Point accounting as of `at`, including accrual since the last checkpoint.
    pub fn balance(&self, at: Timestamp, cal: &Calendar) -> PointBalance {
        let mut b = self.ledger;
        if at > self.checkpoint_at && !self.values.is_empty() {
            b.emitted += self.monthly_emission * cal.month_fraction(self.checkpoint_at, at);
        }
        let mut accrued = 0.0;
        for &id in self.values.keys() {
            let raw = self.raw_value(id, at.max(self.checkpoint_at), cal);
            let capped = self.cap(id).map_or(raw, |c| raw.min(c));
            b.capped += raw - capped;
            accrued += capped;
        }
        b.accrued = accrued;
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::{MS_PER_DAY, MS_PER_HOUR};

    fn board_with(weights: &[f64], emission: f64, cap: Option<f64>) -> ChoreBoard {
        let mut b = ChoreBoard::new(april(), cap);
        for (i, _) in weights.iter().enumerate() {
            b.add(ChoreId(i as u64), format!("c{i}"), String::new(), april()).unwrap();
        }
        b.set_emission(emission);
        b.set_weights(PriorityDistribution {
            weights: weights.iter().enumerate().map(|(i, w)| (ChoreId(i as u64), *w)).collect(),
        });
        b
    }

    // 1970-04 has 30 days.
    fn april() -> Timestamp {
        Calendar::default().month_start(YearMonth::new(1970, 4).unwrap())
    }

    #[test]
    fn linear_accrual_worked_example() {
        let cal = Calendar::default();
        let mut b = board_with(&[0.2, 0.8], 900.0, None);
        b.checkpoint(april(), &cal);
        let v = b.value_at(ChoreId(0), april().plus(48 * MS_PER_HOUR), &cal).unwrap();
        assert!((v - 12.0).abs() < 1e-9, "{v}");
        let rate = b.rate_per_ms(ChoreId(0), april(), &cal).unwrap() * MS_PER_HOUR as f64;
        assert!((rate - 0.25).abs() < 1e-12);
        let full = b.value_at(ChoreId(0), april().plus(30 * MS_PER_DAY), &cal).unwrap();
        assert!((full - 180.0).abs() < 1e-9);
    }

    #[test]
    fn freeze_resets_and_restore_returns() {
        let cal = Calendar::default();
        let mut b = board_with(&[1.0], 900.0, None);
        let t = april().plus(48 * MS_PER_HOUR);
        b.checkpoint(t, &cal);
        let v = b.freeze(ChoreId(0)).unwrap();
        assert!(v > 0.0);
        assert_eq!(b.value_at(ChoreId(0), t, &cal).unwrap(), 0.0);
        let later = t.plus(MS_PER_HOUR);
        b.checkpoint(later, &cal);
        let since = b.value_at(ChoreId(0), later, &cal).unwrap();
        b.restore(ChoreId(0), v);
        assert!((b.value_at(ChoreId(0), later, &cal).unwrap() - (v + since)).abs() < 1e-9);
        assert!(b.balance(later, &cal).discrepancy().abs() < 1e-9);
    }

    #[test]
    fn cap_limits_accrual_and_is_accounted() {
        let cal = Calendar::default();
        let b = board_with(&[0.5, 0.5], 100.0, Some(2.0));
        let t = april().plus(200 * MS_PER_DAY);
        assert_eq!(b.value_at(ChoreId(0), t, &cal).unwrap(), 100.0);
        let bal = b.balance(t, &cal);
        assert!(bal.capped > 0.0);
        assert!(bal.discrepancy().abs() < 1e-6);
    }

    #[test]
    fn retirement_writes_off() {
        let cal = Calendar::default();
        let mut b = board_with(&[0.5, 0.5], 100.0, None);
        let t = april().plus(10 * MS_PER_DAY);
        b.checkpoint(t, &cal);
        let gone = b.retire(ChoreId(1)).unwrap();
        assert!(gone > 0.0);
        assert!(matches!(b.value_at(ChoreId(1), t, &cal), Err(EngineError::UnknownChore(_))));
        assert_eq!(b.balance(t, &cal).retired, gone);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut b = board_with(&[1.0], 100.0, None);
        assert_eq!(
            b.add(ChoreId(1), "c0".into(), String::new(), Timestamp(0)),
            Err(EngineError::DuplicateName("c0".into()))
        );
    }

    #[test]
    fn proration() {
        assert!((owed_points(100.0_f64, 30.0, 10.0, 30.0) - 66.666_666_666).abs() < 1e-6);
        assert_eq!(owed_points(100.0, 30.0, 30.0, 30.0), 0.0);
        assert!((owed_points(100.0_f64, 15.0, 10.0, 30.0) - 16.666_666_666).abs() < 1e-6);
        assert_eq!(owed_points(100.0, 5.0, 10.0, 30.0), 0.0);
    }

    #[test]
    fn exempt_days_are_counted_once_per_month() {
        let r = ResidentId::new("r").unwrap();
        let d = |m, day| NaiveDate::from_ymd_opt(2024, m, day).unwrap();
        let recs = vec![
            ExemptionRecord { resident: r.clone(), from_day: d(3, 25), to_day: d(4, 5), declared_at: Timestamp(0) },
            ExemptionRecord { resident: r.clone(), from_day: d(4, 3), to_day: d(4, 8), declared_at: Timestamp(0) },
        ];
        assert_eq!(exempt_days(&recs, &r, YearMonth::new(2024, 4).unwrap()), 8);
        assert_eq!(exempt_days(&recs, &r, YearMonth::new(2024, 3).unwrap()), 7);
    }
}
