//! Read-only views of a house at a given instant.

use serde::{Deserialize, Serialize};

use super::HouseState;
use crate::chores::{exempt_days, owed_points, ObligationStatement, PointBalance};
use crate::consensus::Proposal;
use crate::error::{EngineError, Result};
use crate::events::Subject;
use crate::hearts::SanctionSignal;
use crate::ids::{ChoreId, ResidentId};
use crate::things::PurchaseProposal;
use crate::time::{Timestamp, YearMonth, MS_PER_DAY, MS_PER_HOUR};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChoreView {
    pub id: ChoreId,
    pub name: String,
    pub description: String,
    pub value: f64,
    pub weight: f64,
    /// Points per hour during the current month.
    pub rate_per_hour: f64,
    pub cap: Option<f64>,
    /// Instant `value` was computed for; clients extrapolate from here.
    pub as_of: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PriorityView {
    pub chore: ChoreId,
    pub name: String,
    pub weight: f64,
    pub rate_per_hour: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HeartsBoardRow {
    pub resident: ResidentId,
    pub hearts: f64,
    pub signal: SanctionSignal,
    pub active: bool,
}

impl HouseState {
    pub fn current_value(&self, chore: ChoreId, at: Timestamp) -> Result<f64> {
        self.chores.value_at(chore, at, &self.calendar)
    }

    /// Active chores, most valuable first.
    pub fn chore_board(&self, at: Timestamp) -> Vec<ChoreView> {
        let mut out: Vec<ChoreView> = self
            .chores
            .active_ids()
            .into_iter()
            .map(|id| {
                let c = self.chores.chore(id).expect("active chore");
                ChoreView {
                    id,
                    name: c.name.clone(),
                    description: c.description.clone(),
                    value: self.chores.value_at(id, at, &self.calendar).expect("active"),
                    weight: self.chores.weights().get(id),
                    rate_per_hour: self.chores.rate_per_ms(id, at, &self.calendar).expect("active") * MS_PER_HOUR as f64,
                    cap: self.chores.cap(id),
                    as_of: at,
                }
            })
            .collect();
        out.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.id.cmp(&b.id)));
        out
    }

    /// The distribution currently driving emission.
    pub fn priorities(&self, at: Timestamp) -> Vec<PriorityView> {
        self.chores
            .active_ids()
            .into_iter()
            .map(|id| PriorityView {
                chore: id,
                name: self.chores.chore(id).expect("active").name.clone(),
                weight: self.chores.weights().get(id),
                rate_per_hour: self.chores.rate_per_ms(id, at, &self.calendar).expect("active") * MS_PER_HOUR as f64,
            })
            .collect()
    }

    /// Where every emitted point sits as of `at`.
    pub fn point_balance(&self, at: Timestamp) -> PointBalance {
        self.chores.balance(at, &self.calendar)
    }

    pub fn hearts_board(&self) -> Vec<HeartsBoardRow> {
        self.hearts
            .balances()
            .iter()
            .map(|(r, &hearts)| HeartsBoardRow {
                resident: r.clone(),
                hearts,
                signal: self.config.hearts.sanction(hearts),
                active: self.roster.is_active(r),
            })
            .collect()
    }

    pub fn sanction_check(&self, resident: &ResidentId) -> Result<SanctionSignal> {
        let hearts = self
            .hearts
            .balance(resident)
            .ok_or_else(|| EngineError::UnknownResident(resident.clone()))?;
        Ok(self.config.hearts.sanction(hearts))
    }

    /// Statements for `month`: final ones once it has closed, otherwise a
    /// preview assuming every current tenure lasts to month end.
    pub fn obligations(&self, month: YearMonth) -> Vec<ObligationStatement> {
        if let Some(s) = self.statements.get(&month) {
            return s.clone();
        }
        let days = month.days() as f64;
        let month_ms = self.calendar.month_len_ms(month) as f64;
        let earned = self.earned.get(&month);
        self.roster
            .all()
            .filter_map(|rec| {
                let ms = rec.active_ms_in(&self.calendar, month);
                if ms == 0 {
                    return None;
                }
                let active_days = if ms as f64 == month_ms { days } else { ms as f64 / MS_PER_DAY as f64 };
                let exempt = exempt_days(&self.exemptions, &rec.id, month);
                Some(ObligationStatement {
                    resident: rec.id.clone(),
                    month,
                    owed_points: owed_points(self.config.points_per_resident_per_month, active_days, exempt as f64, days),
                    earned_points: earned.and_then(|e| e.get(&rec.id)).copied().unwrap_or(0.0),
                    active_days,
                    exempt_days: exempt,
                })
            })
            .collect()
    }

    pub fn open_proposals(&self, at: Timestamp) -> impl Iterator<Item = &Proposal<Subject>> {
        self.proposals.open_at(at)
    }

    /// Purchases proposed during `month` (all purchases if `None`).
    pub fn purchases_in(&self, month: Option<YearMonth>) -> Vec<&PurchaseProposal> {
        self.things
            .purchases()
            .filter(|p| month.is_none_or(|m| self.calendar.month_of(p.opened_at) == m))
            .collect()
    }
}
