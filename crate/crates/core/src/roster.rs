//! House membership as tenure intervals. Residents are never deleted;
//! departures close an interval.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::ResidentId;
use crate::time::{Calendar, Timestamp, YearMonth};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Tenure {
    pub active_from: Timestamp,
    pub active_until: Option<Timestamp>,
}

impl Tenure {
    pub fn contains(&self, at: Timestamp) -> bool {
        self.active_from <= at && self.active_until.is_none_or(|u| at < u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResidentRecord {
    pub id: ResidentId,
    pub tenures: Vec<Tenure>,
}

impl ResidentRecord {
    pub fn is_active(&self) -> bool {
        self.tenures.last().is_some_and(|t| t.active_until.is_none())
    }

    pub fn active_at(&self, at: Timestamp) -> bool {
        self.tenures.iter().any(|t| t.contains(at))
    }

    /// Milliseconds of tenure inside `month`.
    pub fn active_ms_in(&self, cal: &Calendar, month: YearMonth) -> u64 {
        self.tenures
            .iter()
            .map(|t| cal.overlap_ms(month, t.active_from, t.active_until))
            .sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Roster {
    residents: BTreeMap<ResidentId, ResidentRecord>,
}

impl Roster {
    pub fn check_add(&self, id: &ResidentId) -> Result<()> {
        match self.residents.get(id) {
            Some(r) if r.is_active() => Err(EngineError::DuplicateResident(id.clone())),
            _ => Ok(()),
        }
    }

    pub fn add(&mut self, id: &ResidentId, at: Timestamp) -> Result<&ResidentRecord> {
        self.check_add(id)?;
        let rec = self.residents.entry(id.clone()).or_insert_with(|| ResidentRecord {
            id: id.clone(),
            tenures: Vec::new(),
        });
        rec.tenures.push(Tenure {
            active_from: at,
            active_until: None,
        });
        Ok(rec)
    }

    pub fn check_active(&self, id: &ResidentId) -> Result<()> {
        if self.is_active(id) {
            Ok(())
        } else {
            Err(EngineError::UnknownResident(id.clone()))
        }
    }

    pub fn remove(&mut self, id: &ResidentId, at: Timestamp) -> Result<&ResidentRecord> {
        self.check_active(id)?;
        let rec = self.residents.get_mut(id).expect("checked");
        rec.tenures.last_mut().expect("active tenure").active_until = Some(at);
        Ok(rec)
    }

    pub fn is_active(&self, id: &ResidentId) -> bool {
        self.residents.get(id).is_some_and(|r| r.is_active())
    }

    pub fn get(&self, id: &ResidentId) -> Option<&ResidentRecord> {
        self.residents.get(id)
    }

    pub fn active(&self) -> BTreeSet<ResidentId> {
        self.residents
            .values()
            .filter(|r| r.is_active())
            .map(|r| r.id.clone())
            .collect()
    }

    pub fn active_count(&self) -> usize {
        self.residents.values().filter(|r| r.is_active()).count()
    }

    pub fn all(&self) -> impl Iterator<Item = &ResidentRecord> {
        self.residents.values()
    }
}
