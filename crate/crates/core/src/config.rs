//! Per-house configuration. Every governance constant lives here so that a
//! house can tune it; changes are recorded as events.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::hearts::{is_quarter_step, HeartsPolicy};
use crate::things::Cents;
use crate::time::{Calendar, MS_PER_HOUR};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "snake_case")]
pub struct Windows {
    pub claim_hours: u64,
    pub challenge_hours: u64,
    pub purchase_hours: u64,
    pub amendment_hours: u64,
}

impl Default for Windows {
    fn default() -> Self {
        Windows {
            claim_hours: 72,
            challenge_hours: 72,
            purchase_hours: 24,
            amendment_hours: 48,
        }
    }
}

impl Windows {
    pub fn claim_ms(&self) -> u64 {
        self.claim_hours * MS_PER_HOUR
    }
    pub fn challenge_ms(&self) -> u64 {
        self.challenge_hours * MS_PER_HOUR
    }
    pub fn purchase_ms(&self) -> u64 {
        self.purchase_hours * MS_PER_HOUR
    }
    pub fn amendment_ms(&self) -> u64 {
        self.amendment_hours * MS_PER_HOUR
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "snake_case")]
pub struct ClaimPolicy {
    /// Claims worth at most this many points need `small_min_upvotes`.
    pub small_claim_points: f64,
    pub small_min_upvotes: u32,
    pub large_min_upvotes: u32,
}

impl Default for ClaimPolicy {
    fn default() -> Self {
        ClaimPolicy {
            small_claim_points: 25.0,
            small_min_upvotes: 1,
            large_min_upvotes: 2,
        }
    }
}

impl ClaimPolicy {
    pub fn min_upvotes(&self, value: f64) -> u32 {
        if value <= self.small_claim_points {
            self.small_min_upvotes
        } else {
            self.large_min_upvotes
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "snake_case")]
pub struct PriorityConfig {
    pub damping: f64,
    /// Uniform floor as a share of `1/n`; the absolute floor is `floor_share / n`.
    pub floor_share: f64,
}

impl Default for PriorityConfig {
    fn default() -> Self {
        PriorityConfig {
            damping: 0.85,
            floor_share: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "snake_case")]
pub struct QuorumConfig {
    pub chore_amendment: f64,
    pub buy_list_amendment: f64,
    pub account_amendment: f64,
    pub challenge: f64,
    pub challenge_min: u32,
}

impl Default for QuorumConfig {
    fn default() -> Self {
        QuorumConfig {
            chore_amendment: 0.4,
            buy_list_amendment: 0.4,
            account_amendment: 0.5,
            challenge: 0.4,
            challenge_min: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "snake_case")]
pub struct ThingsConfig {
    pub threshold_step_cents: i64,
    pub free_form_surcharge: u32,
}

impl Default for ThingsConfig {
    fn default() -> Self {
        ThingsConfig {
            threshold_step_cents: 5000,
            free_form_surcharge: 1,
        }
    }
}

impl ThingsConfig {
    pub fn step(&self) -> Cents {
        Cents(self.threshold_step_cents)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct AccountDef {
    pub name: String,
    pub monthly_refill_cents: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct ChoreDef {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct ItemDef {
    pub name: String,
    #[serde(default)]
    pub vendor_hint: String,
    pub typical_price_cents: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "snake_case")]
pub struct HouseConfig {
    pub timezone: String,
    pub points_per_resident_per_month: f64,
    /// Ceiling on a chore's accrued value as a multiple of its monthly share.
    pub accrual_cap_multiple: Option<f64>,
    pub windows: Windows,
    pub claims: ClaimPolicy,
    pub priorities: PriorityConfig,
    pub quorum: QuorumConfig,
    pub hearts: HeartsPolicy,
    pub things: ThingsConfig,
    /// Founding chore list.
    pub chores: Vec<ChoreDef>,
    /// Founding accounts.
    pub accounts: Vec<AccountDef>,
    /// Founding buy list.
    pub buy_list: Vec<ItemDef>,
}

impl Default for HouseConfig {
    fn default() -> Self {
        HouseConfig {
            timezone: "UTC".into(),
            points_per_resident_per_month: 100.0,
            accrual_cap_multiple: Some(2.0),
            windows: Windows::default(),
            claims: ClaimPolicy::default(),
            priorities: PriorityConfig::default(),
            quorum: QuorumConfig::default(),
            hearts: HeartsPolicy::default(),
            things: ThingsConfig::default(),
            chores: Vec::new(),
            accounts: vec![AccountDef {
                name: "General".into(),
                monthly_refill_cents: 20_000,
            }],
            buy_list: Vec::new(),
        }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> EngineError {
    EngineError::ConfigInvalid {
        path: path.into(),
        message: message.into(),
    }
}

fn fraction(path: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(path, "must be within [0, 1]"))
    }
}

fn quarter(path: &str, v: f64) -> Result<()> {
    if v >= 0.0 && is_quarter_step(v) {
        Ok(())
    } else {
        Err(invalid(path, "must be a non-negative multiple of 0.25"))
    }
}

impl HouseConfig {
    pub fn validate(&self) -> Result<()> {
        Calendar::new(&self.timezone)?;
        if !(self.points_per_resident_per_month > 0.0) || !self.points_per_resident_per_month.is_finite() {
            return Err(invalid("points_per_resident_per_month", "must be positive"));
        }
        if let Some(m) = self.accrual_cap_multiple {
            if !(m >= 1.0) || !m.is_finite() {
                return Err(invalid("accrual_cap_multiple", "must be at least 1"));
            }
        }
        for (path, hours) in [
            ("windows.claim_hours", self.windows.claim_hours),
            ("windows.challenge_hours", self.windows.challenge_hours),
            ("windows.purchase_hours", self.windows.purchase_hours),
            ("windows.amendment_hours", self.windows.amendment_hours),
        ] {
            if hours == 0 {
                return Err(invalid(path, "must be positive"));
            }
        }
        if self.claims.small_min_upvotes == 0 || self.claims.large_min_upvotes == 0 {
            return Err(invalid("claims", "minimum upvotes must be at least 1"));
        }
        let d = self.priorities.damping;
        if !(d > 0.0 && d < 1.0) {
            return Err(invalid("priorities.damping", "must be in (0, 1)"));
        }
        let f = self.priorities.floor_share;
        if !(0.0..1.0).contains(&f) {
            return Err(invalid("priorities.floor_share", "must be in [0, 1)"));
        }
        fraction("quorum.chore_amendment", self.quorum.chore_amendment)?;
        fraction("quorum.buy_list_amendment", self.quorum.buy_list_amendment)?;
        fraction("quorum.account_amendment", self.quorum.account_amendment)?;
        fraction("quorum.challenge", self.quorum.challenge)?;

        let h = &self.hearts;
        quarter("hearts.baseline", h.baseline)?;
        quarter("hearts.max_hearts", h.max_hearts)?;
        quarter("hearts.regen_rate", h.regen_rate)?;
        quarter("hearts.fade_rate", h.fade_rate)?;
        quarter("hearts.karma_award", h.karma_award)?;
        quarter("hearts.max_stake", h.max_stake)?;
        quarter("hearts.default_stake", h.default_stake)?;
        quarter("hearts.severe_penalty", h.severe_penalty)?;
        if h.baseline > h.max_hearts {
            return Err(invalid("hearts.baseline", "must not exceed max_hearts"));
        }
        if h.karma_divisor == 0 {
            return Err(invalid("hearts.karma_divisor", "must be positive"));
        }
        if h.default_stake <= 0.0 || h.default_stake > h.max_stake {
            return Err(invalid("hearts.default_stake", "must be in (0, max_stake]"));
        }
        let mut last = 0.0;
        for (i, (bound, hearts)) in h.shortfall_tiers.iter().enumerate() {
            if *bound <= last || *bound > 1.0 {
                return Err(invalid(&format!("hearts.shortfall_tiers[{i}]"), "bounds must ascend within (0, 1]"));
            }
            quarter(&format!("hearts.shortfall_tiers[{i}]"), *hearts)?;
            last = *bound;
        }

        if self.things.threshold_step_cents <= 0 {
            return Err(invalid("things.threshold_step_cents", "must be positive"));
        }
        for (i, a) in self.accounts.iter().enumerate() {
            if a.name.is_empty() {
                return Err(invalid(&format!("accounts[{i}].name"), "must be non-empty"));
            }
            if a.monthly_refill_cents < 0 {
                return Err(invalid(&format!("accounts[{i}].monthly_refill_cents"), "must be non-negative"));
            }
            if self.accounts[..i].iter().any(|b| b.name == a.name) {
                return Err(invalid(&format!("accounts[{i}].name"), "duplicate account name"));
            }
        }
        for (i, c) in self.chores.iter().enumerate() {
            if c.name.is_empty() {
                return Err(invalid(&format!("chores[{i}].name"), "must be non-empty"));
            }
            if self.chores[..i].iter().any(|d| d.name == c.name) {
                return Err(invalid(&format!("chores[{i}].name"), "duplicate chore name"));
            }
        }
        for (i, item) in self.buy_list.iter().enumerate() {
            if item.typical_price_cents <= 0 {
                return Err(invalid(&format!("buy_list[{i}].typical_price_cents"), "must be positive"));
            }
            if self.buy_list[..i].iter().any(|j| j.name == item.name) {
                return Err(invalid(&format!("buy_list[{i}].name"), "duplicate item name"));
            }
        }
        Ok(())
    }

    pub fn calendar(&self) -> Result<Calendar> {
        Calendar::new(&self.timezone)
    }
}
