//! Scenario files (TOML).
//!
//! ```toml
//! seed = 7
//! months = 12
//! start = "2024-01"
//!
//! [house]                      # a full house config; chores and accounts live here
//! [[house.chores]]
//! name = "Dishes"
//!
//! [groups]                     # chore groups reported by the share analysis
//! kitchen = ["Dishes"]
//!
//! [effort]                     # points a typical resident wants before doing a chore
//! Dishes = 5
//!
//! [[agents]]
//! name = "ana"
//! diligence = 0.9
//! specialization = { Dishes = 0.6 }
//!
//! [[preferences]]              # pairwise priority inputs submitted on day one
//! by = "*"                     # every founding agent
//! preferred = "Dishes"
//! deprioritized = "Yard"
//!
//! [[spending]]
//! account = "General"
//! rate = 0.05                  # proposals per agent-day at initiative 1
//! items = ["Dish soap"]
//!
//! [[planted]]
//! kind = "shirk"
//! month = 3
//! agent = "ana"
//! ```
//!
//! Months and days in `planted` are zero-based offsets from `start` and
//! one-based days of that month respectively.

use std::collections::{BTreeMap, BTreeSet};

use commons_core::config::{AccountDef, ChoreDef, ItemDef};
use commons_core::{HouseConfig, YearMonth};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::SimError;

fn default_start() -> YearMonth {
    YearMonth::new(2024, 1).expect("valid month")
}

fn default_effort() -> f64 {
    15.0
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    pub seed: u64,
    pub months: u32,
    #[serde(default = "default_start")]
    pub start: YearMonth,
    #[serde(default)]
    pub house: HouseConfig,
    #[serde(default)]
    pub groups: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub effort: BTreeMap<String, f64>,
    #[serde(default = "default_effort")]
    pub default_effort: f64,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub preferences: Vec<PreferenceSpec>,
    #[serde(default)]
    pub spending: Vec<SpendingSpec>,
    #[serde(default)]
    pub planted: Vec<Planted>,
}

/// How one simulated resident behaves.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentPolicy {
    /// Daily probability of doing a chore while this month's quota is unmet.
    pub diligence: f64,
    /// Relative pull toward doing chores once the quota is met.
    pub eagerness: f64,
    /// Preference over chores; unlisted chores share the remaining mass.
    pub specialization: BTreeMap<String, f64>,
    /// Karma recognitions given per month, on average.
    pub karma_generosity: f64,
    /// Relative likelihood of being the one others recognize.
    pub karma_appeal: f64,
    /// Probability of downvoting a dishonest claim when seeing it.
    pub vote_honesty: f64,
    /// Probability of upvoting an honest proposal when seeing it.
    pub upvote_rate: f64,
    /// Expected exempt days per month.
    pub absenteeism: f64,
    /// Multiplier on every spending profile's rate.
    pub initiative: f64,
}

impl Default for AgentPolicy {
    fn default() -> Self {
        AgentPolicy {
            diligence: 0.8,
            eagerness: 0.3,
            specialization: BTreeMap::new(),
            karma_generosity: 2.0,
            karma_appeal: 1.0,
            vote_honesty: 0.8,
            upvote_rate: 0.5,
            absenteeism: 0.0,
            initiative: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    /// Expands into `name1..=nameN` with the same policy.
    #[serde(default)]
    pub count: Option<u32>,
    /// Month offset at which the agent moves in.
    #[serde(default)]
    pub joins: u32,
    /// Month offset at which the agent moves out.
    #[serde(default)]
    pub leaves: Option<u32>,
    #[serde(flatten)]
    pub policy: AgentPolicy,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceSpec {
    /// An agent name, or `*` for every agent present on day one.
    pub by: String,
    pub preferred: String,
    pub deprioritized: String,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpendingSpec {
    pub account: String,
    /// Expected proposals per agent-day at initiative 1.
    pub rate: f64,
    /// Buy-list items, priced at their typical price ±25%.
    #[serde(default)]
    pub items: Vec<String>,
    /// Free-form purchases, priced uniformly in `price_cents`.
    #[serde(default)]
    pub free_form: Vec<String>,
    #[serde(default)]
    pub price_cents: Option<(i64, i64)>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum Planted {
    /// `agent` claims `chore` without doing it.
    DishonestClaim { month: u32, day: u32, agent: String, chore: String },
    /// `agent` does no chores for the whole month.
    Shirk { month: u32, agent: String },
    /// `agent` challenges `target`, staking `stake` hearts.
    Challenge {
        month: u32,
        day: u32,
        agent: String,
        target: String,
        #[serde(default)]
        stake: Option<f64>,
    },
}

/// One concrete agent after `count` expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub name: String,
    pub joins: u32,
    pub leaves: Option<u32>,
    pub policy: AgentPolicy,
}

impl SimScenario {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let s: SimScenario = toml::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Parses `text` after setting the dotted `path` (e.g.
    /// `agents.0.diligence`) to `value`, itself parsed as a TOML value.
    pub fn from_toml_with(text: &str, path: &str, value: &str) -> Result<Self, SimError> {
        let mut root: toml::Value = toml::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .map(|mut t| t.remove("v").expect("key present"))
            .unwrap_or_else(|_| toml::Value::String(value.to_string()));
        set_path(&mut root, path, parsed)?;
        let s: SimScenario = root.try_into().map_err(|e: toml::de::Error| SimError::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn agents(&self) -> Vec<Agent> {
        let mut out = Vec::new();
        for spec in &self.agents {
            let names: Vec<String> = match spec.count {
                None => vec![spec.name.clone()],
                Some(n) => (1..=n).map(|i| format!("{}{i}", spec.name)).collect(),
            };
            for name in names {
                out.push(Agent {
                    name,
                    joins: spec.joins,
                    leaves: spec.leaves,
                    policy: spec.policy.clone(),
                });
            }
        }
        out
    }

    pub fn effort_of(&self, chore: &str) -> f64 {
        self.effort.get(chore).copied().unwrap_or(self.default_effort)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if self.months == 0 {
            return bad("months must be at least 1".into());
        }
        self.house
            .validate()
            .map_err(|e| SimError::InvalidScenario(format!("house: {e}")))?;
        let chores: BTreeSet<&str> = self.house.chores.iter().map(|c| c.name.as_str()).collect();
        if chores.is_empty() {
            return bad("house.chores must not be empty".into());
        }
        let known_chore = |c: &str, ctx: &str| -> Result<(), SimError> {
            if chores.contains(c) {
                Ok(())
            } else {
                Err(SimError::InvalidScenario(format!("{ctx}: unknown chore {c:?}")))
            }
        };
        for (group, members) in &self.groups {
            for c in members {
                known_chore(c, &format!("groups.{group}"))?;
            }
        }
        for (c, e) in &self.effort {
            known_chore(c, "effort")?;
            if !(*e > 0.0) {
                return bad(format!("effort.{c} must be positive"));
            }
        }
        if !(self.default_effort > 0.0) {
            return bad("default_effort must be positive".into());
        }

        let agents = self.agents();
        if agents.is_empty() {
            return bad("at least one agent is required".into());
        }
        let mut names = BTreeSet::new();
        for a in &agents {
            if a.name.is_empty() || !names.insert(a.name.as_str()) {
                return bad(format!("agent names must be unique and non-empty: {:?}", a.name));
            }
            let p = &a.policy;
            for (field, v) in [
                ("diligence", p.diligence),
                ("eagerness", p.eagerness),
                ("vote_honesty", p.vote_honesty),
                ("upvote_rate", p.upvote_rate),
            ] {
                if !(0.0..=1.0).contains(&v) {
                    return bad(format!("agent {}: {field} must be within [0, 1]", a.name));
                }
            }
            for (field, v) in [
                ("karma_generosity", p.karma_generosity),
                ("karma_appeal", p.karma_appeal),
                ("absenteeism", p.absenteeism),
                ("initiative", p.initiative),
            ] {
                if !(v >= 0.0) || !v.is_finite() {
                    return bad(format!("agent {}: {field} must be non-negative", a.name));
                }
            }
            let mut mass = 0.0;
            for (c, v) in &p.specialization {
                known_chore(c, &format!("agent {} specialization", a.name))?;
                if !(*v >= 0.0) {
                    return bad(format!("agent {}: specialization weights must be non-negative", a.name));
                }
                mass += v;
            }
            if mass > 1.0 + 1e-9 || (p.specialization.len() == chores.len() && (mass - 1.0).abs() > 1e-9) {
                return bad(format!("agent {}: specialization must lie on the simplex", a.name));
            }
            if a.leaves.is_some_and(|l| l <= a.joins) {
                return bad(format!("agent {}: leaves must come after joins", a.name));
            }
        }
        let agent = |n: &str, ctx: &str| -> Result<(), SimError> {
            if names.contains(n) {
                Ok(())
            } else {
                Err(SimError::InvalidScenario(format!("{ctx}: unknown agent {n:?}")))
            }
        };
        for p in &self.preferences {
            if p.by != "*" {
                agent(&p.by, "preferences")?;
            }
            known_chore(&p.preferred, "preferences")?;
            known_chore(&p.deprioritized, "preferences")?;
        }
        let accounts: BTreeSet<&str> = self.house.accounts.iter().map(|a| a.name.as_str()).collect();
        let items: BTreeSet<&str> = self.house.buy_list.iter().map(|i| i.name.as_str()).collect();
        for s in &self.spending {
            if !accounts.contains(s.account.as_str()) {
                return bad(format!("spending: unknown account {:?}", s.account));
            }
            if !(s.rate >= 0.0) {
                return bad("spending.rate must be non-negative".into());
            }
            if let Some(i) = s.items.iter().find(|i| !items.contains(i.as_str())) {
                return bad(format!("spending: {i:?} is not on the buy list"));
            }
            if s.items.is_empty() && s.free_form.is_empty() {
                return bad("spending needs items or free_form names".into());
            }
            match s.price_cents {
                Some((lo, hi)) if lo <= 0 || hi < lo => return bad("spending.price_cents must be 0 < lo <= hi".into()),
                None if !s.free_form.is_empty() => return bad("free_form spending needs price_cents".into()),
                _ => {}
            }
        }
        for p in &self.planted {
            let (month, who) = match p {
                Planted::DishonestClaim { month, agent: a, chore, day } => {
                    known_chore(chore, "planted")?;
                    check_day(*day)?;
                    (*month, a)
                }
                Planted::Shirk { month, agent: a } => (*month, a),
                Planted::Challenge {
                    month,
                    agent: a,
                    target,
                    day,
                    ..
                } => {
                    agent(target, "planted")?;
                    check_day(*day)?;
                    (*month, a)
                }
            };
            agent(who, "planted")?;
            if month >= self.months {
                return bad(format!("planted event in month {month} is past the end of the run"));
            }
        }
        Ok(())
    }
}

impl SimScenario {
    /// A small scenario drawn at random from `seed`: a few chores, accounts
    /// and agents with arbitrary policies, roster changes, and planted
    /// dishonest claims and challenges. Used for invariant checks.
    pub fn random(seed: u64) -> SimScenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let months = rng.gen_range(1..=3);
        let n_chores = rng.gen_range(2..=6);
        let chores: Vec<String> = (0..n_chores).map(|i| format!("chore{i}")).collect();
        let timezone = ["UTC", "America/Los_Angeles", "Europe/Berlin", "Asia/Tokyo"][rng.gen_range(0..4)];
        let mut house = HouseConfig {
            timezone: timezone.into(),
            chores: chores.iter().map(|n| ChoreDef { name: n.clone(), description: String::new() }).collect(),
            accounts: (0..rng.gen_range(1..=2))
                .map(|i| AccountDef { name: format!("acct{i}"), monthly_refill_cents: rng.gen_range(0..=40_000) })
                .collect(),
            buy_list: (0..rng.gen_range(0..=3))
                .map(|i| ItemDef {
                    name: format!("item{i}"),
                    vendor_hint: String::new(),
                    typical_price_cents: rng.gen_range(100..=6_000),
                })
                .collect(),
            ..HouseConfig::default()
        };
        if rng.gen_bool(0.3) {
            house.accrual_cap_multiple = None;
        }
        let effort = chores.iter().map(|c| (c.clone(), rng.gen_range(1.0..40.0))).collect();
        let n_agents = rng.gen_range(2..=8);
        let agents: Vec<AgentSpec> = (0..n_agents)
            .map(|i| {
                let joins = if i < 2 { 0 } else { rng.gen_range(0..months) };
                let leaves = (i >= 2 && rng.gen_bool(0.3)).then(|| rng.gen_range(joins + 1..=months));
                let mut specialization = BTreeMap::new();
                if rng.gen_bool(0.3) {
                    specialization.insert(chores[rng.gen_range(0..n_chores)].clone(), rng.gen_range(0.0..1.0));
                }
                AgentSpec {
                    name: format!("a{i}"),
                    count: None,
                    joins,
                    leaves,
                    policy: AgentPolicy {
                        diligence: rng.gen_range(0.0..=1.0),
                        eagerness: rng.gen_range(0.0..=1.0),
                        specialization,
                        karma_generosity: rng.gen_range(0.0..4.0),
                        karma_appeal: rng.gen_range(0.0..3.0),
                        vote_honesty: rng.gen_range(0.0..=1.0),
                        upvote_rate: rng.gen_range(0.0..=1.0),
                        absenteeism: rng.gen_range(0.0..6.0),
                        initiative: rng.gen_range(0.0..2.0),
                    },
                }
            })
            .collect();
        let preferences = (0..rng.gen_range(0..=6))
            .map(|_| PreferenceSpec {
                by: if rng.gen_bool(0.5) { "*".into() } else { format!("a{}", rng.gen_range(0..n_agents)) },
                preferred: chores[rng.gen_range(0..n_chores)].clone(),
                deprioritized: chores[rng.gen_range(0..n_chores)].clone(),
            })
            .collect();
        let spending = house
            .accounts
            .iter()
            .map(|a| {
                let items: Vec<String> = house.buy_list.iter().map(|i| i.name.clone()).collect();
                SpendingSpec {
                    account: a.name.clone(),
                    rate: rng.gen_range(0.0..0.2),
                    free_form: if items.is_empty() || rng.gen_bool(0.3) { vec!["thing".into()] } else { Vec::new() },
                    items,
                    price_cents: Some((100, rng.gen_range(100..=30_000))),
                }
            })
            .collect();
        let planted = (0..rng.gen_range(0..=5))
            .map(|_| {
                let month = rng.gen_range(0..months);
                let day = rng.gen_range(1..=28);
                let agent = format!("a{}", rng.gen_range(0..n_agents));
                match rng.gen_range(0..3) {
                    0 => Planted::DishonestClaim { month, day, agent, chore: chores[rng.gen_range(0..n_chores)].clone() },
                    1 => Planted::Shirk { month, agent },
                    _ => Planted::Challenge {
                        month,
                        day,
                        agent,
                        target: format!("a{}", rng.gen_range(0..n_agents)),
                        stake: rng.gen_bool(0.5).then(|| rng.gen_range(1..=8) as f64 * 0.25),
                    },
                }
            })
            .collect();
        SimScenario {
            seed,
            months,
            start: YearMonth::new(2024, rng.gen_range(1..=12)).expect("valid month"),
            house,
            groups: BTreeMap::new(),
            effort,
            default_effort: default_effort(),
            agents,
            preferences,
            spending,
            planted,
        }
    }
}

fn check_day(day: u32) -> Result<(), SimError> {
    if (1..=28).contains(&day) {
        Ok(())
    } else {
        Err(SimError::InvalidScenario(format!("planted day {day} must be within 1..=28")))
    }
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), SimError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            toml::Value::Table(t) => {
                if last {
                    t.insert(key.to_string(), value);
                    return Ok(());
                }
                t.entry(key.to_string()).or_insert_with(|| toml::Value::Table(Default::default()))
            }
            toml::Value::Array(a) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| SimError::InvalidScenario(format!("{path}: {key:?} is not an index")))?;
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| SimError::InvalidScenario(format!("{path}: index {idx} out of range")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(SimError::InvalidScenario(format!("{path}: {key:?} is not a table or array"))),
        };
    }
    Err(SimError::InvalidScenario("empty parameter path".into()))
}
