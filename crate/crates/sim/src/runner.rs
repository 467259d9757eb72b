//! Drives a real engine with simulated residents.
//!
//! Agents act once per simulated day, in a seeded random order, through the
//! same command methods a live client uses. Nothing here writes engine state
//! directly.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{Datelike, NaiveDate};
use commons_core::config::HouseConfig;
use commons_core::time::MS_PER_MINUTE;
use commons_core::*;
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::scenario::{Agent, Planted, SimScenario};
use crate::SimError;

/// Output of one scenario run.
#[derive(Clone, Debug)]
pub struct SimRun {
    pub house: HouseId,
    pub log: Vec<Event>,
    /// Proposals opened by planted dishonest claims.
    pub dishonest_claims: Vec<ProposalId>,
    /// Commands the engine refused, by error code (e.g. `InsufficientFunds`).
    pub refused: BTreeMap<&'static str, u32>,
}

pub const SIM_HOUSE: &str = "sim";

pub fn run_scenario(s: &SimScenario) -> Result<SimRun, SimError> {
    run_scenario_with(s, |_, _| {})
}

/// Runs `s`, calling `observe` after every simulated day and once more
/// after the final month has closed.
pub fn run_scenario_with(s: &SimScenario, mut observe: impl FnMut(&Engine, Timestamp)) -> Result<SimRun, SimError> {
    s.validate()?;
    let mut sim = Sim::new(s)?;
    let end = (0..s.months).fold(s.start, |m, _| m.succ());
    let mut date = s.start.first_day();
    while YearMonth::of_date(date) < end {
        sim.day(date)?;
        observe(&sim.engine, sim.last);
        date = date.succ_opt().expect("date in range");
    }
    let close = sim.cal.month_start(end);
    sim.engine.run_scheduler_tick(close)?;
    observe(&sim.engine, close);
    Ok(SimRun {
        house: sim.house,
        log: sim.engine.log().to_vec(),
        dishonest_claims: sim.dishonest.into_iter().collect(),
        refused: sim.refused,
    })
}

struct AgentState {
    id: ResidentId,
    spec: Agent,
    /// Effort threshold per chore, scaled by specialization.
    thresholds: BTreeMap<ChoreId, f64>,
    /// Points this agent expects credited, by credit month.
    credited: BTreeMap<YearMonth, f64>,
    seen: BTreeSet<ProposalId>,
    exempt: Vec<(NaiveDate, NaiveDate)>,
    shirk: BTreeSet<u32>,
}

impl AgentState {
    fn present(&self, month_index: u32) -> bool {
        month_index >= self.spec.joins && self.spec.leaves.is_none_or(|l| month_index < l)
    }

    fn away(&self, date: NaiveDate) -> bool {
        self.exempt.iter().any(|(a, b)| (*a..=*b).contains(&date))
    }
}

struct Sim<'a> {
    s: &'a SimScenario,
    engine: Engine,
    house: HouseId,
    cal: Calendar,
    rng: ChaCha8Rng,
    agents: Vec<AgentState>,
    chores: BTreeMap<String, ChoreId>,
    accounts: BTreeMap<String, AccountId>,
    items: BTreeMap<String, (ItemId, Cents)>,
    dishonest: BTreeSet<ProposalId>,
    refused: BTreeMap<&'static str, u32>,
    /// Last timestamp handed out; every action gets a fresh, later one.
    last: Timestamp,
    day_start: Timestamp,
    slot: u64,
}

fn thresholds(s: &SimScenario, agent: &Agent, chores: &BTreeMap<String, ChoreId>) -> BTreeMap<ChoreId, f64> {
    let n = chores.len() as f64;
    let spec = &agent.policy.specialization;
    let listed: f64 = spec.values().sum();
    let unlisted = chores.keys().filter(|c| !spec.contains_key(*c)).count();
    let rest = if unlisted > 0 { (1.0 - listed).max(0.0) / unlisted as f64 } else { 0.0 };
    chores
        .iter()
        .map(|(name, id)| {
            let share = spec.get(name).copied().unwrap_or(if spec.is_empty() { 1.0 / n } else { rest });
            let scale = if share > 0.0 { (1.0 / n / share).sqrt() } else { f64::INFINITY };
            (*id, s.effort_of(name) * scale)
        })
        .collect()
}

impl<'a> Sim<'a> {
    fn new(s: &'a SimScenario) -> Result<Self, SimError> {
        let config: HouseConfig = s.house.clone();
        let cal = config.calendar()?;
        let t0 = cal.month_start(s.start);
        let mut engine = Engine::new(Arc::new(ManualClock::new(t0)));
        let house = HouseId::new(SIM_HOUSE)?;
        engine.create_house(&house, config, t0)?;
        let h = engine.house(&house)?;
        let chores = h
            .chores
            .active_ids()
            .into_iter()
            .map(|id| (h.chores.chore(id).expect("active").name.clone(), id))
            .collect();
        let accounts = h.things.accounts().map(|a| (a.name.clone(), a.id)).collect();
        let items = h.things.items().map(|i| (i.name.clone(), (i.id, i.typical_price))).collect();
        let mut shirk: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
        for p in &s.planted {
            if let Planted::Shirk { month, agent } = p {
                shirk.entry(agent).or_default().insert(*month);
            }
        }
        let agents = s
            .agents()
            .into_iter()
            .map(|a| {
                Ok(AgentState {
                    id: ResidentId::new(a.name.clone())?,
                    thresholds: thresholds(s, &a, &chores),
                    shirk: shirk.get(a.name.as_str()).cloned().unwrap_or_default(),
                    spec: a,
                    credited: BTreeMap::new(),
                    seen: BTreeSet::new(),
                    exempt: Vec::new(),
                })
            })
            .collect::<Result<_, EngineError>>()?;
        Ok(Sim {
            s,
            engine,
            house,
            cal,
            rng: ChaCha8Rng::seed_from_u64(s.seed),
            agents,
            chores,
            accounts,
            items,
            dishonest: BTreeSet::new(),
            refused: BTreeMap::new(),
            last: t0,
            day_start: t0,
            slot: 0,
        })
    }

    fn at(&mut self) -> Timestamp {
        // Actions start at 06:00 local and are a minute apart.
        let t = self.day_start.plus(6 * 60 * MS_PER_MINUTE + self.slot * MS_PER_MINUTE).max(self.last);
        self.slot += 1;
        self.last = t;
        t
    }

    /// Records a refused command; engine faults abort the run.
    fn outcome<T>(&mut self, r: commons_core::Result<T>) -> Result<Option<T>, SimError> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(e @ (EngineError::StoreUnavailable(_) | EngineError::CorruptLog(_) | EngineError::ClockRegression { .. })) => {
                Err(e.into())
            }
            Err(e) => {
                *self.refused.entry(e.code()).or_default() += 1;
                Ok(None)
            }
        }
    }

    fn month_index(&self, month: YearMonth) -> u32 {
        let d = (month.year - self.s.start.year) * 12 + month.month as i32 - self.s.start.month as i32;
        d.max(0) as u32
    }

    fn day(&mut self, date: NaiveDate) -> Result<(), SimError> {
        self.day_start = self.cal.day_start(date);
        self.slot = 0;
        let month = YearMonth::of_date(date);
        let mi = self.month_index(month);

        if date.day() == 1 {
            self.roster(mi)?;
            self.exemptions(date, month)?;
        }
        if date == self.s.start.first_day() {
            self.preferences()?;
        }
        self.planted(mi, date.day())?;

        let mut order: Vec<usize> = (0..self.agents.len()).collect();
        order.shuffle(&mut self.rng);
        for i in order {
            let a = &self.agents[i];
            if !a.present(mi) || a.away(date) {
                continue;
            }
            self.vote(i)?;
            if !self.agents[i].shirk.contains(&mi) {
                self.maybe_claim(i)?;
            }
            self.maybe_karma(i, month)?;
            self.maybe_spend(i)?;
        }
        Ok(())
    }

    fn roster(&mut self, mi: u32) -> Result<(), SimError> {
        for i in 0..self.agents.len() {
            let (joins, leaves) = (self.agents[i].spec.joins, self.agents[i].spec.leaves);
            let id = self.agents[i].id.clone();
            if joins == mi {
                let at = self.at();
                let r = self.engine.add_resident(&self.house, &id, at);
                self.outcome(r)?;
            }
            if leaves == Some(mi) {
                let at = self.at();
                let r = self.engine.remove_resident(&self.house, &id, at);
                self.outcome(r)?;
            }
        }
        Ok(())
    }

    fn exemptions(&mut self, first: NaiveDate, month: YearMonth) -> Result<(), SimError> {
        let mi = self.month_index(month);
        let dim = month.days();
        for i in 0..self.agents.len() {
            let a = &self.agents[i];
            let rate = a.spec.policy.absenteeism;
            if !a.present(mi) || rate <= 0.0 {
                continue;
            }
            let extra = u32::from(self.rng.gen::<f64>() < rate.fract());
            let days = (rate.trunc() as u32 + extra).min(dim);
            if days == 0 {
                continue;
            }
            let start = self.rng.gen_range(1..=dim - days + 1);
            let from = first.with_day(start).expect("day in month");
            let to = first.with_day(start + days - 1).expect("day in month");
            let id = self.agents[i].id.clone();
            let at = self.at();
            let r = self.engine.declare_exemption(&self.house, &id, from, to, at);
            if self.outcome(r)?.is_some() {
                self.agents[i].exempt.push((from, to));
            }
        }
        Ok(())
    }

    fn preferences(&mut self) -> Result<(), SimError> {
        for p in &self.s.preferences {
            let voters: Vec<ResidentId> = self
                .agents
                .iter()
                .filter(|a| a.present(0) && (p.by == "*" || p.by == a.spec.name))
                .map(|a| a.id.clone())
                .collect();
            let (pref, depr) = (self.chores[&p.preferred], self.chores[&p.deprioritized]);
            for v in voters {
                let at = self.at();
                let r = self.engine.submit_preference(&self.house, &v, pref, depr, at);
                self.outcome(r)?;
            }
        }
        Ok(())
    }

    fn agent_id(&self, name: &str) -> ResidentId {
        self.agents.iter().find(|a| a.spec.name == name).expect("validated agent").id.clone()
    }

    fn planted(&mut self, mi: u32, day: u32) -> Result<(), SimError> {
        for p in &self.s.planted {
            match p {
                Planted::DishonestClaim {
                    month,
                    day: d,
                    agent,
                    chore,
                } if *month == mi && *d == day => {
                    let id = self.agent_id(agent);
                    let at = self.at();
                    let r = self.engine.claim_chore(&self.house, self.chores[chore], &id, at);
                    if let Some(claim) = self.outcome(r)? {
                        self.dishonest.insert(claim.proposal);
                    }
                }
                Planted::Challenge {
                    month,
                    day: d,
                    agent,
                    target,
                    stake,
                } if *month == mi && *d == day => {
                    let (who, whom) = (self.agent_id(agent), self.agent_id(target));
                    let at = self.at();
                    let r = self.engine.open_challenge(&self.house, &who, &whom, *stake, "planted".into(), at);
                    self.outcome(r)?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn vote(&mut self, i: usize) -> Result<(), SimError> {
        let at = self.at();
        let me = self.agents[i].id.clone();
        let house = self.engine.house(&self.house)?;
        let fresh: Vec<(ProposalId, bool, bool)> = house
            .open_proposals(at)
            .filter(|p| p.proposer.as_ref() != Some(&me) && !self.agents[i].seen.contains(&p.id))
            .map(|p| {
                let against_me = matches!(&p.subject, Subject::HeartChallenge { challengee, .. } if *challengee == me);
                (p.id, self.dishonest.contains(&p.id), against_me)
            })
            .collect();
        let policy = self.agents[i].spec.policy.clone();
        for (id, dishonest, against_me) in fresh {
            self.agents[i].seen.insert(id);
            let direction = if against_me {
                Some(Direction::Down)
            } else if dishonest {
                (self.rng.gen::<f64>() < policy.vote_honesty).then_some(Direction::Down)
            } else {
                (self.rng.gen::<f64>() < policy.upvote_rate).then_some(Direction::Up)
            };
            if let Some(d) = direction {
                let r = self.engine.cast_ballot(&self.house, id, &me, d, at);
                self.outcome(r)?;
            }
        }
        Ok(())
    }

    fn maybe_claim(&mut self, i: usize) -> Result<(), SimError> {
        let at = self.at();
        let house = self.engine.house(&self.house)?;
        let me = &self.agents[i];
        let credit_at = at.plus(house.config.windows.claim_ms());
        let cm = self.cal.month_of(credit_at);
        let owed = house
            .obligations(cm)
            .into_iter()
            .find(|s| s.resident == me.id)
            .map_or(0.0, |s| s.owed_points);
        let start = self.cal.month_start(cm);
        let elapsed = credit_at.since(start) as f64 / self.cal.month_len_ms(cm) as f64;
        let need = owed * elapsed.min(1.0) - me.credited.get(&cm).copied().unwrap_or(0.0);
        let p = &me.spec.policy;
        let propensity = if need > 0.0 { p.diligence } else { p.diligence * p.eagerness };
        if self.rng.gen::<f64>() >= propensity {
            return Ok(());
        }
        let best = house
            .chore_board(at)
            .into_iter()
            .filter_map(|c| {
                let thr = me.thresholds[&c.id];
                (c.value > 0.0 && c.value >= thr).then_some((c.value / thr, c.id))
            })
            .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        let Some((_, chore)) = best else { return Ok(()) };
        let id = me.id.clone();
        let r = self.engine.claim_chore(&self.house, chore, &id, at);
        if let Some(claim) = self.outcome(r)? {
            self.agents[i].seen.insert(claim.proposal);
            *self.agents[i].credited.entry(cm).or_default() += claim.value_at_claim;
        }
        Ok(())
    }

    fn maybe_karma(&mut self, i: usize, month: YearMonth) -> Result<(), SimError> {
        let rate = self.agents[i].spec.policy.karma_generosity / month.days() as f64;
        if self.rng.gen::<f64>() >= rate {
            return Ok(());
        }
        let mi = self.month_index(month);
        let others: Vec<(ResidentId, f64)> = self
            .agents
            .iter()
            .enumerate()
            .filter(|(j, a)| *j != i && a.present(mi))
            .map(|(_, a)| (a.id.clone(), a.spec.policy.karma_appeal))
            .collect();
        let Ok(dist) = WeightedIndex::new(others.iter().map(|o| o.1)) else {
            return Ok(());
        };
        let to = others[dist.sample(&mut self.rng)].0.clone();
        let from = self.agents[i].id.clone();
        let at = self.at();
        let r = self.engine.record_karma(&self.house, &from, &to, None, at);
        self.outcome(r)?;
        Ok(())
    }

    fn maybe_spend(&mut self, i: usize) -> Result<(), SimError> {
        let initiative = self.agents[i].spec.policy.initiative;
        for profile in &self.s.spending {
            if self.rng.gen::<f64>() >= profile.rate * initiative {
                continue;
            }
            let n = profile.items.len() + profile.free_form.len();
            let pick = self.rng.gen_range(0..n);
            let (item, price) = if pick < profile.items.len() {
                let (id, typical) = self.items[&profile.items[pick]];
                let price = (typical.0 as f64 * self.rng.gen_range(0.8..=1.25)).round() as i64;
                (PurchaseItem::Listed { item: id }, price.max(1))
            } else {
                let (lo, hi) = profile.price_cents.expect("validated");
                let name = profile.free_form[pick - profile.items.len()].clone();
                (PurchaseItem::FreeForm { name }, self.rng.gen_range(lo..=hi))
            };
            let req = PurchaseRequest {
                proposer: self.agents[i].id.clone(),
                item,
                price: Cents(price),
                account: self.accounts[&profile.account],
            };
            let at = self.at();
            let r = self.engine.propose_purchase(&self.house, req, at);
            if let Some(p) = self.outcome(r)? {
                self.agents[i].seen.insert(p.proposal);
            }
        }
        Ok(())
    }
}
