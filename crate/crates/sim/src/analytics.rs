//! Figure datasets recomputed from an event log alone.
//!
//! Every function here reads only [`Event`]s, so a live house's exported
//! log works as well as a simulated one. A log holding several houses is
//! analysed for the house of its first event.

use std::collections::{BTreeMap, BTreeSet};

use commons_core::hearts::HeartsPolicy;
use commons_core::*;

use crate::SimError;

/// Events of the first house in `log`.
fn house_events(log: &[Event]) -> impl Iterator<Item = &Event> {
    let house = log.first().map(|e| e.house.clone());
    log.iter().filter(move |e| Some(&e.house) == house.as_ref())
}

fn chore_names(log: &[Event]) -> BTreeMap<ChoreId, String> {
    let mut names = BTreeMap::new();
    for e in house_events(log) {
        match &e.body {
            EventBody::ChoreAdded { chore, name, .. } | EventBody::ChoreEdited { chore, name, .. } => {
                names.insert(*chore, name.clone());
            }
            _ => {}
        }
    }
    names
}

fn residents(log: &[Event]) -> Vec<ResidentId> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for e in house_events(log) {
        if let EventBody::ResidentAdded { resident } = &e.body {
            if seen.insert(resident.clone()) {
                out.push(resident.clone());
            }
        }
    }
    out
}

// ---------------------------------------------------------------- Fig. 2

#[derive(Clone, Debug, PartialEq)]
pub struct ChoreShare {
    pub chore: ChoreId,
    pub name: String,
    pub group: Option<String>,
    pub total_points: f64,
    pub claims: u32,
    /// Mean points per verified claim.
    pub mean_points: f64,
    /// Fraction of all verified points.
    pub share: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupShare {
    pub group: String,
    pub total_points: f64,
    pub share: f64,
}

/// Per-chore point totals (Fig. 2 shape), sorted by total descending.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoreShares {
    pub chores: Vec<ChoreShare>,
    pub groups: Vec<GroupShare>,
    pub total_points: f64,
}

impl ChoreShares {
    /// The chore with the most verified points.
    pub fn plurality(&self) -> &ChoreShare {
        &self.chores[0]
    }

    pub fn group_share(&self, group: &str) -> f64 {
        self.groups.iter().find(|g| g.group == group).map_or(0.0, |g| g.share)
    }

    /// Median of per-claim means over chores with at least one claim.
    pub fn median_mean(&self) -> f64 {
        let mut means: Vec<f64> = self.chores.iter().filter(|c| c.claims > 0).map(|c| c.mean_points).collect();
        means.sort_by(f64::total_cmp);
        let n = means.len();
        if n % 2 == 1 {
            means[n / 2]
        } else {
            (means[n / 2 - 1] + means[n / 2]) / 2.0
        }
    }
}

/// `groups` maps a group name to chore names; a chore belongs to the first
/// group listing it.
pub fn compute_chore_shares(log: &[Event], groups: &BTreeMap<String, Vec<String>>) -> Result<ChoreShares, SimError> {
    let names = chore_names(log);
    let mut per: BTreeMap<ChoreId, (f64, u32)> = names.keys().map(|c| (*c, (0.0, 0))).collect();
    for e in house_events(log) {
        if let EventBody::ClaimVerified { chore, points, .. } = &e.body {
            let slot = per.entry(*chore).or_default();
            slot.0 += points;
            slot.1 += 1;
        }
    }
    let total: f64 = per.values().map(|p| p.0).sum();
    if per.values().all(|p| p.1 == 0) {
        return Err(SimError::EmptyLog);
    }
    let group_of = |name: &str| groups.iter().find(|(_, cs)| cs.iter().any(|c| c == name)).map(|(g, _)| g.clone());
    let mut chores: Vec<ChoreShare> = per
        .into_iter()
        .map(|(chore, (points, claims))| {
            let name = names.get(&chore).cloned().unwrap_or_else(|| chore.to_string());
            ChoreShare {
                chore,
                group: group_of(&name),
                name,
                total_points: points,
                claims,
                mean_points: if claims > 0 { points / claims as f64 } else { 0.0 },
                share: points / total,
            }
        })
        .collect();
    chores.sort_by(|a, b| b.total_points.total_cmp(&a.total_points).then(a.chore.cmp(&b.chore)));
    let groups = groups
        .keys()
        .map(|g| {
            let points: f64 = chores.iter().filter(|c| c.group.as_deref() == Some(g)).map(|c| c.total_points).sum();
            GroupShare {
                group: g.clone(),
                total_points: points,
                share: points / total,
            }
        })
        .collect();
    Ok(ChoreShares {
        chores,
        groups,
        total_points: total,
    })
}

// ---------------------------------------------------------------- Fig. 3

/// Inclusive month range; `None` bounds are open.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MonthWindow {
    pub from: Option<YearMonth>,
    pub to: Option<YearMonth>,
}

impl MonthWindow {
    pub fn all() -> Self {
        MonthWindow::default()
    }

    pub fn contains(&self, m: YearMonth) -> bool {
        self.from.is_none_or(|f| m >= f) && self.to.is_none_or(|t| m <= t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpecializationRow {
    pub resident: ResidentId,
    pub month: YearMonth,
    pub chore: ChoreId,
    pub name: String,
    pub points: f64,
    /// `points` over the resident's total for the month.
    pub share: f64,
}

/// Per-resident, per-month chore shares (Fig. 3 shape).
///
/// Normalization: each resident-month's shares sum to 1, which removes
/// differences in how many points residents earn (and months partly spent
/// away). Claims count toward the month they were credited to.
#[derive(Clone, Debug, PartialEq)]
pub struct Specialization {
    pub rows: Vec<SpecializationRow>,
}

impl Specialization {
    pub fn residents(&self) -> BTreeSet<&ResidentId> {
        self.rows.iter().map(|r| &r.resident).collect()
    }

    /// The resident's most-earned chore and its mean monthly share, taken
    /// over the months in which the resident earned anything.
    pub fn top_chore(&self, resident: &ResidentId) -> Option<(&str, f64)> {
        let rows: Vec<&SpecializationRow> = self.rows.iter().filter(|r| &r.resident == resident).collect();
        let months: BTreeSet<YearMonth> = rows.iter().map(|r| r.month).collect();
        let mut totals: BTreeMap<ChoreId, (f64, f64, &str)> = BTreeMap::new();
        for r in &rows {
            let t = totals.entry(r.chore).or_insert((0.0, 0.0, &r.name));
            t.0 += r.points;
            t.1 += r.share;
        }
        let (_, (_, shares, name)) = totals.into_iter().max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))?;
        Some((name, shares / months.len() as f64))
    }
}

pub fn compute_specialization(log: &[Event], window: MonthWindow) -> Result<Specialization, SimError> {
    let names = chore_names(log);
    let mut points: BTreeMap<(ResidentId, YearMonth), BTreeMap<ChoreId, f64>> = BTreeMap::new();
    for e in house_events(log) {
        if let EventBody::ClaimVerified {
            chore,
            claimant,
            points: p,
            month,
            ..
        } = &e.body
        {
            if window.contains(*month) && *p > 0.0 {
                *points.entry((claimant.clone(), *month)).or_default().entry(*chore).or_default() += p;
            }
        }
    }
    if points.is_empty() {
        return Err(SimError::EmptyWindow);
    }
    let rows = points
        .into_iter()
        .flat_map(|((resident, month), chores)| {
            let total: f64 = chores.values().sum();
            let names = &names;
            chores.into_iter().map(move |(chore, p)| SpecializationRow {
                resident: resident.clone(),
                month,
                chore,
                name: names.get(&chore).cloned().unwrap_or_else(|| chore.to_string()),
                points: p,
                share: p / total,
            })
        })
        .collect();
    Ok(Specialization { rows })
}

// ---------------------------------------------------------------- Fig. 4

#[derive(Clone, Debug, PartialEq)]
pub struct HeartsPoint {
    pub at: Timestamp,
    pub hearts: f64,
    pub delta: f64,
    /// `None` for the starting point at move-in.
    pub cause: Option<HeartCause>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeartsTrajectory {
    pub resident: ResidentId,
    pub points: Vec<HeartsPoint>,
}

impl HeartsTrajectory {
    /// Award-then-fade cycles: karma awards followed by a fade before the
    /// next award.
    pub fn karma_cycles(&self) -> usize {
        let mut cycles = 0;
        let mut awarded = false;
        for p in &self.points {
            match p.cause {
                Some(HeartCause::KarmaAward) if p.delta > 0.0 => awarded = true,
                Some(HeartCause::Fade) if p.delta < 0.0 && awarded => {
                    cycles += 1;
                    awarded = false;
                }
                _ => {}
            }
        }
        cycles
    }

    /// At least two award-then-fade cycles, all above the baseline.
    pub fn is_sawtooth(&self, baseline: f64) -> bool {
        self.karma_cycles() >= 2 && self.points.iter().any(|p| p.hearts > baseline)
    }

    /// A shortfall penalty takes hearts below the baseline, after which they
    /// never fall again and climb back to it.
    pub fn dips_and_recovers(&self, baseline: f64) -> bool {
        let Some(dip) = self
            .points
            .iter()
            .position(|p| p.cause == Some(HeartCause::ChoreShortfall) && p.delta < 0.0 && p.hearts < baseline)
        else {
            return false;
        };
        let after = &self.points[dip..];
        let Some(back) = after.iter().position(|p| p.hearts >= baseline) else {
            return false;
        };
        after[..=back].windows(2).all(|w| w[1].hearts >= w[0].hearts)
    }

    pub fn last(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.hearts)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeartsTrajectories {
    pub baseline: f64,
    pub residents: Vec<HeartsTrajectory>,
}

impl HeartsTrajectories {
    pub fn of(&self, resident: &ResidentId) -> Option<&HeartsTrajectory> {
        self.residents.iter().find(|t| &t.resident == resident)
    }
}

/// Cumulative hearts per resident (Fig. 4 shape), starting at the baseline
/// on move-in.
pub fn compute_hearts_trajectories(log: &[Event]) -> HeartsTrajectories {
    let mut baseline = HeartsPolicy::default().baseline;
    let mut series: BTreeMap<ResidentId, HeartsTrajectory> = BTreeMap::new();
    let mut order = Vec::new();
    for e in house_events(log) {
        match &e.body {
            EventBody::HouseCreated { config } | EventBody::ConfigUpdated { config } => {
                baseline = config.hearts.baseline;
            }
            EventBody::ResidentAdded { resident } if !series.contains_key(resident) => {
                order.push(resident.clone());
                series.insert(
                    resident.clone(),
                    HeartsTrajectory {
                        resident: resident.clone(),
                        points: vec![HeartsPoint {
                            at: e.at,
                            hearts: baseline,
                            delta: 0.0,
                            cause: None,
                        }],
                    },
                );
            }
            EventBody::HeartsChanged {
                resident, delta, cause, ..
            } => {
                if let Some(t) = series.get_mut(resident) {
                    let hearts = t.last() + delta;
                    t.points.push(HeartsPoint {
                        at: e.at,
                        hearts,
                        delta: *delta,
                        cause: Some(*cause),
                    });
                }
            }
            _ => {}
        }
    }
    HeartsTrajectories {
        baseline,
        residents: order.into_iter().filter_map(|r| series.remove(&r)).collect(),
    }
}

// ---------------------------------------------------------------- Fig. 5

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BalanceChange {
    Refill,
    Purchase,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BalancePoint {
    pub at: Timestamp,
    pub balance: Cents,
    pub delta: Cents,
    pub kind: BalanceChange,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BalanceSeries {
    pub account: AccountId,
    pub name: String,
    pub monthly_refill: Cents,
    pub points: Vec<BalancePoint>,
}

impl BalanceSeries {
    /// Longest run of refills with no purchase in between, during which
    /// the balance only rises.
    pub fn longest_saving_run(&self) -> usize {
        let mut best = 0;
        let mut run = 0;
        for p in &self.points {
            match p.kind {
                BalanceChange::Refill => {
                    run += 1;
                    best = best.max(run);
                }
                BalanceChange::Purchase => run = 0,
            }
        }
        best
    }

    /// Balances just before each refill after the first, i.e. what was
    /// left at the end of each month.
    pub fn month_end_balances(&self) -> Vec<Cents> {
        let mut out = Vec::new();
        let mut balance = Cents(0);
        let mut refills = 0;
        for p in &self.points {
            if p.kind == BalanceChange::Refill {
                if refills > 0 {
                    out.push(balance);
                }
                refills += 1;
            }
            balance = p.balance;
        }
        out
    }

    /// Fraction of month ends at which under `fraction` of a refill was left.
    pub fn depleted_share(&self, fraction: f64) -> f64 {
        let ends = self.month_end_balances();
        if ends.is_empty() {
            return 0.0;
        }
        let limit = self.monthly_refill.0 as f64 * fraction;
        ends.iter().filter(|b| (b.0 as f64) < limit).count() as f64 / ends.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuyerCount {
    pub resident: ResidentId,
    pub purchases: u32,
    /// Share of all purchases made by this buyer and everyone ranked above.
    pub cumulative_share: f64,
}

/// Account balances and buyer concentration (Fig. 5 shape).
#[derive(Clone, Debug, PartialEq)]
pub struct PurchaseStats {
    pub balances: Vec<BalanceSeries>,
    /// Every resident who ever lived in the house, most purchases first.
    pub buyers: Vec<BuyerCount>,
    pub total_purchases: u32,
}

impl PurchaseStats {
    /// Smallest fraction of residents who together made at least `cover`
    /// of all settled purchases.
    pub fn top_share(&self, cover: f64) -> f64 {
        let n = self.buyers.len();
        if n == 0 || self.total_purchases == 0 {
            return 0.0;
        }
        let k = self
            .buyers
            .iter()
            .position(|b| b.cumulative_share >= cover - 1e-12)
            .map_or(n, |i| i + 1);
        k as f64 / n as f64
    }

    pub fn account(&self, name: &str) -> Option<&BalanceSeries> {
        self.balances.iter().find(|b| b.name == name)
    }
}

pub fn compute_purchase_stats(log: &[Event]) -> PurchaseStats {
    let mut balances: BTreeMap<AccountId, BalanceSeries> = BTreeMap::new();
    let mut counts: BTreeMap<ResidentId, u32> = BTreeMap::new();
    for e in house_events(log) {
        match &e.body {
            EventBody::AccountCreated {
                account,
                name,
                monthly_refill,
            } => {
                balances.insert(
                    *account,
                    BalanceSeries {
                        account: *account,
                        name: name.clone(),
                        monthly_refill: *monthly_refill,
                        points: Vec::new(),
                    },
                );
            }
            EventBody::AccountRenamed { account, name } => {
                if let Some(s) = balances.get_mut(account) {
                    s.name = name.clone();
                }
            }
            EventBody::AccountRefillChanged { account, monthly_refill } => {
                if let Some(s) = balances.get_mut(account) {
                    s.monthly_refill = *monthly_refill;
                }
            }
            EventBody::AccountRefilled { account, amount, .. } => {
                if let Some(s) = balances.get_mut(account) {
                    push_balance(s, e.at, *amount, BalanceChange::Refill);
                }
            }
            EventBody::PurchaseSettled {
                account,
                price,
                buyer,
                status: PurchaseStatus::Settled,
                ..
            } => {
                if let Some(s) = balances.get_mut(account) {
                    push_balance(s, e.at, Cents(-price.0), BalanceChange::Purchase);
                }
                *counts.entry(buyer.clone()).or_default() += 1;
            }
            _ => {}
        }
    }
    let total: u32 = counts.values().sum();
    let mut ranked: Vec<(ResidentId, u32)> = residents(log)
        .into_iter()
        .map(|r| {
            let c = counts.get(&r).copied().unwrap_or(0);
            (r, c)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut running = 0;
    let buyers = ranked
        .into_iter()
        .map(|(resident, purchases)| {
            running += purchases;
            BuyerCount {
                resident,
                purchases,
                cumulative_share: if total > 0 { running as f64 / total as f64 } else { 0.0 },
            }
        })
        .collect();
    PurchaseStats {
        balances: balances.into_values().collect(),
        buyers,
        total_purchases: total,
    }
}

fn push_balance(s: &mut BalanceSeries, at: Timestamp, delta: Cents, kind: BalanceChange) {
    let before = s.points.last().map_or(Cents(0), |p| p.balance);
    s.points.push(BalancePoint {
        at,
        balance: Cents(before.0 + delta.0),
        delta,
        kind,
    });
}
