//! CSV and SVG rendering of the figure datasets.
//!
//! CSV is the contract; the SVGs are quick looks. Columns:
//!
//! | file | columns |
//! |---|---|
//! | `fig2_chore_shares.csv` | chore, group, total_points, claims, mean_points, share |
//! | `fig2_group_shares.csv` | group, total_points, share |
//! | `fig3_specialization.csv` | resident, month, chore, points, share (per resident-month, sums to 1) |
//! | `fig4_hearts.csv` | at (ms since epoch), resident, hearts, delta, cause |
//! | `fig5a_balances.csv` | at, account, balance_cents, delta_cents, kind (refill / purchase) |
//! | `fig5b_purchases.csv` | rank, resident, purchases, cumulative_share |
//! | `summary.csv` | metric, value, reference |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use commons_core::Event;

use crate::analytics::*;
use crate::SimError;

/// One line of `summary.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    pub metric: String,
    pub value: String,
    /// Figure the value is compared against, if any.
    pub reference: String,
}

fn metric(metric: impl Into<String>, value: impl ToString, reference: &str) -> Metric {
    Metric {
        metric: metric.into(),
        value: value.to_string(),
        reference: reference.into(),
    }
}

pub fn write_figures(
    log: &[Event],
    groups: &BTreeMap<String, Vec<String>>,
    figures: &[u8],
    dir: &Path,
) -> Result<Vec<Metric>, SimError> {
    fs::create_dir_all(dir)?;
    let mut summary = Vec::new();
    if figures.contains(&2) {
        let shares = compute_chore_shares(log, groups)?;
        fig2(&shares, dir)?;
        for g in &shares.groups {
            summary.push(metric(format!("group_share:{}", g.group), fmt(g.share), "kitchen ~1/3"));
        }
        let top = shares.plurality();
        summary.push(metric("plurality_chore", &top.name, ""));
        summary.push(metric("plurality_share", fmt(top.share), ""));
        summary.push(metric("plurality_mean_points", fmt(top.mean_points), ""));
        summary.push(metric("median_mean_points", fmt(shares.median_mean()), ""));
    }
    if figures.contains(&3) {
        let spec = compute_specialization(log, MonthWindow::all())?;
        fig3(&spec, dir)?;
        for r in spec.residents() {
            if let Some((chore, share)) = spec.top_chore(r) {
                summary.push(metric(format!("top_chore:{r}"), format!("{chore}:{}", fmt(share)), ""));
            }
        }
    }
    if figures.contains(&4) {
        let hearts = compute_hearts_trajectories(log);
        fig4(&hearts, dir)?;
        for t in &hearts.residents {
            if t.is_sawtooth(hearts.baseline) {
                summary.push(metric(format!("sawtooth:{}", t.resident), t.karma_cycles(), ""));
            }
            if t.dips_and_recovers(hearts.baseline) {
                summary.push(metric(format!("dip_recovery:{}", t.resident), "true", ""));
            }
        }
    }
    if figures.contains(&5) {
        let stats = compute_purchase_stats(log);
        fig5(&stats, dir)?;
        for b in &stats.balances {
            summary.push(metric(format!("longest_saving_run:{}", b.name), b.longest_saving_run(), ""));
            summary.push(metric(format!("depleted_share:{}", b.name), fmt(b.depleted_share(0.2)), ""));
        }
        summary.push(metric("total_purchases", stats.total_purchases, ""));
        summary.push(metric("top_share_80", fmt(stats.top_share(0.8)), "0.42"));
    }
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(["metric", "value", "reference"])?;
    for m in &summary {
        w.write_record([&m.metric, &m.value, &m.reference])?;
    }
    w.flush()?;
    Ok(summary)
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn fig2(s: &ChoreShares, dir: &Path) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(dir.join("fig2_chore_shares.csv"))?;
    w.write_record(["chore", "group", "total_points", "claims", "mean_points", "share"])?;
    for c in &s.chores {
        w.write_record([
            c.name.clone(),
            c.group.clone().unwrap_or_default(),
            fmt(c.total_points),
            c.claims.to_string(),
            fmt(c.mean_points),
            fmt(c.share),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("fig2_group_shares.csv"))?;
    w.write_record(["group", "total_points", "share"])?;
    for g in &s.groups {
        w.write_record([g.group.clone(), fmt(g.total_points), fmt(g.share)])?;
    }
    w.flush()?;
    let bars: Vec<(String, f64)> = s.chores.iter().map(|c| (c.name.clone(), c.total_points)).collect();
    fs::write(dir.join("fig2_chore_shares.svg"), bar_chart("Points per chore", &bars))?;
    Ok(())
}

fn fig3(s: &Specialization, dir: &Path) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(dir.join("fig3_specialization.csv"))?;
    w.write_record(["resident", "month", "chore", "points", "share"])?;
    for r in &s.rows {
        w.write_record([
            r.resident.to_string(),
            r.month.to_string(),
            r.name.clone(),
            fmt(r.points),
            fmt(r.share),
        ])?;
    }
    w.flush()?;
    let bars: Vec<(String, f64)> = s
        .residents()
        .into_iter()
        .filter_map(|r| s.top_chore(r).map(|(c, share)| (format!("{r} · {c}"), share)))
        .collect();
    fs::write(dir.join("fig3_specialization.svg"), bar_chart("Top-chore share per resident", &bars))?;
    Ok(())
}

fn fig4(h: &HeartsTrajectories, dir: &Path) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(dir.join("fig4_hearts.csv"))?;
    w.write_record(["at", "resident", "hearts", "delta", "cause"])?;
    for t in &h.residents {
        for p in &t.points {
            w.write_record([
                p.at.to_string(),
                t.resident.to_string(),
                fmt(p.hearts),
                fmt(p.delta),
                p.cause.map(|c| format!("{c:?}")).unwrap_or_else(|| "start".into()),
            ])?;
        }
    }
    w.flush()?;
    let series: Vec<(String, Vec<(f64, f64)>)> = h
        .residents
        .iter()
        .map(|t| (t.resident.to_string(), t.points.iter().map(|p| (p.at.0 as f64, p.hearts)).collect()))
        .collect();
    fs::write(dir.join("fig4_hearts.svg"), line_chart("Hearts", &series, true))?;
    Ok(())
}

fn fig5(s: &PurchaseStats, dir: &Path) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(dir.join("fig5a_balances.csv"))?;
    w.write_record(["at", "account", "balance_cents", "delta_cents", "kind"])?;
    for b in &s.balances {
        for p in &b.points {
            let kind = match p.kind {
                BalanceChange::Refill => "refill",
                BalanceChange::Purchase => "purchase",
            };
            w.write_record([
                p.at.to_string(),
                b.name.clone(),
                p.balance.0.to_string(),
                p.delta.0.to_string(),
                kind.to_string(),
            ])?;
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("fig5b_purchases.csv"))?;
    w.write_record(["rank", "resident", "purchases", "cumulative_share"])?;
    for (i, b) in s.buyers.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            b.resident.to_string(),
            b.purchases.to_string(),
            fmt(b.cumulative_share),
        ])?;
    }
    w.flush()?;
    let series: Vec<(String, Vec<(f64, f64)>)> = s
        .balances
        .iter()
        .map(|b| (b.name.clone(), b.points.iter().map(|p| (p.at.0 as f64, p.balance.0 as f64 / 100.0)).collect()))
        .collect();
    fs::write(dir.join("fig5a_balances.svg"), line_chart("Account balances ($)", &series, true))?;
    let bars: Vec<(String, f64)> = s.buyers.iter().map(|b| (b.resident.to_string(), b.purchases as f64)).collect();
    fs::write(dir.join("fig5b_purchases.svg"), bar_chart("Purchases per resident", &bars))?;
    Ok(())
}

// ---------------------------------------------------------------- SVG

const W: f64 = 720.0;
const H: f64 = 400.0;
const PAD: f64 = 48.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(title: &str, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{PAD}\" y=\"20\" font-size=\"14\">{}</text>\n\
         <line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" stroke=\"black\"/>\n{body}</svg>\n",
        esc(title),
        b = H - PAD,
        r = W - PAD,
    )
}

fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let max = bars.iter().map(|b| b.1).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let slot = (W - 2.0 * PAD) / bars.len().max(1) as f64;
    let mut body = String::new();
    for (i, (label, v)) in bars.iter().enumerate() {
        let h = v / max * (H - 2.0 * PAD);
        let x = PAD + i as f64 * slot;
        let _ = writeln!(
            body,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"{}\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" transform=\"rotate(30 {:.1} {:.1})\">{}</text>",
            x + slot * 0.1,
            H - PAD - h,
            slot * 0.8,
            PALETTE[0],
            x + slot * 0.1,
            H - PAD + 12.0,
            x + slot * 0.1,
            H - PAD + 12.0,
            esc(label)
        );
    }
    let _ = writeln!(body, "<text x=\"4\" y=\"{PAD}\">{max:.2}</text>");
    frame(title, &body)
}

fn line_chart(title: &str, series: &[(String, Vec<(f64, f64)>)], steps: bool) -> String {
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, 0.0f64, f64::MIN);
    for (x, y) in pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut body = String::new();
    for (i, (name, points)) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        let mut prev: Option<f64> = None;
        for (x, y) in points {
            match prev {
                None => {
                    let _ = write!(path, "M{:.1},{:.1}", sx(*x), sy(*y));
                }
                Some(py) if steps => {
                    let _ = write!(path, " L{:.1},{:.1} L{:.1},{:.1}", sx(*x), sy(py), sx(*x), sy(*y));
                }
                Some(_) => {
                    let _ = write!(path, " L{:.1},{:.1}", sx(*x), sy(*y));
                }
            }
            prev = Some(*y);
        }
        let _ = writeln!(body, "<path d=\"{path}\" fill=\"none\" stroke=\"{colour}\"/>");
        let _ = writeln!(
            body,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{colour}\">{}</text>",
            W - PAD + 4.0,
            PAD + 12.0 * i as f64,
            esc(name)
        );
    }
    let _ = writeln!(body, "<text x=\"4\" y=\"{PAD}\">{y1:.2}</text><text x=\"4\" y=\"{}\">{y0:.2}</text>", H - PAD);
    frame(title, &body)
}
