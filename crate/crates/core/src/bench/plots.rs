//! Plot data: per-prior marginal cost curves and the query-time histogram,
//! as CSV plus a plain SVG rendering of each.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{BenchError, HistogramRow, SummaryRow};
use crate::planners::PlannerKind;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 5] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"];

fn color(p: PlannerKind) -> &'static str {
    COLORS[PlannerKind::ALL.iter().position(|&k| k == p).unwrap_or(0) % COLORS.len()]
}

/// Writes `marginal_cost_<prior>.{csv,svg}` for every prior in `summary` and
/// `queries_per_timestep.{csv,svg}`. Returns the files written.
pub fn emit_plots(
    summary: &[SummaryRow],
    histogram: &[HistogramRow],
    dir: &Path,
) -> Result<Vec<PathBuf>, BenchError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let mut by_prior: BTreeMap<String, Vec<&SummaryRow>> = BTreeMap::new();
    for s in summary {
        by_prior.entry(s.prior.name().to_string()).or_default().push(s);
    }
    for (prior, rows) in &by_prior {
        let mut csv = String::from("per_station_cost,planner,mean_marginal_cost,se_marginal_cost\n");
        let mut series: BTreeMap<PlannerKind, Vec<(f64, f64)>> = BTreeMap::new();
        for r in rows {
            writeln!(
                csv,
                "{},{},{},{}",
                r.per_station_cost, r.planner, r.mean_marginal_cost, r.se_marginal_cost
            )
            .unwrap();
            series
                .entry(r.planner)
                .or_default()
                .push((r.per_station_cost, r.mean_marginal_cost));
        }
        let base = dir.join(format!("marginal_cost_{prior}"));
        written.push(write(base.with_extension("csv"), csv)?);
        written.push(write(
            base.with_extension("svg"),
            line_chart(&format!("marginal cost, {prior} prior"), "per-station cost", &series),
        )?);
    }

    let mut csv = String::from("timestep,planner,query_count\n");
    let mut bars: BTreeMap<PlannerKind, Vec<(u32, usize)>> = BTreeMap::new();
    for h in histogram {
        writeln!(csv, "{},{},{}", h.timestep, h.planner, h.query_count).unwrap();
        bars.entry(h.planner).or_default().push((h.timestep, h.query_count));
    }
    let base = dir.join("queries_per_timestep");
    written.push(write(base.with_extension("csv"), csv)?);
    written.push(write(base.with_extension("svg"), bar_chart(&bars))?);
    Ok(written)
}

fn write(path: PathBuf, text: String) -> Result<PathBuf, BenchError> {
    std::fs::write(&path, text)?;
    Ok(path)
}

fn frame(title: &str, xlabel: &str, ylabel: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#, W / 2.0).unwrap();
    writeln!(
        s,
        r#"<path d="M{PAD},{PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    )
    .unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 12.0).unwrap();
    writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    )
    .unwrap();
    s
}

fn legend(s: &mut String, planners: impl Iterator<Item = PlannerKind>) {
    for (i, p) in planners.enumerate() {
        let y = PAD + 14.0 * i as f64;
        writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{p}</text>"#,
            W - PAD - 110.0,
            y - 9.0,
            color(p),
            W - PAD - 95.0,
            y
        )
        .unwrap();
    }
}

fn scale(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    if hi > lo {
        out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
    } else {
        (out_lo + out_hi) / 2.0
    }
}

fn line_chart(title: &str, xlabel: &str, series: &BTreeMap<PlannerKind, Vec<(f64, f64)>>) -> String {
    let points = series.values().flatten();
    let (x0, x1) = points.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let y1 = points.fold(0.0f64, |m, p| m.max(p.1));
    let mut s = frame(title, xlabel, "mean marginal cost");
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y1:.2}</text>"#, PAD - 4.0, PAD + 4.0).unwrap();
    for (&p, pts) in series {
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                format!(
                    "{:.1},{:.1}",
                    scale(x, x0, x1, PAD, W - PAD),
                    scale(y, 0.0, y1, H - PAD, PAD)
                )
            })
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" stroke="{}" fill="none" stroke-width="2"/>"#,
            path.join(" "),
            color(p)
        )
        .unwrap();
        for pt in &path {
            let (x, y) = pt.split_once(',').unwrap();
            writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{}"/>"#, color(p)).unwrap();
        }
    }
    legend(&mut s, series.keys().copied());
    s.push_str("</svg>\n");
    s
}

fn bar_chart(bars: &BTreeMap<PlannerKind, Vec<(u32, usize)>>) -> String {
    let last = bars.values().flatten().map(|b| b.0).max().unwrap_or(1);
    let top = bars.values().flatten().map(|b| b.1).max().unwrap_or(0).max(1);
    let mut s = frame("queries per timestep", "timestep", "queries");
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{top}</text>"#, PAD - 4.0, PAD + 4.0).unwrap();
    let slot = (W - 2.0 * PAD) / last as f64;
    let width = slot / (bars.len().max(1) as f64 + 1.0);
    for (i, (&p, counts)) in bars.iter().enumerate() {
        for &(t, c) in counts {
            if c == 0 {
                continue;
            }
            let h = scale(c as f64, 0.0, top as f64, 0.0, H - 2.0 * PAD);
            writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                PAD + slot * (t - 1) as f64 + width * i as f64,
                H - PAD - h,
                width,
                h,
                color(p)
            )
            .unwrap();
        }
    }
    legend(&mut s, bars.keys().copied());
    s.push_str("</svg>\n");
    s
}
