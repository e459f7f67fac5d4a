//! CSV rendering. Floats use Rust's shortest round-trip `Display`, which
//! never depends on the locale; rows follow the sweep result's
//! scheme-then-value order.

use std::fmt::Write as _;

use crate::montecarlo::{SweepCell, SweepResult};
use crate::validation::ValidationSummary;

fn table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn key(c: &SweepCell) -> Vec<String> {
    vec![c.scheme.to_string(), f(c.value)]
}

pub const SUMRATE_HEADER: [&str; 8] = [
    "scheme",
    "p_ue_dbm",
    "mean_r_sum_bps",
    "mean_cond_r_sum_bps",
    "outage_prob",
    "ci95_r_sum_bps",
    "ci95_cond_r_sum_bps",
    "trials",
];

pub fn sumrate_csv(r: &SweepResult) -> String {
    table(
        &SUMRATE_HEADER,
        r.cells.iter().map(|c| {
            let mut row = key(c);
            row.extend([
                f(c.r_sum.mean),
                f(c.cond_r_sum.mean),
                f(c.outage_prob),
                f(c.r_sum.ci95),
                f(c.cond_r_sum.ci95),
                c.trials.to_string(),
            ]);
            row
        }),
    )
}

pub const RATES_HEADER: [&str; 12] = [
    "scheme",
    "p_ue_dbm",
    "mean_r_ul_bps",
    "mean_r_d2d_bps",
    "mean_cond_r_ul_bps",
    "mean_cond_r_d2d_bps",
    "outage_prob",
    "ci95_r_ul_bps",
    "ci95_r_d2d_bps",
    "ci95_cond_r_ul_bps",
    "ci95_cond_r_d2d_bps",
    "trials",
];

pub fn rates_csv(r: &SweepResult) -> String {
    table(
        &RATES_HEADER,
        r.cells.iter().map(|c| {
            let mut row = key(c);
            row.extend([
                f(c.r_ul.mean),
                f(c.r_d2d.mean),
                f(c.cond_r_ul.mean),
                f(c.cond_r_d2d.mean),
                f(c.outage_prob),
                f(c.r_ul.ci95),
                f(c.r_d2d.ci95),
                f(c.cond_r_ul.ci95),
                f(c.cond_r_d2d.ci95),
                c.trials.to_string(),
            ]);
            row
        }),
    )
}

pub const OUTAGE_HEADER: [&str; 4] = ["scheme", "r_min_mbps", "outage_prob", "trials"];

pub fn outage_csv(r: &SweepResult) -> String {
    table(
        &OUTAGE_HEADER,
        r.cells.iter().map(|c| {
            let mut row = key(c);
            row.extend([f(c.outage_prob), c.trials.to_string()]);
            row
        }),
    )
}

pub const VALIDATION_HEADER: [&str; 16] = [
    "realization",
    "allocator_status",
    "allocator_r_sum_bps",
    "oracle_feasible",
    "oracle_r_sum_bps",
    "gap_bps",
    "gap_bound_bps",
    "verdict",
    "gate_discards",
    "d1_alpha1_rel_err",
    "d2_alpha1_rel_err",
    "d2_alpha2_rel_err",
    "uplink_alpha1_rel_err",
    "sic_alpha2_rel_err",
    "cache_alpha2_rel_err",
    "pass",
];

pub fn validation_csv(s: &ValidationSummary) -> String {
    table(
        &VALIDATION_HEADER,
        s.checks.iter().map(|c| {
            let (e1, e2, e3) = c
                .derivatives
                .map_or((String::new(), String::new(), String::new()), |d| {
                    (f(d.d1_alpha1_err), f(d.d2_alpha1_err), f(d.d2_alpha2_err))
                });
            let status = if c.allocator_status == crate::allocator::AllocationStatus::Optimal {
                "optimal"
            } else {
                "outage"
            };
            vec![
                c.index.to_string(),
                status.into(),
                f(c.allocator_r_sum),
                c.oracle_feasible.to_string(),
                f(c.oracle_r_sum),
                f(c.oracle_r_sum - c.allocator_r_sum),
                f(c.gap_bound),
                c.verdict.label().into(),
                c.gate_discards.to_string(),
                e1,
                e2,
                e3,
                f(c.closed_forms.uplink_alpha1_err),
                f(c.closed_forms.sic_alpha2_err),
                f(c.closed_forms.cache_alpha2_err),
                c.pass().to_string(),
            ]
        }),
    )
}

/// One-line-per-scheme text summary for the terminal.
pub fn sweep_summary(r: &SweepResult) -> String {
    let mut out = String::new();
    let mut schemes: Vec<_> = r.cells.iter().map(|c| c.scheme).collect();
    schemes.dedup();
    for s in schemes {
        if let Some(last) = r.series(s).last() {
            let _ = writeln!(
                out,
                "{s:>8} @ {}: mean R_sum {:.3} Mbit/s, outage {:.4}",
                last.value,
                last.r_sum.mean / 1e6,
                last.outage_prob
            );
        }
    }
    out
}
