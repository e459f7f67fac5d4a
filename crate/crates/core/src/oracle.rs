//! Brute-force reference for the allocator: exhaustive lattice search over
//! (α₁, α₂) ∈ [0, 0.5]² plus central finite differences.

use std::cmp::Ordering;
use std::ops::RangeInclusive;

use thiserror::Error;

use crate::linkmodel::{evaluate_point, PowerSplit, QosSpec, ALPHA_MAX};
use crate::par;
use crate::scenario::ChannelState;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum OracleError {
    #[error("grid resolution must lie in (0, 0.01], got {0}")]
    Resolution(f64),
    #[error("finite-difference stencil [{lo}, {hi}] leaves the function's domain")]
    Domain { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub resolution: f64,
    pub refine_rounds: u32,
}

impl GridSpec {
    pub fn new(resolution: f64, refine_rounds: u32) -> Result<Self, OracleError> {
        if resolution > 0.0 && resolution <= 0.01 {
            Ok(Self {
                resolution,
                refine_rounds,
            })
        } else {
            Err(OracleError::Resolution(resolution))
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            resolution: 1e-3,
            refine_rounds: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub best_split: Option<PowerSplit>,
    /// Zero when nothing is feasible.
    pub best_r_sum: f64,
    /// Feasible points on the coarse lattice.
    pub feasible_count: usize,
    /// Largest |ΔR_sum| / resolution between lattice neighbours (bit/s per α unit).
    pub lipschitz: f64,
}

impl OracleResult {
    /// Bound on how far the lattice optimum can sit below the true optimum.
    pub fn gap_bound(&self, resolution: f64) -> f64 {
        self.lipschitz * resolution
    }
}

#[derive(Debug, Clone, Copy)]
struct Best {
    r_sum: f64,
    split: PowerSplit,
}

/// Larger rate wins; ties go to the smaller α₁, then the smaller α₂.
fn better(a: &Best, b: &Best) -> bool {
    match a.r_sum.total_cmp(&b.r_sum) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => (a.split.alpha1, a.split.alpha2)
            .partial_cmp(&(b.split.alpha1, b.split.alpha2))
            .is_some_and(|o| o == Ordering::Less),
    }
}

fn pick(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if better(&y, &x) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

fn axis(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| (start + step * k as f64).clamp(0.0, ALPHA_MAX))
        .collect()
}

struct Lattice {
    r_sum: Vec<f64>,
    best: Option<Best>,
    feasible: usize,
}

fn scan(ch: &ChannelState, qos: &QosSpec, p_ue: f64, a1: &[f64], a2: &[f64]) -> Lattice {
    let rows = par::map_indexed(a1.len(), |i| {
        let mut r = Vec::with_capacity(a2.len());
        let mut best = None;
        let mut feasible = 0;
        for &alpha2 in a2 {
            let split = PowerSplit {
                alpha1: a1[i],
                alpha2,
            };
            let e = evaluate_point(ch, split, qos, p_ue);
            r.push(e.rates.r_sum);
            if e.report.feasible() {
                feasible += 1;
                best = pick(
                    best,
                    Some(Best {
                        r_sum: e.rates.r_sum,
                        split,
                    }),
                );
            }
        }
        (r, best, feasible)
    });
    let mut out = Lattice {
        r_sum: Vec::with_capacity(a1.len() * a2.len()),
        best: None,
        feasible: 0,
    };
    for (r, best, feasible) in rows {
        out.r_sum.extend(r);
        out.best = pick(out.best, best);
        out.feasible += feasible;
    }
    out
}

fn lipschitz(r: &[f64], cols: usize, step: f64) -> f64 {
    let rows = r.len() / cols;
    let mut worst = 0.0f64;
    for i in 0..rows {
        for j in 0..cols {
            let v = r[i * cols + j];
            if j + 1 < cols {
                worst = worst.max((r[i * cols + j + 1] - v).abs());
            }
            if i + 1 < rows {
                worst = worst.max((r[(i + 1) * cols + j] - v).abs());
            }
        }
    }
    worst / step
}

/// Exhaustive search over the lattice, then `refine_rounds` re-grids at a
/// tenth of the previous step spanning one old cell either side of the
/// incumbent.
pub fn grid_search(ch: &ChannelState, qos: &QosSpec, p_ue: f64, spec: GridSpec) -> OracleResult {
    let n = (ALPHA_MAX / spec.resolution).round() as usize + 1;
    let coarse = axis(0.0, spec.resolution, n);
    let lat = scan(ch, qos, p_ue, &coarse, &coarse);
    let lipschitz = lipschitz(&lat.r_sum, n, spec.resolution);

    let mut best = lat.best;
    let mut step = spec.resolution;
    for _ in 0..spec.refine_rounds {
        let Some(b) = best else { break };
        let fine = step / 10.0;
        let a1 = axis(b.split.alpha1 - step, fine, 21);
        let a2 = axis(b.split.alpha2 - step, fine, 21);
        best = pick(best, scan(ch, qos, p_ue, &a1, &a2).best);
        step = fine;
    }
    OracleResult {
        best_split: best.map(|b| b.split),
        best_r_sum: best.map_or(0.0, |b| b.r_sum),
        feasible_count: lat.feasible,
        lipschitz,
    }
}

/// Square lattice of half-width `radius` around `center` at step
/// `resolution`; used to re-adjudicate verdicts that differ only within a
/// cell of a constraint surface.
pub fn local_search(
    ch: &ChannelState,
    qos: &QosSpec,
    p_ue: f64,
    center: PowerSplit,
    radius: f64,
    resolution: f64,
) -> OracleResult {
    let k = (radius / resolution).ceil() as usize;
    let a1 = axis(center.alpha1 - k as f64 * resolution, resolution, 2 * k + 1);
    let a2 = axis(center.alpha2 - k as f64 * resolution, resolution, 2 * k + 1);
    let lat = scan(ch, qos, p_ue, &a1, &a2);
    OracleResult {
        best_split: lat.best.map(|b| b.split),
        best_r_sum: lat.best.map_or(0.0, |b| b.r_sum),
        feasible_count: lat.feasible,
        lipschitz: lipschitz(&lat.r_sum, a2.len(), resolution),
    }
}

/// Central first and second differences of `f` at `x` with step `h`.
pub fn finite_diff(
    f: impl Fn(f64) -> f64,
    x: f64,
    h: f64,
    domain: RangeInclusive<f64>,
) -> Result<(f64, f64), OracleError> {
    let (lo, hi) = (x - h, x + h);
    if !(domain.contains(&lo) && domain.contains(&hi)) {
        return Err(OracleError::Domain { lo, hi });
    }
    let (fp, f0, fm) = (f(hi), f(x), f(lo));
    Ok(((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)))
}
