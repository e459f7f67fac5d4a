//! Per-realization cross-checks of the allocator: optimality against the
//! grid oracle, analytic derivatives against finite differences, and the
//! closed-form limits against the SINRs they are meant to produce.

use std::f64::consts::LN_2;

use rand::Rng;

use crate::allocator::{
    alpha2_cache_floor, alpha2_sic_limit, d1_alpha1, d2_alpha1, d2_alpha2,
    derivatives::uplink_branch_rate, solve_with, uplink_alpha1, AllocationStatus, AllocatorOptions,
};
use crate::linkmodel::{compute_sinrs, evaluate_point, sum_rate, PowerSplit, QosSpec, ALPHA_MAX};
use crate::oracle::{finite_diff, grid_search, local_search, GridSpec};
use crate::par;
use crate::scenario::{draw_realization, trial_rng, ChannelState, ScenarioConfig};

/// Relative tolerance for analytic vs numeric derivatives.
pub const DERIVATIVE_RTOL: f64 = 1e-4;
/// Relative tolerance for a closed-form limit hitting its SINR target.
pub const CLOSED_FORM_RTOL: f64 = 1e-9;
/// Largest tolerated share of boundary-width verdict disagreements.
pub const BOUNDARY_SHARE_MAX: f64 = 0.01;
/// Rejection-sampling budget when looking for a feasible point.
const FEASIBLE_DRAWS: usize = 20_000;
/// Sub-stream offset for the sampling draws, far from any trial index.
const SAMPLING_STREAM: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationSetup {
    pub seed: u64,
    pub p_ue: f64,
    pub qos: QosSpec,
    pub grid: GridSpec,
    pub options: AllocatorOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Same feasibility verdict and the rate gap is within the lattice bound.
    Agree,
    /// Verdicts differ only within one lattice cell of a constraint surface.
    Boundary,
    /// Same feasibility verdict but the oracle beat the allocator by more than the bound.
    Suboptimal,
    /// The oracle found a clearly feasible point where the allocator declared outage.
    MissedFeasible,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Agree => "agree",
            Verdict::Boundary => "boundary",
            Verdict::Suboptimal => "suboptimal",
            Verdict::MissedFeasible => "missed_feasible",
        }
    }
}

/// Relative errors and signs of the three derivative formulas at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeCheck {
    pub split: PowerSplit,
    pub d1_alpha1: f64,
    pub d1_alpha1_err: f64,
    pub d2_alpha1: f64,
    pub d2_alpha1_err: f64,
    /// `None` when the branch is singular at this α₂.
    pub d2_alpha2: Option<f64>,
    pub d2_alpha2_err: f64,
}

impl DerivativeCheck {
    pub fn pass(&self) -> bool {
        self.d1_alpha1 > 0.0
            && self.d2_alpha1 < 0.0
            && self.d2_alpha2.is_some_and(|d| d < 0.0)
            && self.d1_alpha1_err <= DERIVATIVE_RTOL
            && self.d2_alpha1_err <= DERIVATIVE_RTOL
            && self.d2_alpha2_err <= DERIVATIVE_RTOL
    }
}

/// Relative SINR errors of the three closed-form limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormCheck {
    pub uplink_alpha1_err: f64,
    pub sic_alpha2_err: f64,
    pub cache_alpha2_err: f64,
}

impl ClosedFormCheck {
    pub fn max_err(&self) -> f64 {
        self.uplink_alpha1_err
            .max(self.sic_alpha2_err)
            .max(self.cache_alpha2_err)
    }

    pub fn pass(&self) -> bool {
        self.max_err() <= CLOSED_FORM_RTOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationCheck {
    pub index: u64,
    pub channel: ChannelState,
    pub allocator_status: AllocationStatus,
    pub allocator_r_sum: f64,
    pub oracle_feasible: bool,
    pub oracle_r_sum: f64,
    pub gap_bound: f64,
    pub verdict: Verdict,
    pub gate_discards: usize,
    /// `None` when no feasible point was found to probe.
    pub derivatives: Option<DerivativeCheck>,
    pub closed_forms: ClosedFormCheck,
}

impl RealizationCheck {
    /// Everything except the boundary share, which is judged over the batch.
    pub fn pass(&self) -> bool {
        matches!(self.verdict, Verdict::Agree | Verdict::Boundary)
            && self.gate_discards == 0
            && self.derivatives.is_none_or(|d| d.pass())
            && self.closed_forms.pass()
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn check_derivatives(
    ch: &ChannelState,
    split: PowerSplit,
    qos: &QosSpec,
    p_ue: f64,
) -> DerivativeCheck {
    let b = qos.bandwidth_hz;
    let PowerSplit { alpha1, alpha2 } = split;
    // Steps relative to the variable being differentiated keep truncation
    // error near 1e-6 while staying far above rounding noise.
    let along1 = |x: f64| sum_rate(ch, x, alpha2, p_ue, b);
    let (fd1, fd2) =
        finite_diff(along1, alpha1, 1e-3 * alpha1, 0.0..=1.0).unwrap_or((f64::NAN, f64::NAN));
    let d1 = d1_alpha1(ch, split, p_ue, b);
    let d2 = d2_alpha1(ch, split, p_ue, b);

    let along2 = |x: f64| uplink_branch_rate(ch, x, qos.gamma_a, p_ue) * b / LN_2;
    let (_, fd22) =
        finite_diff(along2, alpha2, 1e-3 * alpha2, 0.0..=1.0).unwrap_or((f64::NAN, f64::NAN));
    let d22 = d2_alpha2(ch, alpha2, qos.gamma_a, p_ue, b).ok();
    let nan_to_inf = |e: f64| if e.is_nan() { f64::INFINITY } else { e };
    DerivativeCheck {
        split,
        d1_alpha1: d1,
        d1_alpha1_err: nan_to_inf(rel_err(d1, fd1)),
        d2_alpha1: d2,
        d2_alpha1_err: nan_to_inf(rel_err(d2, fd2)),
        d2_alpha2: d22,
        d2_alpha2_err: d22.map_or(f64::INFINITY, |d| nan_to_inf(rel_err(d, fd22))),
    }
}

/// Each closed-form limit, left unclamped, must put its SINR exactly on target.
/// `alpha` is the free variable of the limits that need one.
pub fn check_closed_forms(
    ch: &ChannelState,
    qos: &QosSpec,
    p_ue: f64,
    alpha: f64,
) -> ClosedFormCheck {
    let a1 = uplink_alpha1(ch, alpha, qos.gamma_a, p_ue);
    let s = compute_sinrs(
        ch,
        PowerSplit {
            alpha1: a1,
            alpha2: alpha,
        },
        p_ue,
    );
    let uplink_alpha1_err = rel_err(s.gamma_bs_a, qos.gamma_a);
    let up = alpha2_sic_limit(ch, qos.gamma_b, p_ue);
    let s = compute_sinrs(
        ch,
        PowerSplit {
            alpha1: alpha,
            alpha2: up,
        },
        p_ue,
    );
    let sic_alpha2_err = rel_err(s.gamma_ue1_b, qos.gamma_b);
    let lo = alpha2_cache_floor(ch, qos.gamma_d, p_ue);
    let s = compute_sinrs(
        ch,
        PowerSplit {
            alpha1: alpha,
            alpha2: lo,
        },
        p_ue,
    );
    let cache_alpha2_err = rel_err(s.gamma_ue1_d, qos.gamma_d);
    ClosedFormCheck {
        uplink_alpha1_err,
        sic_alpha2_err,
        cache_alpha2_err,
    }
}

/// A uniformly drawn feasible split, by rejection.
pub fn sample_feasible<R: Rng + ?Sized>(
    ch: &ChannelState,
    qos: &QosSpec,
    p_ue: f64,
    rng: &mut R,
) -> Option<PowerSplit> {
    (0..FEASIBLE_DRAWS).find_map(|_| {
        let split = PowerSplit {
            alpha1: rng.random_range(0.0..ALPHA_MAX),
            alpha2: rng.random_range(0.0..ALPHA_MAX),
        };
        (split.alpha1 > 0.0
            && split.alpha2 > 0.0
            && evaluate_point(ch, split, qos, p_ue).report.feasible())
        .then_some(split)
    })
}

/// Whether every rate constraint at `split` passes with at most `rtol`
/// relative headroom on its tightest constraint, i.e. it sits on a surface.
fn on_rate_surface(
    ch: &ChannelState,
    split: PowerSplit,
    qos: &QosSpec,
    p_ue: f64,
    rtol: f64,
) -> bool {
    let e = evaluate_point(ch, split, qos, p_ue);
    let r_min = qos.r_min();
    let tight = [
        e.rates.r_bs_a,
        e.rates.r_bs_b,
        e.rates.r_ue1_d,
        e.rates.r_ue2_c,
    ]
    .iter()
    .zip([r_min[0], r_min[1], r_min[3], r_min[2]])
    .map(|(&r, m)| (r - m) / m.max(1.0))
    .fold(f64::INFINITY, f64::min);
    tight <= rtol
}

pub fn check_realization(
    cfg: &ScenarioConfig,
    setup: &ValidationSetup,
    index: u64,
) -> RealizationCheck {
    let ch = draw_realization(cfg, &mut trial_rng(setup.seed, index)).channel;
    let (qos, p) = (&setup.qos, setup.p_ue);
    let alloc = solve_with(&ch, qos, p, &setup.options);
    let grid = grid_search(&ch, qos, p, setup.grid);
    let res = setup.grid.resolution;
    let gap_bound = grid.gap_bound(res);
    let oracle_feasible = grid.best_split.is_some();

    let verdict = match (alloc.is_optimal(), grid.best_split) {
        (true, Some(_)) => {
            if alloc.rates.r_sum >= grid.best_r_sum - gap_bound {
                Verdict::Agree
            } else {
                Verdict::Suboptimal
            }
        }
        (false, None) => Verdict::Agree,
        (true, None) => {
            let local = local_search(&ch, qos, p, alloc.split, res, res / 20.0);
            log::info!(
                "realization {index}: feasible sliver missed by the lattice (local re-grid found {} points)",
                local.feasible_count
            );
            Verdict::Boundary
        }
        (false, Some(best)) => {
            if on_rate_surface(&ch, best, qos, p, 1e-6) {
                Verdict::Boundary
            } else {
                Verdict::MissedFeasible
            }
        }
    };

    let mut rng = trial_rng(setup.seed, SAMPLING_STREAM + index);
    let derivatives =
        sample_feasible(&ch, qos, p, &mut rng).map(|s| check_derivatives(&ch, s, qos, p));
    let free = rng.random_range(0.0..ALPHA_MAX);
    let closed_forms = check_closed_forms(&ch, qos, p, free);

    RealizationCheck {
        index,
        channel: ch,
        allocator_status: alloc.status,
        allocator_r_sum: if alloc.is_optimal() {
            alloc.rates.r_sum
        } else {
            0.0
        },
        oracle_feasible,
        oracle_r_sum: grid.best_r_sum,
        gap_bound,
        verdict,
        gate_discards: alloc.trace.gate_discards.len(),
        derivatives,
        closed_forms,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSummary {
    pub checks: Vec<RealizationCheck>,
}

impl ValidationSummary {
    pub fn boundary_share(&self) -> f64 {
        let n = self
            .checks
            .iter()
            .filter(|c| c.verdict == Verdict::Boundary)
            .count();
        n as f64 / self.checks.len().max(1) as f64
    }

    pub fn gate_discards(&self) -> usize {
        self.checks.iter().map(|c| c.gate_discards).sum()
    }

    pub fn failures(&self) -> impl Iterator<Item = &RealizationCheck> {
        self.checks.iter().filter(|c| !c.pass())
    }

    pub fn pass(&self) -> bool {
        self.failures().next().is_none() && self.boundary_share() < BOUNDARY_SHARE_MAX
    }
}

/// Checks realizations `0..n` of the seed. Parallel across realizations when
/// the `parallel` feature is on; the result does not depend on scheduling.
pub fn validate(cfg: &ScenarioConfig, setup: &ValidationSetup, n: u64) -> ValidationSummary {
    ValidationSummary {
        checks: par::map_indexed(n as usize, |i| check_realization(cfg, setup, i as u64)),
    }
}
