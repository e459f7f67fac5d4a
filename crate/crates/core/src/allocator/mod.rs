//! Optimal power split for the proposed scheme.
//!
//! For fixed α₂ the sum rate is concave in α₁, and every constraint on α₁ is
//! an affine function of α₂. The optimal α₁ is therefore a piecewise-affine
//! function of α₂, and on each piece the sum rate is a sum of three
//! log-affine terms whose stationary point is the root of a quadratic. The
//! solver enumerates the pieces, evaluates every endpoint and every interior
//! stationary point with the full constraint report, and keeps the best.
//!
//! On the piece where α₁ sits on the uplink QoS limit the stationary points
//! come from the closed-form ξ coefficients in [`derivatives`]; the other
//! pieces use the generic quadratic.

pub mod derivatives;

use thiserror::Error;

use crate::linkmodel::{
    alpha1_bounds, alpha1_bs_order_limit, evaluate_point, Alpha1Bounds, ConstraintReport,
    PowerSplit, QosSpec, RateSet, ALPHA_MAX, ALPHA_TOL,
};
use crate::scenario::ChannelState;

pub use derivatives::{
    d1_alpha1, d2_alpha1, d2_alpha2, discontinuity_alpha2, stationary_alpha2, xi_terms,
    DerivativeScratch, StationaryPoints,
};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum AllocatorError {
    #[error("alpha1 bounds are empty: lower {lower} exceeds upper {upper}")]
    EmptyAlpha1Bounds { lower: f64, upper: f64 },
    #[error("second derivative is singular at alpha2 = {alpha2}")]
    Singular { alpha2: f64 },
    #[error("stationary-point equation is degenerate (leading coefficient vanishes)")]
    Degenerate,
}

/// Solver knobs. `xi3_scale` exists so tests can corrupt the closed-form
/// coefficients and watch the derivative gate catch it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocatorOptions {
    pub xi3_scale: f64,
    /// A stationary candidate is kept only if `|dR/dα₂| < gate_rtol · |R|`.
    pub gate_rtol: f64,
}

impl Default for AllocatorOptions {
    fn default() -> Self {
        Self {
            xi3_scale: 1.0,
            gate_rtol: 1e-4,
        }
    }
}

/// Unclamped α₁ that puts file A exactly on its BS-side SINR threshold.
pub fn uplink_alpha1(ch: &ChannelState, alpha2: f64, gamma_a: f64, p_ue: f64) -> f64 {
    let h1p = ch.h1_sq * p_ue;
    (h1p - gamma_a * (ch.h2_sq * p_ue * (1.0 - alpha2) + 1.0)) / h1p
}

/// Uplink-tight α₁ clamped into the decoding-order bounds.
pub fn optimal_alpha1(
    ch: &ChannelState,
    alpha2: f64,
    gamma_a: f64,
    p_ue: f64,
) -> Result<f64, AllocatorError> {
    let Alpha1Bounds { lower, upper } = alpha1_bounds(ch, alpha2);
    if lower > upper {
        return Err(AllocatorError::EmptyAlpha1Bounds { lower, upper });
    }
    Ok(uplink_alpha1(ch, alpha2, gamma_a, p_ue).clamp(lower, upper))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha2Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Alpha2Bounds {
    pub fn is_empty(&self) -> bool {
        self.lower > self.upper
    }
}

/// Unclamped largest α₂ at which UE1 can still peel off file B.
pub fn alpha2_sic_limit(ch: &ChannelState, gamma_b: f64, p_ue: f64) -> f64 {
    let h3p = ch.h3_sq * p_ue;
    (h3p - gamma_b * (ch.hsi_sq * p_ue + 1.0)) / (h3p * (1.0 + gamma_b))
}

/// Unclamped smallest α₂ that delivers cache file D to UE1.
pub fn alpha2_cache_floor(ch: &ChannelState, gamma_d: f64, p_ue: f64) -> f64 {
    gamma_d * (ch.hsi_sq * p_ue + 1.0) / (ch.h3_sq * p_ue)
}

/// Largest α₂ that leaves file B enough power at the BS.
pub fn alpha2_uplink_cap(ch: &ChannelState, gamma_b: f64, p_ue: f64) -> f64 {
    1.0 - gamma_b / (ch.h2_sq * p_ue)
}

/// Largest α₁ at which UE2 can still peel off file A.
pub fn alpha1_sic_cap(ch: &ChannelState, gamma_a: f64, p_ue: f64) -> f64 {
    alpha2_sic_limit(ch, gamma_a, p_ue)
}

/// Smallest α₁ that delivers cache file C to UE2.
pub fn alpha1_cache_floor(ch: &ChannelState, gamma_c: f64, p_ue: f64) -> f64 {
    alpha2_cache_floor(ch, gamma_c, p_ue)
}

/// D2D-side α₂ interval, each end clamped into [0, 0.5].
pub fn alpha2_bounds(ch: &ChannelState, gamma_b: f64, gamma_d: f64, p_ue: f64) -> Alpha2Bounds {
    Alpha2Bounds {
        lower: alpha2_cache_floor(ch, gamma_d, p_ue).clamp(0.0, ALPHA_MAX),
        upper: alpha2_sic_limit(ch, gamma_b, p_ue).clamp(0.0, ALPHA_MAX),
    }
}

/// The α₂ interval the solver searches: the D2D-side bounds tightened by
/// the uplink requirement on file B.
pub fn alpha2_search_range(ch: &ChannelState, qos: &QosSpec, p_ue: f64) -> Alpha2Bounds {
    let b = alpha2_bounds(ch, qos.gamma_b, qos.gamma_d, p_ue);
    Alpha2Bounds {
        lower: b.lower,
        upper: b.upper.min(alpha2_uplink_cap(ch, qos.gamma_b, p_ue)),
    }
}

/// Which affine limit currently fixes α₁.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Alpha1Branch {
    /// File A exactly on its BS threshold.
    UplinkQos,
    BsOrder,
    DomainCap,
    SicCap,
    /// Unconstrained maximiser of the sum rate in α₁.
    Peak,
    Ue1Order,
    Ue2Order,
    Zero,
    CacheFloor,
}

impl Alpha1Branch {
    pub fn label(self) -> &'static str {
        match self {
            Self::UplinkQos => "uplink_qos",
            Self::BsOrder => "bs_order",
            Self::DomainCap => "domain_cap",
            Self::SicCap => "sic_cap",
            Self::Peak => "peak",
            Self::Ue1Order => "ue1_order",
            Self::Ue2Order => "ue2_order",
            Self::Zero => "zero",
            Self::CacheFloor => "cache_floor",
        }
    }
}

/// `α₁ = c0 + c1·α₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Affine {
    c0: f64,
    c1: f64,
}

impl Affine {
    fn at(self, x: f64) -> f64 {
        self.c0 + self.c1 * x
    }
}

/// All α₁ limits of one problem instance.
#[derive(Debug, Clone)]
struct Alpha1Policy {
    pieces: [(Alpha1Branch, Affine); 9],
}

impl Alpha1Policy {
    fn new(ch: &ChannelState, qos: &QosSpec, p: f64) -> Self {
        let ChannelState {
            h1_sq: h1,
            h2_sq: h2,
            h3_sq: h3,
            hsi_sq: hs,
        } = *ch;
        let g = qos.gamma_a;
        let aff = |c0, c1| Affine { c0, c1 };
        let peak0 = (h1 * h3 * p + h2 * h3 * p + h3 - h1 - h1 * hs * p) / (2.0 * h1 * h3 * p);
        Self {
            pieces: [
                (
                    Alpha1Branch::UplinkQos,
                    aff(1.0 - g * (1.0 + h2 * p) / (h1 * p), g * h2 / h1),
                ),
                (Alpha1Branch::BsOrder, aff((h1 - h2) / h1, h2 / h1)),
                (Alpha1Branch::DomainCap, aff(ALPHA_MAX, 0.0)),
                (Alpha1Branch::SicCap, aff(alpha1_sic_cap(ch, g, p), 0.0)),
                (Alpha1Branch::Peak, aff(peak0, -h2 / (2.0 * h1))),
                (Alpha1Branch::Ue1Order, aff(1.0, -h3 / hs)),
                (Alpha1Branch::Ue2Order, aff(hs / h3, -hs / h3)),
                (Alpha1Branch::Zero, aff(0.0, 0.0)),
                (
                    Alpha1Branch::CacheFloor,
                    aff(alpha1_cache_floor(ch, qos.gamma_c, p), 0.0),
                ),
            ],
        }
    }

    fn piece(&self, b: Alpha1Branch) -> Affine {
        self.pieces
            .iter()
            .find(|(k, _)| *k == b)
            .expect("all branches present")
            .1
    }

    fn value(&self, b: Alpha1Branch, x: f64) -> f64 {
        self.piece(b).at(x)
    }

    /// Best α₁ for this α₂ and the limit that sets it.
    fn choose(&self, x: f64) -> (f64, Alpha1Branch) {
        use Alpha1Branch::*;
        let argmin = |bs: &[Alpha1Branch]| {
            bs.iter()
                .map(|&b| (self.value(b, x), b))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("non-empty")
        };
        let argmax = |bs: &[(f64, Alpha1Branch)]| {
            *bs.iter()
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .expect("non-empty")
        };

        let upper = argmin(&[UplinkQos, BsOrder, DomainCap, SicCap]);
        let order = argmax(&[
            (self.value(Ue1Order, x), Ue1Order),
            (self.value(Ue2Order, x), Ue2Order),
        ]);
        let order = if order.0 < 0.0 {
            (0.0, Zero)
        } else if order.0 > ALPHA_MAX {
            (ALPHA_MAX, DomainCap)
        } else {
            order
        };
        let lower = argmax(&[order, (self.value(CacheFloor, x), CacheFloor)]);
        let peak = (self.value(Peak, x), Peak);
        let capped = if peak.0 < upper.0 { peak } else { upper };
        if lower.0 > capped.0 {
            lower
        } else {
            capped
        }
    }

    /// α₂ values in `[lo, hi]` where any two limits cross.
    fn crossings(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, (_, a)) in self.pieces.iter().enumerate() {
            for (_, b) in &self.pieces[i + 1..] {
                let d = a.c1 - b.c1;
                if d != 0.0 {
                    let x = (b.c0 - a.c0) / d;
                    if x > lo && x < hi {
                        out.push(x);
                    }
                }
            }
        }
        out
    }
}

/// Log-affine factors `a + b·α₂` whose logs sum (up to constants) to the
/// sum rate when α₁ follows `affine`.
fn branch_factors(ch: &ChannelState, affine: Affine, p: f64) -> [(f64, f64); 3] {
    let ChannelState {
        h1_sq: h1,
        h2_sq: h2,
        h3_sq: h3,
        hsi_sq: hs,
    } = *ch;
    let Affine { c0, c1 } = affine;
    [
        (1.0 + h2 * p + h1 * p * (1.0 - c0), -h2 * p - h1 * p * c1),
        (1.0 + hs * p, h3 * p),
        (1.0 + hs * p + h3 * p * c0, h3 * p * c1),
    ]
}

/// Real roots of `Σ b_k / (a_k + b_k x) = 0` after clearing denominators.
fn log_affine_stationary(f: &[(f64, f64); 3]) -> Vec<f64> {
    let [(a1, b1), (a2, b2), (a3, b3)] = *f;
    let qa = 3.0 * b1 * b2 * b3;
    let qb = 2.0 * (a1 * b2 * b3 + a2 * b1 * b3 + a3 * b1 * b2);
    let qc = b1 * a2 * a3 + b2 * a1 * a3 + b3 * a1 * a2;
    quadratic_roots(qa, qb, qc)
}

/// Real roots of `a x² + b x + c`, cancellation-free.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { Vec::new() } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// How the chosen α₂ relates to its search interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alpha2Case {
    Stationary,
    LowerBound,
    UpperBound,
    /// Interior point where the active α₁ limit switches.
    Breakpoint,
}

impl Alpha2Case {
    pub fn label(self) -> &'static str {
        match self {
            Self::Stationary => "stationary",
            Self::LowerBound => "lower_bound",
            Self::UpperBound => "upper_bound",
            Self::Breakpoint => "breakpoint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationStatus {
    Optimal,
    Outage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub split: PowerSplit,
    pub branch: Alpha1Branch,
    pub case: Alpha2Case,
    pub r_sum: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub candidates: Vec<Candidate>,
    /// In-domain stationary roots rejected by the derivative gate.
    pub gate_discards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationOutcome {
    pub status: AllocationStatus,
    /// The optimum, or for an outage the best infeasible point tried.
    pub split: PowerSplit,
    pub rates: RateSet,
    pub report: ConstraintReport,
    pub alpha2_case: Option<Alpha2Case>,
    pub alpha1_branch: Option<Alpha1Branch>,
    pub alpha2_range: Alpha2Bounds,
    pub trace: SolveTrace,
}

impl AllocationOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == AllocationStatus::Optimal
    }
}

pub fn solve(ch: &ChannelState, qos: &QosSpec, p_ue: f64) -> AllocationOutcome {
    solve_with(ch, qos, p_ue, &AllocatorOptions::default())
}

pub fn solve_with(
    ch: &ChannelState,
    qos: &QosSpec,
    p_ue: f64,
    opts: &AllocatorOptions,
) -> AllocationOutcome {
    let range = alpha2_search_range(ch, qos, p_ue);
    let policy = Alpha1Policy::new(ch, qos, p_ue);
    let mut trace = SolveTrace::default();

    let uplink_points = match stationary_alpha2(ch, qos.gamma_a, p_ue, opts) {
        Ok(sp) => {
            trace.gate_discards.extend_from_slice(&sp.discarded);
            sp.candidates
        }
        Err(_) => Vec::new(),
    };

    let mut points: Vec<(f64, Alpha2Case)> = Vec::new();
    if !range.is_empty() {
        points.push((range.lower, Alpha2Case::LowerBound));
        points.push((range.upper, Alpha2Case::UpperBound));
        let mut knots = policy.crossings(range.lower, range.upper);
        points.extend(knots.iter().map(|&x| (x, Alpha2Case::Breakpoint)));
        knots.push(range.lower);
        knots.push(range.upper);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        for w in knots.windows(2) {
            let (s, e) = (w[0], w[1]);
            let (_, branch) = policy.choose(0.5 * (s + e));
            let roots = if branch == Alpha1Branch::UplinkQos {
                uplink_points.clone()
            } else {
                let factors = branch_factors(ch, policy.piece(branch), p_ue);
                let mut kept = Vec::new();
                for r in log_affine_stationary(&factors) {
                    if !(s..=e).contains(&r) || factors.iter().any(|(a, b)| a + b * r <= 0.0) {
                        continue;
                    }
                    let f = |x: f64| factors.iter().map(|(a, b)| (a + b * x).ln()).sum::<f64>();
                    if derivatives::is_flat(f, r, opts.gate_rtol) {
                        kept.push(r);
                    } else {
                        trace.gate_discards.push(r);
                    }
                }
                kept
            };
            points.extend(
                roots
                    .into_iter()
                    .filter(|r| (s..=e).contains(r))
                    .map(|r| (r, Alpha2Case::Stationary)),
            );
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points.dedup_by(|a, b| a.0 == b.0);

    let mut best: Option<(usize, crate::linkmodel::PointEvaluation)> = None;
    let mut fallback: Option<(usize, crate::linkmodel::PointEvaluation)> = None;
    for &(alpha2, case) in &points {
        let (alpha1, branch) = policy.choose(alpha2);
        let split = PowerSplit { alpha1, alpha2 };
        let eval = evaluate_point(ch, split, qos, p_ue);
        let feasible = eval.report.feasible();
        trace.candidates.push(Candidate {
            split,
            branch,
            case,
            r_sum: eval.rates.r_sum,
            feasible,
        });
        let idx = trace.candidates.len() - 1;
        let slot = if feasible { &mut best } else { &mut fallback };
        if slot
            .as_ref()
            .is_none_or(|(_, b)| eval.rates.r_sum > b.rates.r_sum)
        {
            *slot = Some((idx, eval));
        }
    }

    if let Some((idx, eval)) = best {
        let c = trace.candidates[idx];
        return AllocationOutcome {
            status: AllocationStatus::Optimal,
            split: eval.split,
            rates: eval.rates,
            report: eval.report,
            alpha2_case: Some(c.case),
            alpha1_branch: Some(c.branch),
            alpha2_range: range,
            trace,
        };
    }
    let eval = match fallback {
        Some((_, eval)) => eval,
        None => {
            let alpha2 = range.lower;
            let raw = uplink_alpha1(ch, alpha2, qos.gamma_a, p_ue);
            let split = PowerSplit {
                alpha1: if raw.is_finite() {
                    raw.clamp(0.0, ALPHA_MAX)
                } else {
                    0.0
                },
                alpha2,
            };
            evaluate_point(ch, split, qos, p_ue)
        }
    };
    AllocationOutcome {
        status: AllocationStatus::Outage,
        split: eval.split,
        rates: eval.rates,
        report: eval.report,
        alpha2_case: None,
        alpha1_branch: None,
        alpha2_range: range,
        trace,
    }
}

/// The textbook case-wise rule: α₂ from the D2D-side bounds or the closed-form
/// stationary point, α₁ on the uplink QoS limit clamped into its
/// decoding-order bounds. Kept for comparison; it ignores the SIC cap on α₁
/// and the uplink cap on α₂, so it declares outage far more often than
/// [`solve`].
pub fn solve_casewise(ch: &ChannelState, qos: &QosSpec, p_ue: f64) -> AllocationOutcome {
    let range = alpha2_bounds(ch, qos.gamma_b, qos.gamma_d, p_ue);
    let mut trace = SolveTrace::default();
    let mut points = vec![
        (range.lower, Alpha2Case::LowerBound),
        (range.upper, Alpha2Case::UpperBound),
    ];
    if let Ok(sp) = stationary_alpha2(ch, qos.gamma_a, p_ue, &AllocatorOptions::default()) {
        points.extend(
            sp.candidates
                .into_iter()
                .filter(|r| (range.lower..=range.upper).contains(r))
                .map(|r| (r, Alpha2Case::Stationary)),
        );
    }
    let mut best: Option<(Candidate, crate::linkmodel::PointEvaluation)> = None;
    if !range.is_empty() {
        for (alpha2, case) in points {
            let Ok(alpha1) = optimal_alpha1(ch, alpha2, qos.gamma_a, p_ue) else {
                continue;
            };
            let split = PowerSplit { alpha1, alpha2 };
            let eval = evaluate_point(ch, split, qos, p_ue);
            let c = Candidate {
                split,
                branch: Alpha1Branch::UplinkQos,
                case,
                r_sum: eval.rates.r_sum,
                feasible: eval.report.feasible(),
            };
            trace.candidates.push(c);
            let better = match &best {
                None => true,
                Some((b, _)) => (c.feasible, c.r_sum) > (b.feasible, b.r_sum),
            };
            if better {
                best = Some((c, eval));
            }
        }
    }
    let (cand, eval) = match best {
        Some(b) => b,
        None => {
            let split = PowerSplit {
                alpha1: 0.0,
                alpha2: range.lower,
            };
            let eval = evaluate_point(ch, split, qos, p_ue);
            let c = Candidate {
                split,
                branch: Alpha1Branch::Zero,
                case: Alpha2Case::LowerBound,
                r_sum: eval.rates.r_sum,
                feasible: false,
            };
            (c, eval)
        }
    };
    let optimal = cand.feasible;
    AllocationOutcome {
        status: if optimal {
            AllocationStatus::Optimal
        } else {
            AllocationStatus::Outage
        },
        split: eval.split,
        rates: eval.rates,
        report: eval.report,
        alpha2_case: optimal.then_some(cand.case),
        alpha1_branch: optimal.then_some(cand.branch),
        alpha2_range: range,
        trace,
    }
}

/// Upper limit on α₁ from the BS decoding order, exposed for diagnostics.
pub fn bs_order_alpha1(ch: &ChannelState, alpha2: f64) -> f64 {
    alpha1_bs_order_limit(ch, alpha2)
}

/// Whether two α values agree to the feasibility tolerance.
pub fn alpha_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= ALPHA_TOL.max(1e-12 * a.abs().max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkmodel::{compute_sinrs, sum_rate};
    use approx::assert_relative_eq;

    fn toy() -> ChannelState {
        ChannelState::new(10.0, 5.0, 100.0, 0.1).unwrap()
    }

    #[test]
    fn alpha2_bounds_toy() {
        let b = alpha2_bounds(&toy(), 1.0, 1.0, 1.0);
        assert_relative_eq!(b.upper, 0.4945, max_relative = 1e-12);
        assert_relative_eq!(b.lower, 0.011, max_relative = 1e-12);
        let empty = alpha2_bounds(&toy(), 100.0, 100.0, 1.0);
        assert!(empty.is_empty());
    }

    #[test]
    fn optimal_alpha1_toy() {
        assert_eq!(optimal_alpha1(&toy(), 0.2, 1.0, 1.0).unwrap(), 0.5);
        // Raw value inside the bounds is returned untouched.
        let a = optimal_alpha1(&toy(), 0.2, 1.5, 1.0).unwrap();
        assert_relative_eq!(
            a,
            uplink_alpha1(&toy(), 0.2, 1.5, 1.0),
            max_relative = 1e-15
        );
        assert_relative_eq!(a, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn closed_forms_land_on_thresholds() {
        let ch = toy();
        let g = 1.7;
        let a2 = 0.3;
        let s = compute_sinrs(
            &ch,
            PowerSplit {
                alpha1: uplink_alpha1(&ch, a2, g, 1.0),
                alpha2: a2,
            },
            1.0,
        );
        assert_relative_eq!(s.gamma_bs_a, g, max_relative = 1e-12);
        let up = alpha2_sic_limit(&ch, g, 1.0);
        let s = compute_sinrs(
            &ch,
            PowerSplit {
                alpha1: 0.1,
                alpha2: up,
            },
            1.0,
        );
        assert_relative_eq!(s.gamma_ue1_b, g, max_relative = 1e-12);
        let lo = alpha2_cache_floor(&ch, g, 1.0);
        let s = compute_sinrs(
            &ch,
            PowerSplit {
                alpha1: 0.1,
                alpha2: lo,
            },
            1.0,
        );
        assert_relative_eq!(s.gamma_ue1_d, g, max_relative = 1e-12);
    }

    #[test]
    fn quadratic_roots_are_stable() {
        let r = quadratic_roots(1.0, -3.0, 2.0);
        assert!(r.contains(&1.0) && r.contains(&2.0));
        let r = quadratic_roots(1e-20, 1.0, -0.25);
        assert!(r.iter().any(|&x| (x - 0.25).abs() < 1e-15));
        assert_eq!(quadratic_roots(0.0, 2.0, -1.0), vec![0.5]);
        assert!(quadratic_roots(1.0, 0.0, 1.0).is_empty());
    }

    #[test]
    fn generic_and_closed_form_stationary_points_agree() {
        let ch = ChannelState::new(812.79, 217.06, 3.2995e7, 885.98).unwrap();
        let qos = QosSpec::uniform(5e6, 5e6);
        let p = 0.316;
        let policy = Alpha1Policy::new(&ch, &qos, p);
        let generic = log_affine_stationary(&branch_factors(
            &ch,
            policy.piece(Alpha1Branch::UplinkQos),
            p,
        ));
        let (xi1, xi2, xi3) = xi_terms(&ch, qos.gamma_a, p);
        let disc = (xi2 * xi2 - xi3).sqrt();
        for r in [(-xi2 + disc) / xi1, (-xi2 - disc) / xi1] {
            assert!(
                generic
                    .iter()
                    .any(|g| (g - r).abs() <= 1e-9 * r.abs().max(1.0)),
                "{r} not in {generic:?}"
            );
        }
    }

    #[test]
    fn policy_respects_every_limit_when_feasible() {
        let ch = ChannelState::new(458.0, 120.0, 1.2e6, 800.0).unwrap();
        let qos = QosSpec::uniform(5e6, 5e6);
        let p = 0.316;
        let policy = Alpha1Policy::new(&ch, &qos, p);
        for i in 0..=50 {
            let x = 0.5 * f64::from(i) / 50.0;
            let (a1, _) = policy.choose(x);
            let b = alpha1_bounds(&ch, x);
            let up = [Alpha1Branch::UplinkQos, Alpha1Branch::SicCap]
                .iter()
                .map(|&k| policy.value(k, x))
                .fold(b.upper, f64::min);
            let lo = b.lower.max(policy.value(Alpha1Branch::CacheFloor, x));
            if lo <= up {
                assert!(
                    a1 >= lo - 1e-15 && a1 <= up + 1e-15,
                    "x={x} a1={a1} [{lo}, {up}]"
                );
            }
        }
    }

    #[test]
    fn solve_beats_every_probe_on_a_sample_channel() {
        let ch = ChannelState::new(458.0, 120.0, 1.2e6, 800.0).unwrap();
        let qos = QosSpec::uniform(5e6, 5e6);
        let p = 0.316;
        let out = solve(&ch, &qos, p);
        assert!(out.is_optimal(), "{:?}", out.report);
        assert!(out.report.feasible());
        for i in 0..=200 {
            for j in 0..=200 {
                let split = PowerSplit {
                    alpha1: 0.5 * f64::from(i) / 200.0,
                    alpha2: 0.5 * f64::from(j) / 200.0,
                };
                let e = evaluate_point(&ch, split, &qos, p);
                if e.report.feasible() {
                    assert!(
                        e.rates.r_sum <= out.rates.r_sum * (1.0 + 1e-12),
                        "{split:?}"
                    );
                }
            }
        }
        assert_relative_eq!(
            out.rates.r_sum,
            sum_rate(&ch, out.split.alpha1, out.split.alpha2, p, 5e6),
            max_relative = 1e-12
        );
    }

    #[test]
    fn outage_reports_a_violation() {
        // Weak direct links: file B can never reach 5 Mbit/s.
        let ch = ChannelState::new(2.0, 1.0, 1e6, 800.0).unwrap();
        let out = solve(&ch, &QosSpec::uniform(5e6, 5e6), 0.316);
        assert_eq!(out.status, AllocationStatus::Outage);
        assert!(out.report.violated().count() > 0);
        assert!(out.alpha2_case.is_none());
    }

    #[test]
    fn casewise_rule_is_never_better_than_solve() {
        let qos = QosSpec::uniform(5e6, 5e6);
        let p = 0.316;
        for ch in [
            ChannelState::new(458.0, 120.0, 1.2e6, 800.0).unwrap(),
            ChannelState::new(812.79, 217.06, 3.2995e7, 885.98).unwrap(),
            toy(),
        ] {
            let full = solve(&ch, &qos, p);
            let lit = solve_casewise(&ch, &qos, p);
            if lit.is_optimal() {
                assert!(full.is_optimal());
                assert!(full.rates.r_sum >= lit.rates.r_sum * (1.0 - 1e-12));
            }
        }
    }
}
