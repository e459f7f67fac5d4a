//! Per-file SINRs, Shannon rates, QoS thresholds and the constraint set of the
//! sum-rate problem.
//!
//! Files: A is UE1's upload, B is UE2's upload, C is UE1's cache file (wanted
//! by UE2) and D is UE2's cache file (wanted by UE1). Each UE sends its upload
//! with `(1 - α)·P` and its cache file with `α·P`.

use std::fmt;

use thiserror::Error;

use crate::scenario::ChannelState;

/// Relative slack on rate constraints so closed-form boundary points survive
/// rounding.
pub const RATE_RTOL: f64 = 1e-9;
/// Absolute slack on the α domain constraints.
pub const ALPHA_TOL: f64 = 1e-12;
/// Upper end of both power-allocation domains.
pub const ALPHA_MAX: f64 = 0.5;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("power split ({alpha1}, {alpha2}) outside [0, 0.5]²")]
pub struct SplitOutOfDomain {
    pub alpha1: f64,
    pub alpha2: f64,
}

/// Cache-file power fractions of UE1 and UE2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl PowerSplit {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self, SplitOutOfDomain> {
        let ok = |a: f64| (0.0..=ALPHA_MAX).contains(&a);
        if ok(alpha1) && ok(alpha2) {
            Ok(Self { alpha1, alpha2 })
        } else {
            Err(SplitOutOfDomain { alpha1, alpha2 })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SinrSet {
    pub gamma_bs_a: f64,
    pub gamma_bs_b: f64,
    pub gamma_ue1_b: f64,
    pub gamma_ue1_d: f64,
    pub gamma_ue2_a: f64,
    pub gamma_ue2_c: f64,
}

/// SINRs after SIC at every receiver and cache-enabled cancellation at the BS.
/// Self-interference at a UE always carries its full transmit power.
pub fn compute_sinrs(ch: &ChannelState, split: PowerSplit, p_ue: f64) -> SinrSet {
    let PowerSplit {
        alpha1: a1,
        alpha2: a2,
    } = split;
    let si = ch.hsi_sq * p_ue + 1.0;
    SinrSet {
        gamma_bs_a: ch.h1_sq * (1.0 - a1) * p_ue / (ch.h2_sq * (1.0 - a2) * p_ue + 1.0),
        gamma_bs_b: ch.h2_sq * (1.0 - a2) * p_ue,
        gamma_ue1_b: ch.h3_sq * (1.0 - a2) * p_ue / (ch.h3_sq * a2 * p_ue + si),
        gamma_ue1_d: ch.h3_sq * a2 * p_ue / si,
        gamma_ue2_a: ch.h3_sq * (1.0 - a1) * p_ue / (ch.h3_sq * a1 * p_ue + si),
        gamma_ue2_c: ch.h3_sq * a1 * p_ue / si,
    }
}

/// Per-file rates (bit/s) and their aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateSet {
    pub r_bs_a: f64,
    pub r_bs_b: f64,
    pub r_ue1_d: f64,
    pub r_ue2_c: f64,
    pub r_ue2_a: f64,
    pub r_ue1_b: f64,
    pub r_ul: f64,
    pub r_d2d: f64,
    pub r_sum: f64,
}

impl RateSet {
    /// Builds the set from the six per-file rates, filling the aggregates.
    pub fn from_files(
        r_bs_a: f64,
        r_bs_b: f64,
        r_ue1_d: f64,
        r_ue2_c: f64,
        r_ue2_a: f64,
        r_ue1_b: f64,
    ) -> Self {
        let r_ul = r_bs_a + r_bs_b;
        let r_d2d = r_ue1_d + r_ue2_c;
        Self {
            r_bs_a,
            r_bs_b,
            r_ue1_d,
            r_ue2_c,
            r_ue2_a,
            r_ue1_b,
            r_ul,
            r_d2d,
            r_sum: r_ul + r_d2d,
        }
    }
}

/// Shannon rate `share · B · log2(1 + γ)`.
pub fn shannon_rate(gamma: f64, bandwidth_hz: f64, time_share: f64) -> f64 {
    time_share * bandwidth_hz * gamma.ln_1p() / std::f64::consts::LN_2
}

pub fn rates_from_sinrs(s: &SinrSet, bandwidth_hz: f64, time_share: f64) -> RateSet {
    let r = |g: f64| shannon_rate(g, bandwidth_hz, time_share);
    RateSet::from_files(
        r(s.gamma_bs_a),
        r(s.gamma_bs_b),
        r(s.gamma_ue1_d),
        r(s.gamma_ue2_c),
        r(s.gamma_ue2_a),
        r(s.gamma_ue1_b),
    )
}

/// Minimum SINR for a minimum rate over the full bandwidth: `2^(R/B) - 1`.
pub fn sinr_threshold(r_min_bps: f64, bandwidth_hz: f64) -> f64 {
    2f64.powf(r_min_bps / bandwidth_hz) - 1.0
}

/// Per-file minimum rates and the SINR thresholds they imply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosSpec {
    pub r_min_a: f64,
    pub r_min_b: f64,
    pub r_min_c: f64,
    pub r_min_d: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub gamma_c: f64,
    pub gamma_d: f64,
    pub bandwidth_hz: f64,
}

impl QosSpec {
    /// Rates in file order A, B, C, D.
    pub fn new(r_min: [f64; 4], bandwidth_hz: f64) -> Self {
        let [a, b, c, d] = r_min;
        let g = |r| sinr_threshold(r, bandwidth_hz);
        Self {
            r_min_a: a,
            r_min_b: b,
            r_min_c: c,
            r_min_d: d,
            gamma_a: g(a),
            gamma_b: g(b),
            gamma_c: g(c),
            gamma_d: g(d),
            bandwidth_hz,
        }
    }

    pub fn uniform(r_min_bps: f64, bandwidth_hz: f64) -> Self {
        Self::new([r_min_bps; 4], bandwidth_hz)
    }

    pub fn r_min(&self) -> [f64; 4] {
        [self.r_min_a, self.r_min_b, self.r_min_c, self.r_min_d]
    }
}

/// Decoding-order interval for α₁ at a given α₂. `lower > upper` means no α₁
/// preserves the decoding order; the pair is returned as is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha1Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Alpha1Bounds {
    pub fn is_empty(&self) -> bool {
        self.lower > self.upper
    }
}

/// Raw (unclamped) BS decoding-order limit: file A must arrive above file B.
pub fn alpha1_bs_order_limit(ch: &ChannelState, alpha2: f64) -> f64 {
    ((ch.h1_sq - ch.h2_sq) + alpha2 * ch.h2_sq) / ch.h1_sq
}

/// Raw UE-side limits: at UE1 the cache file D must arrive above UE1's own
/// uplink self-interference, at UE2 the cache file C above UE2's.
pub fn alpha1_ue_order_limits(ch: &ChannelState, alpha2: f64) -> (f64, f64) {
    (
        1.0 - alpha2 * ch.h3_sq / ch.hsi_sq,
        (1.0 - alpha2) * ch.hsi_sq / ch.h3_sq,
    )
}

pub fn alpha1_bounds(ch: &ChannelState, alpha2: f64) -> Alpha1Bounds {
    let upper = alpha1_bs_order_limit(ch, alpha2).min(ALPHA_MAX);
    let (at_ue1, at_ue2) = alpha1_ue_order_limits(ch, alpha2);
    let lower = at_ue1.max(at_ue2).clamp(0.0, ALPHA_MAX);
    Alpha1Bounds { lower, upper }
}

/// Constraints of the sum-rate problem, in problem order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// Rate of A at the BS.
    QosBsA,
    /// Rate of B at the BS.
    QosBsB,
    /// Rate of D at UE1.
    QosUe1D,
    /// Rate of C at UE2.
    QosUe2C,
    /// UE2 can decode (and cancel) A.
    SicUe2A,
    /// UE1 can decode (and cancel) B.
    SicUe1B,
    /// α₁ inside its decoding-order interval.
    Alpha1Range,
    /// α₂ inside [0, 0.5].
    Alpha2Range,
}

impl Constraint {
    pub const ALL: [Constraint; 8] = [
        Constraint::QosBsA,
        Constraint::QosBsB,
        Constraint::QosUe1D,
        Constraint::QosUe2C,
        Constraint::SicUe2A,
        Constraint::SicUe1B,
        Constraint::Alpha1Range,
        Constraint::Alpha2Range,
    ];

    /// Short identifier used in reports and CSV files.
    pub fn tag(self) -> &'static str {
        match self {
            Constraint::QosBsA => "qos_bs_a",
            Constraint::QosBsB => "qos_bs_b",
            Constraint::QosUe1D => "qos_ue1_d",
            Constraint::QosUe2C => "qos_ue2_c",
            Constraint::SicUe2A => "sic_ue2_a",
            Constraint::SicUe1B => "sic_ue1_b",
            Constraint::Alpha1Range => "alpha1_range",
            Constraint::Alpha2Range => "alpha2_range",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Constraint::QosBsA => "R(BS<-A) >= Rmin_A",
            Constraint::QosBsB => "R(BS<-B) >= Rmin_B",
            Constraint::QosUe1D => "R(UE1<-D) >= Rmin_D",
            Constraint::QosUe2C => "R(UE2<-C) >= Rmin_C",
            Constraint::SicUe2A => "R(UE2<-A) >= Rmin_A",
            Constraint::SicUe1B => "R(UE1<-B) >= Rmin_B",
            Constraint::Alpha1Range => "alpha1 within decoding-order bounds",
            Constraint::Alpha2Range => "0 <= alpha2 <= 0.5",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.tag(), self.description())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCheck {
    pub constraint: Constraint,
    /// bit/s for rate constraints, α units for the two domain constraints.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub checks: [ConstraintCheck; 8],
}

impl ConstraintReport {
    pub fn feasible(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn violated(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, constraint: Constraint) -> &ConstraintCheck {
        self.checks
            .iter()
            .find(|c| c.constraint == constraint)
            .expect("every constraint is present")
    }
}

/// `rate ≥ r_min` up to the shared relative slack.
pub fn meets_rate(rate: f64, r_min: f64) -> bool {
    rate - r_min >= -RATE_RTOL * r_min.max(1.0)
}

fn rate_check(constraint: Constraint, rate: f64, r_min: f64) -> ConstraintCheck {
    ConstraintCheck {
        constraint,
        margin: rate - r_min,
        pass: meets_rate(rate, r_min),
    }
}

pub fn check_constraints(
    rates: &RateSet,
    split: PowerSplit,
    bounds: Alpha1Bounds,
    qos: &QosSpec,
) -> ConstraintReport {
    let a1_margin = (split.alpha1 - bounds.lower).min(bounds.upper - split.alpha1);
    let a2_margin = split.alpha2.min(ALPHA_MAX - split.alpha2);
    ConstraintReport {
        checks: [
            rate_check(Constraint::QosBsA, rates.r_bs_a, qos.r_min_a),
            rate_check(Constraint::QosBsB, rates.r_bs_b, qos.r_min_b),
            rate_check(Constraint::QosUe1D, rates.r_ue1_d, qos.r_min_d),
            rate_check(Constraint::QosUe2C, rates.r_ue2_c, qos.r_min_c),
            rate_check(Constraint::SicUe2A, rates.r_ue2_a, qos.r_min_a),
            rate_check(Constraint::SicUe1B, rates.r_ue1_b, qos.r_min_b),
            ConstraintCheck {
                constraint: Constraint::Alpha1Range,
                margin: a1_margin,
                pass: a1_margin >= -ALPHA_TOL,
            },
            ConstraintCheck {
                constraint: Constraint::Alpha2Range,
                margin: a2_margin,
                pass: a2_margin >= -ALPHA_TOL,
            },
        ],
    }
}

/// Everything the problem needs to know about one (channel, split) point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEvaluation {
    pub split: PowerSplit,
    pub sinrs: SinrSet,
    pub rates: RateSet,
    pub bounds: Alpha1Bounds,
    pub report: ConstraintReport,
}

pub fn evaluate_point(
    ch: &ChannelState,
    split: PowerSplit,
    qos: &QosSpec,
    p_ue: f64,
) -> PointEvaluation {
    let sinrs = compute_sinrs(ch, split, p_ue);
    let rates = rates_from_sinrs(&sinrs, qos.bandwidth_hz, 1.0);
    let bounds = alpha1_bounds(ch, split.alpha2);
    let report = check_constraints(&rates, split, bounds, qos);
    PointEvaluation {
        split,
        sinrs,
        rates,
        bounds,
        report,
    }
}

/// Sum rate of the proposed scheme at one point (bit/s).
pub fn sum_rate(ch: &ChannelState, alpha1: f64, alpha2: f64, p_ue: f64, bandwidth_hz: f64) -> f64 {
    let s = compute_sinrs(ch, PowerSplit { alpha1, alpha2 }, p_ue);
    bandwidth_hz / std::f64::consts::LN_2
        * (s.gamma_bs_a.ln_1p()
            + s.gamma_bs_b.ln_1p()
            + s.gamma_ue1_d.ln_1p()
            + s.gamma_ue2_c.ln_1p())
}
