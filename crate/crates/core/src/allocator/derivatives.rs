//! Analytic derivatives of the sum rate and the stationary points of the
//! sum rate along the QoS-tight α₁ branch.
//!
//! Along that branch α₁ is chosen so that file A lands exactly on its SINR
//! threshold, which turns the sum rate into a function of α₂ alone:
//!
//! ```text
//! R(α₂) ∝ ln ψ₁(α₂) + ln ψ₂(α₂) + ln ψ₃(α₂) + const
//! ψ₁ = h₁²(1 + h₃²P + h_SI²P) − γ_A h₃²(1 + h₂²P(1 − α₂))
//! ψ₂ = 1 + h₂²P(1 − α₂)
//! ψ₃ = 1 + h_SI²P + h₃²α₂P
//! ```

use std::f64::consts::LN_2;

use crate::linkmodel::{sum_rate, PowerSplit};
use crate::scenario::ChannelState;

use super::{uplink_alpha1, AllocatorError, AllocatorOptions};

/// Intermediate terms shared by the derivative and stationary-point formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeScratch {
    pub chi1: f64,
    pub chi2: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub psi3: f64,
    pub upsilon: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub xi3: f64,
}

impl DerivativeScratch {
    pub fn new(ch: &ChannelState, split: PowerSplit, gamma_a: f64, p_ue: f64) -> Self {
        let ChannelState {
            h1_sq: h1,
            h2_sq: h2,
            h3_sq: h3,
            hsi_sq: hs,
        } = *ch;
        let p = p_ue;
        let PowerSplit {
            alpha1: a1,
            alpha2: a2,
        } = split;
        let g = gamma_a;

        let chi1 = 1.0 + hs * p + h3 * a1 * p;
        let chi2 = 1.0 + h1 * p * (1.0 - a1) + h2 * p * (1.0 - a2);
        let phi1 =
            h1 * h3 * p * (1.0 - 2.0 * a1) + h2 * h3 * p * (1.0 - a2) + h3 - h1 - h1 * hs * p;
        let phi2 = chi2;

        let psi1 = h1 * (1.0 + h3 * p + hs * p) - g * h3 * (1.0 + h2 * p * (1.0 - a2));
        let psi2 = 1.0 + h2 * p * (1.0 - a2);
        let psi3 = 1.0 + hs * p + h3 * a2 * p;
        let upsilon = g * h2 * h3 * p;

        let (xi1, xi2, xi3) = xi_terms(ch, g, p);
        Self {
            chi1,
            chi2,
            phi1,
            phi2,
            psi1,
            psi2,
            psi3,
            upsilon,
            xi1,
            xi2,
            xi3,
        }
    }
}

/// Coefficients of the stationary-point equation along the QoS-tight branch;
/// the roots are `(−ξ₂ ± √(ξ₂² − ξ₃)) / ξ₁`.
pub fn xi_terms(ch: &ChannelState, gamma_a: f64, p_ue: f64) -> (f64, f64, f64) {
    let ChannelState {
        h1_sq: h1,
        h2_sq: h2,
        h3_sq: h3,
        hsi_sq: hs,
    } = *ch;
    let (g, p) = (gamma_a, p_ue);
    let (h2_2, h3_2, hs_2, p2) = (h2 * h2, h3 * h3, hs * hs, p * p);

    let xi1 = 6.0 * g * h2_2 * h3_2 * p2;
    let xi2 = 2.0 * h1 * h2 * h3 * p * (1.0 + h3 * p + hs * p)
        + 2.0 * g * h2_2 * h3 * p * (1.0 + hs * p)
        - 4.0 * g * h2 * h3_2 * p * (1.0 + h2 * p);
    let bracket = g * h3_2
        + g * h2 * h3 * (h2 * h3 * p2 - 2.0)
        + h1 * h2 * (1.0 + 2.0 * hs * p - h3_2 * p2 + hs_2 * p2)
        - h1 * h3 * (1.0 + h3 * p + hs * p)
        - 2.0 * g * h2 * h3 * p * (h2 - h3 + hs + h2 * hs * p);
    let xi3 = 12.0 * g * h2_2 * h3_2 * p2 * bracket;
    (xi1, xi2, xi3)
}

/// dR_sum/dα₁ in bit/s per unit α₁.
pub fn d1_alpha1(ch: &ChannelState, split: PowerSplit, p_ue: f64, bandwidth_hz: f64) -> f64 {
    let s = DerivativeScratch::new(ch, split, 0.0, p_ue);
    bandwidth_hz * p_ue * s.phi1 / (LN_2 * s.chi1 * s.phi2)
}

/// d²R_sum/dα₁².
pub fn d2_alpha1(ch: &ChannelState, split: PowerSplit, p_ue: f64, bandwidth_hz: f64) -> f64 {
    let s = DerivativeScratch::new(ch, split, 0.0, p_ue);
    let (h1, h3) = (ch.h1_sq, ch.h3_sq);
    -bandwidth_hz * p_ue * p_ue / LN_2 * (h3 * h3 / (s.chi1 * s.chi1) + h1 * h1 / (s.chi2 * s.chi2))
}

/// Guard on |ψ₁| relative to its leading term.
pub const PSI1_GUARD: f64 = 1e-12;

/// d²R_sum/dα₂² along the QoS-tight branch (α₁ from the unclamped uplink
/// solution, so γ_BS→A stays at γ_A).
pub fn d2_alpha2(
    ch: &ChannelState,
    alpha2: f64,
    gamma_a: f64,
    p_ue: f64,
    bandwidth_hz: f64,
) -> Result<f64, AllocatorError> {
    let split = PowerSplit {
        alpha1: uplink_alpha1(ch, alpha2, gamma_a, p_ue),
        alpha2,
    };
    let s = DerivativeScratch::new(ch, split, gamma_a, p_ue);
    let scale = ch.h1_sq * (1.0 + ch.h3_sq * p_ue + ch.hsi_sq * p_ue);
    if s.psi1.abs() < PSI1_GUARD * scale {
        return Err(AllocatorError::Singular { alpha2 });
    }
    let (h2, h3) = (ch.h2_sq, ch.h3_sq);
    let g = gamma_a;
    let t1 = g * g * h2 * h2 * h3 * h3 / (s.psi1 * s.psi1);
    let t2 = h2 * h2 / (s.psi2 * s.psi2);
    let t3 = h3 * h3 / (s.psi3 * s.psi3);
    Ok(-bandwidth_hz * p_ue * p_ue / LN_2 * (t1 + t2 + t3))
}

/// α₂ at which ψ₁ vanishes (the QoS-tight branch stops being defined there).
pub fn discontinuity_alpha2(ch: &ChannelState, gamma_a: f64, p_ue: f64) -> Option<f64> {
    let upsilon = gamma_a * ch.h2_sq * ch.h3_sq * p_ue;
    if upsilon == 0.0 {
        return None;
    }
    let h1p = ch.h1_sq * p_ue;
    Some((gamma_a * ch.h3_sq + upsilon - h1p * (ch.hsi_sq + ch.h3_sq) - ch.h1_sq) / upsilon)
}

/// Stationary points of the QoS-tight branch that survived the derivative gate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StationaryPoints {
    pub candidates: Vec<f64>,
    /// In-domain roots whose numeric derivative was not flat.
    pub discarded: Vec<f64>,
}

/// Sum rate along the QoS-tight branch in nats per unit bandwidth-per-ln2,
/// i.e. `R_sum · ln2 / B`. Used for derivative checks where B cancels.
pub(crate) fn uplink_branch_rate(ch: &ChannelState, alpha2: f64, gamma_a: f64, p_ue: f64) -> f64 {
    let alpha1 = uplink_alpha1(ch, alpha2, gamma_a, p_ue);
    sum_rate(ch, alpha1, alpha2, p_ue, LN_2)
}

/// Central-difference slope check: `|f'(x)| < rtol · |f(x)|`.
pub(crate) fn is_flat(f: impl Fn(f64) -> f64, x: f64, rtol: f64) -> bool {
    let h = 1e-7;
    let slope = (f(x + h) - f(x - h)) / (2.0 * h);
    let value = f(x);
    slope.is_finite() && value.is_finite() && slope.abs() < rtol * value.abs()
}

/// Both roots of the branch's stationarity equation, filtered to [0, 0.5]
/// and gated by a numeric derivative check.
pub fn stationary_alpha2(
    ch: &ChannelState,
    gamma_a: f64,
    p_ue: f64,
    opts: &AllocatorOptions,
) -> Result<StationaryPoints, AllocatorError> {
    let (xi1, xi2, mut xi3) = xi_terms(ch, gamma_a, p_ue);
    xi3 *= opts.xi3_scale;
    if xi1 == 0.0 || !xi1.is_finite() {
        return Err(AllocatorError::Degenerate);
    }
    let disc = xi2 * xi2 - xi3;
    let mut out = StationaryPoints::default();
    if !(disc >= 0.0) {
        return Ok(out);
    }
    // The two roots are the zeros of ξ₁x² + 2ξ₂x + ξ₃/ξ₁; take the large-magnitude
    // one from the formula and the other from the product ξ₃/ξ₁².
    let sq = disc.sqrt();
    let big = (-xi2 - xi2.signum() * sq) / xi1;
    let roots = if big == 0.0 {
        [0.0, 0.0]
    } else {
        [big, xi3 / (xi1 * xi1 * big)]
    };
    for r in roots {
        if !(0.0..=crate::linkmodel::ALPHA_MAX).contains(&r) || out.candidates.contains(&r) {
            continue;
        }
        // A root with ψ₁ ≤ 0 is a stationary point of ln|ψ₁|, where the branch
        // itself is undefined.
        let alpha1 = uplink_alpha1(ch, r, gamma_a, p_ue);
        let psi1 = DerivativeScratch::new(ch, PowerSplit { alpha1, alpha2: r }, gamma_a, p_ue).psi1;
        if !(psi1 > 0.0) {
            continue;
        }
        if is_flat(
            |a2| uplink_branch_rate(ch, a2, gamma_a, p_ue),
            r,
            opts.gate_rtol,
        ) {
            out.candidates.push(r);
        } else {
            log::warn!("stationary candidate alpha2={r} failed the derivative gate; discarded");
            out.discarded.push(r);
        }
    }
    out.candidates.sort_by(f64::total_cmp);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy() -> ChannelState {
        ChannelState::new(10.0, 5.0, 100.0, 0.1).unwrap()
    }

    fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
        let (p, m, c) = (f(x + h), f(x - h), f(x));
        ((p - m) / (2.0 * h), (p - 2.0 * c + m) / (h * h))
    }

    #[test]
    fn alpha1_derivatives_match_differences() {
        let ch = toy();
        let b = 5e6;
        for &(a1, a2) in &[(0.1, 0.2), (0.3, 0.1), (0.45, 0.4)] {
            let split = PowerSplit {
                alpha1: a1,
                alpha2: a2,
            };
            let f = |x: f64| sum_rate(&ch, x, a2, 1.0, b);
            let (d1, d2) = fd(f, a1, 1e-4 * a1);
            assert_relative_eq!(d1_alpha1(&ch, split, 1.0, b), d1, max_relative = 1e-6);
            assert_relative_eq!(d2_alpha1(&ch, split, 1.0, b), d2, max_relative = 1e-4);
            assert!(d2_alpha1(&ch, split, 1.0, b) < 0.0);
        }
    }

    #[test]
    fn alpha2_second_derivative_matches_differences() {
        let ch = toy();
        let b = 5e6;
        for &a2 in &[0.05, 0.2, 0.45] {
            let f = |x: f64| uplink_branch_rate(&ch, x, 1.0, 1.0) * b / LN_2;
            let (_, d2) = fd(f, a2, 1e-4 * a2);
            let got = d2_alpha2(&ch, a2, 1.0, 1.0, b).unwrap();
            assert!(got < 0.0);
            assert_relative_eq!(got, d2, max_relative = 1e-4);
        }
    }

    #[test]
    fn singularity_is_flagged() {
        // Channel whose ψ₁ zero lands inside [0, 0.5].
        let ch = ChannelState::new(2.0, 1.9, 50.0, 0.5).unwrap();
        let g = 3.0;
        let a2 = discontinuity_alpha2(&ch, g, 1.0).unwrap();
        let s = DerivativeScratch::new(
            &ch,
            PowerSplit {
                alpha1: 0.0,
                alpha2: a2,
            },
            g,
            1.0,
        );
        assert!(s.psi1.abs() < 1e-9 * ch.h1_sq * (1.0 + 50.5));
        assert_eq!(
            d2_alpha2(&ch, a2, g, 1.0, 1.0),
            Err(AllocatorError::Singular { alpha2: a2 })
        );
        assert!(discontinuity_alpha2(&ch, 0.0, 1.0).is_none());
    }

    #[test]
    fn xi_roots_solve_the_stationarity_equation() {
        // Direct expansion of Υψ₂ψ₃ − h₂²Pψ₁ψ₃ + h₃²Pψ₁ψ₂ = 0 as a quadratic in α₂.
        let ch = ChannelState::new(812.79, 217.06, 3.2995e7, 885.98).unwrap();
        let (g, p) = (1.0, 0.316);
        let (h1, h2, h3, hs) = (ch.h1_sq, ch.h2_sq, ch.h3_sq, ch.hsi_sq);
        let u = g * h2 * h3 * p;
        let psi1 = (h1 * (1.0 + h3 * p + hs * p) - g * h3 * (1.0 + h2 * p), u);
        let psi2 = (1.0 + h2 * p, -h2 * p);
        let psi3 = (1.0 + hs * p, h3 * p);
        let mul = |x: (f64, f64), y: (f64, f64)| [x.0 * y.0, x.0 * y.1 + x.1 * y.0, x.1 * y.1];
        let (m23, m13, m12) = (mul(psi2, psi3), mul(psi1, psi3), mul(psi1, psi2));
        let q: Vec<f64> = (0..3)
            .map(|k| u * m23[k] - h2 * p * m13[k] + h3 * p * m12[k])
            .collect();
        let (xi1, xi2, xi3) = xi_terms(&ch, g, p);
        let disc = xi2 * xi2 - xi3;
        assert!(disc > 0.0);
        for sign in [1.0, -1.0] {
            let r = (-xi2 + sign * disc.sqrt()) / xi1;
            let resid = q[0] + q[1] * r + q[2] * r * r;
            let scale = q[0].abs() + (q[1] * r).abs() + (q[2] * r * r).abs();
            assert!(resid.abs() < 1e-9 * scale, "root {r} residual {resid}");
        }
    }

    #[test]
    fn stationary_points_filtering() {
        let opts = AllocatorOptions::default();
        // γ_A = 0 collapses the quadratic.
        assert_eq!(
            stationary_alpha2(&toy(), 0.0, 1.0, &opts),
            Err(AllocatorError::Degenerate)
        );
        // At γ_A = 2 one root sits where ψ₁ < 0; it is dropped, not discarded.
        let ch = ChannelState::new(12.0, 10.0, 40.0, 0.3).unwrap();
        for g in [0.2, 0.5, 1.0, 2.0] {
            let sp = stationary_alpha2(&ch, g, 1.0, &opts).unwrap();
            assert!(
                sp.discarded.is_empty() && sp.candidates.is_empty(),
                "{g}: {sp:?}"
            );
        }
        // Interior roots that do exist are flat.
        let ch = ChannelState::new(10.0, 5.0, 5.0, 5.0).unwrap();
        for (g, want) in [
            (0.5, 0.093_028_747_145_627_85),
            (1.0, 0.205_252_268_555_927_5),
            (2.0, 0.435_504_172_978_053),
        ] {
            let sp = stationary_alpha2(&ch, g, 1.0, &opts).unwrap();
            assert!(sp.discarded.is_empty());
            assert_eq!(sp.candidates.len(), 1);
            let c = sp.candidates[0];
            assert_relative_eq!(c, want, max_relative = 1e-12);
            let f = |x: f64| uplink_branch_rate(&ch, x, g, 1.0);
            let (d1, d2) = fd(f, c, 1e-5);
            assert!(d1.abs() < 1e-6 * f(c).abs());
            assert!(d2 < 0.0);
        }
    }

    #[test]
    fn corrupted_xi3_is_caught_by_the_gate() {
        let ch = ChannelState::new(812.79, 217.06, 3.2995e7, 885.98).unwrap();
        let p = 0.316;
        let good = stationary_alpha2(&ch, 1.0, p, &AllocatorOptions::default()).unwrap();
        assert!(good.candidates.is_empty() && good.discarded.is_empty());
        let bad_opts = AllocatorOptions {
            xi3_scale: 0.5,
            ..AllocatorOptions::default()
        };
        let bad = stationary_alpha2(&ch, 1.0, p, &bad_opts).unwrap();
        assert!(bad.candidates.is_empty());
        assert_eq!(bad.discarded.len(), 1, "{bad:?}");
    }
}
