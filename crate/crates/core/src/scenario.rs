//! User geometry and channel realizations.
//!
//! Everything downstream works with linear channel-to-noise ratios per watt of
//! transmit power. A CNR folds together lognormal shadowing, small-scale fading,
//! distance path loss and the receiver noise floor `B·N0`:
//!
//! ```text
//! |h_i|²   = δ_i |H_i|² / (L_i · B · N0)             i ∈ {UE1-BS, UE2-BS, UE1-UE2}
//! |h_SI|²  = |H_SI|² / (ζ · L_fs(antenna sep.) · B · N0)
//! ```
//!
//! UE-BS links are Rayleigh, the D2D and self-interference links are Rician.
//! All fading power gains are unit mean.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario parameter `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error("distance {distance} m is below the path-loss reference distance {reference} m")]
    BelowReference { distance: f64, reference: f64 },
    #[error("degenerate realization: UE-BS channel gains are equal")]
    EqualGains,
    #[error("channel inputs must be positive and finite")]
    NonPositiveInput,
}

/// Simulation parameters. Defaults describe a 250 m cell at 2 GHz with 5 MHz
/// of bandwidth; the Rician K factors, minimum BS distance and path-loss
/// reference distance are modelling choices on top of that.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub cell_radius_m: f64,
    pub max_d2d_separation_m: f64,
    pub min_bs_distance_m: f64,
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub path_loss_exponent: f64,
    pub path_loss_ref_m: f64,
    pub shadowing_sigma_db: f64,
    pub antenna_separation_m: f64,
    pub si_cancellation_db: f64,
    pub rician_k_d2d_db: f64,
    pub rician_k_si_db: f64,
    pub p_ue_max_dbm: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cell_radius_m: 250.0,
            max_d2d_separation_m: 20.0,
            min_bs_distance_m: 10.0,
            carrier_frequency_hz: 2e9,
            bandwidth_hz: 5e6,
            noise_psd_dbm_hz: -174.0,
            path_loss_exponent: 3.0,
            path_loss_ref_m: 1.0,
            shadowing_sigma_db: 8.0,
            antenna_separation_m: 0.3,
            si_cancellation_db: 80.0,
            rician_k_d2d_db: 10.0,
            rician_k_si_db: 15.0,
            p_ue_max_dbm: 25.0,
        }
    }
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidConfig {
        key,
        reason: reason.into(),
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let finite = [
            ("cell_radius_m", self.cell_radius_m),
            ("max_d2d_separation_m", self.max_d2d_separation_m),
            ("min_bs_distance_m", self.min_bs_distance_m),
            ("carrier_frequency_hz", self.carrier_frequency_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz),
            ("path_loss_exponent", self.path_loss_exponent),
            ("path_loss_ref_m", self.path_loss_ref_m),
            ("shadowing_sigma_db", self.shadowing_sigma_db),
            ("antenna_separation_m", self.antenna_separation_m),
            ("si_cancellation_db", self.si_cancellation_db),
            ("rician_k_d2d_db", self.rician_k_d2d_db),
            ("rician_k_si_db", self.rician_k_si_db),
            ("p_ue_max_dbm", self.p_ue_max_dbm),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(invalid(key, "must be finite"));
            }
        }
        if self.max_d2d_separation_m <= 0.0 {
            return Err(invalid("max_d2d_separation_m", "must be > 0"));
        }
        if self.cell_radius_m <= self.max_d2d_separation_m {
            return Err(invalid("cell_radius_m", "must exceed max_d2d_separation_m"));
        }
        if self.min_bs_distance_m < 0.0 || self.min_bs_distance_m >= self.cell_radius_m {
            return Err(invalid(
                "min_bs_distance_m",
                "must lie in [0, cell_radius_m)",
            ));
        }
        if self.path_loss_ref_m <= 0.0 || self.path_loss_ref_m >= self.max_d2d_separation_m {
            return Err(invalid(
                "path_loss_ref_m",
                "must lie in (0, max_d2d_separation_m)",
            ));
        }
        if self.min_bs_distance_m < self.path_loss_ref_m {
            return Err(invalid(
                "min_bs_distance_m",
                "must be at least path_loss_ref_m",
            ));
        }
        if self.bandwidth_hz <= 0.0 {
            return Err(invalid("bandwidth_hz", "must be > 0"));
        }
        if self.carrier_frequency_hz <= 0.0 {
            return Err(invalid("carrier_frequency_hz", "must be > 0"));
        }
        if self.path_loss_exponent <= 0.0 {
            return Err(invalid("path_loss_exponent", "must be > 0"));
        }
        if self.shadowing_sigma_db < 0.0 {
            return Err(invalid("shadowing_sigma_db", "must be >= 0"));
        }
        if self.si_cancellation_db < 0.0 {
            return Err(invalid("si_cancellation_db", "must be >= 0"));
        }
        if self.antenna_separation_m <= 0.0 {
            return Err(invalid("antenna_separation_m", "must be > 0"));
        }
        Ok(())
    }

    /// Total receiver noise power `B·N0` in watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz) * self.bandwidth_hz
    }

    pub fn path_loss(&self) -> PathLossModel {
        PathLossModel {
            exponent: self.path_loss_exponent,
            ref_distance_m: self.path_loss_ref_m,
            carrier_hz: self.carrier_frequency_hz,
        }
    }

    pub fn p_ue_max_w(&self) -> f64 {
        dbm_to_watts(self.p_ue_max_dbm)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Free-space loss `(4π d f / c)²`.
pub fn free_space_loss(distance_m: f64, carrier_hz: f64) -> f64 {
    let x = 4.0 * PI * distance_m * carrier_hz / SPEED_OF_LIGHT;
    x * x
}

/// Log-distance path loss anchored to free space at the reference distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub exponent: f64,
    pub ref_distance_m: f64,
    pub carrier_hz: f64,
}

impl PathLossModel {
    pub fn loss(&self, distance_m: f64) -> Result<f64, ScenarioError> {
        path_loss_linear(
            distance_m,
            self.exponent,
            self.ref_distance_m,
            self.carrier_hz,
        )
    }
}

/// `L_fs(d_ref) · (d / d_ref)^exponent`.
pub fn path_loss_linear(
    distance_m: f64,
    exponent: f64,
    ref_distance_m: f64,
    carrier_hz: f64,
) -> Result<f64, ScenarioError> {
    if !(distance_m >= ref_distance_m) {
        return Err(ScenarioError::BelowReference {
            distance: distance_m,
            reference: ref_distance_m,
        });
    }
    Ok(free_space_loss(ref_distance_m, carrier_hz) * (distance_m / ref_distance_m).powf(exponent))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadingKind {
    Rayleigh,
    /// Rice factor in dB. `f64::INFINITY` is a pure line-of-sight channel.
    Rician {
        k_db: f64,
    },
}

/// Draws a unit-mean fading power gain `|H|²`.
pub fn draw_fading<R: Rng + ?Sized>(kind: FadingKind, rng: &mut R) -> f64 {
    match kind {
        FadingKind::Rayleigh => Exp1.sample(rng),
        FadingKind::Rician { k_db } => {
            if k_db == f64::INFINITY {
                return 1.0;
            }
            let k = db_to_linear(k_db);
            let los = (k / (k + 1.0)).sqrt();
            let sigma = (0.5 / (k + 1.0)).sqrt();
            let i: f64 = StandardNormal.sample(rng);
            let q: f64 = StandardNormal.sample(rng);
            let re = los + sigma * i;
            let im = sigma * q;
            re * re + im * im
        }
    }
}

/// Draws a lognormal shadowing factor `10^(X/10)`, `X ~ N(0, σ²)` in dB.
pub fn draw_shadowing<R: Rng + ?Sized>(sigma_db: f64, rng: &mut R) -> f64 {
    if sigma_db == 0.0 {
        return 1.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    db_to_linear(sigma_db * z)
}

/// Distances of one UE pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UePlacement {
    pub d1_m: f64,
    pub d2_m: f64,
    pub d3_m: f64,
}

/// Places the pair midpoint uniformly (by area) in the annulus
/// `[min_bs_distance, cell_radius]` and offsets the two UEs symmetrically by a
/// vector drawn uniformly from a disc of radius `max_d2d_separation`.
/// Draws that put a UE outside the annulus, or closer to its peer than the
/// path-loss reference distance, are rejected.
pub fn place_users<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> UePlacement {
    let r_min2 = cfg.min_bs_distance_m * cfg.min_bs_distance_m;
    let r_max2 = cfg.cell_radius_m * cfg.cell_radius_m;
    loop {
        let r = rng.random_range(r_min2..=r_max2).sqrt();
        let theta = rng.random_range(0.0..2.0 * PI);
        let (mx, my) = (r * theta.cos(), r * theta.sin());

        let sep = cfg.max_d2d_separation_m * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..2.0 * PI);
        let (ox, oy) = (0.5 * sep * phi.cos(), 0.5 * sep * phi.sin());

        let d1 = (mx - ox).hypot(my - oy);
        let d2 = (mx + ox).hypot(my + oy);
        let in_cell = |d: f64| d >= cfg.min_bs_distance_m && d <= cfg.cell_radius_m;
        if in_cell(d1) && in_cell(d2) && sep >= cfg.path_loss_ref_m {
            return UePlacement {
                d1_m: d1,
                d2_m: d2,
                d3_m: sep,
            };
        }
    }
}

/// Linear CNRs (1/W) of one realization. UE1 is always the UE with the
/// stronger BS channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    pub h1_sq: f64,
    pub h2_sq: f64,
    pub h3_sq: f64,
    pub hsi_sq: f64,
}

impl ChannelState {
    pub fn new(h1_sq: f64, h2_sq: f64, h3_sq: f64, hsi_sq: f64) -> Result<Self, ScenarioError> {
        let all = [h1_sq, h2_sq, h3_sq, hsi_sq];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ScenarioError::NonPositiveInput);
        }
        if h1_sq == h2_sq {
            return Err(ScenarioError::EqualGains);
        }
        if h1_sq < h2_sq {
            return Err(invalid("h1_sq", "UE1 must have the stronger BS channel"));
        }
        Ok(Self {
            h1_sq,
            h2_sq,
            h3_sq,
            hsi_sq,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingDraws {
    pub ue1_bs: f64,
    pub ue2_bs: f64,
    pub d2d: f64,
    pub si: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowingDraws {
    pub ue1_bs: f64,
    pub ue2_bs: f64,
    pub d2d: f64,
}

/// A channel realization plus whether the physical UEs were relabelled so that
/// UE1 is the stronger one. When `swapped` is set, physical UE2 uploads file A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Realization {
    pub placement: UePlacement,
    pub channel: ChannelState,
    pub swapped: bool,
}

pub fn build_channel_state(
    cfg: &ScenarioConfig,
    placement: &UePlacement,
    fading: &FadingDraws,
    shadowing: &ShadowingDraws,
) -> Result<(ChannelState, bool), ScenarioError> {
    let noise = cfg.noise_power_w();
    let pl = cfg.path_loss();
    let cnr = |delta: f64, gain: f64, d: f64| -> Result<f64, ScenarioError> {
        Ok(delta * gain / (pl.loss(d)? * noise))
    };
    let a = cnr(shadowing.ue1_bs, fading.ue1_bs, placement.d1_m)?;
    let b = cnr(shadowing.ue2_bs, fading.ue2_bs, placement.d2_m)?;
    let h3 = cnr(shadowing.d2d, fading.d2d, placement.d3_m)?;
    let hsi = fading.si
        / (db_to_linear(cfg.si_cancellation_db)
            * free_space_loss(cfg.antenna_separation_m, cfg.carrier_frequency_hz)
            * noise);
    let swapped = a < b;
    let (h1, h2) = if swapped { (b, a) } else { (a, b) };
    Ok((ChannelState::new(h1, h2, h3, hsi)?, swapped))
}

/// Draws placement, shadowing and fading, retrying on the measure-zero
/// equal-gain case.
pub fn draw_realization<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Realization {
    loop {
        let placement = place_users(cfg, rng);
        let shadowing = ShadowingDraws {
            ue1_bs: draw_shadowing(cfg.shadowing_sigma_db, rng),
            ue2_bs: draw_shadowing(cfg.shadowing_sigma_db, rng),
            d2d: draw_shadowing(cfg.shadowing_sigma_db, rng),
        };
        let fading = FadingDraws {
            ue1_bs: draw_fading(FadingKind::Rayleigh, rng),
            ue2_bs: draw_fading(FadingKind::Rayleigh, rng),
            d2d: draw_fading(
                FadingKind::Rician {
                    k_db: cfg.rician_k_d2d_db,
                },
                rng,
            ),
            si: draw_fading(
                FadingKind::Rician {
                    k_db: cfg.rician_k_si_db,
                },
                rng,
            ),
        };
        match build_channel_state(cfg, &placement, &fading, &shadowing) {
            Ok((channel, swapped)) => {
                return Realization {
                    placement,
                    channel,
                    swapped,
                }
            }
            Err(err) => log::debug!("re-drawing realization: {err}"),
        }
    }
}

/// Independent random stream for trial `index` under `master_seed`.
///
/// Every trial gets its own ChaCha stream (same key, stream id = trial index),
/// so results do not depend on which thread evaluates which trial.
pub fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn free_space_at_antenna_separation() {
        // λ = 0.15 m at 2 GHz (exact c would give 0.1499 m).
        let got = free_space_loss(0.3, 2e9);
        let lambda = SPEED_OF_LIGHT / 2e9;
        assert_relative_eq!(got, (4.0 * PI * 0.3 / lambda).powi(2), max_relative = 1e-14);
        assert_relative_eq!(got, (8.0 * PI).powi(2), max_relative = 2e-3);
        assert_relative_eq!(10.0 * got.log10(), 28.0, epsilon = 0.05);
        let unity = SPEED_OF_LIGHT / 2e9 / (4.0 * PI);
        assert_relative_eq!(free_space_loss(unity, 2e9), 1.0, max_relative = 1e-12);
        assert_relative_eq!(free_space_loss(0.6, 2e9), 4.0 * got, max_relative = 1e-12);
    }

    #[test]
    fn path_loss_anchors() {
        let fs = free_space_loss(1.0, 2e9);
        assert_relative_eq!(path_loss_linear(1.0, 3.0, 1.0, 2e9).unwrap(), fs);
        assert_relative_eq!(
            path_loss_linear(2.0, 3.0, 1.0, 2e9).unwrap(),
            8.0 * fs,
            max_relative = 1e-12
        );
        let hand = (4.0 * PI * 2e9 / SPEED_OF_LIGHT).powi(2) * 250f64.powi(3);
        assert_relative_eq!(
            path_loss_linear(250.0, 3.0, 1.0, 2e9).unwrap(),
            hand,
            max_relative = 1e-12
        );
        assert!(matches!(
            path_loss_linear(0.5, 3.0, 1.0, 2e9),
            Err(ScenarioError::BelowReference { .. })
        ));
    }

    #[test]
    fn noise_floor_table_values() {
        let cfg = ScenarioConfig::default();
        let n = cfg.noise_power_w();
        assert_relative_eq!(10.0 * (n * 1e3).log10(), -107.0103, epsilon = 1e-3);
        assert_relative_eq!(n, 1.99e-14, max_relative = 2e-3);
    }

    #[test]
    fn identity_inputs_give_unit_cnr() {
        // B·N0 = 1 W, L = 1 at d = d_ref with f chosen for unit free-space loss.
        let f = SPEED_OF_LIGHT / (4.0 * PI);
        let cfg = ScenarioConfig {
            bandwidth_hz: 1.0,
            noise_psd_dbm_hz: 30.0,
            carrier_frequency_hz: f,
            si_cancellation_db: 0.0,
            antenna_separation_m: 1.0,
            ..ScenarioConfig::default()
        };
        let placement = UePlacement {
            d1_m: 1.0,
            d2_m: 1.0,
            d3_m: 1.0,
        };
        let fading = FadingDraws {
            ue1_bs: 1.0,
            ue2_bs: 0.5,
            d2d: 1.0,
            si: 1.0,
        };
        let shadow = ShadowingDraws {
            ue1_bs: 1.0,
            ue2_bs: 1.0,
            d2d: 1.0,
        };
        let (ch, swapped) = build_channel_state(&cfg, &placement, &fading, &shadow).unwrap();
        assert!(!swapped);
        assert_relative_eq!(ch.h1_sq, 1.0, max_relative = 1e-12);
        assert_relative_eq!(ch.h2_sq, 0.5, max_relative = 1e-12);
        assert_relative_eq!(ch.h3_sq, 1.0, max_relative = 1e-12);
        assert_relative_eq!(ch.hsi_sq, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn labels_follow_the_stronger_channel() {
        let cfg = ScenarioConfig::default();
        let placement = UePlacement {
            d1_m: 200.0,
            d2_m: 100.0,
            d3_m: 15.0,
        };
        let fading = FadingDraws {
            ue1_bs: 1.0,
            ue2_bs: 1.0,
            d2d: 1.0,
            si: 1.0,
        };
        let shadow = ShadowingDraws {
            ue1_bs: 1.0,
            ue2_bs: 1.0,
            d2d: 1.0,
        };
        let (ch, swapped) = build_channel_state(&cfg, &placement, &fading, &shadow).unwrap();
        assert!(swapped);
        assert!(ch.h1_sq > ch.h2_sq);
        assert_relative_eq!(ch.h1_sq / ch.h2_sq, 8.0, max_relative = 1e-12);

        let equal = FadingDraws {
            ue2_bs: 1.0,
            ..fading
        };
        let same = UePlacement {
            d2_m: 200.0,
            ..placement
        };
        assert_eq!(
            build_channel_state(&cfg, &same, &equal, &shadow),
            Err(ScenarioError::EqualGains)
        );
    }

    #[test]
    fn si_cnr_matches_hand_computation() {
        let cfg = ScenarioConfig::default();
        let placement = UePlacement {
            d1_m: 100.0,
            d2_m: 120.0,
            d3_m: 10.0,
        };
        let unit = FadingDraws {
            ue1_bs: 1.0,
            ue2_bs: 1.0,
            d2d: 1.0,
            si: 1.0,
        };
        let shadow = ShadowingDraws {
            ue1_bs: 1.0,
            ue2_bs: 1.0,
            d2d: 1.0,
        };
        let (ch, _) = build_channel_state(&cfg, &placement, &unit, &shadow).unwrap();
        let noise = 10f64.powf(-20.4) * 5e6;
        let hand = 1.0 / (1e8 * free_space_loss(0.3, 2e9) * noise);
        assert_relative_eq!(ch.hsi_sq, hand, max_relative = 1e-12);
    }

    #[test]
    fn placement_respects_geometry_and_seed() {
        let cfg = ScenarioConfig::default();
        let mut rng = trial_rng(7, 0);
        for _ in 0..20_000 {
            let p = place_users(&cfg, &mut rng);
            assert!(p.d3_m <= 20.0 && p.d3_m >= 1.0);
            assert!(p.d1_m <= 250.0 && p.d2_m <= 250.0);
            assert!(p.d1_m >= 10.0 && p.d2_m >= 10.0);
        }
        let a = place_users(&cfg, &mut trial_rng(11, 3));
        let b = place_users(&cfg, &mut trial_rng(11, 3));
        assert_eq!(a, b);
        let c = place_users(&cfg, &mut trial_rng(11, 4));
        assert_ne!(a, c);
    }

    #[test]
    fn fading_statistics() {
        let mut rng = trial_rng(1, 0);
        let n = 1_000_000;
        for kind in [FadingKind::Rayleigh, FadingKind::Rician { k_db: 10.0 }] {
            let mean = (0..n).map(|_| draw_fading(kind, &mut rng)).sum::<f64>() / n as f64;
            assert!((mean - 1.0).abs() < 0.01, "{kind:?} mean {mean}");
        }
        // Exponential CDF at a few points.
        let draws: Vec<f64> = (0..n)
            .map(|_| draw_fading(FadingKind::Rayleigh, &mut rng))
            .collect();
        for x in [0.1, 0.5, 1.0, 2.0, 4.0] {
            let emp = draws.iter().filter(|&&v| v <= x).count() as f64 / n as f64;
            assert!((emp - (1.0 - (-x).exp())).abs() < 0.01);
        }
        assert_eq!(
            draw_fading(
                FadingKind::Rician {
                    k_db: f64::INFINITY
                },
                &mut rng
            ),
            1.0
        );
        let strong: Vec<f64> = (0..1000)
            .map(|_| draw_fading(FadingKind::Rician { k_db: 60.0 }, &mut rng))
            .collect();
        assert!(strong.iter().all(|v| (v - 1.0).abs() < 0.01));
    }

    #[test]
    fn shadowing_statistics() {
        let mut rng = trial_rng(2, 0);
        assert_eq!(draw_shadowing(0.0, &mut rng), 1.0);
        let n = 1_000_000;
        let mut draws: Vec<f64> = (0..n).map(|_| draw_shadowing(8.0, &mut rng)).collect();
        let tail = draws.iter().filter(|&&d| d > db_to_linear(8.0)).count() as f64 / n as f64;
        assert!((tail - 0.1587).abs() < 0.01, "tail {tail}");
        draws.sort_by(f64::total_cmp);
        let median = draws[n / 2];
        assert!((median - 1.0).abs() < 0.05, "median {median}");
    }

    #[test]
    fn config_validation() {
        assert!(ScenarioConfig::default().validate().is_ok());
        let bad = ScenarioConfig {
            max_d2d_separation_m: 300.0,
            ..ScenarioConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ScenarioConfig {
            bandwidth_hz: 0.0,
            ..ScenarioConfig::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(ScenarioError::InvalidConfig {
                key: "bandwidth_hz",
                ..
            })
        ));
    }
}
