//! The two time-split comparison schemes.
//!
//! * Phased: an uplink NOMA phase (both UEs at full power, no cache traffic)
//!   followed by a full-duplex D2D phase (both UEs at full power, cache only).
//! * Slotted: UE1 owns the first slot and UE2 the second. The slot owner
//!   superposes its uplink file and its cache file; the other UE listens.
//!
//! Every file gets half the time, so each rate carries a 0.5 time share.

use std::fmt;

use crate::linkmodel::{meets_rate, shannon_rate, QosSpec, RateSet};
use crate::scenario::ChannelState;

pub const TIME_SHARE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Proposed,
    Phased,
    Slotted,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::Phased, Scheme::Slotted];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Phased => "phased",
            Scheme::Slotted => "slotted",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineOutcome {
    pub scheme: Scheme,
    pub rates: RateSet,
    pub outage: bool,
}

fn any_short(rates: &RateSet, qos: &QosSpec) -> bool {
    !(meets_rate(rates.r_bs_a, qos.r_min_a)
        && meets_rate(rates.r_bs_b, qos.r_min_b)
        && meets_rate(rates.r_ue2_c, qos.r_min_c)
        && meets_rate(rates.r_ue1_d, qos.r_min_d))
}

/// SINRs of the two phases: `(γ_A, γ_B, γ_cache)`; the cache SINR is the
/// same in both directions.
pub fn phased_sinrs(ch: &ChannelState, p_ue: f64) -> (f64, f64, f64) {
    (
        ch.h1_sq * p_ue / (ch.h2_sq * p_ue + 1.0),
        ch.h2_sq * p_ue,
        ch.h3_sq * p_ue / (ch.hsi_sq * p_ue + 1.0),
    )
}

pub fn phased(ch: &ChannelState, qos: &QosSpec, p_ue: f64) -> BaselineOutcome {
    let (ga, gb, gc) = phased_sinrs(ch, p_ue);
    let r = |g| shannon_rate(g, qos.bandwidth_hz, TIME_SHARE);
    let rates = RateSet::from_files(r(ga), r(gb), r(gc), r(gc), 0.0, 0.0);
    BaselineOutcome {
        scheme: Scheme::Phased,
        rates,
        outage: any_short(&rates, qos),
    }
}

/// One slot of the Slotted scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotSplit {
    /// Fraction of P_UE on the uplink file.
    pub uplink_share: f64,
    /// Whether the uplink needed more than the full power.
    pub uplink_short: bool,
    pub gamma_uplink: f64,
    pub gamma_cache: f64,
}

/// The slot owner gives its uplink file the least power that meets the
/// uplink QoS over half the time, and everything left to the cache file.
/// The listener decodes the cache file with the uplink file as interference.
pub fn slot_split(
    h_bs_sq: f64,
    h3_sq: f64,
    r_min_uplink: f64,
    bandwidth_hz: f64,
    p_ue: f64,
) -> SlotSplit {
    let threshold = 2f64.powf(r_min_uplink / (TIME_SHARE * bandwidth_hz)) - 1.0;
    let needed = threshold / (h_bs_sq * p_ue);
    let uplink_short = !(needed <= 1.0);
    let u = if uplink_short { 1.0 } else { needed };
    let beta = 1.0 - u;
    SlotSplit {
        uplink_share: u,
        uplink_short,
        gamma_uplink: h_bs_sq * u * p_ue,
        gamma_cache: h3_sq * beta * p_ue / (h3_sq * u * p_ue + 1.0),
    }
}

pub fn slotted(ch: &ChannelState, qos: &QosSpec, p_ue: f64) -> BaselineOutcome {
    let b = qos.bandwidth_hz;
    let s1 = slot_split(ch.h1_sq, ch.h3_sq, qos.r_min_a, b, p_ue);
    let s2 = slot_split(ch.h2_sq, ch.h3_sq, qos.r_min_b, b, p_ue);
    let r = |g| shannon_rate(g, b, TIME_SHARE);
    // Slot 1: UE1 sends A to the BS and C to UE2; slot 2: UE2 sends B and D.
    let rates = RateSet::from_files(
        r(s1.gamma_uplink),
        r(s2.gamma_uplink),
        r(s2.gamma_cache),
        r(s1.gamma_cache),
        0.0,
        0.0,
    );
    BaselineOutcome {
        scheme: Scheme::Slotted,
        rates,
        outage: s1.uplink_short || s2.uplink_short || any_short(&rates, qos),
    }
}
