//! Seeded Monte Carlo sweeps over transmit power or minimum rate.
//!
//! Trial `i` always draws its channel from sub-stream `i` of the master
//! seed, and that one channel is reused for every sweep value and every
//! scheme. Trials are processed in fixed-size chunks whose summaries are
//! merged in chunk order, so the floating-point result does not depend on
//! how many threads ran the chunks.

use thiserror::Error;

use crate::allocator::solve;
use crate::baselines::{phased, slotted, Scheme};
use crate::linkmodel::{QosSpec, RateSet};
use crate::par;
use crate::scenario::{dbm_to_watts, draw_realization, trial_rng, ChannelState, ScenarioConfig};

const CHUNK: u64 = 256;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("sweep needs at least one trial")]
    NoTrials,
    #[error("sweep needs at least one value")]
    NoValues,
    #[error("sweep values must be strictly increasing")]
    NotIncreasing,
    #[error("sweep needs at least one scheme")]
    NoSchemes,
    #[error("outage curves sweep the minimum rate, not {0:?}")]
    WrongVariable(SweepVariable),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    PUeDbm,
    RMinMbps,
}

impl SweepVariable {
    pub fn column(self) -> &'static str {
        match self {
            SweepVariable::PUeDbm => "p_ue_dbm",
            SweepVariable::RMinMbps => "r_min_mbps",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials: u64,
    pub master_seed: u64,
    pub schemes: Vec<Scheme>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.trials == 0 {
            return Err(SweepError::NoTrials);
        }
        if self.values.is_empty() {
            return Err(SweepError::NoValues);
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SweepError::NotIncreasing);
        }
        if self.schemes.is_empty() {
            return Err(SweepError::NoSchemes);
        }
        Ok(())
    }

    /// Schemes in canonical order without duplicates.
    fn ordered_schemes(&self) -> Vec<Scheme> {
        Scheme::ALL
            .into_iter()
            .filter(|s| self.schemes.contains(s))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeOutcome {
    pub rates: RateSet,
    pub outage: bool,
}

pub fn evaluate_scheme(
    scheme: Scheme,
    ch: &ChannelState,
    qos: &QosSpec,
    p_ue: f64,
) -> SchemeOutcome {
    match scheme {
        Scheme::Proposed => {
            let out = solve(ch, qos, p_ue);
            SchemeOutcome {
                rates: out.rates,
                outage: !out.is_optimal(),
            }
        }
        Scheme::Phased => {
            let out = phased(ch, qos, p_ue);
            SchemeOutcome {
                rates: out.rates,
                outage: out.outage,
            }
        }
        Scheme::Slotted => {
            let out = slotted(ch, qos, p_ue);
            SchemeOutcome {
                rates: out.rates,
                outage: out.outage,
            }
        }
    }
}

/// Running sums for one mean.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    fn stat(&self) -> MeanStat {
        if self.n == 0 {
            return MeanStat::default();
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        let ci95 = if self.n > 1 {
            let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            Z95 * (var / n).sqrt()
        } else {
            0.0
        };
        MeanStat {
            mean,
            ci95,
            samples: self.n,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct CellAcc {
    outages: u64,
    all: [Moments; 3],
    cond: [Moments; 3],
}

impl CellAcc {
    fn push(&mut self, o: &SchemeOutcome) {
        let v = [o.rates.r_sum, o.rates.r_ul, o.rates.r_d2d];
        if o.outage {
            self.outages += 1;
            for m in &mut self.all {
                m.push(0.0);
            }
        } else {
            for ((all, cond), x) in self.all.iter_mut().zip(&mut self.cond).zip(v) {
                all.push(x);
                cond.push(x);
            }
        }
    }

    fn merge(&mut self, o: &CellAcc) {
        self.outages += o.outages;
        for k in 0..3 {
            self.all[k].merge(&o.all[k]);
            self.cond[k].merge(&o.cond[k]);
        }
    }
}

/// A sample mean and its 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanStat {
    /// Zero when there are no samples.
    pub mean: f64,
    pub ci95: f64,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub scheme: Scheme,
    pub value: f64,
    pub trials: u64,
    pub outages: u64,
    pub outage_prob: f64,
    /// Outage trials count as zero.
    pub r_sum: MeanStat,
    pub r_ul: MeanStat,
    pub r_d2d: MeanStat,
    /// Over non-outage trials only.
    pub cond_r_sum: MeanStat,
    pub cond_r_ul: MeanStat,
    pub cond_r_d2d: MeanStat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub variable: SweepVariable,
    /// Ordered by scheme, then by sweep value.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, scheme: Scheme, value: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.scheme == scheme && c.value == value)
    }

    pub fn series(&self, scheme: Scheme) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().filter(move |c| c.scheme == scheme)
    }
}

/// Power and QoS for one sweep point.
fn operating_point(
    cfg: &ScenarioConfig,
    qos: &QosSpec,
    variable: SweepVariable,
    value: f64,
) -> (f64, QosSpec) {
    match variable {
        SweepVariable::PUeDbm => (dbm_to_watts(value), *qos),
        SweepVariable::RMinMbps => (
            cfg.p_ue_max_w(),
            QosSpec::uniform(value * 1e6, qos.bandwidth_hz),
        ),
    }
}

pub fn run_sweep(
    cfg: &ScenarioConfig,
    qos: &QosSpec,
    spec: &SweepSpec,
) -> Result<SweepResult, SweepError> {
    spec.validate()?;
    let schemes = spec.ordered_schemes();
    let points: Vec<(f64, QosSpec)> = spec
        .values
        .iter()
        .map(|&v| operating_point(cfg, qos, spec.variable, v))
        .collect();
    let ncell = schemes.len() * points.len();
    let chunks = spec.trials.div_ceil(CHUNK);

    let partial = par::map_indexed(chunks as usize, |c| {
        let mut acc = vec![CellAcc::default(); ncell];
        let start = c as u64 * CHUNK;
        for trial in start..(start + CHUNK).min(spec.trials) {
            let mut rng = trial_rng(spec.master_seed, trial);
            let ch = draw_realization(cfg, &mut rng).channel;
            for (si, &scheme) in schemes.iter().enumerate() {
                for (vi, (p, q)) in points.iter().enumerate() {
                    acc[si * points.len() + vi].push(&evaluate_scheme(scheme, &ch, q, *p));
                }
            }
        }
        acc
    });

    let mut total = vec![CellAcc::default(); ncell];
    for acc in &partial {
        for (t, a) in total.iter_mut().zip(acc) {
            t.merge(a);
        }
    }

    let mut cells = Vec::with_capacity(ncell);
    for (si, &scheme) in schemes.iter().enumerate() {
        for (vi, &value) in spec.values.iter().enumerate() {
            let a = &total[si * points.len() + vi];
            cells.push(SweepCell {
                scheme,
                value,
                trials: spec.trials,
                outages: a.outages,
                outage_prob: a.outages as f64 / spec.trials as f64,
                r_sum: a.all[0].stat(),
                r_ul: a.all[1].stat(),
                r_d2d: a.all[2].stat(),
                cond_r_sum: a.cond[0].stat(),
                cond_r_ul: a.cond[1].stat(),
                cond_r_d2d: a.cond[2].stat(),
            });
        }
    }
    Ok(SweepResult {
        variable: spec.variable,
        cells,
    })
}

/// Outage against the common minimum rate of all four files, at the
/// configured maximum UE power.
pub fn outage_curve(
    cfg: &ScenarioConfig,
    bandwidth_hz: f64,
    spec: &SweepSpec,
) -> Result<SweepResult, SweepError> {
    if spec.variable != SweepVariable::RMinMbps {
        return Err(SweepError::WrongVariable(spec.variable));
    }
    run_sweep(cfg, &QosSpec::uniform(0.0, bandwidth_hz), spec)
}
