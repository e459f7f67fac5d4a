//! Browser bindings for the allocator demo. Each export takes a JSON object
//! and returns JSON or a typed array. The work happens in plain Rust
//! functions underneath so it can be tested natively.

use noma_sim::allocator::{solve, AllocationStatus};
use noma_sim::baselines::{phased, slotted, Scheme};
use noma_sim::linkmodel::{evaluate_point, PowerSplit, QosSpec, ALPHA_MAX};
use noma_sim::montecarlo::{run_sweep, SweepSpec, SweepVariable};
use noma_sim::scenario::{db_to_linear, dbm_to_watts, ChannelState, ScenarioConfig};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Largest Monte Carlo batch the page may request; keeps the tab responsive.
pub const MAX_TRIALS: u64 = 20_000;
pub const MAX_SURFACE: usize = 400;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DemoError {
    #[error("bad input: {0}")]
    Input(String),
    #[error("{0}")]
    Model(String),
}

/// One link snapshot: CNRs in dB (gain over noise at 1 W), power in dBm.
#[derive(Debug, Clone, Deserialize)]
pub struct LinkInput {
    pub h1_db: f64,
    pub h2_db: f64,
    pub h3_db: f64,
    pub hsi_db: f64,
    pub p_dbm: f64,
    pub r_min_mbps: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_mhz: f64,
}

fn default_bandwidth() -> f64 {
    5.0
}

impl LinkInput {
    /// The channel with UE labels ordered by BS gain, and whether they swapped.
    fn channel(&self) -> Result<(ChannelState, bool), DemoError> {
        let (a, b) = (db_to_linear(self.h1_db), db_to_linear(self.h2_db));
        let swapped = a < b;
        let (h1, h2) = if swapped { (b, a) } else { (a, b) };
        ChannelState::new(h1, h2, db_to_linear(self.h3_db), db_to_linear(self.hsi_db))
            .map(|ch| (ch, swapped))
            .map_err(|e| DemoError::Model(e.to_string()))
    }

    fn qos(&self) -> Result<QosSpec, DemoError> {
        if !(self.bandwidth_mhz > 0.0 && self.r_min_mbps >= 0.0) {
            return Err(DemoError::Input(
                "bandwidth must be positive and R_min non-negative".into(),
            ));
        }
        Ok(QosSpec::uniform(
            self.r_min_mbps * 1e6,
            self.bandwidth_mhz * 1e6,
        ))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeRates {
    pub scheme: &'static str,
    pub outage: bool,
    pub r_ul_mbps: f64,
    pub r_d2d_mbps: f64,
    pub r_sum_mbps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Allocation {
    pub optimal: bool,
    pub swapped: bool,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha2_range: [f64; 2],
    pub alpha2_case: Option<&'static str>,
    pub alpha1_limit: Option<&'static str>,
    pub violated: Vec<&'static str>,
    pub schemes: Vec<SchemeRates>,
}

fn mbps(x: f64) -> f64 {
    x / 1e6
}

pub fn allocate(input: &LinkInput) -> Result<Allocation, DemoError> {
    let (ch, swapped) = input.channel()?;
    let qos = input.qos()?;
    let p = dbm_to_watts(input.p_dbm);
    let out = solve(&ch, &qos, p);
    let row = |scheme: Scheme, r: &noma_sim::linkmodel::RateSet, outage| SchemeRates {
        scheme: scheme.name(),
        outage,
        r_ul_mbps: mbps(r.r_ul),
        r_d2d_mbps: mbps(r.r_d2d),
        r_sum_mbps: mbps(r.r_sum),
    };
    let ph = phased(&ch, &qos, p);
    let sl = slotted(&ch, &qos, p);
    Ok(Allocation {
        optimal: out.status == AllocationStatus::Optimal,
        swapped,
        alpha1: out.split.alpha1,
        alpha2: out.split.alpha2,
        alpha2_range: [out.alpha2_range.lower, out.alpha2_range.upper],
        alpha2_case: out.alpha2_case.map(|c| c.label()),
        alpha1_limit: out.alpha1_branch.map(|b| b.label()),
        violated: out.report.violated().map(|c| c.constraint.tag()).collect(),
        schemes: vec![
            row(Scheme::Proposed, &out.rates, !out.is_optimal()),
            row(Scheme::Phased, &ph.rates, ph.outage),
            row(Scheme::Slotted, &sl.rates, sl.outage),
        ],
    })
}

/// Sum rate (Mbit/s) on an `n × n` lattice over [0, 0.5]², row-major with
/// α₂ along rows and α₁ along columns; infeasible points are NaN.
pub fn rate_surface(input: &LinkInput, n: usize) -> Result<Vec<f64>, DemoError> {
    if !(2..=MAX_SURFACE).contains(&n) {
        return Err(DemoError::Input(format!(
            "surface size must be in 2..={MAX_SURFACE}"
        )));
    }
    let (ch, _) = input.channel()?;
    let qos = input.qos()?;
    let p = dbm_to_watts(input.p_dbm);
    let step = ALPHA_MAX / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let split = PowerSplit {
                alpha1: j as f64 * step,
                alpha2: i as f64 * step,
            };
            let e = evaluate_point(&ch, split, &qos, p);
            out.push(if e.report.feasible() {
                mbps(e.rates.r_sum)
            } else {
                f64::NAN
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Deserialize)]
pub struct SweepInput {
    pub trials: u64,
    pub seed: u64,
    pub r_min_mbps: f64,
    pub p_from_dbm: f64,
    pub p_to_dbm: f64,
    pub p_step_db: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSeries {
    pub scheme: &'static str,
    pub r_sum_mbps: Vec<f64>,
    pub outage: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub p_dbm: Vec<f64>,
    pub series: Vec<SweepSeries>,
}

/// Mean sum rate and outage against UE power on default cell geometry.
pub fn power_sweep(input: &SweepInput) -> Result<SweepOutput, DemoError> {
    if input.trials == 0 || input.trials > MAX_TRIALS {
        return Err(DemoError::Input(format!(
            "trials must be in 1..={MAX_TRIALS}"
        )));
    }
    if !(input.p_step_db > 0.0 && input.p_to_dbm >= input.p_from_dbm) {
        return Err(DemoError::Input(
            "power range must be increasing with a positive step".into(),
        ));
    }
    let count = ((input.p_to_dbm - input.p_from_dbm) / input.p_step_db).floor() as usize + 1;
    if count > 200 {
        return Err(DemoError::Input("at most 200 power points".into()));
    }
    let values: Vec<f64> = (0..count)
        .map(|k| input.p_from_dbm + k as f64 * input.p_step_db)
        .collect();
    let cfg = ScenarioConfig::default();
    let spec = SweepSpec {
        variable: SweepVariable::PUeDbm,
        values: values.clone(),
        trials: input.trials,
        master_seed: input.seed,
        schemes: Scheme::ALL.to_vec(),
    };
    let qos = QosSpec::uniform(input.r_min_mbps * 1e6, cfg.bandwidth_hz);
    let res = run_sweep(&cfg, &qos, &spec).map_err(|e| DemoError::Model(e.to_string()))?;
    let series = Scheme::ALL
        .iter()
        .map(|&s| SweepSeries {
            scheme: s.name(),
            r_sum_mbps: res.series(s).map(|c| mbps(c.r_sum.mean)).collect(),
            outage: res.series(s).map(|c| c.outage_prob).collect(),
        })
        .collect();
    Ok(SweepOutput {
        p_dbm: values,
        series,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(json: &str) -> Result<T, DemoError> {
    serde_json::from_str(json).map_err(|e| DemoError::Input(e.to_string()))
}

fn to_js<T: Serialize>(r: Result<T, DemoError>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| DemoError::Model(e.to_string())))
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = allocate)]
pub fn allocate_js(input: &str) -> Result<String, JsValue> {
    to_js(parse(input).and_then(|i| allocate(&i)))
}

#[wasm_bindgen(js_name = rateSurface)]
pub fn rate_surface_js(input: &str, n: usize) -> Result<Vec<f64>, JsValue> {
    parse(input)
        .and_then(|i| rate_surface(&i, n))
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = powerSweep)]
pub fn power_sweep_js(input: &str) -> Result<String, JsValue> {
    to_js(parse(input).and_then(|i| power_sweep(&i)))
}
