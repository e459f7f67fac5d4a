//! Run configuration: a flat `key = value` file with `#` comments.
//!
//! Values use TOML scalar and array syntax, so the file is parsed with the
//! `toml` crate; keys are then checked by hand so that a missing or unknown
//! key is reported by name.

use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;
use toml::{Table, Value};

use crate::baselines::Scheme;
use crate::oracle::GridSpec;
use crate::scenario::{ScenarioConfig, ScenarioError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: expected {expected}")]
    WrongType { key: String, expected: &'static str },
    #[error("key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl From<ScenarioError> for ConfigError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::InvalidConfig { key, reason } => ConfigError::Invalid {
                key: key.to_string(),
                reason,
            },
            other => ConfigError::Invalid {
                key: "scenario".into(),
                reason: other.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    /// Minimum rates of files A, B, C, D in Mbit/s.
    pub r_min_mbps: [f64; 4],
    pub p_ue_sweep_dbm: Vec<f64>,
    pub r_min_sweep_mbps: Vec<f64>,
    pub trials: u64,
    pub seed: Option<u64>,
    pub schemes: Vec<Scheme>,
    pub grid: GridSpec,
    pub validation_realizations: u64,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            r_min_mbps: [5.0; 4],
            p_ue_sweep_dbm: (0..=25).map(f64::from).collect(),
            r_min_sweep_mbps: (1..=10).map(f64::from).collect(),
            trials: 10_000,
            seed: None,
            schemes: Scheme::ALL.to_vec(),
            grid: GridSpec::default(),
            validation_realizations: 1000,
            output_dir: PathBuf::from("out"),
            emit_plots: false,
        }
    }
}

const REQUIRED: [&str; 11] = [
    "cell_radius_m",
    "max_d2d_separation_m",
    "carrier_frequency_hz",
    "bandwidth_hz",
    "noise_psd_dbm_hz",
    "path_loss_exponent",
    "shadowing_sigma_db",
    "antenna_separation_m",
    "si_cancellation_db",
    "p_ue_max_dbm",
    "r_min_mbps",
];

const OPTIONAL: [&str; 18] = [
    "min_bs_distance_m",
    "path_loss_ref_m",
    "rician_k_d2d_db",
    "rician_k_si_db",
    "r_min_a_mbps",
    "r_min_b_mbps",
    "r_min_c_mbps",
    "r_min_d_mbps",
    "p_ue_sweep_dbm",
    "r_min_sweep_mbps",
    "trials",
    "seed",
    "schemes",
    "grid_resolution",
    "grid_refine_rounds",
    "validation_realizations",
    "output_dir",
    "emit_plots",
];

struct Reader {
    table: Table,
}

impl Reader {
    fn number(v: &Value) -> Option<f64> {
        match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn wrong(key: &str, expected: &'static str) -> ConfigError {
        ConfigError::WrongType {
            key: key.to_string(),
            expected,
        }
    }

    fn f64_req(&self, key: &'static str) -> Result<f64, ConfigError> {
        let v = self.table.get(key).ok_or(ConfigError::MissingKey(key))?;
        Self::number(v).ok_or_else(|| Self::wrong(key, "a number"))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.table.get(key).map_or(Ok(default), |v| {
            Self::number(v).ok_or_else(|| Self::wrong(key, "a number"))
        })
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.table.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(Value::String(s)) => s
                .parse()
                .map_err(|_| Self::wrong(key, "a non-negative integer")),
            Some(_) => Err(Self::wrong(key, "a non-negative integer")),
        }
    }

    fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.table.get(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| Self::number(v).ok_or_else(|| Self::wrong(key, "an array of numbers")))
                .collect(),
            Some(_) => Err(Self::wrong(key, "an array of numbers")),
        }
    }
}

fn strictly_increasing(key: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.is_empty() || v.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ConfigError::Invalid {
            key: key.into(),
            reason: "must be a non-empty, strictly increasing list".into(),
        });
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        for key in table.keys() {
            if !REQUIRED.contains(&key.as_str()) && !OPTIONAL.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }
        for key in REQUIRED {
            if !table.contains_key(key) {
                return Err(ConfigError::MissingKey(key));
            }
        }
        let r = Reader { table };
        let d = RunConfig::default();
        let ds = &d.scenario;

        let scenario = ScenarioConfig {
            cell_radius_m: r.f64_req("cell_radius_m")?,
            max_d2d_separation_m: r.f64_req("max_d2d_separation_m")?,
            min_bs_distance_m: r.f64_or("min_bs_distance_m", ds.min_bs_distance_m)?,
            carrier_frequency_hz: r.f64_req("carrier_frequency_hz")?,
            bandwidth_hz: r.f64_req("bandwidth_hz")?,
            noise_psd_dbm_hz: r.f64_req("noise_psd_dbm_hz")?,
            path_loss_exponent: r.f64_req("path_loss_exponent")?,
            path_loss_ref_m: r.f64_or("path_loss_ref_m", ds.path_loss_ref_m)?,
            shadowing_sigma_db: r.f64_req("shadowing_sigma_db")?,
            antenna_separation_m: r.f64_req("antenna_separation_m")?,
            si_cancellation_db: r.f64_req("si_cancellation_db")?,
            rician_k_d2d_db: r.f64_or("rician_k_d2d_db", ds.rician_k_d2d_db)?,
            rician_k_si_db: r.f64_or("rician_k_si_db", ds.rician_k_si_db)?,
            p_ue_max_dbm: r.f64_req("p_ue_max_dbm")?,
        };
        scenario.validate()?;

        let base = r.f64_req("r_min_mbps")?;
        let mut r_min_mbps = [base; 4];
        for (slot, key) in r_min_mbps.iter_mut().zip([
            "r_min_a_mbps",
            "r_min_b_mbps",
            "r_min_c_mbps",
            "r_min_d_mbps",
        ]) {
            *slot = r.f64_or(key, base)?;
        }
        for (v, key) in r_min_mbps.iter().zip([
            "r_min_a_mbps",
            "r_min_b_mbps",
            "r_min_c_mbps",
            "r_min_d_mbps",
        ]) {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(ConfigError::Invalid {
                    key: key.into(),
                    reason: "must be a finite rate >= 0".into(),
                });
            }
        }

        let p_ue_sweep_dbm = r.list_or("p_ue_sweep_dbm", &d.p_ue_sweep_dbm)?;
        strictly_increasing("p_ue_sweep_dbm", &p_ue_sweep_dbm)?;
        let r_min_sweep_mbps = r.list_or("r_min_sweep_mbps", &d.r_min_sweep_mbps)?;
        strictly_increasing("r_min_sweep_mbps", &r_min_sweep_mbps)?;
        if r_min_sweep_mbps.iter().any(|v| *v < 0.0) {
            return Err(ConfigError::Invalid {
                key: "r_min_sweep_mbps".into(),
                reason: "rates must be >= 0".into(),
            });
        }

        let trials = r.u64_or("trials", d.trials)?;
        if trials == 0 {
            return Err(ConfigError::Invalid {
                key: "trials".into(),
                reason: "must be at least 1".into(),
            });
        }
        let seed = match r.table.get("seed") {
            None => None,
            Some(_) => Some(r.u64_or("seed", 0)?),
        };

        let schemes = match r.table.get("schemes") {
            None => d.schemes.clone(),
            Some(Value::Array(items)) => {
                let mut out = Vec::new();
                for v in items {
                    let s = v.as_str().and_then(Scheme::from_name).ok_or_else(|| {
                        Reader::wrong(
                            "schemes",
                            "a list drawn from \"proposed\", \"phased\", \"slotted\"",
                        )
                    })?;
                    if !out.contains(&s) {
                        out.push(s);
                    }
                }
                if out.is_empty() {
                    return Err(ConfigError::Invalid {
                        key: "schemes".into(),
                        reason: "must name at least one scheme".into(),
                    });
                }
                out.sort();
                out
            }
            Some(_) => return Err(Reader::wrong("schemes", "an array of strings")),
        };

        let resolution = r.f64_or("grid_resolution", d.grid.resolution)?;
        let rounds = r.u64_or("grid_refine_rounds", u64::from(d.grid.refine_rounds))?;
        let grid =
            GridSpec::new(resolution, u32::try_from(rounds).unwrap_or(u32::MAX)).map_err(|e| {
                ConfigError::Invalid {
                    key: "grid_resolution".into(),
                    reason: e.to_string(),
                }
            })?;

        let validation_realizations =
            r.u64_or("validation_realizations", d.validation_realizations)?;
        let output_dir = match r.table.get("output_dir") {
            None => d.output_dir.clone(),
            Some(Value::String(s)) => PathBuf::from(s),
            Some(_) => return Err(Reader::wrong("output_dir", "a string")),
        };
        let emit_plots = match r.table.get("emit_plots") {
            None => d.emit_plots,
            Some(Value::Boolean(b)) => *b,
            Some(_) => return Err(Reader::wrong("emit_plots", "true or false")),
        };

        Ok(Self {
            scenario,
            r_min_mbps,
            p_ue_sweep_dbm,
            r_min_sweep_mbps,
            trials,
            seed,
            schemes,
            grid,
            validation_realizations,
            output_dir,
            emit_plots,
        })
    }

    /// Writes every key explicitly; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let s = &self.scenario;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let num = |x: f64| format!("{x:?}");
        let list = |v: &[f64]| {
            format!(
                "[{}]",
                v.iter()
                    .map(|x| format!("{x:?}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        };

        kv("cell_radius_m", num(s.cell_radius_m));
        kv("max_d2d_separation_m", num(s.max_d2d_separation_m));
        kv("min_bs_distance_m", num(s.min_bs_distance_m));
        kv("carrier_frequency_hz", num(s.carrier_frequency_hz));
        kv("bandwidth_hz", num(s.bandwidth_hz));
        kv("noise_psd_dbm_hz", num(s.noise_psd_dbm_hz));
        kv("path_loss_exponent", num(s.path_loss_exponent));
        kv("path_loss_ref_m", num(s.path_loss_ref_m));
        kv("shadowing_sigma_db", num(s.shadowing_sigma_db));
        kv("antenna_separation_m", num(s.antenna_separation_m));
        kv("si_cancellation_db", num(s.si_cancellation_db));
        kv("rician_k_d2d_db", num(s.rician_k_d2d_db));
        kv("rician_k_si_db", num(s.rician_k_si_db));
        kv("p_ue_max_dbm", num(s.p_ue_max_dbm));
        let base = self.r_min_mbps[0];
        kv("r_min_mbps", num(base));
        for (v, k) in
            self.r_min_mbps[1..]
                .iter()
                .zip(["r_min_b_mbps", "r_min_c_mbps", "r_min_d_mbps"])
        {
            if v.to_bits() != base.to_bits() {
                kv(k, num(*v));
            }
        }
        kv("p_ue_sweep_dbm", list(&self.p_ue_sweep_dbm));
        kv("r_min_sweep_mbps", list(&self.r_min_sweep_mbps));
        kv("trials", self.trials.to_string());
        if let Some(seed) = self.seed {
            let v = if i64::try_from(seed).is_ok() {
                seed.to_string()
            } else {
                format!("\"{seed}\"")
            };
            kv("seed", v);
        }
        kv(
            "schemes",
            format!(
                "[{}]",
                self.schemes
                    .iter()
                    .map(|s| format!("\"{s}\""))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        );
        kv("grid_resolution", num(self.grid.resolution));
        kv("grid_refine_rounds", self.grid.refine_rounds.to_string());
        kv(
            "validation_realizations",
            self.validation_realizations.to_string(),
        );
        kv(
            "output_dir",
            Value::String(self.output_dir.to_string_lossy().into_owned()).to_string(),
        );
        kv("emit_plots", self.emit_plots.to_string());
        out
    }
}
