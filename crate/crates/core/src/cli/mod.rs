//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration error,
//! 3 I/O error. Argument errors from clap also exit with 2.

pub mod config;
pub mod output;
pub mod plot;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::allocator::{
    alpha2_cache_floor, alpha2_sic_limit, alpha2_uplink_cap, discontinuity_alpha2, solve_casewise,
    solve_with, stationary_alpha2, AllocationOutcome, AllocatorOptions,
};
use crate::baselines::{phased, slotted, Scheme};
use crate::linkmodel::{alpha1_bounds, QosSpec};
use crate::montecarlo::{outage_curve, run_sweep, SweepResult, SweepSpec, SweepVariable};
use crate::oracle::{grid_search, GridSpec};
use crate::scenario::{draw_realization, trial_rng};
use crate::validation::{validate, ValidationSetup, BOUNDARY_SHARE_MAX};

pub use config::{ConfigError, RunConfig};

pub const SEED_ENV: &str = "NOMA_SIM_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "noma-sim",
    version,
    about = "Uplink NOMA with full-duplex cache-enabled D2D: allocation, oracle checks and Monte Carlo sweeps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat `key = value` config file; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed; falls back to the config, then $NOMA_SIM_SEED, then 1.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo trials (overrides `trials`).
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Oracle lattice step (overrides `grid_resolution`).
    #[arg(long = "grid-res", global = true)]
    pub grid_res: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean rates and outage against UE transmit power.
    SweepPower,
    /// Outage against the common minimum rate at maximum power.
    SweepRate,
    /// Full report for one channel realization.
    Inspect {
        /// Trial index within the seed's stream.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Allocator against the grid oracle on random realizations.
    Validate {
        /// Number of realizations (overrides `validation_realizations`).
        #[arg(short = 'n', long = "count")]
        count: Option<u64>,
        /// Scales the last stationary-point coefficient, for testing the gate.
        #[arg(long = "corrupt-xi3", hide = true)]
        corrupt_xi3: Option<f64>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config(ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    })
}

/// Flag, then config, then environment, then the built-in default.
pub fn resolve_seed(
    flag: Option<u64>,
    config: Option<u64>,
    env: Option<&str>,
) -> Result<u64, CliError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| invalid(SEED_ENV, format!("`{v}` is not an unsigned 64-bit integer"))),
        None => Ok(DEFAULT_SEED),
    }
}

struct Context {
    cfg: RunConfig,
    seed: u64,
    out: PathBuf,
}

impl Context {
    fn qos(&self) -> QosSpec {
        QosSpec::new(
            self.cfg.r_min_mbps.map(|r| r * 1e6),
            self.cfg.scenario.bandwidth_hz,
        )
    }

    fn write(&self, name: &str, body: &str) -> Result<(), CliError> {
        fs::create_dir_all(&self.out).map_err(|source| CliError::Io {
            path: self.out.clone(),
            source,
        })?;
        let path = self.out.join(name);
        fs::write(&path, body).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    fn spec(&self, variable: SweepVariable, values: &[f64]) -> SweepSpec {
        SweepSpec {
            variable,
            values: values.to_vec(),
            trials: self.cfg.trials,
            master_seed: self.seed,
            schemes: self.cfg.schemes.clone(),
        }
    }
}

fn load(cli: &Cli) -> Result<Context, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(t) = cli.trials {
        if t == 0 {
            return Err(invalid("--trials", "must be at least 1"));
        }
        cfg.trials = t;
    }
    if let Some(res) = cli.grid_res {
        cfg.grid = GridSpec::new(res, cfg.grid.refine_rounds)
            .map_err(|e| invalid("--grid-res", e.to_string()))?;
    }
    let env = std::env::var(SEED_ENV).ok();
    let seed = resolve_seed(cli.seed, cfg.seed, env.as_deref())?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok(Context { cfg, seed, out })
}

type Column = (&'static str, fn(&crate::montecarlo::SweepCell) -> f64);

fn sweep_plot(r: &SweepResult, title: &str, y_label: &str, pick: &[Column]) -> String {
    let mut series = Vec::new();
    let mut schemes: Vec<Scheme> = r.cells.iter().map(|c| c.scheme).collect();
    schemes.dedup();
    for s in schemes {
        for (suffix, f) in pick {
            series.push(plot::Series {
                name: if suffix.is_empty() {
                    s.to_string()
                } else {
                    format!("{s} {suffix}")
                },
                points: r.series(s).map(|c| (c.value, f(c))).collect(),
            });
        }
    }
    plot::line_chart(title, r.variable.column(), y_label, &series)
}

fn cmd_sweep_power(ctx: &Context) -> Result<(), CliError> {
    let spec = ctx.spec(SweepVariable::PUeDbm, &ctx.cfg.p_ue_sweep_dbm);
    let r = run_sweep(&ctx.cfg.scenario, &ctx.qos(), &spec)
        .map_err(|e| invalid("sweep", e.to_string()))?;
    ctx.write("sumrate_vs_power.csv", &output::sumrate_csv(&r))?;
    ctx.write("rates_vs_power.csv", &output::rates_csv(&r))?;
    if ctx.cfg.emit_plots {
        ctx.write(
            "sumrate_vs_power.svg",
            &sweep_plot(&r, "Mean sum rate", "bit/s", &[("", |c| c.r_sum.mean)]),
        )?;
        ctx.write(
            "rates_vs_power.svg",
            &sweep_plot(
                &r,
                "Mean uplink and D2D rates",
                "bit/s",
                &[("uplink", |c| c.r_ul.mean), ("d2d", |c| c.r_d2d.mean)],
            ),
        )?;
    }
    print!("{}", output::sweep_summary(&r));
    Ok(())
}

fn cmd_sweep_rate(ctx: &Context) -> Result<(), CliError> {
    let spec = ctx.spec(SweepVariable::RMinMbps, &ctx.cfg.r_min_sweep_mbps);
    let r = outage_curve(&ctx.cfg.scenario, ctx.cfg.scenario.bandwidth_hz, &spec)
        .map_err(|e| invalid("sweep", e.to_string()))?;
    ctx.write("outage_vs_rmin.csv", &output::outage_csv(&r))?;
    if ctx.cfg.emit_plots {
        ctx.write(
            "outage_vs_rmin.svg",
            &sweep_plot(
                &r,
                "Outage probability",
                "outage",
                &[("", |c| c.outage_prob)],
            ),
        )?;
    }
    print!("{}", output::sweep_summary(&r));
    Ok(())
}

fn describe_outcome(out: &mut String, label: &str, o: &AllocationOutcome) {
    let _ = writeln!(
        out,
        "{label}: {:?}  alpha1 = {}  alpha2 = {}  R_sum = {} bit/s  case = {}  alpha1 limit = {}",
        o.status,
        o.split.alpha1,
        o.split.alpha2,
        o.rates.r_sum,
        o.alpha2_case.map_or("-", |c| c.label()),
        o.alpha1_branch.map_or("-", |b| b.label()),
    );
}

pub fn inspect_report(
    cfg: &RunConfig,
    seed: u64,
    trial: u64,
    options: &AllocatorOptions,
) -> String {
    let sc = &cfg.scenario;
    let qos = QosSpec::new(cfg.r_min_mbps.map(|r| r * 1e6), sc.bandwidth_hz);
    let p = sc.p_ue_max_w();
    let real = draw_realization(sc, &mut trial_rng(seed, trial));
    let ch = real.channel;
    let mut s = String::new();
    let _ = writeln!(s, "# config\n{}", cfg.serialize());
    let _ = writeln!(s, "# realization\nseed = {seed}\ntrial = {trial}");
    let pl = real.placement;
    let _ = writeln!(
        s,
        "distances: UE1-BS {:.3} m, UE2-BS {:.3} m, UE1-UE2 {:.3} m (labels swapped: {})",
        pl.d1_m, pl.d2_m, pl.d3_m, real.swapped
    );
    let _ = writeln!(
        s,
        "CNR (1/W): h1^2 = {}, h2^2 = {}, h3^2 = {}, hSI^2 = {}",
        ch.h1_sq, ch.h2_sq, ch.h3_sq, ch.hsi_sq
    );
    let _ = writeln!(
        s,
        "P_UE = {} W; SINR targets A..D = {:?}",
        p,
        [qos.gamma_a, qos.gamma_b, qos.gamma_c, qos.gamma_d]
    );

    let _ = writeln!(s, "\n# alpha2 limits");
    let _ = writeln!(
        s,
        "UE1 can decode B up to alpha2 = {}",
        alpha2_sic_limit(&ch, qos.gamma_b, p)
    );
    let _ = writeln!(
        s,
        "file D reaches UE1 from alpha2 = {}",
        alpha2_cache_floor(&ch, qos.gamma_d, p)
    );
    let _ = writeln!(
        s,
        "file B reaches the BS up to alpha2 = {}",
        alpha2_uplink_cap(&ch, qos.gamma_b, p)
    );
    if let Some(d) = discontinuity_alpha2(&ch, qos.gamma_a, p) {
        let _ = writeln!(s, "uplink-tight branch undefined at alpha2 = {d}");
    }
    match stationary_alpha2(&ch, qos.gamma_a, p, options) {
        Ok(sp) => {
            let _ = writeln!(
                s,
                "stationary points on the uplink-tight branch: kept {:?}, discarded {:?}",
                sp.candidates, sp.discarded
            );
        }
        Err(e) => {
            let _ = writeln!(s, "stationary points: {e}");
        }
    }

    let out = solve_with(&ch, &qos, p, options);
    let _ = writeln!(
        s,
        "\n# allocation\nsearch range alpha2 in [{}, {}]",
        out.alpha2_range.lower, out.alpha2_range.upper
    );
    let _ = writeln!(
        s,
        "candidates (alpha2, alpha1, limit, kind, R_sum, feasible):"
    );
    for c in &out.trace.candidates {
        let _ = writeln!(
            s,
            "  {:.9} {:.9} {:<11} {:<11} {:.6e} {}",
            c.split.alpha2,
            c.split.alpha1,
            c.branch.label(),
            c.case.label(),
            c.r_sum,
            c.feasible
        );
    }
    describe_outcome(&mut s, "allocator", &out);
    let b = alpha1_bounds(&ch, out.split.alpha2);
    let _ = writeln!(
        s,
        "decoding-order alpha1 bounds at the chosen alpha2: [{}, {}]",
        b.lower, b.upper
    );
    let _ = writeln!(s, "constraints:");
    for c in &out.report.checks {
        let _ = writeln!(
            s,
            "  [{}] {:<13} margin {:>14.6e}  {}",
            if c.pass { "ok" } else { "VIOLATED" },
            c.constraint.tag(),
            c.margin,
            c.constraint.description()
        );
    }
    let r = &out.rates;
    let _ = writeln!(
        s,
        "rates (bit/s): A@BS {} B@BS {} D@UE1 {} C@UE2 {} A@UE2 {} B@UE1 {}",
        r.r_bs_a, r.r_bs_b, r.r_ue1_d, r.r_ue2_c, r.r_ue2_a, r.r_ue1_b
    );
    describe_outcome(&mut s, "case-wise rule", &solve_casewise(&ch, &qos, p));

    let _ = writeln!(s, "\n# baselines");
    for o in [phased(&ch, &qos, p), slotted(&ch, &qos, p)] {
        let _ = writeln!(
            s,
            "{}: R_UL {} R_D2D {} R_sum {} outage {}",
            o.scheme, o.rates.r_ul, o.rates.r_d2d, o.rates.r_sum, o.outage
        );
    }

    let g = grid_search(&ch, &qos, p, cfg.grid);
    let bound = g.gap_bound(cfg.grid.resolution);
    let _ = writeln!(
        s,
        "\n# oracle (step {}, {} refinement rounds)\nfeasible lattice points: {}\nbest: {:?} R_sum = {} bit/s\ngap bound L*step = {} bit/s",
        cfg.grid.resolution, cfg.grid.refine_rounds, g.feasible_count, g.best_split, g.best_r_sum, bound
    );
    let alloc_r = if out.is_optimal() {
        out.rates.r_sum
    } else {
        0.0
    };
    let agree = match (out.is_optimal(), g.best_split.is_some()) {
        (true, true) => alloc_r >= g.best_r_sum - bound,
        (a, o) => a == o,
    };
    let _ = writeln!(
        s,
        "allocator vs oracle: {}",
        if agree { "agree" } else { "DISAGREE" }
    );
    s
}

fn cmd_inspect(ctx: &Context, trial: u64) -> Result<(), CliError> {
    print!(
        "{}",
        inspect_report(&ctx.cfg, ctx.seed, trial, &AllocatorOptions::default())
    );
    Ok(())
}

fn cmd_validate(
    ctx: &Context,
    count: Option<u64>,
    corrupt_xi3: Option<f64>,
) -> Result<(), CliError> {
    let n = count.unwrap_or(ctx.cfg.validation_realizations);
    if n == 0 {
        return Err(invalid("--count", "must be at least 1"));
    }
    let mut options = AllocatorOptions::default();
    if let Some(k) = corrupt_xi3 {
        log::warn!("test hook: scaling the stationary-point coefficient xi3 by {k}");
        options.xi3_scale = k;
    }
    let setup = ValidationSetup {
        seed: ctx.seed,
        p_ue: ctx.cfg.scenario.p_ue_max_w(),
        qos: ctx.qos(),
        grid: ctx.cfg.grid,
        options,
    };
    let summary = validate(&ctx.cfg.scenario, &setup, n);
    ctx.write("validation.csv", &output::validation_csv(&summary))?;

    let discards = summary.gate_discards();
    let failures: Vec<u64> = summary.failures().map(|c| c.index).collect();
    println!(
        "validated {n} realizations (seed {}): {} failing, boundary share {:.4} (limit {BOUNDARY_SHARE_MAX}), derivative-gate discards {discards}",
        ctx.seed,
        failures.len(),
        summary.boundary_share(),
    );
    if discards > 0 {
        log::error!("derivative gate discarded {discards} stationary candidates");
    }
    if summary.pass() {
        return Ok(());
    }
    let listed: Vec<String> = failures
        .iter()
        .take(20)
        .map(|i| format!("--seed {} --trial {i}", ctx.seed))
        .collect();
    for l in &listed {
        eprintln!("offending realization: {l}");
    }
    Err(CliError::Validation(format!(
        "{} realizations failed, boundary share {:.4}",
        failures.len(),
        summary.boundary_share()
    )))
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let ctx = load(cli)?;
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(invalid("--threads", "must be at least 1"));
        }
        // A second initialisation in the same process is harmless to results.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    match &cli.command {
        Command::SweepPower => cmd_sweep_power(&ctx),
        Command::SweepRate => cmd_sweep_rate(&ctx),
        Command::Inspect { trial } => cmd_inspect(&ctx, *trial),
        Command::Validate { count, corrupt_xi3 } => cmd_validate(&ctx, *count, *corrupt_xi3),
    }
}

pub fn run() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
