use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const DEFAULTS: &str = "\
cell_radius_m = 250
max_d2d_separation_m = 20
carrier_frequency_hz = 2e9
bandwidth_hz = 5e6
noise_psd_dbm_hz = -174
path_loss_exponent = 3
shadowing_sigma_db = 8
antenna_separation_m = 0.3
si_cancellation_db = 80
p_ue_max_dbm = 25
r_min_mbps = 5
";

fn noma() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_noma-sim"));
    c.env_remove("NOMA_SIM_SEED").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    noma()
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, text: &str) -> String {
    let p = dir.path().join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn sweep_power_is_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let mut csvs = Vec::new();
    for (threads, tag) in [("1", "a"), ("3", "b"), ("1", "c")] {
        let out = dir.path().join(tag);
        let o = run(
            &[
                "sweep-power",
                "--trials",
                "300",
                "--seed",
                "5",
                "--threads",
                threads,
            ],
            &out,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        csvs.push(fs::read(out.join("sumrate_vs_power.csv")).unwrap());
    }
    assert!(csvs.windows(2).all(|w| w[0] == w[1]));
    let text = String::from_utf8(csvs.pop().unwrap()).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("scheme,p_ue_dbm,"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..2], &["proposed", "0"]);
}

#[test]
fn sweep_rate_writes_the_outage_table() {
    let dir = TempDir::new().unwrap();
    let o = run(&["sweep-rate", "--trials", "200"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("outage_vs_rmin.csv")).unwrap();
    // header plus 3 schemes × 10 rate targets
    assert_eq!(csv.lines().count(), 31);
    assert!(csv.starts_with("scheme,r_min_mbps,outage_prob,trials\n"));
}

#[test]
fn missing_bandwidth_is_a_config_error_naming_the_key() {
    let dir = TempDir::new().unwrap();
    let text: String = DEFAULTS
        .lines()
        .filter(|l| !l.starts_with("bandwidth_hz"))
        .map(|l| format!("{l}\n"))
        .collect();
    let cfg = write_config(&dir, &text);
    let o = run(&["sweep-power", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bandwidth_hz"), "{}", stderr(&o));
}

#[test]
fn full_config_file_is_accepted() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        &format!("{DEFAULTS}trials = 50\np_ue_sweep_dbm = [0, 25]\n"),
    );
    let o = run(&["sweep-power", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sumrate_vs_power.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    assert!(csv.lines().nth(1).unwrap().ends_with(",50"));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!("{DEFAULTS}bandwith_hz = 5e6\n"));
    let o = run(&["inspect", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bandwith_hz"));
}

#[test]
fn validate_with_zero_realizations_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = run(&["validate", "-n", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_passes_on_a_small_batch() {
    let dir = TempDir::new().unwrap();
    let o = run(&["validate", "-n", "20", "--grid-res", "0.005"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("validation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn corrupted_stationary_coefficient_fails_validation_and_logs_discards() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &[
            "validate",
            "-n",
            "20",
            "--grid-res",
            "0.005",
            "--corrupt-xi3",
            "0.5",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("derivative gate discarded"), "{err}");
    assert!(err.contains("--trial"), "{err}");
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(&["sweep-rate", "--trials", "10"], &blocker.join("sub"));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn seed_falls_back_to_the_environment() {
    let seed_line = |o: &Output| {
        stdout(o)
            .lines()
            .find(|l| l.starts_with("seed = "))
            .map(str::to_owned)
    };
    let dir = TempDir::new().unwrap();

    let o = noma()
        .args(["inspect"])
        .env("NOMA_SIM_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(seed_line(&o).as_deref(), Some("seed = 77"));

    let o = noma()
        .args(["inspect", "--seed", "3"])
        .env("NOMA_SIM_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(seed_line(&o).as_deref(), Some("seed = 3"));

    let cfg = write_config(&dir, &format!("{DEFAULTS}seed = 12\n"));
    let o = noma()
        .args(["inspect", "--config", &cfg])
        .env("NOMA_SIM_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(seed_line(&o).as_deref(), Some("seed = 12"));

    let o = noma().args(["inspect"]).output().unwrap();
    assert_eq!(seed_line(&o).as_deref(), Some("seed = 1"));

    let o = noma()
        .args(["inspect"])
        .env("NOMA_SIM_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn inspect_labels_violated_constraints_on_an_outage_draw() {
    let o = noma()
        .args(["inspect", "--seed", "1", "--trial", "21"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("allocator: Outage"), "{text}");
    assert!(text.contains("[VIOLATED] qos_bs_b"), "{text}");
}

#[test]
fn plots_are_written_when_enabled() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!("{DEFAULTS}emit_plots = true\ntrials = 20\n"));
    let o = run(&["sweep-power", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["sumrate_vs_power.svg", "rates_vs_power.svg"] {
        let svg = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(svg.starts_with("<svg"));
    }
}
