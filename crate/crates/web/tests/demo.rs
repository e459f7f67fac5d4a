use noma_web::{allocate, power_sweep, rate_surface, DemoError, LinkInput, SweepInput, MAX_TRIALS};

fn link() -> LinkInput {
    serde_json::from_str(r#"{"h1_db": 24.45, "h2_db": 16.4, "h3_db": 77, "hsi_db": 29.1, "p_dbm": 25, "r_min_mbps": 5}"#)
        .unwrap()
}

#[test]
fn allocation_beats_both_baselines_on_a_good_channel() {
    let a = allocate(&link()).unwrap();
    assert!(a.optimal && !a.swapped && a.violated.is_empty());
    let sum: Vec<f64> = a.schemes.iter().map(|s| s.r_sum_mbps).collect();
    assert_eq!(a.schemes[0].scheme, "proposed");
    assert!(sum[0] > sum[1] && sum[0] > sum[2], "{sum:?}");
    assert!((0.0..=0.5).contains(&a.alpha1) && (0.0..=0.5).contains(&a.alpha2));
}

#[test]
fn swapped_labels_give_the_same_answer() {
    let mut l = link();
    std::mem::swap(&mut l.h1_db, &mut l.h2_db);
    let (a, b) = (allocate(&l).unwrap(), allocate(&link()).unwrap());
    assert!(a.swapped);
    assert_eq!(a.alpha1, b.alpha1);
    assert_eq!(a.schemes[0].r_sum_mbps, b.schemes[0].r_sum_mbps);
}

#[test]
fn weak_uplink_reports_violations() {
    let mut l = link();
    l.h2_db = 2.0;
    l.p_dbm = 0.0;
    let a = allocate(&l).unwrap();
    assert!(!a.optimal);
    assert!(!a.violated.is_empty());
}

#[test]
fn surface_peak_matches_the_allocator() {
    let n = 201;
    let s = rate_surface(&link(), n).unwrap();
    assert_eq!(s.len(), n * n);
    let best = s
        .iter()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let alloc = allocate(&link()).unwrap().schemes[0].r_sum_mbps;
    assert!(alloc >= best - 1e-9, "{alloc} < {best}");
    assert!(matches!(rate_surface(&link(), 1), Err(DemoError::Input(_))));
}

#[test]
fn sweep_is_seeded_and_ordered() {
    let input = SweepInput {
        trials: 300,
        seed: 4,
        r_min_mbps: 5.0,
        p_from_dbm: 0.0,
        p_to_dbm: 25.0,
        p_step_db: 5.0,
    };
    let a = power_sweep(&input).unwrap();
    let b = power_sweep(&input).unwrap();
    assert_eq!(a.p_dbm, vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0]);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let last = |k: usize| *a.series[k].r_sum_mbps.last().unwrap();
    assert!(last(0) > last(1) && last(0) > last(2));

    let too_many = SweepInput {
        trials: MAX_TRIALS + 1,
        ..input
    };
    assert!(power_sweep(&too_many).is_err());
}
