use relaycast_harness::config::{ExperimentConfig, Method, Profile, SeedRange, Seeds, SweepAxis};
use relaycast_harness::sweep::{sweep, write_outputs};

fn tiny() -> ExperimentConfig {
    let mut c = ExperimentConfig::profile(Profile::Smoke);
    c.scenario.relay_count = 3;
    c.scenario.destination_count = 3;
    c.seeds = Seeds::Range(SeedRange { start: 0, count: 2 });
    c.sweep.axis = SweepAxis::TotalPower;
    c.sweep.values = vec![20.0, 30.0];
    c.cccp.n_starts = 2;
    c.sdr.grid_size = 12;
    c.sdr.n_candidates = 20;
    c
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = tiny();
    let a = sweep(&cfg, Some(1)).unwrap();
    let b = sweep(&cfg, Some(2)).unwrap();
    assert_eq!(a.results_csv(false), b.results_csv(false));
    assert_eq!(a.traces_csv(), b.traces_csv());
}

#[test]
fn rows_follow_sweep_then_seed_then_method_order() {
    let cfg = tiny();
    let out = sweep(&cfg, None).unwrap();
    assert!(out.failures.is_empty());
    let keys: Vec<(f64, u64)> = out.records().map(|r| (r.sweep_value, r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    assert_eq!(keys, sorted);
    assert_eq!(out.records().count(), 2 * 2 * Method::ALL.len());
    for r in out.records() {
        assert!(r.min_snr_db.is_finite(), "{r:?}");
        assert!(!r.status.starts_with("error"), "{r:?}");
    }
}

#[test]
fn methods_respect_the_bound_and_the_rank_order() {
    let out = sweep(&tiny(), None).unwrap();
    for cell in &out.cells {
        let snr = |m| cell.record(m).unwrap().min_snr_db;
        let ub = snr(Method::Sdr2dUb);
        for m in [Method::R2Cccp, Method::R1Cccp, Method::R2Sdr2d, Method::R1Sdr2d] {
            assert!(snr(m) <= ub + 0.05, "{m} above the bound: {} vs {ub}", snr(m));
        }
        // Both CCCP runs stop on 1% relative progress.
        assert!(snr(Method::R2Cccp) >= snr(Method::R1Cccp) - 0.05);
    }
}

#[test]
fn empty_sweep_list_gives_a_header_only_table() {
    let mut cfg = tiny();
    cfg.sweep.values.clear();
    let out = sweep(&cfg, None).unwrap();
    assert_eq!(out.results_csv(true).lines().count(), 1);
    assert_eq!(out.traces_csv().lines().count(), 1);
}

#[test]
fn output_directory_holds_tables_config_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    cfg.methods = vec![Method::R2Cccp, Method::Dsd];
    let out = sweep(&cfg, None).unwrap();
    write_outputs(&cfg, &out, dir.path()).unwrap();
    let reloaded = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(reloaded, cfg);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], cfg.hash());
    assert_eq!(manifest["records"], 8);
    let results = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 9);
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let mut cfg = tiny();
    cfg.sweep.values = vec![-3.0];
    cfg.sweep.axis = SweepAxis::Destinations;
    let err = sweep(&cfg, None).err().expect("negative destination count").to_string();
    assert!(err.contains("sweep"), "{err}");
}

#[test]
fn smoke_profile_finishes_with_ordered_methods() {
    let clock = std::time::Instant::now();
    let out = sweep(&ExperimentConfig::profile(Profile::Smoke), None).unwrap();
    assert!(clock.elapsed().as_secs() < 300, "smoke run took {:?}", clock.elapsed());
    assert_eq!(out.cells.len(), 6);
    for cell in &out.cells {
        let snr = |m| cell.record(m).unwrap().min_snr_db;
        assert!(snr(Method::Sdr2dUb) + 0.05 >= snr(Method::R2Cccp), "seed {}", cell.instance.seed);
        assert!(snr(Method::R2Cccp) + 0.05 >= snr(Method::R1Cccp), "seed {}", cell.instance.seed);
    }
}
