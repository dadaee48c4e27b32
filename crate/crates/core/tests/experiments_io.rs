use cranpool::experiments::{
    aggregate, bandwidth_fractions, emit_plot_data, rate_at_secrecy, read_csv, run_sweep, secrecy_rate, series, write_csv, Aggregate,
    ExperimentConfig, TrialRecord, CSV_HEADER,
};
use cranpool::{BandwidthScheme, CompressionMode, Error, NetworkConfig};
use std::sync::OnceLock;

fn record(gamma: f64, rate: f64, ws: f64) -> TrialRecord {
    TrialRecord {
        scenario_id: "s0-g0-t0".into(),
        seed: 3,
        snr_db: 10.0,
        gamma_privacy_bps: gamma,
        scheme: BandwidthScheme::Optimized,
        mode: CompressionMode::Multivariate,
        rate_per_ue_bps: rate,
        secrecy_rate_per_ue_bps: secrecy_rate(rate, gamma),
        w_p1_hz: (10e6 - ws) / 2.0,
        w_p2_hz: (10e6 - ws) / 2.0,
        w_s_hz: ws,
        iterations: 12,
        status: "converged".into(),
    }
}

/// One small sweep shared by the tests that need solved records.
fn small_sweep() -> &'static Vec<TrialRecord> {
    static RECORDS: OnceLock<Vec<TrialRecord>> = OnceLock::new();
    RECORDS.get_or_init(|| {
        let cfg = ExperimentConfig::parse("snr_db = [10.0]\nprivacy_threshold = [10e6]\ntrials = 1\nrestarts = 1\nworkers = 1\n").unwrap();
        let res = run_sweep(&cfg).unwrap();
        assert_eq!(res.exit_code(), 0);
        res.records
    })
}

#[test]
fn secrecy_rate_is_the_positive_part() {
    assert_eq!(secrecy_rate(12e6, 10e6), 2e6);
    assert_eq!(secrecy_rate(8e6, 10e6), 0.0);
    assert_eq!(secrecy_rate(10e6, 10e6), 0.0);
}

#[test]
fn csv_header_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    write_csv(&[], &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{CSV_HEADER}\n"));
    assert!(read_csv(&path).unwrap().is_empty());

    write_csv(&[record(5e6, 7e6, 2e6)], &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert!(text.lines().nth(1).unwrap().contains(",optimized,multivariate,"));
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let mut rows = vec![record(5e6, 7.123456789e6, 2.5e6), record(10e6, 1.0 / 3.0, 0.0)];
    rows[1].scheme = BandwidthScheme::EqualSplit;
    rows[1].mode = CompressionMode::PointToPoint;
    rows[1].status = "error".into();
    write_csv(&rows, &path).unwrap();
    assert_eq!(read_csv(&path).unwrap(), rows);
}

#[test]
fn foreign_csv_header_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    std::fs::write(&path, "a,b\n1,2\n").unwrap();
    assert!(matches!(read_csv(&path), Err(Error::Config(_))));
}

#[test]
fn defaults_are_the_reference_scenario() {
    let cfg = ExperimentConfig::default();
    assert_eq!((cfg.backhaul_capacity, cfg.fronthaul_capacity, cfg.total_bandwidth), (100e6, 50e6, 10e6));
    for snr in [10.0, 20.0] {
        assert_eq!(cfg.network(snr, 7.5e6), NetworkConfig::reference(snr, 7.5e6));
    }
    let parsed = ExperimentConfig::parse("snr_db = [10.0, 20.0]\nprivacy_threshold = [5e6]\n").unwrap();
    assert_eq!(parsed.network(20.0, 5e6), NetworkConfig::reference(20.0, 5e6));
    assert_eq!(parsed.sweep.trials, 20);
}

#[test]
fn config_errors_name_the_key() {
    let msg = |text: &str| match ExperimentConfig::parse(text) {
        Err(Error::Config(m)) => m,
        other => panic!("expected a config error, got {other:?}"),
    };
    assert!(msg("privacy_threshold = [5e6]\n").contains("snr_db"));
    assert!(msg("snr_db = [10.0]\n").contains("privacy_threshold"));
    assert!(msg("snr_db = [10.0]\nprivacy_threshold = [5e6]\nsnr = 3\n").contains("snr"));
    assert!(msg("snr_db = [10.0]\nprivacy_threshold = [5e6]\ntrials = 0\n").contains("trials"));
    assert!(msg("snr_db = [10.0]\nprivacy_threshold = [-1.0]\n").contains("privacy_threshold"));
    assert!(msg("snr_db = [10.0]\nprivacy_threshold = [5e6]\nschemes = [\"best\"]\n").contains("best"));
}

#[test]
fn aggregating_identical_records_returns_the_record() {
    let r = record(5e6, 7e6, 2e6);
    let aggs = aggregate(&[r.clone(), r.clone(), r.clone()]);
    assert_eq!(aggs.len(), 1);
    let a = &aggs[0];
    assert_eq!((a.trials, a.failures), (3, 0));
    assert_eq!(a.mean_rate_per_ue_bps, r.rate_per_ue_bps);
    assert_eq!(a.mean_secrecy_rate_per_ue_bps, r.secrecy_rate_per_ue_bps);
    // a mean of three equal summands may round in the last place
    let f = bandwidth_fractions(&r);
    for (got, want) in [(a.mean_private_fraction_1, f[0]), (a.mean_private_fraction_2, f[1]), (a.mean_shared_fraction, f[2])] {
        assert!((got - want).abs() <= 4.0 * f64::EPSILON * want);
    }
    assert!((f[2] - 0.2).abs() < 1e-15 && (f[0] - 0.4).abs() < 1e-15);
}

#[test]
fn failed_records_are_excluded_from_means() {
    let mut bad = record(5e6, 0.0, 0.0);
    bad.status = "error".into();
    let aggs = aggregate(&[record(5e6, 7e6, 2e6), bad]);
    assert_eq!((aggs[0].trials, aggs[0].failures), (2, 1));
    assert_eq!(aggs[0].mean_rate_per_ue_bps, 7e6);
}

fn agg(gamma: f64, rate: f64) -> Aggregate {
    aggregate(&[record(gamma, rate, 1e6)]).remove(0)
}

#[test]
fn secrecy_interpolation() {
    // secrecy 0, 1, 3 Mbit/s at thresholds 10, 11, 12 Mbit/s
    let pts = [agg(10e6, 9e6), agg(11e6, 12e6), agg(12e6, 15e6)];
    let s: Vec<&Aggregate> = pts.iter().collect();
    assert_eq!(rate_at_secrecy(&s, 2e6), Some(13.5e6));
    assert_eq!(rate_at_secrecy(&s, 1e6), Some(12e6));
    assert_eq!(rate_at_secrecy(&s, 5e6), None);
}

#[test]
fn one_cell_sweep_has_one_record_per_scheme_and_mode() {
    let recs = small_sweep();
    assert_eq!(recs.len(), 3 * 2);
    assert!(recs.iter().all(|r| !r.is_error() && r.scenario_id == "s0-g0-t0" && r.seed == 0));
    for r in recs {
        assert_eq!(r.secrecy_rate_per_ue_bps, secrecy_rate(r.rate_per_ue_bps, r.gamma_privacy_bps));
    }
}

#[test]
fn bandwidth_splits_follow_the_scheme() {
    let w = 10e6;
    for r in small_sweep() {
        let total = r.w_p1_hz + r.w_p2_hz + r.w_s_hz;
        assert!((total - w).abs() <= 1e-6 * w, "{r:?}");
        match r.scheme {
            BandwidthScheme::EqualSplit => {
                for b in [r.w_p1_hz, r.w_p2_hz, r.w_s_hz] {
                    assert!((b - w / 3.0).abs() <= 1e-9 * w, "{r:?}");
                }
            }
            BandwidthScheme::NoPooling => {
                assert_eq!(r.w_s_hz, 0.0);
                assert!((r.w_p1_hz - w / 2.0).abs() <= 1e-9 * w && (r.w_p2_hz - w / 2.0).abs() <= 1e-9 * w);
            }
            BandwidthScheme::Optimized => assert!(r.w_s_hz >= 0.0 && r.w_p1_hz >= 0.0 && r.w_p2_hz >= 0.0),
        }
    }
}

#[test]
fn optimized_split_is_never_worse_than_equal() {
    let recs = small_sweep();
    for mode in [CompressionMode::PointToPoint, CompressionMode::Multivariate] {
        let rate = |s| recs.iter().find(|r| r.scheme == s && r.mode == mode).unwrap().rate_per_ue_bps;
        assert!(rate(BandwidthScheme::Optimized) >= rate(BandwidthScheme::EqualSplit) - 1.0);
    }
}

#[test]
fn plot_series_are_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let aggs = aggregate(small_sweep());
    let paths = emit_plot_data(&aggs, dir.path()).unwrap();
    assert_eq!(paths.len(), 6);
    for a in &aggs {
        assert!((0.0..=1.0).contains(&a.mean_shared_fraction));
        let sum = a.mean_private_fraction_1 + a.mean_private_fraction_2 + a.mean_shared_fraction;
        assert!((sum - 1.0).abs() < 1e-9);
        assert_eq!(series(&aggs, 10.0, a.scheme, a.mode).len(), 1);
    }
    for p in paths {
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("gamma_privacy_bps,"));
    }
}
