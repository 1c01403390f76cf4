use pocsize_core::harness::{
    error_curve, rows_to_csv, run_replications, Aggregate, ReplicationConfig, ReplicationRow, SpecSource,
};
use pocsize_core::Endpoint;

fn config(specs: Vec<SpecSource>, sizes: Vec<u64>, reps: usize, seed: u64) -> ReplicationConfig {
    let mut cfg = ReplicationConfig::new(specs);
    cfg.sizes = sizes;
    cfg.replications = reps;
    cfg.seed = seed;
    cfg.draws = 200;
    cfg
}

fn csv_bytes(rows: &[ReplicationRow]) -> Vec<u8> {
    let mut out = Vec::new();
    rows_to_csv(rows, &mut out).unwrap();
    out
}

#[test]
fn same_seed_gives_identical_csv() {
    let cfg = config(vec![SpecSource::Model1, SpecSource::Random(3)], vec![120, 300], 25, 7);
    let a = run_replications(&cfg).unwrap();
    let b = run_replications(&cfg).unwrap();
    assert_eq!(csv_bytes(&a.rows), csv_bytes(&b.rows));
    let other = run_replications(&config(cfg.specs.clone(), cfg.sizes.clone(), 25, 8)).unwrap();
    assert_ne!(csv_bytes(&a.rows), csv_bytes(&other.rows));
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = config(vec![SpecSource::Model2], vec![200], 40, 3);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_replications(&cfg).unwrap())
    };
    assert_eq!(csv_bytes(&run(1).rows), csv_bytes(&run(4).rows));
}

#[test]
fn aggregates_recompute_from_row_csv() {
    let cfg = config(vec![SpecSource::Model1, SpecSource::Model2], vec![1, 150, 400], 30, 11);
    let report = run_replications(&cfg).unwrap();
    assert_eq!(report.rows.len(), 2 * 3 * 30);
    let bytes = csv_bytes(&report.rows);
    let rows: Vec<ReplicationRow> = csv::Reader::from_reader(bytes.as_slice())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    for (cell, agg) in rows.chunks(cfg.replications).zip(&report.aggregates) {
        let again = Aggregate::from_rows(cell, cfg.tolerance);
        assert_eq!(
            (&again.spec, again.n, again.ok, again.insufficient),
            (&agg.spec, agg.n, agg.ok, agg.insufficient)
        );
        assert_eq!(
            (again.smooth_tags, again.numerical_tags),
            (agg.smooth_tags, agg.numerical_tags)
        );
        let pairs = [
            (again.mean_err_lower, agg.mean_err_lower),
            (again.mean_err_upper, agg.mean_err_upper),
            (again.mean_abs_err_lower, agg.mean_abs_err_lower),
            (again.mean_abs_err_upper, agg.mean_abs_err_upper),
            (again.within_lower, agg.within_lower),
            (again.within_upper, agg.within_upper),
        ];
        for (x, y) in pairs {
            assert!((x - y).abs() <= 1e-12 || (x.is_nan() && y.is_nan()), "{x} vs {y}");
        }
        for (x, y) in [
            (again.smooth_coverage_lower, agg.smooth_coverage_lower),
            (again.coverage_upper, agg.coverage_upper),
        ] {
            match (x, y) {
                (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-12),
                (x, y) => assert_eq!(x, y),
            }
        }
    }
    // The n = 1 cells cannot fill both arms.
    assert!(report.insufficient() >= 2 * 30);
}

#[test]
fn every_interval_is_tagged() {
    let report = run_replications(&config(vec![SpecSource::Model1], vec![100, 500], 40, 2)).unwrap();
    for agg in &report.aggregates {
        assert_eq!(agg.smooth_tags + agg.numerical_tags, 2 * agg.ok);
    }
    for row in &report.rows {
        assert!(row.method_lower.is_some() && row.method_upper.is_some());
    }
}

#[test]
fn error_shrinks_with_sample_size() {
    let mut cfg = config(vec![SpecSource::Model1], vec![120, 481], 1000, 0);
    cfg.intervals = false;
    let report = run_replications(&cfg).unwrap();
    let small = report.aggregate("model1", 120).unwrap();
    let large = report.aggregate("model1", 481).unwrap();
    for e in Endpoint::BOTH {
        assert!(large.mean_abs_err(e) < small.mean_abs_err(e), "{e:?}");
    }
}

#[test]
fn single_size_gives_single_curve_row() {
    let mut cfg = config(vec![SpecSource::Model2], vec![250], 5, 1);
    cfg.intervals = false;
    let report = run_replications(&cfg).unwrap();
    assert_eq!(error_curve(&report, None).len(), 1);
    assert_eq!(error_curve(&report, Some("pooled")).len(), 1);
}
