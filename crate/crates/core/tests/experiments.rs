use std::fs;

use proptest::prelude::*;

use pilotlen::experiments::{
    read_rows, rows_to_string, run_single, run_vary_probability, run_vary_ratio, write_rows, Scenario, SweepKind,
    SweepRow,
};
use pilotlen::{Error, RcspConfig, Threshold};

fn row() -> impl Strategy<Value = SweepRow> {
    let real = prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), Just(0.0), Just(1e-310)];
    let threshold = prop_oneof![Just(Threshold::NegInfinity), (-1e3..1e3f64).prop_map(Threshold::Finite)];
    (real.clone(), any::<u64>(), threshold, real.clone(), real.clone(), real.clone(), real.clone(), real.clone(), real)
        .prop_map(|(sweep_value, n_star, t_star, tau_star, tau_ref, reduction, reduction_fraction, n_hat, t_hat)| {
            SweepRow { sweep_value, n_star, t_star, tau_star, tau_ref, reduction, reduction_fraction, n_hat, t_hat }
        })
}

proptest! {
    #[test]
    fn csv_round_trip_is_byte_identical(rows in prop::collection::vec(row(), 0..8)) {
        let text = rows_to_string(&rows).unwrap();
        let back = read_rows(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &rows);
        prop_assert_eq!(rows_to_string(&back).unwrap(), text);
    }
}

#[test]
fn sweep_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ratio.csv");
    let out = run_vary_ratio(&[1.5, 3.0, 10.0], &RcspConfig::default());
    write_rows(fs::File::create(&path).unwrap(), &out.rows).unwrap();

    let first = fs::read(&path).unwrap();
    let rows = read_rows(first.as_slice()).unwrap();
    assert_eq!(rows, out.rows);
    let mut again = Vec::new();
    write_rows(&mut again, &rows).unwrap();
    assert_eq!(again, first);
    assert!(rows.iter().all(SweepRow::is_consistent));
}

#[test]
fn scenario_file_drives_a_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prob.toml");
    fs::write(
        &path,
        "format = \"pilotlen-scenario/1\"\np_good = 0.5\nsnr_good = 1.5\nsnr_bad = 0.5\nk = 64\n\
         sweep = \"probability\"\ngrid = [0.3, 0.6]\n",
    )
    .unwrap();
    let s = Scenario::from_file(&path).unwrap();
    assert_eq!(s.sweep, SweepKind::Probability);
    let out = run_vary_probability(&s.grid, &s.rcsp);
    assert_eq!(out.rows.iter().map(|r| r.sweep_value).collect::<Vec<_>>(), vec![0.3, 0.6]);
    assert!(out.rows.iter().all(SweepRow::is_consistent));

    let single = run_single(&Scenario { sweep: SweepKind::None, grid: vec![], ..s }, None, None).unwrap();
    assert!(single.optimum.reduction > 0.0);
}

#[test]
fn scenario_errors_name_the_file_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.toml");
    fs::write(&path, "format = \"pilotlen-scenario/1\"\np_good = 0.5\nsnr_good = 1.5\nsnr_bad = 0.5\nepsilo = 0.1\n")
        .unwrap();
    match Scenario::from_file(&path) {
        Err(Error::Config(msg)) => {
            assert!(msg.contains("typo.toml") && msg.contains("epsilo"), "{msg}");
        }
        other => panic!("expected a config error, got {other:?}"),
    }
    assert!(matches!(Scenario::from_file(&dir.path().join("missing.toml")), Err(Error::Io(_))));
}

#[test]
fn sweep_rows_come_back_in_grid_order() {
    let grid = [10.0, 1.5, 5.0, 2.0];
    let out = run_vary_ratio(&grid, &RcspConfig::new(32, 1e-2).unwrap());
    let order: Vec<f64> = out.rows.iter().map(|r| r.sweep_value).collect();
    assert_eq!(order, grid);
}
