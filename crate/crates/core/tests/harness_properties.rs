mod common;

use almost_symplectic::dynamics::PhaseState;
use almost_symplectic::harness::{
    fit_scaling, measure_drift, nekhoroshev_report, DriftRow, DriftTable, ExperimentConfig, NekhoroshevParams, Tolerances,
};
use almost_symplectic::expr::parse_series;
use common::*;

const SMALL_SWEEP: &str = r#"
[system]
n = 3
k = "(a1^2 + a2^2 + a3^2)/2"
domain = [[-3, 3], [-3, 3], [-3, 3]]

[structure]
"1,2" = "a3"

[perturbation]
terms = ["cos(alpha1) + cos(alpha1 - alpha2) + cos(alpha3)"]

[experiment]
eps_max = 1e-2
eps_min = 1e-3
eps_count = 4
ensemble = 3
seed = 17
horizon_prefactor = 0.05
initial_box = [[0.5, 1.5], [0.5, 1.5], [0.5, 1.5]]
"#;

fn run_in_pool(threads: usize, cfg: &ExperimentConfig) -> (String, String) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let report = nekhoroshev_report(cfg).unwrap();
        (report.to_json(), report.table.to_csv_string())
    })
}

#[test]
fn outputs_do_not_depend_on_the_worker_count() {
    let cfg = ExperimentConfig::from_toml_str(SMALL_SWEEP).unwrap();
    let (json1, csv1) = run_in_pool(1, &cfg);
    let (json4, csv4) = run_in_pool(4, &cfg);
    assert_eq!(json1, json4);
    assert_eq!(csv1, csv4);
    assert!(csv1.starts_with("epsilon,horizon,drift,escaped,seed\n"));
    assert_eq!(csv1.lines().count(), 1 + 4 * 3);
}

#[test]
fn drifts_stay_below_the_apriori_ceiling() {
    let sys = benchmark(1.0);
    let params = NekhoroshevParams::defaults(3, 0.05).unwrap();
    let tol = Tolerances::default();
    let starts = [
        PhaseState::new(vec![1.0, 0.6, 0.3], vec![0.1, 0.2, 0.3]),
        PhaseState::new(vec![0.7, 1.3, 0.9], vec![2.0, 4.0, 1.0]),
        PhaseState::new(vec![1.1, 1.1, 0.5], vec![0.0, 3.0, 5.0]),
    ];
    for eps in [1e-2, 3e-3, 1e-3] {
        for (i, x0) in starts.iter().enumerate() {
            let row = measure_drift(&sys, eps, &params, x0, tol, i as u64).unwrap();
            assert!(!row.escaped);
            assert!(row.drift > 0.0);
            assert!(row.drift <= 1.1 * row.apriori_ceiling + tol.atol, "eps {eps}: {} > {}", row.drift, row.apriori_ceiling);
            assert_eq!(row.horizon, params.horizon(eps));
        }
    }
}

#[test]
fn integrable_perturbations_do_not_drift() {
    let mut sys = benchmark(1.0);
    sys.f = parse_series("a1*a2 + a3^2/3", 3).unwrap();
    let params = NekhoroshevParams::defaults(3, 0.05).unwrap();
    let x0 = PhaseState::new(vec![1.0, 0.6, 0.3], vec![0.1, 0.2, 0.3]);
    let tol = Tolerances::default();
    for eps in [0.0, 1e-2, 1e-4] {
        let row = measure_drift(&sys, eps, &params, &x0, tol, 0).unwrap();
        assert!(row.drift <= tol.atol, "eps {eps}: drift {:e}", row.drift);
    }
}

fn synthetic(drift: impl Fn(f64) -> f64) -> DriftTable {
    let x0 = PhaseState::new(vec![0.0], vec![0.0]);
    let rows = [1e-1, 1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&e| DriftRow {
            epsilon: e,
            horizon: 1.0,
            drift: drift(e),
            escaped: false,
            seed: 0,
            initial: x0.clone(),
            apriori_ceiling: f64::INFINITY,
            steps: 0,
        })
        .collect();
    DriftTable { rows }
}

#[test]
fn scaling_fit_recovers_power_laws() {
    let fit = fit_scaling(&synthetic(|e| e)).unwrap();
    assert!((fit.slope - 1.0).abs() < 1e-12);
    let fit = fit_scaling(&synthetic(|e| 3.0 * e * e)).unwrap();
    assert!((fit.slope - 2.0).abs() < 1e-12);
    assert!((fit.prefactor - 3.0).abs() < 1e-10);
    assert!(fit_scaling(&synthetic(|_| 0.0)).is_err());
}
