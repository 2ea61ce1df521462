//! Action-drift experiments: configuration files, `eps` sweeps over an
//! ensemble of initial conditions, power-law fits and the stability report.

pub mod config;
pub mod drift;
pub mod params;
pub mod stats;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{ActionDomain, PhaseState};
use crate::error::{Error, Result};
use crate::normalform::multi_indices;
use crate::poly::ActionPolynomial;

pub use config::ExperimentConfig;
pub use drift::{fit_scaling, measure_drift, DriftRow, DriftTable, Tolerances};
pub use params::{check_convexity, ConvexityReport, NekhoroshevParams, CONVEXITY_THRESHOLD};
pub use stats::{geometric_grid, loglog_fit, LogLogFit};

/// Rejection attempts per initial condition.
const MAX_REJECTIONS: usize = 100_000;

/// Draw an initial condition from `domain` whose frequency vector
/// `omega = dk/da` satisfies `|omega.nu| > gap` for `0 < |nu|_1 <= order`.
/// Angles are uniform on `[0, 2 pi)`.
pub fn nonresonant_initial_condition(
    k: &ActionPolynomial,
    domain: &ActionDomain,
    order: u64,
    gap: f64,
    seed: u64,
) -> Result<PhaseState> {
    let n = k.n();
    let grad = k.gradient();
    let harmonics: Vec<_> = multi_indices(n, order).into_iter().filter(|nu| nu.is_canonical() && !nu.is_zero()).collect();
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    for _ in 0..MAX_REJECTIONS {
        let a = domain
            .sample(&mut rng)
            .ok_or_else(|| Error::Validation("initial conditions need a finite box domain".into()))?;
        let omega: Vec<f64> = grad.iter().map(|g| g.eval(&a)).collect();
        if harmonics.iter().all(|nu| nu.dot(&omega).abs() > gap) {
            let alpha = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            return Ok(PhaseState::new(a, alpha));
        }
    }
    Err(Error::Validation(format!(
        "no initial condition with |omega.nu| > {gap} for |nu| <= {order} found in {MAX_REJECTIONS} draws"
    )))
}

/// Per-`eps` summary of a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct EpsilonSummary {
    pub epsilon: f64,
    pub horizon: f64,
    pub max_drift: f64,
    /// `max_drift / eps^c1`.
    pub normalized_drift: f64,
    pub escapes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct NekhoroshevReport {
    pub passed: bool,
    /// Human-readable reasons for a failure (empty on success).
    pub failures: Vec<String>,
    /// The drift vanished on the whole grid.
    pub trivial: bool,
    /// Parameters with the fitted `A` (largest `drift / eps^c1`).
    pub params: NekhoroshevParams,
    pub convexity: ConvexityReport,
    pub fit: Option<LogLogFit>,
    pub apriori_margin: f64,
    pub apriori_violations: usize,
    pub escapes: usize,
    pub summary: Vec<EpsilonSummary>,
    pub initial_conditions: Vec<PhaseState>,
    pub table: DriftTable,
}

impl NekhoroshevReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Run the drift sweep described by `config` and test the bound
/// `max drift(eps) <= A eps^c1` for `|t| <= T eps^-c2` on the grid.
///
/// The sweep passes when no trajectory leaves the domain, every drift stays
/// below `(1 + margin) eps T sup |df/dalpha|`, and the fitted log-log slope
/// of the ensemble-maximum drift is at least `c1` within two standard
/// errors. A grid on which every drift vanishes passes trivially.
///
/// Rows are computed in parallel and merged in grid order, so the output
/// does not depend on the number of worker threads.
pub fn nekhoroshev_report(config: &ExperimentConfig) -> Result<NekhoroshevReport> {
    config.validate()?;
    let system = config.system()?;
    let grid = config.epsilon_grid()?;
    let mut params = config.params()?;
    let tol = config.tolerances();
    let exp = &config.experiment;
    let start_box = config.initial_box()?;

    let convexity = check_convexity(&system.k, &start_box, exp.convexity_samples.max(1), exp.seed)?;
    if !convexity.passed() {
        return Err(Error::Validation(format!(
            "unperturbed Hamiltonian fails the steepness check (min Rayleigh {:.3e}, min |det| {:.3e}, threshold {:.1e})",
            convexity.min_rayleigh, convexity.min_abs_det, convexity.threshold
        )));
    }

    let seeds: Vec<u64> = (0..exp.ensemble as u64).map(|i| exp.seed.wrapping_add(i)).collect();
    let initial: Vec<PhaseState> = seeds
        .iter()
        .map(|&s| nonresonant_initial_condition(&system.k, &start_box, exp.nonresonance_order, exp.nonresonance_gap, s))
        .collect::<Result<_>>()?;

    let jobs: Vec<(f64, usize)> = grid.iter().flat_map(|&e| (0..initial.len()).map(move |i| (e, i))).collect();
    let rows: Vec<DriftRow> = jobs
        .par_iter()
        .map(|&(e, i)| measure_drift(&system, e, &params, &initial[i], tol, seeds[i]))
        .collect::<Result<_>>()?;
    let table = DriftTable { rows };
    table.validate()?;

    let mut failures = Vec::new();
    let escapes = table.rows.iter().filter(|r| r.escaped).count();
    if escapes > 0 {
        failures.push(format!("{escapes} trajectories left the action domain"));
    }
    let margin = exp.apriori_margin;
    let apriori_violations =
        table.rows.iter().filter(|r| r.drift > (1.0 + margin) * r.apriori_ceiling + tol.atol).count();
    if apriori_violations > 0 {
        failures.push(format!("{apriori_violations} drifts exceed the a-priori ceiling"));
    }

    let summary: Vec<EpsilonSummary> = table
        .max_drift_per_epsilon()
        .into_iter()
        .map(|(e, d)| {
            let rows = table.rows.iter().filter(|r| r.epsilon == e);
            EpsilonSummary {
                epsilon: e,
                horizon: params.horizon(e),
                max_drift: d,
                normalized_drift: d / e.powf(params.c1),
                escapes: rows.filter(|r| r.escaped).count(),
            }
        })
        .collect();
    let trivial = summary.iter().all(|s| s.max_drift <= tol.atol);
    let fit = if trivial {
        None
    } else {
        match fit_scaling(&table) {
            Ok(fit) => {
                if fit.slope < params.c1 - 2.0 * fit.slope_stderr {
                    failures.push(format!(
                        "drift exponent {:.4} (stderr {:.2e}) is below c1 = {:.4}",
                        fit.slope, fit.slope_stderr, params.c1
                    ));
                }
                Some(fit)
            }
            Err(e) => {
                failures.push(format!("scaling fit failed: {e}"));
                None
            }
        }
    };
    params.a_drift = Some(summary.iter().map(|s| s.normalized_drift).fold(0.0, f64::max));

    Ok(NekhoroshevReport {
        passed: failures.is_empty(),
        failures,
        trivial,
        params,
        convexity,
        fit,
        apriori_margin: margin,
        apriori_violations,
        escapes,
        summary,
        initial_conditions: initial,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
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
eps_count = 3
ensemble = 2
horizon_prefactor = 0.1
initial_box = [[0.5, 1.5], [0.5, 1.5], [0.5, 1.5]]
"#;

    #[test]
    fn initial_conditions_are_nonresonant_and_seeded() {
        let k = crate::expr::parse_polynomial("(a1^2 + a2^2)/2", 2).unwrap();
        let dom = ActionDomain::from_box(vec![(0.5, 1.5); 2]).unwrap();
        let x = nonresonant_initial_condition(&k, &dom, 6, 1e-3, 4).unwrap();
        assert_eq!(x, nonresonant_initial_condition(&k, &dom, 6, 1e-3, 4).unwrap());
        for nu in multi_indices(2, 6).into_iter().filter(|nu| !nu.is_zero()) {
            assert!(nu.dot(&x.a).abs() > 1e-3);
        }
        assert!(nonresonant_initial_condition(&k, &ActionDomain::unbounded(2), 6, 1e-3, 0).is_err());
    }

    #[test]
    fn small_sweep_is_deterministic() {
        let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
        let r = nekhoroshev_report(&cfg).unwrap();
        assert_eq!(r.table.rows.len(), 6);
        assert!(r.passed, "{:?}", r.failures);
        assert!(r.fit.unwrap().slope >= r.params.c1);
        let again = nekhoroshev_report(&cfg).unwrap();
        assert_eq!(r.to_json(), again.to_json());
        assert_eq!(r.table.to_csv_string(), again.table.to_csv_string());
    }

    #[test]
    fn unperturbed_grid_passes_trivially() {
        let cfg = ExperimentConfig::from_toml_str(&SMALL.replace(
            "terms = [\"cos(alpha1) + cos(alpha1 - alpha2) + cos(alpha3)\"]",
            "terms = []",
        ))
        .unwrap();
        let r = nekhoroshev_report(&cfg).unwrap();
        assert!(r.passed && r.trivial);
        assert!(r.table.rows.iter().all(|row| row.drift == 0.0));
    }

    #[test]
    fn non_convex_hamiltonian_is_refused() {
        let cfg = ExperimentConfig::from_toml_str(&SMALL.replace("(a1^2 + a2^2 + a3^2)/2", "(a1^2 - a2^2 + a3^2)/2")).unwrap();
        assert!(matches!(nekhoroshev_report(&cfg), Err(Error::Validation(_))));
    }
}
