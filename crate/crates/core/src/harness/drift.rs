use std::io::Write;

use serde::Serialize;

use crate::dynamics::{Dop853, PhaseState, SystemDefinition};
use crate::error::{Error, Result};
use crate::fourier::CompiledSeries;

use super::params::NekhoroshevParams;
use super::stats::{loglog_fit, LogLogFit};

/// Integrator tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = Dop853::default();
        Self { rtol: d.rtol, atol: d.atol }
    }
}

/// One drift measurement.
#[derive(Clone, Debug, Serialize)]
pub struct DriftRow {
    pub epsilon: f64,
    /// Time horizon, covered in both directions.
    pub horizon: f64,
    /// `max |a_t - a_0|` (Euclidean) over every accepted step.
    pub drift: f64,
    pub escaped: bool,
    pub seed: u64,
    pub initial: PhaseState,
    /// `eps * T * sup |df/dalpha|`, the sup taken along the trajectory.
    pub apriori_ceiling: f64,
    pub steps: usize,
}

/// Rows ordered by decreasing `epsilon`, then by seed.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DriftTable {
    pub rows: Vec<DriftRow>,
}

impl DriftTable {
    /// Distinct `eps` values in table order.
    pub fn epsilons(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.epsilon) {
                out.push(r.epsilon);
            }
        }
        out
    }

    /// Largest drift over the ensemble for each `eps`.
    pub fn max_drift_per_epsilon(&self) -> Vec<(f64, f64)> {
        self.epsilons()
            .into_iter()
            .map(|e| (e, self.rows.iter().filter(|r| r.epsilon == e).map(|r| r.drift).fold(0.0, f64::max)))
            .collect()
    }

    /// Check that `eps` strictly decreases with geometric spacing.
    pub fn validate(&self) -> Result<()> {
        let eps = self.epsilons();
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Validation("drift table epsilons must strictly decrease".into()));
        }
        if eps.len() > 2 {
            let r0 = (eps[1] / eps[0]).ln();
            if eps.windows(2).any(|w| ((w[1] / w[0]).ln() - r0).abs() > 1e-9 * r0.abs().max(1.0)) {
                return Err(Error::Validation("drift table epsilons must be geometrically spaced".into()));
            }
        }
        Ok(())
    }

    /// CSV with header `epsilon,horizon,drift,escaped,seed`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epsilon,horizon,drift,escaped,seed")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                crate::dynamics::trajectory::fmt17(r.epsilon),
                crate::dynamics::trajectory::fmt17(r.horizon),
                crate::dynamics::trajectory::fmt17(r.drift),
                r.escaped,
                r.seed
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Integrate `system` at `epsilon` from `x0` over `[-T, T]` with
/// `T = params.horizon(epsilon)` and record the largest action excursion.
/// Leaving the action domain ends that direction and sets `escaped`.
pub fn measure_drift(
    system: &SystemDefinition,
    epsilon: f64,
    params: &NekhoroshevParams,
    x0: &PhaseState,
    tol: Tolerances,
    seed: u64,
) -> Result<DriftRow> {
    if !(epsilon >= 0.0) {
        return Err(Error::Validation("epsilon must be non-negative".into()));
    }
    let sys = system.with_epsilon(epsilon);
    let horizon = if epsilon == 0.0 { params.t_time } else { params.horizon(epsilon) };
    let field = sys.vector_field().compile();
    let grad = sys.f.angle_gradient();
    let grad_refs: Vec<_> = grad.iter().collect();
    let grad_eval = CompiledSeries::new(&grad_refs);
    let n = sys.n;
    let a0 = x0.a.clone();
    let mut drift: f64 = 0.0;
    let mut sup_grad: f64 = 0.0;
    let mut escaped = false;
    let mut steps = 0;
    let mut buf = vec![0.0; n];
    {
        let (a, alpha) = (&x0.a, &x0.alpha);
        grad_eval.eval_into(a, alpha, &mut buf);
        sup_grad = sup_grad.max(buf.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    let solver = Dop853::new(tol.rtol, tol.atol);
    for dir in [1.0, -1.0] {
        let run = solver.solve(&field, 0.0, &x0.to_vec(), dir * horizon, &[], |ev| {
            let (a, alpha) = ev.y.split_at(n);
            let d = a.iter().zip(&a0).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            drift = drift.max(d);
            grad_eval.eval_into(a, alpha, &mut buf);
            sup_grad = sup_grad.max(buf.iter().map(|v| v * v).sum::<f64>().sqrt());
            if !sys.domain.contains(a) {
                return Err(Error::DomainExit { exit_t: ev.t });
            }
            Ok(())
        });
        match run {
            Ok(sol) => steps += sol.stats.accepted,
            Err(Error::DomainExit { .. }) => escaped = true,
            Err(e) => return Err(e),
        }
    }
    Ok(DriftRow {
        epsilon,
        horizon,
        drift,
        escaped,
        seed,
        initial: x0.clone(),
        apriori_ceiling: epsilon * horizon * sup_grad,
        steps,
    })
}

/// Log-log fit of the ensemble-maximum drift against `eps`. Needs at least
/// three `eps` values with positive drift.
pub fn fit_scaling(table: &DriftTable) -> Result<LogLogFit> {
    let pts = table.max_drift_per_epsilon();
    let positive = pts.iter().filter(|p| p.1 > 0.0).count();
    if positive < 3 {
        return Err(Error::Validation(format!(
            "scaling fit needs at least three epsilon values with positive drift, got {positive}"
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    loglog_fit(&x, &y)
}
