use std::io::Write;

use crate::error::{Error, Result};
use crate::fourier::CompiledSeries;

use super::field::CompiledField;
use super::integrator::{Dop853, StepStats};
use super::system::{ActionDomain, PhaseState};

/// Integrator settings for a single trajectory.
#[derive(Clone, Debug)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Number of uniformly spaced samples including both end points.
    pub sample_count: usize,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        let d = Dop853::default();
        Self { rtol: d.rtol, atol: d.atol, sample_count: 101, max_steps: d.max_steps }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub rtol: f64,
    pub atol: f64,
}

/// Sampled solution. Sample times increase for forward runs and decrease
/// for backward runs; stored angles lie in `[0, 2 pi)`.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    /// Energy per sample (`NaN` when no energy function was supplied).
    pub energies: Vec<f64>,
    pub stats: IntegratorStats,
    /// Final state with lifted angles.
    pub final_lifted: PhaseState,
}

impl TrajectoryRecord {
    pub fn n(&self) -> usize {
        self.states.first().map_or(0, |s| s.n())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t,a1..an,alpha1..alphan,energy` and 17 significant
    /// digits per value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.n();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("a{i}")));
        header.extend((1..=n).map(|i| format!("alpha{i}")));
        header.push("energy".into());
        writeln!(w, "{}", header.join(","))?;
        for ((t, s), e) in self.times.iter().zip(&self.states).zip(&self.energies) {
            let mut row = vec![fmt17(*t)];
            row.extend(s.a.iter().map(|v| fmt17(*v)));
            row.extend(s.alpha.iter().map(|v| fmt17(*v)));
            row.push(fmt17(*e));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Integrate `field` from `x0` over `[0, t_end]` (`t_end < 0` runs backward).
///
/// Fails with [`Error::DomainExit`] as soon as an accepted step leaves
/// `domain`, and with [`Error::StepUnderflow`] when the step size collapses.
pub fn integrate(
    field: &CompiledField,
    x0: &PhaseState,
    t_end: f64,
    opts: &IntegrateOptions,
    domain: Option<&ActionDomain>,
    energy: Option<&CompiledSeries>,
) -> Result<TrajectoryRecord> {
    let n = field.n();
    if x0.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.n() });
    }
    if opts.sample_count < 2 {
        return Err(Error::Validation("sample_count must be at least 2".into()));
    }
    if !t_end.is_finite() || t_end == 0.0 {
        return Err(Error::Validation("t_end must be finite and nonzero".into()));
    }
    if let Some(d) = domain {
        if !d.contains(&x0.a) {
            return Err(Error::Validation(format!("initial actions {:?} lie outside the domain", x0.a)));
        }
    }
    let m = opts.sample_count - 1;
    let sample_times: Vec<f64> = (1..=m).map(|i| if i == m { t_end } else { t_end * i as f64 / m as f64 }).collect();

    let energy_of = |s: &PhaseState| energy.map_or(f64::NAN, |e| e.eval(&s.a, &s.alpha));
    let mut times = vec![0.0];
    let mut states = vec![x0.wrapped()];
    let mut energies = vec![energy_of(x0)];

    let solver = Dop853 { rtol: opts.rtol, atol: opts.atol, max_steps: opts.max_steps, ..Dop853::default() };
    let sol = solver.solve(field, 0.0, &x0.to_vec(), t_end, &sample_times, |ev| {
        if let Some(d) = domain {
            if !d.contains(&ev.y[..n]) {
                return Err(Error::DomainExit { exit_t: ev.t });
            }
        }
        if ev.sample.is_some() {
            let s = PhaseState::from_slice(ev.y);
            energies.push(energy_of(&s));
            states.push(s.wrapped());
            times.push(ev.t);
        }
        Ok(())
    })?;
    let StepStats { accepted, rejected, evaluations } = sol.stats;
    Ok(TrajectoryRecord {
        times,
        states,
        energies,
        stats: IntegratorStats { accepted, rejected, evaluations, rtol: opts.rtol, atol: opts.atol },
        final_lifted: PhaseState::from_slice(&sol.y),
    })
}

/// `max_t |E_t - E_0|` over the recorded samples.
pub fn energy_drift(record: &TrajectoryRecord) -> Result<f64> {
    max_deviation(&record.energies)
}

pub fn max_deviation(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Validation("at least two samples are required".into()));
    }
    let e0 = values[0];
    Ok(values.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max))
}
