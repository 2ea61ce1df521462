//! One step of resonant normal form: resonance sets, the homological
//! equation, and the Lie transform generated by its solution.

mod generator;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::dynamics::{
    hamiltonian_vector_field, is_strongly_hamiltonian, ActionDomain, CompiledField, Dop853, OdeSystem, PhaseState,
    StrongHamiltonianVerdict, SystemDefinition, VectorFieldSpec,
};
use crate::error::{Error, Result};
use crate::fourier::{ComplexPoly, FourierSeries, FourierTerm, HarmonicSelector, MultiIndex, Variable};
use crate::poly::{rational_from_f64, rational_to_f64, ActionPolynomial};
use crate::structure::CTensorField;

pub use generator::{CompiledGenerator, GeneratorSeries, GeneratorTerm};

/// Every `nu` in `Z^n` with `|nu|_1 <= cutoff`, in lexicographic order.
pub fn multi_indices(n: usize, cutoff: u64) -> Vec<MultiIndex> {
    fn rec(n: usize, budget: i64, prefix: &mut Vec<i64>, out: &mut Vec<MultiIndex>) {
        if prefix.len() == n {
            out.push(MultiIndex(prefix.clone()));
            return;
        }
        for v in -budget..=budget {
            prefix.push(v);
            rec(n, budget - v.abs(), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, cutoff as i64, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Frequencies of order at most `cutoff` that are `delta`-resonant with a
/// frequency vector.
#[derive(Clone, Debug, Serialize)]
pub struct ResonanceSet {
    pub cutoff: u64,
    pub delta: f64,
    pub members: BTreeSet<MultiIndex>,
    pub a_star: Vec<f64>,
    pub omega: Vec<f64>,
    /// `min |omega . nu|` over non-members; `None` if every frequency is a
    /// member.
    pub min_small_divisor: Option<f64>,
}

impl ResonanceSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl HarmonicSelector for ResonanceSet {
    fn contains(&self, nu: &MultiIndex) -> bool {
        self.members.contains(nu)
    }
}

fn scan(n: usize, cutoff: u64, delta: f64, divisor: impl Fn(&MultiIndex) -> (f64, bool)) -> (BTreeSet<MultiIndex>, Option<f64>) {
    let mut members = BTreeSet::new();
    let mut min: Option<f64> = None;
    for nu in multi_indices(n, cutoff) {
        let (d, exact_zero) = divisor(&nu);
        if nu.is_zero() || exact_zero || d.abs() < delta {
            members.insert(nu);
        } else {
            min = Some(min.map_or(d.abs(), |m| m.min(d.abs())));
        }
    }
    (members, min)
}

/// Members are the `nu` with `|nu| <= cutoff` and `|omega . nu| < delta`,
/// together with exact zeros of `omega . nu` (so `delta = 0` selects exact
/// resonances) and `nu = 0`.
pub fn resonance_set(omega: &[f64], cutoff: u64, delta: f64) -> Result<ResonanceSet> {
    if cutoff < 1 {
        return Err(Error::Validation("resonance cutoff must be at least 1".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::Validation("resonance threshold must be non-negative".into()));
    }
    let (members, min) = scan(omega.len(), cutoff, delta, |nu| {
        let d = nu.dot(omega);
        (d, d == 0.0)
    });
    Ok(ResonanceSet { cutoff, delta, members, a_star: Vec::new(), omega: omega.to_vec(), min_small_divisor: min })
}

/// As [`resonance_set`] with `omega = grad k(a_star)`, deciding exact
/// resonances in rational arithmetic.
pub fn resonance_set_at(k: &ActionPolynomial, a_star: &[f64], cutoff: u64, delta: f64) -> Result<ResonanceSet> {
    if a_star.len() != k.n() {
        return Err(Error::DimensionMismatch { expected: k.n(), got: a_star.len() });
    }
    let exact: Vec<_> = a_star.iter().map(|&x| rational_from_f64(x)).collect::<Result<_>>()?;
    let omega_exact: Vec<_> = k.gradient().iter().map(|p| p.eval_exact(&exact)).collect();
    let omega: Vec<f64> = omega_exact.iter().map(rational_to_f64).collect();
    let mut set = resonance_set(&omega, cutoff, delta)?;
    let (members, min) = scan(k.n(), cutoff, delta, |nu| {
        let d = nu.dot_exact(&omega_exact);
        (rational_to_f64(&d), num_traits::Zero::is_zero(&d))
    });
    set.members = members;
    set.min_small_divisor = min;
    set.a_star = a_star.to_vec();
    Ok(set)
}

/// Default threshold `sqrt(eps) |omega(a_star)|`.
pub fn default_delta(epsilon: f64, omega: &[f64]) -> f64 {
    epsilon.abs().sqrt() * omega.iter().map(|w| w * w).sum::<f64>().sqrt()
}

/// Outcome of one homological solve.
#[derive(Clone, Debug)]
pub struct NormalFormResult {
    /// Generator `chi` with `{k, chi} + f^{<=N} = g`.
    pub generator: GeneratorSeries,
    /// Resonant part `g = Pi_Lambda f^{<=N}`.
    pub resonant: FourierSeries,
    pub truncated: FourierSeries,
    pub ultraviolet: FourierSeries,
    pub lambda: ResonanceSet,
    pub cutoff: u64,
    pub min_small_divisor: Option<f64>,
    /// Whether `{k, chi} + f^{<=N} - g` cancels identically.
    pub residual_exact_zero: bool,
    /// Sampled sup-norm of the same residual, evaluated in floating point.
    pub residual_sup: f64,
    pub residual_samples: usize,
}

/// Solve `{k, chi} + f^{<=N} = Pi_Lambda f^{<=N}` with
/// `chi_nu = -f_nu / (i omega(a) . nu)` off `Lambda` and `chi_nu = 0` on it.
pub fn solve_homological(
    k: &ActionPolynomial,
    f: &FourierSeries,
    lambda: &ResonanceSet,
    cutoff: u64,
    a_star: &[f64],
) -> Result<NormalFormResult> {
    let n = k.n();
    if f.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.n() });
    }
    if a_star.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a_star.len() });
    }
    let omega = k.gradient();
    let a_exact: Vec<_> = a_star.iter().map(|&x| rational_from_f64(x)).collect::<Result<_>>()?;
    let truncated = f.truncate(cutoff);
    let resonant = truncated.project(lambda);
    let ultraviolet = f.ultraviolet(cutoff);

    let mut chi = GeneratorSeries::zero(n);
    let mut min_div: Option<f64> = None;
    for (nu, c) in truncated.harmonics() {
        if !nu.is_canonical() || lambda.contains(nu) {
            continue;
        }
        let mut den = ActionPolynomial::zero(n);
        for (i, &v) in nu.components().iter().enumerate() {
            if v != 0 {
                den += &omega[i].scale(&crate::poly::rat(v));
            }
        }
        let at_star = den.eval_exact(&a_exact);
        if num_traits::Zero::is_zero(&at_star) {
            return Err(Error::ZeroSmallDivisor { nu: nu.0.clone() });
        }
        let d = rational_to_f64(&at_star).abs();
        min_div = Some(min_div.map_or(d, |m: f64| m.min(d)));
        // -c / (i D) = i c / D
        let num = ComplexPoly::new(-&c.im, c.re.clone());
        match den.as_constant() {
            Some(q) => {
                let inv = num_traits::Inv::inv(q);
                chi.insert(nu.clone(), ActionPolynomial::one(n), num.scale(&inv), 0);
            }
            None => chi.insert(nu.clone(), den, num, 1),
        }
    }

    let bracket = homological_bracket(k, &chi);
    let remainder = &truncated - &resonant;
    let residual_exact_zero = (&bracket + &GeneratorSeries::from_fourier(&remainder)).is_zero();

    let points = residual_grid(a_star, 10_000, 0);
    let residual_sup = residual_sup_norm(&bracket, &remainder, &points);
    Ok(NormalFormResult {
        generator: chi,
        resonant,
        truncated,
        ultraviolet,
        lambda: lambda.clone(),
        cutoff,
        min_small_divisor: lambda.min_small_divisor.or(min_div),
        residual_exact_zero,
        residual_sup,
        residual_samples: points.len(),
    })
}

/// `{k, chi}` for an angle-independent `k`: `sum_i dk/da_i dchi/dalpha_i`.
pub fn homological_bracket(k: &ActionPolynomial, chi: &GeneratorSeries) -> GeneratorSeries {
    let mut out = GeneratorSeries::zero(k.n());
    for (i, w) in k.gradient().iter().enumerate() {
        if !w.is_zero() {
            out = &out + &chi.derivative(Variable::Angle(i)).mul_poly(w);
        }
    }
    out
}

/// Random states with actions in a small box around `a_star`.
pub fn residual_grid(a_star: &[f64], count: usize, seed: u64) -> Vec<PhaseState> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let scale = a_star.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let radius = 1e-3 * scale;
    (0..count)
        .map(|_| {
            let a = a_star.iter().map(|x| x + rng.gen_range(-radius..=radius)).collect();
            let alpha = (0..a_star.len()).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            PhaseState::new(a, alpha)
        })
        .collect()
}

/// `sup |{k, chi} + (f^{<=N} - g)|` over `points`, each part evaluated
/// separately in floating point.
pub fn residual_sup_norm(bracket: &GeneratorSeries, remainder: &FourierSeries, points: &[PhaseState]) -> f64 {
    let b = bracket.compile();
    let r = remainder.compile();
    points.iter().map(|p| (b.eval(&p.a, &p.alpha) + r.eval(&p.a, &p.alpha)).abs()).fold(0.0, f64::max)
}

/// Which way the generator flow is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LieDirection {
    /// Pull back by the flow that removes the non-resonant harmonics.
    Forward,
    /// The opposite flow.
    Inverse,
}

/// The field `X_{k + eps f}` seen through the time-`eps` flow of the
/// generator. Evaluation integrates the generator field and its
/// variational equations; each call owns its scratch state.
#[derive(Clone, Debug)]
pub struct LieTransform {
    n: usize,
    epsilon: f64,
    /// Signed time of the flow carrying new coordinates to old ones.
    pull_time: f64,
    chi_field: CompiledGenerator,
    chi_jacobian: CompiledGenerator,
    original: CompiledField,
    domain: ActionDomain,
    inner: Dop853,
}

pub fn lie_transform_field(system: &SystemDefinition, result: &NormalFormResult, direction: LieDirection) -> Result<LieTransform> {
    let n = system.n;
    if result.generator.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: result.generator.n() });
    }
    let comps = result.generator.hamiltonian_field(&system.structure);
    let mut jac = Vec::with_capacity(4 * n * n);
    for c in &comps {
        for j in 0..2 * n {
            let var = if j < n { Variable::Action(j) } else { Variable::Angle(j - n) };
            jac.push(c.derivative(var));
        }
    }
    let comp_refs: Vec<&GeneratorSeries> = comps.iter().collect();
    let jac_refs: Vec<&GeneratorSeries> = jac.iter().collect();
    let eps = system.epsilon;
    let pull_time = match direction {
        LieDirection::Forward => -eps,
        LieDirection::Inverse => eps,
    };
    let mut inner = Dop853::new(1e-13, 1e-15);
    if eps != 0.0 {
        inner = inner.with_h_max(eps.abs());
    }
    Ok(LieTransform {
        n,
        epsilon: eps,
        pull_time,
        chi_field: CompiledGenerator::new(&comp_refs),
        chi_jacobian: CompiledGenerator::new(&jac_refs),
        original: system.vector_field().compile(),
        domain: system.domain.clone(),
        inner,
    })
}

struct GeneratorFlow<'a> {
    t: &'a LieTransform,
}

impl OdeSystem for GeneratorFlow<'_> {
    fn dim(&self) -> usize {
        2 * self.t.n
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let (a, alpha) = y.split_at(self.t.n);
        self.t.chi_field.eval_into(a, alpha, dy);
    }
}

struct VariationalFlow<'a> {
    t: &'a LieTransform,
}

impl OdeSystem for VariationalFlow<'_> {
    fn dim(&self) -> usize {
        let m = 2 * self.t.n;
        m + m * m
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.t.n;
        let m = 2 * n;
        let (state, jmat) = y.split_at(m);
        let (a, alpha) = state.split_at(n);
        let (d_state, d_j) = dy.split_at_mut(m);
        self.t.chi_field.eval_into(a, alpha, d_state);
        let mut dx = vec![0.0; m * m];
        self.t.chi_jacobian.eval_into(a, alpha, &mut dx);
        for i in 0..m {
            for c in 0..m {
                let mut acc = 0.0;
                for l in 0..m {
                    acc += dx[i * m + l] * jmat[l * m + c];
                }
                d_j[i * m + c] = acc;
            }
        }
    }
}

impl LieTransform {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn check_domain(&self, y: &[f64], t: f64) -> Result<()> {
        if self.domain.contains(&y[..self.n]) {
            Ok(())
        } else {
            Err(Error::DomainExit { exit_t: t })
        }
    }

    /// Flow of the generator field for time `t`.
    pub fn generator_flow(&self, x: &PhaseState, t: f64) -> Result<PhaseState> {
        if t == 0.0 {
            return Ok(x.clone());
        }
        let sys = GeneratorFlow { t: self };
        let sol = self.inner.solve(&sys, 0.0, &x.to_vec(), t, &[], |ev| self.check_domain(ev.y, ev.t))?;
        Ok(PhaseState::from_slice(&sol.y))
    }

    /// Generator flow for time `t` with its Jacobian.
    pub fn flow_with_jacobian(&self, x: &PhaseState, t: f64) -> Result<(PhaseState, DMatrix<f64>)> {
        let m = 2 * self.n;
        if t == 0.0 {
            return Ok((x.clone(), DMatrix::identity(m, m)));
        }
        let mut y0 = x.to_vec();
        for i in 0..m {
            for c in 0..m {
                y0.push(if i == c { 1.0 } else { 0.0 });
            }
        }
        let sys = VariationalFlow { t: self };
        let sol = self.inner.solve(&sys, 0.0, &y0, t, &[], |ev| self.check_domain(ev.y, ev.t))?;
        let jac = DMatrix::from_row_slice(m, m, &sol.y[m..]);
        Ok((PhaseState::from_slice(&sol.y[..m]), jac))
    }

    /// Transformed field at `z`, as `[da, dalpha]`.
    pub fn eval(&self, z: &PhaseState) -> Result<Vec<f64>> {
        let (y, jac) = self.flow_with_jacobian(z, self.pull_time)?;
        let yv = DVector::from_vec(self.original.eval_state(&y));
        let lu = jac.lu();
        let out = lu.solve(&yv).ok_or_else(|| Error::Contract("generator flow Jacobian is singular".into()))?;
        Ok(out.iter().copied().collect())
    }

    /// Old coordinates to new ones.
    pub fn to_normalized(&self, x: &PhaseState) -> Result<PhaseState> {
        self.generator_flow(x, -self.pull_time)
    }

    /// New coordinates to old ones.
    pub fn from_normalized(&self, z: &PhaseState) -> Result<PhaseState> {
        self.generator_flow(z, self.pull_time)
    }

    /// Actions of the point `x` in the new coordinates.
    pub fn new_actions(&self, x: &PhaseState) -> Result<Vec<f64>> {
        Ok(self.to_normalized(x)?.a)
    }

    /// Largest action component of the transformed field.
    pub fn action_rate(&self, z: &PhaseState) -> Result<f64> {
        Ok(self.eval(z)?[..self.n].iter().fold(0.0, |m, v| m.max(v.abs())))
    }
}

impl OdeSystem for LieTransform {
    fn dim(&self) -> usize {
        2 * self.n
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        match self.eval(&PhaseState::from_slice(y)) {
            Ok(v) => dy.copy_from_slice(&v),
            Err(_) => dy.iter_mut().for_each(|d| *d = f64::NAN),
        }
    }
}

/// `sup |Z(z) - X_k(z) - eps X_g(z)|` over `points`: what the single step
/// leaves beyond the resonant normal form.
pub fn remainder_estimate(
    transform: &LieTransform,
    system: &SystemDefinition,
    result: &NormalFormResult,
    points: &[PhaseState],
) -> Result<f64> {
    let eps = rational_from_f64(system.epsilon)?;
    let normal = &FourierSeries::from_poly(system.k.clone()) + &result.resonant.scale(&eps);
    let target = hamiltonian_vector_field(&normal, &system.structure)?.compile();
    let mut sup: f64 = 0.0;
    for z in points {
        let got = transform.eval(z)?;
        let want = target.eval_state(z);
        for (g, w) in got.iter().zip(&want) {
            sup = sup.max((g - w).abs());
        }
    }
    Ok(sup)
}

/// Harmonic projection of every component of a field.
pub fn project_field<S: HarmonicSelector + ?Sized>(field: &VectorFieldSpec, lambda: &S) -> VectorFieldSpec {
    VectorFieldSpec {
        n: field.n,
        action: field.action.iter().map(|s| s.project(lambda)).collect(),
        angle: field.angle.iter().map(|s| s.project(lambda)).collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PreservationReport {
    pub perturbation: StrongHamiltonianVerdict,
    pub generator: StrongHamiltonianVerdict,
    pub resonant: StrongHamiltonianVerdict,
    /// `false` only if the perturbation is strongly Hamiltonian while the
    /// generator or the resonant part is not.
    pub contract_holds: bool,
}

/// Classify the perturbation, the generator and the resonant part.
pub fn check_strong_preservation(system: &SystemDefinition, result: &NormalFormResult, c: &CTensorField) -> PreservationReport {
    let perturbation = is_strongly_hamiltonian(&system.f, c);
    let generator = is_strongly_hamiltonian(&result.generator.numerators(), c);
    let resonant = is_strongly_hamiltonian(&result.resonant, c);
    let contract_holds = !perturbation.verdict || (generator.verdict && resonant.verdict);
    PreservationReport { perturbation, generator, resonant, contract_holds }
}

/// Log-log slope diagnostics of action rates against `eps`.
#[derive(Clone, Debug, Serialize)]
pub struct RemainderScaling {
    pub epsilons: Vec<f64>,
    pub original_rates: Vec<f64>,
    pub transformed_rates: Vec<f64>,
    pub original_slope: f64,
    pub transformed_slope: f64,
}

/// For each `eps`, the largest action rate of the original and of the
/// transformed field over `points`, with fitted log-log slopes.
pub fn remainder_scaling(
    system: &SystemDefinition,
    result: &NormalFormResult,
    epsilons: &[f64],
    points: &[PhaseState],
) -> Result<RemainderScaling> {
    let mut original_rates = Vec::new();
    let mut transformed_rates = Vec::new();
    for &eps in epsilons {
        let sys = system.with_epsilon(eps);
        let t = lie_transform_field(&sys, result, LieDirection::Forward)?;
        let raw = sys.vector_field().compile();
        let mut r0: f64 = 0.0;
        let mut r1: f64 = 0.0;
        for z in points {
            let v = raw.eval_state(z);
            r0 = r0.max(v[..sys.n].iter().fold(0.0, |m, x| m.max(x.abs())));
            r1 = r1.max(t.action_rate(z)?);
        }
        original_rates.push(r0);
        transformed_rates.push(r1);
    }
    let original_slope = crate::harness::loglog_fit(epsilons, &original_rates)?.slope;
    let transformed_slope = crate::harness::loglog_fit(epsilons, &transformed_rates)?.slope;
    Ok(RemainderScaling { epsilons: epsilons.to_vec(), original_rates, transformed_rates, original_slope, transformed_slope })
}

/// JSON view of a normal-form step.
#[derive(Clone, Debug, Serialize)]
pub struct NormalFormReport {
    pub cutoff: u64,
    pub delta: f64,
    pub a_star: Vec<f64>,
    pub lambda: Vec<MultiIndex>,
    pub min_small_divisor: Option<f64>,
    pub residual_exact_zero: bool,
    pub residual_sup: f64,
    pub residual_samples: usize,
    pub generator: Vec<GeneratorTerm>,
    pub resonant: Vec<FourierTerm>,
    pub ultraviolet_harmonics: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub remainder_sup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaling: Option<RemainderScaling>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preservation: Option<PreservationReport>,
}

impl NormalFormResult {
    pub fn report(&self) -> NormalFormReport {
        NormalFormReport {
            cutoff: self.cutoff,
            delta: self.lambda.delta,
            a_star: self.lambda.a_star.clone(),
            lambda: self.lambda.members.iter().cloned().collect(),
            min_small_divisor: self.min_small_divisor,
            residual_exact_zero: self.residual_exact_zero,
            residual_sup: self.residual_sup,
            residual_samples: self.residual_samples,
            generator: self.generator.to_terms(),
            resonant: self.resonant.to_terms(),
            ultraviolet_harmonics: self.ultraviolet.num_harmonics(),
            remainder_sup: None,
            scaling: None,
            preservation: None,
        }
    }
}
