use serde::Serialize;

use crate::dynamics::{ActionDomain, Dop853, OdeSystem, PhaseState, StrongHamiltonianVerdict, SystemDefinition};
use crate::error::{Error, Result};
use crate::fourier::{CompiledSeries, ComplexPoly, FourierSeries, MultiIndex, Variable};
use crate::poly::{rational_from_f64, ActionPolynomial, Rational};
use crate::structure::StructureMatrixField;

use super::IntegerLattice;

/// Reduced system on the kept block `(I, phi)` at a fixed value of the
/// removed momenta `J`. Indices are 0-based positions in the full system.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    /// Coordinates whose angles the Hamiltonian still depends on.
    pub kept: Vec<usize>,
    /// Coordinates `(J, psi)` removed by the torus action.
    pub removed: Vec<usize>,
    /// Full-system index of each coordinate in the order `(kept, removed)`.
    pub permutation: Vec<usize>,
    pub j_value: Vec<f64>,
    /// Reduced structure matrix `A[I, I]` at the fixed `J`.
    pub structure: StructureMatrixField,
    /// Coupling block `A[I, J]` at the fixed `J`, row per kept index.
    pub coupling: Vec<Vec<ActionPolynomial>>,
    pub k: ActionPolynomial,
    pub f: FourierSeries,
    pub epsilon: f64,
    pub domain: ActionDomain,
    /// Angle rates of the removed block as series in `(I, phi)`.
    pub reconstruction: Vec<FourierSeries>,
}

/// JSON view of a [`ReducedSystem`] with 1-based indices.
#[derive(Clone, Debug, Serialize)]
pub struct ReducedSystemReport {
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    pub permutation: Vec<usize>,
    pub j_value: Vec<f64>,
    pub structure: std::collections::BTreeMap<String, String>,
    pub coupling: Vec<Vec<String>>,
    pub k: String,
    pub f: Vec<crate::fourier::FourierTerm>,
    pub epsilon: f64,
    pub reconstruction: Vec<Vec<crate::fourier::FourierTerm>>,
}

impl ReducedSystem {
    pub fn dof(&self) -> usize {
        self.kept.len()
    }

    pub fn system(&self) -> Result<SystemDefinition> {
        SystemDefinition::new(self.k.clone(), self.f.clone(), self.structure.clone(), self.epsilon, self.domain.clone())
    }

    /// `psi'` at a reduced state `(I, phi)`.
    pub fn reconstruction_rate(&self, state: &PhaseState) -> Result<Vec<f64>> {
        self.reconstruction.iter().map(|s| s.eval(&state.a, &state.alpha)).collect()
    }

    /// Full state from a reduced state and removed angles `psi`.
    pub fn lift(&self, state: &PhaseState, psi: &[f64]) -> PhaseState {
        let n = self.kept.len() + self.removed.len();
        let mut a = vec![0.0; n];
        let mut alpha = vec![0.0; n];
        for (p, &i) in self.kept.iter().enumerate() {
            a[i] = state.a[p];
            alpha[i] = state.alpha[p];
        }
        for (p, &j) in self.removed.iter().enumerate() {
            a[j] = self.j_value[p];
            alpha[j] = psi[p];
        }
        PhaseState::new(a, alpha)
    }

    /// Project a full state onto `(I, phi)`.
    pub fn project(&self, full: &PhaseState) -> PhaseState {
        PhaseState::new(
            self.kept.iter().map(|&i| full.a[i]).collect(),
            self.kept.iter().map(|&i| full.alpha[i]).collect(),
        )
    }

    pub fn report(&self) -> ReducedSystemReport {
        ReducedSystemReport {
            kept: self.kept.iter().map(|i| i + 1).collect(),
            removed: self.removed.iter().map(|i| i + 1).collect(),
            permutation: self.permutation.iter().map(|i| i + 1).collect(),
            j_value: self.j_value.clone(),
            structure: self.structure.to_expr_map(),
            coupling: self.coupling.iter().map(|r| r.iter().map(|p| p.to_string()).collect()).collect(),
            k: self.k.to_string(),
            f: self.f.to_terms(),
            epsilon: self.epsilon,
            reconstruction: self.reconstruction.iter().map(|s| s.to_terms()).collect(),
        }
    }
}

fn restrict_series(f: &FourierSeries, kept: &[usize], values: &[Option<Rational>]) -> FourierSeries {
    let m = kept.len();
    f.map_harmonics(m, |nu, c| {
        let nu2 = MultiIndex(kept.iter().map(|&i| nu.0[i]).collect());
        (nu2, ComplexPoly::new(c.re.restrict(values), c.im.restrict(values)))
    })
}

/// Reduce by the torus acting on the angles outside the common kernel
/// lattice, for each momentum value in `j_grid`.
///
/// The lattice must be spanned by coordinate unit vectors (bring it to
/// that form with `change_action_angle` first); their indices are kept and
/// all other coordinates are removed.
pub fn reduce(
    system: &SystemDefinition,
    verdict: &StrongHamiltonianVerdict,
    lattice: &IntegerLattice,
    j_grid: &[Vec<f64>],
) -> Result<Vec<ReducedSystem>> {
    let n = system.n;
    if !verdict.verdict {
        return Err(Error::Contract("reduction requires a strongly Hamiltonian perturbation".into()));
    }
    if lattice.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: lattice.n() });
    }
    let kept = lattice.unit_coordinates().ok_or_else(|| {
        Error::Contract("the kernel lattice is not spanned by coordinate vectors; change action-angle coordinates first".into())
    })?;
    let removed: Vec<usize> = (0..n).filter(|i| !kept.contains(i)).collect();
    if let Some(&j) = removed.iter().find(|&&j| system.f.depends_on_angle(j)) {
        return Err(Error::Contract(format!("the perturbation depends on the removed angle alpha{}", j + 1)));
    }
    let permutation: Vec<usize> = kept.iter().chain(&removed).copied().collect();
    let h = system.hamiltonian();

    j_grid
        .iter()
        .map(|jv| {
            if jv.len() != removed.len() {
                return Err(Error::DimensionMismatch { expected: removed.len(), got: jv.len() });
            }
            let mut values: Vec<Option<Rational>> = vec![None; n];
            for (&j, &x) in removed.iter().zip(jv) {
                values[j] = Some(rational_from_f64(x)?);
            }
            let structure = system.structure.principal_block(&kept, |p| Ok(p.restrict(&values)))?;
            let coupling: Vec<Vec<ActionPolynomial>> =
                kept.iter().map(|&i| removed.iter().map(|&j| system.structure.entry(i, j).restrict(&values)).collect()).collect();
            let k = system.k.restrict(&values);
            let f = restrict_series(&system.f, &kept, &values);
            let h_bar = restrict_series(&h, &kept, &values);
            let d_phi = h_bar.angle_gradient();
            let reconstruction = removed
                .iter()
                .enumerate()
                .map(|(p, &j)| {
                    let mut rate = restrict_series(&h.derivative(Variable::Action(j)), &kept, &values);
                    for (q, dq) in d_phi.iter().enumerate() {
                        let b = &coupling[q][p];
                        if !b.is_zero() {
                            rate = &rate - &dq.mul_poly(b);
                        }
                    }
                    rate
                })
                .collect();
            let domain = if system.domain.is_box() {
                for (&j, &x) in removed.iter().zip(jv) {
                    let (lo, hi) = system.domain.bounds()[j];
                    if x < lo || x > hi {
                        return Err(Error::Validation(format!("momentum a{} = {x} lies outside the domain", j + 1)));
                    }
                }
                system.domain.restrict_to(&kept)?
            } else {
                ActionDomain::unbounded(kept.len())
            };
            Ok(ReducedSystem {
                kept: kept.clone(),
                removed: removed.clone(),
                permutation: permutation.clone(),
                j_value: jv.clone(),
                structure,
                coupling,
                k,
                f,
                epsilon: system.epsilon,
                domain,
                reconstruction,
            })
        })
        .collect()
}

/// `psi'` evaluated directly from the full field at the lifted state.
pub fn reconstruction_rhs(system: &SystemDefinition, reduced: &ReducedSystem, state: &PhaseState) -> Result<Vec<f64>> {
    let full = reduced.lift(state, &vec![0.0; reduced.removed.len()]);
    let (_, dalpha) = system.vector_field().eval(&full)?;
    Ok(reduced.removed.iter().map(|&j| dalpha[j]).collect())
}

/// Largest deviation, over `sample_count` uniform times in `[0, t_end]`,
/// between the full flow started at `lift(x0, psi0)` and the reduced flow
/// of `(I, phi)` together with the reconstructed removed angles. The removed
/// actions are compared against their fixed values.
pub fn consistency_error(
    system: &SystemDefinition,
    reduced: &ReducedSystem,
    x0: &PhaseState,
    psi0: &[f64],
    t_end: f64,
    solver: &Dop853,
    sample_count: usize,
) -> Result<f64> {
    let n = system.n;
    let m = reduced.dof();
    let r = reduced.removed.len();
    if x0.n() != m || psi0.len() != r {
        return Err(Error::DimensionMismatch { expected: m + r, got: x0.n() + psi0.len() });
    }
    let samples: Vec<f64> = (1..=sample_count.max(1)).map(|i| t_end * i as f64 / sample_count.max(1) as f64).collect();

    let full_field = system.vector_field().compile();
    let mut full_path = vec![Vec::new(); samples.len()];
    solver.solve(&full_field, 0.0, &reduced.lift(x0, psi0).to_vec(), t_end, &samples, |ev| {
        if let Some(i) = ev.sample {
            full_path[i] = ev.y.to_vec();
        }
        Ok(())
    })?;

    let reduced_field = reduced.system()?.vector_field().compile();
    let rec_refs: Vec<&FourierSeries> = reduced.reconstruction.iter().collect();
    let rec = CompiledSeries::new(&rec_refs);
    let augmented = (2 * m + r, |t: f64, y: &[f64], dy: &mut [f64]| {
        reduced_field.rhs(t, &y[..2 * m], &mut dy[..2 * m]);
        rec.eval_into(&y[..m], &y[m..2 * m], &mut dy[2 * m..]);
    });
    let y0: Vec<f64> = x0.a.iter().chain(&x0.alpha).chain(psi0).copied().collect();
    let mut err: f64 = 0.0;
    solver.solve(&augmented, 0.0, &y0, t_end, &samples, |ev| {
        if let Some(i) = ev.sample {
            let full = &full_path[i];
            for (p, &k) in reduced.kept.iter().enumerate() {
                err = err.max((ev.y[p] - full[k]).abs()).max((ev.y[m + p] - full[n + k]).abs());
            }
            for (p, &j) in reduced.removed.iter().enumerate() {
                err = err.max((reduced.j_value[p] - full[j]).abs()).max((ev.y[2 * m + p] - full[n + j]).abs());
            }
        }
        Ok(())
    })?;
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::is_strongly_hamiltonian;
    use crate::expr::{parse_polynomial, parse_series};
    use crate::lattice::{common_kernel_lattice, KernelSampling};
    use crate::poly::rat;

    fn var(n: usize, i: usize) -> ActionPolynomial {
        ActionPolynomial::variable(n, i)
    }

    fn pendulum_system() -> SystemDefinition {
        let a = StructureMatrixField::from_upper(5, &[((0, 1), &var(5, 0) * &var(5, 2))]).unwrap();
        let f = parse_series("a4^2/2 + a5 - (1 + cos(alpha5))*cos(alpha4)", 5).unwrap();
        let dom = ActionDomain::from_box(vec![(0.5, 2.0), (-1.0, 1.0), (-1.0, 1.0), (-3.0, 3.0), (-10.0, 10.0)]).unwrap();
        SystemDefinition::new(ActionPolynomial::zero(5), f, a, 1.0, dom).unwrap()
    }

    #[test]
    fn pendulum_reduces_to_two_degrees_of_freedom() {
        let sys = pendulum_system();
        let verdict = is_strongly_hamiltonian(&sys.f, &sys.c_tensor());
        let lattice = common_kernel_lattice(&sys.c_tensor(), &sys.domain, &KernelSampling::default()).unwrap();
        let red = reduce(&sys, &verdict, &lattice, &[vec![1.0, 0.5, -0.25], vec![1.5, 0.0, 0.0]]).unwrap();
        assert_eq!(red.len(), 2);
        for r in &red {
            assert_eq!(r.kept, vec![3, 4]);
            assert_eq!(r.removed, vec![0, 1, 2]);
            assert_eq!(r.dof(), 2);
            assert!(r.structure.is_zero());
            let expect = parse_series("a1^2/2 + a2 - (1 + cos(alpha2))*cos(alpha1)", 2).unwrap();
            assert!((&r.f - &expect).is_zero());
            assert!(r.reconstruction.iter().all(|s| s.is_zero()));
        }
    }

    #[test]
    fn synthetic_reconstruction_rate() {
        // kept I = a3, removed J = (a1, a2, a4); B = A[3, 1] = 1
        let a = StructureMatrixField::from_upper(4, &[((0, 1), var(4, 3)), ((0, 2), ActionPolynomial::constant(4, rat(-1)))]).unwrap();
        let f = parse_series("a3*a1 + cos(alpha3)", 4).unwrap();
        let sys = SystemDefinition::new(ActionPolynomial::zero(4), f, a, 1.0, ActionDomain::unbounded(4)).unwrap();
        let verdict = is_strongly_hamiltonian(&sys.f, &sys.c_tensor());
        assert!(verdict.verdict);
        let lattice = common_kernel_lattice(&sys.c_tensor(), &sys.domain, &KernelSampling::default()).unwrap();
        let red = reduce(&sys, &verdict, &lattice, &[vec![0.7, -0.3, 1.2]]).unwrap().remove(0);
        assert_eq!(red.kept, vec![2]);
        assert_eq!(red.coupling[0][0].as_constant(), Some(rat(1)));
        let state = PhaseState::new(vec![2.0], vec![std::f64::consts::FRAC_PI_2]);
        let rate = red.reconstruction_rate(&state).unwrap();
        assert!((rate[0] - 3.0).abs() < 1e-14, "{rate:?}");
        let direct = reconstruction_rhs(&sys, &red, &state).unwrap();
        for (x, y) in rate.iter().zip(&direct) {
            assert!((x - y).abs() < 1e-14);
        }
        let err = consistency_error(&sys, &red, &state, &[0.1, 0.2, 0.3], 20.0, &Dop853::default(), 50).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn contract_violations() {
        let sys = pendulum_system();
        let lattice = IntegerLattice::new(5, vec![vec![0, 0, 0, 1, 0], vec![0, 0, 0, 0, 1]]).unwrap();
        let bad = StrongHamiltonianVerdict { verdict: false, witnesses: vec![] };
        assert!(matches!(reduce(&sys, &bad, &lattice, &[]), Err(Error::Contract(_))));
        let ok = is_strongly_hamiltonian(&sys.f, &sys.c_tensor());
        let skew = IntegerLattice::new(5, vec![vec![0, 0, 0, 1, 1]]).unwrap();
        assert!(matches!(reduce(&sys, &ok, &skew, &[]), Err(Error::Contract(_))));
        let _ = parse_polynomial("a1", 5).unwrap();
    }
}
