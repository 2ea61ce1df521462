use crate::error::{Error, Result};
use crate::fourier::{CompiledSeries, FourierSeries};
use crate::structure::StructureMatrixField;

use super::integrator::OdeSystem;
use super::system::PhaseState;

/// Symbolic vector field on `A x T^n`: `n` action components followed by
/// `n` angle components, each a Fourier series.
#[derive(Clone, Debug)]
pub struct VectorFieldSpec {
    pub n: usize,
    pub action: Vec<FourierSeries>,
    pub angle: Vec<FourierSeries>,
}

impl VectorFieldSpec {
    pub fn components(&self) -> impl Iterator<Item = &FourierSeries> {
        self.action.iter().chain(&self.angle)
    }

    pub fn compile(&self) -> CompiledField {
        let all: Vec<&FourierSeries> = self.components().collect();
        CompiledField { n: self.n, series: CompiledSeries::new(&all) }
    }

    /// Evaluate at a point, returning `(da, dalpha)`.
    pub fn eval(&self, x: &PhaseState) -> Result<(Vec<f64>, Vec<f64>)> {
        let a = self.action.iter().map(|s| s.eval(&x.a, &x.alpha)).collect::<Result<_>>()?;
        let b = self.angle.iter().map(|s| s.eval(&x.a, &x.alpha)).collect::<Result<_>>()?;
        Ok((a, b))
    }
}

/// Hamiltonian vector field of `g` for `sigma_A`:
/// `a' = -dg/dalpha`, `alpha' = dg/da + A dg/dalpha`.
pub fn hamiltonian_vector_field(g: &FourierSeries, a: &StructureMatrixField) -> Result<VectorFieldSpec> {
    let n = g.n();
    if a.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.n() });
    }
    let d_alpha = g.angle_gradient();
    let d_a = g.action_gradient();
    let action = d_alpha.iter().map(|s| -s).collect();
    let angle = (0..n)
        .map(|i| {
            let mut out = d_a[i].clone();
            for (j, gj) in d_alpha.iter().enumerate() {
                let aij = a.entry(i, j);
                if !aij.is_zero() && !gj.is_zero() {
                    out = &out + &gj.mul_poly(&aij);
                }
            }
            out
        })
        .collect();
    Ok(VectorFieldSpec { n, action, angle })
}

/// Liouville divergence `sum_i dX^{a_i}/da_i + dX^{alpha_i}/dalpha_i`.
pub fn divergence(x: &VectorFieldSpec) -> FourierSeries {
    use crate::fourier::Variable;
    let mut out = FourierSeries::zero(x.n);
    for i in 0..x.n {
        out = &out + &x.action[i].derivative(Variable::Action(i));
        out = &out + &x.angle[i].derivative(Variable::Angle(i));
    }
    out
}

/// Float right-hand side over the state layout `[a, alpha]`.
#[derive(Clone, Debug)]
pub struct CompiledField {
    n: usize,
    series: CompiledSeries,
}

impl CompiledField {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eval_state(&self, x: &PhaseState) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.n];
        self.series.eval_into(&x.a, &x.alpha, &mut out);
        out
    }
}

impl OdeSystem for CompiledField {
    fn dim(&self) -> usize {
        2 * self.n
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let (a, alpha) = y.split_at(self.n);
        self.series.eval_into(a, alpha, dy);
    }
}
