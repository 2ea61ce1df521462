use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::poly::{rational_from_f64, rational_to_f64, ActionPolynomial, Rational};
use crate::structure::{c_tensor, CTensorField, StructureMatrixField};

use super::field::{hamiltonian_vector_field, VectorFieldSpec};

/// A point `(a, alpha)` of `A x T^n`. Angles may be lifted to the universal
/// cover.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct PhaseState {
    pub a: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl PhaseState {
    pub fn new(a: Vec<f64>, alpha: Vec<f64>) -> Self {
        assert_eq!(a.len(), alpha.len(), "action/angle dimension mismatch");
        Self { a, alpha }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Flat `[a_1..a_n, alpha_1..alpha_n]` layout used by the integrator.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.a.clone();
        v.extend_from_slice(&self.alpha);
        v
    }

    pub fn from_slice(y: &[f64]) -> Self {
        let n = y.len() / 2;
        Self { a: y[..n].to_vec(), alpha: y[n..].to_vec() }
    }

    /// Angles reduced to `[0, 2 pi)`.
    pub fn wrapped(&self) -> Self {
        Self { a: self.a.clone(), alpha: self.alpha.iter().map(|&x| wrap_angle(x)).collect() }
    }
}

pub fn wrap_angle(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = x.rem_euclid(tau);
    if r >= tau {
        0.0
    } else {
        r
    }
}

/// Affine map `x -> M x + m` from the current action coordinates to the
/// coordinates in which a domain box is stated.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineChart {
    pub matrix: Vec<Vec<Rational>>,
    pub offset: Vec<Rational>,
}

impl AffineChart {
    fn apply(&self, a: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, m)| row.iter().zip(a).map(|(c, x)| rational_to_f64(c) * x).sum::<f64>() + rational_to_f64(m))
            .collect()
    }

    fn is_identity(&self) -> bool {
        let n = self.matrix.len();
        self.offset.iter().all(|m| *m == Rational::from_integer(0.into()))
            && (0..n).all(|i| {
                (0..n).all(|j| {
                    self.matrix[i][j] == Rational::from_integer(if i == j { 1 } else { 0 }.into())
                })
            })
    }

    /// `self` after `inner`: `x -> self(inner(x))`.
    pub fn compose(&self, inner: &AffineChart) -> AffineChart {
        let n = inner.matrix.len();
        let zero = Rational::from_integer(0.into());
        let mut matrix = vec![vec![zero.clone(); n]; self.matrix.len()];
        let mut offset = self.offset.clone();
        for (i, row) in self.matrix.iter().enumerate() {
            for (l, c) in row.iter().enumerate() {
                for j in 0..n {
                    matrix[i][j] += c * &inner.matrix[l][j];
                }
                offset[i] += c * &inner.offset[l];
            }
        }
        AffineChart { matrix, offset }
    }
}

/// Admissible action region: a box, possibly stated in other coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionDomain {
    bounds: Vec<(f64, f64)>,
    chart: Option<AffineChart>,
    chart_f64: Option<Vec<Vec<f64>>>,
}

impl ActionDomain {
    pub fn from_box(bounds: Vec<(f64, f64)>) -> Result<Self> {
        for (i, (lo, hi)) in bounds.iter().enumerate() {
            if !(lo <= hi) {
                return Err(Error::Validation(format!("empty domain interval for a{}: [{lo}, {hi}]", i + 1)));
            }
        }
        Ok(Self { bounds, chart: None, chart_f64: None })
    }

    /// The whole of `R^n`.
    pub fn unbounded(n: usize) -> Self {
        Self { bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n], chart: None, chart_f64: None }
    }

    pub fn n(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn chart(&self) -> Option<&AffineChart> {
        self.chart.as_ref()
    }

    pub fn is_box(&self) -> bool {
        self.chart.is_none()
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        let inside = |x: &[f64]| x.iter().zip(&self.bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi);
        match &self.chart {
            None => inside(a),
            Some(c) => inside(&c.apply(a)),
        }
    }

    /// Re-express the domain after the action change `a = pullback(a_new)`.
    pub fn pulled_back(&self, pullback: &AffineChart) -> Self {
        let chart = match &self.chart {
            None => pullback.clone(),
            Some(c) => c.compose(pullback),
        };
        let chart = (!chart.is_identity()).then_some(chart);
        let chart_f64 = chart.as_ref().map(|c| c.matrix.iter().map(|r| r.iter().map(rational_to_f64).collect()).collect());
        Self { bounds: self.bounds.clone(), chart, chart_f64 }
    }

    /// Uniform random point (only for plain boxes with finite bounds).
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> Option<Vec<f64>> {
        if self.chart.is_some() {
            return None;
        }
        self.bounds
            .iter()
            .map(|&(lo, hi)| (lo.is_finite() && hi.is_finite()).then(|| if lo == hi { lo } else { rng.gen_range(lo..=hi) }))
            .collect()
    }

    /// Sub-box on the given coordinates (plain boxes only).
    pub fn restrict_to(&self, indices: &[usize]) -> Result<Self> {
        if self.chart.is_some() {
            return Err(Error::Validation("cannot restrict a domain stated in other coordinates".into()));
        }
        Self::from_box(indices.iter().map(|&i| self.bounds[i]).collect())
    }

    pub fn center(&self) -> Option<Vec<f64>> {
        if self.chart.is_some() {
            return None;
        }
        self.bounds.iter().map(|&(lo, hi)| (lo.is_finite() && hi.is_finite()).then_some(0.5 * (lo + hi))).collect()
    }

    #[allow(dead_code)]
    pub(crate) fn chart_matrix_f64(&self) -> Option<&Vec<Vec<f64>>> {
        self.chart_f64.as_ref()
    }
}

/// `h(a) + eps f(a, alpha)` on `(A x T^n, sigma_A)`.
#[derive(Clone, Debug)]
pub struct SystemDefinition {
    pub n: usize,
    pub k: ActionPolynomial,
    pub f: FourierSeries,
    pub structure: StructureMatrixField,
    pub epsilon: f64,
    pub domain: ActionDomain,
}

impl SystemDefinition {
    pub fn new(
        k: ActionPolynomial,
        f: FourierSeries,
        structure: StructureMatrixField,
        epsilon: f64,
        domain: ActionDomain,
    ) -> Result<Self> {
        let n = k.n();
        for d in [f.n(), structure.n(), domain.n()] {
            if d != n {
                return Err(Error::DimensionMismatch { expected: n, got: d });
            }
        }
        if !epsilon.is_finite() {
            return Err(Error::Validation("epsilon must be finite".into()));
        }
        Ok(Self { n, k, f, structure, epsilon, domain })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    /// The frequency map `omega = grad k`.
    pub fn frequency_map(&self) -> Vec<ActionPolynomial> {
        self.k.gradient()
    }

    /// Exact `k + eps f` (eps taken as the exact binary value of the float).
    pub fn hamiltonian(&self) -> FourierSeries {
        let eps = rational_from_f64(self.epsilon).expect("finite epsilon");
        &FourierSeries::from_poly(self.k.clone()) + &self.f.scale(&eps)
    }

    pub fn vector_field(&self) -> VectorFieldSpec {
        hamiltonian_vector_field(&self.hamiltonian(), &self.structure).expect("dimensions checked on construction")
    }

    pub fn c_tensor(&self) -> CTensorField {
        c_tensor(&self.structure)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;

    #[test]
    fn wrap_into_fundamental_domain() {
        let tau = std::f64::consts::TAU;
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(-0.5) - (tau - 0.5)).abs() < 1e-15);
        assert!((wrap_angle(3.0 * tau + 1.0) - 1.0).abs() < 1e-12);
        assert!(wrap_angle(-1e-300) < tau);
    }

    #[test]
    fn domain_box_and_chart() {
        let d = ActionDomain::from_box(vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap();
        assert!(d.contains(&[0.5, 0.0]));
        assert!(!d.contains(&[1.5, 0.0]));
        // new coordinates b = (a1 + a2, a2), so a = (b1 - b2, b2)
        let pull = AffineChart {
            matrix: vec![vec![rat(1), rat(-1)], vec![rat(0), rat(1)]],
            offset: vec![rat(0), rat(0)],
        };
        let d2 = d.pulled_back(&pull);
        assert!(d2.contains(&[1.5, 0.9]));
        assert!(!d2.contains(&[0.5, -0.9]));
        assert!(ActionDomain::from_box(vec![(1.0, 0.0)]).is_err());
    }
}
