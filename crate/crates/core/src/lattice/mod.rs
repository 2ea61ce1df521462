//! Integer lattices of resonant frequencies, unimodular changes of
//! action-angle coordinates, and torus reduction.

mod reduce;
pub mod snf;

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::dynamics::{ActionDomain, AffineChart, SystemDefinition};
use crate::error::{Error, Result};
use crate::fourier::{ComplexPoly, FourierSeries, HarmonicSelector, MultiIndex};
use crate::poly::{rat, ActionPolynomial, Rational};
use crate::structure::{CTensorField, StructureMatrixField};

pub use reduce::{consistency_error, reconstruction_rhs, reduce, ReducedSystem, ReducedSystemReport};
use snf::{determinant, hermite_rows, smith, IntMatrix};

fn to_i64(x: &BigInt) -> Result<i64> {
    x.to_i64().ok_or_else(|| Error::Contract(format!("integer {x} does not fit in 64 bits")))
}

fn vec_to_big(v: &[i64]) -> Vec<BigInt> {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

/// Sublattice of `Z^n` given by linearly independent integer vectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "LatticeJson", into = "LatticeJson")]
pub struct IntegerLattice {
    n: usize,
    basis: Vec<Vec<i64>>,
    /// Canonical (Hermite) basis, used for equality and membership.
    hermite: Vec<Vec<i64>>,
    /// Rows spanning the integer annihilator of the rational span.
    annihilator: Vec<Vec<i64>>,
    divisors: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct LatticeJson {
    n: usize,
    rank: usize,
    basis: Vec<Vec<i64>>,
}

impl TryFrom<LatticeJson> for IntegerLattice {
    type Error = Error;
    fn try_from(j: LatticeJson) -> Result<Self> {
        let l = IntegerLattice::new(j.n, j.basis)?;
        if l.rank() != j.rank {
            return Err(Error::Validation(format!("rank field {} does not match basis rank {}", j.rank, l.rank())));
        }
        Ok(l)
    }
}

impl From<IntegerLattice> for LatticeJson {
    fn from(l: IntegerLattice) -> Self {
        LatticeJson { n: l.n, rank: l.rank(), basis: l.basis }
    }
}

impl PartialEq for IntegerLattice {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.hermite == other.hermite
    }
}

impl Eq for IntegerLattice {}

impl IntegerLattice {
    /// Lattice spanned by `basis`; the vectors must be linearly independent.
    pub fn new(n: usize, basis: Vec<Vec<i64>>) -> Result<Self> {
        for b in &basis {
            if b.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: b.len() });
            }
        }
        // columns of the n x r basis matrix
        let r = basis.len();
        let cols: IntMatrix = (0..n).map(|i| (0..r).map(|j| BigInt::from(basis[j][i])).collect()).collect();
        let s = smith(&cols);
        if s.rank() != r {
            return Err(Error::Validation("lattice basis vectors are linearly dependent".into()));
        }
        let annihilator = s.u[r..].iter().map(|row| row.iter().map(to_i64).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
        let divisors = s.diagonal.iter().map(to_i64).collect::<Result<_>>()?;
        let rows: Vec<Vec<BigInt>> = basis.iter().map(|b| vec_to_big(b)).collect();
        let hermite = hermite_rows(&rows).iter().map(|r| r.iter().map(to_i64).collect::<Result<_>>()).collect::<Result<_>>()?;
        Ok(Self { n, basis, hermite, annihilator, divisors })
    }

    pub fn full(n: usize) -> Self {
        Self::new(n, (0..n).map(|i| MultiIndex::unit(n, i).0).collect()).expect("unit basis")
    }

    pub fn zero(n: usize) -> Self {
        Self::new(n, Vec::new()).expect("empty basis")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<i64>] {
        &self.basis
    }

    /// Hermite normal form basis; identical for equal lattices.
    pub fn canonical_basis(&self) -> &[Vec<i64>] {
        &self.hermite
    }

    /// Elementary divisors of the basis matrix.
    pub fn elementary_divisors(&self) -> &[i64] {
        &self.divisors
    }

    /// Whether the lattice equals `Z^n` intersected with its rational span.
    pub fn is_saturated(&self) -> bool {
        self.divisors.iter().all(|&d| d == 1)
    }

    /// `Z^n` intersected with the rational span of the lattice.
    pub fn saturation(&self) -> Self {
        if self.is_saturated() {
            return self.clone();
        }
        let r = self.rank();
        let cols: IntMatrix = (0..self.n).map(|i| (0..r).map(|j| BigInt::from(self.basis[j][i])).collect()).collect();
        let s = smith(&cols);
        let basis: Vec<Vec<i64>> =
            (0..r).map(|j| (0..self.n).map(|i| to_i64(&s.u_inv[i][j]).expect("saturation fits in i64")).collect()).collect();
        let rows: Vec<Vec<BigInt>> = basis.iter().map(|b| vec_to_big(b)).collect();
        let canonical = hermite_rows(&rows).iter().map(|r| r.iter().map(|x| to_i64(x).unwrap()).collect()).collect();
        Self::new(self.n, canonical).expect("saturated basis is independent")
    }

    /// Whether `nu` lies in the rational span of the lattice.
    pub fn in_span(&self, nu: &[i64]) -> bool {
        nu.len() == self.n
            && self.annihilator.iter().all(|row| row.iter().zip(nu).map(|(a, b)| *a as i128 * *b as i128).sum::<i128>() == 0)
    }

    pub fn contains_vector(&self, nu: &[i64]) -> bool {
        if !self.in_span(nu) {
            return false;
        }
        if self.is_saturated() {
            return true;
        }
        let mut rows: Vec<Vec<BigInt>> = self.basis.iter().map(|b| vec_to_big(b)).collect();
        rows.push(vec_to_big(nu));
        let h: Vec<Vec<i64>> = hermite_rows(&rows).iter().map(|r| r.iter().map(|x| to_i64(x).unwrap()).collect()).collect();
        h == self.hermite
    }

    /// If the lattice is spanned by standard unit vectors, their indices.
    pub fn unit_coordinates(&self) -> Option<Vec<usize>> {
        let idx: Vec<usize> = (0..self.n).filter(|&i| self.contains_vector(&MultiIndex::unit(self.n, i).0)).collect();
        (idx.len() == self.rank()).then_some(idx)
    }
}

impl HarmonicSelector for IntegerLattice {
    fn contains(&self, nu: &MultiIndex) -> bool {
        self.contains_vector(&nu.0)
    }
}

/// Options for [`common_kernel_lattice`].
#[derive(Clone, Debug)]
pub struct KernelSampling {
    /// Initial number of sample points (at least `n`).
    pub samples: usize,
    pub seed: u64,
    /// Times the sample set may be doubled before giving up.
    pub max_rounds: usize,
}

impl Default for KernelSampling {
    fn default() -> Self {
        Self { samples: 8, seed: 0, max_rounds: 6 }
    }
}

fn random_rational<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Rational {
    let (lo, hi) = if lo.is_finite() && hi.is_finite() { (lo, hi) } else { (-10.0, 10.0) };
    let den: i64 = 997;
    let x = rng.gen_range(lo..=hi);
    Rational::new(BigInt::from((x * den as f64).round() as i64), BigInt::from(den))
}

fn sample_point<R: Rng>(rng: &mut R, domain: &ActionDomain) -> Vec<Rational> {
    if domain.is_box() {
        domain.bounds().iter().map(|&(lo, hi)| random_rational(rng, lo, hi)).collect()
    } else {
        (0..domain.n()).map(|_| random_rational(rng, -10.0, 10.0)).collect()
    }
}

/// Integer row proportional to a rational row.
fn clear_denominators(row: &[Rational]) -> Vec<BigInt> {
    let lcm = row.iter().fold(BigInt::one(), |acc, q| num_integer::Integer::lcm(&acc, q.denom()));
    row.iter().map(|q| q.numer() * (&lcm / q.denom())).collect()
}

/// Whether `sum_k C_ijk nu_k` vanishes identically for all `i < j`.
pub fn annihilates(c: &CTensorField, nu: &[i64]) -> bool {
    let n = c.n();
    (0..n).all(|i| {
        (i + 1..n).all(|j| {
            let mut acc = ActionPolynomial::zero(n);
            for (k, &nk) in nu.iter().enumerate() {
                if nk != 0 {
                    acc += &c.get(i, j, k).scale(&rat(nk));
                }
            }
            acc.is_zero()
        })
    })
}

/// The lattice of integer vectors lying in `ker C(a)` for every `a`.
///
/// Contractions are stacked at random rational points of `domain`; the
/// integer kernel of the stack is then checked exactly against the
/// polynomial identities, and the sample set grows until it passes.
pub fn common_kernel_lattice(c: &CTensorField, domain: &ActionDomain, opts: &KernelSampling) -> Result<IntegerLattice> {
    let n = c.n();
    if domain.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: domain.n() });
    }
    if c.is_zero() {
        return Ok(IntegerLattice::full(n));
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(opts.seed);
    let mut rows: IntMatrix = Vec::new();
    let mut target = opts.samples.max(n);
    let mut taken = 0;
    for _round in 0..=opts.max_rounds {
        while taken < target {
            let a = sample_point(&mut rng, domain);
            for row in c.contraction_matrix_exact(&a) {
                if row.iter().any(|q| !q.is_zero()) {
                    rows.push(clear_denominators(&row));
                }
            }
            taken += 1;
        }
        let s = smith(&rows);
        let r = s.rank();
        let kernel: Vec<Vec<i64>> =
            (r..n).map(|j| (0..n).map(|i| to_i64(&s.v[i][j])).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
        if kernel.iter().all(|nu| annihilates(c, nu)) {
            let big: Vec<Vec<BigInt>> = kernel.iter().map(|b| vec_to_big(b)).collect();
            let canonical = hermite_rows(&big).iter().map(|r| r.iter().map(to_i64).collect::<Result<_>>()).collect::<Result<_>>()?;
            return IntegerLattice::new(n, canonical);
        }
        target *= 2;
    }
    Err(Error::RankDeficient { samples: taken })
}

/// Integer affine change `a~ = Z a + z`, `alpha~ = Z^{-T} alpha`, which
/// sends a frequency `nu` to `Z nu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformJson", into = "TransformJson")]
pub struct UnimodularTransform {
    matrix: Vec<Vec<i64>>,
    inverse: Vec<Vec<i64>>,
    offset: Vec<Rational>,
}

#[derive(Serialize, Deserialize)]
struct TransformJson {
    matrix: Vec<Vec<i64>>,
    #[serde(default)]
    offset: Vec<String>,
}

impl TryFrom<TransformJson> for UnimodularTransform {
    type Error = Error;
    fn try_from(j: TransformJson) -> Result<Self> {
        let n = j.matrix.len();
        let offset = if j.offset.is_empty() {
            vec![rat(0); n]
        } else {
            j.offset
                .iter()
                .map(|s| crate::expr::parse_polynomial(s, n)?.as_constant().ok_or_else(|| Error::Validation(format!("offset {s} is not a number"))))
                .collect::<Result<_>>()?
        };
        UnimodularTransform::with_offset(j.matrix, offset)
    }
}

impl From<UnimodularTransform> for TransformJson {
    fn from(t: UnimodularTransform) -> Self {
        TransformJson { matrix: t.matrix, offset: t.offset.iter().map(|q| q.to_string()).collect() }
    }
}

impl UnimodularTransform {
    pub fn new(matrix: Vec<Vec<i64>>) -> Result<Self> {
        let n = matrix.len();
        Self::with_offset(matrix, vec![rat(0); n])
    }

    pub fn with_offset(matrix: Vec<Vec<i64>>, offset: Vec<Rational>) -> Result<Self> {
        let n = matrix.len();
        if let Some(r) = matrix.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: r.len() });
        }
        if offset.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: offset.len() });
        }
        let big = snf::to_big(&matrix);
        let det = determinant(&big);
        if det.abs() != BigInt::one() {
            return Err(Error::Validation(format!("transform matrix has determinant {det}, expected +-1")));
        }
        let inverse = integer_inverse(&big)?;
        Ok(Self { matrix, inverse, offset })
    }

    pub fn identity(n: usize) -> Self {
        Self::new((0..n).map(|i| MultiIndex::unit(n, i).0).collect()).expect("identity is unimodular")
    }

    pub fn n(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> &[Vec<i64>] {
        &self.matrix
    }

    pub fn inverse_matrix(&self) -> &[Vec<i64>] {
        &self.inverse
    }

    pub fn offset(&self) -> &[Rational] {
        &self.offset
    }

    pub fn determinant(&self) -> i64 {
        to_i64(&determinant(&snf::to_big(&self.matrix))).expect("unit determinant")
    }

    pub fn inverse(&self) -> Self {
        // a = W a~ - W z
        let offset = self
            .inverse
            .iter()
            .map(|row| -row.iter().zip(&self.offset).fold(rat(0), |acc, (w, z)| acc + rat(*w) * z))
            .collect();
        Self { matrix: self.inverse.clone(), inverse: self.matrix.clone(), offset }
    }

    /// Frequency map `nu -> Z nu`.
    pub fn map_harmonic(&self, nu: &MultiIndex) -> MultiIndex {
        MultiIndex(self.matrix.iter().map(|row| row.iter().zip(&nu.0).map(|(a, b)| a * b).sum()).collect())
    }

    pub fn map_actions(&self, a: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, z)| row.iter().zip(a).map(|(m, x)| *m as f64 * x).sum::<f64>() + crate::poly::rational_to_f64(z))
            .collect()
    }

    pub fn map_actions_exact(&self, a: &[Rational]) -> Vec<Rational> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, z)| row.iter().zip(a).fold(z.clone(), |acc, (m, x)| acc + rat(*m) * x))
            .collect()
    }

    /// `alpha~ = Z^{-T} alpha`.
    pub fn map_angles(&self, alpha: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|i| (0..n).map(|j| self.inverse[j][i] as f64 * alpha[j]).sum()).collect()
    }

    /// Old actions as polynomials in the new ones: `a = Z^{-1}(a~ - z)`.
    fn old_actions(&self) -> Vec<ActionPolynomial> {
        let n = self.n();
        self.inverse
            .iter()
            .map(|row| {
                let mut p = ActionPolynomial::zero(n);
                for (j, &w) in row.iter().enumerate() {
                    if w != 0 {
                        p += &(&ActionPolynomial::variable(n, j) - &ActionPolynomial::constant(n, self.offset[j].clone())).scale(&rat(w));
                    }
                }
                p
            })
            .collect()
    }

    fn pullback_chart(&self) -> AffineChart {
        let inv = self.inverse();
        AffineChart { matrix: inv.matrix.iter().map(|r| r.iter().map(|&x| rat(x)).collect()).collect(), offset: inv.offset }
    }

    pub fn transform_polynomial(&self, p: &ActionPolynomial) -> ActionPolynomial {
        p.compose(&self.old_actions())
    }

    pub fn transform_series(&self, f: &FourierSeries) -> FourierSeries {
        let images = self.old_actions();
        let n = self.n();
        f.map_harmonics(n, |nu, c| (self.map_harmonic(nu), ComplexPoly::new(c.re.compose(&images), c.im.compose(&images))))
    }

    /// `A~ = Z^{-T} A Z^{-1}` with entries rewritten in the new actions.
    pub fn transform_structure(&self, a: &StructureMatrixField) -> StructureMatrixField {
        let n = self.n();
        let images = self.old_actions();
        let w = &self.inverse;
        let mut out = StructureMatrixField::zero(n);
        let entries: Vec<((usize, usize), ActionPolynomial)> = a.upper_entries().map(|(&k, p)| (k, p.compose(&images))).collect();
        for i in 0..n {
            for j in i + 1..n {
                let mut acc = ActionPolynomial::zero(n);
                for ((k, l), p) in &entries {
                    // A_kl and A_lk = -A_kl
                    let c = w[*k][i] * w[*l][j] - w[*l][i] * w[*k][j];
                    if c != 0 {
                        acc += &p.scale(&rat(c));
                    }
                }
                if !acc.is_zero() {
                    out.add_entry(i, j, &acc).expect("off-diagonal entry");
                }
            }
        }
        out
    }
}

fn integer_inverse(m: &IntMatrix) -> Result<Vec<Vec<i64>>> {
    // Smith form of a unimodular matrix is the identity: U M V = I, so M^{-1} = V U
    let s = smith(m);
    let inv = snf::mat_mul(&s.v, &s.u);
    inv.iter().map(|r| r.iter().map(to_i64).collect()).collect()
}

/// Unimodular `Z` with `Z u_i = e_i` for the basis vectors `u_i` of a
/// saturated lattice.
pub fn complete_to_unimodular(lattice: &IntegerLattice) -> Result<UnimodularTransform> {
    if let Some(&d) = lattice.elementary_divisors().iter().find(|&&d| d != 1) {
        return Err(Error::Unsaturated { divisor: d });
    }
    let n = lattice.n();
    let r = lattice.rank();
    let cols: IntMatrix = (0..n).map(|i| (0..r).map(|j| BigInt::from(lattice.basis()[j][i])).collect()).collect();
    let s = smith(&cols);
    // U B V = [I; 0] gives diag(V, I) U B = [I; 0]
    let mut block = snf::identity(n);
    for i in 0..r {
        for j in 0..r {
            block[i][j] = s.v[i][j].clone();
        }
    }
    let z = snf::mat_mul(&block, &s.u);
    let matrix = z.iter().map(|r| r.iter().map(to_i64).collect()).collect::<Result<_>>()?;
    UnimodularTransform::new(matrix)
}

/// Rewrite a system in the coordinates `a~ = Z a + z`, `alpha~ = Z^{-T} alpha`.
pub fn change_action_angle(system: &SystemDefinition, t: &UnimodularTransform) -> Result<SystemDefinition> {
    if t.n() != system.n {
        return Err(Error::DimensionMismatch { expected: system.n, got: t.n() });
    }
    SystemDefinition::new(
        t.transform_polynomial(&system.k),
        t.transform_series(&system.f),
        t.transform_structure(&system.structure),
        system.epsilon,
        system.domain.pulled_back(&t.pullback_chart()),
    )
}

/// Indices of the angles a series depends on.
pub fn angle_dependence(f: &FourierSeries) -> BTreeSet<usize> {
    (0..f.n()).filter(|&i| f.depends_on_angle(i)).collect()
}
