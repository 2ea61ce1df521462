//! Finitely supported Fourier series on `A x T^n` whose harmonics carry
//! exact polynomial dependence on the actions:
//!
//! ```text
//! f(a, alpha) = sum_nu  fhat_nu(a) * exp(i nu . alpha)
//! ```
//!
//! Storage always holds both `nu` and `-nu` with conjugate coefficients, so
//! every series built through the public API is real-valued.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{rat, ratio, ActionPolynomial, CompiledPoly, Rational};
use crate::structure::StructureMatrixField;

/// Integer frequency vector `nu`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<i64>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        Self(v)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    /// `|nu| = sum |nu_i|`.
    pub fn order(&self) -> u64 {
        self.0.iter().map(|x| x.unsigned_abs()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    /// Representative of the pair `{nu, -nu}`: the first nonzero entry is
    /// positive (the zero vector is its own representative).
    pub fn is_canonical(&self) -> bool {
        self.0.iter().find(|&&x| x != 0).is_none_or(|&x| x > 0)
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&k, &v)| k as f64 * v).sum()
    }

    pub fn dot_exact(&self, x: &[Rational]) -> Rational {
        self.0
            .iter()
            .zip(x)
            .filter(|(&k, _)| k != 0)
            .map(|(&k, v)| v * rat(k))
            .fold(Rational::zero(), |a, b| a + b)
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }
}

impl Neg for &MultiIndex {
    type Output = MultiIndex;
    fn neg(self) -> MultiIndex {
        MultiIndex(self.0.iter().map(|x| -x).collect())
    }
}

impl Add for &MultiIndex {
    type Output = MultiIndex;
    fn add(self, rhs: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<Vec<i64>> for MultiIndex {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

/// Complex coefficient with polynomial real and imaginary parts.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ComplexPoly {
    pub re: ActionPolynomial,
    pub im: ActionPolynomial,
}

impl ComplexPoly {
    pub fn zero(n: usize) -> Self {
        Self { re: ActionPolynomial::zero(n), im: ActionPolynomial::zero(n) }
    }

    pub fn real(re: ActionPolynomial) -> Self {
        let n = re.n();
        Self { re, im: ActionPolynomial::zero(n) }
    }

    pub fn new(re: ActionPolynomial, im: ActionPolynomial) -> Self {
        assert_eq!(re.n(), im.n());
        Self { re, im }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: -&self.im }
    }

    /// Multiply by the Gaussian rational `x + i y`.
    pub fn scale_complex(&self, x: &Rational, y: &Rational) -> Self {
        Self {
            re: &self.re.scale(x) - &self.im.scale(y),
            im: &self.re.scale(y) + &self.im.scale(x),
        }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self { re: self.re.scale(c), im: self.im.scale(c) }
    }

    pub fn mul_poly(&self, p: &ActionPolynomial) -> Self {
        Self { re: &self.re * p, im: &self.im * p }
    }

    pub fn derivative(&self, var: usize) -> Self {
        Self { re: self.re.derivative(var), im: self.im.derivative(var) }
    }

    pub fn eval(&self, a: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(a), self.im.eval(a))
    }

    pub fn eval_exact(&self, a: &[Rational]) -> (Rational, Rational) {
        (self.re.eval_exact(a), self.im.eval_exact(a))
    }
}

impl Add for &ComplexPoly {
    type Output = ComplexPoly;
    fn add(self, rhs: &ComplexPoly) -> ComplexPoly {
        ComplexPoly { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl Mul for &ComplexPoly {
    type Output = ComplexPoly;
    fn mul(self, rhs: &ComplexPoly) -> ComplexPoly {
        ComplexPoly {
            re: &(&self.re * &rhs.re) - &(&self.im * &rhs.im),
            im: &(&self.re * &rhs.im) + &(&self.im * &rhs.re),
        }
    }
}

/// Which variable to differentiate with respect to (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variable {
    Action(usize),
    Angle(usize),
}

/// A set of frequency vectors used by [`FourierSeries::project`].
pub trait HarmonicSelector {
    fn contains(&self, nu: &MultiIndex) -> bool;
}

impl HarmonicSelector for BTreeSet<MultiIndex> {
    fn contains(&self, nu: &MultiIndex) -> bool {
        BTreeSet::contains(self, nu)
    }
}

impl HarmonicSelector for HashSet<MultiIndex> {
    fn contains(&self, nu: &MultiIndex) -> bool {
        HashSet::contains(self, nu)
    }
}

impl<F: Fn(&MultiIndex) -> bool> HarmonicSelector for F {
    fn contains(&self, nu: &MultiIndex) -> bool {
        self(nu)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct FourierSeries {
    n: usize,
    coeffs: BTreeMap<MultiIndex, ComplexPoly>,
}

impl FourierSeries {
    pub fn zero(n: usize) -> Self {
        Self { n, coeffs: BTreeMap::new() }
    }

    /// Angle-independent series.
    pub fn from_poly(p: ActionPolynomial) -> Self {
        let mut s = Self::zero(p.n());
        s.insert_raw(MultiIndex::zero(p.n()), ComplexPoly::real(p));
        s
    }

    pub fn constant(n: usize, c: Rational) -> Self {
        Self::from_poly(ActionPolynomial::constant(n, c))
    }

    /// `p(a) * cos(nu . alpha)`.
    pub fn cos(nu: MultiIndex, p: ActionPolynomial) -> Self {
        assert_eq!(nu.n(), p.n(), "frequency/polynomial dimension mismatch");
        if nu.is_zero() {
            return Self::from_poly(p);
        }
        let mut s = Self::zero(p.n());
        s.add_coefficient(nu, ComplexPoly::real(p.scale(&ratio(1, 2)))).expect("nonzero nu");
        s
    }

    /// `p(a) * sin(nu . alpha)`.
    pub fn sin(nu: MultiIndex, p: ActionPolynomial) -> Self {
        assert_eq!(nu.n(), p.n(), "frequency/polynomial dimension mismatch");
        let n = p.n();
        if nu.is_zero() {
            return Self::zero(n);
        }
        let mut s = Self::zero(n);
        // sin t = (e^{it} - e^{-it}) / 2i, so the coefficient at nu is -i p / 2
        let c = ComplexPoly::new(ActionPolynomial::zero(n), p.scale(&ratio(-1, 2)));
        s.add_coefficient(nu, c).expect("nonzero nu");
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Every stored harmonic, both members of each `+-nu` pair.
    pub fn harmonics(&self) -> impl Iterator<Item = (&MultiIndex, &ComplexPoly)> {
        self.coeffs.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &MultiIndex> {
        self.coeffs.keys()
    }

    pub fn num_harmonics(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coefficient(&self, nu: &MultiIndex) -> Option<&ComplexPoly> {
        self.coeffs.get(nu)
    }

    /// Largest `|nu|` present (0 for the zero series).
    pub fn max_order(&self) -> u64 {
        self.coeffs.keys().map(MultiIndex::order).max().unwrap_or(0)
    }

    pub fn is_angle_independent(&self) -> bool {
        self.coeffs.keys().all(MultiIndex::is_zero)
    }

    pub fn depends_on_angle(&self, i: usize) -> bool {
        self.coeffs.keys().any(|nu| nu.0[i] != 0)
    }

    /// The angle average `fhat_0(a)`.
    pub fn mean(&self) -> ActionPolynomial {
        self.coeffs
            .get(&MultiIndex::zero(self.n))
            .map(|c| c.re.clone())
            .unwrap_or_else(|| ActionPolynomial::zero(self.n))
    }

    /// Add `c exp(i nu.alpha)` together with its conjugate at `-nu`.
    /// At `nu = 0` the coefficient must be real.
    pub fn add_coefficient(&mut self, nu: MultiIndex, c: ComplexPoly) -> Result<()> {
        if nu.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: nu.n() });
        }
        if c.re.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: c.re.n() });
        }
        if nu.is_zero() {
            if !c.im.is_zero() {
                return Err(Error::Validation(
                    "the nu = 0 coefficient of a real series must be real".into(),
                ));
            }
            self.insert_raw(nu, c);
        } else {
            let conj = c.conj();
            let neg = -&nu;
            self.insert_raw(nu, c);
            self.insert_raw(neg, conj);
        }
        Ok(())
    }

    /// Accumulate into one slot without touching its partner. Callers keep
    /// Hermitian symmetry themselves.
    fn insert_raw(&mut self, nu: MultiIndex, c: ComplexPoly) {
        if c.is_zero() {
            return;
        }
        match self.coeffs.entry(nu) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + &c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    /// Rebuild by mapping every harmonic; the map must itself respect the
    /// Hermitian pairing (`(-nu, conj c)` maps to `(-nu', conj c')`).
    pub fn map_harmonics<F>(&self, n_out: usize, mut f: F) -> Self
    where
        F: FnMut(&MultiIndex, &ComplexPoly) -> (MultiIndex, ComplexPoly),
    {
        let mut out = Self::zero(n_out);
        for (nu, c) in &self.coeffs {
            let (nu2, c2) = f(nu, c);
            out.insert_raw(nu2, c2);
        }
        out
    }

    pub fn filter<F: Fn(&MultiIndex) -> bool>(&self, keep: F) -> Self {
        Self {
            n: self.n,
            coeffs: self.coeffs.iter().filter(|(nu, _)| keep(nu)).map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }

    /// `f^{<=N}`: harmonics with `|nu| <= N`.
    pub fn truncate(&self, cutoff: u64) -> Self {
        self.filter(|nu| nu.order() <= cutoff)
    }

    /// `f^{>N} = f - f^{<=N}`.
    pub fn ultraviolet(&self, cutoff: u64) -> Self {
        self.filter(|nu| nu.order() > cutoff)
    }

    /// Keep exactly the harmonics whose frequency lies in `lambda`. For a
    /// selector that is not symmetric under `nu -> -nu` the result keeps
    /// a harmonic only when both `nu` and `-nu` are selected, so the output
    /// stays real.
    pub fn project<S: HarmonicSelector + ?Sized>(&self, lambda: &S) -> Self {
        self.filter(|nu| lambda.contains(nu) && lambda.contains(&-nu))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        self.map_harmonics(self.n, |nu, p| (nu.clone(), p.scale(c)))
    }

    pub fn mul_poly(&self, p: &ActionPolynomial) -> Self {
        self.map_harmonics(self.n, |nu, c| (nu.clone(), c.mul_poly(p)))
    }

    pub fn derivative(&self, var: Variable) -> Self {
        match var {
            Variable::Action(k) => {
                assert!(k < self.n, "action index out of range");
                self.map_harmonics(self.n, |nu, c| (nu.clone(), c.derivative(k)))
            }
            Variable::Angle(k) => {
                assert!(k < self.n, "angle index out of range");
                // d/dalpha_k multiplies harmonic nu by i nu_k
                self.map_harmonics(self.n, |nu, c| {
                    (nu.clone(), c.scale_complex(&Rational::zero(), &rat(nu.0[k])))
                })
            }
        }
    }

    pub fn action_gradient(&self) -> Vec<Self> {
        (0..self.n).map(|k| self.derivative(Variable::Action(k))).collect()
    }

    pub fn angle_gradient(&self) -> Vec<Self> {
        (0..self.n).map(|k| self.derivative(Variable::Angle(k))).collect()
    }

    fn check_dims(&self, a: &[f64], alpha: &[f64]) -> Result<()> {
        if a.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: a.len() });
        }
        if alpha.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: alpha.len() });
        }
        Ok(())
    }

    /// Full complex sum over every stored harmonic. The imaginary part is
    /// rounding noise for any series built through the public API.
    pub fn eval_complex(&self, a: &[f64], alpha: &[f64]) -> Result<Complex64> {
        self.check_dims(a, alpha)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (nu, c) in &self.coeffs {
            let theta = nu.dot(alpha);
            acc += c.eval(a) * Complex64::new(theta.cos(), theta.sin());
        }
        Ok(acc)
    }

    pub fn eval(&self, a: &[f64], alpha: &[f64]) -> Result<f64> {
        self.check_dims(a, alpha)?;
        let mut acc = 0.0;
        for (nu, c) in &self.coeffs {
            if !nu.is_canonical() {
                continue;
            }
            let theta = nu.dot(alpha);
            let re = c.re.eval(a);
            let im = c.im.eval(a);
            let w = if nu.is_zero() { 1.0 } else { 2.0 };
            acc += w * (re * theta.cos() - im * theta.sin());
        }
        Ok(acc)
    }

    /// `Sp(f, a)`: frequencies whose coefficient modulus at `a` exceeds `tol`.
    pub fn spectrum(&self, a: &[f64], tol: f64) -> Result<BTreeSet<MultiIndex>> {
        if a.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: a.len() });
        }
        Ok(self
            .coeffs
            .iter()
            .filter(|(_, c)| c.eval(a).norm() > tol)
            .map(|(nu, _)| nu.clone())
            .collect())
    }

    /// Exact spectrum at a rational point.
    pub fn spectrum_exact(&self, a: &[Rational]) -> Result<BTreeSet<MultiIndex>> {
        if a.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: a.len() });
        }
        Ok(self
            .coeffs
            .iter()
            .filter(|(_, c)| {
                let (re, im) = c.eval_exact(a);
                !(re.is_zero() && im.is_zero())
            })
            .map(|(nu, _)| nu.clone())
            .collect())
    }

    pub fn compile(&self) -> CompiledSeries {
        CompiledSeries::new(&[self])
    }

    /// Canonical-half term list, the serialized form.
    pub fn to_terms(&self) -> Vec<FourierTerm> {
        self.coeffs
            .iter()
            .filter(|(nu, _)| nu.is_canonical())
            .map(|(nu, c)| FourierTerm { nu: nu.0.clone(), re: c.re.to_string(), im: c.im.to_string() })
            .collect()
    }

    /// Each term contributes its coefficient at `nu` and the conjugate at
    /// `-nu`; repeated frequencies accumulate.
    pub fn from_terms(n: usize, terms: &[FourierTerm]) -> Result<Self> {
        let mut s = Self::zero(n);
        for t in terms {
            let re = crate::expr::parse_polynomial(&t.re, n)?;
            let im = crate::expr::parse_polynomial(&t.im, n)?;
            s.add_coefficient(MultiIndex(t.nu.clone()), ComplexPoly::new(re, im))?;
        }
        Ok(s)
    }
}

/// Serialized harmonic: `{"nu": [...], "re": "<poly>", "im": "<poly>"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub nu: Vec<i64>,
    pub re: String,
    #[serde(default = "zero_string")]
    pub im: String,
}

fn zero_string() -> String {
    "0".into()
}

impl Add for &FourierSeries {
    type Output = FourierSeries;
    fn add(self, rhs: &FourierSeries) -> FourierSeries {
        assert_eq!(self.n, rhs.n, "series dimension mismatch");
        let mut out = self.clone();
        for (nu, c) in &rhs.coeffs {
            out.insert_raw(nu.clone(), c.clone());
        }
        out
    }
}

impl Sub for &FourierSeries {
    type Output = FourierSeries;
    fn sub(self, rhs: &FourierSeries) -> FourierSeries {
        self + &(-rhs)
    }
}

impl Neg for &FourierSeries {
    type Output = FourierSeries;
    fn neg(self) -> FourierSeries {
        self.scale(&-Rational::one())
    }
}

impl Mul for &FourierSeries {
    type Output = FourierSeries;
    fn mul(self, rhs: &FourierSeries) -> FourierSeries {
        assert_eq!(self.n, rhs.n, "series dimension mismatch");
        let mut out = FourierSeries::zero(self.n);
        for (nu1, c1) in &self.coeffs {
            for (nu2, c2) in &rhs.coeffs {
                out.insert_raw(nu1 + nu2, c1 * c2);
            }
        }
        out
    }
}

impl fmt::Debug for FourierSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FourierSeries[n={}] {{", self.n)?;
        for (nu, c) in &self.coeffs {
            write!(f, " {:?}: ({}) + i({});", nu, c.re, c.im)?;
        }
        write!(f, " }}")
    }
}

/// Almost-Poisson bracket in action-angle coordinates:
///
/// ```text
/// {f,g} = sum_i (df/da_i dg/dalpha_i - df/dalpha_i dg/da_i)
///       + sum_ij A_ij df/dalpha_i dg/dalpha_j
/// ```
pub fn bracket_aa(f: &FourierSeries, g: &FourierSeries, a: &StructureMatrixField) -> Result<FourierSeries> {
    let n = f.n();
    for d in [g.n(), a.n()] {
        if d != n {
            return Err(Error::DimensionMismatch { expected: n, got: d });
        }
    }
    let fa = f.action_gradient();
    let fq = f.angle_gradient();
    let ga = g.action_gradient();
    let gq = g.angle_gradient();
    let mut out = FourierSeries::zero(n);
    for i in 0..n {
        out = &out + &(&fa[i] * &gq[i]);
        out = &out - &(&fq[i] * &ga[i]);
    }
    for i in 0..n {
        if fq[i].is_zero() {
            continue;
        }
        for j in 0..n {
            let aij = a.entry(i, j);
            if aij.is_zero() || gq[j].is_zero() {
                continue;
            }
            out = &out + &(&fq[i] * &gq[j]).mul_poly(&aij);
        }
    }
    Ok(out)
}

/// Float evaluator for a family of series that share one table of phases,
/// e.g. the `2n` components of a vector field.
#[derive(Clone, Debug)]
pub struct CompiledSeries {
    harmonics: Vec<Vec<(usize, i64)>>,
    /// Per series: angle-independent part and `(harmonic, P_cos, P_sin)`
    /// triples contributing `P_cos cos(theta) + P_sin sin(theta)`.
    members: Vec<(CompiledPoly, Vec<(usize, CompiledPoly, CompiledPoly)>)>,
}

impl CompiledSeries {
    pub fn new(series: &[&FourierSeries]) -> Self {
        let mut index: BTreeMap<MultiIndex, usize> = BTreeMap::new();
        let mut harmonics = Vec::new();
        let mut members = Vec::with_capacity(series.len());
        for s in series {
            let mut mean = ActionPolynomial::zero(s.n());
            let mut terms = Vec::new();
            for (nu, c) in &s.coeffs {
                if nu.is_zero() {
                    mean = c.re.clone();
                    continue;
                }
                if !nu.is_canonical() {
                    continue;
                }
                let h = *index.entry(nu.clone()).or_insert_with(|| {
                    harmonics.push(nu.0.iter().enumerate().filter(|(_, &k)| k != 0).map(|(i, &k)| (i, k)).collect());
                    harmonics.len() - 1
                });
                // c e^{it} + conj(c) e^{-it} = 2 re cos t - 2 im sin t
                let pc = c.re.scale(&rat(2)).compile();
                let ps = c.im.scale(&rat(-2)).compile();
                terms.push((h, pc, ps));
            }
            members.push((mean.compile(), terms));
        }
        Self { harmonics, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Evaluate every member at `(a, alpha)` into `out`.
    pub fn eval_into(&self, a: &[f64], alpha: &[f64], out: &mut [f64]) {
        let mut cs = Vec::with_capacity(self.harmonics.len());
        for h in &self.harmonics {
            let theta: f64 = h.iter().map(|&(i, k)| k as f64 * alpha[i]).sum();
            cs.push(theta.sin_cos());
        }
        for (o, (mean, terms)) in out.iter_mut().zip(&self.members) {
            let mut acc = mean.eval(a);
            for (h, pc, ps) in terms {
                let (s, c) = cs[*h];
                if !pc.is_zero() {
                    acc += pc.eval(a) * c;
                }
                if !ps.is_zero() {
                    acc += ps.eval(a) * s;
                }
            }
            *o = acc;
        }
    }

    pub fn eval(&self, a: &[f64], alpha: &[f64]) -> f64 {
        let mut out = vec![0.0; self.members.len()];
        self.eval_into(a, alpha, &mut out);
        out[0]
    }
}
