//! Exact multivariate polynomials in the action variables.
//!
//! Coefficients are arbitrary-precision rationals, so every structural
//! computation (derivatives, brackets, the `C` tensor, classifier tests) is
//! exact. A [`CompiledPoly`] lowers a polynomial to `f64` for the numerical
//! paths (integration, sampling).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact conversion of a finite float to a rational.
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::Validation(format!("non-finite value {x}")))
}

pub fn rational_to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // numerator/denominator too large for the direct path
        let n = q.numer().to_f64().unwrap_or(f64::NAN);
        let d = q.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exponent multi-index: one non-negative power per action variable.
pub type Monomial = Vec<u32>;

/// Polynomial in `n` action variables with rational coefficients.
///
/// Invariant: no stored term has a zero coefficient.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionPolynomial {
    n: usize,
    terms: BTreeMap<Monomial, Rational>,
}

impl ActionPolynomial {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: Rational) -> Self {
        let mut p = Self::zero(n);
        p.add_term(vec![0; n], c);
        p
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, Rational::one())
    }

    /// The coordinate function `a_i` (0-based index).
    pub fn variable(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        let mut p = Self::zero(n);
        p.add_term(e, Rational::one());
        p
    }

    pub fn monomial(n: usize, exponents: Monomial, c: Rational) -> Self {
        assert_eq!(exponents.len(), n, "monomial arity");
        let mut p = Self::zero(n);
        p.add_term(exponents, c);
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    /// The constant value if the polynomial has no action dependence.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (e, c) = self.terms.iter().next().unwrap();
                e.iter().all(|&p| p == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn add_term(&mut self, exponents: Monomial, c: Rational) {
        debug_assert_eq!(exponents.len(), self.n);
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exponents) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(self.n);
        }
        Self {
            n: self.n,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    pub fn derivative(&self, var: usize) -> Self {
        assert!(var < self.n, "variable index {var} out of range for n = {}", self.n);
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            let p = e[var];
            if p == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] = p - 1;
            out.add_term(e2, c * rat(p as i64));
        }
        out
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.n).map(|i| self.derivative(i)).collect()
    }

    pub fn eval_exact(&self, a: &[Rational]) -> Rational {
        assert_eq!(a.len(), self.n, "point dimension");
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (x, &p) in a.iter().zip(e) {
                if p > 0 {
                    t *= num_traits::pow(x.clone(), p as usize);
                }
            }
            acc += t;
        }
        acc
    }

    pub fn eval(&self, a: &[f64]) -> f64 {
        assert_eq!(a.len(), self.n, "point dimension");
        self.terms
            .iter()
            .map(|(e, c)| {
                let mut t = rational_to_f64(c);
                for (x, &p) in a.iter().zip(e) {
                    if p > 0 {
                        t *= x.powi(p as i32);
                    }
                }
                t
            })
            .sum()
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.n);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Substitute each variable `a_i` by the polynomial `images[i]` (all in a
    /// common, possibly different, dimension).
    pub fn compose(&self, images: &[ActionPolynomial]) -> Self {
        assert_eq!(images.len(), self.n, "one image per variable");
        let m = images.first().map(|p| p.n).unwrap_or(0);
        let mut out = Self::zero(m);
        for (e, c) in &self.terms {
            let mut t = Self::constant(m, c.clone());
            for (img, &p) in images.iter().zip(e) {
                if p > 0 {
                    t = &t * &img.pow(p);
                }
            }
            out = &out + &t;
        }
        out
    }

    /// Re-embed into `m` variables: old variable `i` becomes new variable
    /// `map[i]`. Variables with no image must not occur in the polynomial.
    pub fn reindex(&self, m: usize, map: &[Option<usize>]) -> Result<Self> {
        let mut out = Self::zero(m);
        for (e, c) in &self.terms {
            let mut e2 = vec![0; m];
            for (i, &p) in e.iter().enumerate() {
                if p == 0 {
                    continue;
                }
                match map[i] {
                    Some(j) => e2[j] += p,
                    None => {
                        return Err(Error::Validation(format!(
                            "polynomial depends on dropped variable a{}",
                            i + 1
                        )))
                    }
                }
            }
            out.add_term(e2, c.clone());
        }
        Ok(out)
    }

    /// Fix some variables to exact values; `values[i] = Some(v)` substitutes
    /// `a_i = v`, the remaining variables are renumbered in order.
    pub fn restrict(&self, values: &[Option<Rational>]) -> Self {
        assert_eq!(values.len(), self.n);
        let m = values.iter().filter(|v| v.is_none()).count();
        let mut out = Self::zero(m);
        for (e, c) in &self.terms {
            let mut coef = c.clone();
            let mut e2 = Vec::with_capacity(m);
            for (v, &p) in values.iter().zip(e) {
                match v {
                    Some(x) => {
                        if p > 0 {
                            coef *= num_traits::pow(x.clone(), p as usize);
                        }
                    }
                    None => e2.push(p),
                }
            }
            out.add_term(e2, coef);
        }
        out
    }

    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly::new(self)
    }

    /// Largest absolute coefficient, as a float.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().map(|c| rational_to_f64(&c.abs())).fold(0.0, f64::max)
    }
}

impl Add for &ActionPolynomial {
    type Output = ActionPolynomial;
    fn add(self, rhs: &ActionPolynomial) -> ActionPolynomial {
        assert_eq!(self.n, rhs.n, "polynomial dimension mismatch");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl AddAssign<&ActionPolynomial> for ActionPolynomial {
    fn add_assign(&mut self, rhs: &ActionPolynomial) {
        assert_eq!(self.n, rhs.n, "polynomial dimension mismatch");
        for (e, c) in &rhs.terms {
            self.add_term(e.clone(), c.clone());
        }
    }
}

impl Sub for &ActionPolynomial {
    type Output = ActionPolynomial;
    fn sub(self, rhs: &ActionPolynomial) -> ActionPolynomial {
        assert_eq!(self.n, rhs.n, "polynomial dimension mismatch");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), -c.clone());
        }
        out
    }
}

impl Neg for &ActionPolynomial {
    type Output = ActionPolynomial;
    fn neg(self) -> ActionPolynomial {
        ActionPolynomial {
            n: self.n,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c.clone())).collect(),
        }
    }
}

impl Mul for &ActionPolynomial {
    type Output = ActionPolynomial;
    fn mul(self, rhs: &ActionPolynomial) -> ActionPolynomial {
        assert_eq!(self.n, rhs.n, "polynomial dimension mismatch");
        let mut out = ActionPolynomial::zero(self.n);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let e: Monomial = e1.iter().zip(e2).map(|(x, y)| x + y).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }
}

fn fmt_rational(q: &Rational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if q.is_integer() {
        write!(f, "{}", q.numer())
    } else {
        write!(f, "{}/{}", q.numer(), q.denom())
    }
}

/// Renders in the expression grammar accepted by [`crate::expr`], so the
/// output parses back to the same polynomial.
impl fmt::Display for ActionPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (e, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            let vars: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0)
                .map(|(i, &p)| if p == 1 { format!("a{}", i + 1) } else { format!("a{}^{}", i + 1, p) })
                .collect();
            if vars.is_empty() {
                fmt_rational(&abs, f)?;
            } else {
                if !abs.is_one() {
                    fmt_rational(&abs, f)?;
                    write!(f, "*")?;
                }
                write!(f, "{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for ActionPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ActionPolynomial[n={}]({})", self.n, self)
    }
}

/// Float evaluator for an [`ActionPolynomial`].
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    pub fn new(p: &ActionPolynomial) -> Self {
        let terms = p
            .terms
            .iter()
            .map(|(e, c)| {
                let powers = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(i, &k)| (i, k as i32))
                    .collect();
                (rational_to_f64(c), powers)
            })
            .collect();
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    #[inline]
    pub fn eval(&self, a: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, powers) in &self.terms {
            let mut t = *c;
            for &(i, k) in powers {
                t *= if k == 1 { a[i] } else { a[i].powi(k) };
            }
            acc += t;
        }
        acc
    }
}
