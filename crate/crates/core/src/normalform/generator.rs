use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::fourier::{ComplexPoly, FourierSeries, MultiIndex, Variable};
use crate::poly::{rat, ActionPolynomial, CompiledPoly, Rational};
use crate::structure::StructureMatrixField;

#[derive(Clone, Debug, PartialEq)]
struct Harmonic {
    /// Denominator base `D_nu`, shared by every series built from the same
    /// frequency map.
    den: ActionPolynomial,
    num: ComplexPoly,
    power: u32,
}

/// Real Fourier series whose harmonic `nu` has coefficient
/// `P_nu(a) / D_nu(a)^m` with polynomial `P_nu` (complex) and `D_nu`.
///
/// Only the canonical half of the spectrum is stored; the value is
/// `sum 2 Re(c_nu e^{i nu.alpha})` plus the real `nu = 0` term. The form is
/// closed under differentiation in actions and angles, under
/// multiplication by polynomials, and under addition of series that share
/// their denominators.
#[derive(Clone, PartialEq)]
pub struct GeneratorSeries {
    n: usize,
    terms: BTreeMap<MultiIndex, Harmonic>,
}

impl GeneratorSeries {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new() }
    }

    /// Polynomial-coefficient series (all powers zero).
    pub fn from_fourier(f: &FourierSeries) -> Self {
        let n = f.n();
        let mut out = Self::zero(n);
        for (nu, c) in f.harmonics() {
            if nu.is_zero() || nu.is_canonical() {
                out.insert(nu.clone(), ActionPolynomial::one(n), c.clone(), 0);
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_harmonics(&self) -> usize {
        self.terms.len()
    }

    pub fn support(&self) -> impl Iterator<Item = &MultiIndex> {
        self.terms.keys()
    }

    /// `(numerator, denominator base, power)` for a canonical harmonic.
    pub fn coefficient(&self, nu: &MultiIndex) -> Option<(&ComplexPoly, &ActionPolynomial, u32)> {
        self.terms.get(nu).map(|h| (&h.num, &h.den, h.power))
    }

    /// Largest denominator power present.
    pub fn max_power(&self) -> u32 {
        self.terms.values().map(|h| h.power).max().unwrap_or(0)
    }

    /// Add `num / den^power` at the canonical harmonic `nu`.
    pub(crate) fn insert(&mut self, nu: MultiIndex, den: ActionPolynomial, num: ComplexPoly, power: u32) {
        debug_assert!(nu.is_zero() || nu.is_canonical());
        if num.is_zero() {
            return;
        }
        match self.terms.remove(&nu) {
            None => {
                self.terms.insert(nu, Harmonic { den, num, power });
            }
            Some(old) => {
                // the stored base wins when the incoming term has power 0
                let base = if power == 0 { old.den.clone() } else { den };
                if old.power > 0 && power > 0 {
                    debug_assert_eq!(old.den, base, "series with different denominators");
                }
                let m = old.power.max(power);
                let lift = |c: &ComplexPoly, p: u32| if p == m { c.clone() } else { c.mul_poly(&base.pow(m - p)) };
                let num = &lift(&old.num, old.power) + &lift(&num, power);
                if !num.is_zero() {
                    self.terms.insert(nu, Harmonic { den: base, num, power: m });
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut out = Self::zero(self.n);
        for (nu, h) in &self.terms {
            out.insert(nu.clone(), h.den.clone(), h.num.scale(c), h.power);
        }
        out
    }

    pub fn mul_poly(&self, p: &ActionPolynomial) -> Self {
        let mut out = Self::zero(self.n);
        if p.is_zero() {
            return out;
        }
        for (nu, h) in &self.terms {
            out.insert(nu.clone(), h.den.clone(), h.num.mul_poly(p), h.power);
        }
        out
    }

    pub fn derivative(&self, var: Variable) -> Self {
        let mut out = Self::zero(self.n);
        for (nu, h) in &self.terms {
            match var {
                Variable::Angle(k) => {
                    let num = h.num.scale_complex(&rat(0), &rat(nu.0[k]));
                    out.insert(nu.clone(), h.den.clone(), num, h.power);
                }
                Variable::Action(k) => {
                    let dnum = h.num.derivative(k);
                    let dden = h.den.derivative(k);
                    if h.power == 0 || dden.is_zero() {
                        out.insert(nu.clone(), h.den.clone(), dnum, h.power);
                    } else {
                        // (P/D^m)' = (P' D - m P D') / D^{m+1}
                        let num = &dnum.mul_poly(&h.den) + &h.num.mul_poly(&dden).scale(&rat(-(h.power as i64)));
                        out.insert(nu.clone(), h.den.clone(), num, h.power + 1);
                    }
                }
            }
        }
        out
    }

    /// Hamiltonian vector field for the structure `a`: action components
    /// `-d/dalpha`, angle components `d/da + A d/dalpha`.
    pub fn hamiltonian_field(&self, a: &StructureMatrixField) -> Vec<GeneratorSeries> {
        let n = self.n;
        let d_alpha: Vec<Self> = (0..n).map(|i| self.derivative(Variable::Angle(i))).collect();
        let mut comps: Vec<Self> = d_alpha.iter().map(|s| s.scale(&rat(-1))).collect();
        for i in 0..n {
            let mut c = self.derivative(Variable::Action(i));
            for (j, dj) in d_alpha.iter().enumerate() {
                let aij = a.entry(i, j);
                if !aij.is_zero() {
                    c = &c + &dj.mul_poly(&aij);
                }
            }
            comps.push(c);
        }
        comps
    }

    /// The series with every denominator dropped, i.e. harmonics `P_nu`.
    /// It has the same harmonic support and the same kernel conditions as
    /// `self` wherever the denominators do not vanish.
    pub fn numerators(&self) -> FourierSeries {
        let mut out = FourierSeries::zero(self.n);
        for (nu, h) in &self.terms {
            out.add_coefficient(nu.clone(), h.num.clone()).expect("canonical harmonic with real mean");
        }
        out
    }

    /// Plain Fourier series when no harmonic carries a denominator.
    pub fn to_fourier(&self) -> Option<FourierSeries> {
        if self.max_power() > 0 {
            return None;
        }
        Some(self.numerators())
    }

    pub fn eval(&self, a: &[f64], alpha: &[f64]) -> f64 {
        CompiledGenerator::new(&[self]).eval(a, alpha)
    }

    pub fn compile(&self) -> CompiledGenerator {
        CompiledGenerator::new(&[self])
    }

    /// Text terms `(nu, re, im, den, power)` for reports.
    pub fn to_terms(&self) -> Vec<GeneratorTerm> {
        self.terms
            .iter()
            .map(|(nu, h)| GeneratorTerm {
                nu: nu.clone(),
                re: h.num.re.to_string(),
                im: h.num.im.to_string(),
                denominator: if h.power == 0 { "1".into() } else { h.den.to_string() },
                power: h.power,
            })
            .collect()
    }
}

impl std::ops::Add for &GeneratorSeries {
    type Output = GeneratorSeries;
    fn add(self, rhs: &GeneratorSeries) -> GeneratorSeries {
        let mut out = self.clone();
        for (nu, h) in &rhs.terms {
            out.insert(nu.clone(), h.den.clone(), h.num.clone(), h.power);
        }
        out
    }
}

impl fmt::Debug for GeneratorSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_terms()).finish()
    }
}

/// One harmonic of a [`GeneratorSeries`] as text (canonical half only).
#[derive(Clone, Debug, Serialize)]
pub struct GeneratorTerm {
    pub nu: MultiIndex,
    pub re: String,
    pub im: String,
    pub denominator: String,
    pub power: u32,
}

/// Float evaluator for a family of generator series sharing phases and
/// denominators.
#[derive(Clone, Debug)]
pub struct CompiledGenerator {
    harmonics: Vec<(Vec<(usize, i64)>, CompiledPoly)>,
    max_power: u32,
    members: Vec<Vec<Term>>,
}

#[derive(Clone, Debug)]
struct Term {
    /// `None` for the `nu = 0` term.
    harmonic: Option<usize>,
    power: u32,
    pc: CompiledPoly,
    ps: CompiledPoly,
}

impl CompiledGenerator {
    pub fn new(series: &[&GeneratorSeries]) -> Self {
        let mut index: BTreeMap<MultiIndex, usize> = BTreeMap::new();
        let mut harmonics = Vec::new();
        let mut max_power = 0;
        let mut members = Vec::with_capacity(series.len());
        for s in series {
            let mut terms = Vec::new();
            for (nu, h) in &s.terms {
                max_power = max_power.max(h.power);
                if nu.is_zero() {
                    terms.push(Term { harmonic: None, power: 0, pc: h.num.re.compile(), ps: ActionPolynomial::zero(s.n).compile() });
                    continue;
                }
                let idx = *index.entry(nu.clone()).or_insert_with(|| {
                    let phase = nu.0.iter().enumerate().filter(|(_, &k)| k != 0).map(|(i, &k)| (i, k)).collect();
                    harmonics.push((phase, h.den.compile()));
                    harmonics.len() - 1
                });
                terms.push(Term {
                    harmonic: Some(idx),
                    power: h.power,
                    pc: h.num.re.scale(&rat(2)).compile(),
                    ps: h.num.im.scale(&rat(-2)).compile(),
                });
            }
            members.push(terms);
        }
        Self { harmonics, max_power, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn eval_into(&self, a: &[f64], alpha: &[f64], out: &mut [f64]) {
        let stride = self.max_power as usize + 1;
        let mut cs = Vec::with_capacity(self.harmonics.len());
        let mut inv = Vec::with_capacity(self.harmonics.len() * stride);
        for (phase, den) in &self.harmonics {
            let theta: f64 = phase.iter().map(|&(i, k)| k as f64 * alpha[i]).sum();
            cs.push(theta.sin_cos());
            let r = if self.max_power > 0 { 1.0 / den.eval(a) } else { 1.0 };
            let mut p = 1.0;
            for _ in 0..stride {
                inv.push(p);
                p *= r;
            }
        }
        for (o, terms) in out.iter_mut().zip(&self.members) {
            let mut acc = 0.0;
            for t in terms {
                match t.harmonic {
                    None => acc += t.pc.eval(a),
                    Some(h) => {
                        let (s, c) = cs[h];
                        let mut v = 0.0;
                        if !t.pc.is_zero() {
                            v += t.pc.eval(a) * c;
                        }
                        if !t.ps.is_zero() {
                            v += t.ps.eval(a) * s;
                        }
                        acc += v * inv[h * stride + t.power as usize];
                    }
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_series;

    fn sample_generator() -> (GeneratorSeries, ActionPolynomial) {
        // chi = sin(alpha1 + alpha2) / (a1 + a2)
        let n = 2;
        let nu = MultiIndex(vec![1, 1]);
        let den = &ActionPolynomial::variable(n, 0) + &ActionPolynomial::variable(n, 1);
        let mut g = GeneratorSeries::zero(n);
        // sin t = 2 Re(-i/2 e^{it})
        g.insert(nu, den.clone(), ComplexPoly::new(ActionPolynomial::zero(n), ActionPolynomial::constant(n, crate::poly::ratio(-1, 2))), 1);
        (g, den)
    }

    #[test]
    fn evaluation_matches_closed_form() {
        let (g, _) = sample_generator();
        let (a, al): ([f64; 2], [f64; 2]) = ([0.7, 1.1], [0.3, -0.4]);
        let expect = (al[0] + al[1]).sin() / (a[0] + a[1]);
        assert!((g.eval(&a, &al) - expect).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let (g, _) = sample_generator();
        let (a, al) = ([0.7, 1.1], [0.3, -0.4]);
        let h = 1e-6;
        for k in 0..2 {
            let mut ap = a;
            ap[k] += h;
            let mut am = a;
            am[k] -= h;
            let fd = (g.eval(&ap, &al) - g.eval(&am, &al)) / (2.0 * h);
            let d = g.derivative(Variable::Action(k));
            assert_eq!(d.max_power(), 2);
            assert!((d.eval(&a, &al) - fd).abs() < 1e-8);
            let mut bp = al;
            bp[k] += h;
            let mut bm = al;
            bm[k] -= h;
            let fd = (g.eval(&a, &bp) - g.eval(&a, &bm)) / (2.0 * h);
            assert!((g.derivative(Variable::Angle(k)).eval(&a, &al) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn polynomial_series_round_trip() {
        let f = parse_series("a1*cos(alpha1 - alpha2) + 2*sin(alpha2) + a2^2", 2).unwrap();
        let g = GeneratorSeries::from_fourier(&f);
        assert_eq!(format!("{:?}", g.to_fourier().unwrap()), format!("{f:?}"));
        let (a, al) = ([0.2, -0.5], [1.0, 2.0]);
        assert!((g.eval(&a, &al) - f.eval(&a, &al).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn sums_share_denominators() {
        let (g, den) = sample_generator();
        let dg = g.derivative(Variable::Action(0));
        let s = &g + &dg;
        assert_eq!(s.max_power(), 2);
        let (a, al) = ([0.7, 1.1], [0.3, -0.4]);
        assert!((s.eval(&a, &al) - g.eval(&a, &al) - dg.eval(&a, &al)).abs() < 1e-14);
        // multiplying back by the denominator cancels exactly
        let c = &g.mul_poly(&den).derivative(Variable::Angle(0)) + &GeneratorSeries::from_fourier(&parse_series("-1/2*0", 2).unwrap());
        assert!((c.eval(&a, &al) - (al[0] + al[1]).cos()).abs() < 1e-14);
    }
}
