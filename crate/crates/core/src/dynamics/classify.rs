use serde::Serialize;

use crate::fourier::{ComplexPoly, FourierSeries, MultiIndex};
use crate::poly::{rat, ActionPolynomial};
use crate::structure::CTensorField;

/// One violated identity `sum_k C_ijk nu_k g_nu = 0` (indices 0-based).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub i: usize,
    pub j: usize,
    pub nu: MultiIndex,
    /// Real part of the offending coefficient, as text.
    pub re: String,
    /// Imaginary part of the offending coefficient, as text.
    pub im: String,
    #[serde(skip)]
    pub coefficient: ComplexPoly,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrongHamiltonianVerdict {
    pub verdict: bool,
    pub witnesses: Vec<Witness>,
}

impl StrongHamiltonianVerdict {
    pub fn is_strong(&self) -> bool {
        self.verdict
    }
}

/// Decide whether the field of `g` preserves the almost-symplectic form,
/// i.e. whether `sum_k C_ijk(a) nu_k g_nu(a)` vanishes identically for every
/// stored harmonic `nu` and every pair `i < j`.
pub fn is_strongly_hamiltonian(g: &FourierSeries, c: &CTensorField) -> StrongHamiltonianVerdict {
    let n = g.n();
    let mut witnesses = Vec::new();
    if !c.is_zero() {
        for (nu, coeff) in g.harmonics() {
            if nu.is_zero() || coeff.is_zero() {
                continue;
            }
            for i in 0..n {
                for j in i + 1..n {
                    let mut contraction = ActionPolynomial::zero(n);
                    for (k, &nk) in nu.components().iter().enumerate() {
                        if nk != 0 {
                            let cijk = c.get(i, j, k);
                            if !cijk.is_zero() {
                                contraction += &cijk.scale(&rat(nk));
                            }
                        }
                    }
                    if contraction.is_zero() {
                        continue;
                    }
                    let product = coeff.mul_poly(&contraction);
                    if !product.is_zero() {
                        witnesses.push(Witness {
                            i,
                            j,
                            nu: nu.clone(),
                            re: product.re.to_string(),
                            im: product.im.to_string(),
                            coefficient: product,
                        });
                    }
                }
            }
        }
    }
    StrongHamiltonianVerdict { verdict: witnesses.is_empty(), witnesses }
}
