//! The almost-symplectic form in action-angle coordinates,
//!
//! ```text
//! sigma = sum_i da_i ^ dalpha_i + 1/2 sum_ij A_ij(a) da_i ^ da_j,
//! ```
//!
//! its exterior derivative (the totally antisymmetric tensor `C`), pointwise
//! kernels of `C`, and the symplecticity test `C == 0`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr;
use crate::poly::{ActionPolynomial, Rational};

/// Antisymmetric `n x n` matrix of action polynomials. Only the strict upper
/// triangle is stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureMatrixField {
    n: usize,
    upper: BTreeMap<(usize, usize), ActionPolynomial>,
}

impl StructureMatrixField {
    pub fn zero(n: usize) -> Self {
        Self { n, upper: BTreeMap::new() }
    }

    /// Build from upper-triangle entries `((i, j), A_ij)` with `i < j`
    /// (0-based). Repeated entries accumulate.
    pub fn from_upper(n: usize, entries: &[((usize, usize), ActionPolynomial)]) -> Result<Self> {
        let mut m = Self::zero(n);
        for ((i, j), p) in entries {
            m.add_entry(*i, *j, p)?;
        }
        Ok(m)
    }

    /// Add `p` to `A_ij` (and `-p` to `A_ji`). Any `i != j` is accepted.
    pub fn add_entry(&mut self, i: usize, j: usize, p: &ActionPolynomial) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::Validation(format!("entry ({}, {}) outside a {}x{} matrix", i + 1, j + 1, self.n, self.n)));
        }
        if i == j {
            if p.is_zero() {
                return Ok(());
            }
            return Err(Error::Validation(format!("diagonal entry ({0}, {0}) of an antisymmetric matrix must vanish", i + 1)));
        }
        if p.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: p.n() });
        }
        let (key, val) = if i < j { ((i, j), p.clone()) } else { ((j, i), -p) };
        let slot = self.upper.entry(key).or_insert_with(|| ActionPolynomial::zero(self.n));
        *slot += &val;
        if slot.is_zero() {
            self.upper.remove(&key);
        }
        Ok(())
    }

    /// Parse the `"i,j" -> "<poly>"` map (1-based, upper triangle).
    pub fn from_expr_map(n: usize, map: &BTreeMap<String, String>) -> Result<Self> {
        let mut m = Self::zero(n);
        for (key, val) in map {
            let (i, j) = parse_pair(key)?;
            if i >= j {
                return Err(Error::Validation(format!("structure entry \"{key}\" must be in the strict upper triangle")));
            }
            let p = expr::parse_polynomial(val, n)?;
            m.add_entry(i, j, &p)?;
        }
        Ok(m)
    }

    pub fn to_expr_map(&self) -> BTreeMap<String, String> {
        self.upper.iter().map(|((i, j), p)| (format!("{},{}", i + 1, j + 1), p.to_string())).collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> ActionPolynomial {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => ActionPolynomial::zero(self.n),
            Less => self.upper.get(&(i, j)).cloned().unwrap_or_else(|| ActionPolynomial::zero(self.n)),
            Greater => self.upper.get(&(j, i)).map(|p| -p).unwrap_or_else(|| ActionPolynomial::zero(self.n)),
        }
    }

    pub fn upper_entries(&self) -> impl Iterator<Item = (&(usize, usize), &ActionPolynomial)> {
        self.upper.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.upper.is_empty()
    }

    pub fn eval(&self, a: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for ((i, j), p) in &self.upper {
            let v = p.eval(a);
            m[(*i, *j)] = v;
            m[(*j, *i)] = -v;
        }
        m
    }

    /// Apply `f` to every stored entry, producing a matrix of dimension `m`.
    pub fn map_entries<F: Fn(&ActionPolynomial) -> ActionPolynomial>(&self, m: usize, f: F) -> Self {
        let mut out = Self::zero(m);
        for (&(i, j), p) in &self.upper {
            let q = f(p);
            if !q.is_zero() {
                out.upper.insert((i, j), q);
            }
        }
        out
    }

    /// Sub-block on `indices x indices`, with entry polynomials mapped by `f`.
    pub fn principal_block<F>(&self, indices: &[usize], f: F) -> Result<Self>
    where
        F: Fn(&ActionPolynomial) -> Result<ActionPolynomial>,
    {
        let m = indices.len();
        let mut out = Self::zero(m);
        for (bi, &i) in indices.iter().enumerate() {
            for (bj, &j) in indices.iter().enumerate().skip(bi + 1) {
                let p = self.entry(i, j);
                if p.is_zero() {
                    continue;
                }
                out.add_entry(bi, bj, &f(&p)?)?;
            }
        }
        Ok(out)
    }
}

pub(crate) fn parse_pair(key: &str) -> Result<(usize, usize)> {
    let bad = || Error::Validation(format!("structure key \"{key}\" is not of the form \"i,j\""));
    let (a, b) = key.split_once(',').ok_or_else(bad)?;
    let i: usize = a.trim().parse().map_err(|_| bad())?;
    let j: usize = b.trim().parse().map_err(|_| bad())?;
    if i == 0 || j == 0 {
        return Err(Error::Validation(format!("structure key \"{key}\": indices are 1-based")));
    }
    Ok((i - 1, j - 1))
}

/// Totally antisymmetric 3-tensor field of action polynomials, stored on
/// ordered triples `i < j < k`; [`CTensorField::get`] applies the
/// permutation sign.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CTensorField {
    n: usize,
    entries: BTreeMap<(usize, usize, usize), ActionPolynomial>,
}

impl CTensorField {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Nonzero independent components `C_ijk`, `i < j < k`.
    pub fn components(&self) -> impl Iterator<Item = (&(usize, usize, usize), &ActionPolynomial)> {
        self.entries.iter()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> ActionPolynomial {
        if i == j || j == k || i == k {
            return ActionPolynomial::zero(self.n);
        }
        let mut idx = [i, j, k];
        let mut sign = 1;
        // bubble sort, counting transpositions
        for a in 0..3 {
            for b in 0..2 - a {
                if idx[b] > idx[b + 1] {
                    idx.swap(b, b + 1);
                    sign = -sign;
                }
            }
        }
        match self.entries.get(&(idx[0], idx[1], idx[2])) {
            None => ActionPolynomial::zero(self.n),
            Some(p) if sign > 0 => p.clone(),
            Some(p) => -p,
        }
    }

    /// The `(n(n-1)/2) x n` matrix `M[(ij), k] = C_ijk(a)`, rows over `i < j`.
    pub fn contraction_matrix(&self, a: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let rows = n * (n.saturating_sub(1)) / 2;
        let mut m = DMatrix::zeros(rows, n);
        let vals: BTreeMap<_, _> = self.entries.iter().map(|(key, p)| (*key, p.eval(a))).collect();
        for (&(i, j, k), &v) in &vals {
            // each ordered triple feeds three rows (one per pair), with signs
            // from total antisymmetry: C_ijk = C_jki = C_kij
            m[(pair_row(n, i, j), k)] = v;
            m[(pair_row(n, i, k), j)] = -v;
            m[(pair_row(n, j, k), i)] = v;
        }
        m
    }

    /// Same matrix as [`Self::contraction_matrix`], exactly at a rational point.
    pub fn contraction_matrix_exact(&self, a: &[Rational]) -> Vec<Vec<Rational>> {
        let n = self.n;
        let rows = n * n.saturating_sub(1) / 2;
        let mut m = vec![vec![Rational::from_integer(0.into()); n]; rows];
        for (&(i, j, k), p) in &self.entries {
            let v = p.eval_exact(a);
            m[pair_row(n, i, k)][j] = -v.clone();
            m[pair_row(n, j, k)][i] = v.clone();
            m[pair_row(n, i, j)][k] = v;
        }
        m
    }
}

/// Row index of the pair `i < j` in lexicographic order.
pub fn pair_row(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// `C_ijk = dA_ij/da_k + dA_ki/da_j + dA_jk/da_i`.
pub fn c_tensor(a: &StructureMatrixField) -> CTensorField {
    let n = a.n();
    let mut entries = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let c = &(&a.entry(i, j).derivative(k) + &a.entry(k, i).derivative(j)) + &a.entry(j, k).derivative(i);
                if !c.is_zero() {
                    entries.insert((i, j, k), c);
                }
            }
        }
    }
    CTensorField { n, entries }
}

/// True iff `C` vanishes identically (exact polynomial test).
pub fn is_symplectic(a: &StructureMatrixField) -> bool {
    c_tensor(a).is_zero()
}

/// Default relative threshold for [`kernel_at`].
pub const KERNEL_TOL: f64 = 1e-10;

/// Orthonormal basis (columns) of `ker C(a) = {u : sum_k C_ijk(a) u_k = 0}`.
/// Singular values below `tol * sigma_max` count as zero.
pub fn kernel_at(c: &CTensorField, a: &[f64], tol: f64) -> Result<DMatrix<f64>> {
    let n = c.n();
    if a.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::Validation("kernel tolerance must be positive".into()));
    }
    let m = c.contraction_matrix(a);
    Ok(null_space(&m, tol))
}

/// Right null space by SVD; pads with zero rows so that all `n` right
/// singular vectors are available.
pub(crate) fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let cols: Vec<usize> = (0..n)
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= tol * smax)
        .collect();
    let mut basis = DMatrix::zeros(n, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        basis.set_column(c, &vt.row(i).transpose());
    }
    basis
}
