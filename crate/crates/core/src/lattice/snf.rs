//! Smith and Hermite normal forms over the integers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

pub type IntMatrix = Vec<Vec<BigInt>>;

pub fn to_big(m: &[Vec<i64>]) -> IntMatrix {
    m.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
}

pub fn identity(n: usize) -> IntMatrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect()
}

pub fn mat_mul(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).fold(BigInt::zero(), |acc, l| acc + &row[l] * &b[l][j]))
                .collect()
        })
        .collect()
}

/// `U * M * V = D` with `U`, `V` unimodular and `D` diagonal with
/// `d_1 | d_2 | ... | d_rank`, all positive.
#[derive(Clone, Debug)]
pub struct Smith {
    pub u: IntMatrix,
    pub u_inv: IntMatrix,
    pub v: IntMatrix,
    pub diagonal: Vec<BigInt>,
}

impl Smith {
    pub fn rank(&self) -> usize {
        self.diagonal.len()
    }
}

struct Work {
    m: IntMatrix,
    u: IntMatrix,
    u_inv: IntMatrix,
    v: IntMatrix,
    rows: usize,
    cols: usize,
}

impl Work {
    fn swap_rows(&mut self, i: usize, j: usize) {
        if i != j {
            self.m.swap(i, j);
            self.u.swap(i, j);
            for r in &mut self.u_inv {
                r.swap(i, j);
            }
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i != j {
            for r in &mut self.m {
                r.swap(i, j);
            }
            for r in &mut self.v {
                r.swap(i, j);
            }
        }
    }

    /// row_i -= q row_j
    fn row_sub(&mut self, i: usize, j: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for c in 0..self.cols {
            let t = &self.m[j][c] * q;
            self.m[i][c] -= t;
        }
        for c in 0..self.rows {
            let t = &self.u[j][c] * q;
            self.u[i][c] -= t;
        }
        // inverse gets col_j += q col_i
        for r in 0..self.rows {
            let t = &self.u_inv[r][i] * q;
            self.u_inv[r][j] += t;
        }
    }

    /// col_i -= q col_j
    fn col_sub(&mut self, i: usize, j: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for r in 0..self.rows {
            let t = &self.m[r][j] * q;
            self.m[r][i] -= t;
        }
        for r in 0..self.cols {
            let t = &self.v[r][j] * q;
            self.v[r][i] -= t;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for x in &mut self.m[i] {
            *x = -&*x;
        }
        for x in &mut self.u[i] {
            *x = -&*x;
        }
        for r in &mut self.u_inv {
            r[i] = -&r[i];
        }
    }

    fn smallest_in(&self, t: usize) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for i in t..self.rows {
            for j in t..self.cols {
                if self.m[i][j].is_zero() {
                    continue;
                }
                if best.is_none_or(|(bi, bj)| self.m[i][j].abs() < self.m[bi][bj].abs()) {
                    best = Some((i, j));
                }
            }
        }
        best
    }
}

pub fn smith(m: &IntMatrix) -> Smith {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut w = Work { m: m.clone(), u: identity(rows), u_inv: identity(rows), v: identity(cols), rows, cols };
    let mut diagonal = Vec::new();
    for t in 0..rows.min(cols) {
        let Some((pi, pj)) = w.smallest_in(t) else { break };
        w.swap_rows(t, pi);
        w.swap_cols(t, pj);
        loop {
            let mut dirty = false;
            for i in t + 1..rows {
                if !w.m[i][t].is_zero() {
                    let q = w.m[i][t].div_floor(&w.m[t][t]);
                    w.row_sub(i, t, &q);
                    if !w.m[i][t].is_zero() {
                        dirty = true;
                    }
                }
            }
            for j in t + 1..cols {
                if !w.m[t][j].is_zero() {
                    let q = w.m[t][j].div_floor(&w.m[t][t]);
                    w.col_sub(j, t, &q);
                    if !w.m[t][j].is_zero() {
                        dirty = true;
                    }
                }
            }
            if !dirty {
                // divisibility of the remaining block by the pivot
                let bad = (t + 1..rows)
                    .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                    .find(|&(i, j)| !(&w.m[i][j] % &w.m[t][t]).is_zero());
                match bad {
                    None => break,
                    Some((i, _)) => {
                        // row_t += row_i brings the offending entry into row t
                        w.row_sub(t, i, &-BigInt::one());
                        continue;
                    }
                }
            }
            // move the smallest nonzero entry of row t / column t to the pivot
            let mut best = (t, t);
            for i in t..rows {
                if !w.m[i][t].is_zero() && w.m[i][t].abs() < w.m[best.0][best.1].abs() {
                    best = (i, t);
                }
            }
            for j in t..cols {
                if !w.m[t][j].is_zero() && w.m[t][j].abs() < w.m[best.0][best.1].abs() {
                    best = (t, j);
                }
            }
            w.swap_rows(t, best.0);
            w.swap_cols(t, best.1);
        }
        if w.m[t][t].is_negative() {
            w.negate_row(t);
        }
        diagonal.push(w.m[t][t].clone());
    }
    Smith { u: w.u, u_inv: w.u_inv, v: w.v, diagonal }
}

/// Row-style Hermite normal form of the lattice spanned by `rows`:
/// echelon rows with positive pivots and entries above each pivot reduced
/// into `[0, pivot)`. Zero rows are dropped, so the result is a canonical
/// basis of the lattice.
pub fn hermite_rows(rows: &[Vec<BigInt>]) -> IntMatrix {
    let mut m: IntMatrix = rows.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        if r >= m.len() {
            break;
        }
        // Euclid on column c among rows r..
        loop {
            let mut piv: Option<usize> = None;
            for i in r..m.len() {
                if !m[i][c].is_zero() && piv.is_none_or(|p| m[i][c].abs() < m[p][c].abs()) {
                    piv = Some(i);
                }
            }
            let Some(p) = piv else { break };
            m.swap(r, p);
            let mut done = true;
            for i in r + 1..m.len() {
                if !m[i][c].is_zero() {
                    let q = m[i][c].div_floor(&m[r][c]);
                    let pivot_row = m[r].clone();
                    for (x, y) in m[i].iter_mut().zip(&pivot_row) {
                        *x -= &q * y;
                    }
                    if !m[i][c].is_zero() {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        if r < m.len() && !m[r][c].is_zero() {
            if m[r][c].is_negative() {
                for x in &mut m[r] {
                    *x = -&*x;
                }
            }
            let pivot_row = m[r].clone();
            for i in 0..r {
                let q = m[i][c].div_floor(&pivot_row[c]);
                if !q.is_zero() {
                    for (x, y) in m[i].iter_mut().zip(&pivot_row) {
                        *x -= &q * y;
                    }
                }
            }
            r += 1;
        }
    }
    m.truncate(r);
    m
}

/// Exact determinant of a square integer matrix (Bareiss elimination).
pub fn determinant(m: &IntMatrix) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a = m.clone();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(k, i);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}
