use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::dynamics::ActionDomain;
use crate::error::{Error, Result};
use crate::poly::ActionPolynomial;

/// Exponents and prefactors of the stability estimate
/// `|a_t - a_0| <= A eps^c1` for `|t| <= T eps^-c2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NekhoroshevParams {
    pub c1: f64,
    pub c2: f64,
    /// Horizon prefactor `T`.
    pub t_time: f64,
    /// Drift prefactor `A`, filled in by a fit.
    pub a_drift: Option<f64>,
}

impl NekhoroshevParams {
    pub fn new(c1: f64, c2: f64, t_time: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(Error::Validation(format!("exponents must be positive (c1 = {c1}, c2 = {c2})")));
        }
        let s = c1 + c2;
        if !(s > 1.0 && s < 2.0) {
            return Err(Error::Validation(format!("exponents must satisfy 1 < c1 + c2 < 2, got {s}")));
        }
        if !(t_time > 0.0 && t_time.is_finite()) {
            return Err(Error::Validation("horizon prefactor must be positive".into()));
        }
        Ok(Self { c1, c2, t_time, a_drift: None })
    }

    /// `c1 = 1/(8n)`, `c2 = (3/2)(1 - 1/(4n))`.
    pub fn defaults(n: usize, t_time: f64) -> Result<Self> {
        let nf = n as f64;
        Self::new(1.0 / (8.0 * nf), 1.5 * (1.0 - 1.0 / (4.0 * nf)), t_time)
    }

    /// `T eps^-c2`.
    pub fn horizon(&self, epsilon: f64) -> f64 {
        self.t_time * epsilon.abs().powf(-self.c2)
    }
}

/// Sampled steepness diagnostics of an unperturbed Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub samples: usize,
    /// `min |u.H u| / |u|^2` over sampled points and directions.
    pub min_rayleigh: f64,
    pub min_abs_det: f64,
    pub threshold: f64,
    pub convex: bool,
    pub kolmogorov: bool,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.convex && self.kolmogorov
    }
}

pub const CONVEXITY_THRESHOLD: f64 = 1e-8;

/// Sample the Hessian of `k` over `domain` (the box centre and random
/// points). The Rayleigh minimum at a point is the smallest absolute
/// eigenvalue for a definite Hessian and zero for an indefinite one.
pub fn check_convexity(k: &ActionPolynomial, domain: &ActionDomain, samples: usize, seed: u64) -> Result<ConvexityReport> {
    if samples == 0 {
        return Err(Error::Validation("convexity check needs at least one sample".into()));
    }
    let n = k.n();
    let hessian: Vec<Vec<ActionPolynomial>> = k.gradient().iter().map(|g| g.gradient()).collect();
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(samples);
    match domain.center() {
        Some(c) => {
            points.push(c);
            while points.len() < samples {
                points.push(domain.sample(&mut rng).expect("finite box"));
            }
        }
        None => {
            let unit = ActionDomain::from_box(vec![(-1.0, 1.0); n])?;
            while points.len() < samples {
                points.push(unit.sample(&mut rng).expect("finite box"));
            }
        }
    }
    let mut min_rayleigh = f64::INFINITY;
    let mut min_abs_det = f64::INFINITY;
    for a in &points {
        let h = DMatrix::from_fn(n, n, |i, j| hessian[i][j].eval(a));
        let eig = SymmetricEigen::new(h.clone());
        let lo = eig.eigenvalues.min();
        let hi = eig.eigenvalues.max();
        let r = if lo > 0.0 || hi < 0.0 { lo.abs().min(hi.abs()) } else { 0.0 };
        min_rayleigh = min_rayleigh.min(r);
        min_abs_det = min_abs_det.min(h.determinant().abs());
    }
    Ok(ConvexityReport {
        samples: points.len(),
        min_rayleigh,
        min_abs_det,
        threshold: CONVEXITY_THRESHOLD,
        convex: min_rayleigh >= CONVEXITY_THRESHOLD,
        kolmogorov: min_abs_det >= CONVEXITY_THRESHOLD,
    })
}
