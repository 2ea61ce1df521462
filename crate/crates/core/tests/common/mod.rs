//! Random generators and reference systems shared by the integration tests.
#![allow(dead_code)]

use almost_symplectic::dynamics::{ActionDomain, SystemDefinition};
use almost_symplectic::expr::{parse_polynomial, parse_series};
use almost_symplectic::fourier::ComplexPoly;
use almost_symplectic::poly::ratio;
use almost_symplectic::{ActionPolynomial, FourierSeries, MultiIndex, StructureMatrixField};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Polynomial with up to `terms` monomials of total degree `<= degree` and
/// coefficients `p/q`, `|p| <= 5`, `q in 1..=3`.
pub fn random_poly(rng: &mut StdRng, n: usize, degree: u32, terms: usize) -> ActionPolynomial {
    let mut p = ActionPolynomial::zero(n);
    for _ in 0..rng.gen_range(1..=terms) {
        let mut exps = vec![0u32; n];
        let mut budget = rng.gen_range(0..=degree);
        while budget > 0 {
            exps[rng.gen_range(0..n)] += 1;
            budget -= 1;
        }
        let num = rng.gen_range(-5..=5);
        let den = rng.gen_range(1..=3);
        p = &p + &ActionPolynomial::monomial(n, exps, ratio(num, den));
    }
    p
}

pub fn random_nu(rng: &mut StdRng, n: usize, max_entry: i64) -> MultiIndex {
    MultiIndex((0..n).map(|_| rng.gen_range(-max_entry..=max_entry)).collect())
}

/// Series with up to `harmonics` random frequencies (entries in
/// `[-max_entry, max_entry]`) and polynomial coefficients.
pub fn random_series(rng: &mut StdRng, n: usize, harmonics: usize, max_entry: i64, degree: u32) -> FourierSeries {
    let mut f = FourierSeries::from_poly(random_poly(rng, n, degree, 2));
    for _ in 0..harmonics {
        let nu = random_nu(rng, n, max_entry);
        f = &f + &series_term(rng, nu, degree);
    }
    f
}

/// `Re(c e^{i nu.alpha})` pair with random polynomial parts.
pub fn series_term(rng: &mut StdRng, nu: MultiIndex, degree: u32) -> FourierSeries {
    let n = nu.n();
    if nu.is_zero() {
        return FourierSeries::from_poly(random_poly(rng, n, degree, 2));
    }
    let mut f = FourierSeries::zero(n);
    let im = if rng.gen_bool(0.5) { random_poly(rng, n, degree, 2) } else { ActionPolynomial::zero(n) };
    f.add_coefficient(nu, ComplexPoly::new(random_poly(rng, n, degree, 2), im)).unwrap();
    f
}

/// Upper-triangular structure with random polynomial entries.
pub fn random_structure(rng: &mut StdRng, n: usize, degree: u32) -> StructureMatrixField {
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.7) {
                entries.push(((i, j), random_poly(rng, n, degree, 3)));
            }
        }
    }
    StructureMatrixField::from_upper(n, &entries).unwrap()
}

pub fn random_point(rng: &mut StdRng, n: usize, radius: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-radius..radius)).collect()
}

pub fn random_angles(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
}

/// `A_12 = a4` on four degrees of freedom.
pub fn example4() -> StructureMatrixField {
    StructureMatrixField::from_upper(4, &[((0, 1), ActionPolynomial::variable(4, 3))]).unwrap()
}

/// `A_12 = a1 a3` on five degrees of freedom.
pub fn example5() -> StructureMatrixField {
    StructureMatrixField::from_upper(5, &[((0, 1), parse_polynomial("a1*a3", 5).unwrap())]).unwrap()
}

/// Pendulum in `(a4, alpha4)` driven by `alpha5` on the five-dimensional
/// example structure.
pub fn pendulum5() -> SystemDefinition {
    let f = parse_series("a4^2/2 + a5 - (1 + cos(alpha5))*cos(alpha4)", 5).unwrap();
    let dom = ActionDomain::from_box(vec![(0.5, 2.0), (-1.0, 1.0), (-1.0, 1.0), (-3.0, 3.0), (-10.0, 10.0)]).unwrap();
    SystemDefinition::new(ActionPolynomial::zero(5), f, example5(), 1.0, dom).unwrap()
}

/// Convex three-degree-of-freedom benchmark with `A_12 = a3`.
pub fn benchmark(epsilon: f64) -> SystemDefinition {
    let a = StructureMatrixField::from_upper(3, &[((0, 1), ActionPolynomial::variable(3, 2))]).unwrap();
    SystemDefinition::new(
        parse_polynomial("(a1^2 + a2^2 + a3^2)/2", 3).unwrap(),
        parse_series("cos(alpha1) + cos(alpha1 - alpha2) + cos(alpha3)", 3).unwrap(),
        a,
        epsilon,
        ActionDomain::from_box(vec![(-3.0, 3.0); 3]).unwrap(),
    )
    .unwrap()
}

pub const BENCHMARK_TOML: &str = r#"
[system]
n = 3
k = "(a1^2 + a2^2 + a3^2)/2"
domain = [[-3, 3], [-3, 3], [-3, 3]]

[structure]
"1,2" = "a3"

[perturbation]
terms = ["cos(alpha1) + cos(alpha1 - alpha2) + cos(alpha3)"]

[experiment]
eps_max = 1e-2
eps_min = 1e-5
eps_count = 8
ensemble = 5
seed = 0
initial_box = [[0.5, 1.5], [0.5, 1.5], [0.5, 1.5]]
"#;

/// Random unimodular integer matrix built from elementary row operations.
pub fn random_unimodular(rng: &mut StdRng, n: usize, ops: usize) -> Vec<Vec<i64>> {
    let mut m: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
    if n < 2 {
        return m;
    }
    for _ in 0..ops {
        let i = rng.gen_range(0..n);
        let j = (i + rng.gen_range(1..n)) % n;
        match rng.gen_range(0..4) {
            0 => m.swap(i, j),
            1 => m[i].iter_mut().for_each(|x| *x = -*x),
            _ => {
                let k = if rng.gen_bool(0.5) { 1 } else { -1 };
                let row = m[j].clone();
                m[i].iter_mut().zip(&row).for_each(|(x, y)| *x += k * y);
            }
        }
    }
    m
}
