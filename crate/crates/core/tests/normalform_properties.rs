mod common;

use almost_symplectic::dynamics::{hamiltonian_vector_field, ActionDomain, Dop853, PhaseState, SystemDefinition};
use almost_symplectic::expr::parse_polynomial;
use almost_symplectic::lattice::IntegerLattice;
use almost_symplectic::normalform::{
    check_strong_preservation, lie_transform_field, project_field, resonance_set_at, solve_homological, LieDirection,
};
use almost_symplectic::poly::ratio;
use almost_symplectic::structure::c_tensor;
use almost_symplectic::{ActionPolynomial, FourierSeries, MultiIndex};
use common::*;
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::Rng;

/// `sum_i w_i a_i^2 / 2` plus a small cross term, with rational weights.
fn convex_quadratic(r: &mut StdRng, n: usize) -> ActionPolynomial {
    let mut k = ActionPolynomial::zero(n);
    for i in 0..n {
        let mut e = vec![0u32; n];
        e[i] = 2;
        k = &k + &ActionPolynomial::monomial(n, e, ratio(r.gen_range(2..=6), 4));
    }
    let mut e = vec![0u32; n];
    e[0] = 1;
    e[n - 1] += 1;
    &k + &ActionPolynomial::monomial(n, e, ratio(1, 8))
}

#[test]
fn homological_residual_vanishes_on_random_benchmarks() {
    let mut r = rng(31);
    for case in 0..10 {
        let n = 2 + case % 3;
        let k = if case % 2 == 0 { convex_quadratic(&mut r, n) } else { &convex_quadratic(&mut r, n) + &random_poly(&mut r, n, 3, 2) };
        let f = random_series(&mut r, n, 5, 2, 2);
        let a_star: Vec<f64> = (0..n).map(|_| r.gen_range(500..2000) as f64 / 1000.0).collect();
        let lambda = resonance_set_at(&k, &a_star, 4, 1e-6).unwrap();
        let res = solve_homological(&k, &f, &lambda, 4, &a_star).unwrap();
        assert_eq!(res.residual_samples, 10_000);
        assert!(res.residual_exact_zero, "case {case}");
        assert!(res.residual_sup <= 1e-10, "case {case}: residual {:e}", res.residual_sup);
    }
}

/// Distance of `v` from the column span of `basis`.
fn distance_from_span(basis: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    if basis.ncols() == 0 {
        return v.norm();
    }
    let q = basis.clone().qr().q();
    (v - &q * (q.transpose() * v)).norm()
}

#[test]
fn averaged_action_rates_are_parallel_to_the_lattice() {
    let mut r = rng(32);
    let mut states = 0;
    for case in 0..10 {
        let n = 3 + case % 3;
        let rank = 1 + case % (n - 1);
        let lattice = loop {
            let basis: Vec<Vec<i64>> = (0..rank).map(|_| random_nu(&mut r, n, 2).0).collect();
            if let Ok(l) = IntegerLattice::new(n, basis) {
                break l;
            }
        };
        let a = random_structure(&mut r, n, 1);
        let mut g = random_series(&mut r, n, 3, 2, 2);
        for _ in 0..3 {
            let mut nu = vec![0i64; n];
            for b in lattice.basis() {
                let c = r.gen_range(-1..=1);
                nu.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
            }
            g = &g + &series_term(&mut r, MultiIndex(nu), 2);
        }
        let projected = project_field(&hamiltonian_vector_field(&g, &a).unwrap(), &lattice).compile();
        let basis = DMatrix::from_fn(n, rank, |i, j| lattice.basis()[j][i] as f64);
        for _ in 0..100 {
            let x = PhaseState::new(random_point(&mut r, n, 1.5), random_angles(&mut r, n));
            let v = projected.eval_state(&x);
            let rate = DVector::from_column_slice(&v[..n]);
            let d = distance_from_span(&basis, &rate);
            assert!(d <= 1e-12 * (1.0 + rate.norm()), "case {case}: distance {d:e}");
            states += 1;
        }
    }
    assert_eq!(states, 1000);
}

#[test]
fn strong_perturbations_stay_strong_after_normalization() {
    let mut r = rng(33);
    let a = example5();
    let c = c_tensor(&a);
    let k = parse_polynomial("(a1^2 + a2^2 + a3^2 + a4^2 + a5^2)/2", 5).unwrap();
    for case in 0..20 {
        let mut f = FourierSeries::from_poly(random_poly(&mut r, 5, 2, 2));
        for _ in 0..4 {
            let nu = MultiIndex(vec![0, 0, 0, r.gen_range(-3..=3), r.gen_range(-3..=3)]);
            f = &f + &series_term(&mut r, nu, 2);
        }
        let a_star: Vec<f64> = (0..5).map(|_| r.gen_range(200..1500) as f64 / 1000.0).collect();
        let lambda = resonance_set_at(&k, &a_star, 6, 1e-3).unwrap();
        let res = solve_homological(&k, &f, &lambda, 6, &a_star).unwrap();
        let sys = SystemDefinition::new(k.clone(), f, a.clone(), 0.01, ActionDomain::unbounded(5)).unwrap();
        let rep = check_strong_preservation(&sys, &res, &c);
        assert!(rep.perturbation.verdict, "case {case}");
        assert!(rep.generator.verdict && rep.resonant.verdict, "case {case}");
        assert!(rep.contract_holds);
    }
}

#[test]
fn transformed_flow_is_conjugate_to_the_original() {
    let sys = benchmark(0.01);
    let a_star = [1.0, 0.61, 0.37];
    let mut lambda = resonance_set_at(&sys.k, &a_star, 2, 0.0).unwrap();
    lambda.members.retain(|nu| nu.is_zero());
    let res = solve_homological(&sys.k, &sys.f, &lambda, 2, &a_star).unwrap();
    let t = lie_transform_field(&sys, &res, LieDirection::Forward).unwrap();
    let rtol = 1e-10;
    let solver = Dop853::new(rtol, 1e-12);
    let raw = sys.vector_field().compile();
    let x0 = PhaseState::new(a_star.to_vec(), vec![0.4, 1.0, 2.0]);
    let z0 = t.to_normalized(&x0).unwrap();
    let samples: Vec<f64> = (1..=10).map(f64::from).collect();
    let mut original = Vec::new();
    solver
        .solve(&raw, 0.0, &x0.to_vec(), 10.0, &samples, |ev| {
            if ev.sample.is_some() {
                original.push(PhaseState::from_slice(ev.y));
            }
            Ok(())
        })
        .unwrap();
    let mut transformed = Vec::new();
    solver
        .solve(&t, 0.0, &z0.to_vec(), 10.0, &samples, |ev| {
            if ev.sample.is_some() {
                transformed.push(PhaseState::from_slice(ev.y));
            }
            Ok(())
        })
        .unwrap();
    assert_eq!(original.len(), samples.len());
    let mut worst: f64 = 0.0;
    for (x, z) in original.iter().zip(&transformed) {
        let mapped = t.to_normalized(x).unwrap();
        let scale = 1.0 + z.to_vec().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = mapped.to_vec().iter().zip(z.to_vec()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max) / scale;
        worst = worst.max(err);
    }
    assert!(worst <= 10.0 * rtol, "relative conjugacy error {worst:e}");
}
