mod common;

use almost_symplectic::fourier::{bracket_aa, Variable};
use almost_symplectic::poly::ratio;
use almost_symplectic::{FourierSeries, MultiIndex, StructureMatrixField};
use common::*;
use proptest::prelude::*;

fn is_zero(f: &FourierSeries) -> bool {
    f.is_zero()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncate_project_and_derivative_are_linear(seed in any::<u64>(), n in 1usize..5, cutoff in 0u64..6) {
        let mut r = rng(seed);
        let f = random_series(&mut r, n, 4, 3, 2);
        let g = random_series(&mut r, n, 4, 3, 2);
        let c = ratio(r.gen_range(-7..=7), r.gen_range(1..=4));
        let combo = &f + &g.scale(&c);
        prop_assert!(is_zero(&(&combo.truncate(cutoff) - &(&f.truncate(cutoff) + &g.truncate(cutoff).scale(&c)))));
        let lambda = |nu: &MultiIndex| nu.0.iter().sum::<i64>() % 2 == 0;
        prop_assert!(is_zero(&(&combo.project(&lambda) - &(&f.project(&lambda) + &g.project(&lambda).scale(&c)))));
        for k in 0..n {
            for var in [Variable::Action(k), Variable::Angle(k)] {
                let lhs = combo.derivative(var);
                let rhs = &f.derivative(var) + &g.derivative(var).scale(&c);
                prop_assert!(is_zero(&(&lhs - &rhs)));
            }
        }
    }

    #[test]
    fn truncation_splits_the_series(seed in any::<u64>(), n in 1usize..5, cutoff in 0u64..8) {
        let mut r = rng(seed);
        let f = random_series(&mut r, n, 6, 4, 2);
        prop_assert!(is_zero(&(&(&f.truncate(cutoff) + &f.ultraviolet(cutoff)) - &f)));
        prop_assert!(f.truncate(cutoff).support().all(|nu| nu.order() <= cutoff));
        prop_assert!(f.ultraviolet(cutoff).support().all(|nu| nu.order() > cutoff));
    }

    #[test]
    fn bracket_is_antisymmetric_and_bilinear(seed in any::<u64>(), n in 2usize..5) {
        let mut r = rng(seed);
        let a = random_structure(&mut r, n, 2);
        let f = random_series(&mut r, n, 3, 2, 2);
        let g = random_series(&mut r, n, 3, 2, 2);
        let h = random_series(&mut r, n, 3, 2, 2);
        let fg = bracket_aa(&f, &g, &a).unwrap();
        let gf = bracket_aa(&g, &f, &a).unwrap();
        prop_assert!(is_zero(&(&fg + &gf)));
        let lhs = bracket_aa(&(&f + &h), &g, &a).unwrap();
        let rhs = &fg + &bracket_aa(&h, &g, &a).unwrap();
        prop_assert!(is_zero(&(&lhs - &rhs)));
        prop_assert!(bracket_aa(&f, &f, &a).unwrap().is_zero());
    }

    #[test]
    fn serialized_terms_round_trip(seed in any::<u64>(), n in 1usize..5) {
        let mut r = rng(seed);
        let f = random_series(&mut r, n, 4, 3, 2);
        let back = FourierSeries::from_terms(n, &f.to_terms()).unwrap();
        prop_assert!(is_zero(&(&back - &f)));
    }
}

use rand::Rng;

#[test]
fn evaluation_is_real_at_a_million_points() {
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for s in 0..10 {
        let n = 1 + s % 4;
        let f = random_series(&mut r, n, 6, 3, 2);
        for _ in 0..100_000 {
            let a = random_point(&mut r, n, 1.0);
            let alpha = random_angles(&mut r, n);
            let z = f.eval_complex(&a, &alpha).unwrap();
            worst = worst.max(z.im.abs() / z.re.abs().max(1.0));
        }
    }
    assert!(worst < 1e-14, "imaginary residue {worst:e}");
}

#[test]
fn jacobi_identity_fails_on_the_four_dimensional_example() {
    let n = 4;
    let a = example4();
    let e = |i: usize| MultiIndex((0..n).map(|k| i64::from(k == i)).collect());
    let one = almost_symplectic::ActionPolynomial::one(n);
    let f = FourierSeries::sin(e(0), one.clone());
    let g = FourierSeries::sin(e(1), one.clone());
    let h = FourierSeries::sin(e(3), one);
    let br = |x: &FourierSeries, y: &FourierSeries| bracket_aa(x, y, &a).unwrap();
    let jac = &(&br(&br(&f, &g), &h) + &br(&br(&g, &h), &f)) + &br(&br(&h, &f), &g);
    assert!(!jac.is_zero());
    // with a closed (constant) structure the same triple satisfies Jacobi
    let closed = StructureMatrixField::from_upper(n, &[((0, 1), almost_symplectic::ActionPolynomial::one(n))]).unwrap();
    let brc = |x: &FourierSeries, y: &FourierSeries| bracket_aa(x, y, &closed).unwrap();
    let jac = &(&brc(&brc(&f, &g), &h) + &brc(&brc(&g, &h), &f)) + &brc(&brc(&h, &f), &g);
    assert!(jac.is_zero());
}
