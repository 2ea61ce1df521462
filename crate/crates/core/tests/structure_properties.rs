mod common;

use almost_symplectic::structure::{c_tensor, is_symplectic, kernel_at, KERNEL_TOL};
use almost_symplectic::{ActionPolynomial, StructureMatrixField};
use common::*;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn kernel_dimension_is_at_most_n_minus_three() {
    let mut r = rng(3);
    let mut checked = 0;
    while checked < 100 {
        let n = r.gen_range(4..=6);
        let a = random_structure(&mut r, n, 2);
        let c = c_tensor(&a);
        let point = random_point(&mut r, n, 2.0);
        if c.contraction_matrix(&point).iter().all(|x| x.abs() < 1e-12) {
            continue;
        }
        let k = kernel_at(&c, &point, KERNEL_TOL).unwrap();
        assert!(k.ncols() <= n - 3, "n = {n}, kernel dimension {}", k.ncols());
        checked += 1;
    }
}

#[test]
fn two_dimensional_structures_are_symplectic() {
    let mut r = rng(5);
    for _ in 0..100 {
        assert!(is_symplectic(&random_structure(&mut r, 2, 3)));
    }
}

#[test]
fn three_dimensional_structures_need_not_be() {
    let mut r = rng(6);
    let found = (0..100).map(|_| random_structure(&mut r, 3, 3)).filter(|a| !is_symplectic(a)).count();
    assert!(found > 0);
    let a = StructureMatrixField::from_upper(3, &[((0, 1), ActionPolynomial::variable(3, 2))]).unwrap();
    assert_eq!(c_tensor(&a).get(0, 1, 2).to_string(), "1");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn c_tensor_is_linear_and_ignores_constants(seed in any::<u64>(), n in 3usize..6) {
        let mut r = rng(seed);
        let a = random_structure(&mut r, n, 2);
        let b = random_structure(&mut r, n, 2);
        let sum = StructureMatrixField::from_upper(
            n,
            &(0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .map(|(i, j)| ((i, j), &a.entry(i, j) + &b.entry(i, j)))
                .collect::<Vec<_>>(),
        ).unwrap();
        let (ca, cb, cs) = (c_tensor(&a), c_tensor(&b), c_tensor(&sum));
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    prop_assert_eq!(cs.get(i, j, k), &ca.get(i, j, k) + &cb.get(i, j, k));
                    prop_assert_eq!(ca.get(i, j, k), -&ca.get(j, i, k));
                    prop_assert_eq!(ca.get(i, j, k), -&ca.get(i, k, j));
                }
            }
        }
        let shift = random_poly(&mut r, n, 0, 1);
        let shifted = a.map_entries(n, |p| p + &shift);
        let csh = c_tensor(&shifted);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    prop_assert_eq!(csh.get(i, j, k), ca.get(i, j, k));
                }
            }
        }
    }
}

#[test]
fn example_tensors_are_exact() {
    let c4 = c_tensor(&example4());
    let comps: Vec<_> = c4.components().map(|(k, p)| (*k, p.to_string())).collect();
    assert_eq!(comps, vec![((0, 1, 3), "1".to_string())]);
    let c5 = c_tensor(&example5());
    let comps: Vec<_> = c5.components().map(|(k, p)| (*k, p.to_string())).collect();
    assert_eq!(comps, vec![((0, 1, 2), "a1".to_string())]);
}
