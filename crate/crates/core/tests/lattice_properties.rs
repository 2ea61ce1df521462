mod common;

use almost_symplectic::dynamics::{is_strongly_hamiltonian, ActionDomain, Dop853, PhaseState, SystemDefinition};
use almost_symplectic::lattice::{
    change_action_angle, common_kernel_lattice, complete_to_unimodular, consistency_error, reduce, IntegerLattice,
    KernelSampling, UnimodularTransform,
};
use almost_symplectic::poly::ratio;
use almost_symplectic::{ActionPolynomial, MultiIndex};
use common::*;
use rand::rngs::StdRng;
use rand::Rng;

fn random_lattice(r: &mut StdRng, n: usize, rank: usize, max_entry: i64) -> IntegerLattice {
    loop {
        let basis: Vec<Vec<i64>> = (0..rank).map(|_| (0..n).map(|_| r.gen_range(-max_entry..=max_entry)).collect()).collect();
        if let Ok(l) = IntegerLattice::new(n, basis) {
            return l;
        }
    }
}

#[test]
fn completions_are_unimodular_and_straighten_the_basis() {
    let mut r = rng(21);
    for _ in 0..100 {
        let n = r.gen_range(2..=6);
        let rank = r.gen_range(1..=n);
        let l = random_lattice(&mut r, n, rank, 6).saturation();
        let t = complete_to_unimodular(&l).unwrap();
        assert_eq!(t.determinant().abs(), 1);
        for (i, u) in l.basis().iter().enumerate() {
            assert_eq!(t.map_harmonic(&MultiIndex(u.clone())), MultiIndex::unit(n, i));
        }
    }
}

fn det(m: &[Vec<i128>]) -> i128 {
    match m.len() {
        0 => 1,
        1 => m[0][0],
        _ => (0..m.len())
            .map(|j| {
                let minor: Vec<Vec<i128>> =
                    m[1..].iter().map(|row| row.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, x)| *x).collect()).collect();
                let sign = if j % 2 == 0 { 1 } else { -1 };
                sign * m[0][j] * det(&minor)
            })
            .sum(),
    }
}

/// Rows `rows` of the basis matrix (columns are basis vectors) with a
/// nonzero determinant.
fn nonsingular_rows(basis: &[Vec<i64>], n: usize) -> (Vec<usize>, i128) {
    let r = basis.len();
    let mut pick = Vec::new();
    fn search(basis: &[Vec<i64>], n: usize, r: usize, start: usize, pick: &mut Vec<usize>) -> Option<(Vec<usize>, i128)> {
        if pick.len() == r {
            let m: Vec<Vec<i128>> = pick.iter().map(|&i| basis.iter().map(|b| b[i] as i128).collect()).collect();
            let d = det(&m);
            return (d != 0).then(|| (pick.clone(), d));
        }
        for i in start..n {
            pick.push(i);
            if let Some(found) = search(basis, n, r, i + 1, pick) {
                return Some(found);
            }
            pick.pop();
        }
        None
    }
    search(basis, n, r, 0, &mut pick).expect("independent basis")
}

/// Whether `v` is an integer combination of the basis, by Cramer's rule.
fn integer_member(basis: &[Vec<i64>], rows: &[usize], d: i128, v: &[i64]) -> Option<bool> {
    let r = basis.len();
    let mut coeffs = Vec::with_capacity(r);
    for k in 0..r {
        let m: Vec<Vec<i128>> =
            rows.iter().map(|&i| (0..r).map(|j| if j == k { v[i] as i128 } else { basis[j][i] as i128 }).collect()).collect();
        coeffs.push(det(&m));
    }
    // d v must equal sum coeffs_k b_k in every coordinate for v to be in the span
    for i in 0..v.len() {
        let lhs = d * v[i] as i128;
        let rhs: i128 = coeffs.iter().zip(basis).map(|(c, b)| c * b[i] as i128).sum();
        if lhs != rhs {
            return None;
        }
    }
    Some(coeffs.iter().all(|c| c % d == 0))
}

fn brute_force_saturated(l: &IntegerLattice, radius: i64) -> bool {
    let n = l.n();
    let (rows, d) = nonsingular_rows(l.basis(), n);
    let mut v = vec![-radius; n];
    loop {
        if integer_member(l.basis(), &rows, d, &v) == Some(false) {
            return false;
        }
        let mut i = 0;
        while i < n && v[i] == radius {
            v[i] = -radius;
            i += 1;
        }
        if i == n {
            return true;
        }
        v[i] += 1;
    }
}

#[test]
fn saturation_matches_enumeration() {
    let mut r = rng(22);
    let mut seen = [0usize; 2];
    for case in 0..60 {
        let n = r.gen_range(2..=4);
        let rank = r.gen_range(1..=n.min(2));
        let mut l = random_lattice(&mut r, n, rank, 5);
        if case % 3 == 0 {
            // force an index-two sublattice
            let mut b = l.basis().to_vec();
            b[0].iter_mut().for_each(|x| *x *= 2);
            if b[0].iter().all(|x| x.abs() <= 5) {
                l = IntegerLattice::new(n, b).unwrap();
            }
        }
        let expected = brute_force_saturated(&l, 10);
        assert_eq!(l.is_saturated(), expected, "{:?}", l.basis());
        assert!(l.saturation().is_saturated());
        seen[usize::from(expected)] += 1;
    }
    for _ in 0..5 {
        let l = random_lattice(&mut r, 4, 3, 3);
        assert_eq!(l.is_saturated(), brute_force_saturated(&l, 9), "{:?}", l.basis());
    }
    assert!(seen[0] > 5 && seen[1] > 5, "{seen:?}");
}

fn random_system(r: &mut StdRng, n: usize) -> SystemDefinition {
    SystemDefinition::new(
        random_poly(r, n, 2, 3),
        random_series(r, n, 4, 2, 2),
        random_structure(r, n, 1),
        0.3,
        ActionDomain::unbounded(n),
    )
    .unwrap()
}

#[test]
fn coordinate_changes_are_equivariant() {
    let mut r = rng(23);
    let mut checked = 0;
    for _ in 0..20 {
        let n = r.gen_range(2..=4);
        let sys = random_system(&mut r, n);
        let offset = (0..n).map(|_| ratio(r.gen_range(-3..=3), r.gen_range(1..=3))).collect();
        let t = UnimodularTransform::with_offset(random_unimodular(&mut r, n, 8), offset).unwrap();
        let moved = change_action_angle(&sys, &t).unwrap();
        let (v0, v1) = (sys.vector_field(), moved.vector_field());
        for _ in 0..50 {
            let a = random_point(&mut r, n, 1.0);
            let alpha = random_angles(&mut r, n);
            let s0 = PhaseState::new(a.clone(), alpha.clone());
            let s1 = PhaseState::new(t.map_actions(&a), t.map_angles(&alpha));
            let h0 = sys.hamiltonian().eval(&s0.a, &s0.alpha).unwrap();
            let h1 = moved.hamiltonian().eval(&s1.a, &s1.alpha).unwrap();
            assert!((h0 - h1).abs() <= 1e-9 * (1.0 + h0.abs()));
            let (da0, dal0) = v0.eval(&s0).unwrap();
            let (da1, dal1) = v1.eval(&s1).unwrap();
            let pushed: Vec<f64> = t.matrix().iter().map(|row| row.iter().zip(&da0).map(|(m, x)| *m as f64 * x).sum()).collect();
            let scale = 1.0 + da0.iter().chain(&dal0).fold(0.0f64, |m, x| m.max(x.abs()));
            for (x, y) in pushed.iter().zip(&da1).chain(t.map_angles(&dal0).iter().zip(&dal1)) {
                assert!((x - y).abs() <= 1e-9 * scale, "{x} vs {y}");
            }
            checked += 1;
        }
        // spectra correspond exactly at rational points
        for _ in 0..3 {
            let a: Vec<_> = (0..n).map(|_| ratio(r.gen_range(-9..=9), r.gen_range(1..=7))).collect();
            let before: Vec<MultiIndex> = sys.f.spectrum_exact(&a).unwrap().iter().map(|nu| t.map_harmonic(nu)).collect();
            let mut before = before;
            before.sort();
            let after: Vec<MultiIndex> = moved.f.spectrum_exact(&t.map_actions_exact(&a)).unwrap().into_iter().collect();
            assert_eq!(before, after);
        }
    }
    assert_eq!(checked, 1000);
}

#[test]
fn pendulum_reduction_round_trip() {
    let sys = pendulum5();
    let c = sys.c_tensor();
    let lattice = common_kernel_lattice(&c, &sys.domain, &KernelSampling::default()).unwrap();
    assert_eq!(lattice.unit_coordinates(), Some(vec![3, 4]));
    let verdict = is_strongly_hamiltonian(&sys.f, &c);
    assert!(verdict.verdict);
    let reduced = reduce(&sys, &verdict, &lattice, &[vec![1.0, 0.2, -0.3]]).unwrap();
    // the second start lies in the chaotic layer, where solver error is amplified
    let solver = Dop853::new(1e-12, 1e-14);
    for (x0, psi0) in [
        (PhaseState::new(vec![0.5, 0.0], vec![0.3, 0.0]), vec![0.0, 1.0, 2.0]),
        (PhaseState::new(vec![-1.0, 2.0], vec![1.5, 0.7]), vec![0.4, 0.0, -1.0]),
    ] {
        let err = consistency_error(&sys, &reduced[0], &x0, &psi0, 100.0, &solver, 200).unwrap();
        assert!(err <= 1e-6, "round trip error {err:e}");
    }
}

#[test]
fn reduction_through_a_completion() {
    // the kernel lattice of A_12 = a3 - a4 (n = 4) is not spanned by unit vectors
    let a = almost_symplectic::StructureMatrixField::from_upper(
        4,
        &[((0, 1), &ActionPolynomial::variable(4, 2) - &ActionPolynomial::variable(4, 3))],
    )
    .unwrap();
    let c = almost_symplectic::structure::c_tensor(&a);
    let lattice = common_kernel_lattice(&c, &ActionDomain::unbounded(4), &KernelSampling::default()).unwrap();
    assert_eq!(lattice.rank(), 1);
    assert_eq!(lattice.unit_coordinates(), None);
    let nu = &lattice.basis()[0];
    let f = almost_symplectic::FourierSeries::cos(MultiIndex(nu.clone()), ActionPolynomial::one(4));
    let k = almost_symplectic::expr::parse_polynomial("(a1^2 + a2^2 + a3^2 + a4^2)/2", 4).unwrap();
    let sys = SystemDefinition::new(k, f, a, 0.5, ActionDomain::unbounded(4)).unwrap();
    let t = complete_to_unimodular(&lattice).unwrap();
    let moved = change_action_angle(&sys, &t).unwrap();
    let straight = IntegerLattice::new(4, vec![t.map_harmonic(&MultiIndex(nu.clone())).0]).unwrap();
    assert_eq!(straight.unit_coordinates(), Some(vec![0]));
    let verdict = is_strongly_hamiltonian(&moved.f, &moved.c_tensor());
    assert!(verdict.verdict);
    let reduced = reduce(&moved, &verdict, &straight, &[vec![0.3, -0.2, 0.1]]).unwrap();
    let err = consistency_error(&moved, &reduced[0], &PhaseState::new(vec![0.4], vec![0.2]), &[0.0; 3], 50.0, &Dop853::default(), 100)
        .unwrap();
    assert!(err <= 1e-6, "{err:e}");
}
