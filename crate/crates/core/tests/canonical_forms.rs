mod common;

use common::{extend, random_orthogonal, random_riemannian, random_subriemannian, rel};
use heisgeo::linalg::{abs_pfaffian, max_abs, skew_block_form, symplectic_j};
use heisgeo::metric::{
    canonicalize, inner_automorphism_matrix, invariants, j_matrix, weak_canonicalize,
};
use heisgeo::MetricMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_metric(seed: u64) -> MetricMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3);
    if rng.gen_bool(0.8) {
        random_riemannian(&mut rng, n, 1e3)
    } else {
        random_subriemannian(&mut rng, n)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn reduction_reaches_block_form(seed in any::<u64>()) {
        let m = random_metric(seed);
        let c = canonicalize(&m).unwrap();
        let n = c.n;
        let par = &c.p * m.matrix() * &c.r;
        let scale = max_abs(m.matrix());
        prop_assert!(max_abs(&(par - c.block_matrix())) <= 1e-10 * scale);
        // R is orthogonal and P is an inner automorphism
        let rtr = c.r.transpose() * &c.r;
        prop_assert!(max_abs(&(rtr - DMatrix::identity(2 * n + 1, 2 * n + 1))) < 1e-12);
        prop_assert_eq!(&c.p, &inner_automorphism_matrix(&c.inner));
        // the j-matrix of the canonical Ã is in block normal form
        let j = j_matrix(&c.atilde);
        prop_assert!(max_abs(&(&j - skew_block_form(&c.d))) <= 1e-9 * max_abs(&j));
        prop_assert!(c.d.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(c.rho >= 0.0);
    }

    #[test]
    fn spectral_identities(seed in any::<u64>()) {
        let m = random_metric(seed);
        let inv = invariants(&m).unwrap();
        let sum_sq: f64 = inv.d.iter().map(|d| d * d).sum();
        prop_assert!((inv.delta - (2.0 * sum_sq).sqrt()).abs() <= 1e-9 * inv.delta);
        let prod: f64 = inv.d.iter().product();
        prop_assert!((inv.absdet - prod).abs() <= 1e-9 * inv.absdet);
        // |det Ã| is also the Pfaffian of the j-matrix of the weak form
        let w = weak_canonicalize(&m).unwrap();
        prop_assert!(rel(abs_pfaffian(&j_matrix(&w.atilde)), inv.absdet) < 1e-9);
    }

    #[test]
    fn invariants_ignore_right_orthogonal_action(seed in any::<u64>()) {
        let m = random_metric(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let n = m.n();
        let q = extend(&random_orthogonal(&mut rng, 2 * n), if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let moved = MetricMatrix::new(m.matrix() * q).unwrap();
        let a = invariants(&m).unwrap();
        let b = invariants(&moved).unwrap();
        for (x, y) in a.d.iter().zip(&b.d) {
            prop_assert!(rel(*x, *y) < 1e-9);
        }
        prop_assert!(rel(a.absdet, b.absdet) < 1e-9);
        prop_assert!((a.absrho - b.absrho).abs() <= 1e-9 * a.absrho.max(1e-300) || a.absrho == b.absrho);
    }
}

#[test]
fn inner_automorphism_only_touches_the_last_row() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let n = rng.gen_range(1..=3);
        let m = random_riemannian(&mut rng, n, 1e3);
        let block = canonicalize(&m).unwrap().block_matrix();
        let g = heisgeo::AlgebraVector::from_slice(
            &(0..2 * n + 1)
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let p = inner_automorphism_matrix(&g);
        let moved = MetricMatrix::new(&p * &block).unwrap();
        let w = weak_canonicalize(&moved).unwrap();
        // the reduction undoes the automorphism exactly up to rounding
        assert!(max_abs(&(&w.atilde - block.view((0, 0), (2 * n, 2 * n)))) < 1e-10);
        assert!(rel(w.rho, block[(2 * n, 2 * n)]) < 1e-10);
    }
}

#[test]
fn j_matrix_of_standard_frame_is_j() {
    for n in 1..=4 {
        assert_eq!(j_matrix(&DMatrix::identity(2 * n, 2 * n)), symplectic_j(n));
    }
}
