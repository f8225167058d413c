mod common;

use common::{random_riemannian, random_subriemannian, rel};
use heisgeo::metric::{
    canonicalize, minimal_popp_coeff, popp_coeff_in_haar_frame, popp_volume_coeff,
    riemannian_volume_coeff, tilted_popp_coeff, weak_canonicalize,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The frame `Ã X_1, …, Ã Y_n, Z` of the weak canonical form in the
/// coordinates of the block-diagonal representative.
fn weak_frame(atilde: &DMatrix<f64>) -> DMatrix<f64> {
    let k = atilde.nrows();
    let mut f = DMatrix::identity(k + 1, k + 1);
    f.view_mut((0, 0), (k, k)).copy_from(atilde);
    f
}

#[test]
fn structure_constant_popp_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..200 {
        let n = rng.gen_range(1..=3);
        let m = if i % 4 == 0 {
            random_subriemannian(&mut rng, n)
        } else {
            random_riemannian(&mut rng, n, 1e3)
        };
        let w = weak_canonicalize(&m).unwrap();
        let generic = popp_coeff_in_haar_frame(&weak_frame(&w.atilde), 2 * n)
            .unwrap()
            .value;
        let closed = popp_volume_coeff(&m).unwrap().value;
        assert!(rel(generic, closed) < 1e-10, "{generic} vs {closed}");
    }
}

#[test]
fn minimal_popp_is_below_both_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..200 {
        let n = rng.gen_range(1..=3);
        let m = random_riemannian(&mut rng, n, 1e3);
        let minimal = minimal_popp_coeff(&m).unwrap().value;
        assert!(minimal <= riemannian_volume_coeff(&m).unwrap().value * (1.0 + 1e-14));
        assert!(minimal <= popp_volume_coeff(&m).unwrap().value * (1.0 + 1e-14));
    }
}

#[test]
fn tilted_volume_is_minimised_without_tilt() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let n = rng.gen_range(1..=2);
        let m = random_riemannian(&mut rng, n, 1e2);
        let base = tilted_popp_coeff(&m, &vec![0.0; 2 * n]).unwrap().value;
        for _ in 0..1000 {
            let t: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            if t.iter().all(|v| *v == 0.0) {
                continue;
            }
            assert!(tilted_popp_coeff(&m, &t).unwrap().value > base);
        }
    }
}

#[test]
fn tilted_volume_matches_generic_popp_on_the_tilted_frame() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..50 {
        let n = rng.gen_range(1..=2);
        let m = random_riemannian(&mut rng, n, 1e2);
        let c = canonicalize(&m).unwrap();
        let t: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut frame = weak_frame(&c.atilde);
        for i in 0..2 * n {
            let s = (1.0 + t[i] * t[i]).sqrt();
            for r in 0..2 * n {
                frame[(r, i)] /= s;
            }
            frame[(2 * n, i)] = t[i] / s;
        }
        let generic = popp_coeff_in_haar_frame(&frame, 2 * n).unwrap().value;
        assert!(rel(generic, tilted_popp_coeff(&m, &t).unwrap().value) < 1e-10);
    }
}
