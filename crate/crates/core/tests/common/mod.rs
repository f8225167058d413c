#![allow(dead_code)]

use heisgeo::MetricMatrix;
use nalgebra::DMatrix;
use rand::Rng;

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        // Box–Muller
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    })
}

pub fn random_orthogonal<R: Rng>(rng: &mut R, k: usize) -> DMatrix<f64> {
    let q = gaussian_matrix(rng, k, k).qr().q();
    if rng.gen_bool(0.5) {
        let mut q = q;
        q.column_mut(0).neg_mut();
        q
    } else {
        q
    }
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.max() / sv.min()
}

/// A random invertible metric matrix with condition number at most `max_cond`.
pub fn random_riemannian<R: Rng>(rng: &mut R, n: usize, max_cond: f64) -> MetricMatrix {
    loop {
        let a = gaussian_matrix(rng, 2 * n + 1, 2 * n + 1);
        if condition(&a) <= max_cond {
            if let Ok(m) = MetricMatrix::new(a) {
                return m;
            }
        }
    }
}

/// A random corank-1 metric matrix: the last column is a combination of the
/// others, so the kernel has a nonzero `Z` component.
pub fn random_subriemannian<R: Rng>(rng: &mut R, n: usize) -> MetricMatrix {
    loop {
        let b = gaussian_matrix(rng, 2 * n + 1, 2 * n);
        let c = gaussian_matrix(rng, 2 * n, 1);
        let last = &b * c;
        let mut a = DMatrix::zeros(2 * n + 1, 2 * n + 1);
        a.view_mut((0, 0), (2 * n + 1, 2 * n)).copy_from(&b);
        a.set_column(2 * n, &last.column(0));
        if condition(&b) <= 1e3 {
            if let Ok(m) = MetricMatrix::new(a) {
                return m;
            }
        }
    }
}

/// `blockdiag(q, s)`.
pub fn extend(q: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    let k = q.nrows();
    let mut m = DMatrix::zeros(k + 1, k + 1);
    m.view_mut((0, 0), (k, k)).copy_from(q);
    m[(k, k)] = s;
    m
}

pub fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}
