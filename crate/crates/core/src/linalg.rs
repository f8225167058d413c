//! Matrix kernels: the orthogonal normal form of skew-symmetric matrices,
//! the Hilbert–Schmidt norm, and exact shortest-vector search on small
//! lattices given by a Gram matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance on `‖S + Sᵀ‖_max` accepted as skew-symmetric.
pub const SKEW_TOLERANCE: f64 = 1e-10;

/// The standard symplectic matrix `J_n = [[0, I_n], [−I_n, 0]]`.
pub fn symplectic_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// The block matrix `[[0, diag(d)], [−diag(d), 0]]`.
pub fn skew_block_form(d: &[f64]) -> DMatrix<f64> {
    let n = d.len();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for (i, &di) in d.iter().enumerate() {
        m[(i, n + i)] = di;
        m[(n + i, i)] = -di;
    }
    m
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `√(Σ_ij M_ij²)`.
pub fn hilbert_schmidt_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `Rᵀ S R = [[0, diag(d)], [−diag(d), 0]]` with `R` orthogonal and `d` ascending.
#[derive(Debug, Clone)]
pub struct SkewNormalForm {
    pub rotation: DMatrix<f64>,
    pub d: Vec<f64>,
}

impl SkewNormalForm {
    pub fn block(&self) -> DMatrix<f64> {
        skew_block_form(&self.d)
    }
}

/// Orthogonal normal form of a real skew-symmetric `2n × 2n` matrix.
///
/// The eigenvectors of the positive semi-definite matrix `−S²` are grouped by
/// eigenvalue; inside each group, vectors `u` are picked greedily and paired
/// with `v = −S u / ‖S u‖`, so each pair spans an invariant plane on which
/// `S` acts as the block `[[0, d], [−d, 0]]`.
pub fn skew_normal_form(s: &DMatrix<f64>) -> Result<SkewNormalForm> {
    if !s.is_square() || s.nrows() == 0 || s.nrows() % 2 != 0 {
        return Err(Error::Domain(format!(
            "expected an even-dimensional square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let scale = max_abs(s);
    if !scale.is_finite() {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let skew_defect = max_abs(&(s + s.transpose()));
    if skew_defect > SKEW_TOLERANCE * scale {
        return Err(Error::Domain(format!(
            "matrix is not skew-symmetric (‖S + Sᵀ‖ = {skew_defect:e})"
        )));
    }
    let dim = s.nrows();
    let n = dim / 2;
    if scale == 0.0 {
        return Ok(SkewNormalForm {
            rotation: DMatrix::identity(dim, dim),
            d: vec![0.0; n],
        });
    }
    // Exact skew part; the scaled copy keeps the eigen-solver well conditioned.
    let s = (s - s.transpose()) * (0.5 / scale);
    let neg_sq = -(&s * &s);
    let neg_sq = (&neg_sq + neg_sq.transpose()) * 0.5;
    let eig = SymmetricEigen::new(neg_sq);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let vectors: Vec<DVector<f64>> = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).into_owned())
        .collect();

    let lam_max = values[dim - 1].max(f64::MIN_POSITIVE);
    let zero_tol = 1e-12 * lam_max.max(1.0);
    let cluster_tol = 1e-8 * lam_max.max(1.0);

    // Group indices into clusters of (numerically) equal eigenvalue.
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for k in 0..dim {
        match clusters.last_mut() {
            Some(c) if values[k] - values[*c.last().unwrap()] <= cluster_tol => c.push(k),
            _ => clusters.push(vec![k]),
        }
    }
    // Eigenvalues of −S² come in pairs; merge odd-sized clusters forward.
    let mut merged: Vec<Vec<usize>> = Vec::new();
    let mut carry: Vec<usize> = Vec::new();
    for c in clusters {
        carry.extend(c);
        if carry.len() % 2 == 0 {
            merged.push(std::mem::take(&mut carry));
        }
    }
    debug_assert!(carry.is_empty());

    let mut us: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut vs: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut chosen: Vec<DVector<f64>> = Vec::with_capacity(dim);
    for cluster in merged {
        let pairs = cluster.len() / 2;
        let is_kernel = values[*cluster.last().unwrap()] <= zero_tol;
        // Candidates are the coordinate vectors projected onto the eigenspace,
        // which makes the choice independent of the eigen-solver's basis.
        let basis: Vec<&DVector<f64>> = cluster.iter().map(|&k| &vectors[k]).collect();
        let candidates: Vec<DVector<f64>> = (0..dim)
            .map(|j| {
                let mut w = DVector::zeros(dim);
                for b in &basis {
                    w.axpy(b[j], b, 1.0);
                }
                w
            })
            .collect();
        let pick = |chosen: &[DVector<f64>]| -> DVector<f64> {
            let residuals: Vec<DVector<f64>> = candidates
                .iter()
                .map(|c| {
                    let mut w = c.clone();
                    for b in chosen {
                        let coeff = b.dot(&w);
                        w.axpy(-coeff, b, 1.0);
                    }
                    w
                })
                .collect();
            let best = residuals.iter().map(|w| w.norm()).fold(0.0, f64::max);
            residuals
                .into_iter()
                .find(|w| w.norm() >= best * (1.0 - 1e-9))
                .expect("nonempty")
                .normalize()
        };
        for _ in 0..pairs {
            let u = pick(&chosen);
            chosen.push(u.clone());
            let v = if is_kernel {
                pick(&chosen)
            } else {
                let mut v = -(&s * &u);
                for c in &chosen {
                    let coeff = c.dot(&v);
                    v.axpy(-coeff, c, 1.0);
                }
                v.normalize()
            };
            chosen.push(v.clone());
            us.push(u);
            vs.push(v);
        }
    }

    let mut rotation = DMatrix::zeros(dim, dim);
    for i in 0..n {
        rotation.set_column(i, &us[i]);
        rotation.set_column(n + i, &vs[i]);
    }
    let d: Vec<f64> = (0..n)
        .map(|i| us[i].dot(&(&s * &vs[i])).max(0.0) * scale)
        .collect();
    Ok(SkewNormalForm { rotation, d })
}

/// A shortest nonzero vector of the lattice `Zᵐ` with quadratic form `gram`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestVector {
    pub coeffs: Vec<i64>,
    pub norm: f64,
}

fn quadratic_form(gram: &DMatrix<f64>, v: &[i64]) -> f64 {
    let m = v.len();
    let mut acc = 0.0;
    for i in 0..m {
        if v[i] == 0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..m {
            row += gram[(i, j)] * v[j] as f64;
        }
        acc += v[i] as f64 * row;
    }
    acc
}

/// LLL reduction (δ = 0.99) of the basis with Gram matrix `gram`.
///
/// Returns the unimodular `U` such that `Uᵀ · gram · U` is reduced.
fn lll_reduce(gram: &DMatrix<f64>) -> DMatrix<i64> {
    let m = gram.nrows();
    let mut u = DMatrix::<i64>::identity(m, m);
    let delta = 0.99;
    let current = |u: &DMatrix<i64>| {
        let uf = u.map(|v| v as f64);
        uf.transpose() * gram * uf
    };
    // Gram–Schmidt coefficients and squared lengths from a Gram matrix.
    let gso = |g: &DMatrix<f64>| -> (DMatrix<f64>, Vec<f64>) {
        let mut mu = DMatrix::zeros(m, m);
        let mut b = vec![0.0; m];
        for i in 0..m {
            for j in 0..i {
                let mut s = g[(i, j)];
                for k in 0..j {
                    s -= mu[(j, k)] * mu[(i, k)] * b[k];
                }
                mu[(i, j)] = s / b[j];
            }
            let mut s = g[(i, i)];
            for k in 0..i {
                s -= mu[(i, k)] * mu[(i, k)] * b[k];
            }
            b[i] = s;
        }
        (mu, b)
    };

    let mut k = 1;
    let mut guard = 0usize;
    while k < m && guard < 100_000 {
        guard += 1;
        for j in (0..k).rev() {
            let (mu, _) = gso(&current(&u));
            let q = mu[(k, j)].round() as i64;
            if q != 0 {
                for row in 0..m {
                    u[(row, k)] -= q * u[(row, j)];
                }
            }
        }
        let (mu, b) = gso(&current(&u));
        if b[k] >= (delta - mu[(k, k - 1)] * mu[(k, k - 1)]) * b[k - 1] {
            k += 1;
        } else {
            u.swap_columns(k, k - 1);
            k = (k - 1).max(1);
        }
    }
    u
}

/// Exact shortest nonzero lattice vector for a small positive-definite Gram matrix.
///
/// The basis is LLL-reduced first and then searched exhaustively with
/// Fincke–Pohst enumeration. Among all minimisers (within a relative
/// tolerance of `1e-12`) the lexicographically smallest coefficient vector,
/// expressed in the original basis, is returned.
pub fn shortest_lattice_vector(gram: &DMatrix<f64>) -> Result<ShortestVector> {
    let m = gram.nrows();
    if !gram.is_square() || m == 0 {
        return Err(Error::Domain(
            "Gram matrix must be square and nonempty".into(),
        ));
    }
    let scale = max_abs(gram);
    if !scale.is_finite() || scale == 0.0 {
        return Err(Error::Domain(
            "Gram matrix must be finite and nonzero".into(),
        ));
    }
    if max_abs(&(gram - gram.transpose())) > 1e-10 * scale {
        return Err(Error::Domain("Gram matrix is not symmetric".into()));
    }
    let sym = (gram + gram.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if !(lo > 1e-12 * hi) {
        return Err(Error::Domain(format!(
            "Gram matrix is not positive definite (eigenvalues in [{lo:e}, {hi:e}])"
        )));
    }

    let u = lll_reduce(&sym);
    let uf = u.map(|v| v as f64);
    let reduced = uf.transpose() * &sym * &uf;
    let reduced = (&reduced + reduced.transpose()) * 0.5;

    // q-form: Q(x) = Σ_i q_ii (x_i + Σ_{j>i} q_ij x_j)²
    let mut q = reduced.clone();
    for i in 0..m {
        for j in (i + 1)..m {
            q[(j, i)] = q[(i, j)];
            q[(i, j)] /= q[(i, i)];
        }
        for k in (i + 1)..m {
            for l in k..m {
                q[(k, l)] -= q[(k, i)] * q[(i, l)];
            }
        }
    }

    let diag_min = (0..m)
        .map(|i| reduced[(i, i)])
        .fold(f64::INFINITY, f64::min);
    let slack = 1.0 + 1e-9;
    let mut radius = diag_min * slack;
    let mut best = f64::INFINITY;
    let mut candidates: Vec<(f64, Vec<i64>)> = Vec::new();

    // Depth-first enumeration from the last coordinate down.
    let mut x = vec![0i64; m];
    fn recurse(
        level: usize,
        partial: f64,
        q: &DMatrix<f64>,
        x: &mut Vec<i64>,
        radius: &mut f64,
        best: &mut f64,
        candidates: &mut Vec<(f64, Vec<i64>)>,
        sym: &DMatrix<f64>,
        uf: &DMatrix<f64>,
        slack: f64,
    ) {
        let m = x.len();
        let center: f64 = -((level + 1)..m)
            .map(|j| q[(level, j)] * x[j] as f64)
            .sum::<f64>();
        let qii = q[(level, level)];
        let room = (*radius - partial).max(0.0);
        let half = (room / qii).sqrt();
        let lo = (center - half).ceil() as i64;
        let hi = (center + half).floor() as i64;
        for xi in lo..=hi {
            x[level] = xi;
            let t = xi as f64 - center;
            let next = partial + qii * t * t;
            if next > *radius {
                continue;
            }
            if level == 0 {
                if x.iter().all(|&v| v == 0) {
                    continue;
                }
                // back to original coordinates: v = U x
                let orig: Vec<i64> = (0..m)
                    .map(|r| (0..m).map(|c| uf[(r, c)] as i64 * x[c]).sum())
                    .collect();
                let value = quadratic_form(sym, &orig);
                if value < *best {
                    *best = value;
                    *radius = value * slack;
                    candidates.retain(|(v, _)| *v <= *radius);
                }
                if value <= *radius {
                    candidates.push((value, orig));
                }
            } else {
                recurse(
                    level - 1,
                    next,
                    q,
                    x,
                    radius,
                    best,
                    candidates,
                    sym,
                    uf,
                    slack,
                );
            }
        }
        x[level] = 0;
    }
    recurse(
        m - 1,
        0.0,
        &q,
        &mut x,
        &mut radius,
        &mut best,
        &mut candidates,
        &sym,
        &uf,
        slack,
    );

    let tie = best * (1.0 + 1e-12);
    let coeffs = candidates
        .into_iter()
        .filter(|(v, _)| *v <= tie)
        .map(|(_, c)| c)
        .min()
        .ok_or_else(|| Error::Domain("enumeration found no lattice vector".into()))?;
    Ok(ShortestVector {
        coeffs,
        norm: best.sqrt(),
    })
}

/// `det(S)` for a skew matrix equals `pf(S)²`; returns `|pf(S)|` via the
/// determinant. Used as a consistency check on normal forms.
pub fn abs_pfaffian(s: &DMatrix<f64>) -> f64 {
    s.clone().determinant().abs().sqrt()
}
