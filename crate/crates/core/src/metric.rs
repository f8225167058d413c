//! Left-invariant (sub-)Riemannian metrics on `H_n` given by a metric matrix.
//!
//! A matrix `A` of corank 0 or 1 defines the inner product on `Im A` for which
//! the columns `A X_1, …, A Z` are orthonormal. Up to an inner automorphism on
//! the left and an orthogonal change of frame on the right every such `A` is
//! brought to `blockdiag(Ã, ρ)` with `ᵗÃ J_n Ã = [[0, D], [−D, 0]]`,
//! `D = diag(d_1 ≤ … ≤ d_n)`. Everything in this module is computed from that
//! representative.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::group::{AlgebraVector, LatticeSpec};
use crate::linalg::{hilbert_schmidt_norm, max_abs, skew_normal_form, symplectic_j};

/// Relative singular-value threshold separating rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Below this relative singular value a direction is treated as exactly null.
/// Values between this and [`RANK_TOLERANCE`] are rejected as ambiguous.
pub const NULL_TOLERANCE: f64 = 1e-13;

fn singular_values_ascending(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(f64::total_cmp);
    sv
}

/// A validated metric matrix of corank 0 (Riemannian) or 1 (sub-Riemannian).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    n: usize,
    a: DMatrix<f64>,
    corank: usize,
}

impl MetricMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let dim = a.nrows();
        if !a.is_square() || dim < 3 || dim % 2 == 0 {
            return Err(Error::InvalidMetric(format!(
                "expected a (2n+1)x(2n+1) matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMetric("matrix has non-finite entries".into()));
        }
        let n = dim / 2;
        let sv = singular_values_ascending(&a);
        let top = sv[dim - 1];
        if top == 0.0 {
            return Err(Error::InvalidMetric("zero matrix".into()));
        }
        let classify = |s: f64| -> Option<bool> {
            if s > RANK_TOLERANCE * top {
                Some(true)
            } else if s <= NULL_TOLERANCE * top {
                Some(false)
            } else {
                None
            }
        };
        let corank = match (classify(sv[0]), classify(sv[1])) {
            (Some(true), _) => 0,
            (Some(false), Some(true)) => 1,
            (Some(false), Some(false)) => {
                return Err(Error::InvalidMetric("corank is larger than 1".into()))
            }
            _ => {
                return Err(Error::InvalidMetric(format!(
                    "rank is numerically ambiguous (relative singular value {:e})",
                    sv[0] / top
                )))
            }
        };
        // Bracket generation: the horizontal projection of Im A must be all of v_0.
        let horizontal = a.rows(0, 2 * n).into_owned();
        let hsv = singular_values_ascending(&horizontal);
        if hsv[0] <= RANK_TOLERANCE * hsv[hsv.len() - 1] {
            return Err(Error::NotBracketGenerating(
                "horizontal projection of Im A does not span v_0".into(),
            ));
        }
        Ok(Self { n, a, corank })
    }

    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::InvalidMetric(format!(
                "expected {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(
            entries,
        )))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn corank(&self) -> usize {
        self.corank
    }

    pub fn is_riemannian(&self) -> bool {
        self.corank == 0
    }
}

/// Output of [`weak_canonicalize`]: `P·A·R = blockdiag(Ã, ρ)`.
#[derive(Debug, Clone)]
pub struct WeakCanonical {
    pub p: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub atilde: DMatrix<f64>,
    pub rho: f64,
    /// The element `g` with `P = (i_g)_*`.
    pub inner: AlgebraVector,
}

/// The differential of the inner automorphism `i_g`: `[[I, 0], [g̃, 1]]`
/// with `g̃ = (−y_1, …, −y_n, x_1, …, x_n)`.
pub fn inner_automorphism_matrix(g: &AlgebraVector) -> DMatrix<f64> {
    let n = g.n();
    let mut p = DMatrix::identity(2 * n + 1, 2 * n + 1);
    for i in 0..n {
        p[(2 * n, i)] = -g.y()[i];
        p[(2 * n, n + i)] = g.x()[i];
    }
    p
}

/// Reduces `A` to `blockdiag(Ã, ρ)` by an inner automorphism on the left and an
/// orthogonal matrix on the right. `ρ` is made nonnegative with the sign
/// freedom of the last column of `R`; when `A` is already block diagonal with
/// `ρ ≥ 0`, `P = R = I`.
pub fn weak_canonicalize(m: &MetricMatrix) -> Result<WeakCanonical> {
    let n = m.n;
    let dim = 2 * n + 1;
    let a = &m.a;

    // Unit vector spanning the kernel of the top 2n rows.
    let mut padded = a.clone();
    padded.row_mut(2 * n).fill(0.0);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("nonempty");
    let mut kernel = v_t.row(imin).transpose().into_owned();
    kernel /= kernel.norm();

    let scale = max_abs(a);
    let rho_raw = a.row(2 * n).dot(&kernel.transpose());
    let flip = if m.corank == 0 && rho_raw.abs() > 0.0 {
        rho_raw < 0.0
    } else {
        let (imax, _) = kernel
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .expect("nonempty");
        kernel[imax] < 0.0
    };
    if flip {
        kernel = -kernel;
    }

    // Householder reflection mapping e_last to the kernel vector.
    let mut e_last = nalgebra::DVector::zeros(dim);
    e_last[2 * n] = 1.0;
    let diff = &e_last - &kernel;
    let r = if diff.norm() <= 1e-15 {
        DMatrix::identity(dim, dim)
    } else {
        let vv = diff.dot(&diff);
        DMatrix::identity(dim, dim) - (&diff * diff.transpose()) * (2.0 / vv)
    };

    let ar = a * &r;
    let atilde = ar.view((0, 0), (2 * n, 2 * n)).into_owned();
    let abar = ar.view((2 * n, 0), (1, 2 * n)).transpose();
    let rho = if m.corank == 1 {
        0.0
    } else {
        ar[(2 * n, 2 * n)].abs()
    };
    if m.corank == 0 && rho <= RANK_TOLERANCE * scale {
        return Err(Error::InvalidMetric("vanishing vertical scale".into()));
    }

    // g̃ solves ā + g̃ Ã = 0, i.e. Ãᵀ g̃ᵀ = −āᵀ.
    let lu = atilde.transpose().lu();
    let gt = lu
        .solve(&(-&abar))
        .ok_or_else(|| Error::NotBracketGenerating("Ã is singular".into()))?;
    let x: Vec<f64> = (0..n).map(|i| gt[n + i]).collect();
    let y: Vec<f64> = (0..n).map(|i| -gt[i]).collect();
    let inner = AlgebraVector::new(x, y, 0.0)?;
    let p = inner_automorphism_matrix(&inner);
    Ok(WeakCanonical {
        p,
        r,
        atilde,
        rho,
        inner,
    })
}

/// `ᵗÃ J_n Ã`, the matrix of the j-operator in the frame `A X_1, …, A Y_n`.
///
/// Entry `(i, j)` is the structure constant `ω([A X_i, A X_j])`.
pub fn j_matrix(atilde: &DMatrix<f64>) -> DMatrix<f64> {
    let n = atilde.nrows() / 2;
    atilde.transpose() * symplectic_j(n) * atilde
}

/// The canonical representative `blockdiag(Ã, ρ)` together with the reducing
/// transformations `P·A·R = blockdiag(Ã, ρ)`.
#[derive(Debug, Clone)]
pub struct CanonicalMetric {
    pub n: usize,
    pub atilde: DMatrix<f64>,
    pub atilde_inv: DMatrix<f64>,
    pub rho: f64,
    pub d: Vec<f64>,
    pub p: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub inner: AlgebraVector,
    pub source: MetricMatrix,
}

impl CanonicalMetric {
    /// `blockdiag(Ã, ρ)`.
    pub fn block_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(2 * n + 1, 2 * n + 1);
        m.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&self.atilde);
        m[(2 * n, 2 * n)] = self.rho;
        m
    }

    pub fn is_riemannian(&self) -> bool {
        self.source.is_riemannian()
    }

    pub fn d_max(&self) -> f64 {
        *self.d.last().expect("n ≥ 1")
    }

    pub fn abs_det(&self) -> f64 {
        self.atilde.determinant().abs()
    }

    pub fn delta(&self) -> f64 {
        hilbert_schmidt_norm(&j_matrix(&self.atilde))
    }

    /// Maps exponential coordinates of the source metric to those of the
    /// canonical representative (`W ↦ P W`).
    pub fn to_canonical(&self, w: &AlgebraVector) -> AlgebraVector {
        shift_z(w, self.inner.symplectic(w))
    }

    /// Inverse of [`CanonicalMetric::to_canonical`].
    pub fn to_source(&self, w: &AlgebraVector) -> AlgebraVector {
        shift_z(w, -self.inner.symplectic(w))
    }

    /// `‖U‖_A` of a horizontal vector `U` (given by its `2n` coordinates) in
    /// the quotient metric on `v_0`, i.e. `|Ã⁻¹ U|`.
    pub fn horizontal_norm(&self, u: &[f64]) -> f64 {
        (&self.atilde_inv * nalgebra::DVector::from_row_slice(u)).norm()
    }
}

// g̃·U = ω(g, U) for the row g̃ = (−y, x) of the inner automorphism.
fn shift_z(w: &AlgebraVector, dz: f64) -> AlgebraVector {
    AlgebraVector::new(w.x().to_vec(), w.y().to_vec(), w.z() + dz).expect("finite")
}

/// Full canonical form: weak canonical form followed by the orthogonal
/// normalisation of the j-matrix.
pub fn canonicalize(m: &MetricMatrix) -> Result<CanonicalMetric> {
    let weak = weak_canonicalize(m)?;
    let n = m.n;
    let nf = skew_normal_form(&j_matrix(&weak.atilde))?;
    if nf.d[0] <= 0.0 {
        return Err(Error::NotBracketGenerating("j-operator is singular".into()));
    }
    let atilde = &weak.atilde * &nf.rotation;
    let mut ext = DMatrix::identity(2 * n + 1, 2 * n + 1);
    ext.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&nf.rotation);
    let r = &weak.r * ext;
    let atilde_inv = atilde
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotBracketGenerating("Ã is singular".into()))?;
    Ok(CanonicalMetric {
        n,
        atilde,
        atilde_inv,
        rho: weak.rho,
        d: nf.d,
        p: weak.p,
        r,
        inner: weak.inner,
        source: m.clone(),
    })
}

/// Spectral invariants `(d, δ, |det Ã|, |ρ|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Invariants {
    pub d: Vec<f64>,
    pub delta: f64,
    pub absdet: f64,
    pub absrho: f64,
}

impl CanonicalMetric {
    pub fn invariants(&self) -> Invariants {
        Invariants {
            d: self.d.clone(),
            delta: self.delta(),
            absdet: self.abs_det(),
            absrho: self.rho.abs(),
        }
    }
}

pub fn invariants(m: &MetricMatrix) -> Result<Invariants> {
    Ok(canonicalize(m)?.invariants())
}

/// Ricci tensor in the orthonormal frame `A X_1, …, A Y_n, A Z` of the
/// canonical representative.
pub fn ricci_matrix(m: &MetricMatrix) -> Result<DMatrix<f64>> {
    if !m.is_riemannian() {
        return Err(Error::UnsupportedSubRiemannian);
    }
    Ok(canonicalize(m)?.ricci())
}

impl CanonicalMetric {
    /// See [`ricci_matrix`]. Panics on sub-Riemannian metrics.
    pub fn ricci(&self) -> DMatrix<f64> {
        assert!(
            self.is_riemannian(),
            "Ricci tensor needs a Riemannian metric"
        );
        let n = self.n;
        let two_rho_sq = 2.0 * self.rho * self.rho;
        let mut ric = DMatrix::zeros(2 * n + 1, 2 * n + 1);
        for (i, di) in self.d.iter().enumerate() {
            ric[(i, i)] = -di * di / two_rho_sq;
            ric[(n + i, n + i)] = -di * di / two_rho_sq;
        }
        ric[(2 * n, 2 * n)] = self.d.iter().map(|d| d * d).sum::<f64>() / two_rho_sq;
        ric
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VolumeKind {
    Riemannian,
    Popp,
    Tilted,
    Minimal,
}

impl VolumeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VolumeKind::Riemannian => "riemannian",
            VolumeKind::Popp => "popp",
            VolumeKind::Tilted => "tilted",
            VolumeKind::Minimal => "minimal",
        }
    }
}

impl std::str::FromStr for VolumeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riemannian" => Ok(VolumeKind::Riemannian),
            "popp" => Ok(VolumeKind::Popp),
            "tilted" => Ok(VolumeKind::Tilted),
            "minimal" => Ok(VolumeKind::Minimal),
            other => Err(Error::Domain(format!("unknown volume kind '{other}'"))),
        }
    }
}

/// Coefficient `c` of a left-invariant volume `c · X_1* ∧ … ∧ Y_n* ∧ Z*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeCoefficient {
    pub value: f64,
    pub kind: VolumeKind,
}

/// `|det Ã|⁻¹ |ρ|⁻¹`; `+∞` for sub-Riemannian metrics.
pub fn riemannian_volume_coeff(m: &MetricMatrix) -> Result<VolumeCoefficient> {
    Ok(canonicalize(m)?.riemannian_volume())
}

/// Popp volume of the horizontal distribution `v_0` of the canonical
/// representative: `δ(A)⁻¹ |det Ã|⁻¹`. For corank 1 this is the Popp volume
/// of the metric itself.
pub fn popp_volume_coeff(m: &MetricMatrix) -> Result<VolumeCoefficient> {
    Ok(canonicalize(m)?.popp_volume())
}

/// `min{|ρ|⁻¹, δ⁻¹} |det Ã|⁻¹`, with `|ρ|⁻¹ = +∞` when `ρ = 0`.
pub fn minimal_popp_coeff(m: &MetricMatrix) -> Result<VolumeCoefficient> {
    Ok(canonicalize(m)?.minimal_popp_volume())
}

/// Popp volume of the tilted distribution spanned by `A X_i + t_i Z`.
pub fn tilted_popp_coeff(m: &MetricMatrix, t: &[f64]) -> Result<VolumeCoefficient> {
    canonicalize(m)?.tilted_popp_volume(t)
}

impl CanonicalMetric {
    pub fn riemannian_volume(&self) -> VolumeCoefficient {
        let value = if self.rho == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (self.abs_det() * self.rho.abs())
        };
        VolumeCoefficient {
            value,
            kind: VolumeKind::Riemannian,
        }
    }

    pub fn popp_volume(&self) -> VolumeCoefficient {
        VolumeCoefficient {
            value: 1.0 / (self.delta() * self.abs_det()),
            kind: VolumeKind::Popp,
        }
    }

    pub fn minimal_popp_volume(&self) -> VolumeCoefficient {
        let inv_rho = if self.rho == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.rho.abs()
        };
        VolumeCoefficient {
            value: inv_rho.min(1.0 / self.delta()) / self.abs_det(),
            kind: VolumeKind::Minimal,
        }
    }

    /// Frame vectors are the columns of the canonical `Ã`; `t_i` tilts the
    /// `i`-th one towards `Z`.
    pub fn tilted_popp_volume(&self, t: &[f64]) -> Result<VolumeCoefficient> {
        if !self.is_riemannian() {
            return Err(Error::UnsupportedSubRiemannian);
        }
        if t.len() != 2 * self.n || t.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "tilt must have {} finite entries",
                2 * self.n
            )));
        }
        let c = j_matrix(&self.atilde);
        let w: Vec<f64> = t.iter().map(|ti| 1.0 + ti * ti).collect();
        let mut sum = 0.0;
        for i in 0..2 * self.n {
            for j in 0..2 * self.n {
                sum += c[(i, j)] * c[(i, j)] / (w[i] * w[j]);
            }
        }
        let stretch: f64 = w.iter().map(|v| v.sqrt()).product();
        Ok(VolumeCoefficient {
            value: stretch / (sum.sqrt() * self.abs_det()),
            kind: VolumeKind::Tilted,
        })
    }
}

/// Structure constants `c_ij^h` of a frame: `[F_i, F_j] = Σ_h c_ij^h F_h`.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    dim: usize,
    c: Vec<f64>,
}

impl StructureConstants {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            c: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, h: usize) -> f64 {
        self.c[(i * self.dim + j) * self.dim + h]
    }

    pub fn set(&mut self, i: usize, j: usize, h: usize, value: f64) {
        let dim = self.dim;
        self.c[(i * dim + j) * dim + h] = value;
    }

    /// Structure constants of the frame whose vectors are the columns of
    /// `frame` (coordinates in the basis `X_1, …, Z` of `h_n`).
    pub fn of_frame(frame: &DMatrix<f64>) -> Result<Self> {
        let dim = frame.nrows();
        let lu = frame.clone().lu();
        let cols: Vec<AlgebraVector> = (0..dim)
            .map(|k| AlgebraVector::from_slice(frame.column(k).as_slice()))
            .collect::<Result<_>>()?;
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let b = cols[i].bracket(&cols[j]);
                let rhs = nalgebra::DVector::from_vec(b.to_vec());
                let coeffs = lu
                    .solve(&rhs)
                    .ok_or_else(|| Error::Domain("frame is singular".into()))?;
                for h in 0..dim {
                    out.set(i, j, h, coeffs[h]);
                }
            }
        }
        Ok(out)
    }
}

/// Popp volume `det(B)^(−1/2)` in the coframe dual to a 2-step adapted frame,
/// where the first `m` vectors are orthonormal and
/// `B_hl = Σ_{i,j ≤ m} c_ij^h c_ij^l` for `h, l > m`.
pub fn popp_coeff_from_structure(
    constants: &StructureConstants,
    m: usize,
    n_total: usize,
) -> Result<VolumeCoefficient> {
    if constants.dim() != n_total || m == 0 || m > n_total {
        return Err(Error::Domain(format!(
            "inconsistent dimensions (frame {}, m {m}, total {n_total})",
            constants.dim()
        )));
    }
    let k = n_total - m;
    if k == 0 {
        return Ok(VolumeCoefficient {
            value: 1.0,
            kind: VolumeKind::Popp,
        });
    }
    let mut b = DMatrix::zeros(k, k);
    for h in 0..k {
        for l in 0..k {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += constants.get(i, j, m + h) * constants.get(i, j, m + l);
                }
            }
            b[(h, l)] = s;
        }
    }
    let eig = SymmetricEigen::new(b.clone());
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if !(hi > 0.0 && lo > 1e-12 * hi) {
        return Err(Error::NotBracketGenerating(
            "the bracket Gram matrix B is singular".into(),
        ));
    }
    Ok(VolumeCoefficient {
        value: b.determinant().powf(-0.5),
        kind: VolumeKind::Popp,
    })
}

/// Popp coefficient with respect to the Haar form `X_1* ∧ … ∧ Z*` for the
/// adapted frame given by the columns of `frame`.
pub fn popp_coeff_in_haar_frame(frame: &DMatrix<f64>, m: usize) -> Result<VolumeCoefficient> {
    let constants = StructureConstants::of_frame(frame)?;
    let in_frame = popp_coeff_from_structure(&constants, m, frame.nrows())?;
    Ok(VolumeCoefficient {
        value: in_frame.value / frame.determinant().abs(),
        kind: VolumeKind::Popp,
    })
}

/// Total measure of `Γ_r \ H_n`: `(Π r_i) · c`.
pub fn total_measure(spec: &LatticeSpec, coeff: &VolumeCoefficient) -> f64 {
    spec.covolume() * coeff.value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::skew_block_form;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(entries: &[f64]) -> MetricMatrix {
        MetricMatrix::diagonal(entries).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn block_residual(m: &MetricMatrix, c: &CanonicalMetric) -> f64 {
        let par = &c.p * m.matrix() * &c.r;
        max_abs(&(par - c.block_matrix())) / max_abs(m.matrix())
    }

    #[test]
    fn validation() {
        assert!(matches!(
            MetricMatrix::from_row_slice(2, &[1.0, 0.0, 0.0, 1.0]),
            Err(Error::InvalidMetric(_))
        ));
        assert!(matches!(
            MetricMatrix::diagonal(&[1.0, 0.0, 0.0]),
            Err(Error::InvalidMetric(_))
        ));
        // corank 1 with kernel inside v_0: horizontal projection is rank-deficient
        assert!(matches!(
            MetricMatrix::diagonal(&[1.0, 0.0, 1.0]),
            Err(Error::NotBracketGenerating(_))
        ));
        assert!(matches!(
            MetricMatrix::diagonal(&[1.0, 1.0, 1e-11]),
            Err(Error::InvalidMetric(_))
        ));
        assert_eq!(diag(&[1.0, 1.0, 0.0]).corank(), 1);
        assert_eq!(diag(&[1.0, 1.0, 1e-9]).corank(), 0);
    }

    #[test]
    fn already_block_diagonal_is_untouched() {
        let m = MetricMatrix::from_row_slice(3, &[2.0, 1.0, 0.0, 0.5, 3.0, 0.0, 0.0, 0.0, 0.7])
            .unwrap();
        let w = weak_canonicalize(&m).unwrap();
        assert_eq!(w.p, DMatrix::identity(3, 3));
        assert_eq!(w.r, DMatrix::identity(3, 3));
        assert_eq!(w.rho, 0.7);
    }

    #[test]
    fn inner_automorphism_removes_last_row() {
        let m = MetricMatrix::from_row_slice(3, &[2.0, 1.0, 0.0, 0.5, 3.0, 0.0, 0.3, -0.8, 0.7])
            .unwrap();
        let w = weak_canonicalize(&m).unwrap();
        assert_eq!(w.r, DMatrix::identity(3, 3));
        let abar = DMatrix::from_row_slice(1, 2, &[0.3, -0.8]);
        let expected = -(abar * w.atilde.clone().try_inverse().unwrap());
        for j in 0..2 {
            assert!((w.p[(2, j)] - expected[(0, j)]).abs() < 1e-12);
        }
        let par = &w.p * m.matrix() * &w.r;
        assert!(par[(2, 0)].abs() < 1e-12 && par[(2, 1)].abs() < 1e-12);
    }

    #[test]
    fn tilted_kernel_is_rotated_to_z() {
        // corank 1, kernel spanned by (1, 0, 1)/√2
        let m = MetricMatrix::from_row_slice(3, &[1.0, 0.0, -1.0, 0.0, 2.0, 0.0, 0.5, 0.0, -0.5])
            .unwrap();
        assert_eq!(m.corank(), 1);
        let c = canonicalize(&m).unwrap();
        assert_eq!(c.rho, 0.0);
        assert!(block_residual(&m, &c) < 1e-9);
    }

    #[test]
    fn canonical_examples() {
        for k in [1.0, 3.0, 10.0] {
            let c = canonicalize(&diag(&[1.0, 1.0, 1.0 / k])).unwrap();
            assert!(max_abs(&(&c.atilde.abs() - DMatrix::<f64>::identity(2, 2))) < 1e-12);
            assert!(rel(c.rho, 1.0 / k) < 1e-15);
            assert!(rel(c.d[0], 1.0) < 1e-12);

            let c = canonicalize(&diag(&[k, 1.0, 1.0 / k])).unwrap();
            assert!(rel(c.d[0], k) < 1e-12);
        }
        let c = canonicalize(&diag(&[1.0, 1.0, 0.0])).unwrap();
        assert_eq!(c.rho, 0.0);
        assert!(rel(c.d[0], 1.0) < 1e-12);
    }

    #[test]
    fn j_matrix_examples() {
        assert_eq!(j_matrix(&DMatrix::identity(2, 2)), symplectic_j(1));
        let k = 4.0;
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[k, 1.0]));
        assert_eq!(j_matrix(&a), skew_block_form(&[k]));
    }

    #[test]
    fn j_matrix_matches_bracket_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(1..=3);
            let a = DMatrix::from_fn(2 * n, 2 * n, |_, _| rng.gen_range(-2.0..2.0));
            let j = j_matrix(&a);
            for i in 0..2 * n {
                for k in 0..2 * n {
                    let ci = AlgebraVector::from_parts(a.column(i).as_slice(), 0.0).unwrap();
                    let ck = AlgebraVector::from_parts(a.column(k).as_slice(), 0.0).unwrap();
                    assert!((j[(i, k)] - ci.bracket(&ck).z()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn invariants_examples() {
        let k = 7.0;
        let inv = invariants(&diag(&[1.0, 1.0, 1.0 / k])).unwrap();
        assert!(rel(inv.d[0], 1.0) < 1e-12);
        assert!(rel(inv.delta, 2f64.sqrt()) < 1e-12);
        assert!(rel(inv.absdet, 1.0) < 1e-12);
        assert!(rel(inv.absrho, 1.0 / k) < 1e-12);

        let inv = invariants(&diag(&[k, 1.0, 1.0 / k])).unwrap();
        assert!(rel(inv.d[0], k) < 1e-12);
        assert!(rel(inv.delta, 2f64.sqrt() * k) < 1e-12);
        assert!(rel(inv.absdet, k) < 1e-12);
    }

    #[test]
    fn ricci_examples() {
        let ric = ricci_matrix(&diag(&[1.0, 1.0, 1.0])).unwrap();
        let expected =
            DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[-0.5, -0.5, 0.5]));
        assert!(max_abs(&(ric - expected)) < 1e-12);
        for k in [1.0, 10.0, 100.0] {
            let ric = ricci_matrix(&diag(&[1.0, 1.0, 1.0 / k])).unwrap();
            assert!(rel(ric[(2, 2)], k * k / 2.0) < 1e-12);
            assert_eq!(ric[(0, 2)], 0.0);
        }
        assert!(matches!(
            ricci_matrix(&diag(&[1.0, 1.0, 0.0])),
            Err(Error::UnsupportedSubRiemannian)
        ));
    }

    #[test]
    fn volume_examples() {
        let r1 = LatticeSpec::unit(1);
        for k in [1.0, 10.0, 100.0] {
            let a = diag(&[1.0, 1.0, 1.0 / k]);
            assert!(rel(riemannian_volume_coeff(&a).unwrap().value, k) < 1e-12);
            assert!(rel(minimal_popp_coeff(&a).unwrap().value, 0.5f64.sqrt()) < 1e-12);
            assert!(rel(total_measure(&r1, &riemannian_volume_coeff(&a).unwrap()), k) < 1e-12);
            let b = diag(&[k, 1.0, 1.0 / k]);
            assert!(rel(riemannian_volume_coeff(&b).unwrap().value, 1.0) < 1e-12);
            assert!(
                rel(
                    minimal_popp_coeff(&b).unwrap().value,
                    1.0 / (2f64.sqrt() * k * k)
                ) < 1e-12
            );
        }
        assert_eq!(
            riemannian_volume_coeff(&diag(&[1.0, 1.0, 1.0]))
                .unwrap()
                .value,
            1.0
        );
        let sub = diag(&[1.0, 1.0, 0.0]);
        assert_eq!(riemannian_volume_coeff(&sub).unwrap().value, f64::INFINITY);
        assert!(rel(minimal_popp_coeff(&sub).unwrap().value, 0.5f64.sqrt()) < 1e-12);

        let coeff = VolumeCoefficient {
            value: 1.0,
            kind: VolumeKind::Minimal,
        };
        assert_eq!(
            total_measure(&LatticeSpec::new(vec![2]).unwrap(), &coeff),
            2.0
        );
    }

    #[test]
    fn popp_structure_examples() {
        // standard H_1 frame: c_12^3 = 1 = −c_21^3
        let frame = DMatrix::identity(3, 3);
        let c = StructureConstants::of_frame(&frame).unwrap();
        assert_eq!(c.get(0, 1, 2), 1.0);
        assert_eq!(c.get(1, 0, 2), -1.0);
        let v = popp_coeff_from_structure(&c, 2, 3).unwrap();
        assert!(rel(v.value, 0.5f64.sqrt()) < 1e-15);
        assert_eq!(popp_coeff_from_structure(&c, 3, 3).unwrap().value, 1.0);
        // a frame whose first two vectors commute is not bracket generating
        let bad = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let c = StructureConstants::of_frame(&bad).unwrap();
        assert!(matches!(
            popp_coeff_from_structure(&c, 2, 3),
            Err(Error::NotBracketGenerating(_))
        ));
    }

    #[test]
    fn tilted_examples() {
        let id = diag(&[1.0, 1.0, 1.0]);
        let t0 = tilted_popp_coeff(&id, &[0.0, 0.0]).unwrap().value;
        assert!(rel(t0, popp_volume_coeff(&id).unwrap().value) < 1e-15);
        let t1 = tilted_popp_coeff(&id, &[1.0, 0.0]).unwrap().value;
        assert!(rel(t1, 2f64.sqrt()) < 1e-14);
        assert!(t1 > 0.5f64.sqrt());
        // agrees with the generic Popp formula on the tilted frame
        let t = [0.7f64, -1.3];
        let mut frame = DMatrix::identity(3, 3);
        for i in 0..2 {
            let s = (1.0 + t[i] * t[i]).sqrt();
            frame[(i, i)] = 1.0 / s;
            frame[(2, i)] = t[i] / s;
        }
        let generic = popp_coeff_in_haar_frame(&frame, 2).unwrap().value;
        assert!(rel(tilted_popp_coeff(&id, &t).unwrap().value, generic) < 1e-12);
    }

    #[test]
    fn source_and_canonical_coordinates_are_inverse() {
        let m = MetricMatrix::from_row_slice(3, &[2.0, 1.0, 0.0, 0.5, 3.0, 0.0, 0.3, -0.8, 0.7])
            .unwrap();
        let c = canonicalize(&m).unwrap();
        let w = AlgebraVector::from_slice(&[0.4, -1.1, 2.5]).unwrap();
        let back = c.to_source(&c.to_canonical(&w));
        assert!(back.max_abs_diff(&w) < 1e-14);
        // P acts on coordinates exactly like to_canonical
        let pw = &c.p * nalgebra::DVector::from_vec(w.to_vec());
        assert!((pw[2] - c.to_canonical(&w).z()).abs() < 1e-14);
    }
}
