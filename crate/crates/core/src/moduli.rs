//! The moduli space of left-invariant metrics on `Γ_r \ H_n`.
//!
//! Two metric matrices define isometric quotients when they differ by the
//! stabilizer of `Γ_r` on the left and an orthogonal change of frame on the
//! right. The stabilizer acts on `v_0` through
//! `Π_r = G_r ∩ {β : β J βᵀ = ±J}` with `G_r = diag(r) GL_{2n}(ℤ) diag(r)⁻¹`,
//! embedded as `ι(β) = blockdiag(β, ε(β))`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geodesics::vertical_distance;
use crate::group::LatticeSpec;
use crate::linalg::{max_abs, shortest_lattice_vector, symplectic_j};
use crate::metric::{canonicalize, CanonicalMetric, MetricMatrix};

/// Relative tolerance of the (anti-)symplectic test.
pub const SYMPLECTIC_TOLERANCE: f64 = 1e-9;
/// Absolute tolerance of the integrality test.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-9;

/// `diag(r_1, …, r_n, 1, …, 1)`, the basis of the projected lattice.
pub fn lattice_basis_scale(spec: &LatticeSpec) -> DMatrix<f64> {
    let n = spec.n();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i != j {
            0.0
        } else if i < n {
            spec.r()[i] as f64
        } else {
            1.0
        }
    })
}

/// Outcome of [`in_stabilizer`]. `epsilon` is `±1` when `β J βᵀ = ±J`
/// and `0` when `β` is neither symplectic nor anti-symplectic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Membership {
    pub member: bool,
    pub epsilon: i8,
}

fn symplectic_sign(beta: &DMatrix<f64>) -> i8 {
    let n = beta.nrows() / 2;
    let j = symplectic_j(n);
    let b = beta * &j * beta.transpose();
    let tol = SYMPLECTIC_TOLERANCE * max_abs(beta).powi(2).max(1.0);
    if max_abs(&(&b - &j)) <= tol {
        1
    } else if max_abs(&(&b + &j)) <= tol {
        -1
    } else {
        0
    }
}

/// Whether `beta` represents an element of the stabilizer of `Γ_r` on `v_0`.
pub fn in_stabilizer(beta: &DMatrix<f64>, spec: &LatticeSpec) -> Membership {
    let n = spec.n();
    if beta.nrows() != 2 * n || beta.ncols() != 2 * n || beta.iter().any(|v| !v.is_finite()) {
        return Membership {
            member: false,
            epsilon: 0,
        };
    }
    let epsilon = symplectic_sign(beta);
    let scale = lattice_basis_scale(spec);
    let inv = scale.clone().try_inverse().expect("positive diagonal");
    let conj = inv * beta * scale;
    let integral = conj
        .iter()
        .all(|v| (v - v.round()).abs() <= INTEGRALITY_TOLERANCE);
    Membership {
        member: epsilon != 0 && integral,
        epsilon,
    }
}

/// A validated element of `Π_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizerElement {
    beta: DMatrix<f64>,
    epsilon: i8,
}

impl StabilizerElement {
    pub fn new(beta: DMatrix<f64>, spec: &LatticeSpec) -> Result<Self> {
        let m = in_stabilizer(&beta, spec);
        if !m.member {
            return Err(Error::Domain(
                "matrix is not in the stabilizer of the lattice".into(),
            ));
        }
        Ok(Self {
            beta,
            epsilon: m.epsilon,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            beta: DMatrix::identity(2 * n, 2 * n),
            epsilon: 1,
        }
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn epsilon(&self) -> i8 {
        self.epsilon
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            beta: &self.beta * &other.beta,
            epsilon: self.epsilon * other.epsilon,
        }
    }

    /// `ι(β) = blockdiag(β, ε)`, acting on metric matrices from the left.
    pub fn embed(&self) -> DMatrix<f64> {
        let dim = self.beta.nrows() + 1;
        let mut m = DMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (dim - 1, dim - 1)).copy_from(&self.beta);
        m[(dim - 1, dim - 1)] = self.epsilon as f64;
        m
    }

    /// A random product of elementary stabilizer elements: symmetric integer
    /// shears in both directions, sign changes and the anti-symplectic flip.
    /// Entries of the shears are bounded by `max_shear` (in units of the
    /// lattice scale where required).
    pub fn random<R: Rng + ?Sized>(
        spec: &LatticeSpec,
        rng: &mut R,
        factors: usize,
        max_shear: i64,
    ) -> Self {
        let n = spec.n();
        let r = spec.r();
        let mut acc = Self::identity(n);
        for _ in 0..factors {
            let mut beta = DMatrix::identity(2 * n, 2 * n);
            let mut epsilon = 1;
            match rng.gen_range(0..4) {
                0 => {
                    // [[I, 0], [S, I]]
                    for i in 0..n {
                        for j in i..n {
                            let s = rng.gen_range(-max_shear..=max_shear) as f64;
                            beta[(n + i, j)] = s;
                            beta[(n + j, i)] = s;
                        }
                    }
                }
                1 => {
                    // [[I, S], [0, I]] with r_max(i,j) | S_ij
                    for i in 0..n {
                        for j in i..n {
                            let s = (rng.gen_range(-max_shear..=max_shear) * r[j] as i64) as f64;
                            beta[(i, n + j)] = s;
                            beta[(j, n + i)] = s;
                        }
                    }
                }
                2 => {
                    for i in 0..n {
                        if rng.gen_bool(0.5) {
                            beta[(i, i)] = -1.0;
                            beta[(n + i, n + i)] = -1.0;
                        }
                    }
                }
                _ => {
                    for i in 0..n {
                        beta[(n + i, n + i)] = -1.0;
                    }
                    epsilon = -1;
                }
            }
            acc = acc.compose(&Self { beta, epsilon });
        }
        acc
    }
}

/// Isometry-class invariants `(d, |det Ã|, |ρ|)`.
///
/// Equal classes have equal fingerprints; the converse is not decided here.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub d: Vec<f64>,
    pub absdet: f64,
    pub absrho: f64,
}

impl Fingerprint {
    pub fn of(c: &CanonicalMetric) -> Self {
        Self {
            d: c.d.clone(),
            absdet: c.abs_det(),
            absrho: c.rho.abs(),
        }
    }

    /// Largest relative deviation between the entries of two fingerprints.
    pub fn relative_distance(&self, other: &Self) -> f64 {
        if self.d.len() != other.d.len() {
            return f64::INFINITY;
        }
        let rel = |a: f64, b: f64| {
            let s = a.abs().max(b.abs());
            if s == 0.0 {
                0.0
            } else {
                (a - b).abs() / s
            }
        };
        self.d
            .iter()
            .zip(&other.d)
            .map(|(a, b)| rel(*a, *b))
            .chain([
                rel(self.absdet, other.absdet),
                rel(self.absrho, other.absrho),
            ])
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        self.relative_distance(other) <= rel_tol
    }
}

pub fn fingerprint(m: &MetricMatrix) -> Result<Fingerprint> {
    Ok(Fingerprint::of(&canonicalize(m)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Riemannian,
    SubRiemannian,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Riemannian => "riemannian",
            Mode::SubRiemannian => "subriemannian",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riemannian" => Ok(Mode::Riemannian),
            "subriemannian" | "sub-riemannian" => Ok(Mode::SubRiemannian),
            other => Err(Error::Domain(format!("unknown mode '{other}'"))),
        }
    }
}

/// Constants of the precompactness conditions derived from a diameter bound
/// `D`, a volume floor `V` and (Riemannian mode) a Ricci bound `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c_minus: Option<f64>,
    pub c_plus: f64,
    pub mode: Mode,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Riemannian mode: `C_2 = (4nD)^{−2n}`, `C_+ = Π r_i / (V C_2)`,
/// `C_3 = √(2K) C_+`, `C_− = C_2^{1/n} / √(2K)`, `C_1 = C_3^{−n} (4nD)^{−2n+1}`.
///
/// Sub-Riemannian mode: with `Q = Π r_i / (V C_2)`, `C_3 = Q` and
/// `C_+ = √(2n) Q` cover both orderings of `|ρ|` and `δ`; `C_1` as above.
pub fn geometry_constants(
    spec: &LatticeSpec,
    diameter: f64,
    volume: f64,
    ricci: Option<f64>,
    mode: Mode,
) -> Result<GeometryConstants> {
    check_positive("D", diameter)?;
    check_positive("V", volume)?;
    let n = spec.n() as f64;
    let four_n_d = 4.0 * n * diameter;
    let c2 = four_n_d.powf(-2.0 * n);
    let q = spec.covolume() / (volume * c2);
    let (c3, c_minus, c_plus) = match mode {
        Mode::Riemannian => {
            let k = ricci.ok_or_else(|| {
                Error::Domain("the Riemannian constants need a Ricci bound K".into())
            })?;
            check_positive("K", k)?;
            let root = (2.0 * k).sqrt();
            (root * q, Some(c2.powf(1.0 / n) / root), q)
        }
        Mode::SubRiemannian => (q, None, (2.0 * n).sqrt() * q),
    };
    let c1 = c3.powf(-n) * four_n_d.powf(-2.0 * n + 1.0);
    Ok(GeometryConstants {
        c1,
        c2,
        c3,
        c_minus,
        c_plus,
        mode,
    })
}

/// A one-sided condition `value ≥ bound` or `value ≤ bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Bound {
    fn at_least(value: f64, bound: f64) -> Self {
        Self {
            value,
            bound,
            pass: value >= bound,
        }
    }

    fn at_most(value: f64, bound: f64) -> Self {
        Self {
            value,
            bound,
            pass: value <= bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSided {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecompactnessReport {
    /// Shortest projected lattice vector vs `C_1`.
    pub a1: Bound,
    /// `|det Ã|` vs `C_2`.
    pub a2: Bound,
    /// `d_n` vs `C_3`.
    pub a3: Bound,
    /// `C_− ≤ |ρ| ≤ C_+` (Riemannian mode).
    pub a4: Option<TwoSided>,
    /// `|ρ| ≤ C_+` (sub-Riemannian mode).
    pub a4prime: Option<Bound>,
    pub mode: Mode,
}

impl PrecompactnessReport {
    pub fn all_pass(&self) -> bool {
        self.a1.pass
            && self.a2.pass
            && self.a3.pass
            && self.a4.is_none_or(|a| a.pass)
            && self.a4prime.is_none_or(|a| a.pass)
    }
}

/// Gram matrix of the projected lattice basis `{r_i X_i, Y_i}` in the
/// quotient inner product `⟨U, V⟩ = (Ã⁻¹U)·(Ã⁻¹V)`.
pub fn projected_lattice_gram(c: &CanonicalMetric, spec: &LatticeSpec) -> DMatrix<f64> {
    let m = &c.atilde_inv * lattice_basis_scale(spec);
    let g = m.transpose() * &m;
    (&g + g.transpose()) * 0.5
}

pub fn check_precompactness(
    m: &MetricMatrix,
    spec: &LatticeSpec,
    constants: &GeometryConstants,
) -> Result<PrecompactnessReport> {
    let c = canonicalize(m)?;
    if spec.n() != c.n {
        return Err(Error::Domain("lattice and metric dimensions differ".into()));
    }
    let shortest = shortest_lattice_vector(&projected_lattice_gram(&c, spec))?;
    let absrho = c.rho.abs();
    let (a4, a4prime) = match constants.mode {
        Mode::Riemannian => {
            let lower = constants.c_minus.unwrap_or(0.0);
            let upper = constants.c_plus;
            (
                Some(TwoSided {
                    value: absrho,
                    lower,
                    upper,
                    pass: lower <= absrho && absrho <= upper,
                }),
                None,
            )
        }
        Mode::SubRiemannian => (None, Some(Bound::at_most(absrho, constants.c_plus))),
    };
    Ok(PrecompactnessReport {
        a1: Bound::at_least(shortest.norm, constants.c1),
        a2: Bound::at_least(c.abs_det(), constants.c2),
        a3: Bound::at_most(c.d_max(), constants.c3),
        a4,
        a4prime,
        mode: constants.mode,
    })
}

/// Length of the central fiber: the distance from `e` to `exp(Z)`.
pub fn fiber_length(c: &CanonicalMetric) -> f64 {
    vertical_distance(c, 1.0).0
}

/// An upper bound on the diameter of `Γ_r \ H_n`: half the sum of the
/// projected basis lengths (covering radius bound of the flat torus) plus
/// the fiber length.
pub fn diameter_upper_bound(c: &CanonicalMetric, spec: &LatticeSpec) -> f64 {
    let m = &c.atilde_inv * lattice_basis_scale(spec);
    let torus: f64 = m.column_iter().map(|col| col.norm()).sum::<f64>() * 0.5;
    torus + fiber_length(c)
}

/// Volume of the Euclidean ball of radius `radius` in `ℝ^{2n}`: `π^n r^{2n} / n!`.
pub fn ball_volume(n: usize, radius: f64) -> f64 {
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    PI.powi(n as i32) * radius.powi(2 * n as i32) / factorial
}

/// Upper bound on `r_n` for quotients of diameter `≤ D` and minimal-Popp
/// volume `≥ V`: `max{64 D² |B|² V⁻², 16 D² |B| V⁻¹}` with `|B| = |B^{2n}(D)|`.
pub fn lattice_rank_bound(n: usize, diameter: f64, volume: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    check_positive("D", diameter)?;
    check_positive("V", volume)?;
    let b = ball_volume(n, diameter);
    let d2 = diameter * diameter;
    Ok((64.0 * d2 * b * b / (volume * volume)).max(16.0 * d2 * b / volume))
}

/// All lattice specs `r_1 | … | r_n` with `r_n ≤ ⌊bound⌋`.
pub fn enumerate_valid_lattices(n: usize, bound: f64) -> Result<Vec<LatticeSpec>> {
    if n == 0 || !bound.is_finite() || bound < 1.0 {
        return Err(Error::Domain(format!(
            "need n ≥ 1 and a finite bound ≥ 1, got {bound}"
        )));
    }
    Ok(LatticeSpec::enumerate(n, bound.floor() as u64))
}
