//! Normal geodesics and distances of left-invariant metrics on `H_n`.
//!
//! Momenta are covectors written in the orthonormal frame
//! `Ã X_1, …, Ã Y_n, ρ Z` of the canonical representative. Points handed in
//! and out are group elements in the exponential coordinates of the *source*
//! metric matrix; the inner automorphism relating the two is applied
//! internally.
//!
//! In frame coordinates `(x, y, z)` (horizontal part `Ã⁻¹ U`) the algebra has
//! brackets `[X_i, Y_i] = d_i Z`, and the normal geodesic with initial
//! covector `p` is, with `ξ_i = p_z d_i`,
//!
//! ```text
//! x_i + √−1 y_i = (p_{x_i} + √−1 p_{y_i}) (e^{√−1 ξ_i t} − 1) / (√−1 ξ_i)
//! z             = ρ² p_z t + ½ Σ d_i (ξ_i t − sin ξ_i t) / ξ_i² · (p_{x_i}² + p_{y_i}²)
//! ```

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::group::{AlgebraVector, GroupElement, LatticeSpec};
use crate::metric::CanonicalMetric;

/// Initial covector `(p_x, p_y, p_z)` of a normal extremal.
#[derive(Debug, Clone, PartialEq)]
pub struct Momentum {
    px: Vec<f64>,
    py: Vec<f64>,
    pz: f64,
}

impl Momentum {
    pub fn new(px: Vec<f64>, py: Vec<f64>, pz: f64) -> Result<Self> {
        if px.len() != py.len() || px.is_empty() {
            return Err(Error::Domain(format!(
                "p_x and p_y must have the same positive length ({} vs {})",
                px.len(),
                py.len()
            )));
        }
        if px.iter().chain(&py).any(|v| !v.is_finite()) || !pz.is_finite() {
            return Err(Error::Domain("momentum has non-finite entries".into()));
        }
        Ok(Self { px, py, pz })
    }

    /// From `2n + 1` numbers `(p_x, p_y, p_z)`.
    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        if coords.len() < 3 || coords.len() % 2 == 0 {
            return Err(Error::Domain(format!(
                "momentum needs 2n+1 entries, got {}",
                coords.len()
            )));
        }
        let n = coords.len() / 2;
        Self::new(
            coords[..n].to_vec(),
            coords[n..2 * n].to_vec(),
            coords[2 * n],
        )
    }

    pub fn zero(n: usize) -> Self {
        Self {
            px: vec![0.0; n],
            py: vec![0.0; n],
            pz: 0.0,
        }
    }

    pub fn vertical(n: usize, pz: f64) -> Self {
        Self {
            pz,
            ..Self::zero(n)
        }
    }

    pub fn n(&self) -> usize {
        self.px.len()
    }

    pub fn px(&self) -> &[f64] {
        &self.px
    }

    pub fn py(&self) -> &[f64] {
        &self.py
    }

    pub fn pz(&self) -> f64 {
        self.pz
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.px.clone();
        v.extend_from_slice(&self.py);
        v.push(self.pz);
        v
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            px: self.px.iter().map(|v| v * s).collect(),
            py: self.py.iter().map(|v| v * s).collect(),
            pz: self.pz * s,
        }
    }

    /// `Σ (p_x² + p_y²) + ρ² p_z²`, twice the Hamiltonian.
    pub fn speed_squared(&self, c: &CanonicalMetric) -> f64 {
        let h: f64 = self.px.iter().chain(&self.py).map(|v| v * v).sum();
        h + c.rho * c.rho * self.pz * self.pz
    }

    pub fn normalized(&self, c: &CanonicalMetric) -> Result<Self> {
        let s = self.speed_squared(c).sqrt();
        if s == 0.0 {
            return Err(Error::Domain(
                "cannot normalise a zero-speed momentum".into(),
            ));
        }
        Ok(self.scaled(1.0 / s))
    }

    pub fn is_unit(&self, c: &CanonicalMetric) -> bool {
        (self.speed_squared(c) - 1.0).abs() <= 1e-12
    }
}

/// A unit- or constant-speed normal geodesic segment starting at the identity.
#[derive(Debug, Clone)]
pub struct GeodesicArc {
    pub metric: CanonicalMetric,
    pub momentum: Momentum,
    pub duration: f64,
}

impl GeodesicArc {
    pub fn new(metric: CanonicalMetric, momentum: Momentum, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::Domain("duration must be positive and finite".into()));
        }
        if momentum.n() != metric.n {
            return Err(Error::Domain(
                "momentum dimension does not match the metric".into(),
            ));
        }
        Ok(Self {
            metric,
            momentum,
            duration,
        })
    }

    pub fn point(&self, t: f64) -> GroupElement {
        geodesic_point(&self.metric, &self.momentum, t)
    }

    pub fn endpoint(&self) -> GroupElement {
        self.point(self.duration)
    }

    /// Frame components of `γ̇(t)`: the rotated horizontal covector and `ρ p_z`.
    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let n = self.metric.n;
        let p = &self.momentum;
        let mut v = vec![0.0; 2 * n + 1];
        for i in 0..n {
            let (s, co) = (p.pz * self.metric.d[i] * t).sin_cos();
            v[i] = p.px[i] * co - p.py[i] * s;
            v[n + i] = p.px[i] * s + p.py[i] * co;
        }
        v[2 * n] = self.metric.rho * p.pz;
        v
    }

    pub fn speed(&self, t: f64) -> f64 {
        self.velocity(t).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `γ(t)` sampled at `samples + 1` equally spaced times.
    pub fn sample(&self, samples: usize) -> Vec<(f64, GroupElement)> {
        let samples = samples.max(1);
        (0..=samples)
            .map(|k| {
                let t = self.duration * k as f64 / samples as f64;
                (t, self.point(t))
            })
            .collect()
    }
}

const SERIES_CUTOFF: f64 = 1e-2;

/// `[sin ξ/ξ, (1 − cos ξ)/ξ, (ξ − sin ξ)/ξ²]` and their derivatives in `ξ`.
fn kernels(xi: f64) -> [f64; 6] {
    if xi.abs() < SERIES_CUTOFF {
        let x2 = xi * xi;
        let x4 = x2 * x2;
        [
            1.0 - x2 / 6.0 + x4 / 120.0,
            xi * (0.5 - x2 / 24.0 + x4 / 720.0),
            xi * (1.0 / 6.0 - x2 / 120.0 + x4 / 5040.0),
            xi * (-1.0 / 3.0 + x2 / 30.0),
            0.5 - x2 / 8.0 + x4 / 144.0,
            1.0 / 6.0 - x2 / 40.0 + x4 / 1008.0,
        ]
    } else {
        let (s, co) = xi.sin_cos();
        let half = (0.5 * xi).sin();
        let one_minus_cos = 2.0 * half * half;
        let x2 = xi * xi;
        let w = (xi - s) / x2;
        [
            s / xi,
            one_minus_cos / xi,
            w,
            (xi * co - s) / x2,
            (xi * s - one_minus_cos) / x2,
            one_minus_cos / x2 - 2.0 * w / xi,
        ]
    }
}

/// The time-one exponential map in frame coordinates, `q ↦ (x, y, z)`.
/// With `jac` given, also writes the row-major Jacobian.
fn frame_map(d: &[f64], rho2: f64, q: &[f64], out: &mut [f64], jac: Option<&mut [f64]>) {
    let n = d.len();
    let dim = 2 * n + 1;
    let qz = q[2 * n];
    let mut z = rho2 * qz;
    let mut dz_dqz = rho2;
    let mut jac = jac;
    if let Some(j) = jac.as_deref_mut() {
        j.fill(0.0);
    }
    for i in 0..n {
        let (qx, qy) = (q[i], q[n + i]);
        let [s1, c1, w, ds1, dc1, dw] = kernels(qz * d[i]);
        let sq = qx * qx + qy * qy;
        out[i] = s1 * qx - c1 * qy;
        out[n + i] = c1 * qx + s1 * qy;
        z += 0.5 * d[i] * w * sq;
        dz_dqz += 0.5 * d[i] * d[i] * dw * sq;
        if let Some(j) = jac.as_deref_mut() {
            j[i * dim + i] = s1;
            j[i * dim + n + i] = -c1;
            j[i * dim + 2 * n] = d[i] * (ds1 * qx - dc1 * qy);
            j[(n + i) * dim + i] = c1;
            j[(n + i) * dim + n + i] = s1;
            j[(n + i) * dim + 2 * n] = d[i] * (dc1 * qx + ds1 * qy);
            j[2 * n * dim + i] = d[i] * w * qx;
            j[2 * n * dim + n + i] = d[i] * w * qy;
        }
    }
    out[2 * n] = z;
    if let Some(j) = jac {
        j[2 * n * dim + 2 * n] = dz_dqz;
    }
}

fn frame_to_element(c: &CanonicalMetric, frame: &[f64]) -> GroupElement {
    let n = c.n;
    let u = DVector::from_row_slice(&frame[..2 * n]);
    let h = &c.atilde * u;
    let w = AlgebraVector::from_parts(h.as_slice(), frame[2 * n]).expect("finite point");
    GroupElement::exp(c.to_source(&w))
}

fn element_to_frame(c: &CanonicalMetric, g: &GroupElement) -> Vec<f64> {
    let w = c.to_canonical(g.log());
    let h = DVector::from_vec(w.horizontal());
    let mut out: Vec<f64> = (&c.atilde_inv * h).iter().copied().collect();
    out.push(w.z());
    out
}

/// Closed-form point `γ(t)` of the normal geodesic with initial covector `p`.
pub fn geodesic_point(c: &CanonicalMetric, p: &Momentum, t: f64) -> GroupElement {
    let q: Vec<f64> = p.to_vec().iter().map(|v| v * t).collect();
    let mut out = vec![0.0; q.len()];
    frame_map(&c.d, c.rho * c.rho, &q, &mut out, None);
    frame_to_element(c, &out)
}

/// State of the Hamiltonian system in frame coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: f64,
    pub hx: Vec<f64>,
    pub hy: Vec<f64>,
    pub pz: f64,
}

impl FlowState {
    fn initial(p: &Momentum) -> Self {
        let n = p.n();
        Self {
            x: vec![0.0; n],
            y: vec![0.0; n],
            z: 0.0,
            hx: p.px.clone(),
            hy: p.py.clone(),
            pz: p.pz,
        }
    }

    /// `H = ½ (Σ h_x² + h_y² + ρ² h_z²)`.
    pub fn hamiltonian(&self, rho: f64) -> f64 {
        let h: f64 = self.hx.iter().chain(&self.hy).map(|v| v * v).sum();
        0.5 * (h + rho * rho * self.pz * self.pz)
    }

    fn pack(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(4 * self.x.len() + 1);
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.y);
        v.push(self.z);
        v.extend_from_slice(&self.hx);
        v.extend_from_slice(&self.hy);
        v
    }

    fn unpack(v: &[f64], n: usize, pz: f64) -> Self {
        Self {
            x: v[..n].to_vec(),
            y: v[n..2 * n].to_vec(),
            z: v[2 * n],
            hx: v[2 * n + 1..3 * n + 1].to_vec(),
            hy: v[3 * n + 1..4 * n + 1].to_vec(),
            pz,
        }
    }
}

// ẋ = h_x, ẏ = h_y, ż = ½ Σ d_i (x_i h_y − y_i h_x) + ρ² p_z,
// ḣ_x = −ξ h_y, ḣ_y = ξ h_x.
fn vector_field(d: &[f64], rho2: f64, pz: f64, s: &[f64], out: &mut [f64]) {
    let n = d.len();
    let mut zdot = rho2 * pz;
    for i in 0..n {
        let (x, y, hx, hy) = (s[i], s[n + i], s[2 * n + 1 + i], s[3 * n + 1 + i]);
        let xi = pz * d[i];
        out[i] = hx;
        out[n + i] = hy;
        zdot += 0.5 * d[i] * (x * hy - y * hx);
        out[2 * n + 1 + i] = -xi * hy;
        out[3 * n + 1 + i] = xi * hx;
    }
    out[2 * n] = zdot;
}

/// States of the classical RK4 integration at times `k t / steps`, `k = 0..=steps`.
pub fn flow_states(c: &CanonicalMetric, p: &Momentum, t: f64, steps: usize) -> Vec<FlowState> {
    let n = c.n;
    let steps = steps.max(1);
    let rho2 = c.rho * c.rho;
    let h = t / steps as f64;
    let mut s = FlowState::initial(p).pack();
    let len = s.len();
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![0.0; len],
        vec![0.0; len],
        vec![0.0; len],
        vec![0.0; len],
    );
    let mut tmp = vec![0.0; len];
    let mut states = Vec::with_capacity(steps + 1);
    states.push(FlowState::unpack(&s, n, p.pz));
    for _ in 0..steps {
        vector_field(&c.d, rho2, p.pz, &s, &mut k1);
        for j in 0..len {
            tmp[j] = s[j] + 0.5 * h * k1[j];
        }
        vector_field(&c.d, rho2, p.pz, &tmp, &mut k2);
        for j in 0..len {
            tmp[j] = s[j] + 0.5 * h * k2[j];
        }
        vector_field(&c.d, rho2, p.pz, &tmp, &mut k3);
        for j in 0..len {
            tmp[j] = s[j] + h * k3[j];
        }
        vector_field(&c.d, rho2, p.pz, &tmp, &mut k4);
        for j in 0..len {
            s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        states.push(FlowState::unpack(&s, n, p.pz));
    }
    states
}

/// Endpoint of the fixed-step RK4 integration of the Hamiltonian system.
pub fn flow_numeric(c: &CanonicalMetric, p: &Momentum, t: f64, steps: usize) -> GroupElement {
    let last = flow_states(c, p, t, steps)
        .pop()
        .expect("at least one state");
    let mut frame = last.x;
    frame.extend_from_slice(&last.y);
    frame.push(last.z);
    frame_to_element(c, &frame)
}

/// `2π / (|p_z| d_n)`, or `+∞` for `p_z = 0`.
pub fn cut_time(c: &CanonicalMetric, p: &Momentum) -> f64 {
    if p.pz == 0.0 {
        f64::INFINITY
    } else {
        2.0 * PI / (p.pz.abs() * c.d_max())
    }
}

/// Distance from `e` to `exp(p Z)` and a unit momentum realising it.
pub fn vertical_distance(c: &CanonicalMetric, p: f64) -> (f64, Momentum) {
    let n = c.n;
    if p == 0.0 {
        return (0.0, Momentum::zero(n));
    }
    let rho = c.rho.abs();
    let dn = c.d_max();
    let a = p.abs();
    if rho > 0.0 && a <= 2.0 * PI * rho * rho / dn {
        return (a / rho, Momentum::vertical(n, p.signum() / rho));
    }
    let dist = (2.0 / dn) * (a * PI * dn - PI * PI * rho * rho).sqrt();
    let mut m = Momentum::zero(n);
    m.pz = p.signum() * 2.0 * PI / dn / dist;
    m.px[n - 1] = ((a - 2.0 * PI * rho * rho / dn) * 4.0 * PI / dn)
        .max(0.0)
        .sqrt()
        / dist;
    (dist, m)
}

/// Largest `|p|` with `vertical_distance(p) ≤ dist`.
pub fn vertical_reach(c: &CanonicalMetric, dist: f64) -> f64 {
    let rho = c.rho.abs();
    let dn = c.d_max();
    if dist <= 0.0 {
        return 0.0;
    }
    if rho > 0.0 && dist <= 2.0 * PI * rho / dn {
        dist * rho
    } else {
        (dist * dist * dn * dn / 4.0 + PI * PI * rho * rho) / (PI * dn)
    }
}

/// Options for the shooting solver.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceOptions {
    /// Number of deterministic grid starts.
    pub grid_size: usize,
    pub max_iterations: usize,
    /// Accepted residual, relative to `max(1, |target|_∞)` in frame coordinates.
    pub residual_tolerance: f64,
    /// When set, `random_starts` extra starts are drawn from this seed.
    pub seed: Option<u64>,
    pub random_starts: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            grid_size: 4096,
            max_iterations: 100,
            residual_tolerance: 1e-9,
            seed: None,
            random_starts: 256,
        }
    }
}

impl DistanceOptions {
    /// Defaults, with `seed` read from `HEISGEO_SEED` when it parses.
    pub fn from_env() -> Self {
        let seed = std::env::var("HEISGEO_SEED")
            .ok()
            .and_then(|s| s.trim().parse().ok());
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn with_grid_size(mut self, grid_size: usize) -> Self {
        self.grid_size = grid_size;
        self
    }
}

/// Result of [`distance`].
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    pub distance: f64,
    /// Unit momentum with `geodesic_point(c, minimizer, distance) = target`.
    pub minimizer: Momentum,
    pub residual: f64,
}

fn radical_inverse(mut k: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while k > 0 {
        f /= base as f64;
        r += f * (k % base) as f64;
        k /= base;
    }
    r
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic unit directions in `ℝ^{2n}`: evenly spaced angles for
/// `n = 1`, normalised Gaussian images of a Halton sequence otherwise.
fn directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    let count = count.max(1);
    if n == 1 {
        return (0..count)
            .map(|j| {
                let (s, c) = (2.0 * PI * (j as f64 + 0.5) / count as f64).sin_cos();
                vec![c, s]
            })
            .collect();
    }
    (1..=count)
        .map(|k| {
            let mut v = Vec::with_capacity(2 * n);
            for pair in 0..n {
                let u1 = radical_inverse(k, PRIMES[(2 * pair) % PRIMES.len()]).max(1e-12);
                let u2 = radical_inverse(k, PRIMES[(2 * pair + 1) % PRIMES.len()]);
                let r = (-2.0 * u1.ln()).sqrt();
                let (s, c) = (2.0 * PI * u2).sin_cos();
                v.push(r * c);
                v.push(r * s);
            }
            // reorder (x_1, y_1, x_2, y_2, …) into (x_1, …, x_n, y_1, …, y_n)
            let mut out = vec![0.0; 2 * n];
            for i in 0..n {
                out[i] = v[2 * i];
                out[n + i] = v[2 * i + 1];
            }
            let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
            out.iter().map(|x| x / norm).collect()
        })
        .collect()
}

/// Vertical fractions in `(−1, 1)`, clustered near 0.
fn vertical_fractions(count: usize) -> Vec<f64> {
    let count = count.max(1);
    (0..count)
        .map(|k| {
            let s = 2.0 * (k as f64 + 0.5) / count as f64 - 1.0;
            s.signum() * s * s
        })
        .collect()
}

struct Shooter<'a> {
    d: &'a [f64],
    rho2: f64,
    target: Vec<f64>,
    scale: f64,
    max_iterations: usize,
}

impl Shooter<'_> {
    fn residual(&self, q: &[f64], out: &mut [f64], jac: Option<&mut [f64]>) -> f64 {
        frame_map(self.d, self.rho2, q, out, jac);
        let mut sq = 0.0;
        for (o, t) in out.iter_mut().zip(&self.target) {
            *o -= t;
            sq += *o * *o;
        }
        sq
    }

    /// Levenberg–Marquardt from `start`; returns the final point and the
    /// max-abs residual.
    fn solve(&self, start: &[f64]) -> (Vec<f64>, f64) {
        let dim = start.len();
        let mut q = start.to_vec();
        let mut r = vec![0.0; dim];
        let mut jac = vec![0.0; dim * dim];
        let mut r_new = vec![0.0; dim];
        let mut cost = self.residual(&q, &mut r, Some(&mut jac));
        let floor = (1e-15 * self.scale).powi(2);
        let mut mu = -1.0;
        let mut q_new = vec![0.0; dim];
        let mut normal = DMatrix::zeros(dim, dim);
        let mut grad = DVector::zeros(dim);
        for _ in 0..self.max_iterations {
            if cost <= floor {
                break;
            }
            for a in 0..dim {
                let mut g = 0.0;
                for k in 0..dim {
                    g += jac[k * dim + a] * r[k];
                }
                grad[a] = -g;
                for b in a..dim {
                    let mut s = 0.0;
                    for k in 0..dim {
                        s += jac[k * dim + a] * jac[k * dim + b];
                    }
                    normal[(a, b)] = s;
                    normal[(b, a)] = s;
                }
            }
            if mu < 0.0 {
                let dmax = (0..dim).map(|a| normal[(a, a)]).fold(0.0, f64::max);
                mu = 1e-6 * dmax.max(1e-30);
            }
            let mut improved = false;
            for _ in 0..40 {
                let mut m = normal.clone();
                for a in 0..dim {
                    m[(a, a)] += mu;
                }
                let Some(chol) = m.cholesky() else {
                    mu *= 10.0;
                    continue;
                };
                let step = chol.solve(&grad);
                for a in 0..dim {
                    q_new[a] = q[a] + step[a];
                }
                let c_new = self.residual(&q_new, &mut r_new, None);
                if c_new.is_finite() && c_new < cost {
                    std::mem::swap(&mut q, &mut q_new);
                    cost = self.residual(&q, &mut r, Some(&mut jac));
                    mu = (mu / 3.0).max(1e-300);
                    improved = true;
                    break;
                }
                mu *= 4.0;
            }
            if !improved {
                break;
            }
        }
        let res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (q, res)
    }
}

fn start_points(c: &CanonicalMetric, target: &[f64], opts: &DistanceOptions) -> Vec<Vec<f64>> {
    let n = c.n;
    let dn = c.d_max();
    let rho2 = c.rho * c.rho;
    let u = &target[..2 * n];
    let z = target[2 * n];
    let unorm = u.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut starts = Vec::with_capacity(opts.grid_size + opts.random_starts + 2);
    let mut horizontal_start = u.to_vec();
    horizontal_start.push(0.0);
    starts.push(horizontal_start);
    if rho2 > 0.0 {
        let mut v = vec![0.0; 2 * n];
        v.push(z / rho2);
        starts.push(v);
    }

    // Magnitudes matching either |u| or z for a given direction and q_z.
    let fit = |dir: &[f64], qz: f64| -> [Vec<f64>; 2] {
        let mut hsq = 0.0;
        let mut zc = 0.0;
        for i in 0..n {
            let [s1, c1, w, ..] = kernels(qz * c.d[i]);
            let block = dir[i] * dir[i] + dir[n + i] * dir[n + i];
            hsq += (s1 * s1 + c1 * c1) * block;
            zc += 0.5 * c.d[i] * w * block;
        }
        let a_u = if hsq > 0.0 { unorm / hsq.sqrt() } else { 0.0 };
        let a_z = if zc != 0.0 {
            ((z - rho2 * qz) / zc).max(0.0).sqrt()
        } else {
            0.0
        };
        let build = |a: f64| {
            let mut v: Vec<f64> = dir.iter().map(|x| a * x).collect();
            v.push(qz);
            v
        };
        [build(a_u), build(a_z)]
    };

    let per_pair = opts.grid_size.max(2) / 2;
    let nz = ((per_pair as f64).sqrt().round() as usize).max(1);
    let ndir = (per_pair / nz).max(1);
    let dirs = directions(n, ndir);
    let fracs = vertical_fractions(nz);
    for f in &fracs {
        let qz = f * 2.0 * PI / dn;
        for dir in &dirs {
            let [a, b] = fit(dir, qz);
            starts.push(a);
            starts.push(b);
        }
    }

    if let Some(seed) = opts.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..opts.random_starts {
            let dir: Vec<f64> = {
                let v: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
                v.iter().map(|x| x / norm).collect()
            };
            let qz = rng.gen_range(-1.0..1.0) * 2.0 * PI / dn;
            let [a, b] = fit(&dir, qz);
            starts.push(if rng.gen_bool(0.5) { a } else { b });
        }
    }
    starts
}

/// Sub-Riemannian or Riemannian distance from the identity to `target`
/// (source coordinates) by multi-start shooting on the closed-form
/// exponential map.
pub fn distance(
    c: &CanonicalMetric,
    target: &GroupElement,
    opts: &DistanceOptions,
) -> Result<DistanceResult> {
    let n = c.n;
    if target.n() != n {
        return Err(Error::Domain(
            "target dimension does not match the metric".into(),
        ));
    }
    let frame = element_to_frame(c, target);
    let scale = frame.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if frame.iter().all(|v| v.abs() <= 1e-15 * scale) {
        return Ok(DistanceResult {
            distance: 0.0,
            minimizer: Momentum::zero(n),
            residual: 0.0,
        });
    }
    let shooter = Shooter {
        d: &c.d,
        rho2: c.rho * c.rho,
        target: frame.clone(),
        scale,
        max_iterations: opts.max_iterations,
    };
    let starts = start_points(c, &frame, opts);
    let cut = 2.0 * PI / c.d_max();
    let tol = opts.residual_tolerance * scale;

    let outcomes: Vec<(f64, Option<(f64, Vec<f64>)>)> = starts
        .par_iter()
        .map(|s| {
            let (q, res) = shooter.solve(s);
            let within_cut = q[2 * n].abs() <= cut * (1.0 + 1e-7);
            if res <= tol && within_cut {
                let len = (q[..2 * n].iter().map(|v| v * v).sum::<f64>()
                    + shooter.rho2 * q[2 * n] * q[2 * n])
                    .sqrt();
                (res, Some((len, q)))
            } else {
                (res, None)
            }
        })
        .collect();

    let mut best: Option<(f64, usize)> = None;
    let mut best_residual = f64::INFINITY;
    for (k, (res, accepted)) in outcomes.iter().enumerate() {
        best_residual = best_residual.min(*res);
        if let Some((len, _)) = accepted {
            if best.is_none_or(|(b, _)| *len < b) {
                best = Some((*len, k));
            }
        }
    }
    let Some((len, k)) = best else {
        return Err(Error::SolverFailure { best_residual });
    };
    let (res, accepted) = &outcomes[k];
    let q = &accepted.as_ref().expect("accepted").1;

    let lower = frame[..2 * n].iter().map(|v| v * v).sum::<f64>().sqrt();
    if len < lower - 1e-9 || len == 0.0 {
        return Err(Error::SolverFailure {
            best_residual: *res,
        });
    }
    let minimizer = Momentum::from_slice(&q.iter().map(|v| v / len).collect::<Vec<_>>())?;
    Ok(DistanceResult {
        distance: len,
        minimizer,
        residual: *res,
    })
}

/// Distance on `Γ_r \ H_n` between the cosets of `e` and `target`.
///
/// Translates `γ · target` are enumerated over a box of lattice coordinates
/// that provably contains every translate closer than the current upper
/// bound, and visited in order of a closed-form lower bound.
pub fn quotient_distance(
    c: &CanonicalMetric,
    spec: &LatticeSpec,
    target: &GroupElement,
    opts: &DistanceOptions,
) -> Result<f64> {
    let n = c.n;
    if spec.n() != n || target.n() != n {
        return Err(Error::Domain(
            "lattice, metric and target dimensions differ".into(),
        ));
    }
    let rhat: Vec<f64> = spec
        .r()
        .iter()
        .map(|&r| r as f64)
        .chain(std::iter::repeat_n(1.0, n))
        .collect();
    let u = target.log().horizontal();
    let center: Vec<f64> = (0..2 * n).map(|i| -u[i] / rhat[i]).collect();

    let translate =
        |a: &[i64], k: i64| -> GroupElement { spec.element(&a[..n], &a[n..], k).mul(target) };
    // Canonical z-coordinate and horizontal norm of a translate.
    let profile = |g: &GroupElement| -> (f64, f64) {
        let w = c.to_canonical(g.log());
        (c.horizontal_norm(&w.horizontal()), w.z())
    };
    let lower_bound = |h: f64, z: f64| -> f64 { h.max(vertical_distance(c, z).0 - h) };

    let a0: Vec<i64> = center.iter().map(|v| v.round() as i64).collect();
    let (_, z_base) = profile(&translate(&a0, 0));
    let k0 = (-z_base).round() as i64;
    let mut upper = distance(c, &translate(&a0, k0), opts)?.distance;
    if upper == 0.0 {
        return Ok(0.0);
    }

    let row_norms: Vec<f64> = (0..2 * n)
        .map(|i| c.atilde.row(i).norm() / rhat[i])
        .collect();
    let ranges: Vec<(i64, i64)> = (0..2 * n)
        .map(|i| {
            let lo = (center[i] - upper * row_norms[i]).ceil() as i64;
            let hi = (center[i] + upper * row_norms[i]).floor() as i64;
            (lo, hi)
        })
        .collect();
    if ranges.iter().any(|(lo, hi)| lo > hi) {
        return Ok(upper);
    }

    let slack = 1e-12 * upper.max(1.0);
    let mut candidates: Vec<(f64, Vec<i64>, i64)> = Vec::new();
    let mut a: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        let g0 = translate(&a, 0);
        let (h, z0) = profile(&g0);
        if h <= upper + slack {
            let reach = vertical_reach(c, upper + h) + slack;
            let k_lo = (-reach - z0).ceil() as i64;
            let k_hi = (reach - z0).floor() as i64;
            for k in k_lo..=k_hi {
                let lb = lower_bound(h, z0 + k as f64);
                if lb <= upper + slack {
                    candidates.push((lb, a.clone(), k));
                }
            }
        }
        // odometer increment over the box
        let mut pos = 0;
        loop {
            if pos == 2 * n {
                break;
            }
            if a[pos] < ranges[pos].1 {
                a[pos] += 1;
                break;
            }
            a[pos] = ranges[pos].0;
            pos += 1;
        }
        if pos == 2 * n {
            break;
        }
    }
    candidates.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then_with(|| x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    for (lb, a, k) in candidates {
        if lb > upper + slack {
            break;
        }
        let d = distance(c, &translate(&a, k), opts)?.distance;
        if d < upper {
            upper = d;
        }
    }
    Ok(upper)
}
