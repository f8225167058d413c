//! The Heisenberg Lie algebra `h_n` and group `H_n`.
//!
//! Vectors are written in the fixed basis `{X_1..X_n, Y_1..Y_n, Z}` with
//! `[X_i, Y_i] = Z` and all other brackets of basis vectors zero. Group
//! elements are stored in exponential coordinates: since `exp` is a global
//! diffeomorphism, `GroupElement` carries the same triple as its logarithm,
//! and the product follows the Campbell–Baker–Hausdorff formula
//! `exp(U)·exp(V) = exp(U + V + ½[U, V])`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// An element `Σ x_i X_i + y_i Y_i + z Z` of `h_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraVector {
    x: Vec<f64>,
    y: Vec<f64>,
    z: f64,
}

impl AlgebraVector {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: f64) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Domain(format!(
                "x and y must have the same positive length (got {} and {})",
                x.len(),
                y.len()
            )));
        }
        if !(x.iter().chain(y.iter()).all(|v| v.is_finite()) && z.is_finite()) {
            return Err(Error::Domain("coordinates must be finite".into()));
        }
        Ok(Self { x, y, z })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y: vec![0.0; n],
            z: 0.0,
        }
    }

    /// Builds a vector from the `2n + 1` coordinates `(x, y, z)`.
    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        if coords.len() < 3 || coords.len() % 2 == 0 {
            return Err(Error::Domain(format!(
                "expected 2n+1 coordinates, got {}",
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

    /// Builds a vector from its horizontal part `(x, y)` and vertical part `z`.
    pub fn from_parts(horizontal: &[f64], z: f64) -> Result<Self> {
        if horizontal.len() % 2 != 0 {
            return Err(Error::Domain(
                "horizontal part must have even length".into(),
            ));
        }
        let n = horizontal.len() / 2;
        Self::new(horizontal[..n].to_vec(), horizontal[n..].to_vec(), z)
    }

    /// `X_i` (zero-based `i`).
    pub fn x_basis(n: usize, i: usize) -> Self {
        let mut v = Self::zero(n);
        v.x[i] = 1.0;
        v
    }

    /// `Y_i` (zero-based `i`).
    pub fn y_basis(n: usize, i: usize) -> Self {
        let mut v = Self::zero(n);
        v.y[i] = 1.0;
        v
    }

    pub fn z_basis(n: usize) -> Self {
        let mut v = Self::zero(n);
        v.z = 1.0;
        v
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// The horizontal part `(x_1..x_n, y_1..y_n)`, i.e. the projection onto `v_0`.
    pub fn horizontal(&self) -> Vec<f64> {
        let mut h = self.x.clone();
        h.extend_from_slice(&self.y);
        h
    }

    /// Projection onto `v_0` (zeroes the `Z` coefficient).
    pub fn project_horizontal(&self) -> Self {
        Self {
            x: self.x.clone(),
            y: self.y.clone(),
            z: 0.0,
        }
    }

    /// All `2n + 1` coordinates in basis order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.horizontal();
        v.push(self.z);
        v
    }

    /// The symplectic pairing `ω([u, v]) = Σ u.x_i v.y_i − u.y_i v.x_i`.
    pub fn symplectic(&self, other: &Self) -> f64 {
        assert_eq!(self.n(), other.n(), "dimension mismatch");
        self.x
            .iter()
            .zip(&self.y)
            .zip(other.x.iter().zip(&other.y))
            .map(|((ux, uy), (vx, vy))| ux * vy - uy * vx)
            .sum()
    }

    /// The Lie bracket. The result is always central.
    pub fn bracket(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.n());
        out.z = self.symplectic(other);
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Free-function form of [`AlgebraVector::bracket`].
pub fn bracket(u: &AlgebraVector, v: &AlgebraVector) -> AlgebraVector {
    u.bracket(v)
}

impl Add for &AlgebraVector {
    type Output = AlgebraVector;

    fn add(self, rhs: &AlgebraVector) -> AlgebraVector {
        assert_eq!(self.n(), rhs.n(), "dimension mismatch");
        AlgebraVector {
            x: self.x.iter().zip(&rhs.x).map(|(a, b)| a + b).collect(),
            y: self.y.iter().zip(&rhs.y).map(|(a, b)| a + b).collect(),
            z: self.z + rhs.z,
        }
    }
}

impl Sub for &AlgebraVector {
    type Output = AlgebraVector;

    fn sub(self, rhs: &AlgebraVector) -> AlgebraVector {
        self + &(-rhs)
    }
}

impl Neg for &AlgebraVector {
    type Output = AlgebraVector;

    fn neg(self) -> AlgebraVector {
        self * -1.0
    }
}

impl Mul<f64> for &AlgebraVector {
    type Output = AlgebraVector;

    fn mul(self, s: f64) -> AlgebraVector {
        AlgebraVector {
            x: self.x.iter().map(|a| a * s).collect(),
            y: self.y.iter().map(|a| a * s).collect(),
            z: self.z * s,
        }
    }
}

impl fmt::Display for AlgebraVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coords: Vec<String> = self.to_vec().iter().map(|c| c.to_string()).collect();
        write!(f, "({})", coords.join(", "))
    }
}

/// An element `exp(v)` of `H_n`, stored through its logarithm `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement(AlgebraVector);

impl GroupElement {
    pub fn exp(v: AlgebraVector) -> Self {
        Self(v)
    }

    pub fn identity(n: usize) -> Self {
        Self(AlgebraVector::zero(n))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        AlgebraVector::from_slice(coords).map(Self)
    }

    pub fn log(&self) -> &AlgebraVector {
        &self.0
    }

    pub fn into_log(self) -> AlgebraVector {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn coords(&self) -> Vec<f64> {
        self.0.to_vec()
    }

    pub fn is_identity(&self) -> bool {
        self.0.to_vec().iter().all(|c| *c == 0.0)
    }

    /// `g·h` via Campbell–Baker–Hausdorff.
    pub fn mul(&self, other: &Self) -> Self {
        let sum = &self.0 + &other.0;
        let half_bracket = &self.0.bracket(&other.0) * 0.5;
        Self(&sum + &half_bracket)
    }

    /// `exp(U)⁻¹ = exp(−U)`.
    pub fn inverse(&self) -> Self {
        Self(-&self.0)
    }

    /// The group commutator `g·h·g⁻¹·h⁻¹`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).mul(&self.inverse()).mul(&other.inverse())
    }
}

/// Free-function form of [`GroupElement::mul`].
pub fn group_mul(g: &GroupElement, h: &GroupElement) -> GroupElement {
    g.mul(h)
}

/// Free-function form of [`GroupElement::commutator`].
pub fn commutator(g: &GroupElement, h: &GroupElement) -> GroupElement {
    g.commutator(h)
}

/// The isomorphism type `r = (r_1, …, r_n)` of a lattice
/// `Γ_r = ⟨r_1 X_1, …, r_n X_n, Y_1, …, Y_n, Z⟩` with `r_i | r_{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeSpec {
    r: Vec<u64>,
}

impl LatticeSpec {
    pub fn new(r: Vec<u64>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::InvalidLattice("r must be nonempty".into()));
        }
        if r.contains(&0) {
            return Err(Error::InvalidLattice(
                "entries of r must be positive".into(),
            ));
        }
        if let Some(w) = r.windows(2).find(|w| w[1] % w[0] != 0) {
            return Err(Error::InvalidLattice(format!(
                "{} does not divide {}",
                w[0], w[1]
            )));
        }
        Ok(Self { r })
    }

    /// The standard lattice `Γ_(1,…,1)`.
    pub fn unit(n: usize) -> Self {
        Self { r: vec![1; n] }
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn r(&self) -> &[u64] {
        &self.r
    }

    /// `Π r_i`, the Haar covolume of `Γ_r` in the frame `X_1* ∧ … ∧ Z*`.
    pub fn covolume(&self) -> f64 {
        self.r.iter().map(|&r| r as f64).product()
    }

    /// The `2n + 1` generators `exp(r_i X_i)`, `exp(Y_i)`, `exp(Z)` in that order.
    pub fn generators(&self) -> Vec<GroupElement> {
        let n = self.n();
        let xs =
            (0..n).map(|i| GroupElement::exp(&AlgebraVector::x_basis(n, i) * self.r[i] as f64));
        let ys = (0..n).map(|i| GroupElement::exp(AlgebraVector::y_basis(n, i)));
        xs.chain(ys)
            .chain(std::iter::once(GroupElement::exp(AlgebraVector::z_basis(
                n,
            ))))
            .collect()
    }

    /// The lattice element `Π exp(a_i r_i X_i) · Π exp(b_i Y_i) · exp(c Z)`.
    ///
    /// Every element of `Γ_r` has exactly one such normal form.
    pub fn element(&self, a: &[i64], b: &[i64], c: i64) -> GroupElement {
        let n = self.n();
        assert!(a.len() == n && b.len() == n, "dimension mismatch");
        let x: Vec<f64> = a
            .iter()
            .zip(&self.r)
            .map(|(&ai, &ri)| ai as f64 * ri as f64)
            .collect();
        let y: Vec<f64> = b.iter().map(|&bi| bi as f64).collect();
        let twist: f64 = x.iter().zip(&y).map(|(xi, yi)| xi * yi).sum::<f64>() * 0.5;
        GroupElement(AlgebraVector {
            x,
            y,
            z: c as f64 + twist,
        })
    }

    /// All `r ∈ D_n` with `r_n ≤ max_rn`, in lexicographic order.
    pub fn enumerate(n: usize, max_rn: u64) -> Vec<LatticeSpec> {
        fn extend(prefix: &mut Vec<u64>, n: usize, max_rn: u64, out: &mut Vec<LatticeSpec>) {
            if prefix.len() == n {
                out.push(LatticeSpec { r: prefix.clone() });
                return;
            }
            let last = prefix.last().copied().unwrap_or(1);
            let mut next = last;
            while next <= max_rn {
                prefix.push(next);
                extend(prefix, n, max_rn, out);
                prefix.pop();
                next += last;
            }
        }
        let mut out = Vec::new();
        if n > 0 && max_rn >= 1 {
            extend(&mut Vec::with_capacity(n), n, max_rn, &mut out);
        }
        out
    }
}

/// Free-function form of [`LatticeSpec::generators`].
pub fn lattice_generators(spec: &LatticeSpec) -> Vec<GroupElement> {
    spec.generators()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ge(c: &[f64]) -> GroupElement {
        GroupElement::from_slice(c).unwrap()
    }

    #[test]
    fn bracket_table() {
        let x1 = AlgebraVector::x_basis(2, 0);
        let x2 = AlgebraVector::x_basis(2, 1);
        let y1 = AlgebraVector::y_basis(2, 0);
        assert_eq!(bracket(&x1, &y1), AlgebraVector::z_basis(2));
        assert_eq!(bracket(&y1, &x1), -&AlgebraVector::z_basis(2));
        assert_eq!(bracket(&x1, &x2), AlgebraVector::zero(2));
        let u = AlgebraVector::new(vec![1.5, -2.0], vec![0.25, 3.0], 7.0).unwrap();
        assert_eq!(bracket(&u, &u).z(), 0.0);
    }

    #[test]
    fn constructor_rejects_non_finite() {
        assert!(AlgebraVector::new(vec![f64::NAN], vec![0.0], 0.0).is_err());
        assert!(AlgebraVector::new(vec![0.0], vec![0.0], f64::INFINITY).is_err());
        assert!(AlgebraVector::new(vec![0.0, 1.0], vec![0.0], 0.0).is_err());
        assert!(AlgebraVector::from_slice(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn group_law_examples() {
        let x = ge(&[1.0, 0.0, 0.0]);
        let y = ge(&[0.0, 1.0, 0.0]);
        assert_eq!(group_mul(&x, &y), ge(&[1.0, 1.0, 0.5]));
        assert_eq!(group_mul(&x, &GroupElement::identity(1)), x);
        assert_eq!(group_mul(&x, &x), ge(&[2.0, 0.0, 0.0]));
        assert_eq!(commutator(&x, &y), ge(&[0.0, 0.0, 1.0]));
        let g = ge(&[0.3, -1.2, 4.0]);
        assert!(commutator(&g, &g).is_identity());
    }

    #[test]
    fn commutator_of_rescaled_generators_is_z() {
        for r in [0.5f64, 1.0, 2.0, 7.0, 1e3] {
            let xs = ge(&[0.0, r.sqrt(), 0.0, 0.0, 0.0]);
            let ys = ge(&[0.0, 0.0, 0.0, 1.0 / r.sqrt(), 0.0]);
            let c = commutator(&xs, &ys);
            assert!(c.log().max_abs_diff(&AlgebraVector::z_basis(2)) < 1e-12);
        }
    }

    #[test]
    fn commutator_of_basis_is_kronecker_z() {
        for n in 1..=4 {
            for i in 0..n {
                for j in 0..n {
                    let c = commutator(
                        &GroupElement::exp(AlgebraVector::x_basis(n, i)),
                        &GroupElement::exp(AlgebraVector::y_basis(n, j)),
                    );
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert_eq!(c.coords()[..2 * n], vec![0.0; 2 * n][..]);
                    assert_eq!(c.log().z(), expected);
                }
            }
        }
    }

    #[test]
    fn lattice_specs() {
        let g = LatticeSpec::new(vec![1]).unwrap().generators();
        assert_eq!(
            g,
            vec![
                ge(&[1.0, 0.0, 0.0]),
                ge(&[0.0, 1.0, 0.0]),
                ge(&[0.0, 0.0, 1.0])
            ]
        );
        assert!(matches!(
            LatticeSpec::new(vec![2, 3]),
            Err(Error::InvalidLattice(_))
        ));
        assert!(LatticeSpec::new(vec![0]).is_err());
        let g = LatticeSpec::new(vec![1, 2]).unwrap().generators();
        assert_eq!(g.len(), 5);
        assert_eq!(g[1], ge(&[0.0, 2.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn lattice_normal_form_is_generator_word() {
        let spec = LatticeSpec::new(vec![2]).unwrap();
        let gens = spec.generators();
        // X^3 Y^-2 Z^5 with X = exp(2 X_1)
        let mut w = GroupElement::identity(1);
        for _ in 0..3 {
            w = w.mul(&gens[0]);
        }
        for _ in 0..2 {
            w = w.mul(&gens[1].inverse());
        }
        for _ in 0..5 {
            w = w.mul(&gens[2]);
        }
        assert!(w.log().max_abs_diff(spec.element(&[3], &[-2], 5).log()) < 1e-12);
    }

    #[test]
    fn enumerate_divisibility_chains() {
        let all = LatticeSpec::enumerate(2, 4);
        let rs: Vec<Vec<u64>> = all.iter().map(|s| s.r().to_vec()).collect();
        assert_eq!(
            rs,
            vec![
                vec![1, 1],
                vec![1, 2],
                vec![1, 3],
                vec![1, 4],
                vec![2, 2],
                vec![2, 4],
                vec![3, 3],
                vec![4, 4]
            ]
        );
        assert_eq!(LatticeSpec::enumerate(1, 3).len(), 3);
    }

    fn arb_vec(n: usize) -> impl Strategy<Value = AlgebraVector> {
        proptest::collection::vec(-10.0f64..10.0, 2 * n + 1)
            .prop_map(|c| AlgebraVector::from_slice(&c).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn group_mul_is_associative((g, h, k) in (1usize..4).prop_flat_map(|n| (arb_vec(n), arb_vec(n), arb_vec(n)))) {
            let (g, h, k) = (GroupElement::exp(g), GroupElement::exp(h), GroupElement::exp(k));
            let left = g.mul(&h.mul(&k));
            let right = g.mul(&h).mul(&k);
            prop_assert!(left.log().max_abs_diff(right.log()) <= 1e-12);
        }

        #[test]
        fn inverse_and_jacobi((u, v, w) in (1usize..4).prop_flat_map(|n| (arb_vec(n), arb_vec(n), arb_vec(n)))) {
            let g = GroupElement::exp(u.clone());
            prop_assert!(g.mul(&g.inverse()).log().max_abs_diff(&AlgebraVector::zero(u.n())) <= 1e-12);
            prop_assert_eq!(u.bracket(&v.bracket(&w)), AlgebraVector::zero(u.n()));
            let c = g.commutator(&GroupElement::exp(v.clone()));
            prop_assert!(c.log().max_abs_diff(&u.bracket(&v)) <= 1e-10);
        }
    }
}
