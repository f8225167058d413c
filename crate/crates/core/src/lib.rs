//! Explicit geometry of left-invariant Riemannian and sub-Riemannian metrics on
//! the Heisenberg groups `H_n` and on compact quotients `Γ_r \ H_n`.
//!
//! The crate is organised bottom-up:
//!
//! * [`group`]: the Lie algebra `h_n`, the group law in exponential
//!   coordinates and the standard lattices `Γ_r`.
//! * [`linalg`]: skew-symmetric normal forms, Hilbert–Schmidt norms and
//!   shortest lattice vectors.
//! * [`metric`]: metric matrices, their (weak) canonical forms, spectral
//!   invariants, Ricci curvature and the volume coefficients.
//! * [`geodesics`]: closed-form normal geodesics, a Hamiltonian integrator,
//!   cut times and distances on `H_n` and on `Γ_r \ H_n`.
//! * [`moduli`]: stabilizer membership, isometry fingerprints and the
//!   precompactness conditions on the moduli space.

pub mod error;
pub mod geodesics;
pub mod group;
pub mod linalg;
pub mod metric;
pub mod moduli;

pub use error::{Error, Result};
pub use geodesics::{DistanceOptions, Momentum};
pub use group::{AlgebraVector, GroupElement, LatticeSpec};
pub use metric::{CanonicalMetric, MetricMatrix, VolumeCoefficient, VolumeKind};
pub use moduli::{Fingerprint, Mode, PrecompactnessReport};
