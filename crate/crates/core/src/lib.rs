//! Numerical laboratory for bipartite cat-qubit Lindblad dynamics on a
//! truncated Fock space.
//!
//! The crate builds the two-mode model `dρ/dt = −i[H,ρ] + κ D[b](ρ)` with
//! `H = L b† + L† b` and `L = aᵏ − αᵏ`, integrates it in both the Schrödinger
//! and Heisenberg pictures, and turns the qualitative convergence statements
//! about this family of equations into executable finite-dimensional checks:
//! energy/Lyapunov bounds, kernel-manifold absorption, Krylov-span density,
//! and the strong-dissipation single-mode reduction.
//!
//! Module map:
//! - [`fock`]: truncated-Fock linear algebra (kets, operators, ladders).
//! - [`model`]: the cat-qubit model, its Lindbladian, kernel basis and `Π_L`.
//! - [`evolve`]: RK4 integrators for both pictures plus a dense
//!   superoperator-exponential oracle.
//! - [`diagnostics`]: observables and theorem-level checks.
//! - [`adiabatic`]: the reduced single-mode model and its comparison.
//! - [`density`]: Krylov-span rank probes.
//! - [`bargmann`]: Bargmann–Fock coefficient utilities and the
//!   polynomial-multiple density witness.

pub mod adiabatic;
pub mod bargmann;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod fock;
pub mod linalg;
pub mod model;
pub mod sparse;

pub use error::{Error, Result};
pub use fock::{FockDims, Ket, Operator, Space};
pub use model::{CatModel, KernelBasis, ModelParams};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;

/// Dense complex vector.
pub type CVec = nalgebra::DVector<C64>;
