//! Computational laboratory for the two-dimensional asymmetric simple
//! exclusion process (totally asymmetric along x, symmetric along y).
//!
//! The crate has three legs that check each other:
//!
//! * [`lattice`] and [`observables`] run the exact continuous-time dynamics
//!   on a finite torus and estimate the structure function, the diffusion
//!   coefficient `D(t)` along two routes (second moments and Green-Kubo),
//!   and Laplace transforms of `t D(t)`.
//! * [`oracle`] brute-forces tiny tori: the full generator matrix, its
//!   symmetric/antisymmetric decomposition, stationarity checks and the
//!   exact resolvent `<<w, (lambda - L)^-1 w>>`.
//! * [`momentum`], [`hierarchy`] and [`scaling`] work in Fourier space on
//!   the hard-core-free duality hierarchy: the raising operator, nested
//!   resolvent truncations, the U/V diagonal multipliers, the K-integral
//!   and the kappa-recursion whose fixed point 2/3 drives the
//!   `(log t)^{2/3}` growth of the diffusivity.
//!
//! See the `examples/` directory for one runnable example per capability,
//! and the `asep2d` binary for batch experiment orchestration.

pub mod error;
pub mod hierarchy;
pub mod lattice;
pub mod momentum;
pub mod observables;
pub mod oracle;
pub mod scaling;
pub mod solvers;

pub use error::{Error, Result};
