//! Sparse Hermite polynomial chaos recovery via l1-minimization, with
//! optional derivative (gradient) observations.
//!
//! The crate covers the full pipeline:
//!
//! * [`hermite`] / [`basis`] - orthonormal probabilists' Hermite polynomials,
//!   total-degree multi-index bases, derivatives, and the gradient
//!   normalization weights that make derivative-augmented columns have unit
//!   expected norm.
//! * [`sampling`] - Gaussian input sampling and assembly of standard or
//!   gradient-enhanced measurement systems.
//! * [`solver`] - basis pursuit denoising (constrained form) with
//!   cross-validated tolerance, plus a least-squares reference solver.
//! * [`diagnostics`] - coherence parameters, restricted isometry estimates,
//!   null-space dimensions, column inner-product bounds, and sample-count
//!   bounds.
//! * [`experiments`] - manufactured sparse PCE recovery studies with
//!   equivalent-cost accounting.
//! * [`pde`] - a stochastic 2-D diffusion problem with a lognormal KL
//!   coefficient field and discrete-adjoint QoI gradients, used as a
//!   physical data source for the same recovery pipeline.
//!
//! Replications, sample assembly, and subset searches are data-parallel via
//! rayon when the `parallel` feature (default) is enabled; disabling it
//! yields a dependency-free sequential build with identical results.

pub mod basis;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod hermite;
pub mod pde;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod selftest;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
