//! Stochastic 2-D diffusion problem on the unit square.
//!
//! `-div(a grad u) = 1` on `[0,1]^2` with homogeneous Dirichlet boundary,
//! where the coefficient `a` is a lognormal Karhunen-Loeve field in `d`
//! standard Gaussian variables. The quantity of interest is the solution
//! value at the node nearest `(0.5, 0.5)`; its gradient with respect to the
//! Gaussian inputs comes from one discrete adjoint solve per sample,
//! independent of `d`, which is what prices a derivative-bearing sample at
//! `nu = 2` in the equivalent-cost accounting.

mod fem;
mod kl;
mod study;

pub use fem::{
    gradient_via_assembled_matrix, solve_adjoint_gradient, solve_forward, DiscreteOperator,
    ForwardSolve, PdeQoi,
};
pub use kl::{build_kl, KlField};
pub use study::{reference_coefficients, run_pde_study, PdeStudyConfig, ReferenceConfig};
