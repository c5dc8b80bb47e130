//! Numerical toolkit for the fractional Laplacian on an interval, defined as a
//! singular integral.  The crate evaluates the operator pointwise by adaptive
//! quadrature, assembles its stiffness matrix for piecewise-linear elements on
//! boundary-graded grids, solves semilinear Dirichlet problems by damped Newton
//! iteration, extracts the boundary trace u/delta^s and the logarithmic
//! singularity of the half-order operator, and verifies the Pohozaev identity
//! together with the special-function constants that enter it.
//!
//! Modules mirror the pipeline: `specfun` (Gamma, digamma, dilogarithm,
//! Gauss hypergeometric, the closed-form constants), `quad` (singularity-aware
//! adaptive quadrature), `fraclap` (pointwise operator and matrix assembly),
//! `trace` (boundary fits), `scalingop` (the dilation derivative that produces
//! the pi^2 + jump^2 structure), `solver` (linear and Newton solves), and
//! `pohozaev` (identity reports, energy, criticality classification).
//!
//! With the default `parallel` feature the row-parallel kernels run on rayon;
//! without it the same code runs sequentially.  Results are bitwise identical
//! either way: work items are indexed and reduced in a fixed order.

pub mod error;
pub mod exec;
pub mod extrapolate;
pub mod fraclap;
pub mod pohozaev;
pub mod quad;
pub mod scalingop;
pub mod solver;
pub mod specfun;
pub mod trace;

pub use error::{Error, Result};
