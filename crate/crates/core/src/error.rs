//! Error type shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across quadrature, special functions,
/// assembly, fitting, and the nonlinear solver.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of the routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested quantity diverges (e.g. a hypergeometric value at the
    /// boundary of convergence with nonpositive Gamma balance).
    #[error("divergent: {0}")]
    Divergence(String),

    /// Adaptive quadrature exhausted its budget or stalled before reaching
    /// the requested tolerance.  Carries the best value found so callers can
    /// decide whether the partial answer is still useful.
    #[error("accuracy target missed: value {value:.6e}, error estimate {error_estimate:.2e} after {evaluations} evaluations")]
    Accuracy {
        value: f64,
        error_estimate: f64,
        evaluations: u64,
    },

    /// The integrand returned NaN.  `at` is the abscissa where it happened.
    #[error("integrand evaluation failed at {at:.6e}")]
    Evaluation { at: f64 },

    /// A fitting procedure (trace ladder, log-jump least squares, Richardson
    /// ladder) could not produce a stable answer.
    #[error("extraction failed: {0}")]
    Extraction(String),

    /// An iterative process ran out of iterations without meeting its
    /// stopping criterion (generic form; the Newton solver uses
    /// `NonConvergence` so the last iterate survives).
    #[error("did not converge: {0}")]
    Convergence(String),

    /// A matrix factorization or solve failed.
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    /// An export could not write to its output stream.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    /// Invalid configuration or inconsistent arguments.
    #[error("validation failed: {0}")]
    Validation(String),

    /// The Newton iteration stopped at `iterations` with residual `residual`
    /// still above tolerance.  `last` is the final iterate.
    #[error("Newton iteration stopped after {iterations} steps with residual {residual:.3e}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: Box<crate::solver::Solution>,
    },
}
