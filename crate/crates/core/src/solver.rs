//! Semilinear Dirichlet solver on an interval.
//!
//! Solves `(-Delta)^s u = f(x, u)` with zero exterior data by damped Newton
//! iteration on the assembled nodal operator.  Each solve returns the grid
//! function together with the boundary traces extracted from the nodal
//! values, since every downstream identity check needs them.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fraclap::{assemble_matrix, ball_coefficient, FracLapMatrix, GridFunction1D, PointFunction};
use crate::trace::{extract_trace_discrete, TraceFit};

type Rhs = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Problem data for `(-Delta)^s u = f(x, u)` on an interval, together with
/// the primitive `F(x, u) = int_0^u f(x, v) dv` and, when the nonlinearity
/// depends on `x`, the partial `F_x`.
#[derive(Clone)]
pub struct SemilinearProblem {
    pub s: f64,
    pub n: u32,
    pub domain: (f64, f64),
    f_fn: Rhs,
    f_u_fn: Rhs,
    big_f_fn: Rhs,
    big_f_x_fn: Option<Rhs>,
}

impl SemilinearProblem {
    fn base(s: f64, domain: (f64, f64)) -> Result<()> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Validation(format!(
                "order parameter must lie in (0, 1), got {s}"
            )));
        }
        let (a, b) = domain;
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(Error::Validation(format!(
                "domain must be finite with a < b, got ({a}, {b})"
            )));
        }
        Ok(())
    }

    /// Constant right-hand side `f = value`.
    pub fn constant(s: f64, domain: (f64, f64), value: f64) -> Result<Self> {
        Self::base(s, domain)?;
        if !value.is_finite() {
            return Err(Error::Validation(format!(
                "right-hand side must be finite, got {value}"
            )));
        }
        Ok(Self {
            s,
            n: 1,
            domain,
            f_fn: Arc::new(move |_, _| value),
            f_u_fn: Arc::new(|_, _| 0.0),
            big_f_fn: Arc::new(move |_, u| value * u),
            big_f_x_fn: None,
        })
    }

    /// Signed power nonlinearity `f(u) = |u|^(p-1) u`, `p >= 1`.
    pub fn power(s: f64, domain: (f64, f64), p: f64) -> Result<Self> {
        Self::base(s, domain)?;
        if !p.is_finite() || p < 1.0 {
            return Err(Error::Validation(format!(
                "power must satisfy p >= 1, got {p}"
            )));
        }
        Ok(Self {
            s,
            n: 1,
            domain,
            f_fn: Arc::new(move |_, u: f64| u.abs().powf(p - 1.0) * u),
            f_u_fn: Arc::new(move |_, u: f64| p * u.abs().powf(p - 1.0)),
            big_f_fn: Arc::new(move |_, u: f64| u.abs().powf(p + 1.0) / (p + 1.0)),
            big_f_x_fn: None,
        })
    }

    /// Affine nonlinearity `f(u) = 1 + eps u`.
    pub fn affine(s: f64, domain: (f64, f64), eps: f64) -> Result<Self> {
        Self::base(s, domain)?;
        if !eps.is_finite() {
            return Err(Error::Validation(format!(
                "coupling must be finite, got {eps}"
            )));
        }
        Ok(Self {
            s,
            n: 1,
            domain,
            f_fn: Arc::new(move |_, u| 1.0 + eps * u),
            f_u_fn: Arc::new(move |_, _| eps),
            big_f_fn: Arc::new(move |_, u| u + 0.5 * eps * u * u),
            big_f_x_fn: None,
        })
    }

    /// Space-weighted power `f(x, u) = (1 + x/2) |u|^(p-1) u` with the
    /// matching `F_x = |u|^(p+1) / (2 (p + 1))`; the domain must stay inside
    /// `(-2, 2)` so the weight is positive.
    pub fn x_weighted_power(s: f64, domain: (f64, f64), p: f64) -> Result<Self> {
        Self::base(s, domain)?;
        if !p.is_finite() || p < 1.0 {
            return Err(Error::Validation(format!(
                "power must satisfy p >= 1, got {p}"
            )));
        }
        if domain.0 <= -2.0 || domain.1 >= 2.0 {
            return Err(Error::Validation(format!(
                "weighted power needs the domain inside (-2, 2), got ({}, {})",
                domain.0, domain.1
            )));
        }
        Ok(Self {
            s,
            n: 1,
            domain,
            f_fn: Arc::new(move |x: f64, u: f64| (1.0 + 0.5 * x) * u.abs().powf(p - 1.0) * u),
            f_u_fn: Arc::new(move |x: f64, u: f64| (1.0 + 0.5 * x) * p * u.abs().powf(p - 1.0)),
            big_f_fn: Arc::new(move |x: f64, u: f64| {
                (1.0 + 0.5 * x) * u.abs().powf(p + 1.0) / (p + 1.0)
            }),
            big_f_x_fn: Some(Arc::new(move |_, u: f64| {
                0.5 * u.abs().powf(p + 1.0) / (p + 1.0)
            })),
        })
    }

    /// Fully general problem data; the caller supplies consistent
    /// `f`, `df/du`, `F`, and optionally `F_x`.
    pub fn custom(
        s: f64,
        domain: (f64, f64),
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        f_u: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        big_f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        big_f_x: Option<Box<dyn Fn(f64, f64) -> f64 + Send + Sync>>,
    ) -> Result<Self> {
        Self::base(s, domain)?;
        Ok(Self {
            s,
            n: 1,
            domain,
            f_fn: Arc::new(f),
            f_u_fn: Arc::new(f_u),
            big_f_fn: Arc::new(big_f),
            big_f_x_fn: big_f_x.map(|b| Arc::from(b) as Rhs),
        })
    }

    pub fn f(&self, x: f64, u: f64) -> f64 {
        (self.f_fn)(x, u)
    }

    pub fn f_u(&self, x: f64, u: f64) -> f64 {
        (self.f_u_fn)(x, u)
    }

    pub fn big_f(&self, x: f64, u: f64) -> f64 {
        (self.big_f_fn)(x, u)
    }

    /// `F_x(x, u)` when the problem declares an explicit space dependence.
    pub fn big_f_x(&self, x: f64, u: f64) -> Option<f64> {
        self.big_f_x_fn.as_ref().map(|g| g(x, u))
    }

    pub fn has_x_term(&self) -> bool {
        self.big_f_x_fn.is_some()
    }
}

impl fmt::Debug for SemilinearProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemilinearProblem")
            .field("s", &self.s)
            .field("n", &self.n)
            .field("domain", &self.domain)
            .field("has_x_term", &self.has_x_term())
            .finish_non_exhaustive()
    }
}

/// Initial Newton iterate.
#[derive(Debug, Clone)]
pub enum InitGuess {
    /// `scale` times the solution of the linear problem with `f = 1`.
    ScaledLinear(f64),
    /// Explicit interior nodal values.
    Given(Vec<f64>),
}

/// Discretization and iteration controls.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub n_cells: usize,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub init: InitGuess,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            n_cells: 512,
            newton_tol: 1e-10,
            max_iter: 25,
            damping: 1.0,
            init: InitGuess::ScaledLinear(10.0),
        }
    }
}

/// A discrete solution with its extraction byproducts.  `traces` holds the
/// boundary fits at the left and right endpoint, in that order.
#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub grid: GridFunction1D,
    pub newton_iterations: usize,
    pub final_residual: f64,
    pub traces: (TraceFit, TraceFit),
}

/// The explicit solution of `(-Delta)^s u = 1` on a ball: the profile
/// `kappa (r^2 - |x|^2)^s` restricted to the line through the center.
pub fn explicit_ball_solution(n: u32, s: f64, radius: f64) -> Result<PointFunction> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::Validation(format!(
            "radius must be positive and finite, got {radius}"
        )));
    }
    let kappa = ball_coefficient(n, s)?;
    PointFunction::new((-radius, radius), s, move |x: f64| {
        let w = (radius - x) * (radius + x);
        if w <= 0.0 {
            0.0
        } else {
            kappa * w.powf(s)
        }
    })
}

/// Solve the linear problem `(-Delta)^order u = rhs(x)` on the given mesh.
pub fn solve_linear(
    rhs: &dyn Fn(f64) -> f64,
    grid: &GridFunction1D,
    order: f64,
) -> Result<Solution> {
    let op = assemble_matrix(grid, order)?;
    let g: Vec<f64> = op.interior_nodes().iter().map(|&x| rhs(x)).collect();
    let u = op.solve(&g)?;
    let au = op.apply(&u)?;
    let residual = au
        .iter()
        .zip(g.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    finish_solution(&op, u, 0, residual)
}

/// Solve `K u = D rhs` for an already assembled operator; returns the
/// interior nodal values.
pub fn solve_linear_assembled(op: &FracLapMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    op.solve(rhs)
}

/// Damped Newton iteration for the semilinear problem.
///
/// The residual is `G(u) = D^{-1} K u - f(x, u)` at the interior nodes and
/// iteration stops when its max norm drops below `newton_tol`.  A step that
/// fails to decrease the residual is halved up to eight times; running out
/// of iterations or of step reductions reports non-convergence carrying the
/// last iterate.
pub fn solve_semilinear(problem: &SemilinearProblem, config: &SolveConfig) -> Result<Solution> {
    if !(config.damping > 0.0 && config.damping <= 1.0) {
        return Err(Error::Validation(format!(
            "damping must lie in (0, 1], got {}",
            config.damping
        )));
    }
    if !(config.newton_tol > 0.0) || config.max_iter == 0 {
        return Err(Error::Validation(
            "newton_tol must be positive and max_iter nonzero".into(),
        ));
    }
    let grid = GridFunction1D::uniform(problem.domain, config.n_cells)?;
    let op = assemble_matrix(&grid, problem.s)?;
    let m = op.dim();
    let xs: Vec<f64> = op.interior_nodes().to_vec();

    let mut u: Vec<f64> = match &config.init {
        InitGuess::ScaledLinear(scale) => {
            if !scale.is_finite() {
                return Err(Error::Validation(format!(
                    "initial scale must be finite, got {scale}"
                )));
            }
            let w = op.solve(&vec![1.0; m])?;
            w.iter().map(|v| scale * v).collect()
        }
        InitGuess::Given(values) => {
            if values.len() != m {
                return Err(Error::Validation(format!(
                    "initial guess has {} values, expected {m}",
                    values.len()
                )));
            }
            values.clone()
        }
    };

    let residual_of = |u: &[f64]| -> Result<(Vec<f64>, f64)> {
        let au = op.apply(u)?;
        let r: Vec<f64> = au
            .iter()
            .zip(u.iter())
            .zip(xs.iter())
            .map(|((a, ui), x)| a - problem.f(*x, *ui))
            .collect();
        let norm = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        Ok((r, norm))
    };

    let (mut r, mut rnorm) = residual_of(&u)?;
    let mut steps = 0usize;
    loop {
        if rnorm.is_finite() && rnorm <= config.newton_tol {
            return finish_solution(&op, u, steps, rnorm);
        }
        if steps == config.max_iter || !rnorm.is_finite() {
            let last = finish_solution(&op, u, steps, rnorm)?;
            return Err(Error::NonConvergence {
                iterations: steps,
                residual: rnorm,
                last: Box::new(last),
            });
        }

        // Newton system (K - D diag(f_u)) delta = -D G.
        let mut jac = op.stiffness.clone();
        for i in 0..m {
            jac[(i, i)] -= op.mass[i] * problem.f_u(xs[i], u[i]);
        }
        let rhs = DVector::from_iterator(m, r.iter().zip(op.mass.iter()).map(|(ri, d)| -ri * d));
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::LinearAlgebra("newton system is singular".into()))?;

        let mut t = config.damping;
        let mut advanced = false;
        for _ in 0..8 {
            let cand: Vec<f64> = u
                .iter()
                .zip(delta.iter())
                .map(|(ui, di)| ui + t * di)
                .collect();
            let (cr, cnorm) = residual_of(&cand)?;
            if cnorm.is_finite() && cnorm < rnorm {
                u = cand;
                r = cr;
                rnorm = cnorm;
                advanced = true;
                break;
            }
            t *= 0.5;
        }
        steps += 1;
        if !advanced {
            let last = finish_solution(&op, u, steps, rnorm)?;
            return Err(Error::NonConvergence {
                iterations: steps,
                residual: rnorm,
                last: Box::new(last),
            });
        }
    }
}

fn finish_solution(
    op: &FracLapMatrix,
    interior: Vec<f64>,
    newton_iterations: usize,
    final_residual: f64,
) -> Result<Solution> {
    let mut grid = op.grid.clone();
    let n = grid.nodes.len() - 1;
    grid.values[0] = 0.0;
    grid.values[n] = 0.0;
    grid.values[1..n].copy_from_slice(&interior);
    let left = extract_trace_discrete(&grid, op.order, grid.interval.0)?;
    let right = extract_trace_discrete(&grid, op.order, grid.interval.1)?;
    Ok(Solution {
        grid,
        newton_iterations,
        final_residual,
        traces: (left, right),
    })
}
