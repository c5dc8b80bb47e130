//! Boundary-trace identity checks.
//!
//! For solutions of `(-Delta)^s u = f(x, u)` on an interval containing the
//! origin, the interior integrals of `u f`, `F`, and `x F_x` balance a pure
//! boundary expression built from the traces `u / dist^s`, weighted by
//! `Gamma(1+s)^2`.  The checks here evaluate both sides independently and
//! report the imbalance; nothing is fitted, so a genuine failure shows up as
//! a large residual.

use std::cell::RefCell;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fraclap::{frac_lap_point_tol, Eval1D, PointFunction};
use crate::quad::{self, SingularitySpec};
use crate::solver::{SemilinearProblem, Solution};
use crate::specfun;
use crate::trace::extract_trace;

/// Both sides of the identity and every term they were built from.
///
/// The reconstruction is exact: `lhs` is literally
/// `(2s - n) term_ufu + 2n term_big_f + 2 term_big_f_x`, `rhs` is
/// `Gamma(1+s)^2 boundary_sum`, and the residuals derive from those two.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PohozaevReport {
    pub s: f64,
    pub n: u32,
    pub term_ufu: f64,
    pub term_big_f: f64,
    pub term_big_f_x: f64,
    pub boundary_sum: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
}

fn finish_report(
    s: f64,
    n: u32,
    term_ufu: f64,
    term_big_f: f64,
    term_big_f_x: f64,
    boundary_sum: f64,
) -> Result<PohozaevReport> {
    let nf = n as f64;
    let lhs = (2.0 * s - nf) * term_ufu + 2.0 * nf * term_big_f + 2.0 * term_big_f_x;
    let g = specfun::gamma(1.0 + s)?;
    let rhs = g * g * boundary_sum;
    let abs_residual = (lhs - rhs).abs();
    let rel_residual = abs_residual / lhs.abs().max(rhs.abs()).max(1e-14);
    Ok(PohozaevReport {
        s,
        n,
        term_ufu,
        term_big_f,
        term_big_f_x,
        boundary_sum,
        lhs,
        rhs,
        abs_residual,
        rel_residual,
    })
}

fn require_star_shaped(domain: (f64, f64)) -> Result<()> {
    if !(domain.0 < 0.0 && domain.1 > 0.0) {
        return Err(Error::Validation(format!(
            "identity is stated for intervals containing 0, got ({}, {})",
            domain.0, domain.1
        )));
    }
    Ok(())
}

/// Nodal quadrature adapted to integrands that vanish like `dist^s` at the
/// interval ends: lumped weights inside, an `s`-moment weight on the two
/// boundary cells.
fn integrate_nodal(nodes: &[f64], s: f64, g: &[f64]) -> f64 {
    let m = g.len();
    let mut total = 0.0;
    for (i, gi) in g.iter().enumerate() {
        let (xl, xm, xr) = (nodes[i], nodes[i + 1], nodes[i + 2]);
        let left = if i == 0 {
            (xm - xl) / (1.0 + s)
        } else {
            0.5 * (xm - xl)
        };
        let right = if i == m - 1 {
            (xr - xm) / (1.0 + s)
        } else {
            0.5 * (xr - xm)
        };
        total += (left + right) * gi;
    }
    total
}

/// Check the identity on a discrete solution, using its nodal values and the
/// traces it carries.
pub fn check_identity(sol: &Solution, problem: &SemilinearProblem) -> Result<PohozaevReport> {
    require_star_shaped(problem.domain)?;
    if sol.grid.interval != problem.domain {
        return Err(Error::Validation(format!(
            "solution interval {:?} does not match the problem domain {:?}",
            sol.grid.interval, problem.domain
        )));
    }
    let s = problem.s;
    let nodes = &sol.grid.nodes;
    let m = nodes.len() - 2;
    let mut g_ufu = Vec::with_capacity(m);
    let mut g_big_f = Vec::with_capacity(m);
    let mut g_x = Vec::with_capacity(m);
    for i in 1..=m {
        let x = nodes[i];
        let u = sol.grid.values[i];
        g_ufu.push(u * problem.f(x, u));
        g_big_f.push(problem.big_f(x, u));
        g_x.push(problem.big_f_x(x, u).map_or(0.0, |v| x * v));
    }
    let term_ufu = integrate_nodal(nodes, s, &g_ufu);
    let term_big_f = integrate_nodal(nodes, s, &g_big_f);
    let term_big_f_x = if problem.has_x_term() {
        integrate_nodal(nodes, s, &g_x)
    } else {
        0.0
    };
    let (qa, qb) = (sol.traces.0.q_value, sol.traces.1.q_value);
    let boundary_sum = problem.domain.1 * qb * qb - problem.domain.0 * qa * qa;
    finish_report(s, problem.n, term_ufu, term_big_f, term_big_f_x, boundary_sum)
}

/// Variant that insists on explicit `F_x` data, for problems whose
/// nonlinearity depends on `x`.
pub fn check_identity_x(sol: &Solution, problem: &SemilinearProblem) -> Result<PohozaevReport> {
    if !problem.has_x_term() {
        return Err(Error::Validation(
            "problem declares no F_x data; use check_identity for x-free nonlinearities".into(),
        ));
    }
    check_identity(sol, problem)
}

/// Check the identity for an explicitly given profile by adaptive
/// quadrature, with the boundary traces supplied by the caller.
pub fn check_identity_pointwise(
    u: &PointFunction,
    traces: (f64, f64),
    problem: &SemilinearProblem,
    tol: f64,
) -> Result<PohozaevReport> {
    require_star_shaped(problem.domain)?;
    if u.support != problem.domain {
        return Err(Error::Validation(format!(
            "profile support {:?} does not match the problem domain {:?}",
            u.support, problem.domain
        )));
    }
    let s = problem.s;
    let (a, b) = problem.domain;
    let kappa = u.holder_exponent_at_boundary;
    let sings = [
        SingularitySpec::algebraic(a, kappa),
        SingularitySpec::algebraic(b, kappa),
    ];
    let term_ufu = quad::integrate_adaptive(
        &|x: f64| {
            let v = u.eval(x);
            v * problem.f(x, v)
        },
        a,
        b,
        &sings,
        tol,
    )?
    .value;
    let term_big_f = quad::integrate_adaptive(
        &|x: f64| problem.big_f(x, u.eval(x)),
        a,
        b,
        &sings,
        tol,
    )?
    .value;
    let term_big_f_x = if problem.has_x_term() {
        quad::integrate_adaptive(
            &|x: f64| x * problem.big_f_x(x, u.eval(x)).unwrap_or(0.0),
            a,
            b,
            &sings,
            tol,
        )?
        .value
    } else {
        0.0
    };
    let boundary_sum = b * traces.1 * traces.1 - a * traces.0 * traces.0;
    finish_report(s, problem.n, term_ufu, term_big_f, term_big_f_x, boundary_sum)
}

/// Both sides of the two-function boundary identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BilinearReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Derivative of a compactly supported profile by a central difference whose
/// step shrinks near the support ends, keeping its relative accuracy uniform
/// down the boundary layer.
fn profile_derivative(w: &PointFunction, x: f64) -> f64 {
    let (a, b) = w.support;
    let width = b - a;
    let h = (1e-4 * width).min(0.02 * (x - a).min(b - x));
    if h <= 0.0 {
        return 0.0;
    }
    (w.eval(x + h) - w.eval(x - h)) / (2.0 * h)
}

/// Relative depth below which operator evaluations are skipped: closer to
/// the support ends the pointwise quadrature's cancellation between pieces
/// of size `dist^(kappa - 1)` can no longer be resolved.  Callers whose
/// weight vanishes at the ends may ignore the sliver; a derivative weight
/// needs it restored analytically from the boundary trace.
const OPERATOR_DEPTH_CUT: f64 = 1e-7;

/// Absolute tolerance for an operator evaluation feeding an integral whose
/// weight scales like `dist^(p - 1)` toward the support ends.  A dyadic
/// band at depth `dist` then contributes `dist^p` times the evaluation
/// error, so letting the tolerance grow like `(width / dist)^p` keeps every
/// band's share flat at `base` while staying above the evaluation noise
/// floor, which only grows like `dist^(kappa - 1)`.
fn graded_point_tol(base: f64, width: f64, dist: f64, p: f64) -> f64 {
    (base * (width / dist).powf(p)).clamp(base, 1e-2)
}

/// Verify `int u' (-Delta)^s v + int v' (-Delta)^s u =
/// -Gamma(1+s)^2 [q_u(b) q_v(b) - q_u(a) q_v(a)]` for two profiles sharing a
/// support.  All operator values come from pointwise quadrature and the
/// traces are extracted from the profiles themselves.
pub fn check_bilinear(
    u: &PointFunction,
    v: &PointFunction,
    order: f64,
    tol: f64,
) -> Result<BilinearReport> {
    if u.support != v.support {
        return Err(Error::Validation(format!(
            "profiles must share a support, got {:?} and {:?}",
            u.support, v.support
        )));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::Validation(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    let (a, b) = u.support;
    let width = b - a;
    let qs = |w: &PointFunction| -> Result<(f64, f64)> {
        let left = extract_trace(w, order, w.support, a, 10)?;
        let right = extract_trace(w, order, w.support, b, 10)?;
        Ok((left.q_value, right.q_value))
    };
    let (qua, qub) = qs(u)?;
    let (qva, qvb) = qs(v)?;

    let cut = OPERATOR_DEPTH_CUT * width;
    let term = |w1: &PointFunction, w2: &PointFunction, q1: (f64, f64)| -> Result<f64> {
        // The chart samples reach depths where the operator cannot be
        // evaluated; grade its tolerance by the weight exponent of w1'
        // and cut the integrand at the evaluable depth.
        let kappa1 = w1.holder_exponent_at_boundary;
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let integrand = |x: f64| {
            let dist = (x - a).min(b - x);
            if dist < cut {
                return 0.0;
            }
            let inner_tol = graded_point_tol(1e-9, width, dist, kappa1);
            match frac_lap_point_tol(w2, order, x, inner_tol) {
                Ok(l) => profile_derivative(w1, x) * l,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            }
        };
        // The derivative blows up like dist^(kappa - 1) at the ends.
        let sings = [
            SingularitySpec::algebraic(a, kappa1 - 1.0),
            SingularitySpec::algebraic(b, kappa1 - 1.0),
        ];
        let r = quad::integrate_adaptive(&integrand, a, b, &sings, tol);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        // Restore the two cut slivers from the leading behavior
        // w1 = q dist^kappa, whose sliver integral is q L cut^kappa with
        // the operator sampled at the cut; the neglected remainder scales
        // like cut^(1 + kappa).
        let cut_tol = graded_point_tol(1e-9, width, cut, kappa1);
        let la = frac_lap_point_tol(w2, order, a + cut, cut_tol)?;
        let lb = frac_lap_point_tol(w2, order, b - cut, cut_tol)?;
        Ok(r?.value + (q1.0 * la - q1.1 * lb) * cut.powf(kappa1))
    };
    let lhs = term(u, v, (qua, qub))? + term(v, u, (qva, qvb))?;
    let g = specfun::gamma(1.0 + order)?;
    let rhs = -g * g * (qub * qvb - qua * qva);
    let residual = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-14);
    Ok(BilinearReport { lhs, rhs, residual })
}

/// Dirichlet energy `1/2 int u (-Delta)^s u - int F(x, u)` by honest
/// quadrature with the operator evaluated pointwise.
pub fn energy(u: &PointFunction, problem: &SemilinearProblem, tol: f64) -> Result<f64> {
    if u.support != problem.domain {
        return Err(Error::Validation(format!(
            "profile support {:?} does not match the problem domain {:?}",
            u.support, problem.domain
        )));
    }
    let (a, b) = u.support;
    let kappa = u.holder_exponent_at_boundary;
    let sings = [
        SingularitySpec::algebraic(a, kappa),
        SingularitySpec::algebraic(b, kappa),
    ];
    let width = b - a;
    let inner_base = (0.1 * tol).clamp(1e-12, 1e-8);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |x: f64| {
        let dist = (x - a).min(b - x);
        if dist < OPERATOR_DEPTH_CUT * width {
            return 0.0;
        }
        // The weight u itself vanishes like dist^kappa, so the band
        // exponent is one more than for a derivative weight.
        let inner_tol = graded_point_tol(inner_base, width, dist, 1.0 + kappa);
        match frac_lap_point_tol(u, problem.s, x, inner_tol) {
            Ok(l) => u.eval(x) * l,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let sem = quad::integrate_adaptive(&integrand, a, b, &sings, tol);
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    let seminorm_sq = sem?.value;
    let potential = quad::integrate_adaptive(
        &|x: f64| problem.big_f(x, u.eval(x)),
        a,
        b,
        &sings,
        tol,
    )?
    .value;
    Ok(0.5 * seminorm_sq - potential)
}

/// Discrete energy of a computed solution.  Valid at solutions only, where
/// `u (-Delta)^s u = u f(x, u)` pointwise, so no matrix is needed.
pub fn energy_discrete(sol: &Solution, problem: &SemilinearProblem) -> Result<f64> {
    if sol.grid.interval != problem.domain {
        return Err(Error::Validation(format!(
            "solution interval {:?} does not match the problem domain {:?}",
            sol.grid.interval, problem.domain
        )));
    }
    let nodes = &sol.grid.nodes;
    let m = nodes.len() - 2;
    let g: Vec<f64> = (1..=m)
        .map(|i| {
            let x = nodes[i];
            let u = sol.grid.values[i];
            0.5 * u * problem.f(x, u) - problem.big_f(x, u)
        })
        .collect();
    Ok(integrate_nodal(nodes, problem.s, &g))
}

/// How a nonlinearity sits relative to the identity's obstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criticality {
    Subcritical,
    Critical,
    SupercriticalStrict,
}

/// Classification outcome; `witness` is a value of `u` violating the
/// supercritical inequality when the verdict is subcritical.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalityVerdict {
    pub classification: Criticality,
    pub witness: Option<f64>,
}

/// Classify a nonlinearity by the sign of
/// `(n - 2s)/2 u f - n F - x F_x` over a sample range of `u`:
/// negative anywhere means subcritical (nontrivial solutions are not
/// obstructed), identically zero means critical, strictly positive
/// everywhere means strictly supercritical.
pub fn classify_nonlinearity(
    problem: &SemilinearProblem,
    u_range: (f64, f64),
    samples: usize,
) -> Result<CriticalityVerdict> {
    let (lo, hi) = u_range;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::Validation(format!(
            "sample range must be finite with lo < hi, got ({lo}, {hi})"
        )));
    }
    if samples < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    let s = problem.s;
    let nf = problem.n as f64;
    let (a, b) = problem.domain;
    let xs: Vec<f64> = if problem.has_x_term() {
        (1..=9).map(|k| a + (b - a) * k as f64 / 10.0).collect()
    } else {
        vec![0.5 * (a + b)]
    };
    let mut any_strict = false;
    for k in 0..samples {
        let u = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
        if u.abs() < 1e-12 {
            continue;
        }
        for &x in &xs {
            let ufu = u * problem.f(x, u);
            let big = problem.big_f(x, u);
            let fx = problem.big_f_x(x, u).unwrap_or(0.0);
            let margin = 0.5 * (nf - 2.0 * s) * ufu - nf * big - x * fx;
            let scale = 1.0f64
                .max(ufu.abs())
                .max(nf * big.abs())
                .max((x * fx).abs());
            if margin < -1e-10 * scale {
                return Ok(CriticalityVerdict {
                    classification: Criticality::Subcritical,
                    witness: Some(u),
                });
            }
            if margin > 1e-10 * scale {
                any_strict = true;
            }
        }
    }
    Ok(CriticalityVerdict {
        classification: if any_strict {
            Criticality::SupercriticalStrict
        } else {
            Criticality::Critical
        },
        witness: None,
    })
}
