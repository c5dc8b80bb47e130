//! Scale-correlation functional on boundary-layer profiles.
//!
//! For a profile `w` on the half line, `I_lambda = int_0^infty
//! w(lambda t) w(t / lambda) dt` is maximal at `lambda = 1`, and the
//! one-sided derivative `-d/dlambda I_lambda` at 1 is the quadratic
//! functional estimated here.  On the model profile `A log-|t-1| + B
//! 1_{[0,1]}` it evaluates to `A^2 pi^2 + B^2`, which is what ties the
//! log amplitude and the jump of an extracted boundary profile together.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extrapolate;
use crate::quad::{self, SingularitySpec};
use crate::specfun;

/// Smooth compactly supported addition to the model profile.
#[derive(Clone)]
pub struct SmoothPart {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub support: (f64, f64),
}

impl SmoothPart {
    pub fn new(
        support: (f64, f64),
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let (a, b) = support;
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(Error::Validation(format!(
                "support must be finite with a < b, got ({a}, {b})"
            )));
        }
        Ok(Self {
            eval: Arc::new(eval),
            support,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t > self.support.0 && t < self.support.1 {
            (self.eval)(t)
        } else {
            0.0
        }
    }
}

impl fmt::Debug for SmoothPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothPart")
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

/// Model profile `A log-|t-1| + B 1_{[0,1]}(t) + h(t)` with
/// `log-(d) = min(ln d, 0)`.
#[derive(Debug, Clone, Default)]
pub struct LogJumpProfile {
    pub log_amplitude: f64,
    pub jump_amplitude: f64,
    pub h: Option<SmoothPart>,
}

impl LogJumpProfile {
    pub fn new(log_amplitude: f64, jump_amplitude: f64) -> Result<Self> {
        if !log_amplitude.is_finite() || !jump_amplitude.is_finite() {
            return Err(Error::Validation(
                "profile amplitudes must be finite".into(),
            ));
        }
        Ok(Self {
            log_amplitude,
            jump_amplitude,
            h: None,
        })
    }

    pub fn with_smooth_part(mut self, h: SmoothPart) -> Self {
        self.h = Some(h);
        self
    }

    /// Profile value; the log factor is clamped at the smallest positive
    /// float so evaluation exactly on the singular point stays finite.
    pub fn eval(&self, t: f64) -> f64 {
        let mut v = 0.0;
        if self.log_amplitude != 0.0 {
            let d = (t - 1.0).abs().max(f64::MIN_POSITIVE);
            if d < 1.0 {
                v += self.log_amplitude * d.ln();
            }
        }
        if self.jump_amplitude != 0.0 && (0.0..=1.0).contains(&t) {
            v += self.jump_amplitude;
        }
        if let Some(h) = &self.h {
            v += h.eval(t);
        }
        v
    }

    /// Upper end of the profile support.
    fn support_hi(&self) -> f64 {
        let base: f64 = if self.log_amplitude != 0.0 {
            2.0
        } else if self.jump_amplitude != 0.0 {
            1.0
        } else {
            0.0
        };
        match &self.h {
            Some(h) => base.max(h.support.1),
            None => base,
        }
    }
}

/// Scale correlation `int_0^infty w(lambda t) w(t / lambda) dt` by adaptive
/// quadrature with the log points and the support kinks declared.
pub fn i_lambda(w: &LogJumpProfile, lambda: f64, tol: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda < 1.0 {
        return Err(Error::Validation(format!(
            "scale parameter must satisfy lambda >= 1, got {lambda}"
        )));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::Validation(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    let s_hi = w.support_hi();
    if s_hi == 0.0 {
        return Ok(0.0);
    }
    let hi = s_hi / lambda;

    let mut sings: Vec<SingularitySpec> = Vec::new();
    let mut logs: Vec<f64> = Vec::new();
    if w.log_amplitude != 0.0 || w.jump_amplitude != 0.0 {
        // Singular/jump point of each factor.
        for loc in [1.0 / lambda, lambda] {
            if loc > 0.0 && loc < hi && !logs.contains(&loc) {
                logs.push(loc);
                sings.push(SingularitySpec::log(loc));
            }
        }
    }
    let mut cuts: Vec<f64> = Vec::new();
    if w.log_amplitude != 0.0 {
        // Edge of the log hump of each factor.
        cuts.push(2.0 / lambda);
        cuts.push(2.0 * lambda);
    }
    if let Some(h) = &w.h {
        for e in [h.support.0, h.support.1] {
            cuts.push(e / lambda);
            cuts.push(e * lambda);
        }
    }
    for cand in cuts {
        if cand > 0.0 && cand < hi && !logs.contains(&cand) {
            sings.push(SingularitySpec::algebraic(cand, 1.0));
        }
    }

    let f = |t: f64| w.eval(lambda * t) * w.eval(t / lambda);
    let r = quad::integrate_adaptive(&f, 0.0, hi, &sings, tol)?;
    Ok(r.value)
}

/// Closed form of `I_lambda - I_1` for the pure log profile (`A = 1`,
/// `B = 0`), valid for `lambda` in `(1, 2)`.  Everything reduces to the
/// primitive of `log|1-r|/r` evaluated at two rational points of lambda.
pub fn i_lambda_log_closed(lambda: f64) -> Result<f64> {
    if !(lambda > 1.0 && lambda < 2.0) {
        return Err(Error::Domain(format!(
            "closed form requires lambda in (1, 2), got {lambda}"
        )));
    }
    let lsq = lambda * lambda;
    let coef = (lsq - 1.0) / lambda;
    let l2 = (2.0 / lsq - 1.0).abs().ln();
    let upper = (lambda - 2.0 / lambda) * l2 - coef * (lsq - 1.0).ln() * l2
        - coef * specfun::psi_primitive((lsq - 2.0) / (lsq - 1.0))?
        + 4.0 / lambda;
    let lower = -coef * specfun::psi_primitive(lsq / (lsq - 1.0))?;
    Ok(upper - lower - 4.0)
}

/// Extrapolated estimate of the scale derivative, with the evidence that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrakIEstimate {
    pub value: f64,
    pub lambda_ladder: Vec<f64>,
    pub raw_quotients: Vec<f64>,
    pub extrapolation_error: f64,
}

/// Default geometric ladder `1 + 2^{-k}`, `k = 4..=12`.
pub fn default_ladder() -> Vec<f64> {
    (4..=12).map(|k| 1.0 + 2.0f64.powi(-k)).collect()
}

/// Scale-derivative estimate for a model profile via quadrature of each
/// `I_lambda`.
pub fn frak_i_estimate(w: &LogJumpProfile, ladder: &[f64]) -> Result<FrakIEstimate> {
    frak_i_from(|l| i_lambda(w, l, 1e-9), ladder)
}

/// Same estimate for a sampled profile, with each `I_lambda` exact.
pub fn frak_i_estimate_samples(w: &PiecewiseLinear, ladder: &[f64]) -> Result<FrakIEstimate> {
    frak_i_from(|l| i_lambda_samples(w, l), ladder)
}

fn frak_i_from(ilam: impl Fn(f64) -> Result<f64>, ladder: &[f64]) -> Result<FrakIEstimate> {
    if ladder.len() < 4 {
        return Err(Error::Validation(format!(
            "ladder needs at least 4 scales, got {}",
            ladder.len()
        )));
    }
    for &l in ladder {
        if !l.is_finite() || l <= 1.0 || l > 1.5 {
            return Err(Error::Validation(format!(
                "ladder entries must lie in (1, 1.5], got {l}"
            )));
        }
    }
    for pair in ladder.windows(2) {
        if pair[1] >= pair[0] {
            return Err(Error::Validation(
                "ladder must decrease strictly toward 1".into(),
            ));
        }
    }
    let ratio = (ladder[0] - 1.0) / (ladder[1] - 1.0);
    for pair in ladder.windows(2) {
        let r = (pair[0] - 1.0) / (pair[1] - 1.0);
        if (r - ratio).abs() > 1e-6 * ratio {
            return Err(Error::Validation(
                "ladder gaps to 1 must shrink geometrically".into(),
            ));
        }
    }
    let i1 = ilam(1.0)?;
    let mut quotients = Vec::with_capacity(ladder.len());
    for &l in ladder {
        quotients.push((i1 - ilam(l)?) / (l - 1.0));
    }
    let ex = extrapolate::limit_fitted(&quotients, ratio);
    let n = quotients.len();
    let d_first = (quotients[1] - quotients[0]).abs();
    let d_last = (quotients[n - 1] - quotients[n - 2]).abs();
    if !ex.value.is_finite()
        || !ex.error_estimate.is_finite()
        || (d_last > d_first && d_last > 1e-12)
    {
        return Err(Error::Convergence(
            "scale quotients do not settle along the ladder".into(),
        ));
    }
    Ok(FrakIEstimate {
        value: ex.value,
        lambda_ladder: ladder.to_vec(),
        raw_quotients: quotients,
        extrapolation_error: ex.error_estimate,
    })
}

/// Compactly supported piecewise-linear profile given by samples; zero
/// outside the first and last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinear {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() || breakpoints.len() < 2 {
            return Err(Error::Validation(format!(
                "need matching breakpoint/value lists of length >= 2, got {} and {}",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(
                "breakpoints and values must be finite".into(),
            ));
        }
        for pair in breakpoints.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::Validation(
                    "breakpoints must increase strictly".into(),
                ));
            }
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let b = &self.breakpoints;
        let n = b.len();
        if !(t >= b[0] && t <= b[n - 1]) {
            return 0.0;
        }
        if t == b[n - 1] {
            return self.values[n - 1];
        }
        let hi = b.partition_point(|&x| x <= t);
        let k = hi.saturating_sub(1).min(n - 2);
        let w = (t - b[k]) / (b[k + 1] - b[k]);
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }
}

/// Exact scale correlation of a sampled profile: the integrand is piecewise
/// quadratic between the dilated breakpoint images, so two-point Gauss per
/// piece integrates it exactly.
pub fn i_lambda_samples(w: &PiecewiseLinear, lambda: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda < 1.0 {
        return Err(Error::Validation(format!(
            "scale parameter must satisfy lambda >= 1, got {lambda}"
        )));
    }
    let b = &w.breakpoints;
    let last = b.len() - 1;
    let lo = (b[0] / lambda).max(b[0] * lambda).max(0.0);
    let hi = (b[last] / lambda).min(b[last] * lambda);
    if !(hi > lo) {
        return Ok(0.0);
    }
    let mut pts = vec![lo, hi];
    for &bi in b {
        for cand in [bi / lambda, bi * lambda] {
            if cand > lo && cand < hi {
                pts.push(cand);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    const INV_SQRT3: f64 = 0.577_350_269_189_625_8;
    let mut sum = 0.0;
    for k in 0..pts.len() - 1 {
        let half = 0.5 * (pts[k + 1] - pts[k]);
        let mid = 0.5 * (pts[k] + pts[k + 1]);
        for g in [-INV_SQRT3, INV_SQRT3] {
            let t = mid + half * g;
            sum += half * w.eval(lambda * t) * w.eval(t / lambda);
        }
    }
    Ok(sum)
}
