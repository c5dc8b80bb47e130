//! Special functions: Gamma, digamma, the real dilogarithm, the primitive
//! Psi(t) of log|1-r|/r, the Gauss hypergeometric function, and the
//! closed-form constants attached to the one-dimensional fractional
//! Laplacian (log-slope c1, jump c2, boundary constant c3, kernel
//! normalizations).

use crate::error::{Error, Result};
use crate::quad::{self, SingularityKind, SingularitySpec};
use serde::Serialize;
use std::f64::consts::PI;

/// Shift parameter of the rational Gamma approximation below.
const LANCZOS_G: f64 = 7.0;

/// Coefficients for the 9-term, g = 7 rational approximation of Gamma.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// True when `x` sits on a pole of Gamma (0, -1, -2, ...).
fn is_gamma_pole(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Gamma function on the real line away from its poles.
///
/// Relative error below 1e-13 on [0.1, 30]; negative non-integer arguments
/// go through the reflection formula.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("gamma: non-finite argument {x}")));
    }
    if is_gamma_pole(x) {
        return Err(Error::Domain(format!("gamma: pole at {x}")));
    }
    Ok(gamma_unchecked(x))
}

/// Gamma without the pole check; poles produce +-inf instead of an error.
/// Internal callers use this where an infinite value is the correct limit
/// (vanishing hypergeometric connection coefficients).
pub(crate) fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
        PI / ((PI * x).sin() * gamma_unchecked(1.0 - x))
    } else {
        let z = x - 1.0;
        let mut acc = LANCZOS[0];
        for (i, coef) in LANCZOS.iter().enumerate().skip(1) {
            acc += coef / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
    }
}

/// Digamma (logarithmic derivative of Gamma) for positive arguments.
///
/// Recurrence pushes the argument above 8, then the asymptotic series
/// through the x^-12 term; relative error below 1e-10.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "digamma: argument must be positive and finite, got {x}"
        )));
    }
    let mut shift = 0.0;
    let mut x = x;
    while x < 8.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // psi(x) ~ ln x - 1/(2x) - sum B_{2n} / (2n x^{2n})
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    Ok(shift + x.ln() - 0.5 * inv - tail)
}

/// Power series sum_{k>=1} t^k / k^2, valid for |t| <= 0.5.
fn dilog_series(t: f64) -> f64 {
    debug_assert!(t.abs() <= 0.5 + 1e-15);
    let mut sum = 0.0;
    let mut power = 1.0;
    for k in 1..200u32 {
        power *= t;
        let term = power / f64::from(k * k);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-30) {
            break;
        }
    }
    sum
}

/// Real dilogarithm Li2(t) for t <= 1.
///
/// Series on |t| <= 1/2; the reflection, Landen, and inversion identities
/// reduce every other admissible argument to that range.  Absolute error
/// below 1e-12.
pub fn dilog(t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("dilog: non-finite argument {t}")));
    }
    if t > 1.0 {
        return Err(Error::Domain(format!(
            "dilog: argument {t} exceeds 1 (real branch ends there)"
        )));
    }
    if t == 1.0 {
        return Ok(PI * PI / 6.0);
    }
    if t.abs() <= 0.5 {
        return Ok(dilog_series(t));
    }
    if t > 0.5 {
        // Reflection: Li2(t) + Li2(1-t) = pi^2/6 - ln t ln(1-t).
        let u = 1.0 - t;
        return Ok(PI * PI / 6.0 - t.ln() * u.ln() - dilog_series(u));
    }
    if t >= -1.0 {
        // Landen: Li2(t) = -Li2(t/(t-1)) - ln^2(1-t)/2; t/(t-1) lands in [1/3, 1/2].
        let u = t / (t - 1.0);
        let l = (1.0 - t).ln();
        return Ok(-dilog_series(u) - 0.5 * l * l);
    }
    // Inversion for t < -1: Li2(t) = -pi^2/6 - ln^2(-t)/2 - Li2(1/t).
    let l = (-t).ln();
    Ok(-PI * PI / 6.0 - 0.5 * l * l - dilog(1.0 / t)?)
}

/// Primitive Psi(t) = int_0^t log|1-r|/r dr.
///
/// Equals -dilog(t) for t <= 1 (negative arguments included); for t > 1 the
/// tail over (1, t) is integrated with its log singularity declared, added
/// to Psi(1) = -pi^2/6.
pub fn psi_primitive(t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::Domain(format!(
            "psi_primitive: non-finite argument {t}"
        )));
    }
    if t <= 1.0 {
        return Ok(-dilog(t)?);
    }
    let tail = quad::integrate_adaptive(
        &|r: f64| {
            let d = r - 1.0;
            if d <= 0.0 {
                0.0
            } else {
                d.ln() / r
            }
        },
        1.0,
        t,
        &[SingularitySpec {
            location: 1.0,
            kind: SingularityKind::Log,
        }],
        1e-11,
    )?;
    Ok(-PI * PI / 6.0 + tail.value)
}

/// Plain hypergeometric series with term recurrence; `z` in [0, 1).
fn gauss_series(a: f64, b: f64, c: f64, z: f64, max_terms: usize) -> Result<f64> {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut small_streak = 0;
    for k in 0..max_terms {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if !sum.is_finite() {
            return Err(Error::Divergence(format!(
                "hypergeometric series overflowed at term {k} (a={a}, b={b}, c={c}, z={z})"
            )));
        }
        if term.abs() <= f64::EPSILON * sum.abs().max(1.0) {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok(sum);
            }
        } else {
            small_streak = 0;
        }
    }
    Err(Error::Convergence(format!(
        "hypergeometric series did not converge within {max_terms} terms (z={z})"
    )))
}

/// Hypergeometric evaluation for z in [0, 1): series below 0.6, the
/// 1-z connection formula above, and a long direct series when the
/// connection coefficients degenerate (c-a-b near an integer).
fn hyp2f1_unit(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if z <= 0.6 {
        return gauss_series(a, b, c, z, 100_000);
    }
    let gap = c - a - b;
    if (gap - gap.round()).abs() < 0.05 {
        return gauss_series(a, b, c, z, 4_000_000);
    }
    let w = 1.0 - z;
    let f1 = gauss_series(a, b, 1.0 - gap, w, 100_000)?;
    let f2 = gauss_series(c - a, c - b, 1.0 + gap, w, 100_000)?;
    let coef1 =
        gamma_unchecked(c) * gamma_unchecked(gap) / (gamma_unchecked(c - a) * gamma_unchecked(c - b));
    let coef2 =
        gamma_unchecked(c) * gamma_unchecked(-gap) / (gamma_unchecked(a) * gamma_unchecked(b));
    Ok(coef1 * f1 + coef2 * w.powf(gap) * f2)
}

/// Gauss hypergeometric function 2F1(a, b; c; z) for real z <= 1.
///
/// z = 1 is admitted only when c - a - b > 0, where the Gamma quotient
/// gives the value; z < 0 goes through the Pfaff transform.  Relative
/// error <= 1e-10 for |z| <= 0.999.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    for v in [a, b, c, z] {
        if !v.is_finite() {
            return Err(Error::Domain("hyp2f1: non-finite argument".into()));
        }
    }
    if is_gamma_pole(c) {
        return Err(Error::Domain(format!(
            "hyp2f1: c = {c} is a nonpositive integer"
        )));
    }
    if z > 1.0 {
        return Err(Error::Domain(format!(
            "hyp2f1: argument z = {z} beyond the real branch (z <= 1)"
        )));
    }
    if z == 1.0 {
        let gap = c - a - b;
        if gap <= 0.0 {
            return Err(Error::Divergence(format!(
                "hyp2f1 diverges at z = 1 when c - a - b = {gap} <= 0"
            )));
        }
        let num = gamma_unchecked(c) * gamma_unchecked(gap);
        let den = gamma_unchecked(c - a) * gamma_unchecked(c - b);
        return Ok(num / den);
    }
    if z < 0.0 {
        // Pfaff: 2F1(a,b;c;z) = (1-z)^{-a} 2F1(a, c-b; c; z/(z-1)).
        let w = z / (z - 1.0);
        let inner = hyp2f1_unit(a, c - b, c, w)?;
        return Ok((1.0 - z).powf(-a) * inner);
    }
    hyp2f1_unit(a, b, c, z)
}

/// Limit as x -> 1 of 2F1(1+s, 1+s; 2+s; x)/(1+s) - 1/(s (1-x)^s),
/// obtained by extrapolating the ladder x_k = 1 - 2^-k, k = 4..14.
/// Equals -pi / sin(pi s) for s in (0, 1).
pub fn hyp2f1_singular_limit(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!(
            "hyp2f1_singular_limit: s must lie in (0,1), got {s}"
        )));
    }
    let mut values = Vec::with_capacity(11);
    for k in 4..=14 {
        let dx = 0.5f64.powi(k);
        let x = 1.0 - dx;
        let f = hyp2f1(1.0 + s, 1.0 + s, 2.0 + s, x)?;
        values.push(f / (1.0 + s) - 1.0 / (s * dx.powf(s)));
    }
    // The deviation from the limit expands in powers w^(1-s), w, w^(2-s),
    // w^2, ... of the distance w = 1 - x; a blind exponent fit would choke
    // on the slow leading power for s near 1, so each term is cancelled by
    // one Richardson pass at its known exponent instead.
    for e in [1.0 - s, 1.0, 2.0 - s, 2.0, 3.0 - s, 3.0] {
        if values.len() < 2 {
            break;
        }
        let factor = 2.0f64.powf(e);
        values = values
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
    }
    Ok(*values.last().expect("ladder nonempty"))
}

/// The closed-form constants of the boundary expansion and the Pohozaev
/// identity at a given order s: log-slope c1, jump c2, boundary constant
/// c3 = c1^2 (pi^2 + c2^2) = Gamma(1+s)^2, and the kernel normalizations
/// c_{1,s}, c_{1,s/2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FracConstants {
    pub s: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c_ns_1d_s: f64,
    pub c_ns_1d_half_s: f64,
}

/// Kernel normalization c_{1,sigma} = sigma 4^sigma Gamma(sigma + 1/2)
/// / (sqrt(pi) Gamma(1 - sigma)) of the singular-integral definition in 1D.
pub fn c_norm_1d(order: f64) -> Result<f64> {
    if !(order > 0.0 && order < 1.0) {
        return Err(Error::Domain(format!(
            "c_norm_1d: order must lie in (0,1), got {order}"
        )));
    }
    Ok(order * 4.0f64.powf(order) * gamma_unchecked(order + 0.5)
        / (PI.sqrt() * gamma_unchecked(1.0 - order)))
}

/// All constants for order s in (0, 1).
pub fn frac_constants(s: f64) -> Result<FracConstants> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!(
            "frac_constants: s must lie in (0,1), got {s}"
        )));
    }
    let c1 = gamma_unchecked(1.0 + s) * (PI * s / 2.0).sin() / PI;
    let c2 = PI / (PI * s / 2.0).tan();
    let c3 = c1 * c1 * (PI * PI + c2 * c2);
    Ok(FracConstants {
        s,
        c1,
        c2,
        c3,
        c_ns_1d_s: c_norm_1d(s)?,
        c_ns_1d_half_s: c_norm_1d(s / 2.0)?,
    })
}

/// The jump constant c2 recomputed as the paired singular integral
/// `int_0^inf {(1 - z^s)/|1 - z|^{1+s} + (1 + z^s)/|1 + z|^{1+s}} dz`,
/// without using its closed form; a cross-check of the whole quadrature
/// pipeline against `pi / tan(pi s / 2)`.
///
/// The two kernel pieces are folded onto (0, 1) around the z = 1
/// singularity, and beyond z = 2 the bounded-numerator parts are pulled out
/// in closed form while the growing-numerator parts, individually carrying
/// divergent 1/z tails, stay combined in a cancellation-free form that
/// decays like z^-2.
pub fn c2_by_quadrature(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!(
            "c2_by_quadrature: s must lie in (0,1), got {s}"
        )));
    }
    // z in (0, 1), written against u = 1 - z; (1 - u)^s - 1 via exp_m1
    // stays accurate down to the rounding floor in u.
    let near = |u: f64| {
        let pow_m1 = (s * (-u).ln_1p()).exp_m1();
        -pow_m1 / u.powf(1.0 + s) + (2.0 + pow_m1) / (2.0 - u).powf(1.0 + s)
    };
    let near_sings = [
        SingularitySpec::algebraic(0.0, -s),
        SingularitySpec::algebraic(1.0, s),
    ];
    let near_part = quad::integrate_adaptive(&near, 0.0, 1.0, &near_sings, 1e-10)?;

    // z in (1, 2), against v = z - 1.
    let far = |v: f64| {
        let pow_m1 = (s * v.ln_1p()).exp_m1();
        -pow_m1 / v.powf(1.0 + s) + (2.0 + pow_m1) / (2.0 + v).powf(1.0 + s)
    };
    let far_sings = [SingularitySpec::algebraic(0.0, -s)];
    let far_head = quad::integrate_adaptive(&far, 0.0, 1.0, &far_sings, 1e-10)?;

    // v in (1, inf): the coupled difference of the z^s-numerator parts.
    let coupled = |v: f64| {
        ((1.0 + v).powf(s) / v.powf(1.0 + s)) * (-(1.0 + s) * (2.0 / v).ln_1p()).exp_m1()
    };
    let far_tail = quad::integrate_halfline(&coupled, 1.0, 2.0, 1e-10)?;
    let monomial_tail = (1.0 + 3.0f64.powf(-s)) / s;

    Ok(near_part.value + far_head.value + far_tail.value + monomial_tail)
}
