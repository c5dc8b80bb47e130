//! Richardson extrapolation on a geometric ladder with a fitted leading
//! exponent.
//!
//! Given samples v_k = L + a h_k^p + o(h_k^p) on h_k = h_0 r^{-k} with the
//! exponent p unknown, successive triples determine p empirically via
//! p_k = log_r((v_k - v_{k-1}) / (v_{k+1} - v_k)), after which one Richardson
//! step with that exponent cancels the leading term.  Iterating over the
//! resulting (shorter) ladder handles the next-order term in turn.

/// Outcome of an extrapolation pass.
#[derive(Debug, Clone)]
pub struct Extrapolated {
    /// Best estimate of the limit.
    pub value: f64,
    /// Spread of the final ladder, used as an error proxy.
    pub error_estimate: f64,
    /// Fitted exponent of the leading error term on the first pass.
    pub exponent: f64,
}

/// Extrapolate `values` sampled on a ladder with fixed ratio `ratio` > 1
/// between successive step sizes (h_{k+1} = h_k / ratio).
///
/// Needs at least 3 samples.  Ladders whose differences change sign or
/// stagnate fall back to the last value with the observed spread as the
/// error estimate; the caller decides whether that is good enough.
pub fn limit_fitted(values: &[f64], ratio: f64) -> Extrapolated {
    assert!(ratio > 1.0, "ladder ratio must exceed 1");
    assert!(values.len() >= 3, "need at least 3 ladder samples");

    let mut current = values.to_vec();
    let mut first_exponent = f64::NAN;
    // Each pass shortens the ladder by one; stop while a triple remains.
    for pass in 0..current.len() {
        if current.len() < 3 {
            break;
        }
        // Fit the exponent from the most converged triple (the tail).
        let m = current.len();
        let d1 = current[m - 2] - current[m - 3];
        let d2 = current[m - 1] - current[m - 2];
        if d2 == 0.0 {
            // Converged exactly; nothing left to cancel.
            break;
        }
        let q = d1 / d2;
        if !(q > 1.0) {
            // Not a decaying ladder; extrapolating would amplify noise.
            break;
        }
        let p = q.ln() / ratio.ln();
        if pass == 0 {
            first_exponent = p;
        }
        let factor = ratio.powf(p);
        let next: Vec<f64> = current
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
        current = next;
    }

    let value = *current.last().expect("ladder nonempty");
    let error_estimate = if current.len() >= 2 {
        (value - current[current.len() - 2]).abs()
    } else {
        // Single survivor: spread of the final triple of the original data.
        let m = values.len();
        (values[m - 1] - values[m - 2]).abs()
    };
    Extrapolated {
        value,
        error_estimate,
        exponent: first_exponent,
    }
}
