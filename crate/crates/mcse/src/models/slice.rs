//! Univariate slice sampling with stepping out and shrinkage (Neal 2003).
//! Leaves any target with an evaluable log density invariant without
//! tuning beyond an initial interval width.

use crate::rng::RngStream;

/// One slice-sampling transition for the scalar `x0` under `log_f`.
/// Returns the new point together with its log density, so callers can
/// keep their cached density current without re-evaluating.
///
/// `width` is the initial interval width; `max_steps` bounds the total
/// stepping-out expansions (the random left/right allocation keeps the
/// limited version a valid transition). The target may return negative
/// infinity outside its support.
pub fn slice_step(
    x0: f64,
    mut log_f: impl FnMut(f64) -> f64,
    width: f64,
    max_steps: u32,
    stream: &mut RngStream,
) -> (f64, f64) {
    debug_assert!(width > 0.0);
    let log_fx0 = log_f(x0);
    debug_assert!(log_fx0.is_finite(), "slice_step started out of support");
    // vertical level: log u + log f(x0)
    let y = stream.uniform().ln() + log_fx0;

    // place the initial interval at random around x0, then step out with
    // the step budget split randomly between the two ends
    let mut left = x0 - stream.uniform() * width;
    let mut right = left + width;
    let mut j = (stream.uniform() * max_steps as f64).floor() as u32;
    let mut k = max_steps.saturating_sub(1).saturating_sub(j);
    while j > 0 && y < log_f(left) {
        left -= width;
        j -= 1;
    }
    while k > 0 && y < log_f(right) {
        right += width;
        k -= 1;
    }

    // shrink until a point under the curve is found
    loop {
        let x1 = left + stream.uniform() * (right - left);
        let log_fx1 = log_f(x1);
        if y < log_fx1 {
            return (x1, log_fx1);
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
        if (right - left) < f64::EPSILON * (x0.abs() + f64::EPSILON) {
            // interval collapsed onto the current point
            return (x0, log_fx0);
        }
    }
}
