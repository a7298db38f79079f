//! Bracketing scalar root finder.

use crate::error::{Error, Result};

pub const MAX_BISECTIONS: usize = 200;

/// Bisection on `[lo, hi]`, where `f(lo)` and `f(hi)` must not share a sign.
///
/// Halves until the midpoint is no longer representable strictly inside the
/// bracket or [`MAX_BISECTIONS`] is reached, then returns the endpoint with the
/// smaller residual.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.signum() != f_hi.signum()) {
        return Err(Error::InvalidArgument(format!(
            "no sign change on [{lo}, {hi}] (f = {f_lo}, {f_hi})"
        )));
    }
    let mut f_hi = f_hi;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi })
}
