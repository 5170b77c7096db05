//! Bracketing root search for monotone functions.

use crate::error::{Error, Result};

/// Outcome of a bracketing search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Root {
    pub x: f64,
    /// `|f(x) - target|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Bisects `f(x) = target` on `(lo, hi)` where `f(lo) > target > f(hi)`.
///
/// The bracket is narrowed until it spans adjacent floats (or `max_iter` runs
/// out), so the returned point is as accurate as `f` allows; `tol` is then
/// enforced on the residual of the best point seen.
pub(crate) fn bisect_decreasing<F>(
    f: F,
    lo: f64,
    hi: f64,
    target: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Root>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo > target && f_hi < target) {
        return Err(Error::RootNotBracketed {
            lo,
            hi,
            sign_changes: 0,
        });
    }
    let mut best = Root {
        x: f64::NAN,
        residual: f64::INFINITY,
        iterations: 0,
    };
    for it in 1..=max_iter {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        let residual = (v - target).abs();
        if residual < best.residual {
            best = Root {
                x: mid,
                residual,
                iterations: it,
            };
        }
        if residual == 0.0 {
            return Ok(best);
        }
        if mid <= lo || mid >= hi {
            // bracket collapsed to adjacent floats
            break;
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.residual <= tol {
        return Ok(best);
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: best.residual,
        tolerance: tol,
    })
}
