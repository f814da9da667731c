//! One-dimensional search routines shared by the solvers.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Result of a golden-section search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
    /// True when the search stopped on the iteration cap instead of the width.
    pub capped: bool,
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol` or after `max_iter`
/// shrink steps. Both endpoints are also evaluated so that minima sitting
/// exactly on the boundary are returned exactly.
pub fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Minimum {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let fa_end = f(a);
    let fb_end = f(b);
    if b - a <= tol {
        let (x, value) = if fa_end <= fb_end { (a, fa_end) } else { (b, fb_end) };
        return Minimum { x, value, iterations: 0, capped: false };
    }
    let (lo_end, hi_end) = (a, b);

    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iterations = 0;
    while b - a > tol && iterations < max_iter {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        iterations += 1;
    }
    let capped = b - a > tol;

    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if fa_end <= best.1 {
        best = (lo_end, fa_end);
    }
    if fb_end < best.1 {
        best = (hi_end, fb_end);
    }
    Minimum { x: best.0, value: best.1, iterations, capped }
}

/// Bisection for the root of a monotone `f` on `[lo, hi]`.
///
/// `f(lo)` and `f(hi)` must have opposite signs (or one of them be zero).
/// Stops when the bracket width drops below `abs_tol + rel_tol * |x|`.
pub fn bisect<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoConvergence {
            solver: "bisection",
            reason: format!("root not bracketed on [{lo}, {hi}] (f = {fa:e}, {fb:e})"),
        });
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= abs_tol + rel_tol * mid.abs() || mid == a || mid == b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Err(Error::NoConvergence {
        solver: "bisection",
        reason: format!("iteration cap {max_iter} reached with bracket [{a}, {b}]"),
    })
}
