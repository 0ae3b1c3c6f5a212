//! Scalar root bracketing, bisection and golden-section search.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectOptions {
    /// Stop once the bracket width falls below `rel_tol · |x|`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for BisectOptions {
    fn default() -> Self {
        BisectOptions {
            rel_tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// Bisection on `[lo, hi]` where `f(lo) < 0 <= f(hi)`.
///
/// Returns the upper end of the final bracket, so `f(result) >= 0`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, opts: BisectOptions) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(lo < hi);
    for _ in 0..opts.max_iter {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= opts.rel_tol * hi.abs().max(lo.abs()) {
            return Ok(hi);
        }
    }
    Err(Error::NoConvergence(opts.max_iter))
}

/// Walks a geometric grid from `start` to `stop` and returns the first
/// interval on which `f` goes from negative to non-negative.
pub fn first_crossing<F>(mut f: F, start: f64, stop: f64, factor: f64) -> Option<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(start > 0.0 && stop > start && factor > 1.0);
    let mut lo = start;
    if f(lo) >= 0.0 {
        return None;
    }
    loop {
        let hi = (lo * factor).min(stop);
        if f(hi) >= 0.0 {
            return Some((lo, hi));
        }
        if hi >= stop {
            return None;
        }
        lo = hi;
    }
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
