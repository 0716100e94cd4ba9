//! Shared quadrature building blocks.
//!
//! Node evaluation may run in parallel, but accumulation always goes
//! through pairwise summation over the node order, so results are
//! bit-identical regardless of thread count.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interval::pairwise_sum;

/// Pairwise sum of complex samples.
pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    match xs.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum_complex(&xs[..mid]) + pairwise_sum_complex(&xs[mid..])
        }
    }
}

/// Trapezoid value on a uniform periodic grid of `n` nodes over `[a, a+len)`.
fn periodic_trapezoid<F>(f: &F, a: f64, len: f64, n: usize) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    let h = len / n as f64;
    let vals: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| f(a + i as f64 * h))
        .collect();
    pairwise_sum(&vals) * h
}

/// Adaptive trapezoid rule for a periodic integrand over `[a, a + len)`.
///
/// Starts from `seed` nodes (an odd core keeps power-of-two frequency
/// ladders from aliasing onto the mean) and doubles until two successive
/// refinements agree to `rel_tol` relative to scale. Returns the value and
/// a convergence flag instead of erroring, since variance estimators report
/// the flag in their result records.
pub fn periodic_trapezoid_adaptive<F>(
    f: &F,
    a: f64,
    len: f64,
    seed: usize,
    rel_tol: f64,
    max_nodes: usize,
) -> (f64, bool)
where
    F: Fn(f64) -> f64 + Sync,
{
    let mut n = seed.max(3);
    let mut prev = periodic_trapezoid(f, a, len, n);
    let mut doublings = 0usize;
    loop {
        n *= 2;
        let cur = periodic_trapezoid(f, a, len, n);
        doublings += 1;
        let scale = cur.abs().max(prev.abs()).max(1e-300);
        if doublings >= 2 && (cur - prev).abs() <= rel_tol * scale {
            return (cur, true);
        }
        if n > max_nodes {
            return (cur, false);
        }
        prev = cur;
    }
}

/// Simpson value on `2m` uniform panels.
fn simpson_uniform<F>(f: &F, a: f64, b: f64, m: usize) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    let n = 2 * m;
    let h = (b - a) / n as f64;
    let vals: Vec<f64> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * f(a + i as f64 * h)
        })
        .collect();
    pairwise_sum(&vals) * h / 3.0
}

/// Composite Simpson with uniform doubling until successive values agree.
pub fn simpson_doubling<F>(f: &F, a: f64, b: f64, tol: f64, max_panels: usize) -> Result<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let mut m = 8usize;
    let mut prev = simpson_uniform(f, a, b, m);
    loop {
        m *= 2;
        let cur = simpson_uniform(f, a, b, m);
        let scale = cur.abs().max(prev.abs()).max(1.0);
        if (cur - prev).abs() <= tol * scale {
            return Ok(cur);
        }
        if m > max_panels {
            return Err(Error::NoConvergence { prev, last: cur, tol });
        }
        prev = cur;
    }
}

fn simpson_step(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    (fa + 4.0 * fm + fb) * h / 6.0
}

fn adaptive_inner<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_step(fa, flm, fm, m - a);
    let right = simpson_step(fm, frm, fb, b - m);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol || depth == 0 {
        if depth == 0 && err.abs() > 15.0 * tol {
            return Err(Error::NoConvergence {
                prev: whole,
                last: left + right,
                tol,
            });
        }
        return Ok(left + right + err / 15.0);
    }
    Ok(adaptive_inner(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
        + adaptive_inner(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
}

/// Classic recursive adaptive Simpson with absolute tolerance.
pub fn simpson_adaptive_real<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson_step(fa, fm, fb, b - a);
    adaptive_inner(f, a, b, fa, fm, fb, whole, tol.max(1e-300), 48)
}

/// Adaptive Simpson for complex integrands (componentwise tolerance).
pub fn simpson_adaptive_complex<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    let re = simpson_adaptive_real(&|t: f64| f(t).re, a, b, tol)?;
    let im = simpson_adaptive_real(&|t: f64| f(t).im, a, b, tol)?;
    Ok(Complex64::new(re, im))
}

/// Mean of a complex function over a uniform periodic grid.
pub fn periodic_mean_complex<F>(f: &F, a: f64, len: f64, n: usize) -> Complex64
where
    F: Fn(f64) -> Complex64 + Sync,
{
    let vals: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|i| f(a + i as f64 * len / n as f64))
        .collect();
    pairwise_sum_complex(&vals) / n as f64
}
