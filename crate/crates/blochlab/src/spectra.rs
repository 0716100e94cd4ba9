//! Estimators for the boundary-growth characteristics of Bloch functions:
//! asymptotic variance (circle and strip forms), the integral means
//! spectrum, the iterated-logarithm statistic, and hyperbolic ball
//! averages of the squared Bloch quotient.
//!
//! The limits behind these quantities are limsups as the parameter
//! approaches the boundary; nothing here claims convergence. Estimators
//! report the value at the deepest parameter together with the whole
//! per-step sequence, plus a convergence flag for the quadratures.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{cauchy_bound, BlochFunction};
use crate::error::{Error, Result};
use crate::hyperbolic::{
    cayley, cayley_inverse, cayley_inverse_deriv, euclidean_radius, Domain, HyperbolicPoint,
    MobiusDisk,
};
use crate::interval::pairwise_sum;
use crate::quad::periodic_trapezoid_adaptive;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceMethod {
    Circle,
    Strip,
}

/// Result record of a variance estimator run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// Value at the deepest parameter (last entry of `per_step`).
    pub value: f64,
    /// The r (circle) or h (strip) schedule that was run.
    pub params: Vec<f64>,
    /// One normalized integral per schedule entry.
    pub per_step: Vec<f64>,
    pub method: VarianceMethod,
    /// False when any quadrature failed its refinement-agreement check.
    pub converged: bool,
}

const CIRCLE_SEED_NODES: usize = 67;
const CIRCLE_MAX_NODES: usize = 67 << 15;

/// Circle form of the asymptotic variance: for each r in `rs` computes
/// `(1 / (2 pi |log(1-r)|)) * int_{|z|=r} |b|^2 |dz|` by the adaptive
/// periodic trapezoid rule.
pub fn variance_circle(b: &BlochFunction, rs: &[f64]) -> Result<VarianceEstimate> {
    if b.domain() != Domain::Disk {
        return Err(Error::domain("circle variance expects a disk function"));
    }
    if rs.is_empty() {
        return Err(Error::domain("empty radius schedule"));
    }
    if rs.windows(2).any(|w| w[0] >= w[1]) || *rs.last().unwrap() >= 1.0 || rs[0] <= 0.0 {
        return Err(Error::domain("radius schedule must be increasing inside (0, 1)"));
    }
    let mut per_step = Vec::with_capacity(rs.len());
    let mut converged = true;
    for &r in rs {
        let (mean, ok) = periodic_trapezoid_adaptive(
            &|th: f64| b.eval(Complex64::from_polar(r, th)).norm_sqr(),
            0.0,
            std::f64::consts::TAU,
            CIRCLE_SEED_NODES,
            1e-7,
            CIRCLE_MAX_NODES,
        );
        converged &= ok;
        // mean carries the dθ integral scaled by 2π/N; |dz| = r dθ and the
        // normalization divides by 2π |log(1-r)|.
        let val = r * mean / (std::f64::consts::TAU * (1.0 - r).ln().abs());
        per_step.push(val);
    }
    Ok(VarianceEstimate {
        value: *per_step.last().unwrap(),
        params: rs.to_vec(),
        per_step,
        method: VarianceMethod::Circle,
        converged,
    })
}

/// Mean of |b'(x + iy)|^2 over x in [0, 1) by composite Simpson with panel
/// doubling. The panel count keeps an odd factor so power-of-two frequency
/// ladders (conjugated gap series) cannot alias onto the mean.
fn strip_x_mean(b: &BlochFunction, y: f64, rel_tol: f64) -> (f64, bool) {
    let f = |x: f64| b.deriv(Complex64::new(x, y)).norm_sqr();
    let simpson = |panels: usize| -> f64 {
        let h = 1.0 / panels as f64;
        let vals: Vec<f64> = (0..=panels)
            .into_par_iter()
            .map(|i| {
                let w = if i == 0 || i == panels {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * f(i as f64 * h)
            })
            .collect();
        pairwise_sum(&vals) * h / 3.0
    };
    let mut panels = 134;
    let mut prev = simpson(panels);
    loop {
        panels *= 2;
        let cur = simpson(panels);
        let scale = cur.abs().max(prev.abs()).max(1e-300);
        if (cur - prev).abs() <= rel_tol * scale {
            return (cur, true);
        }
        if panels > 134 << 12 {
            return (cur, false);
        }
        prev = cur;
    }
}

/// Strip form of the asymptotic variance:
/// `(1/|log h|) int_h^1 int_0^1 |2 b' / rho|^2 dx dy / y`,
/// evaluated as `int 4 y |b'|^2 dx dy` with logarithmic refinement in y.
pub fn variance_strip(b: &BlochFunction, h: f64) -> Result<VarianceEstimate> {
    if b.domain() != Domain::HalfPlane {
        return Err(Error::domain("strip variance expects a half-plane function"));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::domain(format!("strip depth h = {h} outside (0, 1)")));
    }
    let log_h = h.ln();
    let x_flag = std::sync::atomic::AtomicBool::new(true);
    // Integrand in t = log y: 4 e^{2t} * mean_x |b'|^2.
    let g = |t: f64| {
        let y = t.exp();
        let (m, ok) = strip_x_mean(b, y, 1e-6);
        if !ok {
            x_flag.store(false, std::sync::atomic::Ordering::Relaxed);
        }
        4.0 * y * y * m
    };
    let simpson = |panels: usize| -> f64 {
        let step = -log_h / panels as f64;
        let vals: Vec<f64> = (0..=panels)
            .into_par_iter()
            .map(|i| {
                let w = if i == 0 || i == panels {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * g(log_h + i as f64 * step)
            })
            .collect();
        pairwise_sum(&vals) * step / 3.0
    };
    let mut panels = (16.0 * log_h.abs()).ceil() as usize;
    if panels % 2 == 1 {
        panels += 1;
    }
    panels = panels.max(64);
    let mut prev = simpson(panels);
    let mut y_ok = false;
    for _ in 0..5 {
        panels *= 2;
        let cur = simpson(panels);
        let scale = cur.abs().max(prev.abs()).max(1e-300);
        let agreed = (cur - prev).abs() <= 1e-4 * scale;
        prev = cur;
        if agreed {
            y_ok = true;
            break;
        }
    }
    let value = prev / log_h.abs();
    Ok(VarianceEstimate {
        value,
        params: vec![h],
        per_step: vec![value],
        method: VarianceMethod::Strip,
        converged: y_ok && x_flag.into_inner(),
    })
}

/// Integral means value `(1/|log(1-r)|) log int_{|z|=r} |e^{tau b}| |dz|`
/// at the deepest r of the schedule, computed in log-space so large
/// |tau b| cannot overflow.
pub fn integral_means(b: &BlochFunction, tau: Complex64, rs: &[f64]) -> Result<f64> {
    if b.domain() != Domain::Disk {
        return Err(Error::domain("integral means expects a disk function"));
    }
    if rs.is_empty() || rs.iter().any(|&r| !(0.0 < r && r < 1.0)) {
        return Err(Error::domain("radius schedule must lie in (0, 1)"));
    }
    let mut last = 0.0;
    for &r in rs {
        last = integral_means_at(b, tau, r)?;
    }
    Ok(last)
}

fn integral_means_at(b: &BlochFunction, tau: Complex64, r: f64) -> Result<f64> {
    let log_integral = |n: usize| -> f64 {
        let exps: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|j| {
                let th = std::f64::consts::TAU * j as f64 / n as f64;
                (tau * b.eval(Complex64::from_polar(r, th))).re
            })
            .collect();
        let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = exps.iter().map(|&g| (g - m).exp()).collect();
        // log( (2 pi r / n) * sum e^{g_j} )
        m + pairwise_sum(&scaled).ln() + (std::f64::consts::TAU * r / n as f64).ln()
    };
    // |e^{tau b}| can be sharply peaked (width comparable to 1-r), so the
    // angular grid may need to grow far past the variance caps; the target
    // is the log of the integral, where 5e-4 relative is ample.
    let tol = 5e-4;
    let mut n = CIRCLE_SEED_NODES;
    let mut prev = log_integral(n);
    let mut doublings = 0usize;
    loop {
        n *= 2;
        let cur = log_integral(n);
        doublings += 1;
        if doublings >= 2 && (cur - prev).abs() <= tol * cur.abs().max(1.0) {
            if !cur.is_finite() {
                return Err(Error::domain("integral means exceeded representable range"));
            }
            return Ok(cur / (1.0 - r).ln().abs());
        }
        if n > 67 << 18 {
            return Err(Error::NoConvergence { prev, last: cur, tol });
        }
        prev = cur;
    }
}

/// The iterated-logarithm statistic
/// `|b(r e^{i theta})| / sqrt(log(1/(1-r)) log log log(1/(1-r)))`.
/// Requires r large enough that the triple logarithm is positive.
pub fn lil_statistic(b: &BlochFunction, theta: f64, r: f64) -> Result<f64> {
    if b.domain() != Domain::Disk {
        return Err(Error::domain("LIL statistic expects a disk function"));
    }
    if !(0.0 < r && r < 1.0) {
        return Err(Error::domain(format!("radius {r} outside (0, 1)")));
    }
    let big_l = (1.0 / (1.0 - r)).ln();
    if big_l <= std::f64::consts::E {
        return Err(Error::domain(format!(
            "r = {r} too small: log log log(1/(1-r)) is not positive"
        )));
    }
    let denom = (big_l * big_l.ln().ln()).sqrt();
    Ok(b.eval(Complex64::from_polar(r, theta)).norm() / denom)
}

/// Mean of the squared Bloch quotient over the hyperbolic ball B(center, R)
/// with respect to hyperbolic area.
///
/// The ball is pulled back to a ball centered at the origin of the disk
/// (via the Cayley transform first, for half-plane functions); there the
/// integrand collapses to `4 |g'(z)|^2 |dz|^2` against hyperbolic area
/// `4 pi r^2/(1-r^2)`, and a polar quadrature with node doubling applies.
pub fn alpha_average(b: &BlochFunction, center: HyperbolicPoint, radius: f64) -> Result<f64> {
    if radius <= 0.0 {
        return Err(Error::domain("ball radius must be positive"));
    }
    if b.domain() != center.domain() {
        return Err(Error::domain("center and function live on different domains"));
    }
    let (g, c) = to_disk(b, center.z());
    // Pull the ball center to the origin.
    let phi = MobiusDisk::taking_origin_to(c)?;
    let pulled = g.compose_mobius(&phi);
    let r = euclidean_radius(radius)?;

    // int_{|z|<=r} |g'|^2 dA in polar form; the angular mean is already
    // normalized, so the radial integrand is 2 pi s * mean.
    let integral = |radial: usize| -> f64 {
        let shells: Vec<f64> = (0..radial)
            .into_par_iter()
            .map(|i| {
                let s = r * (i as f64 + 0.5) / radial as f64;
                let (raw, _) = periodic_trapezoid_adaptive(
                    &|th: f64| pulled.deriv(Complex64::from_polar(s, th)).norm_sqr(),
                    0.0,
                    std::f64::consts::TAU,
                    CIRCLE_SEED_NODES,
                    1e-9,
                    CIRCLE_SEED_NODES << 9,
                );
                raw * s * (r / radial as f64)
            })
            .collect();
        pairwise_sum(&shells)
    };
    let mut radial = 32;
    let mut prev = integral(radial);
    loop {
        radial *= 2;
        let cur = integral(radial);
        let scale = cur.abs().max(prev.abs()).max(1e-300);
        if (cur - prev).abs() <= 1e-6 * scale {
            // average = 4 * int |g'|^2 dA / (4 pi r^2/(1-r^2)); the raw
            // angular integral above carries the dθ measure already.
            return Ok(cur * (1.0 - r * r) / (std::f64::consts::PI * r * r));
        }
        if radial > 1 << 12 {
            return Err(Error::NoConvergence { prev, last: cur, tol: 1e-6 });
        }
        prev = cur;
    }
}

/// Transports a half-plane function to the disk through the Cayley map;
/// Bloch quotients at corresponding points agree.
fn to_disk(b: &BlochFunction, center: Complex64) -> (BlochFunction, Complex64) {
    match b.domain() {
        Domain::Disk => (b.clone(), center),
        Domain::HalfPlane => {
            let bb = b.clone();
            let bb2 = b.clone();
            let g = BlochFunction::new(
                Domain::Disk,
                move |z| bb.eval(cayley_inverse(z)),
                move |z| bb2.deriv(cayley_inverse(z)) * cayley_inverse_deriv(z),
            );
            (g, cayley(center))
        }
    }
}

/// A candidate for the alpha supremum search.
struct Candidate {
    b: BlochFunction,
    /// Rigorous upper bound for its Bloch norm; the average is divided by
    /// the square of this, keeping the rescaled candidate inside the unit
    /// ball so the result is a genuine lower bound for alpha(R).
    norm_upper: f64,
}

/// Lower bound for alpha(R): the best hyperbolic ball average over a
/// seeded family of unit-ball candidates — the extremal special functions,
/// fixed norm-one probes, random polynomial derivatives rescaled by a
/// triangle-inequality norm bound, and convex combinations.
///
/// Centering at the origin loses nothing: replacing b by its composition
/// with a disk automorphism moves any ball onto B(0, R) without leaving
/// the unit ball.
pub fn alpha_sup_estimate(radius: f64, budget: usize, seed: u64) -> Result<f64> {
    if budget == 0 {
        return Err(Error::domain("candidate budget must be at least 1"));
    }
    if radius <= 0.0 {
        return Err(Error::domain("ball radius must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cands: Vec<Candidate> = Vec::new();

    // Fixed probes of norm exactly 1.
    cands.push(Candidate { b: BlochFunction::identity(), norm_upper: 1.0 });
    // b' = 1 + z^2: quotient |1+z^2|(1-|z|^2) <= (1+|z|^2)(1-|z|^2) <= 1.
    cands.push(Candidate {
        b: BlochFunction::poly(&[0.0, 1.0, 0.0, 1.0 / 3.0]).unwrap(),
        norm_upper: 1.0,
    });
    for i in 0..10 {
        if cands.len() >= budget {
            break;
        }
        cands.push(Candidate {
            b: BlochFunction::make_special(i as f64 / 10.0).unwrap(),
            norm_upper: 1.0,
        });
    }
    // Convex combinations of the identity with the extremal family.
    for a in [0.2, 0.4, 0.6] {
        if cands.len() >= budget {
            break;
        }
        let sp = BlochFunction::make_special(a).unwrap();
        let mix = BlochFunction::identity()
            .scale(Complex64::new(0.5, 0.0))
            .add(&sp.scale(Complex64::new(0.5, 0.0)))
            .unwrap();
        cands.push(Candidate { b: mix, norm_upper: 1.0 });
    }
    // Randomized polynomial derivatives near the identity, rescaled by the
    // triangle-inequality bound sum_j |c_j| max_t t^j (1 - t^2).
    while cands.len() < budget {
        let deg = rng.gen_range(2..=6usize);
        let mut coeffs = vec![Complex64::new(1.0, 0.0)];
        for _ in 1..=deg {
            let mag: f64 = rng.gen_range(0.0..0.6);
            let ph: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            coeffs.push(Complex64::from_polar(mag, ph));
        }
        // integrate the derivative to get the coefficients of b itself
        let mut bc = vec![Complex64::new(0.0, 0.0)];
        for (j, &c) in coeffs.iter().enumerate() {
            bc.push(c / (j as f64 + 1.0));
        }
        let mut bound = coeffs[0].norm();
        for (j, &c) in coeffs.iter().enumerate().skip(1) {
            bound += c.norm() / cauchy_bound(j as u32).expect("j >= 1");
        }
        cands.push(Candidate {
            b: BlochFunction::poly_complex(&bc).unwrap(),
            norm_upper: bound.max(1.0),
        });
    }
    cands.truncate(budget);

    let origin = HyperbolicPoint::disk(Complex64::new(0.0, 0.0))?;
    let scores: Vec<f64> = cands
        .par_iter()
        .map(|c| {
            let avg = alpha_average(&c.b, origin, radius).unwrap_or(0.0);
            avg / (c.norm_upper * c.norm_upper)
        })
        .collect();
    // deterministic fold in candidate order
    Ok(scores.iter().cloned().fold(0.0, f64::max))
}

/// Outcome of the small-quotient ball search.
#[derive(Clone, Debug, PartialEq)]
pub enum QuotientBallSearch {
    /// A sampled ball B(center, radius) on which every sample point had
    /// Bloch quotient below 1/2. Disk coordinates.
    Witness { center: Complex64, radius: f64 },
    /// No sampled ball qualified at this resolution. Not a proof of
    /// absence; retry with a finer net if needed.
    NoWitnessAtResolution,
}

/// Searches B(center, R) for a hyperbolic ball on which the Bloch quotient
/// stays below 1/2: scans a hyperbolic net for the smallest sampled
/// quotient, then grows sampled balls around the minimizer.
pub fn small_quotient_ball_search(
    b: &BlochFunction,
    center: HyperbolicPoint,
    radius: f64,
) -> Result<QuotientBallSearch> {
    if radius <= 0.0 {
        return Err(Error::domain("search radius must be positive"));
    }
    if b.domain() != center.domain() {
        return Err(Error::domain("center and function live on different domains"));
    }
    let (g, c) = to_disk(b, center.z());
    let phi = MobiusDisk::taking_origin_to(c)?;
    let step = 0.05f64;
    let net = hyperbolic_net(radius, step);
    let quot = |z: Complex64| -> Result<f64> { g.quotient_at(HyperbolicPoint::disk(z)?) };
    let mut best: Option<(Complex64, f64)> = None;
    for p in &net {
        let z = phi.apply(*p);
        let q = quot(z)?;
        if best.map_or(true, |(_, bq)| q < bq) {
            best = Some((z, q));
        }
    }
    let (zeta, qmin) = best.expect("net is nonempty");
    if qmin >= 0.5 {
        return Ok(QuotientBallSearch::NoWitnessAtResolution);
    }
    // Grow sampled balls around zeta while all samples stay below 1/2.
    let psi = MobiusDisk::taking_origin_to(zeta)?;
    let mut passed = 0.0f64;
    let mut s = step;
    while s <= radius + 1e-9 {
        let sub = hyperbolic_net(s, (s / 8.0).min(step));
        let ok = sub
            .iter()
            .all(|p| quot(psi.apply(*p)).map(|q| q < 0.5).unwrap_or(false));
        if !ok {
            break;
        }
        passed = s;
        s += step;
    }
    if passed == 0.0 {
        return Ok(QuotientBallSearch::NoWitnessAtResolution);
    }
    Ok(QuotientBallSearch::Witness { center: zeta, radius: passed })
}

/// Net covering B(0, R) with hyperbolic spacing about `step`: rings equally
/// spaced in hyperbolic radius, angular counts matched to circumference.
fn hyperbolic_net(radius: f64, step: f64) -> Vec<Complex64> {
    let mut pts = vec![Complex64::new(0.0, 0.0)];
    let rings = (radius / step).ceil() as usize;
    for i in 1..=rings {
        let d = radius * i as f64 / rings as f64;
        let r = (d / 2.0).tanh();
        let n = ((std::f64::consts::TAU * d.sinh() / step).ceil() as usize).clamp(8, 4096);
        for j in 0..n {
            let th = std::f64::consts::TAU * (j as f64 + 0.3 * (i % 3) as f64) / n as f64;
            pts.push(Complex64::from_polar(r, th));
        }
    }
    pts
}
