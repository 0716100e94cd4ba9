//! Concrete Bloch functions: evaluators, derivative power series, and
//! coefficient bounds.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hyperbolic::{Domain, HyperbolicPoint, MobiusDisk};

type Evaluator = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// An analytic function together with its complex derivative, a domain tag,
/// and optional metadata (label, closed-form derivative coefficients, a
/// declared norm bound).
#[derive(Clone)]
pub struct BlochFunction {
    value: Evaluator,
    deriv: Evaluator,
    domain: Domain,
    label: Option<String>,
    deriv_coeffs: Option<Vec<Complex64>>,
    norm_bound: Option<f64>,
}

impl std::fmt::Debug for BlochFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlochFunction")
            .field("domain", &self.domain)
            .field("label", &self.label)
            .field("norm_bound", &self.norm_bound)
            .finish()
    }
}

impl BlochFunction {
    pub fn new<V, D>(domain: Domain, value: V, deriv: D) -> Self
    where
        V: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
        D: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        BlochFunction {
            value: Arc::new(value),
            deriv: Arc::new(deriv),
            domain,
            label: None,
            deriv_coeffs: None,
            norm_bound: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
    pub fn with_deriv_coeffs(mut self, q: Vec<Complex64>) -> Self {
        self.deriv_coeffs = Some(q);
        self
    }
    pub fn with_norm_bound(mut self, m: f64) -> Self {
        self.norm_bound = Some(m);
        self
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        (self.value)(z)
    }
    pub fn deriv(&self, z: Complex64) -> Complex64 {
        (self.deriv)(z)
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }
    pub fn deriv_coeffs(&self) -> Option<&[Complex64]> {
        self.deriv_coeffs.as_deref()
    }
    pub fn norm_bound(&self) -> Option<f64> {
        self.norm_bound
    }

    /// The Bloch quotient |2 b' / rho| at `p`.
    pub fn quotient_at(&self, p: HyperbolicPoint) -> Result<f64> {
        crate::hyperbolic::bloch_quotient(self, p)
    }

    pub fn constant(c: Complex64, domain: Domain) -> Self {
        BlochFunction::new(domain, move |_| c, |_| Complex64::new(0.0, 0.0))
            .with_deriv_coeffs(vec![])
            .with_norm_bound(0.0)
            .with_label("const")
    }

    /// b(z) = z on the disk; the basic norm-one probe.
    pub fn identity() -> Self {
        BlochFunction::new(
            Domain::Disk,
            |z| z,
            |_| Complex64::new(1.0, 0.0),
        )
        .with_deriv_coeffs(vec![Complex64::new(1.0, 0.0)])
        .with_norm_bound(1.0)
        .with_label("identity")
    }

    /// Polynomial b(z) = sum c_j z^j from real coefficients of b itself.
    pub fn poly(coeffs: &[f64]) -> Result<Self> {
        let c: Vec<Complex64> = coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::poly_complex(&c)
    }

    pub fn poly_complex(coeffs: &[Complex64]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::domain("polynomial needs at least one coefficient"));
        }
        let c = coeffs.to_vec();
        let dc: Vec<Complex64> = c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, &cj)| cj * j as f64)
            .collect();
        let c2 = c.clone();
        let dc2 = dc.clone();
        Ok(BlochFunction::new(
            Domain::Disk,
            move |z| horner(&c2, z),
            move |z| horner(&dc2, z),
        )
        .with_deriv_coeffs(dc)
        .with_label("poly"))
    }

    /// The extremal family b_a(z) = (3/4) sqrt(3) S_a(z)^2 with
    /// S_a(z) = (z+a)/(1+az). It is the composition of (3/4) sqrt(3) z^2
    /// with a disk automorphism, so its Bloch norm is exactly 1.
    pub fn make_special(a: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::domain(format!("special parameter {a} outside [0, 1)")));
        }
        let c = 0.75 * 3f64.sqrt();
        let one = Complex64::new(1.0, 0.0);
        let s = move |z: Complex64| (z + a) / (one + a * z);
        let sp = move |z: Complex64| {
            let den = one + a * z;
            (1.0 - a * a) / (den * den)
        };
        let q0 = 1.5 * 3f64.sqrt() * a * (1.0 - a * a);
        let q1 = 1.5 * 3f64.sqrt() * (1.0 - a * a) * (1.0 - 3.0 * a * a);
        let q2 = -4.5 * 3f64.sqrt() * a * (1.0 - a * a) * (1.0 - 2.0 * a * a);
        Ok(BlochFunction::new(
            Domain::Disk,
            move |z| {
                let sz = s(z);
                c * sz * sz
            },
            move |z| 2.0 * c * s(z) * sp(z),
        )
        .with_deriv_coeffs(vec![
            Complex64::new(q0, 0.0),
            Complex64::new(q1, 0.0),
            Complex64::new(q2, 0.0),
        ])
        .with_norm_bound(1.0)
        .with_label(format!("special:{a}")))
    }

    /// Truncated gap series b(z) = sum_{k=0..=trunc} z^{base^k}.
    pub fn lacunary(base: u32, trunc: u32) -> Result<Self> {
        if base < 2 {
            return Err(Error::domain(format!("lacunary base {base} must be >= 2")));
        }
        if trunc < 1 {
            return Err(Error::domain("lacunary truncation must be >= 1"));
        }
        let mut exps: Vec<u64> = Vec::with_capacity(trunc as usize + 1);
        let mut e: u64 = 1;
        for k in 0..=trunc {
            exps.push(e);
            if k < trunc {
                e = e
                    .checked_mul(base as u64)
                    .ok_or_else(|| Error::Overflow(format!("{base}^{} exceeds u64", k + 1)))?;
            }
        }
        let exps2 = exps.clone();
        let value = move |z: Complex64| {
            let mut sum = Complex64::new(0.0, 0.0);
            let mut t = z; // z^{base^0}
            for (k, _) in exps.iter().enumerate() {
                sum += t;
                if k + 1 < exps.len() {
                    t = pow_small(t, base);
                }
            }
            sum
        };
        let deriv = move |z: Complex64| {
            if z.norm_sqr() == 0.0 {
                // only the k = 0 term z^1 contributes at the origin
                return Complex64::new(1.0, 0.0);
            }
            let mut sum = Complex64::new(0.0, 0.0);
            let mut t = z;
            for (k, &ek) in exps2.iter().enumerate() {
                sum += ek as f64 * t / z;
                if k + 1 < exps2.len() {
                    t = pow_small(t, base);
                }
            }
            sum
        };
        Ok(BlochFunction::new(Domain::Disk, value, deriv)
            .with_label(format!("lacunary:{base}(K={trunc})")))
    }

    /// b(z) = log(1/(1-z)) on the disk (Bloch norm 2, attained radially).
    pub fn log_map() -> Self {
        let one = Complex64::new(1.0, 0.0);
        BlochFunction::new(
            Domain::Disk,
            move |z| -(one - z).ln(),
            move |z| one / (one - z),
        )
        .with_norm_bound(2.0)
        .with_label("logmap")
    }

    /// b(z) = log z on the upper half-plane (norm 2, attained on the
    /// imaginary axis).
    pub fn log_half_plane() -> Self {
        BlochFunction::new(
            Domain::HalfPlane,
            |z| z.ln(),
            |z| Complex64::new(1.0, 0.0) / z,
        )
        .with_norm_bound(2.0)
        .with_label("logz")
    }

    /// Composition with a disk automorphism. The Bloch quotient and norm
    /// are invariant under this operation.
    pub fn compose_mobius(&self, phi: &MobiusDisk) -> Self {
        assert_eq!(self.domain, Domain::Disk, "Mobius composition is a disk operation");
        let b = self.clone();
        let b2 = self.clone();
        let phi1 = *phi;
        let phi2 = *phi;
        let mut out = BlochFunction::new(
            Domain::Disk,
            move |z| b.eval(phi1.apply(z)),
            move |z| b2.deriv(phi2.apply(z)) * phi2.deriv(z),
        );
        out.norm_bound = self.norm_bound;
        out
    }

    /// Precomposition with xi(w) = e^{2 pi i w}, turning a disk function
    /// into a half-plane one. The half-plane norm does not exceed the disk
    /// norm, so a declared bound carries over.
    pub fn conjugate_exponential(&self) -> Result<Self> {
        if self.domain != Domain::Disk {
            return Err(Error::domain("conjugate_exponential expects a disk function"));
        }
        let tau = std::f64::consts::TAU;
        let xi = move |w: Complex64| (Complex64::i() * tau * w).exp();
        let b = self.clone();
        let b2 = self.clone();
        let mut out = BlochFunction::new(
            Domain::HalfPlane,
            move |w| b.eval(xi(w)),
            move |w| {
                let x = xi(w);
                Complex64::i() * tau * x * b2.deriv(x)
            },
        );
        out.norm_bound = self.norm_bound;
        out.label = self.label.as_ref().map(|l| format!("{l}@exp"));
        Ok(out)
    }

    /// Pointwise scaling c * b.
    pub fn scale(&self, c: Complex64) -> Self {
        let b = self.clone();
        let b2 = self.clone();
        let mut out = BlochFunction::new(
            self.domain,
            move |z| c * b.eval(z),
            move |z| c * b2.deriv(z),
        );
        out.norm_bound = self.norm_bound.map(|m| m * c.norm());
        out.deriv_coeffs = self
            .deriv_coeffs
            .as_ref()
            .map(|q| q.iter().map(|&x| c * x).collect());
        out
    }

    /// Pointwise sum; both functions must live on the same domain.
    pub fn add(&self, other: &BlochFunction) -> Result<Self> {
        if self.domain != other.domain {
            return Err(Error::domain("cannot add functions on different domains"));
        }
        let (a, b) = (self.clone(), other.clone());
        let (a2, b2) = (self.clone(), other.clone());
        Ok(BlochFunction::new(
            self.domain,
            move |z| a.eval(z) + b.eval(z),
            move |z| a2.deriv(z) + b2.deriv(z),
        ))
    }
}

fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

fn pow_small(z: Complex64, n: u32) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    let mut base = z;
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

/// Taylor coefficients q_0..q_K of b' at the origin.
#[derive(Clone, Debug)]
pub struct DerivativeSeries {
    pub coeffs: Vec<Complex64>,
    pub order: usize,
}

/// Cauchy-type bound for unit-norm derivative coefficients:
/// |q_k| <= (k+2)/2 * ((k+2)/k)^{k/2}, valid for k >= 1 (q_0 is bounded
/// by 1 separately).
pub fn cauchy_bound(k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("cauchy_bound starts at k = 1"));
    }
    let kf = k as f64;
    Ok((kf + 2.0) / 2.0 * ((kf + 2.0) / kf).powf(kf / 2.0))
}

/// Extracts q_0..q_K by trapezoidal contour integration of b' on |z| = radius.
/// Node count starts at 8K and doubles until two successive answers agree
/// to 1e-12; errors decay geometrically in the node count for analytic b'.
pub fn derivative_coefficients(b: &BlochFunction, order: usize, radius: f64) -> Result<DerivativeSeries> {
    if b.domain() != Domain::Disk {
        return Err(Error::domain("coefficient extraction expects a disk function"));
    }
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::domain(format!("contour radius {radius} outside (0, 1)")));
    }
    if let Some(q) = b.deriv_coeffs() {
        if q.len() > order {
            return Ok(DerivativeSeries { coeffs: q[..=order].to_vec(), order });
        }
    }
    let mut n = (8 * order.max(4)).next_power_of_two();
    let mut prev = contour_coeffs(b, order, radius, n);
    // scale of the attainable floor: dividing the contour sum by radius^k
    // amplifies roundoff, so agreement is judged against 1 + M / radius^k
    let deriv_scale = (0..64)
        .map(|j| b.deriv(Complex64::from_polar(radius, std::f64::consts::TAU * j as f64 / 64.0)).norm())
        .fold(1.0f64, f64::max);
    loop {
        n *= 2;
        let cur = contour_coeffs(b, order, radius, n);
        let agreed = prev.iter().zip(&cur).enumerate().all(|(k, (p, c))| {
            (p - c).norm() <= 1e-12 * (1.0 + deriv_scale / radius.powi(k as i32))
        });
        if agreed {
            return Ok(DerivativeSeries { coeffs: cur, order });
        }
        if n > 1 << 22 {
            return Err(Error::NoConvergence { prev: prev[0].norm(), last: cur[0].norm(), tol: 1e-12 });
        }
        prev = cur;
    }
}

fn contour_coeffs(b: &BlochFunction, order: usize, radius: f64, n: usize) -> Vec<Complex64> {
    let tau = std::f64::consts::TAU;
    let samples: Vec<Complex64> = (0..n)
        .map(|j| {
            let th = tau * j as f64 / n as f64;
            b.deriv(Complex64::from_polar(radius, th))
        })
        .collect();
    (0..=order)
        .map(|k| {
            let vals: Vec<Complex64> = (0..n)
                .map(|j| {
                    let th = tau * j as f64 / n as f64;
                    samples[j] * Complex64::from_polar(1.0, -(k as f64) * th)
                })
                .collect();
            crate::quad::pairwise_sum_complex(&vals) / (n as f64 * radius.powi(k as i32))
        })
        .collect()
}

/// Maximum Bloch quotient over a quasi-uniform hyperbolic sample set; a
/// lower bound for the true norm. Sample rings are equally spaced in
/// hyperbolic radius with per-ring node counts growing with circumference.
pub fn bloch_norm_estimate(b: &BlochFunction, samples: usize) -> Result<f64> {
    if samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let pts = match b.domain() {
        Domain::Disk => disk_sample_points(samples, 14.0),
        Domain::HalfPlane => half_plane_sample_points(samples),
    };
    let mut best = 0.0f64;
    for z in pts {
        let p = HyperbolicPoint::new(z, b.domain())?;
        let q = b.quotient_at(p)?;
        if q > best {
            best = q;
        }
    }
    Ok(best)
}

fn disk_sample_points(samples: usize, d_max: f64) -> Vec<Complex64> {
    let mut pts = vec![Complex64::new(0.0, 0.0)];
    if samples == 1 {
        return pts;
    }
    let rings = ((samples as f64).sqrt().ceil() as usize).clamp(4, 400);
    let weights: Vec<f64> = (0..rings)
        .map(|j| (d_max * (j as f64 + 0.5) / rings as f64).sinh() + 1.0)
        .collect();
    let wsum: f64 = weights.iter().sum();
    for j in 0..rings {
        let d = d_max * (j as f64 + 0.5) / rings as f64;
        let r = (d / 2.0).tanh();
        let n = (((samples as f64) * weights[j] / wsum).ceil() as usize).max(4);
        for i in 0..n {
            let th = std::f64::consts::TAU * (i as f64 + 0.5 * (j % 2) as f64) / n as f64;
            pts.push(Complex64::from_polar(r, th));
        }
    }
    pts
}

fn half_plane_sample_points(samples: usize) -> Vec<Complex64> {
    // x in [0, 1) times log-spaced heights; suited to the 1-periodic
    // functions produced by exponential conjugation (lower-bound use only).
    let m = ((samples as f64).sqrt().ceil() as usize).clamp(3, 300);
    let (y_lo, y_hi) = (1e-4f64, 8.0f64);
    let mut pts = Vec::with_capacity(m * m);
    for j in 0..m {
        let t = (y_lo.ln()) + (y_hi.ln() - y_lo.ln()) * (j as f64 + 0.5) / m as f64;
        let y = t.exp();
        for i in 0..m {
            pts.push(Complex64::new((i as f64 + 0.5) / m as f64, y));
        }
    }
    pts
}
