//! Hyperbolic geometry of the unit disk and the upper half-plane.
//!
//! Conventions: the disk carries the density 2/(1-|z|^2), the half-plane
//! the density 1/y, so both have curvature -1 and the Cayley transform is
//! an isometry between them. The half-plane Bloch quotient 2y|b'| is then
//! literally |2b'/rho|.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::BlochFunction;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Disk,
    HalfPlane,
}

/// A point of the open disk or the open upper half-plane. Boundary points
/// are rejected at construction rather than extrapolated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperbolicPoint {
    z: Complex64,
    domain: Domain,
}

impl HyperbolicPoint {
    pub fn disk(z: Complex64) -> Result<Self> {
        if z.norm_sqr() >= 1.0 {
            return Err(Error::domain(format!("{z} is not in the open unit disk")));
        }
        Ok(HyperbolicPoint { z, domain: Domain::Disk })
    }

    pub fn half_plane(z: Complex64) -> Result<Self> {
        if z.im <= 0.0 {
            return Err(Error::domain(format!("{z} is not in the open upper half-plane")));
        }
        Ok(HyperbolicPoint { z, domain: Domain::HalfPlane })
    }

    pub fn new(z: Complex64, domain: Domain) -> Result<Self> {
        match domain {
            Domain::Disk => Self::disk(z),
            Domain::HalfPlane => Self::half_plane(z),
        }
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Density of the hyperbolic metric at the point.
    pub fn density(&self) -> f64 {
        match self.domain {
            Domain::Disk => 2.0 / (1.0 - self.z.norm_sqr()),
            Domain::HalfPlane => 1.0 / self.z.im,
        }
    }
}

/// Hyperbolic distance from 0 to r in the disk: eta(r) = log((1+r)/(1-r)).
pub fn hyperbolic_radius(r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::domain(format!("radius {r} outside [0, 1)")));
    }
    Ok(((1.0 + r) / (1.0 - r)).ln())
}

/// Inverse of [`hyperbolic_radius`]: the Euclidean radius of the hyperbolic
/// ball of radius `eta` about the origin.
pub fn euclidean_radius(eta: f64) -> Result<f64> {
    if eta < 0.0 {
        return Err(Error::domain(format!("hyperbolic radius {eta} < 0")));
    }
    Ok((eta / 2.0).tanh())
}

/// Hyperbolic area of the disk ball B(0, r): 4 pi r^2 / (1 - r^2).
pub fn hyperbolic_area_disk(r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::domain(format!("radius {r} outside [0, 1)")));
    }
    Ok(4.0 * std::f64::consts::PI * r * r / (1.0 - r * r))
}

/// Hyperbolic distance between two points of the disk.
pub fn disk_distance(z: Complex64, w: Complex64) -> f64 {
    let t = ((z - w) / (Complex64::new(1.0, 0.0) - w.conj() * z)).norm();
    ((1.0 + t) / (1.0 - t)).ln()
}

/// Hyperbolic distance between two points of the (upper or lower)
/// half-plane; only |Im| enters, so it serves both mirror copies.
pub fn half_plane_distance(z: Complex64, w: Complex64) -> f64 {
    let (y1, y2) = (z.im.abs(), w.im.abs());
    let dx = z.re - w.re;
    let dy = z.im.abs() - w.im.abs();
    let c = 1.0 + (dx * dx + dy * dy) / (2.0 * y1 * y2);
    c.acosh()
}

/// The Bloch quotient |2 b' / rho| at a point: |b'(z)| (1-|z|^2) on the
/// disk, 2 y |b'(z)| on the half-plane.
pub fn bloch_quotient(b: &BlochFunction, p: HyperbolicPoint) -> Result<f64> {
    if b.domain() != p.domain() {
        return Err(Error::domain("point and function live on different domains"));
    }
    let d = b.deriv(p.z());
    if !d.is_finite() {
        return Err(Error::domain(format!("derivative not finite at {}", p.z())));
    }
    Ok(2.0 * d.norm() / p.density())
}

/// Disk automorphism z -> e^{i theta} (z + a)/(1 + conj(a) z).
#[derive(Clone, Copy, Debug)]
pub struct MobiusDisk {
    a: Complex64,
    phase: Complex64,
}

impl MobiusDisk {
    pub fn new(a: Complex64, theta: f64) -> Result<Self> {
        if a.norm_sqr() >= 1.0 {
            return Err(Error::domain("Mobius parameter must lie in the open disk"));
        }
        Ok(MobiusDisk { a, phase: Complex64::from_polar(1.0, theta) })
    }

    /// The automorphism sending 0 to `a` (no rotation).
    pub fn taking_origin_to(a: Complex64) -> Result<Self> {
        Self::new(a, 0.0)
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        self.phase * (z + self.a) / (Complex64::new(1.0, 0.0) + self.a.conj() * z)
    }

    pub fn deriv(&self, z: Complex64) -> Complex64 {
        let den = Complex64::new(1.0, 0.0) + self.a.conj() * z;
        self.phase * (1.0 - self.a.norm_sqr()) / (den * den)
    }
}

/// Cayley transform H -> D, zeta -> (zeta - i)/(zeta + i), an isometry for
/// the densities used here.
pub fn cayley(zeta: Complex64) -> Complex64 {
    (zeta - Complex64::i()) / (zeta + Complex64::i())
}

pub fn cayley_inverse(z: Complex64) -> Complex64 {
    Complex64::i() * (Complex64::new(1.0, 0.0) + z) / (Complex64::new(1.0, 0.0) - z)
}

/// Derivative of [`cayley_inverse`].
pub fn cayley_inverse_deriv(z: Complex64) -> Complex64 {
    let den = Complex64::new(1.0, 0.0) - z;
    2.0 * Complex64::i() / (den * den)
}
