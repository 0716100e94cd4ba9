//! Spectral characteristics of Bloch functions.
//!
//! The crate has three layers:
//!
//! * geometry and rigorous arithmetic ([`hyperbolic`], [`interval`],
//!   [`dyadic`]), plus a zoo of concrete Bloch functions ([`bloch`]);
//! * estimators and transform machinery ([`spectra`], [`transforms`],
//!   [`martingale`]): circle/strip variance, integral means, hyperbolic
//!   ball averages, the Bergman projection and modified Beurling
//!   transform with n-adic grids and periodization, and the interval
//!   martingale induced by boundary averages;
//! * a certification pipeline ([`certify`]) that re-derives the
//!   coefficient-sum bound for the unit-ball asymptotic variance with
//!   outward-rounded interval arithmetic and emits a machine-readable
//!   certificate for the claim Sigma^2_B < 0.9.

pub mod bloch;
pub mod certify;
pub mod dyadic;
pub mod error;
pub mod hyperbolic;
pub mod interval;
pub mod martingale;
pub mod quad;
pub mod spectra;
pub mod transforms;

pub use bloch::{bloch_norm_estimate, cauchy_bound, derivative_coefficients, BlochFunction, DerivativeSeries};
pub use certify::{certify_sigma, Certificate, Rational};
pub use error::{Error, Result};
pub use hyperbolic::{
    bloch_quotient, disk_distance, euclidean_radius, half_plane_distance, hyperbolic_area_disk,
    hyperbolic_radius, Domain, HyperbolicPoint, MobiusDisk,
};
pub use interval::{interval_eval, Expr, Interval};
pub use spectra::{alpha_average, alpha_sup_estimate, variance_circle, variance_strip, VarianceEstimate};
pub use transforms::{beurling_modified, bergman_project, mu_from_bloch, BeltramiCoefficient, NAdicBox};
