//! Cross-module consistency checks through the public API.

use num_complex::Complex64;

use blochlab::bloch::BlochFunction;
use blochlab::certify::{certify_sigma, Certificate, Rational};
use blochlab::hyperbolic::{hyperbolic_radius, HyperbolicPoint};
use blochlab::interval::{interval_eval, Expr};
use blochlab::spectra::alpha_average;
use blochlab::transforms::{bergman_project, mu_from_bloch};

#[test]
fn certificate_ceiling_dominates_measured_averages() {
    // the certified enclosure bounds every unit-ball hyperbolic ball
    // average at the matching radius, including the measured ones
    let cert = certify_sigma(Rational::new(2, 5).unwrap(), 53, 400).unwrap();
    assert!(cert.verified());
    let ceiling = Certificate::interval(&cert.final_bound).unwrap().hi();
    let eta = hyperbolic_radius(0.4).unwrap();
    let origin = HyperbolicPoint::disk(Complex64::new(0.0, 0.0)).unwrap();
    for b in [
        BlochFunction::identity(),
        BlochFunction::make_special(0.0).unwrap(),
        BlochFunction::make_special(0.3).unwrap(),
        BlochFunction::make_special(0.577).unwrap(),
    ] {
        let avg = alpha_average(&b, origin, eta).unwrap();
        assert!(avg <= ceiling + 1e-6, "average {avg} exceeds ceiling {ceiling}");
    }
}

#[test]
fn projection_recovers_a_conjugated_special_function() {
    let b = BlochFunction::make_special(0.2).unwrap();
    let mu = mu_from_bloch(&b);
    let z = Complex64::new(0.35, -0.4);
    let p = bergman_project(&mu, z, 1e-5).unwrap();
    let expect = b.eval(z) - b.eval(Complex64::new(0.0, 0.0));
    assert!((p - expect).norm() < 2e-4);
}

#[test]
fn expression_evaluation_brackets_known_targets() {
    // (1 - (2/5)^2) * pi has a tight, certified enclosure
    let e = (Expr::int(1) - Expr::Powi(Box::new(Expr::ratio(2, 5)), 2)) * Expr::Pi;
    let v = interval_eval(&e).unwrap();
    let target = 0.84 * std::f64::consts::PI;
    assert!(v.contains(target));
    assert!(v.width() < 1e-14);
}
