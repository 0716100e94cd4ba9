//! Outward-rounded interval arithmetic over native floats.
//!
//! Every operation returns an enclosure of the exact real result: the
//! round-to-nearest value is computed and both endpoints are then bumped
//! one ulp outward, which dominates the at-most-half-ulp rounding error
//! of each IEEE operation. `exp` and `ln` go through libm, which is not
//! correctly rounded, so those use a wider safety margin.
//!
//! The certification pipeline never touches `exp`/`ln`; it only needs
//! field operations, `sqrt` and integer powers, all of which are rigorous
//! here and in the widened backend ([`crate::dyadic::WideInterval`]).

use crate::error::{Error, Result};

/// Extra ulps of outward padding for libm-backed transcendentals.
const LIBM_ULPS: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

// For products and quotients IEEE preserves the sign on underflow, so a
// +0.0 lower candidate certifies the true result is >= 0 and can stay put;
// likewise a -0.0 upper candidate. Anything else gets bumped outward.
fn down_prod(x: f64) -> f64 {
    if x == 0.0 && x.is_sign_positive() {
        0.0
    } else {
        down(x)
    }
}

fn up_prod(x: f64) -> f64 {
    if x == 0.0 && x.is_sign_negative() {
        0.0
    } else {
        up(x)
    }
}

fn down_n(mut x: f64, n: u32) -> f64 {
    for _ in 0..n {
        x = down(x);
    }
    x
}

fn up_n(mut x: f64, n: u32) -> f64 {
    for _ in 0..n {
        x = up(x);
    }
    x
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::interval("endpoints must be finite"));
        }
        if lo > hi {
            return Err(Error::interval(format!("lo {lo} exceeds hi {hi}")));
        }
        Ok(Interval { lo, hi })
    }

    /// The degenerate interval `[x, x]`. The float is taken as exact.
    pub const fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    /// Enclosure of the exact rational `num/den`.
    pub fn from_ratio(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::domain("zero denominator"));
        }
        let q = num as f64 / den as f64;
        // Exact when the denominator is a power of two and the numerator
        // fits in the mantissa; otherwise pad outward.
        let exact = den.unsigned_abs().is_power_of_two() && num.unsigned_abs() < (1 << 53);
        if exact {
            Ok(Interval::point(q))
        } else {
            Ok(Interval { lo: down(q), hi: up(q) })
        }
    }

    /// Enclosure of pi.
    pub fn pi() -> Self {
        Interval {
            lo: down(std::f64::consts::PI),
            hi: up(std::f64::consts::PI),
        }
    }

    /// Enclosure of Euler's number e.
    pub fn e() -> Self {
        Interval {
            lo: down(std::f64::consts::E),
            hi: up(std::f64::consts::E),
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
    pub fn midpoint(&self) -> f64 {
        0.5 * self.lo + 0.5 * self.hi
    }
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
    pub fn is_zero(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn add(&self, o: &Interval) -> Interval {
        Interval {
            lo: down(self.lo + o.lo),
            hi: up(self.hi + o.hi),
        }
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        Interval {
            lo: down(self.lo - o.hi),
            hi: up(self.hi - o.lo),
        }
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        // A degenerate zero annihilates exactly.
        if self.is_zero() || o.is_zero() {
            return Interval::ZERO;
        }
        let cands = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        let mut lo = cands[0];
        let mut hi = cands[0];
        for &c in &cands[1..] {
            lo = lo.min(c);
            hi = hi.max(c);
        }
        Interval { lo: down_prod(lo), hi: up_prod(hi) }
    }

    pub fn div(&self, o: &Interval) -> Result<Interval> {
        if o.contains(0.0) {
            return Err(Error::interval(format!(
                "division by interval [{}, {}] containing zero",
                o.lo, o.hi
            )));
        }
        let cands = [
            self.lo / o.lo,
            self.lo / o.hi,
            self.hi / o.lo,
            self.hi / o.hi,
        ];
        let mut lo = cands[0];
        let mut hi = cands[0];
        for &c in &cands[1..] {
            lo = lo.min(c);
            hi = hi.max(c);
        }
        Ok(Interval { lo: down_prod(lo), hi: up_prod(hi) })
    }

    pub fn sqrt(&self) -> Result<Interval> {
        if self.lo < 0.0 {
            return Err(Error::interval(format!(
                "sqrt of interval [{}, {}] with negative part",
                self.lo, self.hi
            )));
        }
        // sqrt is correctly rounded by IEEE 754.
        Ok(Interval {
            lo: down(self.lo.sqrt()).max(0.0),
            hi: up(self.hi.sqrt()),
        })
    }

    /// `self^n` for a non-negative integer power, by repeated interval
    /// squaring. Even powers of straddling intervals clamp at zero.
    pub fn powi(&self, n: u32) -> Interval {
        match n {
            0 => Interval::ONE,
            1 => *self,
            2 => self.sq(),
            _ => {
                if n % 2 == 0 {
                    self.sq().powi_positive_base(n / 2)
                } else {
                    self.mul(&self.sq().powi_positive_base((n - 1) / 2))
                }
            }
        }
    }

    /// Square with the sign analysis done exactly.
    fn sq(&self) -> Interval {
        if self.is_zero() {
            return Interval::ZERO;
        }
        let (alo, ahi) = (self.lo.abs(), self.hi.abs());
        let m = alo.max(ahi);
        let lo = if self.lo <= 0.0 && self.hi >= 0.0 {
            0.0
        } else {
            let sm = alo.min(ahi);
            down_prod(sm * sm)
        };
        Interval { lo, hi: up(m * m) }
    }

    fn powi_positive_base(&self, n: u32) -> Interval {
        // self is already >= 0 here (it is a square).
        let mut acc: Option<Interval> = None;
        let mut base = *self;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = Some(match acc {
                    None => base,
                    Some(a) => a.mul(&base),
                });
            }
            k >>= 1;
            if k > 0 {
                base = base.sq();
            }
        }
        acc.unwrap_or(Interval::ONE)
    }

    pub fn exp(&self) -> Interval {
        Interval {
            lo: down_n(self.lo.exp(), LIBM_ULPS).max(0.0),
            hi: up_n(self.hi.exp(), LIBM_ULPS),
        }
    }

    pub fn ln(&self) -> Result<Interval> {
        if self.lo <= 0.0 {
            return Err(Error::interval(format!(
                "log of interval [{}, {}] with non-positive part",
                self.lo, self.hi
            )));
        }
        Ok(Interval {
            lo: down_n(self.lo.ln(), LIBM_ULPS),
            hi: up_n(self.hi.ln(), LIBM_ULPS),
        })
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            Interval { lo: 0.0, hi: self.hi.max(-self.lo) }
        }
    }

    pub fn max_with(&self, o: &Interval) -> Interval {
        Interval {
            lo: self.lo.max(o.lo),
            hi: self.hi.max(o.hi),
        }
    }

    pub fn min_with(&self, o: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(o.lo),
            hi: self.hi.min(o.hi),
        }
    }
}

impl std::ops::Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval::add(&self, &o)
    }
}
impl std::ops::Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval::sub(&self, &o)
    }
}
impl std::ops::Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        Interval::mul(&self, &o)
    }
}
impl std::ops::Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::neg(&self)
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{:.16e}, {:.16e}]", self.lo, self.hi)
    }
}

/// Common surface of the native and widened interval backends, used by the
/// certification pipeline so a certificate can be re-run at higher precision.
pub trait Enclosure: Clone {
    /// Enclosure of the exact rational `num/den` at `prec` bits.
    fn ratio(num: i64, den: i64, prec: u32) -> Self;
    fn add_e(&self, o: &Self) -> Self;
    fn sub_e(&self, o: &Self) -> Self;
    fn mul_e(&self, o: &Self) -> Self;
    fn div_e(&self, o: &Self) -> Result<Self>;
    fn sqrt_e(&self) -> Result<Self>;
    fn powi_e(&self, n: u32) -> Self;
    fn neg_e(&self) -> Self;
    fn max_e(&self, o: &Self) -> Self;
    /// Hull of two enclosures.
    fn hull_e(&self, o: &Self) -> Self;
    /// Extends the enclosure to include zero (used for one-sided
    /// remainder terms known to be non-negative).
    fn hull_zero(&self) -> Self;
    /// Enclosure of e^2, used by tail remainder bounds.
    fn e_squared(prec: u32) -> Self;
    /// Outward-rounded f64 endpoints, for reporting.
    fn lo_f64(&self) -> f64;
    fn hi_f64(&self) -> f64;
}

impl Enclosure for Interval {
    fn ratio(num: i64, den: i64, _prec: u32) -> Self {
        Interval::from_ratio(num, den).expect("nonzero denominator")
    }
    fn add_e(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn sub_e(&self, o: &Self) -> Self {
        self.sub(o)
    }
    fn mul_e(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn div_e(&self, o: &Self) -> Result<Self> {
        self.div(o)
    }
    fn sqrt_e(&self) -> Result<Self> {
        self.sqrt()
    }
    fn powi_e(&self, n: u32) -> Self {
        self.powi(n)
    }
    fn neg_e(&self) -> Self {
        self.neg()
    }
    fn max_e(&self, o: &Self) -> Self {
        self.max_with(o)
    }
    fn hull_e(&self, o: &Self) -> Self {
        self.hull(o)
    }
    fn hull_zero(&self) -> Self {
        self.hull(&Interval::ZERO)
    }
    fn e_squared(_prec: u32) -> Self {
        let e = Interval::e();
        e.mul(&e)
    }
    fn lo_f64(&self) -> f64 {
        self.lo
    }
    fn hi_f64(&self) -> f64 {
        self.hi
    }
}

/// Expression over rationals and the constants pi and e, evaluated to an
/// enclosure. This is the programmatic surface for one-off certified
/// evaluations; the certification pipeline builds its formulas directly.
#[derive(Clone, Debug)]
pub enum Expr {
    Ratio(i64, i64),
    Pi,
    E,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sqrt(Box<Expr>),
    Powi(Box<Expr>, u32),
    Exp(Box<Expr>),
    Ln(Box<Expr>),
}

impl Expr {
    pub fn ratio(num: i64, den: i64) -> Expr {
        Expr::Ratio(num, den)
    }
    pub fn int(n: i64) -> Expr {
        Expr::Ratio(n, 1)
    }
}

macro_rules! expr_binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl std::ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, o: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(o))
            }
        }
    };
}
expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

/// Evaluates an expression to an outward-rounded enclosure.
pub fn interval_eval(expr: &Expr) -> Result<Interval> {
    match expr {
        Expr::Ratio(n, d) => Interval::from_ratio(*n, *d),
        Expr::Pi => Ok(Interval::pi()),
        Expr::E => Ok(Interval::e()),
        Expr::Neg(a) => Ok(interval_eval(a)?.neg()),
        Expr::Add(a, b) => Ok(interval_eval(a)?.add(&interval_eval(b)?)),
        Expr::Sub(a, b) => Ok(interval_eval(a)?.sub(&interval_eval(b)?)),
        Expr::Mul(a, b) => Ok(interval_eval(a)?.mul(&interval_eval(b)?)),
        Expr::Div(a, b) => interval_eval(a)?.div(&interval_eval(b)?),
        Expr::Sqrt(a) => interval_eval(a)?.sqrt(),
        Expr::Powi(a, n) => Ok(interval_eval(a)?.powi(*n)),
        Expr::Exp(a) => Ok(interval_eval(a)?.exp()),
        Expr::Ln(a) => interval_eval(a)?.ln(),
    }
}

/// Pairwise (tree-ordered) summation. Deterministic for a fixed input
/// order regardless of thread count, and more accurate than a left fold.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::{FromPrimitive, ToPrimitive, Zero};
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn zero_times_anything_is_zero() {
        let x = Interval::new(-3.5, 7.25).unwrap();
        assert!(Interval::ZERO.mul(&x).is_zero());
        assert!(x.mul(&Interval::ZERO).is_zero());
    }

    #[test]
    fn pi_encloses_reference_digits() {
        let pi = Interval::pi();
        assert!(pi.contains(std::f64::consts::PI));
        // the enclosure pins the reference digits 3.14159265358979...
        assert!(pi.lo() > 3.14159265358979 && pi.hi() < 3.14159265358980);
        assert!(pi.width() < 1e-15);
    }

    #[test]
    fn eval_example_expression() {
        // 1/(1 - 0.58)^2 with 0.58 entered as the exact rational 29/50.
        let e = Expr::int(1)
            / Expr::Powi(Box::new(Expr::int(1) - Expr::ratio(29, 50)), 2);
        let v = interval_eval(&e).unwrap();
        assert!(v.contains(5.668934240362812));
        assert!(v.width() <= 1e-9);
    }

    #[test]
    fn division_by_straddling_interval_rejected() {
        let a = Interval::point(1.0);
        let b = Interval::new(-1.0, 2.0).unwrap();
        assert!(a.div(&b).is_err());
        assert!(Interval::new(-1.0, -0.5).unwrap().ln().is_err());
        assert!(Interval::new(-1.0, 0.5).unwrap().sqrt().is_err());
    }

    #[test]
    fn powi_even_clamps_at_zero() {
        let x = Interval::new(-2.0, 1.0).unwrap();
        let s = x.powi(2);
        assert_eq!(s.lo(), 0.0);
        assert!(s.contains(4.0));
        let c = x.powi(3);
        assert!(c.contains(-8.0) && c.contains(1.0));
    }

    #[test]
    fn exp_ln_round_trip_encloses() {
        let x = Interval::from_ratio(7, 5).unwrap();
        let y = x.exp().ln().unwrap();
        assert!(y.contains(1.4));
        assert!(y.width() < 1e-12);
    }

    // Enclosure soundness against exact rational arithmetic, 10^4 cases.
    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn field_ops_enclose_exact_rationals(
            an in -500i64..500, ad in 1i64..40,
            bn in -500i64..500, bd in 1i64..40,
            op in 0u8..4,
        ) {
            let a = Interval::from_ratio(an, ad).unwrap();
            let b = Interval::from_ratio(bn, bd).unwrap();
            let (ra, rb) = (rat(an, ad), rat(bn, bd));
            let (iv, exact) = match op {
                0 => (a.add(&b), ra + rb),
                1 => (a.sub(&b), ra - rb),
                2 => (a.mul(&b), ra * rb),
                _ => {
                    if rb.is_zero() || b.contains(0.0) {
                        return Ok(());
                    }
                    (a.div(&b).unwrap(), ra / rb)
                }
            };
            let lo = BigRational::from_f64(iv.lo()).unwrap();
            let hi = BigRational::from_f64(iv.hi()).unwrap();
            prop_assert!(lo <= exact && exact <= hi,
                "exact {} outside [{}, {}]", exact.to_f64().unwrap(), iv.lo(), iv.hi());
        }
    }

    proptest! {
        #[test]
        fn sqrt_of_square_contains_abs(n in -300i64..300, d in 1i64..20) {
            let x = Interval::from_ratio(n, d).unwrap();
            let y = x.powi(2).sqrt().unwrap();
            prop_assert!(y.contains((n as f64 / d as f64).abs()));
        }
    }
}
