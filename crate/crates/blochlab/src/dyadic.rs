//! Widened-mantissa interval backend for certificate audits.
//!
//! Endpoints are dyadic rationals `mant * 2^exp` with arbitrary-size
//! mantissas. Addition, subtraction and multiplication are exact before an
//! outward rounding step to the working precision; division and square root
//! round directionally from integer quotients. There is no hidden libm call
//! anywhere, so enclosures are rigorous purely by integer arithmetic.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::interval::Enclosure;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dyadic {
    mant: BigInt,
    exp: i64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Down,
    Up,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic { mant: BigInt::zero(), exp: 0 }
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic { mant: n.into(), exp: 0 }.normalized()
    }

    fn normalized(mut self) -> Self {
        if self.mant.is_zero() {
            self.exp = 0;
            return self;
        }
        let tz = self.mant.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.mant >>= tz;
            self.exp += tz as i64;
        }
        self
    }

    fn bits(&self) -> u64 {
        self.mant.bits()
    }

    /// Rounds to at most `prec` mantissa bits in the given direction.
    fn round(&self, prec: u32, dir: Dir) -> Dyadic {
        let bits = self.bits();
        if bits <= prec as u64 {
            return self.clone();
        }
        let shift = (bits - prec as u64) as u64;
        // Arithmetic shift floors toward negative infinity.
        let floored = &self.mant >> shift;
        let exact = (&floored << shift) == self.mant;
        let mant = match dir {
            Dir::Down => floored,
            Dir::Up => {
                if exact {
                    floored
                } else {
                    floored + 1
                }
            }
        };
        Dyadic { mant, exp: self.exp + shift as i64 }.normalized()
    }

    fn align(a: &Dyadic, b: &Dyadic) -> (BigInt, BigInt, i64) {
        if a.mant.is_zero() {
            return (BigInt::zero(), b.mant.clone(), b.exp);
        }
        if b.mant.is_zero() {
            return (a.mant.clone(), BigInt::zero(), a.exp);
        }
        let exp = a.exp.min(b.exp);
        let ma = &a.mant << (a.exp - exp) as u64;
        let mb = &b.mant << (b.exp - exp) as u64;
        (ma, mb, exp)
    }

    fn add_exact(&self, o: &Dyadic) -> Dyadic {
        let (ma, mb, exp) = Dyadic::align(self, o);
        Dyadic { mant: ma + mb, exp }.normalized()
    }

    fn sub_exact(&self, o: &Dyadic) -> Dyadic {
        let (ma, mb, exp) = Dyadic::align(self, o);
        Dyadic { mant: ma - mb, exp }.normalized()
    }

    fn mul_exact(&self, o: &Dyadic) -> Dyadic {
        Dyadic {
            mant: &self.mant * &o.mant,
            exp: self.exp + o.exp,
        }
        .normalized()
    }

    fn neg(&self) -> Dyadic {
        Dyadic { mant: -&self.mant, exp: self.exp }
    }

    /// Directed-rounding quotient at `prec` bits.
    fn div_dir(&self, o: &Dyadic, prec: u32, dir: Dir) -> Dyadic {
        assert!(!o.mant.is_zero(), "dyadic division by zero");
        if self.mant.is_zero() {
            return Dyadic::zero();
        }
        let shift = prec as u64 + o.bits() + 2;
        let num = &self.mant << shift;
        let q = match dir {
            Dir::Down => num.div_floor(&o.mant),
            Dir::Up => num.div_ceil(&o.mant),
        };
        Dyadic { mant: q, exp: self.exp - o.exp - shift as i64 }
            .normalized()
            .round(prec, dir)
    }

    /// Directed-rounding square root at `prec` bits. Requires `self >= 0`.
    fn sqrt_dir(&self, prec: u32, dir: Dir) -> Dyadic {
        assert!(!self.mant.is_negative(), "dyadic sqrt of negative value");
        if self.mant.is_zero() {
            return Dyadic::zero();
        }
        // Scale so the shifted exponent is even and the mantissa carries
        // at least 2*prec + 4 bits.
        let want = 2 * prec as u64 + 4;
        let have = self.bits();
        let mut t = want.saturating_sub(have);
        if (self.exp - t as i64) % 2 != 0 {
            t += 1;
        }
        let m = &self.mant << t;
        let s = m.sqrt(); // floor square root
        let exact = (&s * &s) == m;
        let mant = match dir {
            Dir::Down => s,
            Dir::Up => {
                if exact {
                    s
                } else {
                    s + 1
                }
            }
        };
        Dyadic { mant, exp: (self.exp - t as i64) / 2 }
            .normalized()
            .round(prec, dir)
    }

    fn cmp_val(&self, o: &Dyadic) -> std::cmp::Ordering {
        let (ma, mb, _) = Dyadic::align(self, o);
        ma.cmp(&mb)
    }

    fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }
    fn is_positive(&self) -> bool {
        self.mant.is_positive()
    }

    /// f64 conversion with directed rounding.
    pub fn to_f64_dir(&self, dir_up: bool) -> f64 {
        if self.mant.is_zero() {
            return 0.0;
        }
        let bits = self.bits();
        let (q, exp, inexact) = if bits <= 53 {
            (self.mant.clone(), self.exp, false)
        } else {
            let shift = bits - 53;
            let q = &self.mant >> shift; // floor
            let inexact = (&q << shift) != self.mant;
            (q, self.exp + shift as i64, inexact)
        };
        let q = if inexact && dir_up { q + 1 } else { q };
        let base = q.to_f64().expect("53-bit mantissa fits in f64");
        // Multiply by 2^exp through exact power-of-two scaling.
        let mut val = base;
        let mut e = exp;
        while e > 300 {
            val *= 2f64.powi(300);
            e -= 300;
        }
        while e < -300 {
            val *= 2f64.powi(-300);
            e += 300;
        }
        val *= 2f64.powi(e as i32);
        val
    }

    fn from_rational_dir(r: &BigRational, prec: u32, dir: Dir) -> Dyadic {
        let num = Dyadic { mant: r.numer().clone(), exp: 0 }.normalized();
        let den = Dyadic { mant: r.denom().clone(), exp: 0 }.normalized();
        num.div_dir(&den, prec, dir)
    }
}

/// Interval with dyadic endpoints, outward-rounded at `prec` bits.
#[derive(Clone, Debug)]
pub struct WideInterval {
    lo: Dyadic,
    hi: Dyadic,
    prec: u32,
}

impl WideInterval {
    pub fn from_ratio(num: i64, den: i64, prec: u32) -> Result<Self> {
        if den == 0 {
            return Err(Error::domain("zero denominator"));
        }
        let a = Dyadic::from_int(num);
        let b = Dyadic::from_int(den);
        let (a, b) = if den < 0 { (a.neg(), b.neg()) } else { (a, b) };
        Ok(WideInterval {
            lo: a.div_dir(&b, prec, Dir::Down),
            hi: a.div_dir(&b, prec, Dir::Up),
            prec,
        })
    }

    fn prec_of(&self, o: &WideInterval) -> u32 {
        self.prec.max(o.prec)
    }

    pub fn add(&self, o: &WideInterval) -> WideInterval {
        let p = self.prec_of(o);
        WideInterval {
            lo: self.lo.add_exact(&o.lo).round(p, Dir::Down),
            hi: self.hi.add_exact(&o.hi).round(p, Dir::Up),
            prec: p,
        }
    }

    pub fn sub(&self, o: &WideInterval) -> WideInterval {
        let p = self.prec_of(o);
        WideInterval {
            lo: self.lo.sub_exact(&o.hi).round(p, Dir::Down),
            hi: self.hi.sub_exact(&o.lo).round(p, Dir::Up),
            prec: p,
        }
    }

    pub fn neg(&self) -> WideInterval {
        WideInterval {
            lo: self.hi.neg(),
            hi: self.lo.neg(),
            prec: self.prec,
        }
    }

    pub fn mul(&self, o: &WideInterval) -> WideInterval {
        let p = self.prec_of(o);
        let cands = [
            self.lo.mul_exact(&o.lo),
            self.lo.mul_exact(&o.hi),
            self.hi.mul_exact(&o.lo),
            self.hi.mul_exact(&o.hi),
        ];
        let mut lo = cands[0].clone();
        let mut hi = cands[0].clone();
        for c in &cands[1..] {
            if c.cmp_val(&lo) == std::cmp::Ordering::Less {
                lo = c.clone();
            }
            if c.cmp_val(&hi) == std::cmp::Ordering::Greater {
                hi = c.clone();
            }
        }
        WideInterval {
            lo: lo.round(p, Dir::Down),
            hi: hi.round(p, Dir::Up),
            prec: p,
        }
    }

    pub fn div(&self, o: &WideInterval) -> Result<WideInterval> {
        let p = self.prec_of(o);
        if !(o.lo.is_positive() || o.hi.is_negative()) {
            return Err(Error::interval("wide division by interval containing zero"));
        }
        let c = [
            self.lo.div_dir(&o.lo, p, Dir::Down),
            self.lo.div_dir(&o.hi, p, Dir::Down),
            self.hi.div_dir(&o.lo, p, Dir::Down),
            self.hi.div_dir(&o.hi, p, Dir::Down),
        ];
        let cu = [
            self.lo.div_dir(&o.lo, p, Dir::Up),
            self.lo.div_dir(&o.hi, p, Dir::Up),
            self.hi.div_dir(&o.lo, p, Dir::Up),
            self.hi.div_dir(&o.hi, p, Dir::Up),
        ];
        let mut lo = c[0].clone();
        for x in &c[1..] {
            if x.cmp_val(&lo) == std::cmp::Ordering::Less {
                lo = x.clone();
            }
        }
        let mut hi = cu[0].clone();
        for x in &cu[1..] {
            if x.cmp_val(&hi) == std::cmp::Ordering::Greater {
                hi = x.clone();
            }
        }
        Ok(WideInterval { lo, hi, prec: p })
    }

    pub fn sqrt(&self) -> Result<WideInterval> {
        if self.lo.is_negative() {
            return Err(Error::interval("wide sqrt of interval with negative part"));
        }
        Ok(WideInterval {
            lo: self.lo.sqrt_dir(self.prec, Dir::Down),
            hi: self.hi.sqrt_dir(self.prec, Dir::Up),
            prec: self.prec,
        })
    }

    /// Square with the sign analysis done exactly, so straddling intervals
    /// map onto [0, max^2] rather than picking up a negative lower bound.
    fn sq(&self) -> WideInterval {
        let p = self.prec;
        let straddles = !self.lo.is_positive() && !self.hi.is_negative();
        let cands = [self.lo.mul_exact(&self.lo), self.hi.mul_exact(&self.hi)];
        let hi = if cands[0].cmp_val(&cands[1]) == std::cmp::Ordering::Greater {
            cands[0].clone()
        } else {
            cands[1].clone()
        };
        let lo = if straddles {
            Dyadic::zero()
        } else if cands[0].cmp_val(&cands[1]) == std::cmp::Ordering::Less {
            cands[0].clone()
        } else {
            cands[1].clone()
        };
        WideInterval {
            lo: lo.round(p, Dir::Down),
            hi: hi.round(p, Dir::Up),
            prec: p,
        }
    }

    pub fn powi(&self, n: u32) -> WideInterval {
        match n {
            0 => WideInterval::from_ratio(1, 1, self.prec).expect("unit"),
            1 => self.clone(),
            2 => self.sq(),
            _ => {
                let even = self.sq();
                let half = even.powi_nonneg(n / 2);
                if n % 2 == 0 {
                    half
                } else {
                    self.mul(&half)
                }
            }
        }
    }

    fn powi_nonneg(&self, n: u32) -> WideInterval {
        // self >= 0 here (it is a square)
        let mut acc: Option<WideInterval> = None;
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base),
                });
            }
            k >>= 1;
            if k > 0 {
                base = base.sq();
            }
        }
        acc.unwrap_or_else(|| WideInterval::from_ratio(1, 1, self.prec).expect("unit"))
    }

    pub fn max_with(&self, o: &WideInterval) -> WideInterval {
        let lo = if self.lo.cmp_val(&o.lo) == std::cmp::Ordering::Greater {
            self.lo.clone()
        } else {
            o.lo.clone()
        };
        let hi = if self.hi.cmp_val(&o.hi) == std::cmp::Ordering::Greater {
            self.hi.clone()
        } else {
            o.hi.clone()
        };
        WideInterval { lo, hi, prec: self.prec_of(o) }
    }

    /// Enclosure of e at `prec` bits via the factorial series with the
    /// elementary remainder bound 2/(K+1)!.
    pub fn euler(prec: u32) -> WideInterval {
        let mut sum = BigRational::one();
        let mut term = BigRational::one();
        let mut k: u64 = 1;
        loop {
            term /= BigRational::from_integer(k.into());
            sum += &term;
            // remainder after k terms is < 2 * term / (k+1)
            let rem = &term * BigRational::new(2.into(), (k + 1).into());
            if rem < BigRational::new(BigInt::one(), BigInt::one() << (prec as u64 + 8)) {
                let hi_rat = &sum + rem;
                return WideInterval {
                    lo: Dyadic::from_rational_dir(&sum, prec, Dir::Down),
                    hi: Dyadic::from_rational_dir(&hi_rat, prec, Dir::Up),
                    prec,
                };
            }
            k += 1;
        }
    }

    pub fn hull(&self, o: &WideInterval) -> WideInterval {
        let lo = if self.lo.cmp_val(&o.lo) == std::cmp::Ordering::Less {
            self.lo.clone()
        } else {
            o.lo.clone()
        };
        let hi = if self.hi.cmp_val(&o.hi) == std::cmp::Ordering::Greater {
            self.hi.clone()
        } else {
            o.hi.clone()
        };
        WideInterval { lo, hi, prec: self.prec_of(o) }
    }

    pub fn lo_f64(&self) -> f64 {
        self.lo.to_f64_dir(false)
    }
    pub fn hi_f64(&self) -> f64 {
        self.hi.to_f64_dir(true)
    }
}

impl Enclosure for WideInterval {
    fn ratio(num: i64, den: i64, prec: u32) -> Self {
        WideInterval::from_ratio(num, den, prec).expect("nonzero denominator")
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
        let z = WideInterval::from_ratio(0, 1, self.prec).expect("zero");
        self.hull(&z)
    }
    fn e_squared(prec: u32) -> Self {
        let e = WideInterval::euler(prec);
        e.mul(&e)
    }
    fn lo_f64(&self) -> f64 {
        WideInterval::lo_f64(self)
    }
    fn hi_f64(&self) -> f64 {
        WideInterval::hi_f64(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_round_trip() {
        let x = WideInterval::from_ratio(2, 5, 120).unwrap();
        // the f64 projection is one ulp wide; the dyadic endpoints are far
        // tighter than that. The f64 literal 0.4 sits just above the real
        // 2/5, so containment is non-strict on the upper side.
        assert!(x.lo_f64() < 0.4 && 0.4 <= x.hi_f64());
        assert!(x.hi_f64() - x.lo_f64() < 1e-15);
    }

    #[test]
    fn arithmetic_matches_f64_scale() {
        let a = WideInterval::from_ratio(1, 3, 100).unwrap();
        let b = WideInterval::from_ratio(1, 6, 100).unwrap();
        let s = a.add(&b); // exactly 1/2
        assert!(s.lo_f64() <= 0.5 && 0.5 <= s.hi_f64());
        assert!((s.hi_f64() - s.lo_f64()).abs() < 1e-15);
        let p = a.mul(&b); // 1/18
        assert!(p.lo_f64() <= 1.0 / 18.0 && 1.0 / 18.0 <= p.hi_f64());
    }

    #[test]
    fn sqrt_of_three_squares_back() {
        let three = WideInterval::from_ratio(3, 1, 150).unwrap();
        let s = three.sqrt().unwrap();
        let sq = s.mul(&s);
        assert!(sq.lo_f64() <= 3.0 && 3.0 <= sq.hi_f64());
        assert!((s.lo_f64() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn euler_constant_digits() {
        let e = WideInterval::euler(200);
        assert!(e.lo_f64() <= std::f64::consts::E && std::f64::consts::E <= e.hi_f64());
        let e2 = WideInterval::e_squared(200);
        assert!(e2.lo_f64() <= 7.389056098930650227 && 7.389056098930650227 <= e2.hi_f64());
        assert!(e2.hi_f64() - e2.lo_f64() < 1e-14);
    }

    #[test]
    fn division_by_zero_interval_rejected() {
        let a = WideInterval::from_ratio(1, 1, 80).unwrap();
        let z = WideInterval::from_ratio(0, 1, 80).unwrap();
        assert!(a.div(&z).is_err());
    }

    #[test]
    fn powi_matches_repeated_mul() {
        let x = WideInterval::from_ratio(7, 10, 120).unwrap();
        let p = x.powi(8);
        // (7/10)^8 = 0.05764801 exactly; the f64 literal is the nearest
        // float, within the outward-rounded projection either way.
        assert!(p.lo_f64() <= 0.05764801 && 0.05764801 <= p.hi_f64());
    }
}
