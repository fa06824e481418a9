//! Closed `f64` intervals with outward rounding.
//!
//! Every operation widens its result by a few ulps on each side, so the true
//! real value of an expression always lies inside the computed interval.
//! `sqrt` and the basic operations are correctly rounded; `ln` and `exp2` are
//! given a wider margin.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use serde::Serialize;

use crate::cost::Rational;

const LIBM_ULPS: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

fn down(x: f64, ulps: u32) -> f64 {
    (0..ulps).fold(x, |v, _| v.next_down())
}

fn up(x: f64, ulps: u32) -> f64 {
    (0..ulps).fold(x, |v, _| v.next_up())
}

fn big_to_interval(v: &BigInt) -> Interval {
    let f = v.to_f64().unwrap_or(if v.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY });
    if v.abs() < BigInt::from(1u64 << 53) {
        Interval::point(f)
    } else {
        Interval { lo: down(f, 1), hi: up(f, 1) }
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    /// An exactly representable value.
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn from_int(v: u64) -> Self {
        big_to_interval(&BigInt::from(v))
    }

    pub fn from_ratio(p: u64, q: u64) -> Self {
        Self::from_int(p).div(Self::from_int(q))
    }

    pub fn from_rational(r: &Rational) -> Self {
        big_to_interval(r.numer()).div(big_to_interval(r.denom()))
    }

    pub fn add(self, o: Self) -> Self {
        Self { lo: down(self.lo + o.lo, 1), hi: up(self.hi + o.hi, 1) }
    }

    pub fn sub(self, o: Self) -> Self {
        Self { lo: down(self.lo - o.hi, 1), hi: up(self.hi - o.lo, 1) }
    }

    pub fn mul(self, o: Self) -> Self {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { lo: down(lo, 1), hi: up(hi, 1) }
    }

    /// Panics if `o` contains zero.
    pub fn div(self, o: Self) -> Self {
        assert!(o.lo > 0.0 || o.hi < 0.0, "division by an interval containing zero");
        self.mul(Self { lo: 1.0 / o.hi, hi: 1.0 / o.lo }.widen(1))
    }

    pub fn sqrt(self) -> Self {
        assert!(self.lo >= 0.0);
        Self { lo: down(self.lo.sqrt(), 1).max(0.0), hi: up(self.hi.sqrt(), 1) }
    }

    /// Natural logarithm; requires a positive interval.
    pub fn ln(self) -> Self {
        assert!(self.lo > 0.0);
        Self { lo: down(self.lo.ln(), LIBM_ULPS), hi: up(self.hi.ln(), LIBM_ULPS) }
    }

    pub fn log2(self) -> Self {
        assert!(self.lo > 0.0);
        Self { lo: down(self.lo.log2(), LIBM_ULPS), hi: up(self.hi.log2(), LIBM_ULPS) }
    }

    pub fn exp2(self) -> Self {
        Self { lo: down(self.lo.exp2(), LIBM_ULPS).max(0.0), hi: up(self.hi.exp2(), LIBM_ULPS) }
    }

    pub fn neg(self) -> Self {
        Self { lo: -self.hi, hi: -self.lo }
    }

    fn widen(self, ulps: u32) -> Self {
        Self { lo: down(self.lo, ulps), hi: up(self.hi, ulps) }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Every point of `self` is strictly below every point of `o`.
    pub fn certainly_lt(&self, o: &Self) -> bool {
        self.hi < o.lo
    }

    pub fn certainly_le(&self, o: &Self) -> bool {
        self.hi <= o.lo
    }

    pub fn midpoint(&self) -> f64 {
        self.lo + (self.hi - self.lo) / 2.0
    }
}
