//! Exact cost evaluation.
//!
//! Edge costs carry a global scale factor in the model; it is fixed to 1 here.
//! Multiplying every cost by the same positive constant leaves every
//! comparison, best response and equilibrium unchanged.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::tree_model::{node_of, RootedProfile, SubtreeStats};
use crate::{Error, Result};

/// Arbitrary-precision rational, always reduced with a positive denominator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        Self(BigRational::new(num.into(), den.into()))
    }

    pub fn from_integer(v: impl Into<BigInt>) -> Self {
        Self(BigRational::from_integer(v.into()))
    }

    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn one() -> Self {
        Self(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Approximate value for display only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `p/100`-style decimal thresholds as exact rationals, e.g. `"8.62"`.
    pub fn from_decimal(text: &str) -> Result<Self> {
        let (int, frac) = text.split_once('.').unwrap_or((text, ""));
        let digits = format!("{int}{frac}");
        let num: BigInt = digits
            .parse()
            .map_err(|_| Error::Parse { position: 0, message: format!("not a decimal: {text}") })?;
        let den = num_traits::pow(BigInt::from(10), frac.len());
        Ok(Self::new(num, den))
    }

    /// The `n`-th harmonic number.
    pub fn harmonic(n: usize) -> Self {
        (1..=n).fold(Self::zero(), |acc, k| acc + Self::new(1, k as i64))
    }
}

impl From<BigRational> for Rational {
    fn from(r: BigRational) -> Self {
        Self(r)
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Self::from_integer(v)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |position| Error::Parse { position, message: format!("expected p/q, got {s:?}") };
        let (p, q) = s.split_once('/').unwrap_or((s, "1"));
        let p: BigInt = p.trim().parse().map_err(|_| bad(0))?;
        let q: BigInt = q.trim().parse().map_err(|_| bad(s.find('/').map_or(0, |i| i + 1)))?;
        if q.is_zero() {
            return Err(bad(s.len()));
        }
        Ok(Self::new(p, q))
    }
}

impl Serialize for Rational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident) => {
        impl $tr for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl<'a> $tr<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

/// A cost that is either an exact rational or infinite (no path to the root).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CostValue {
    Finite(Rational),
    Infinite,
}

impl CostValue {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            CostValue::Finite(r) => Some(r),
            CostValue::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, CostValue::Infinite)
    }
}

impl PartialOrd for CostValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CostValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (CostValue::Finite(a), CostValue::Finite(b)) => a.cmp(b),
            (CostValue::Finite(_), CostValue::Infinite) => Ordering::Less,
            (CostValue::Infinite, CostValue::Finite(_)) => Ordering::Greater,
            (CostValue::Infinite, CostValue::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for CostValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostValue::Finite(r) => r.fmt(f),
            CostValue::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for CostValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Sum of `indeg(v) / |T(u)|` over the edges `(u, v)` of the agent's root path.
pub fn agent_cost(profile: &RootedProfile, stats: &SubtreeStats, agent: usize) -> CostValue {
    let mut v = node_of(agent);
    if !stats.reaches_root[v] {
        return CostValue::Infinite;
    }
    let mut total = BigRational::zero();
    while v != 0 {
        let next = profile.target(v - 1);
        total += BigRational::new(BigInt::from(stats.indeg[next]), BigInt::from(stats.size[v]));
        v = next;
    }
    CostValue::Finite(Rational(total))
}

/// Costs of all agents, computed top-down in one pass.
pub fn all_costs(profile: &RootedProfile, stats: &SubtreeStats) -> Vec<CostValue> {
    let m = profile.node_count();
    let mut order: Vec<usize> = (1..m).filter(|&v| stats.reaches_root[v]).collect();
    order.sort_by_key(|&v| stats.depth[v]);
    let mut node_cost: Vec<Option<Rational>> = vec![None; m];
    node_cost[0] = Some(Rational::zero());
    for v in order {
        let p = profile.target(v - 1);
        let above = node_cost[p].clone().expect("parents are processed first");
        node_cost[v] = Some(above + Rational::new(stats.indeg[p] as i64, stats.size[v] as i64));
    }
    (1..m).map(|v| node_cost[v].take().map_or(CostValue::Infinite, CostValue::Finite)).collect()
}

/// Closed form `Σ_v indeg(v)²` of the social cost of a spanning tree.
pub fn social_cost(stats: &SubtreeStats) -> u128 {
    stats.indeg.iter().map(|&d| (d as u128) * (d as u128)).sum()
}

/// Maximum over minimum agent cost. `None` if some agent cost is infinite.
pub fn fairness_ratio(profile: &RootedProfile, stats: &SubtreeStats) -> Option<Rational> {
    let costs = all_costs(profile, stats);
    let finite: Option<Vec<Rational>> = costs.into_iter().map(|c| c.finite().cloned()).collect();
    let finite = finite?;
    let max = finite.iter().max()?;
    let min = finite.iter().min()?;
    Some(max / min)
}
