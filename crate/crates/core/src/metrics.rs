//! Social optimum, efficiency ratios and fairness bounds.
//!
//! Decimal thresholds are compared as exact rationals (`8.62 = 862/100`).
//! The closed-form fairness bounds involve logarithms and square roots and
//! are evaluated with outward-rounded intervals.

use num_bigint::BigUint;
use serde::Serialize;

use crate::balanced::{admissible_sequences, balanced_stats, DegreeSequence};
use crate::cost::{all_costs, Rational};
use crate::enumeration::EquilibriumReport;
use crate::interval::Interval;
use crate::tree_model::{compute_stats, RootedProfile};
use crate::{Error, Result};

/// Smallest `n` for which the fairness upper bound exceeds 1.
pub const FR_BOUND_MIN_N: usize = 4;

pub fn poa_ceiling() -> Rational {
    Rational::new(862, 100)
}

pub fn pos_ceiling() -> Rational {
    Rational::new(283, 100)
}

pub fn seven_fifths() -> Rational {
    Rational::new(7, 5)
}

/// The chain with the root at one end; social cost `n`.
pub fn optimum_profile(n: usize) -> RootedProfile {
    assert!(n >= 1, "need at least one agent");
    RootedProfile::path(n)
}

/// `n · H_n`, the fairness ratio of the optimum.
pub fn optimum_fairness(n: usize) -> Rational {
    Rational::from_integer(n as i64) * Rational::harmonic(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrBounds {
    /// `n · 2^(-2 sqrt(2 log2 n))`.
    pub lower: Interval,
    /// `8.62 (n - 2) ln ln x / ln x` with `x = 4 sqrt(n / 5)`.
    pub upper: Interval,
}

impl FrBounds {
    /// `lower <= fr < upper`, decided without rounding doubt.
    pub fn certainly_contains(&self, fr: &Rational) -> bool {
        let x = Interval::from_rational(fr);
        self.lower.certainly_le(&x) && x.certainly_lt(&self.upper)
    }
}

/// `None` below [`FR_BOUND_MIN_N`].
pub fn fr_bounds(n: usize) -> Option<FrBounds> {
    if n < FR_BOUND_MIN_N {
        return None;
    }
    let nn = Interval::from_int(n as u64);
    let x = Interval::from_int(4).mul(Interval::from_ratio(n as u64, 5).sqrt());
    let lnx = x.ln();
    let upper = Interval::from_ratio(862, 100)
        .mul(Interval::from_int(n as u64 - 2))
        .mul(lnx.ln())
        .div(lnx);
    let expo = Interval::from_int(2).mul(Interval::from_int(2).mul(nn.log2()).sqrt());
    let lower = nn.mul(expo.neg().exp2());
    Some(FrBounds { lower, upper })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QualityReport {
    pub n: usize,
    pub opt_sc: u128,
    pub equilibria: usize,
    pub best_sc: Option<u128>,
    pub worst_sc: Option<u128>,
    pub pos_ratio: Option<Rational>,
    pub poa_ratio: Option<Rational>,
    /// Largest single agent cost over all equilibria.
    pub max_agent_cost: Option<Rational>,
    pub fr_opt: Rational,
    pub fr_per_equilibrium: Vec<Rational>,
    pub fr_bounds: Option<FrBounds>,
    /// Every equilibrium's FR lies inside `fr_bounds`; `None` when either
    /// side is missing.
    pub fr_within_bounds: Option<bool>,
    /// `max_agent_cost < 8.62` and `worst_sc / n < 8.62`.
    pub below_poa_ceiling: Option<bool>,
}

/// Like [`quality_report`], but an empty report yields absent fields.
pub fn quality_summary(report: &EquilibriumReport) -> QualityReport {
    let n = report.n;
    let opt_sc = n as u128;
    let opt = Rational::from_integer(opt_sc as i64);
    let ratio = |sc: Option<u128>| sc.map(|sc| Rational::from_integer(sc as i64) / opt.clone());
    let max_agent_cost = report
        .equilibria
        .iter()
        .filter_map(|e| {
            let stats = compute_stats(&e.profile).ok()?;
            all_costs(&e.profile, &stats).into_iter().filter_map(|c| c.finite().cloned()).max()
        })
        .max();
    let fr_bounds = fr_bounds(n);
    let fr_within_bounds = match (&fr_bounds, report.fr_values.is_empty()) {
        (Some(b), false) => Some(report.fr_values.iter().all(|fr| b.certainly_contains(fr))),
        _ => None,
    };
    let poa_ratio = ratio(report.worst_sc);
    let below_poa_ceiling = match (&max_agent_cost, &poa_ratio) {
        (Some(c), Some(r)) => Some(*c < poa_ceiling() && *r < poa_ceiling()),
        _ => None,
    };
    QualityReport {
        n,
        opt_sc,
        equilibria: report.count(),
        best_sc: report.best_sc,
        worst_sc: report.worst_sc,
        pos_ratio: ratio(report.best_sc),
        poa_ratio,
        max_agent_cost,
        fr_opt: optimum_fairness(n),
        fr_per_equilibrium: report.fr_values.clone(),
        fr_bounds,
        fr_within_bounds,
        below_poa_ceiling,
    }
}

pub fn quality_report(report: &EquilibriumReport) -> Result<QualityReport> {
    if report.count() == 0 {
        return Err(Error::NoEquilibrium(report.n));
    }
    Ok(quality_summary(report))
}

/// Best equilibrium cost against the `7/5` floor and the `2.83` ceiling.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosMeasurement {
    pub n: usize,
    pub best_sc: u128,
    pub ratio: Rational,
    /// `ratio - 7/5` as a float, for logging only.
    pub excess_over_seven_fifths: f64,
    /// An admissible balanced sequence with exactly `n` agents.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub balanced_witness: Option<DegreeSequence>,
    /// `ratio <= 2.83`, checked only when a balanced witness exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_pos_ceiling: Option<bool>,
}

fn measure(n: usize, best_sc: u128, witness: Option<DegreeSequence>) -> PosMeasurement {
    let ratio = Rational::new(best_sc as i64, n as i64);
    let within_pos_ceiling = witness.as_ref().map(|_| ratio <= pos_ceiling());
    PosMeasurement {
        n,
        best_sc,
        excess_over_seven_fifths: (&ratio - &seven_fifths()).to_f64(),
        ratio,
        balanced_witness: witness,
        within_pos_ceiling,
    }
}

/// `None` when the report holds no equilibrium.
pub fn pos_floor_check(report: &EquilibriumReport) -> Option<PosMeasurement> {
    let best = report.best_sc?;
    let n = report.n;
    let witness = admissible_sequences(n as u64)
        .into_iter()
        .find(|s| balanced_stats(s).agents() == BigUint::from(n));
    Some(measure(n, best, witness))
}

/// The same measurement for the balanced equilibrium of `seq` itself.
pub fn balanced_pos_check(seq: &DegreeSequence) -> Result<PosMeasurement> {
    let stats = balanced_stats(seq);
    let too_big = || Error::ResourceLimit(format!("{seq} has more than 2^64 agents"));
    let n: usize = stats.agents().try_into().map_err(|_| too_big())?;
    let sc: u128 = stats.sc.clone().try_into().map_err(|_| too_big())?;
    let witness = seq.admissible_for_theorem().then(|| seq.clone());
    Ok(measure(n, sc, witness))
}
