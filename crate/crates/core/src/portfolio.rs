//! Deterministic representation of the insured book and its best-estimate
//! projection.
//!
//! The book is held as model points: aggregated cohorts of similar policies
//! projected as one unit. Decrements (deaths, lapses) reduce the in-force
//! count once per year; premiums are collected on the lives in force at the
//! start of the year and death payments apply the year's mortality rate to
//! the same count. Lapses pay no surrender value, so they affect volume only.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// An aggregated cohort of policies projected as one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPoint {
    pub id: String,
    /// Age in whole years at the valuation date.
    pub age: u32,
    /// Cohort exposure count; fractional lives are allowed.
    pub lives: f64,
    /// Death benefit per life.
    pub sum_assured: f64,
    /// Net premium per life per year, expenses/commissions/taxes already
    /// deducted.
    pub annual_net_premium: f64,
    /// Years of coverage remaining, 1..=horizon.
    pub remaining_term: usize,
}

impl ModelPoint {
    fn validate(&self, horizon: usize) -> Result<()> {
        let fail = |reason: String| Error::InvalidModelPoint {
            id: self.id.clone(),
            reason,
        };
        if !(self.lives >= 0.0) {
            return Err(fail(format!("lives must be >= 0, got {}", self.lives)));
        }
        if !(self.sum_assured >= 0.0) {
            return Err(fail(format!(
                "sum_assured must be >= 0, got {}",
                self.sum_assured
            )));
        }
        if self.remaining_term == 0 || self.remaining_term > horizon {
            return Err(fail(format!(
                "remaining_term must be in 1..={horizon}, got {}",
                self.remaining_term
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Portfolio {
    pub points: Vec<ModelPoint>,
}

impl Portfolio {
    pub fn new(points: Vec<ModelPoint>) -> Self {
        Portfolio { points }
    }

    /// The book with every cohort's exposure scaled by `c`. Projection and
    /// every downstream capital figure scale by the same factor.
    pub fn scale_exposure(&self, c: f64) -> Portfolio {
        let points = self
            .points
            .iter()
            .map(|p| ModelPoint {
                lives: p.lives * c,
                ..p.clone()
            })
            .collect();
        Portfolio { points }
    }
}

/// Mortality rates looked up by attained age, optionally varying by
/// projection year. A year-specific entry wins over the age-only entry.
#[derive(Debug, Clone, Default)]
pub struct MortalityTable {
    by_age_year: HashMap<(u32, usize), f64>,
    by_age: HashMap<u32, f64>,
}

impl MortalityTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_age(&mut self, age: u32, q: f64) {
        self.by_age.insert(age, q);
    }

    pub fn insert_age_year(&mut self, age: u32, year: usize, q: f64) {
        self.by_age_year.insert((age, year), q);
    }

    pub fn lookup(&self, age: u32, year: usize) -> Option<f64> {
        self.by_age_year
            .get(&(age, year))
            .or_else(|| self.by_age.get(&age))
            .copied()
    }
}

#[derive(Debug, Clone)]
pub enum MortalityAssumption {
    /// One portfolio-level rate per projection year; no age structure.
    Aggregate(Vec<f64>),
    /// Rates indexed by attained age (age at valuation plus `t - 1`).
    Table(MortalityTable),
}

/// Best-estimate assumptions over the projection horizon: mortality, lapse
/// rates and discount factors, all indexed by projection year `t` in
/// `1..=horizon`.
///
/// The per-year aggregate mortality curve is carried alongside the table
/// form; the stochastic drivers and the life-expectancy view operate on the
/// portfolio-level curve, while cash-flow projection uses the age-indexed
/// rates where available. Mortality rates are understood to already include
/// the mean pandemic load, so that the stochastic construction centered on
/// them has mean one.
#[derive(Debug, Clone)]
pub struct AssumptionSet {
    horizon: usize,
    mortality: MortalityAssumption,
    aggregate_q: Vec<f64>,
    lapse: Vec<f64>,
    discount: Vec<f64>,
}

fn check_probability(name: &str, value: f64, t: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidAssumption(format!(
            "{name} in year {t} must be a probability in [0, 1], got {value}"
        )));
    }
    Ok(())
}

impl AssumptionSet {
    /// Aggregate-rate mode: one mortality rate per year for the whole book.
    pub fn from_aggregate(q: Vec<f64>, lapse: Vec<f64>, discount: Vec<f64>) -> Result<Self> {
        let horizon = q.len();
        Self::check_lengths(horizon, &lapse, &discount)?;
        for (i, (&qt, &wt)) in q.iter().zip(&lapse).enumerate() {
            let t = i + 1;
            check_probability("mortality rate", qt, t)?;
            check_probability("lapse rate", wt, t)?;
            if qt + wt > 1.0 {
                return Err(Error::InvalidAssumption(format!(
                    "combined decrement q + w = {} exceeds 1 in year {t}",
                    qt + wt
                )));
            }
        }
        Self::check_discount(&discount)?;
        Ok(AssumptionSet {
            horizon,
            aggregate_q: q.clone(),
            mortality: MortalityAssumption::Aggregate(q),
            lapse,
            discount,
        })
    }

    /// Age-table mode. Coverage is checked against the portfolio, and the
    /// per-year aggregate curve is derived as the death count over the
    /// in-force count of the best-estimate projection.
    pub fn from_table(
        table: MortalityTable,
        lapse: Vec<f64>,
        discount: Vec<f64>,
        horizon: usize,
        portfolio: &Portfolio,
    ) -> Result<Self> {
        Self::check_lengths(horizon, &lapse, &discount)?;
        for (i, &wt) in lapse.iter().enumerate() {
            check_probability("lapse rate", wt, i + 1)?;
        }
        Self::check_discount(&discount)?;

        // Validate coverage and rate bounds per model point, and accumulate
        // the exposure-weighted aggregate curve in one pass.
        let mut deaths = vec![0.0_f64; horizon];
        let mut exposure = vec![0.0_f64; horizon];
        for mp in &portfolio.points {
            mp.validate(horizon)?;
            let mut l = mp.lives;
            for t in 1..=mp.remaining_term {
                let age = mp.age + (t - 1) as u32;
                let q = table.lookup(age, t).ok_or_else(|| Error::MissingMortality {
                    id: mp.id.clone(),
                    age,
                    year: t,
                })?;
                check_probability(&format!("mortality rate (model point {})", mp.id), q, t)?;
                let w = lapse[t - 1];
                if q + w > 1.0 {
                    return Err(Error::InvalidAssumption(format!(
                        "combined decrement q + w = {} exceeds 1 for model point {} in year {t}",
                        q + w,
                        mp.id
                    )));
                }
                deaths[t - 1] += l * q;
                exposure[t - 1] += l;
                l *= 1.0 - q - w;
            }
        }
        let aggregate_q = deaths
            .iter()
            .zip(&exposure)
            .map(|(&d, &e)| if e > 0.0 { d / e } else { 0.0 })
            .collect();

        Ok(AssumptionSet {
            horizon,
            mortality: MortalityAssumption::Table(table),
            aggregate_q,
            lapse,
            discount,
        })
    }

    fn check_lengths(horizon: usize, lapse: &[f64], discount: &[f64]) -> Result<()> {
        if horizon == 0 {
            return Err(Error::InvalidAssumption("horizon must be at least 1".into()));
        }
        if lapse.len() != horizon {
            return Err(Error::HorizonMismatch {
                left: lapse.len(),
                right: horizon,
            });
        }
        if discount.len() != horizon {
            return Err(Error::HorizonMismatch {
                left: discount.len(),
                right: horizon,
            });
        }
        Ok(())
    }

    fn check_discount(discount: &[f64]) -> Result<()> {
        for (i, &d) in discount.iter().enumerate() {
            if !(d > 0.0) {
                return Err(Error::InvalidAssumption(format!(
                    "discount factor in year {} must be positive, got {d}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Soft checks that do not reject the input: an increasing discount
    /// factor signals a negative forward rate somewhere on the curve.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in 1..self.horizon {
            if self.discount[t] > self.discount[t - 1] {
                out.push(format!(
                    "discount factor increases from year {} to {} ({} -> {}); \
                     negative forward rate",
                    t,
                    t + 1,
                    self.discount[t - 1],
                    self.discount[t]
                ));
                break;
            }
        }
        out
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn mortality(&self) -> &MortalityAssumption {
        &self.mortality
    }

    /// Portfolio-level mortality curve, one rate per projection year.
    pub fn aggregate_q(&self) -> &[f64] {
        &self.aggregate_q
    }

    pub fn lapse(&self) -> &[f64] {
        &self.lapse
    }

    pub fn discount(&self) -> &[f64] {
        &self.discount
    }
}

/// Annual premium income, death outgo and their net, indexed by projection
/// year. `ncf[t] = premium[t] - death[t]` by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CashflowVector {
    pub premium: Vec<f64>,
    pub death: Vec<f64>,
    pub ncf: Vec<f64>,
}

impl CashflowVector {
    pub fn from_components(premium: Vec<f64>, death: Vec<f64>) -> Self {
        assert_eq!(premium.len(), death.len());
        let ncf = premium.iter().zip(&death).map(|(p, d)| p - d).collect();
        CashflowVector { premium, death, ncf }
    }

    pub fn horizon(&self) -> usize {
        self.ncf.len()
    }
}

/// A model point with its per-year mortality and lapse rates resolved,
/// ready for the projection hot loop. Missing table entries surface when
/// compiling, not mid-simulation.
#[derive(Debug, Clone)]
pub(crate) struct CompiledPoint {
    pub lives: f64,
    pub sum_assured: f64,
    pub premium: f64,
    pub q: Vec<f64>,
    pub w: Vec<f64>,
}

/// The book plus assumptions flattened into plain arrays.
#[derive(Debug, Clone)]
pub struct CompiledPortfolio {
    pub(crate) points: Vec<CompiledPoint>,
    pub(crate) discount: Vec<f64>,
    pub(crate) horizon: usize,
}

/// Scale a decrement pair proportionally so it sums to at most one,
/// preserving the mortality/lapse mix. Returns true when a clip happened.
#[inline(always)]
pub(crate) fn clip_decrements(q: &mut f64, w: &mut f64) -> bool {
    let s = *q + *w;
    if s > 1.0 {
        *q /= s;
        *w /= s;
        true
    } else {
        false
    }
}

impl CompiledPortfolio {
    pub fn compile(portfolio: &Portfolio, assumptions: &AssumptionSet) -> Result<Self> {
        let horizon = assumptions.horizon();
        let mut points = Vec::with_capacity(portfolio.points.len());
        for mp in &portfolio.points {
            mp.validate(horizon)?;
            let mut q = Vec::with_capacity(mp.remaining_term);
            for t in 1..=mp.remaining_term {
                let rate = match assumptions.mortality() {
                    MortalityAssumption::Aggregate(v) => v[t - 1],
                    MortalityAssumption::Table(table) => {
                        let age = mp.age + (t - 1) as u32;
                        table.lookup(age, t).ok_or_else(|| Error::MissingMortality {
                            id: mp.id.clone(),
                            age,
                            year: t,
                        })?
                    }
                };
                q.push(rate);
            }
            points.push(CompiledPoint {
                lives: mp.lives,
                sum_assured: mp.sum_assured,
                premium: mp.annual_net_premium,
                q,
                w: assumptions.lapse()[..mp.remaining_term].to_vec(),
            });
        }
        Ok(CompiledPortfolio {
            points,
            discount: assumptions.discount().to_vec(),
            horizon,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn discount(&self) -> &[f64] {
        &self.discount
    }

    /// Best-estimate projection of the compiled book.
    pub fn project(&self) -> CashflowVector {
        let mut premium = vec![0.0_f64; self.horizon];
        let mut death = vec![0.0_f64; self.horizon];
        for point in &self.points {
            let mut l = point.lives;
            for (t0, (&q, &w)) in point.q.iter().zip(&point.w).enumerate() {
                premium[t0] += premium_cashflow(l, point.premium);
                death[t0] += death_cashflow(l, q, point.sum_assured);
                l = advance_lives(l, q, w);
            }
        }
        CashflowVector::from_components(premium, death)
    }

    /// Mortality rates multiplied by `1 + shock` in every year; combined
    /// decrements clipped proportionally where they would exceed one.
    /// Returns the stressed book and the number of clipped point-years.
    pub fn with_mortality_scale(&self, shock: f64) -> (Self, u64) {
        let mut clips = 0;
        let mut out = self.clone();
        for point in &mut out.points {
            for (q, w) in point.q.iter_mut().zip(&mut point.w) {
                *q *= 1.0 + shock;
                if clip_decrements(q, w) {
                    clips += 1;
                }
            }
        }
        (out, clips)
    }

    /// Lapse rates multiplied by `1 + shock` (negative for a decrease);
    /// clipped as in `with_mortality_scale`.
    pub fn with_lapse_scale(&self, shock: f64) -> (Self, u64) {
        let mut clips = 0;
        let mut out = self.clone();
        for point in &mut out.points {
            for (q, w) in point.q.iter_mut().zip(&mut point.w) {
                *w = (*w * (1.0 + shock)).max(0.0);
                if clip_decrements(q, w) {
                    clips += 1;
                }
            }
        }
        (out, clips)
    }

    /// A fraction of the in-force book lapses immediately: every cohort's
    /// initial exposure is scaled by `1 - fraction`, rates untouched.
    pub fn with_initial_lives_scale(&self, fraction_lapsing: f64) -> Self {
        let mut out = self.clone();
        for point in &mut out.points {
            point.lives *= 1.0 - fraction_lapsing;
        }
        out
    }

    /// Absolute addition to every cohort's first-year mortality rate; later
    /// years untouched. Clipped as in `with_mortality_scale`.
    pub fn with_year_one_excess_mortality(&self, excess: f64) -> (Self, u64) {
        let mut clips = 0;
        let mut out = self.clone();
        for point in &mut out.points {
            if let (Some(q), Some(w)) = (point.q.first_mut(), point.w.first_mut()) {
                *q += excess;
                if clip_decrements(q, w) {
                    clips += 1;
                }
            }
        }
        (out, clips)
    }
}

// The three per-year kernels are shared verbatim between the deterministic
// and the factor-adjusted projections so that the two agree bit-for-bit
// when every adjustment factor is exactly one.
#[inline(always)]
pub(crate) fn advance_lives(l: f64, q: f64, w: f64) -> f64 {
    (l * (1.0 - q - w)).max(0.0)
}

#[inline(always)]
pub(crate) fn premium_cashflow(l: f64, premium: f64) -> f64 {
    l * premium
}

#[inline(always)]
pub(crate) fn death_cashflow(l: f64, q: f64, sum_assured: f64) -> f64 {
    l * q * sum_assured
}

/// Project the book at best-estimate decrements with no stochastic
/// adjustment.
pub fn project_best_estimate(
    portfolio: &Portfolio,
    assumptions: &AssumptionSet,
) -> Result<CashflowVector> {
    Ok(CompiledPortfolio::compile(portfolio, assumptions)?.project())
}

/// Discounted sum of the net cash flows.
pub fn present_value(cf: &CashflowVector, assumptions: &AssumptionSet) -> Result<f64> {
    if cf.horizon() != assumptions.horizon() {
        return Err(Error::HorizonMismatch {
            left: cf.horizon(),
            right: assumptions.horizon(),
        });
    }
    Ok(cf
        .ncf
        .iter()
        .zip(assumptions.discount())
        .map(|(n, d)| d * n)
        .sum())
}
