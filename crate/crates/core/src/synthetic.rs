//! Deterministically generated reference books for tests, examples and
//! benchmarks. The generation procedure is fixed: same inputs, same book,
//! no randomness involved.

use crate::drivers::{BasisRiskModel, CalamityModel, DriverModels, LapseDriverModel, TrendModel};
use crate::portfolio::{AssumptionSet, ModelPoint, MortalityTable, Portfolio};

/// Makeham-style mortality curve used by the synthetic books:
/// `q(age) = 2e-4 + 2.5e-5 * exp(0.088 * age)`, capped at 0.95.
pub fn makeham_q(age: u32) -> f64 {
    (2.0e-4 + 2.5e-5 * (0.088 * age as f64).exp()).min(0.95)
}

/// Lapse rates easing from about 5% toward a 2% floor:
/// `w(t) = 0.02 + 0.03 * 0.96^(t-1)`.
pub fn reference_lapse(horizon: usize) -> Vec<f64> {
    (1..=horizon)
        .map(|t| 0.02 + 0.03 * 0.96_f64.powi(t as i32 - 1))
        .collect()
}

/// Flat 2% discount curve: `delta(t) = 1.02^-t`.
pub fn reference_discount(horizon: usize) -> Vec<f64> {
    (1..=horizon).map(|t| 1.02_f64.powi(-(t as i32))).collect()
}

const REFERENCE_HORIZON: usize = 60;

/// The reference book: 1,000 model points, ages 30..=60 cycling, all with a
/// 60-year term. Exposure, benefit and premium vary deterministically with
/// the point index:
///
/// * `lives = 20 + (i mod 80)`
/// * `sum_assured = 25_000 + 500 * (i mod 150)`
/// * `annual_net_premium = sum_assured * q(age + 15) * 1.25`
pub fn reference_portfolio() -> Portfolio {
    let points = (0..1_000u32)
        .map(|i| {
            let age = 30 + (i % 31);
            let sum_assured = 25_000.0 + 500.0 * f64::from(i % 150);
            ModelPoint {
                id: format!("mp{i:04}"),
                age,
                lives: 20.0 + f64::from(i % 80),
                sum_assured,
                annual_net_premium: sum_assured * makeham_q(age + 15) * 1.25,
                remaining_term: REFERENCE_HORIZON,
            }
        })
        .collect();
    Portfolio::new(points)
}

/// Age-indexed assumptions for the reference book over its 60-year horizon.
pub fn reference_assumptions(portfolio: &Portfolio) -> AssumptionSet {
    let mut table = MortalityTable::new();
    // attained ages span 30 ..= 60 + 59
    for age in 30..=119 {
        table.insert_age(age, makeham_q(age));
    }
    AssumptionSet::from_table(
        table,
        reference_lapse(REFERENCE_HORIZON),
        reference_discount(REFERENCE_HORIZON),
        REFERENCE_HORIZON,
        portfolio,
    )
    .expect("the reference book is valid by construction")
}

/// Mortality table rows backing [`reference_assumptions`], for export.
pub fn reference_mortality_rows() -> Vec<(u32, f64)> {
    (30..=119).map(|age| (age, makeham_q(age))).collect()
}

/// Driver models at the standard calibration: trend anchored at a 1.45
/// factor on the 95% quantile at year 40, default calamity anchors, basis
/// risk from a 35% -> 39% smoker-share mismatch at multiplier 2, lapse
/// volatility 5% per √year.
pub fn reference_models() -> DriverModels {
    DriverModels {
        trend: TrendModel::calibrate(0.95, 1.45, 40).expect("standard anchors are solvable"),
        calamity: CalamityModel::calibrate_default().expect("standard anchors are solvable"),
        basis: BasisRiskModel::from_smoker_shares(0.35, 0.39, 2.0)
            .expect("standard shares are valid"),
        lapse: LapseDriverModel { sigma: 0.05 },
    }
}

/// A small book for validation runs where a brute-force estimate has to be
/// affordable: 10 model points, 10-year horizon, same curves as the
/// reference book.
pub fn toy_book() -> (Portfolio, AssumptionSet) {
    let horizon = 10;
    let points = (0..10u32)
        .map(|i| {
            let age = 35 + 2 * i;
            let sum_assured = 10_000.0 + 1_000.0 * f64::from(i);
            ModelPoint {
                id: format!("toy{i:02}"),
                age,
                lives: 100.0,
                sum_assured,
                annual_net_premium: sum_assured * makeham_q(age + 15) * 1.25,
                remaining_term: horizon,
            }
        })
        .collect();
    let portfolio = Portfolio::new(points);
    let mut table = MortalityTable::new();
    for age in 35..=62 {
        table.insert_age(age, makeham_q(age));
    }
    let assumptions = AssumptionSet::from_table(
        table,
        reference_lapse(horizon),
        reference_discount(horizon),
        horizon,
        &portfolio,
    )
    .expect("the toy book is valid by construction");
    (portfolio, assumptions)
}

/// A two-year book whose response is exactly multilinear in the first-year
/// factors: the benefit is zero, so future flows are pure premium volume,
/// which the year-one decrements scale linearly. On this instance the
/// regression is exact and a nested run must agree up to quantile noise.
pub fn linear_validation_book() -> (Portfolio, AssumptionSet) {
    let portfolio = Portfolio::new(vec![ModelPoint {
        id: "linear".into(),
        age: 40,
        lives: 1_000.0,
        sum_assured: 0.0,
        annual_net_premium: 100.0,
        remaining_term: 2,
    }]);
    let assumptions = AssumptionSet::from_aggregate(
        vec![0.010, 0.011],
        vec![0.05, 0.05],
        vec![0.98, 0.96],
    )
    .expect("the validation book is valid by construction");
    (portfolio, assumptions)
}
