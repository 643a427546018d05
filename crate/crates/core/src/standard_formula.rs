//! Deterministic stress scenarios and square-root aggregation: the
//! regulatory standard-formula capital figure computed from the same book.
//!
//! Five stresses are projected, each as one deterministic revaluation:
//! a mass-lapse of part of the in-force book, lapse rates up, lapse rates
//! down, mortality rates up, and a one-year catastrophe addition to
//! mortality. Sub-requirements are the loss of discounted future profits
//! against the unstressed projection, floored at zero; the lapse figure is
//! the worst of the three lapse scenarios. Aggregation applies a fixed
//! correlation only between the catastrophe stress and each of the other
//! two components — there is no lapse/mortality cross term.

use serde::Serialize;

use crate::error::Result;
use crate::portfolio::{
    present_value, AssumptionSet, CashflowVector, CompiledPortfolio, Portfolio,
};

/// The five deterministic stresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StressKind {
    /// A fraction of the in-force book lapses at the start of year one.
    LapseMass,
    /// Lapse rates scaled up over the whole projection.
    LapseUp,
    /// Lapse rates scaled down over the whole projection.
    LapseDown,
    /// Mortality rates scaled up over the whole projection.
    MortalityUp,
    /// Absolute addition to year-one mortality.
    Catastrophe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StressScenario {
    pub kind: StressKind,
    pub magnitude: f64,
}

/// Stress sizes for the five scenarios. The defaults are the regulatory
/// magnitudes: 40% mass lapse, ±50% lapse rates, +15% mortality, +1.5 per
/// mille one-year catastrophe mortality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StressMagnitudes {
    pub lapse_mass: f64,
    pub lapse_up: f64,
    pub lapse_down: f64,
    pub mortality_up: f64,
    pub catastrophe: f64,
}

impl Default for StressMagnitudes {
    fn default() -> Self {
        StressMagnitudes {
            lapse_mass: 0.40,
            lapse_up: 0.50,
            lapse_down: 0.50,
            mortality_up: 0.15,
            catastrophe: 0.0015,
        }
    }
}

impl StressMagnitudes {
    pub fn scenarios(&self) -> [StressScenario; 5] {
        [
            StressScenario { kind: StressKind::LapseMass, magnitude: self.lapse_mass },
            StressScenario { kind: StressKind::LapseUp, magnitude: self.lapse_up },
            StressScenario { kind: StressKind::LapseDown, magnitude: self.lapse_down },
            StressScenario { kind: StressKind::MortalityUp, magnitude: self.mortality_up },
            StressScenario { kind: StressKind::Catastrophe, magnitude: self.catastrophe },
        ]
    }
}

/// Correlation applied between the catastrophe component and each of lapse
/// and mortality in the aggregation.
pub const STANDARD_CORRELATION: f64 = 0.25;

fn stressed_book(cp: &CompiledPortfolio, scenario: StressScenario) -> (CompiledPortfolio, u64) {
    match scenario.kind {
        StressKind::LapseMass => (cp.with_initial_lives_scale(scenario.magnitude), 0),
        StressKind::LapseUp => cp.with_lapse_scale(scenario.magnitude),
        StressKind::LapseDown => cp.with_lapse_scale(-scenario.magnitude),
        StressKind::MortalityUp => cp.with_mortality_scale(scenario.magnitude),
        StressKind::Catastrophe => cp.with_year_one_excess_mortality(scenario.magnitude),
    }
}

/// Project the book under one deterministic stress.
pub fn apply_stress(
    portfolio: &Portfolio,
    assumptions: &AssumptionSet,
    scenario: StressScenario,
) -> Result<CashflowVector> {
    let cp = CompiledPortfolio::compile(portfolio, assumptions)?;
    let (stressed, _clips) = stressed_book(&cp, scenario);
    Ok(stressed.project())
}

/// Square-root aggregation of the three sub-requirements:
///
/// ```text
/// sqrt(L^2 + M^2 + C^2 + 2*corr*M*C + 2*corr*L*C)
/// ```
///
/// Note the absence of a lapse/mortality cross term.
pub fn aggregate(lapse: f64, mortality: f64, catastrophe: f64, correlation: f64) -> f64 {
    (lapse * lapse
        + mortality * mortality
        + catastrophe * catastrophe
        + 2.0 * correlation * mortality * catastrophe
        + 2.0 * correlation * lapse * catastrophe)
        .sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioOutcome {
    pub kind: StressKind,
    pub magnitude: f64,
    /// Discounted future profits under the stress.
    pub pvofp: f64,
    /// Point-years where the stressed decrements had to be clipped to one.
    pub clipped_point_years: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StandardFormulaReport {
    /// Discounted future profits of the unstressed projection.
    pub pvofp_det: f64,
    pub scenarios: Vec<ScenarioOutcome>,
    /// Worst of the three lapse scenarios, floored at zero.
    pub lapse_scr: f64,
    pub mortality_scr: f64,
    pub catastrophe_scr: f64,
    pub correlation: f64,
    pub scr: f64,
}

/// Full standard-formula computation: the five stressed revaluations, the
/// floored sub-requirements, and the square-root aggregate.
pub fn standard_formula_scr(
    portfolio: &Portfolio,
    assumptions: &AssumptionSet,
    magnitudes: &StressMagnitudes,
    correlation: f64,
) -> Result<StandardFormulaReport> {
    let cp = CompiledPortfolio::compile(portfolio, assumptions)?;
    let pvofp_det = present_value(&cp.project(), assumptions)?;

    let mut scenarios = Vec::with_capacity(5);
    for scenario in magnitudes.scenarios() {
        let (stressed, clips) = stressed_book(&cp, scenario);
        let pvofp = present_value(&stressed.project(), assumptions)?;
        scenarios.push(ScenarioOutcome {
            kind: scenario.kind,
            magnitude: scenario.magnitude,
            pvofp,
            clipped_point_years: clips,
        });
    }

    let loss = |kind: StressKind| -> f64 {
        scenarios
            .iter()
            .find(|s| s.kind == kind)
            .map(|s| pvofp_det - s.pvofp)
            .expect("all five scenarios are present")
    };
    let lapse_scr = loss(StressKind::LapseMass)
        .max(loss(StressKind::LapseUp))
        .max(loss(StressKind::LapseDown))
        .max(0.0);
    let mortality_scr = loss(StressKind::MortalityUp).max(0.0);
    let catastrophe_scr = loss(StressKind::Catastrophe).max(0.0);
    let scr = aggregate(lapse_scr, mortality_scr, catastrophe_scr, correlation);

    Ok(StandardFormulaReport {
        pvofp_det,
        scenarios,
        lapse_scr,
        mortality_scr,
        catastrophe_scr,
        correlation,
        scr,
    })
}
