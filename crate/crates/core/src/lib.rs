//! One-year solvency capital for life portfolios.
//!
//! The engine projects a book of model points under simulated mortality and
//! lapse scenarios, regresses the discounted revaluation on first-year
//! experience, and reads the capital requirement off the resulting
//! own-funds distribution. The regulatory standard formula is computed from
//! the same inputs for comparison, and a nested-simulation estimator
//! validates the regression approach on small instances.
//!
//! Everything is reproducible: paths are pure functions of `(seed, index)`,
//! so results are independent of thread count.

pub mod drivers;
pub mod error;
pub mod io;
pub mod lsmc;
pub mod nested;
pub mod portfolio;
pub mod projection;
pub mod rng;
pub mod standard_formula;
pub mod stats;
pub mod synthetic;

pub use drivers::{
    funnel, simulate_path, simulate_paths, AdjustmentFactorPath, BasisRiskModel, CalamityModel,
    DriverModels, FunnelComponent, FunnelTable, LapseDriverModel, TrendModel,
    DEFAULT_FUNNEL_QUANTILES,
};
pub use error::{Error, Result};
pub use lsmc::{
    fit, fit_with, life_expectancy, life_expectancy_regression, own_funds_distribution,
    risk_measures, LifeExpectancyResult, OwnFundsDistribution, RegressionBasis, RegressionResult,
    RiskMeasureReport, StdErrorKind,
};
pub use nested::{nested_scr, NestedConfig, NestedReport};
pub use portfolio::{
    present_value, project_best_estimate, AssumptionSet, CashflowVector, CompiledPortfolio,
    ModelPoint, MortalityAssumption, MortalityTable, Portfolio,
};
pub use projection::{
    build_batch, build_batch_streamed, project_stochastic, project_stochastic_compiled,
    CenteringMode, RegressorLayout, SimulationBatch, StochasticCashflows,
};
pub use standard_formula::{
    aggregate, apply_stress, standard_formula_scr, StandardFormulaReport, StressKind,
    StressMagnitudes, StressScenario, STANDARD_CORRELATION,
};
