//! Calibration and simulation of the stochastic risk drivers.
//!
//! Four sources of deviation from best estimate are modelled:
//!
//! * **trend** — mis-estimation of the long-term mortality level, a mean-one
//!   geometric Brownian motion calibrated to a quantile anchor;
//! * **basis** — a level mismatch between portfolio and population
//!   mortality (e.g. an unknown smoker share), a mean-one lognormal factor
//!   drawn once per path;
//! * **calamity** — short-term catastrophic excess mortality, an absolute
//!   annual rate with a Pareto tail calibrated to two quantile anchors;
//! * **lapse** — a mean-one geometric Brownian factor on lapse rates.
//!
//! The drivers combine into a per-year mortality multiplier
//!
//! ```text
//! af_mort(t) = trend(t) * basis + (calamity(t) - trend(t) * basis * mean_load) / q(t)
//! ```
//!
//! where `q(t)` is the portfolio-level mortality curve, understood to
//! already include the mean calamity load. Each factor has mean exactly one
//! by construction, which is what lets the downstream regression run
//! without an intercept.

use rand::Rng;
use rand_distr::{Distribution, Pareto, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::portfolio::AssumptionSet;
use crate::rng::{substream, DriverStream, StreamDomain};
use crate::stats::{mean, quantile_midpoint};

/// Mean-one geometric Brownian multiplier on the mortality level.
///
/// `sigma` is the per-√year volatility of the log factor. Zero is permitted
/// for degenerate/diagnostic runs; calibration always yields a positive
/// value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendModel {
    pub sigma: f64,
}

impl TrendModel {
    /// Solve `sigma` so that the factor's `target_quantile` at year
    /// `at_year` equals `target_factor`:
    ///
    /// ```text
    /// exp(sigma * z * sqrt(at_year) - sigma^2 * at_year / 2) = target_factor
    /// ```
    ///
    /// The smaller positive root of the quadratic in `sigma` is taken: the
    /// larger root describes a regime where extra volatility *lowers* the
    /// upper quantile through the mean correction.
    pub fn calibrate(target_quantile: f64, target_factor: f64, at_year: usize) -> Result<Self> {
        if !(target_quantile > 0.5 && target_quantile < 1.0) {
            return Err(Error::Calibration(format!(
                "target quantile must be in (0.5, 1), got {target_quantile}"
            )));
        }
        if !(target_factor > 1.0) {
            return Err(Error::Calibration(format!(
                "target factor must exceed 1, got {target_factor}"
            )));
        }
        if at_year == 0 {
            return Err(Error::Calibration("anchor year must be positive".into()));
        }
        let z = normal_quantile(target_quantile);
        let tau = at_year as f64;
        // (tau/2) s^2 - z sqrt(tau) s + ln(factor) = 0
        let a = tau / 2.0;
        let b = -z * tau.sqrt();
        let c = target_factor.ln();
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Err(Error::Calibration(format!(
                "quantile target {target_factor} at year {at_year} is unreachable: \
                 the lognormal quantile peaks below it for every volatility"
            )));
        }
        let sigma = (-b - disc.sqrt()) / (2.0 * a);
        Ok(TrendModel { sigma })
    }
}

/// Catastrophic excess mortality, an absolute annual rate added on top of
/// the trend-adjusted base mortality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CalamityModel {
    /// Pareto-tailed annual draws with shape `alpha > 1` and scale `xm`.
    Pareto { alpha: f64, xm: f64 },
    /// Every year carries exactly `rate`; used for degenerate runs where
    /// the stochastic mortality adjustment must collapse to one.
    Fixed { rate: f64 },
}

impl CalamityModel {
    /// Solve shape and scale so the distribution passes through two
    /// quantile anchors `(q_a, x_a)` and `(q_b, x_b)`:
    ///
    /// ```text
    /// alpha = ln((1 - q_a) / (1 - q_b)) / ln(x_b / x_a)
    /// xm    = x_a * (1 - q_a)^(1 / alpha)
    /// ```
    pub fn calibrate(q_a: f64, x_a: f64, q_b: f64, x_b: f64) -> Result<Self> {
        if !(q_a > 0.0 && q_a < q_b && q_b < 1.0) {
            return Err(Error::Calibration(format!(
                "quantile anchors must satisfy 0 < q_a < q_b < 1, got {q_a}, {q_b}"
            )));
        }
        if !(x_a > 0.0 && x_a < x_b) {
            return Err(Error::Calibration(format!(
                "excess-rate anchors must satisfy 0 < x_a < x_b, got {x_a}, {x_b}"
            )));
        }
        let alpha = ((1.0 - q_a) / (1.0 - q_b)).ln() / (x_b / x_a).ln();
        if alpha <= 1.0 {
            return Err(Error::Calibration(format!(
                "anchors imply shape {alpha} <= 1; the mean excess rate would not exist"
            )));
        }
        let xm = x_a * (1.0 - q_a).powf(1.0 / alpha);
        Ok(CalamityModel::Pareto { alpha, xm })
    }

    /// Standard anchors: the 98% quantile at 0.4 per mille and the 99.9%
    /// quantile at 5 per mille of annual excess mortality.
    pub fn calibrate_default() -> Result<Self> {
        Self::calibrate(0.98, 0.0004, 0.999, 0.005)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            CalamityModel::Pareto { alpha, xm } => xm * (1.0 - p).powf(-1.0 / alpha),
            CalamityModel::Fixed { rate } => rate,
        }
    }

    /// Expected annual excess rate; assumed to be already contained in the
    /// best-estimate mortality curve.
    pub fn mean_load(&self) -> f64 {
        match *self {
            CalamityModel::Pareto { alpha, xm } => alpha * xm / (alpha - 1.0),
            CalamityModel::Fixed { rate } => rate,
        }
    }

    /// The calibrated model with draws replaced by their mean.
    pub fn as_deterministic(&self) -> CalamityModel {
        CalamityModel::Fixed {
            rate: self.mean_load(),
        }
    }
}

/// Mean-one lognormal level factor for portfolio-vs-population mismatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisRiskModel {
    /// Standard deviation of the multiplicative factor.
    pub sigma: f64,
}

impl BasisRiskModel {
    /// Calibrate from an assumed smoker-share mismatch: with smoker
    /// mortality at `multiplier` times non-smoker mortality, the factor's
    /// standard deviation is the relative increase in portfolio mortality
    /// when the share moves from `share_be` to `share_adverse` (the
    /// non-smoker base rate cancels).
    pub fn from_smoker_shares(share_be: f64, share_adverse: f64, multiplier: f64) -> Result<Self> {
        for (name, s) in [("best-estimate", share_be), ("adverse", share_adverse)] {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Calibration(format!(
                    "{name} smoker share must be in [0, 1], got {s}"
                )));
            }
        }
        if share_adverse < share_be {
            return Err(Error::Calibration(format!(
                "adverse share {share_adverse} must be at least the best-estimate share {share_be}"
            )));
        }
        if !(multiplier > 0.0) {
            return Err(Error::Calibration(format!(
                "smoker multiplier must be positive, got {multiplier}"
            )));
        }
        let m1 = multiplier - 1.0;
        let sigma = (1.0 + share_adverse * m1) / (1.0 + share_be * m1) - 1.0;
        Ok(BasisRiskModel { sigma })
    }

    /// Lognormal log-space standard deviation for a mean-one factor with
    /// standard deviation `sigma`.
    fn log_sigma(&self) -> f64 {
        (1.0 + self.sigma * self.sigma).ln().sqrt()
    }
}

/// Mean-one geometric Brownian multiplier on lapse rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LapseDriverModel {
    pub sigma: f64,
}

/// The four driver models bundled for simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverModels {
    pub trend: TrendModel,
    pub calamity: CalamityModel,
    pub basis: BasisRiskModel,
    pub lapse: LapseDriverModel,
}

/// One simulated realization of the drivers over the projection horizon,
/// indexed by year (`[0]` is year one).
///
/// `af_mort` and `af_lapse` are the multipliers applied to best-estimate
/// rates. The components `trend`, `basis` and `calamity` are retained for
/// diagnostics. `floored_af_years` counts years where the combined mortality
/// adjustment had to be floored at zero (possible only when the aggregate
/// rate falls below the calamity mean load).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustmentFactorPath {
    pub af_mort: Vec<f64>,
    pub af_lapse: Vec<f64>,
    pub trend: Vec<f64>,
    pub basis: f64,
    pub calamity: Vec<f64>,
    pub calamity_mean: f64,
    pub floored_af_years: u32,
}

impl AdjustmentFactorPath {
    /// The identity path: every factor exactly one, no calamity.
    pub fn unit(horizon: usize) -> Self {
        AdjustmentFactorPath {
            af_mort: vec![1.0; horizon],
            af_lapse: vec![1.0; horizon],
            trend: vec![1.0; horizon],
            basis: 1.0,
            calamity: vec![0.0; horizon],
            calamity_mean: 0.0,
            floored_af_years: 0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.af_mort.len()
    }
}

/// Simulate the driver path with the given index. Paths are a pure function
/// of `(seed, index)`, independent of how many are drawn or on which thread.
pub fn simulate_path(
    models: &DriverModels,
    assumptions: &AssumptionSet,
    seed: u64,
    index: u64,
) -> AdjustmentFactorPath {
    let horizon = assumptions.horizon();
    let aggregate_q = assumptions.aggregate_q();

    let mut trend_rng = substream(seed, StreamDomain::Path, DriverStream::Trend, 0, index);
    let mut basis_rng = substream(seed, StreamDomain::Path, DriverStream::Basis, 0, index);
    let mut calamity_rng = substream(seed, StreamDomain::Path, DriverStream::Calamity, 0, index);
    let mut lapse_rng = substream(seed, StreamDomain::Path, DriverStream::Lapse, 0, index);

    let trend = geometric_mean_one_path(models.trend.sigma, horizon, 0.0, &mut trend_rng);
    let af_lapse = geometric_mean_one_path(models.lapse.sigma, horizon, 0.0, &mut lapse_rng);
    let basis = draw_basis(&models.basis, &mut basis_rng);
    let calamity = draw_calamity(&models.calamity, horizon, &mut calamity_rng);

    assemble_path(trend, basis, calamity, af_lapse, models, aggregate_q)
}

/// Simulate `n_sims` paths in parallel, ordered by index.
pub fn simulate_paths(
    models: &DriverModels,
    assumptions: &AssumptionSet,
    n_sims: usize,
    seed: u64,
) -> Vec<AdjustmentFactorPath> {
    (0..n_sims as u64)
        .into_par_iter()
        .map(|i| simulate_path(models, assumptions, seed, i))
        .collect()
}

/// `exp(sigma * W(t) - sigma^2 * t / 2)` for `t = start_year+1 ..=
/// start_year+years`, with the Brownian motion started at `w_start`.
pub(crate) fn geometric_mean_one_path(
    sigma: f64,
    years: usize,
    w_start: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(years);
    let mut w = w_start;
    for t in 1..=years {
        let z: f64 = StandardNormal.sample(rng);
        w += z;
        out.push((sigma * w - sigma * sigma * (t as f64) / 2.0).exp());
    }
    out
}

/// Continue a geometric mean-one path from a known Brownian state at
/// `from_year`, producing years `from_year+1 ..= horizon`.
pub(crate) fn geometric_mean_one_continuation(
    sigma: f64,
    from_year: usize,
    w_at_from: f64,
    horizon: usize,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(horizon - from_year);
    let mut w = w_at_from;
    for t in from_year + 1..=horizon {
        let z: f64 = StandardNormal.sample(rng);
        w += z;
        out.push((sigma * w - sigma * sigma * (t as f64) / 2.0).exp());
    }
    out
}

pub(crate) fn draw_basis(model: &BasisRiskModel, rng: &mut impl Rng) -> f64 {
    let s = model.log_sigma();
    if s == 0.0 {
        return 1.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    (s * z - s * s / 2.0).exp()
}

pub(crate) fn draw_calamity(model: &CalamityModel, years: usize, rng: &mut impl Rng) -> Vec<f64> {
    match *model {
        CalamityModel::Pareto { alpha, xm } => {
            let dist = Pareto::new(xm, alpha).expect("validated at calibration");
            (0..years).map(|_| dist.sample(rng)).collect()
        }
        CalamityModel::Fixed { rate } => vec![rate; years],
    }
}

/// Combine the component draws into the mortality and lapse multipliers.
///
/// The mortality multiplier is evaluated as
/// `tb + (calamity - tb * mean_load) / q` — algebraically identical to
/// `(tb * (q - mean_load) + calamity) / q` but exact when `tb == 1` and the
/// calamity draw equals its mean, so degenerate models reproduce the best
/// estimate without rounding residue.
pub(crate) fn assemble_path(
    trend: Vec<f64>,
    basis: f64,
    calamity: Vec<f64>,
    af_lapse: Vec<f64>,
    models: &DriverModels,
    aggregate_q: &[f64],
) -> AdjustmentFactorPath {
    let mean_load = models.calamity.mean_load();
    let mut floored = 0u32;
    let af_mort = trend
        .iter()
        .zip(&calamity)
        .zip(aggregate_q)
        .map(|((&tr, &c), &q)| {
            let tb = tr * basis;
            let af = if q > 0.0 { tb + (c - tb * mean_load) / q } else { tb };
            if af < 0.0 {
                floored += 1;
                0.0
            } else {
                af
            }
        })
        .collect();
    AdjustmentFactorPath {
        af_mort,
        af_lapse,
        trend,
        basis,
        calamity,
        calamity_mean: mean_load,
        floored_af_years: floored,
    }
}

/// Per-year empirical quantiles of one path component across a set of
/// simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunnelComponent {
    Mortality,
    Lapse,
    Trend,
}

impl FunnelComponent {
    pub fn name(&self) -> &'static str {
        match self {
            FunnelComponent::Mortality => "mortality",
            FunnelComponent::Lapse => "lapse",
            FunnelComponent::Trend => "trend",
        }
    }

    fn series<'a>(&self, path: &'a AdjustmentFactorPath) -> &'a [f64] {
        match self {
            FunnelComponent::Mortality => &path.af_mort,
            FunnelComponent::Lapse => &path.af_lapse,
            FunnelComponent::Trend => &path.trend,
        }
    }
}

/// Quantile levels matching the usual fan display: outer 5%/95%, inner
/// 25%/75%.
pub const DEFAULT_FUNNEL_QUANTILES: [f64; 4] = [0.05, 0.25, 0.75, 0.95];

#[derive(Debug, Clone)]
pub struct FunnelRow {
    pub year: usize,
    pub mean: f64,
    /// One value per requested quantile, in the order requested.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FunnelTable {
    pub component: FunnelComponent,
    pub quantiles: Vec<f64>,
    pub rows: Vec<FunnelRow>,
}

impl FunnelTable {
    /// `quantile_hi - quantile_lo` width averaged over years; a scalar
    /// summary of how far the fan opens.
    pub fn mean_width(&self, lo: f64, hi: f64) -> Option<f64> {
        let i_lo = self.quantiles.iter().position(|&q| q == lo)?;
        let i_hi = self.quantiles.iter().position(|&q| q == hi)?;
        let widths: Vec<f64> = self
            .rows
            .iter()
            .map(|r| r.values[i_hi] - r.values[i_lo])
            .collect();
        Some(mean(&widths))
    }
}

/// Empirical per-year quantile fan of a path component. Uses the
/// midpoint-averaging estimator.
pub fn funnel(
    paths: &[AdjustmentFactorPath],
    component: FunnelComponent,
    quantiles: &[f64],
) -> Result<FunnelTable> {
    if paths.is_empty() {
        return Err(Error::InvalidParameter(
            "funnel needs at least one path".into(),
        ));
    }
    for &q in quantiles {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "funnel quantiles must lie in (0, 1), got {q}"
            )));
        }
    }
    let horizon = paths[0].horizon();
    let mut rows = Vec::with_capacity(horizon);
    let mut column = vec![0.0_f64; paths.len()];
    for t0 in 0..horizon {
        for (i, p) in paths.iter().enumerate() {
            column[i] = component.series(p)[t0];
        }
        let m = mean(&column);
        column.sort_by(|a, b| a.partial_cmp(b).expect("factor values are finite"));
        let values = quantiles
            .iter()
            .map(|&q| quantile_midpoint(&column, q))
            .collect();
        rows.push(FunnelRow {
            year: t0 + 1,
            mean: m,
            values,
        });
    }
    Ok(FunnelTable {
        component,
        quantiles: quantiles.to_vec(),
        rows,
    })
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::ContinuousCDF;
    statrs::distribution::Normal::new(0.0, 1.0)
        .expect("unit normal")
        .inverse_cdf(p)
}
