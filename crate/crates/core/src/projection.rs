//! Applies simulated driver paths to the book and assembles the regression
//! inputs: first-year factor realizations against discounted future
//! cash-flow deviations.
//!
//! One simulated outcome per path carries
//!
//! * `x` — the first-year regressors,
//! * `ev` — the discounted first-year deviation from best estimate (the
//!   experience variance),
//! * `y` — the discounted deviation of years 2..T (the response the
//!   regression approximates).
//!
//! Deviations are measured against the best-estimate projection by default;
//! the in-force count drifts implicitly as stochastic decrements compound,
//! which realizes the volume adjustment without carrying a separate factor.

use rayon::prelude::*;

use crate::drivers::{simulate_path, AdjustmentFactorPath, DriverModels};
use crate::error::{Error, Result};
use crate::portfolio::{
    advance_lives, clip_decrements, death_cashflow, premium_cashflow, AssumptionSet,
    CashflowVector, CompiledPortfolio, Portfolio,
};

/// Which regressors the batch exposes.
///
/// Only realized mortality and lapse experience are observable from one year
/// of portfolio data, so the default is those two combined factors. The
/// latent layout exposes the underlying components instead, for diagnostic
/// runs that plot the response against each driver separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressorLayout {
    /// `af_mort(1) - 1`, `af_lapse(1) - 1`.
    Observable,
    /// `trend(1) - 1`, `basis - 1`, `calamity(1) - mean load`,
    /// `af_lapse(1) - 1`.
    Latent,
}

impl RegressorLayout {
    pub fn names(&self) -> Vec<String> {
        match self {
            RegressorLayout::Observable => vec!["mortality".into(), "lapse".into()],
            RegressorLayout::Latent => vec![
                "trend".into(),
                "basis".into(),
                "calamity".into(),
                "lapse".into(),
            ],
        }
    }

    pub fn width(&self) -> usize {
        match self {
            RegressorLayout::Observable => 2,
            RegressorLayout::Latent => 4,
        }
    }

    fn fill(&self, path: &AdjustmentFactorPath, out: &mut Vec<f64>) {
        match self {
            RegressorLayout::Observable => {
                out.push(path.af_mort[0] - 1.0);
                out.push(path.af_lapse[0] - 1.0);
            }
            RegressorLayout::Latent => {
                out.push(path.trend[0] - 1.0);
                out.push(path.basis - 1.0);
                out.push(path.calamity[0] - path.calamity_mean);
                out.push(path.af_lapse[0] - 1.0);
            }
        }
    }
}

/// What the per-year expectation in `y` and `ev` is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenteringMode {
    /// The deterministic best-estimate projection. The stochastic factors
    /// have mean one, so this matches the true expectation up to the
    /// second-order volume effect; the residual bias is checked by test.
    BestEstimate,
    /// The across-path sample mean of each year's net cash flow.
    SampleMean,
}

/// A path's stochastic cash flows plus how often combined decrements had to
/// be clipped to stay within one (counted per model point and year).
#[derive(Debug, Clone)]
pub struct StochasticCashflows {
    pub cashflow: CashflowVector,
    pub clip_events: u64,
}

/// Project the compiled book under one driver path.
pub fn project_stochastic_compiled(
    cp: &CompiledPortfolio,
    path: &AdjustmentFactorPath,
) -> Result<StochasticCashflows> {
    if path.horizon() != cp.horizon() {
        return Err(Error::HorizonMismatch {
            left: path.horizon(),
            right: cp.horizon(),
        });
    }
    let mut premium = vec![0.0_f64; cp.horizon()];
    let mut death = vec![0.0_f64; cp.horizon()];
    let mut clips = u64::from(path.floored_af_years);
    for point in &cp.points {
        let mut l = point.lives;
        for (t0, (&q_be, &w_be)) in point.q.iter().zip(&point.w).enumerate() {
            let mut q = path.af_mort[t0] * q_be;
            let mut w = path.af_lapse[t0] * w_be;
            if clip_decrements(&mut q, &mut w) {
                clips += 1;
            }
            premium[t0] += premium_cashflow(l, point.premium);
            death[t0] += death_cashflow(l, q, point.sum_assured);
            l = advance_lives(l, q, w);
        }
    }
    Ok(StochasticCashflows {
        cashflow: CashflowVector::from_components(premium, death),
        clip_events: clips,
    })
}

/// Convenience wrapper that compiles the book first.
pub fn project_stochastic(
    portfolio: &Portfolio,
    assumptions: &AssumptionSet,
    path: &AdjustmentFactorPath,
) -> Result<StochasticCashflows> {
    let cp = CompiledPortfolio::compile(portfolio, assumptions)?;
    project_stochastic_compiled(&cp, path)
}

/// Simulated outcomes in flat, index-addressed storage.
#[derive(Debug, Clone)]
pub struct SimulationBatch {
    n: usize,
    width: usize,
    names: Vec<String>,
    /// Row-major `n x width` regressor matrix.
    x: Vec<f64>,
    ev: Vec<f64>,
    y: Vec<f64>,
    /// First-year factor realizations per path, kept for exports
    /// independently of the regressor layout.
    af_mort_1: Vec<f64>,
    af_lapse_1: Vec<f64>,
    pub seed: Option<u64>,
    pub horizon: usize,
    pub layout: RegressorLayout,
    pub centering: CenteringMode,
    /// Clipped (model point, year) pairs summed over paths.
    pub clip_events: u64,
    /// Total (model point, year) pairs over paths: the clip denominator.
    pub clip_opportunities: u64,
}

/// Share of clipped point-years above which simulation inputs should be
/// treated as mis-calibrated.
pub const CLIP_WARN_SHARE: f64 = 0.001;

/// Borrowed view of one path's outcome.
#[derive(Debug, Clone, Copy)]
pub struct SimulatedOutcome<'a> {
    pub regressors: &'a [f64],
    pub ev: f64,
    pub y: f64,
}

impl SimulationBatch {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn regressor_names(&self) -> &[String] {
        &self.names
    }

    pub fn outcome(&self, p: usize) -> SimulatedOutcome<'_> {
        SimulatedOutcome {
            regressors: &self.x[p * self.width..(p + 1) * self.width],
            ev: self.ev[p],
            y: self.y[p],
        }
    }

    pub fn regressors(&self) -> &[f64] {
        &self.x
    }

    pub fn ev(&self) -> &[f64] {
        &self.ev
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn af_mort_1(&self) -> &[f64] {
        &self.af_mort_1
    }

    pub fn af_lapse_1(&self) -> &[f64] {
        &self.af_lapse_1
    }

    pub fn clip_share(&self) -> f64 {
        if self.clip_opportunities == 0 {
            0.0
        } else {
            self.clip_events as f64 / self.clip_opportunities as f64
        }
    }

    /// True when clipping exceeded [`CLIP_WARN_SHARE`]; the batch is still
    /// usable but the calibration deserves a look.
    pub fn clip_warning(&self) -> bool {
        self.clip_share() > CLIP_WARN_SHARE
    }
}

#[cfg(test)]
impl SimulationBatch {
    /// Hand-assembled batch for estimator tests; responses and regressors
    /// bypass the projection.
    pub(crate) fn for_tests(x: Vec<Vec<f64>>, y: Vec<f64>, names: Vec<String>) -> Self {
        let n = x.len();
        assert_eq!(n, y.len());
        let width = names.len();
        let mut flat = Vec::with_capacity(n * width);
        for row in &x {
            assert_eq!(row.len(), width);
            flat.extend_from_slice(row);
        }
        SimulationBatch {
            n,
            width,
            names,
            x: flat,
            ev: vec![0.0; n],
            y,
            af_mort_1: vec![1.0; n],
            af_lapse_1: vec![1.0; n],
            seed: None,
            horizon: 1,
            layout: RegressorLayout::Observable,
            centering: CenteringMode::BestEstimate,
            clip_events: 0,
            clip_opportunities: 0,
        }
    }

    pub(crate) fn set_ev_for_tests(&mut self, ev: Vec<f64>) {
        assert_eq!(ev.len(), self.n);
        self.ev = ev;
    }
}

/// Per-path pieces that are independent of the centering term: regressors,
/// the discounted year-one flow, the discounted later flows, and the raw
/// per-year net cash flows when sample-mean centering needs them.
struct PathPieces {
    regressors: Vec<f64>,
    af_mort_1: f64,
    af_lapse_1: f64,
    discounted_y1: f64,
    discounted_rest: f64,
    clip_events: u64,
    ncf: Option<Vec<f64>>,
}

fn path_pieces(
    cp: &CompiledPortfolio,
    path: &AdjustmentFactorPath,
    layout: RegressorLayout,
    keep_ncf: bool,
) -> Result<PathPieces> {
    let projected = project_stochastic_compiled(cp, path)?;
    let ncf = &projected.cashflow.ncf;
    let delta = &cp.discount;
    let discounted_y1 = delta[0] * ncf[0];
    let discounted_rest = ncf
        .iter()
        .zip(delta)
        .skip(1)
        .map(|(n, d)| d * n)
        .sum::<f64>();
    let mut regressors = Vec::with_capacity(layout.width());
    layout.fill(path, &mut regressors);
    Ok(PathPieces {
        regressors,
        af_mort_1: path.af_mort[0],
        af_lapse_1: path.af_lapse[0],
        discounted_y1,
        discounted_rest,
        clip_events: projected.clip_events,
        ncf: keep_ncf.then(|| ncf.clone()),
    })
}

/// The centering terms: discounted expected year-one flow and discounted
/// expected later flows.
fn centering_terms(expected_ncf: &[f64], discount: &[f64]) -> (f64, f64) {
    let c1 = discount[0] * expected_ncf[0];
    let c_rest = expected_ncf
        .iter()
        .zip(discount)
        .skip(1)
        .map(|(n, d)| d * n)
        .sum::<f64>();
    (c1, c_rest)
}

fn assemble_batch(
    pieces: Vec<PathPieces>,
    cp: &CompiledPortfolio,
    layout: RegressorLayout,
    centering: CenteringMode,
    seed: Option<u64>,
) -> SimulationBatch {
    let n = pieces.len();
    let expected_ncf = match centering {
        CenteringMode::BestEstimate => cp.project().ncf,
        CenteringMode::SampleMean => {
            // Sequential fold over the index-ordered paths: the sum order is
            // fixed, so the result cannot depend on thread count.
            let mut sums = vec![0.0_f64; cp.horizon()];
            for p in &pieces {
                let ncf = p.ncf.as_ref().expect("sample-mean centering keeps flows");
                for (s, v) in sums.iter_mut().zip(ncf) {
                    *s += v;
                }
            }
            sums.iter_mut().for_each(|s| *s /= n as f64);
            sums
        }
    };
    let (c1, c_rest) = centering_terms(&expected_ncf, &cp.discount);

    let width = layout.width();
    let mut x = Vec::with_capacity(n * width);
    let mut ev = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut af_mort_1 = Vec::with_capacity(n);
    let mut af_lapse_1 = Vec::with_capacity(n);
    let mut clip_events = 0u64;
    for p in pieces {
        x.extend_from_slice(&p.regressors);
        ev.push(p.discounted_y1 - c1);
        y.push(p.discounted_rest - c_rest);
        af_mort_1.push(p.af_mort_1);
        af_lapse_1.push(p.af_lapse_1);
        clip_events += p.clip_events;
    }
    let points = cp.points.len() as u64;
    SimulationBatch {
        n,
        width,
        names: layout.names(),
        x,
        ev,
        y,
        af_mort_1,
        af_lapse_1,
        seed,
        horizon: cp.horizon(),
        layout,
        centering,
        clip_events,
        clip_opportunities: n as u64 * points * cp.horizon() as u64,
    }
}

/// Build the regression inputs from already-simulated paths.
pub fn build_batch(
    portfolio: &Portfolio,
    assumptions: &AssumptionSet,
    paths: &[AdjustmentFactorPath],
    layout: RegressorLayout,
    centering: CenteringMode,
) -> Result<SimulationBatch> {
    if paths.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "a batch needs at least 2 paths, got {}",
            paths.len()
        )));
    }
    let cp = CompiledPortfolio::compile(portfolio, assumptions)?;
    let keep = centering == CenteringMode::SampleMean;
    let pieces = paths
        .par_iter()
        .map(|path| path_pieces(&cp, path, layout, keep))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_batch(pieces, &cp, layout, centering, None))
}

/// Simulate and project in one fused pass: each path is generated from
/// `(seed, index)`, projected, and reduced to its outcome without the full
/// path set ever being materialized. Produces exactly the same batch as
/// [`simulate_paths`](crate::drivers::simulate_paths) followed by
/// [`build_batch`].
pub fn build_batch_streamed(
    portfolio: &Portfolio,
    assumptions: &AssumptionSet,
    models: &DriverModels,
    n_sims: usize,
    seed: u64,
    layout: RegressorLayout,
    centering: CenteringMode,
) -> Result<SimulationBatch> {
    if n_sims < 2 {
        return Err(Error::InvalidParameter(format!(
            "a batch needs at least 2 paths, got {n_sims}"
        )));
    }
    let cp = CompiledPortfolio::compile(portfolio, assumptions)?;
    let keep = centering == CenteringMode::SampleMean;
    let pieces = (0..n_sims as u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_path(models, assumptions, seed, i);
            path_pieces(&cp, &path, layout, keep)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_batch(pieces, &cp, layout, centering, Some(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::{
        simulate_paths, BasisRiskModel, CalamityModel, DriverModels, LapseDriverModel, TrendModel,
    };
    use crate::portfolio::{project_best_estimate, ModelPoint};
    use approx::assert_relative_eq;

    fn book(lives: f64, sum: f64, premium: f64, term: usize) -> Portfolio {
        Portfolio::new(vec![ModelPoint {
            id: "mp1".into(),
            age: 40,
            lives,
            sum_assured: sum,
            annual_net_premium: premium,
            remaining_term: term,
        }])
    }

    fn flat(q: f64, w: f64, delta: f64, horizon: usize) -> AssumptionSet {
        AssumptionSet::from_aggregate(
            vec![q; horizon],
            vec![w; horizon],
            vec![delta; horizon],
        )
        .unwrap()
    }

    fn standard_models() -> DriverModels {
        DriverModels {
            trend: TrendModel::calibrate(0.95, 1.45, 40).unwrap(),
            calamity: CalamityModel::calibrate_default().unwrap(),
            basis: BasisRiskModel::from_smoker_shares(0.35, 0.39, 2.0).unwrap(),
            lapse: LapseDriverModel { sigma: 0.05 },
        }
    }

    #[test]
    fn unit_path_reproduces_the_best_estimate_bit_for_bit() {
        let pf = book(137.5, 2_000.0, 25.0, 12);
        let asm = flat(0.013, 0.047, 0.97, 12);
        let be = project_best_estimate(&pf, &asm).unwrap();
        let stoch =
            project_stochastic(&pf, &asm, &AdjustmentFactorPath::unit(12)).unwrap();
        assert_eq!(stoch.clip_events, 0);
        for t in 0..12 {
            assert_eq!(
                be.ncf[t].to_bits(),
                stoch.cashflow.ncf[t].to_bits(),
                "year {}: best estimate and unit-factor projection must agree bit-for-bit",
                t + 1
            );
        }
    }

    #[test]
    fn doubled_mortality_factor_matches_hand_arithmetic() {
        // one life, q = 0.01 doubled to 0.02, sum 1000, premium 10:
        // ncf = 10 - 0.02 * 1000 = -10
        let pf = book(1.0, 1_000.0, 10.0, 1);
        let asm = flat(0.01, 0.0, 1.0, 1);
        let mut path = AdjustmentFactorPath::unit(1);
        path.af_mort = vec![2.0];
        let out = project_stochastic(&pf, &asm, &path).unwrap();
        assert_relative_eq!(out.cashflow.ncf[0], -10.0, max_relative = 1e-15);
    }

    #[test]
    fn doubled_lapse_scales_premium_volume_by_the_survival_ratio() {
        let horizon = 6;
        let w = 0.08;
        let pf = book(100.0, 0.0, 10.0, horizon);
        let asm = flat(0.0, w, 1.0, horizon);
        let be = project_best_estimate(&pf, &asm).unwrap();
        let mut path = AdjustmentFactorPath::unit(horizon);
        path.af_lapse = vec![2.0; horizon];
        let stoch = project_stochastic(&pf, &asm, &path).unwrap();
        for t in 0..horizon {
            let ratio = ((1.0 - 2.0 * w) / (1.0 - w)).powi(t as i32);
            assert_relative_eq!(
                stoch.cashflow.premium[t] / be.premium[t],
                ratio,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn decrements_are_clipped_proportionally_and_counted() {
        let pf = book(10.0, 100.0, 1.0, 1);
        let asm = flat(0.5, 0.4, 1.0, 1);
        let mut path = AdjustmentFactorPath::unit(1);
        path.af_mort = vec![1.6]; // q* = 0.8, w* = 0.4 -> sum 1.2 -> scaled to 2/3, 1/3
        let out = project_stochastic(&pf, &asm, &path).unwrap();
        assert_eq!(out.clip_events, 1);
        let q_scaled = 0.8 / 1.2;
        assert_relative_eq!(
            out.cashflow.death[0],
            10.0 * q_scaled * 100.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn degenerate_paths_produce_identically_zero_outcomes() {
        let pf = book(50.0, 500.0, 8.0, 5);
        let asm = flat(0.012, 0.03, 0.98, 5);
        let paths: Vec<_> = (0..4).map(|_| AdjustmentFactorPath::unit(5)).collect();
        let batch = build_batch(
            &pf,
            &asm,
            &paths,
            RegressorLayout::Observable,
            CenteringMode::BestEstimate,
        )
        .unwrap();
        for p in 0..batch.len() {
            let o = batch.outcome(p);
            assert_eq!(o.ev, 0.0, "experience variance of the unit path");
            assert_eq!(o.y, 0.0, "response of the unit path");
            assert!(o.regressors.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn two_year_response_matches_hand_recursion_per_path() {
        let (lives, sum, prem) = (100.0, 1_000.0, 12.0);
        let (q, w, d2) = (0.01, 0.04, 0.96);
        let pf = book(lives, sum, prem, 2);
        let asm = AssumptionSet::from_aggregate(vec![q; 2], vec![w; 2], vec![0.98, d2]).unwrap();
        let models = standard_models();
        let paths = simulate_paths(&models, &asm, 8, 31);
        let batch = build_batch(
            &pf,
            &asm,
            &paths,
            RegressorLayout::Observable,
            CenteringMode::BestEstimate,
        )
        .unwrap();
        for (p, path) in paths.iter().enumerate() {
            // hand recursion: year-2 flow under the path vs best estimate
            let (q1, w1) = (path.af_mort[0] * q, path.af_lapse[0] * w);
            let (q2, _w2) = (path.af_mort[1] * q, path.af_lapse[1] * w);
            let l2 = lives * (1.0 - q1 - w1);
            let ncf2 = l2 * prem - l2 * q2 * sum;
            let l2_be = lives * (1.0 - q - w);
            let ncf2_be = l2_be * prem - l2_be * q * sum;
            let expected_y = d2 * (ncf2 - ncf2_be);
            assert_relative_eq!(batch.outcome(p).y, expected_y, max_relative = 1e-10);
        }
    }

    #[test]
    fn regressor_sample_mean_vanishes_within_monte_carlo_error() {
        let pf = book(100.0, 1_000.0, 12.0, 10);
        let asm = flat(0.01, 0.04, 0.98, 10);
        let models = standard_models();
        let batch = build_batch_streamed(
            &pf,
            &asm,
            &models,
            20_000,
            17,
            RegressorLayout::Observable,
            CenteringMode::BestEstimate,
        )
        .unwrap();
        for (j, name) in batch.regressor_names().iter().enumerate() {
            let col: Vec<f64> = (0..batch.len())
                .map(|p| batch.outcome(p).regressors[j])
                .collect();
            let m = crate::stats::mean(&col);
            let se = crate::stats::standard_error(&col);
            assert!(
                m.abs() < 3.0 * se,
                "regressor {name} mean {m} exceeds 3 SE ({se})"
            );
        }
    }

    #[test]
    fn streamed_batch_equals_paths_then_build() {
        let pf = book(80.0, 900.0, 11.0, 6);
        let asm = flat(0.015, 0.05, 0.97, 6);
        let models = standard_models();
        let seed = 77;
        let paths = simulate_paths(&models, &asm, 50, seed);
        let via_paths = build_batch(
            &pf,
            &asm,
            &paths,
            RegressorLayout::Latent,
            CenteringMode::BestEstimate,
        )
        .unwrap();
        let streamed = build_batch_streamed(
            &pf,
            &asm,
            &models,
            50,
            seed,
            RegressorLayout::Latent,
            CenteringMode::BestEstimate,
        )
        .unwrap();
        assert_eq!(via_paths.y(), streamed.y());
        assert_eq!(via_paths.ev(), streamed.ev());
        assert_eq!(via_paths.regressors(), streamed.regressors());
        assert_eq!(via_paths.clip_events, streamed.clip_events);
    }

    #[test]
    fn exposure_scaling_scales_outcomes_linearly() {
        let pf = book(60.0, 750.0, 9.0, 8);
        let asm = flat(0.02, 0.06, 0.96, 8);
        let models = standard_models();
        let paths = simulate_paths(&models, &asm, 40, 5);
        let base = build_batch(
            &pf,
            &asm,
            &paths,
            RegressorLayout::Observable,
            CenteringMode::BestEstimate,
        )
        .unwrap();
        let doubled = build_batch(
            &pf.scale_exposure(2.0),
            &asm,
            &paths,
            RegressorLayout::Observable,
            CenteringMode::BestEstimate,
        )
        .unwrap();
        for p in 0..base.len() {
            // doubling is a power-of-two scale: exact in floating point
            assert_eq!(doubled.outcome(p).y, 2.0 * base.outcome(p).y);
            assert_eq!(doubled.outcome(p).ev, 2.0 * base.outcome(p).ev);
        }
    }

    #[test]
    fn sample_mean_centering_zeroes_the_batch_means() {
        let pf = book(100.0, 1_000.0, 12.0, 6);
        let asm = flat(0.01, 0.04, 0.98, 6);
        let models = standard_models();
        let batch = build_batch_streamed(
            &pf,
            &asm,
            &models,
            2_000,
            13,
            RegressorLayout::Observable,
            CenteringMode::SampleMean,
        )
        .unwrap();
        // y + ev sums to the discounted total deviation from the sample
        // mean, which is zero by construction of the centering.
        let total: f64 = (0..batch.len())
            .map(|p| batch.outcome(p).y + batch.outcome(p).ev)
            .sum();
        assert!(
            (total / batch.len() as f64).abs() < 1e-8,
            "sample-mean centering must zero the mean total deviation, got {total}"
        );
    }

    #[test]
    fn batch_needs_two_paths() {
        let pf = book(1.0, 1.0, 1.0, 2);
        let asm = flat(0.0, 0.0, 1.0, 2);
        let paths = vec![AdjustmentFactorPath::unit(2)];
        assert!(matches!(
            build_batch(
                &pf,
                &asm,
                &paths,
                RegressorLayout::Observable,
                CenteringMode::BestEstimate
            ),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let pf = book(1.0, 1.0, 1.0, 2);
        let asm = flat(0.0, 0.0, 1.0, 2);
        let path = AdjustmentFactorPath::unit(3);
        assert!(matches!(
            project_stochastic(&pf, &asm, &path),
            Err(Error::HorizonMismatch { .. })
        ));
    }
}
