//! Brute-force nested-simulation estimator of the one-year revaluation,
//! used to validate the regression approach on small instances.
//!
//! Outer paths fix the year-one driver states; for each, a set of inner
//! continuations re-simulates years two onward conditionally on those
//! states. The trend and lapse diffusions continue from their year-one
//! Brownian positions, calamity draws are fresh, and the basis factor is
//! pinned per outer path — it models a level mis-estimation, so the oracle
//! treats it as revealed, which makes the oracle an upper bound on the
//! information available after one year. The average discounted deviation
//! over inner runs plus the outer experience variance gives one own-funds
//! sample per outer path.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::drivers::{
    assemble_path, draw_basis, draw_calamity, geometric_mean_one_continuation, DriverModels,
};
use crate::error::{Error, Result};
use crate::lsmc::{risk_measures, OwnFundsDistribution, RiskMeasureReport};
use crate::portfolio::{AssumptionSet, CompiledPortfolio, Portfolio};
use crate::projection::project_stochastic_compiled;
use crate::rng::{substream, DriverStream, StreamDomain};

#[derive(Debug, Clone, Copy)]
pub struct NestedConfig {
    pub n_outer: usize,
    pub n_inner: usize,
    pub seed: u64,
    /// Wall-clock budget; exceeding it aborts with the completed count.
    pub time_budget: Option<Duration>,
}

#[derive(Debug, Clone)]
pub struct NestedReport {
    pub risk: RiskMeasureReport,
    pub n_outer: usize,
    pub n_inner: usize,
    pub seed: u64,
}

/// Year-one driver states of one outer path.
struct OuterState {
    trend_w1: f64,
    lapse_w1: f64,
    basis: f64,
    trend_1: f64,
    af_lapse_1: f64,
    calamity_1: f64,
}

fn draw_outer_state(models: &DriverModels, seed: u64, outer: u64) -> OuterState {
    let mut trend_rng = substream(seed, StreamDomain::NestedOuter, DriverStream::Trend, 0, outer);
    let mut basis_rng = substream(seed, StreamDomain::NestedOuter, DriverStream::Basis, 0, outer);
    let mut calamity_rng =
        substream(seed, StreamDomain::NestedOuter, DriverStream::Calamity, 0, outer);
    let mut lapse_rng = substream(seed, StreamDomain::NestedOuter, DriverStream::Lapse, 0, outer);

    let trend_w1: f64 = StandardNormal.sample(&mut trend_rng);
    let lapse_w1: f64 = StandardNormal.sample(&mut lapse_rng);
    let s_t = models.trend.sigma;
    let s_l = models.lapse.sigma;
    OuterState {
        trend_w1,
        lapse_w1,
        basis: draw_basis(&models.basis, &mut basis_rng),
        trend_1: (s_t * trend_w1 - s_t * s_t * 0.5).exp(),
        af_lapse_1: (s_l * lapse_w1 - s_l * s_l * 0.5).exp(),
        calamity_1: draw_calamity(&models.calamity, 1, &mut calamity_rng)[0],
    }
}

/// One conditional continuation: years 2..=horizon re-simulated from the
/// outer year-one states, assembled into a full path and projected.
#[allow(clippy::too_many_arguments)]
fn inner_continuation(
    cp: &CompiledPortfolio,
    models: &DriverModels,
    assumptions: &AssumptionSet,
    outer_state: &OuterState,
    seed: u64,
    outer: u64,
    inner: u64,
) -> (f64, f64, u64) {
    let horizon = assumptions.horizon();
    let mut trend_rng = substream(
        seed,
        StreamDomain::NestedInner,
        DriverStream::Trend,
        outer,
        inner,
    );
    let mut calamity_rng = substream(
        seed,
        StreamDomain::NestedInner,
        DriverStream::Calamity,
        outer,
        inner,
    );
    let mut lapse_rng = substream(
        seed,
        StreamDomain::NestedInner,
        DriverStream::Lapse,
        outer,
        inner,
    );

    let mut trend = Vec::with_capacity(horizon);
    trend.push(outer_state.trend_1);
    trend.extend(geometric_mean_one_continuation(
        models.trend.sigma,
        1,
        outer_state.trend_w1,
        horizon,
        &mut trend_rng,
    ));
    let mut af_lapse = Vec::with_capacity(horizon);
    af_lapse.push(outer_state.af_lapse_1);
    af_lapse.extend(geometric_mean_one_continuation(
        models.lapse.sigma,
        1,
        outer_state.lapse_w1,
        horizon,
        &mut lapse_rng,
    ));
    let mut calamity = Vec::with_capacity(horizon);
    calamity.push(outer_state.calamity_1);
    calamity.extend(draw_calamity(&models.calamity, horizon - 1, &mut calamity_rng));

    let path = assemble_path(
        trend,
        outer_state.basis,
        calamity,
        af_lapse,
        models,
        assumptions.aggregate_q(),
    );
    let projected = project_stochastic_compiled(cp, &path).expect("horizons match by construction");
    let ncf = &projected.cashflow.ncf;
    let delta = &cp.discount()[..];
    let y1 = delta[0] * ncf[0];
    let rest: f64 = ncf.iter().zip(delta).skip(1).map(|(n, d)| d * n).sum();
    (y1, rest, projected.clip_events)
}

/// Nested estimate of the capital figure.
///
/// Outer paths run in parallel in fixed chunks; inner runs are sequential
/// per outer path with substreams keyed by `(seed, outer, inner)`, so the
/// result is independent of thread count. The time budget is checked
/// between chunks.
pub fn nested_scr(
    portfolio: &Portfolio,
    assumptions: &AssumptionSet,
    models: &DriverModels,
    cfg: &NestedConfig,
    level: f64,
) -> Result<NestedReport> {
    if cfg.n_outer < 2 || cfg.n_inner < 1 {
        return Err(Error::InvalidParameter(format!(
            "nested run needs n_outer >= 2 and n_inner >= 1, got {} and {}",
            cfg.n_outer, cfg.n_inner
        )));
    }
    let cp = CompiledPortfolio::compile(portfolio, assumptions)?;
    let be = cp.project();
    let delta = assumptions.discount();
    let c1 = delta[0] * be.ncf[0];
    let c_rest: f64 = be.ncf.iter().zip(delta).skip(1).map(|(n, d)| d * n).sum();

    let started = Instant::now();
    const CHUNK: usize = 64;
    let mut samples = Vec::with_capacity(cfg.n_outer);
    let outer_indices: Vec<u64> = (0..cfg.n_outer as u64).collect();
    for chunk in outer_indices.chunks(CHUNK) {
        if let Some(budget) = cfg.time_budget {
            if started.elapsed() > budget {
                return Err(Error::BudgetExceeded {
                    completed: samples.len(),
                    total: cfg.n_outer,
                });
            }
        }
        let chunk_samples: Vec<f64> = chunk
            .par_iter()
            .map(|&outer| {
                let state = draw_outer_state(models, cfg.seed, outer);
                let mut mean_rest = 0.0;
                let mut ev = 0.0;
                for inner in 0..cfg.n_inner as u64 {
                    let (y1, rest, _clips) = inner_continuation(
                        &cp,
                        models,
                        assumptions,
                        &state,
                        cfg.seed,
                        outer,
                        inner,
                    );
                    if inner == 0 {
                        // year one depends only on outer state: identical
                        // across inner runs
                        ev = y1 - c1;
                    }
                    mean_rest += rest - c_rest;
                }
                ev + mean_rest / cfg.n_inner as f64
            })
            .collect();
        samples.extend(chunk_samples);
    }

    let risk = risk_measures(&OwnFundsDistribution { samples }, level)?;
    Ok(NestedReport {
        risk,
        n_outer: cfg.n_outer,
        n_inner: cfg.n_inner,
        seed: cfg.seed,
    })
}
