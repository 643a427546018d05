//! Least-squares estimation of the one-year revaluation and the risk
//! measures taken from it.
//!
//! The response — the discounted deviation of future net cash flows — is
//! regressed on the first-year factor realizations **without an intercept**:
//! the factors have mean one by construction, so their centered versions
//! have mean zero and a constant term would only absorb noise. The fitted
//! surface plus the first-year experience variance gives one own-funds
//! sample per path; the capital figure is the loss quantile of those
//! samples.
//!
//! The solve runs through a Householder orthogonalization of the design
//! matrix; explicit normal equations exist in the tests as an independent
//! cross-check only.

use nalgebra::{DMatrix, DVector};

use crate::drivers::AdjustmentFactorPath;
use crate::error::{Error, Result};
use crate::portfolio::AssumptionSet;
use crate::projection::SimulationBatch;
use crate::stats::{quantile_lower, sample_std};

/// Basis of the regression surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionBasis {
    Linear,
    /// Linear terms plus squares and pairwise products.
    LinearPlusQuadratic,
}

/// How coefficient standard errors are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StdErrorKind {
    /// Classical homoskedastic errors.
    Classical,
    /// Heteroskedasticity-robust (sandwich) errors.
    Robust,
}

#[derive(Debug, Clone)]
pub struct RegressionResult {
    pub coefficients: Vec<f64>,
    pub names: Vec<String>,
    pub standard_errors: Vec<f64>,
    /// Computed against the raw sum of squares of the response, the
    /// convention for intercept-free fits.
    pub r_squared: f64,
    /// The centered variant, reported alongside to avoid ambiguity.
    pub r_squared_centered: f64,
    pub n: usize,
    /// Condition number of the design cross-product (squared condition of
    /// the design itself).
    pub condition_xtx: f64,
    pub residual_sum_squares: f64,
    pub basis: RegressionBasis,
    pub se_kind: StdErrorKind,
}

/// Expand one regressor row under the chosen basis.
fn expand_row(raw: &[f64], basis: RegressionBasis, out: &mut Vec<f64>) {
    out.extend_from_slice(raw);
    if basis == RegressionBasis::LinearPlusQuadratic {
        for i in 0..raw.len() {
            for j in i..raw.len() {
                out.push(raw[i] * raw[j]);
            }
        }
    }
}

fn expanded_names(names: &[String], basis: RegressionBasis) -> Vec<String> {
    let mut out: Vec<String> = names.to_vec();
    if basis == RegressionBasis::LinearPlusQuadratic {
        for i in 0..names.len() {
            for j in i..names.len() {
                if i == j {
                    out.push(format!("{}^2", names[i]));
                } else {
                    out.push(format!("{}*{}", names[i], names[j]));
                }
            }
        }
    }
    out
}

fn expanded_width(width: usize, basis: RegressionBasis) -> usize {
    match basis {
        RegressionBasis::Linear => width,
        RegressionBasis::LinearPlusQuadratic => width + width * (width + 1) / 2,
    }
}

fn design_matrix(batch: &SimulationBatch, basis: RegressionBasis) -> DMatrix<f64> {
    let n = batch.len();
    let raw_w = batch.width();
    let k = expanded_width(raw_w, basis);
    let mut data = Vec::with_capacity(n * k);
    let mut row = Vec::with_capacity(k);
    for p in 0..n {
        row.clear();
        expand_row(batch.outcome(p).regressors, basis, &mut row);
        data.extend_from_slice(&row);
    }
    DMatrix::from_row_slice(n, k, &data)
}

/// Ordinary least squares of the batch response on the expanded first-year
/// regressors, no intercept. Classical standard errors.
pub fn fit(batch: &SimulationBatch, basis: RegressionBasis) -> Result<RegressionResult> {
    fit_with(batch, basis, StdErrorKind::Classical)
}

/// As [`fit`], with the standard-error flavour chosen by the caller.
pub fn fit_with(
    batch: &SimulationBatch,
    basis: RegressionBasis,
    se_kind: StdErrorKind,
) -> Result<RegressionResult> {
    let n = batch.len();
    let names = expanded_names(batch.regressor_names(), basis);
    let k = names.len();
    if n <= k {
        return Err(Error::InvalidParameter(format!(
            "regression needs more observations than regressors: n = {n}, k = {k}"
        )));
    }

    let x = design_matrix(batch, basis);
    let y = DVector::from_column_slice(batch.y());

    let qr = x.clone().qr();
    let r = qr.r();

    // Rank check on the triangular factor: a collapsed diagonal entry marks
    // the first column that is (numerically) a combination of the previous.
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    let tol = max_diag * 1e-12 * (n as f64).sqrt().max(1.0);
    let degenerate: Vec<String> = (0..k)
        .filter(|&i| r[(i, i)].abs() <= tol)
        .map(|i| names[i].clone())
        .collect();
    if !degenerate.is_empty() || max_diag == 0.0 {
        return Err(Error::Collinearity {
            columns: if degenerate.is_empty() {
                names
            } else {
                degenerate
            },
        });
    }

    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Collinearity {
            columns: names.clone(),
        })?;

    let residuals = &y - &x * &beta;
    let rss = residuals.dot(&residuals);
    let tss_raw = y.dot(&y);
    let y_mean = y.mean();
    let tss_centered: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let r_squared = if tss_raw > 0.0 { 1.0 - rss / tss_raw } else { 1.0 };
    let r_squared_centered = if tss_centered > 0.0 {
        1.0 - rss / tss_centered
    } else {
        1.0
    };

    // (X'X)^-1 = R^-1 R^-T from the triangular factor.
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Collinearity {
            columns: names.clone(),
        })?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let standard_errors = match se_kind {
        StdErrorKind::Classical => {
            let sigma2 = rss / (n - k) as f64;
            (0..k).map(|i| (sigma2 * xtx_inv[(i, i)]).sqrt()).collect()
        }
        StdErrorKind::Robust => {
            // sandwich: (X'X)^-1 X' diag(e^2) X (X'X)^-1
            let mut meat = DMatrix::<f64>::zeros(k, k);
            for p in 0..n {
                let e2 = residuals[p] * residuals[p];
                let row = x.row(p);
                for i in 0..k {
                    for j in 0..k {
                        meat[(i, j)] += e2 * row[i] * row[j];
                    }
                }
            }
            let cov = &xtx_inv * meat * &xtx_inv;
            (0..k).map(|i| cov[(i, i)].sqrt()).collect()
        }
    };

    let svd = r.svd(false, false);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition_xtx = if s_min > 0.0 {
        (s_max / s_min).powi(2)
    } else {
        f64::INFINITY
    };

    Ok(RegressionResult {
        coefficients: beta.iter().copied().collect(),
        names,
        standard_errors,
        r_squared,
        r_squared_centered,
        n,
        condition_xtx,
        residual_sum_squares: rss,
        basis,
        se_kind,
    })
}

/// Per-path own-funds changes: experience variance plus the fitted
/// revaluation. Positive values are gains.
#[derive(Debug, Clone)]
pub struct OwnFundsDistribution {
    pub samples: Vec<f64>,
}

/// Insert the simulated first-year realizations into the fitted surface and
/// add each path's experience variance, preserving path order.
pub fn own_funds_distribution(
    batch: &SimulationBatch,
    reg: &RegressionResult,
) -> Result<OwnFundsDistribution> {
    let expected_k = expanded_width(batch.width(), reg.basis);
    if reg.coefficients.len() != expected_k {
        return Err(Error::LayoutMismatch(format!(
            "regression has {} coefficients but the batch expands to {} regressors",
            reg.coefficients.len(),
            expected_k
        )));
    }
    let mut row = Vec::with_capacity(expected_k);
    let samples = (0..batch.len())
        .map(|p| {
            let o = batch.outcome(p);
            row.clear();
            expand_row(o.regressors, reg.basis, &mut row);
            let fitted: f64 = row
                .iter()
                .zip(&reg.coefficients)
                .map(|(x, a)| a * x)
                .sum();
            o.ev + fitted
        })
        .collect();
    Ok(OwnFundsDistribution { samples })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RiskMeasureReport {
    pub var_level: f64,
    /// Loss quantile floored at zero: the capital figure.
    pub scr: f64,
    /// The signed own-funds quantile before flooring.
    pub raw_quantile: f64,
    /// Mean loss at or beyond the quantile.
    pub tvar: f64,
    pub n: usize,
    /// Own-funds quantiles at standard levels (lower order statistic).
    pub quantile_table: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

const TABLE_LEVELS: [f64; 9] = [0.001, 0.005, 0.01, 0.05, 0.5, 0.95, 0.99, 0.995, 0.999];

/// Loss quantile and tail mean of the own-funds distribution.
///
/// The estimator is the lower order statistic at rank `ceil(n * p)` with
/// `p = 1 - level`, which rounds toward the worse outcome. The tail mean
/// averages the samples at or below that rank.
pub fn risk_measures(dist: &OwnFundsDistribution, level: f64) -> Result<RiskMeasureReport> {
    if dist.samples.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "risk level must be in (0, 1), got {level}"
        )));
    }
    let n = dist.samples.len();
    let mut warnings = Vec::new();
    let needed = (1.0 / (1.0 - level)).ceil() as usize;
    if n < needed {
        warnings.push(format!(
            "only {n} samples for level {level}: at least {needed} are needed \
             for the tail order statistic to be populated"
        ));
    }

    let mut sorted = dist.samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("own-funds samples are finite"));

    let p = 1.0 - level;
    let raw_quantile = quantile_lower(&sorted, p);
    let scr = (-raw_quantile).max(0.0);

    // tail mean over the first ceil(n*p) order statistics
    let h = n as f64 * p;
    let r = h.round();
    let k = if (h - r).abs() < 1e-9 { r } else { h.ceil() };
    let k = (k as usize).clamp(1, n);
    let tail_mean: f64 = sorted[..k].iter().sum::<f64>() / k as f64;
    let tvar = -tail_mean;

    let quantile_table = TABLE_LEVELS
        .iter()
        .map(|&q| (q, quantile_lower(&sorted, q)))
        .collect();

    Ok(RiskMeasureReport {
        var_level: level,
        scr,
        raw_quantile,
        tvar,
        n,
        quantile_table,
        warnings,
    })
}

/// Remaining portfolio life expectancy over the horizon: the sum of
/// cumulative survival products of the per-year aggregate mortality rates.
pub fn life_expectancy(q: &[f64]) -> f64 {
    let mut survival = 1.0;
    let mut e = 0.0;
    for &qt in q {
        survival *= 1.0 - qt;
        e += survival;
    }
    e
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LifeExpectancyResult {
    /// Life expectancy at best-estimate rates.
    pub e_be: f64,
    /// Intercept of the re-estimation regression (years).
    pub intercept: f64,
    /// Slope against the first-year mortality factor (years per unit).
    pub slope: f64,
    pub quantile_level: f64,
    /// The level-quantile of re-estimated life expectancy over the paths.
    pub le_quantile: f64,
    /// Life expectancy under the supplied stressed rates, when given.
    pub stress_le: Option<f64>,
    /// Share of paths whose re-estimated life expectancy falls at or below
    /// the stressed value.
    pub stress_exceedance: Option<f64>,
    pub n: usize,
}

/// Re-estimate life expectancy per path from its realized mortality curve
/// and regress on the first-year mortality factor, **with** an intercept —
/// unlike the capital regression, the response here has no mean-zero
/// construction.
pub fn life_expectancy_regression(
    paths: &[AdjustmentFactorPath],
    assumptions: &AssumptionSet,
    quantile_level: f64,
    stress_q: Option<&[f64]>,
) -> Result<LifeExpectancyResult> {
    if paths.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "life-expectancy regression needs at least 3 paths, got {}",
            paths.len()
        )));
    }
    if !(quantile_level > 0.0 && quantile_level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile level must be in (0, 1), got {quantile_level}"
        )));
    }
    let q_be = assumptions.aggregate_q();
    let e_be = life_expectancy(q_be);

    let xs: Vec<f64> = paths.iter().map(|p| p.af_mort[0]).collect();
    let es: Vec<f64> = paths
        .iter()
        .map(|p| {
            let q_path: Vec<f64> = p
                .af_mort
                .iter()
                .zip(q_be)
                .map(|(af, q)| (af * q).clamp(0.0, 1.0))
                .collect();
            life_expectancy(&q_path)
        })
        .collect();

    // simple linear regression with intercept
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let e_mean = es.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    if sxx == 0.0 || sample_std(&xs) < 1e-15 {
        return Err(Error::ZeroVariance(
            "first-year mortality factor does not vary across paths".into(),
        ));
    }
    let sxe: f64 = xs
        .iter()
        .zip(&es)
        .map(|(x, e)| (x - x_mean) * (e - e_mean))
        .sum();
    let slope = sxe / sxx;
    let intercept = e_mean - slope * x_mean;

    let mut fitted: Vec<f64> = xs.iter().map(|x| intercept + slope * x).collect();
    fitted.sort_by(|a, b| a.partial_cmp(b).expect("fitted values are finite"));
    let le_quantile = quantile_lower(&fitted, quantile_level);

    let stress_le = stress_q.map(life_expectancy);
    let stress_exceedance = stress_le.map(|s| {
        let below = fitted.iter().filter(|&&e| e <= s).count();
        below as f64 / fitted.len() as f64
    });

    Ok(LifeExpectancyResult {
        e_be,
        intercept,
        slope,
        quantile_level,
        le_quantile,
        stress_le,
        stress_exceedance,
        n: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::{
        simulate_paths, BasisRiskModel, CalamityModel, DriverModels, LapseDriverModel, TrendModel,
    };
    use crate::portfolio::{AssumptionSet, ModelPoint, Portfolio};
    use crate::projection::{build_batch, CenteringMode, RegressorLayout};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// A batch with hand-set regressors and responses, bypassing projection.
    fn synthetic_batch(x: Vec<Vec<f64>>, y: Vec<f64>, names: Vec<String>) -> SimulationBatch {
        // Build through the public path: craft adjustment-factor paths whose
        // first-year factors produce exactly the requested regressors on a
        // book that contributes nothing, then overwrite the responses.
        // Simpler: use the test-only constructor below.
        SimulationBatch::for_tests(x, y, names)
    }

    fn observable_names() -> Vec<String> {
        vec!["mortality".into(), "lapse".into()]
    }

    // -- fit -------------------------------------------------------------------

    #[test]
    fn noiseless_single_regressor_is_recovered_exactly() {
        let xs: Vec<Vec<f64>> = (0..100).map(|i| vec![(i as f64 - 50.0) / 100.0]).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 * x[0]).collect();
        let batch = synthetic_batch(xs, y, vec!["mortality".into()]);
        let reg = fit(&batch, RegressionBasis::Linear).unwrap();
        assert_relative_eq!(reg.coefficients[0], 2.0, max_relative = 1e-10);
        assert!((reg.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_two_regressor_coefficients_land_within_four_standard_errors() {
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(424242);
        let mut xs = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x1: f64 = 0.05 * StandardNormal.sample::<f64, _>(&mut rng);
            let x2: f64 = 0.08 * StandardNormal.sample::<f64, _>(&mut rng);
            let eps: f64 = 0.5 * StandardNormal.sample::<f64, _>(&mut rng);
            y.push(2.0 * x1 - 5.0 * x2 + eps);
            xs.push(vec![x1, x2]);
        }
        let batch = synthetic_batch(xs, y, observable_names());
        let reg = fit(&batch, RegressionBasis::Linear).unwrap();
        assert!(
            (reg.coefficients[0] - 2.0).abs() < 4.0 * reg.standard_errors[0],
            "coefficient {} with SE {}",
            reg.coefficients[0],
            reg.standard_errors[0]
        );
        assert!(
            (reg.coefficients[1] + 5.0).abs() < 4.0 * reg.standard_errors[1],
            "coefficient {} with SE {}",
            reg.coefficients[1],
            reg.standard_errors[1]
        );
    }

    #[test]
    fn response_independent_of_regressors_yields_null_fit() {
        let n = 5_000;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut xs = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            xs.push(vec![0.1 * StandardNormal.sample::<f64, _>(&mut rng)]);
            y.push(StandardNormal.sample::<f64, _>(&mut rng));
        }
        let batch = synthetic_batch(xs, y, vec!["mortality".into()]);
        let reg = fit(&batch, RegressionBasis::Linear).unwrap();
        assert!(reg.coefficients[0].abs() < 4.0 * reg.standard_errors[0]);
        assert!(reg.r_squared.abs() < 0.01);
    }

    #[test]
    fn collinear_columns_are_named() {
        let xs: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let v = i as f64 / 50.0;
                vec![v, 2.0 * v]
            })
            .collect();
        let y: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        let batch = synthetic_batch(xs, y, observable_names());
        match fit(&batch, RegressionBasis::Linear) {
            Err(Error::Collinearity { columns }) => {
                assert!(columns.contains(&"lapse".to_string()), "got {columns:?}")
            }
            other => panic!("expected collinearity error, got {other:?}"),
        }
    }

    #[test]
    fn quadratic_basis_expands_names_and_width() {
        let xs: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![(i % 17) as f64 / 17.0 - 0.5, (i % 11) as f64 / 11.0 - 0.5])
            .collect();
        let y: Vec<f64> = xs.iter().map(|x| x[0] + x[1] * x[1]).collect();
        let batch = synthetic_batch(xs, y, observable_names());
        let reg = fit(&batch, RegressionBasis::LinearPlusQuadratic).unwrap();
        assert_eq!(
            reg.names,
            vec!["mortality", "lapse", "mortality^2", "mortality*lapse", "lapse^2"]
        );
        // the constructed response is exactly in the span
        assert_relative_eq!(reg.coefficients[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(reg.coefficients[4], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn residuals_are_orthogonal_to_every_regressor() {
        let n = 2_000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut xs = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x1: f64 = StandardNormal.sample::<f64, _>(&mut rng);
            let x2: f64 = StandardNormal.sample::<f64, _>(&mut rng);
            y.push(1.5 * x1 - 0.5 * x2 + StandardNormal.sample::<f64, _>(&mut rng));
            xs.push(vec![x1, x2]);
        }
        let batch = synthetic_batch(xs.clone(), y.clone(), observable_names());
        let reg = fit(&batch, RegressionBasis::Linear).unwrap();
        for j in 0..2 {
            let dot: f64 = xs
                .iter()
                .zip(&y)
                .map(|(x, yv)| {
                    let fitted: f64 = x
                        .iter()
                        .zip(&reg.coefficients)
                        .map(|(xi, a)| a * xi)
                        .sum();
                    x[j] * (yv - fitted)
                })
                .sum();
            assert!(
                dot.abs() < 1e-7 * n as f64,
                "residuals not orthogonal to column {j}: {dot}"
            );
        }
    }

    #[test]
    fn qr_route_matches_normal_equations_on_well_conditioned_data() {
        let n = 3_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5150);
        let mut xs = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x1: f64 = StandardNormal.sample::<f64, _>(&mut rng);
            let x2: f64 = 0.3 * StandardNormal.sample::<f64, _>(&mut rng);
            y.push(0.7 * x1 + 3.0 * x2 + 0.1 * StandardNormal.sample::<f64, _>(&mut rng));
            xs.push(vec![x1, x2]);
        }
        let batch = synthetic_batch(xs.clone(), y.clone(), observable_names());
        let reg = fit(&batch, RegressionBasis::Linear).unwrap();

        // independent route: solve X'X b = X'y directly
        let mut xtx = [[0.0_f64; 2]; 2];
        let mut xty = [0.0_f64; 2];
        for (x, yv) in xs.iter().zip(&y) {
            for i in 0..2 {
                for j in 0..2 {
                    xtx[i][j] += x[i] * x[j];
                }
                xty[i] += x[i] * yv;
            }
        }
        let det = xtx[0][0] * xtx[1][1] - xtx[0][1] * xtx[1][0];
        let b0 = (xty[0] * xtx[1][1] - xty[1] * xtx[0][1]) / det;
        let b1 = (xtx[0][0] * xty[1] - xtx[1][0] * xty[0]) / det;
        assert_relative_eq!(reg.coefficients[0], b0, max_relative = 1e-9);
        assert_relative_eq!(reg.coefficients[1], b1, max_relative = 1e-9);
    }

    #[test]
    fn robust_errors_are_available_behind_the_flag() {
        let n = 1_000;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![StandardNormal.sample::<f64, _>(&mut rng)])
            .collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|x| {
                // noise scale grows with |x|: classical and robust SEs differ
                let eps: f64 = StandardNormal.sample::<f64, _>(&mut rng);
                x[0] + x[0].abs() * eps
            })
            .collect();
        let batch = synthetic_batch(xs, y, vec!["mortality".into()]);
        let classical = fit_with(&batch, RegressionBasis::Linear, StdErrorKind::Classical).unwrap();
        let robust = fit_with(&batch, RegressionBasis::Linear, StdErrorKind::Robust).unwrap();
        assert_eq!(classical.coefficients, robust.coefficients);
        assert_ne!(classical.standard_errors, robust.standard_errors);
    }

    // -- own funds distribution -------------------------------------------------

    #[test]
    fn zero_coefficients_reduce_samples_to_experience_variance() {
        let xs = vec![vec![0.1, 0.0], vec![-0.1, 0.0]];
        let y = vec![5.0, -5.0];
        let mut batch = synthetic_batch(xs, y, observable_names());
        batch.set_ev_for_tests(vec![3.0, -4.0]);
        let reg = RegressionResult {
            coefficients: vec![0.0, 0.0],
            names: observable_names(),
            standard_errors: vec![0.0, 0.0],
            r_squared: 0.0,
            r_squared_centered: 0.0,
            n: 2,
            condition_xtx: 1.0,
            residual_sum_squares: 0.0,
            basis: RegressionBasis::Linear,
            se_kind: StdErrorKind::Classical,
        };
        let dist = own_funds_distribution(&batch, &reg).unwrap();
        assert_eq!(dist.samples, vec![3.0, -4.0]);
    }

    #[test]
    fn two_path_hand_case() {
        let xs = vec![vec![0.1], vec![-0.1]];
        let y = vec![0.0, 0.0];
        let mut batch = synthetic_batch(xs, y, vec!["mortality".into()]);
        batch.set_ev_for_tests(vec![1.0, -1.0]);
        let reg = RegressionResult {
            coefficients: vec![10.0],
            names: vec!["mortality".into()],
            standard_errors: vec![0.0],
            r_squared: 1.0,
            r_squared_centered: 1.0,
            n: 2,
            condition_xtx: 1.0,
            residual_sum_squares: 0.0,
            basis: RegressionBasis::Linear,
            se_kind: StdErrorKind::Classical,
        };
        let dist = own_funds_distribution(&batch, &reg).unwrap();
        assert_eq!(dist.samples, vec![2.0, -2.0]);
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let xs = vec![vec![0.1, 0.0], vec![-0.1, 0.0]];
        let y = vec![0.0, 0.0];
        let batch = synthetic_batch(xs, y, observable_names());
        let reg = RegressionResult {
            coefficients: vec![1.0],
            names: vec!["mortality".into()],
            standard_errors: vec![0.0],
            r_squared: 1.0,
            r_squared_centered: 1.0,
            n: 2,
            condition_xtx: 1.0,
            residual_sum_squares: 0.0,
            basis: RegressionBasis::Linear,
            se_kind: StdErrorKind::Classical,
        };
        assert!(matches!(
            own_funds_distribution(&batch, &reg),
            Err(Error::LayoutMismatch(_))
        ));
    }

    // -- risk measures ------------------------------------------------------------

    #[test]
    fn standard_normal_quantile_is_recovered() {
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_101);
        let samples: Vec<f64> = (0..n)
            .map(|_| StandardNormal.sample::<f64, _>(&mut rng))
            .collect();
        let report = risk_measures(&OwnFundsDistribution { samples }, 0.995).unwrap();
        let expected = crate::drivers::normal_quantile(0.995);
        assert!(
            (report.scr - expected).abs() < 0.02,
            "scr {} vs analytic {expected}",
            report.scr
        );
        // tail mean of a unit normal beyond z: phi(z)/p
        let z = expected;
        let tail = (-(z * z) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt() / 0.005;
        assert!(
            (report.tvar - tail).abs() < 0.05,
            "tvar {} vs analytic {tail}",
            report.tvar
        );
    }

    #[test]
    fn all_zero_samples_mean_no_capital() {
        let report = risk_measures(
            &OwnFundsDistribution {
                samples: vec![0.0; 100],
            },
            0.995,
        )
        .unwrap();
        assert_eq!(report.scr, 0.0);
        assert_eq!(report.tvar, 0.0);
    }

    #[test]
    fn order_statistic_convention_documented_by_example() {
        // ten samples, level 0.9: rank ceil(10 * 0.1) = 1, the worst sample.
        let mut samples = vec![0.0; 9];
        samples.push(-10.0);
        let report = risk_measures(&OwnFundsDistribution { samples }, 0.9).unwrap();
        assert_eq!(report.scr, 10.0);
        // with an eleventh sample the rank moves to ceil(1.1) = 2: a zero.
        let mut samples = vec![0.0; 10];
        samples.push(-10.0);
        let report = risk_measures(&OwnFundsDistribution { samples }, 0.9).unwrap();
        assert_eq!(report.scr, 0.0);
    }

    #[test]
    fn scr_is_positively_homogeneous_in_the_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..5_000)
            .map(|_| StandardNormal.sample::<f64, _>(&mut rng))
            .collect();
        let scaled: Vec<f64> = samples.iter().map(|s| 2.0 * s).collect();
        let base = risk_measures(&OwnFundsDistribution { samples }, 0.99).unwrap();
        let double = risk_measures(&OwnFundsDistribution { samples: scaled }, 0.99).unwrap();
        assert_eq!(double.scr, 2.0 * base.scr);
    }

    #[test]
    fn small_sample_carries_a_warning() {
        let report = risk_measures(
            &OwnFundsDistribution {
                samples: vec![1.0, -1.0, 0.0],
            },
            0.995,
        )
        .unwrap();
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn empty_distribution_is_an_error() {
        assert!(matches!(
            risk_measures(&OwnFundsDistribution { samples: vec![] }, 0.995),
            Err(Error::EmptyDistribution)
        ));
    }

    // -- life expectancy ----------------------------------------------------------

    #[test]
    fn life_expectancy_edge_cases() {
        assert_eq!(life_expectancy(&vec![0.0; 60]), 60.0);
        assert_eq!(life_expectancy(&vec![1.0; 10]), 0.0);
    }

    #[test]
    fn life_expectancy_geometric_series() {
        let e = life_expectancy(&vec![0.1; 60]);
        let expected = 9.0 * (1.0 - 0.9_f64.powi(60));
        assert!((e - expected).abs() < 1e-12, "{e} vs {expected}");
    }

    #[test]
    fn stressed_mortality_lowers_life_expectancy() {
        let q: Vec<f64> = (0..30).map(|t| 0.005 + 0.001 * t as f64).collect();
        let stressed: Vec<f64> = q.iter().map(|v| v * 1.15).collect();
        assert!(life_expectancy(&stressed) < life_expectancy(&q));
    }

    #[test]
    fn degenerate_paths_make_the_le_regression_fail() {
        let asm =
            AssumptionSet::from_aggregate(vec![0.01; 5], vec![0.0; 5], vec![1.0; 5]).unwrap();
        let paths: Vec<_> = (0..5).map(|_| AdjustmentFactorPath::unit(5)).collect();
        assert!(matches!(
            life_expectancy_regression(&paths, &asm, 0.005, None),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn one_year_horizon_makes_the_le_regression_exact() {
        // With a single year, E = 1 - q1 * af: intercept 1, slope -q1.
        let q1 = 0.02;
        let asm = AssumptionSet::from_aggregate(vec![q1], vec![0.0], vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let paths: Vec<_> = (0..200)
            .map(|_| {
                let mut p = AdjustmentFactorPath::unit(1);
                p.af_mort = vec![1.0 + 0.3 * rng.gen::<f64>()];
                p
            })
            .collect();
        let result = life_expectancy_regression(&paths, &asm, 0.05, None).unwrap();
        assert_relative_eq!(result.intercept, 1.0, max_relative = 1e-10);
        assert_relative_eq!(result.slope, -q1, max_relative = 1e-10);
        assert_relative_eq!(result.e_be, 1.0 - q1, max_relative = 1e-12);
    }

    #[test]
    fn le_regression_on_simulated_paths_reports_stress_probability() {
        let q: Vec<f64> = (0..40).map(|t| 0.004 + 0.0008 * t as f64).collect();
        let asm = AssumptionSet::from_aggregate(q.clone(), vec![0.0; 40], vec![1.0; 40]).unwrap();
        let models = DriverModels {
            trend: TrendModel::calibrate(0.95, 1.45, 40).unwrap(),
            calamity: CalamityModel::calibrate_default().unwrap(),
            basis: BasisRiskModel::from_smoker_shares(0.35, 0.39, 2.0).unwrap(),
            lapse: LapseDriverModel { sigma: 0.05 },
        };
        let paths = simulate_paths(&models, &asm, 4_000, 21);
        let stressed: Vec<f64> = q.iter().map(|v| v * 1.15).collect();
        let result = life_expectancy_regression(&paths, &asm, 0.005, Some(&stressed)).unwrap();
        assert!(result.slope < 0.0, "higher mortality must lower the estimate");
        assert!(result.le_quantile < result.e_be);
        let p = result.stress_exceedance.unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert!(result.stress_le.unwrap() < result.e_be);
    }

    // -- end to end through projection ---------------------------------------------

    #[test]
    fn scr_scales_with_exposure_through_the_whole_pipeline() {
        let pf = Portfolio::new(vec![ModelPoint {
            id: "mp".into(),
            age: 45,
            lives: 100.0,
            sum_assured: 1_000.0,
            annual_net_premium: 13.0,
            remaining_term: 10,
        }]);
        let asm = AssumptionSet::from_aggregate(
            vec![0.012; 10],
            vec![0.04; 10],
            (1..=10).map(|t| 1.02_f64.powi(-t)).collect(),
        )
        .unwrap();
        let models = DriverModels {
            trend: TrendModel::calibrate(0.95, 1.45, 40).unwrap(),
            calamity: CalamityModel::calibrate_default().unwrap(),
            basis: BasisRiskModel::from_smoker_shares(0.35, 0.39, 2.0).unwrap(),
            lapse: LapseDriverModel { sigma: 0.05 },
        };
        let paths = simulate_paths(&models, &asm, 3_000, 1234);
        let scr_of = |portfolio: &Portfolio| {
            let batch = build_batch(
                portfolio,
                &asm,
                &paths,
                RegressorLayout::Observable,
                CenteringMode::BestEstimate,
            )
            .unwrap();
            let reg = fit(&batch, RegressionBasis::Linear).unwrap();
            let dist = own_funds_distribution(&batch, &reg).unwrap();
            risk_measures(&dist, 0.995).unwrap().scr
        };
        let base = scr_of(&pf);
        let double = scr_of(&pf.scale_exposure(2.0));
        assert!(base > 0.0);
        assert_relative_eq!(double, 2.0 * base, max_relative = 1e-9);
    }
}
