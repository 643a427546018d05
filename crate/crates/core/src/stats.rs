//! Empirical quantile estimators and small statistical helpers.
//!
//! Two order-statistic conventions are used in this crate and both are
//! deliberate:
//!
//! * [`quantile_lower`] — the lower order statistic at rank `ceil(n * p)`.
//!   Used for capital figures, where rounding toward the worse outcome is
//!   the conservative choice.
//! * [`quantile_midpoint`] — inverse CDF with averaging: when `n * p` lands
//!   exactly on a rank, the midpoint of the two adjacent order statistics is
//!   returned. Used for the per-year quantile fans, where the symmetric
//!   estimator avoids a systematic bias in plots.

/// Guard against floating-point fuzz in `n * p` (e.g. `1e6 * 0.005`
/// evaluating to `5000.000000000001`): ranks within this distance of an
/// integer are treated as integral.
const RANK_EPS: f64 = 1e-9;

fn rank(n: usize, p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    n as f64 * p
}

/// Lower order statistic at rank `ceil(n * p)` (1-indexed), clamped to the
/// sample range. `sorted` must be ascending.
pub fn quantile_lower(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = rank(sorted.len(), p);
    let r = h.round();
    let k = if (h - r).abs() < RANK_EPS { r } else { h.ceil() };
    let k = (k as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// Inverse-CDF estimator with averaging: if `n * p` is integral (= j), the
/// midpoint of order statistics j and j+1; otherwise the order statistic at
/// `ceil(n * p)`. `sorted` must be ascending.
pub fn quantile_midpoint(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let n = sorted.len();
    let h = rank(n, p);
    let r = h.round();
    if (h - r).abs() < RANK_EPS {
        let j = r as usize;
        if j == 0 {
            sorted[0]
        } else if j >= n {
            sorted[n - 1]
        } else {
            0.5 * (sorted[j - 1] + sorted[j])
        }
    } else {
        let k = (h.ceil() as usize).clamp(1, n);
        sorted[k - 1]
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample standard deviation.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Standard error of the sample mean.
pub fn standard_error(values: &[f64]) -> f64 {
    sample_std(values) / (values.len() as f64).sqrt()
}

/// Standard error of the empirical p-quantile estimated from the spacing of
/// order statistics (binomial method): the ranks `n*p ± z*sqrt(n*p*(1-p))`
/// bracket an asymptotic 2z-standard-error interval of the quantile.
pub fn quantile_standard_error(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 1, "quantile standard error needs at least two samples");
    let z = 1.0; // one-sigma spacing
    let half_width = z * (n as f64 * p * (1.0 - p)).sqrt();
    let center = n as f64 * p;
    let lo = ((center - half_width).floor().max(1.0) as usize).min(n) - 1;
    let hi = ((center + half_width).ceil().min(n as f64) as usize).max(1) - 1;
    if hi <= lo {
        return 0.0;
    }
    (sorted[hi] - sorted[lo]) / (2.0 * z)
}
