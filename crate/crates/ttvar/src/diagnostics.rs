//! Stylized-fact diagnostics: descriptive statistics, normality,
//! stationarity, ARCH effects, BDS nonlinearity, autocorrelations and
//! QQ plot data.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use crate::error::{Result, TtvarError};
use crate::linalg::{ols_vec, r_squared};
use crate::var_student_t::t_log_density;

/// Descriptive statistics for one return series. Skewness and excess
/// kurtosis are the bias-uncorrected moment ratios m3/m2^1.5 and
/// m4/m2^2 - 3.
#[derive(Debug, Clone)]
pub struct StatsRow {
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub min: f64,
    pub max: f64,
}

/// Generic scalar test outcome.
#[derive(Debug, Clone)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: Option<f64>,
    /// Free-form payload, e.g. the lag chosen by AIC for the ADF test.
    pub detail: String,
}

/// Standardized BDS statistics per embedding dimension.
#[derive(Debug, Clone)]
pub struct BdsResult {
    pub embedding_dims: Vec<usize>,
    pub statistics: Vec<f64>,
    pub epsilon: f64,
}

/// Engle's ARCH-LM test in both its LM and F variants.
#[derive(Debug, Clone)]
pub struct ArchLmResult {
    pub lm_statistic: f64,
    pub lm_p_value: f64,
    pub f_statistic: f64,
    pub f_p_value: f64,
    pub lags: usize,
}

/// Sample autocorrelations at lags 1..=max_lag plus the white-noise
/// confidence band 1.96/sqrt(T).
#[derive(Debug, Clone)]
pub struct AcfResult {
    pub correlations: Vec<f64>,
    pub band: f64,
}

/// Reference distribution for QQ data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QqDist {
    Gaussian,
    StudentT,
}

/// QQ plot points (theoretical quantile, empirical quantile), sorted by
/// plotting position. `nu` is the MLE degrees of freedom when the
/// reference is Student-t.
#[derive(Debug, Clone)]
pub struct QqResult {
    pub points: Vec<(f64, f64)>,
    pub nu: Option<f64>,
}

/// Deterministic regression flavor for the ADF test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdfRegression {
    Constant,
    ConstantTrend,
    None,
}

fn central_moments(series: &[f64]) -> (f64, f64, f64, f64) {
    let t = series.len() as f64;
    let mean = series.iter().sum::<f64>() / t;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in series {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (mean, m2 / t, m3 / t, m4 / t)
}

pub fn descriptive_stats(series: &[f64]) -> Result<StatsRow> {
    if series.len() < 4 {
        return Err(TtvarError::invalid("descriptive_stats needs at least 4 observations"));
    }
    let (mean, m2, m3, m4) = central_moments(series);
    if m2 <= 0.0 {
        return Err(TtvarError::numerical(
            "zero variance: skewness and kurtosis are undefined",
        ));
    }
    let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(StatsRow {
        mean,
        std_dev: m2.sqrt(),
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        min,
        max,
    })
}

pub fn jarque_bera(series: &[f64]) -> Result<TestResult> {
    if series.len() < 8 {
        return Err(TtvarError::invalid("jarque_bera needs at least 8 observations"));
    }
    let stats = descriptive_stats(series)?;
    let t = series.len() as f64;
    let jb = t / 6.0
        * (stats.skewness.powi(2) + stats.excess_kurtosis.powi(2) / 4.0);
    let chi2 = ChiSquared::new(2.0).expect("chi2(2)");
    Ok(TestResult {
        statistic: jb,
        p_value: Some(1.0 - chi2.cdf(jb)),
        detail: format!(
            "skewness={:.6} excess_kurtosis={:.6}",
            stats.skewness, stats.excess_kurtosis
        ),
    })
}

// MacKinnon (1994, 2010) response-surface coefficients for the
// asymptotic ADF tau distribution, N=1 (no cointegrating regressors).
// `star` separates the small-p and large-p polynomial branches; the
// statistic is mapped through the polynomial and the standard normal CDF.
struct MacKinnonSurface {
    star: f64,
    min: f64,
    max: f64,
    small_p: [f64; 3],
    large_p: [f64; 4],
}

const MACKINNON_NONE: MacKinnonSurface = MacKinnonSurface {
    star: -1.04,
    min: -19.04,
    max: f64::INFINITY,
    small_p: [0.6344, 1.2378, 0.032496],
    large_p: [0.4797, 0.93557, -0.06999, 0.033066],
};

const MACKINNON_CONSTANT: MacKinnonSurface = MacKinnonSurface {
    star: -1.61,
    min: -18.83,
    max: 2.74,
    small_p: [2.1659, 1.4412, 0.038269],
    large_p: [1.7339, 0.93202, -0.12745, -0.010368],
};

const MACKINNON_TREND: MacKinnonSurface = MacKinnonSurface {
    star: -2.89,
    min: -16.18,
    max: 0.7,
    small_p: [3.2512, 1.6047, 0.049588],
    large_p: [2.5261, 0.61654, -0.37956, -0.060285],
};

fn mackinnon_p(stat: f64, regression: AdfRegression) -> f64 {
    let surface = match regression {
        AdfRegression::None => &MACKINNON_NONE,
        AdfRegression::Constant => &MACKINNON_CONSTANT,
        AdfRegression::ConstantTrend => &MACKINNON_TREND,
    };
    if stat > surface.max {
        return 1.0;
    }
    if stat < surface.min {
        return 0.0;
    }
    let z = if stat <= surface.star {
        let c = &surface.small_p;
        c[0] + stat * (c[1] + stat * c[2])
    } else {
        let c = &surface.large_p;
        c[0] + stat * (c[1] + stat * (c[2] + stat * c[3]))
    };
    let norm = Normal::new(0.0, 1.0).expect("standard normal");
    norm.cdf(z)
}

/// Build the augmented Dickey-Fuller regression with `lag` difference
/// lags on the sample rows `offset..`, where `offset >= lag` indexes
/// into the differenced series.
fn adf_regression(
    series: &[f64],
    lag: usize,
    offset: usize,
    regression: AdfRegression,
) -> (DMatrix<f64>, DVector<f64>) {
    let diffs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let n = diffs.len() - offset;
    let deterministic = match regression {
        AdfRegression::None => 0,
        AdfRegression::Constant => 1,
        AdfRegression::ConstantTrend => 2,
    };
    let ncols = 1 + lag + deterministic;
    let mut x = DMatrix::zeros(n, ncols);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let t = offset + i;
        y[i] = diffs[t];
        x[(i, 0)] = series[t];
        for j in 0..lag {
            x[(i, 1 + j)] = diffs[t - 1 - j];
        }
        if deterministic >= 1 {
            x[(i, 1 + lag)] = 1.0;
        }
        if deterministic == 2 {
            x[(i, 2 + lag)] = (t + 1) as f64;
        }
    }
    (x, y)
}

pub fn adf_test(
    series: &[f64],
    max_lag: usize,
    regression: AdfRegression,
) -> Result<TestResult> {
    if series.len() <= max_lag + 10 {
        return Err(TtvarError::invalid("series too short for adf_test"));
    }
    // Lag selection by AIC on the common sample trimmed to max_lag.
    let mut best = (0usize, f64::INFINITY);
    for lag in 0..=max_lag {
        let (x, y) = adf_regression(series, lag, max_lag, regression);
        let (_, resid) = ols_vec(&x, &y)?;
        let n = y.len() as f64;
        let ssr: f64 = resid.iter().map(|v| v * v).sum();
        if ssr <= 0.0 {
            return Err(TtvarError::numerical("degenerate ADF regression"));
        }
        let aic = n * (ssr / n).ln() + 2.0 * x.ncols() as f64;
        if aic < best.1 {
            best = (lag, aic);
        }
    }
    let lag = best.0;
    // Refit with the chosen lag using all observations available for it.
    let (x, y) = adf_regression(series, lag, lag, regression);
    let (beta, resid) = ols_vec(&x, &y)?;
    let n = y.len() as f64;
    let dof = n - x.ncols() as f64;
    let s2 = resid.iter().map(|v| v * v).sum::<f64>() / dof;
    let xtx = x.transpose() * &x;
    let xtx_inv = xtx
        .try_inverse()
        .ok_or_else(|| TtvarError::numerical("singular ADF regressor matrix"))?;
    let se = (s2 * xtx_inv[(0, 0)]).sqrt();
    let stat = beta[0] / se;
    Ok(TestResult {
        statistic: stat,
        p_value: Some(mackinnon_p(stat, regression)),
        detail: format!("lag={lag}"),
    })
}

pub fn arch_lm(series: &[f64], lags: usize) -> Result<ArchLmResult> {
    let t = series.len();
    if t <= lags + 10 {
        return Err(TtvarError::invalid("series too short for arch_lm"));
    }
    let (mean, m2, _, _) = central_moments(series);
    if m2 <= 0.0 {
        return Err(TtvarError::numerical("zero variance in arch_lm"));
    }
    let sq: Vec<f64> = series.iter().map(|x| (x - mean).powi(2)).collect();
    let n = t - lags;
    let mut x = DMatrix::zeros(n, lags + 1);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        y[i] = sq[lags + i];
        x[(i, 0)] = 1.0;
        for j in 0..lags {
            x[(i, 1 + j)] = sq[lags + i - 1 - j];
        }
    }
    let (_, resid) = ols_vec(&x, &y)?;
    let r2 = r_squared(&y, &resid);
    let lm = n as f64 * r2;
    let f_den_dof = (t - 2 * lags - 1) as f64;
    let f_stat = (r2 / lags as f64) / ((1.0 - r2) / f_den_dof);
    let chi2 = ChiSquared::new(lags as f64)
        .map_err(|_| TtvarError::numerical("chi2 dof"))?;
    let fdist = FisherSnedecor::new(lags as f64, f_den_dof)
        .map_err(|_| TtvarError::numerical("F dof"))?;
    Ok(ArchLmResult {
        lm_statistic: lm,
        lm_p_value: 1.0 - chi2.cdf(lm),
        f_statistic: f_stat,
        f_p_value: 1.0 - fdist.cdf(f_stat),
        lags,
    })
}

/// Correlation sum over the upper triangle of a joint indicator matrix.
fn correlation_sum(joint: &[Vec<bool>]) -> f64 {
    let n = joint.len();
    if n < 2 {
        return 0.0;
    }
    let mut hits = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if joint[i][j] {
                hits += 1;
            }
        }
    }
    hits as f64 / (n * (n - 1) / 2) as f64
}

pub fn bds_test(series: &[f64], m_max: usize, eps_factor: f64) -> Result<BdsResult> {
    let t = series.len();
    if t < 200 {
        return Err(TtvarError::invalid("bds_test needs at least 200 observations"));
    }
    if !(2..=6).contains(&m_max) {
        return Err(TtvarError::invalid("bds_test embedding dimension must be in 2..=6"));
    }
    let mean = series.iter().sum::<f64>() / t as f64;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t as f64 - 1.0);
    let epsilon = eps_factor * var.sqrt();
    if epsilon <= 0.0 {
        return Err(TtvarError::numerical("bds_test epsilon is not positive"));
    }

    // Pairwise threshold indicators, diagonal included.
    let indicators: Vec<Vec<bool>> = (0..t)
        .map(|i| (0..t).map(|j| (series[i] - series[j]).abs() < epsilon).collect())
        .collect();

    let c1_full = correlation_sum(&indicators);
    if c1_full == 0.0 {
        return Err(TtvarError::numerical("bds_test epsilon too small: C_1 = 0"));
    }

    // Third-moment estimator k used by the asymptotic variance.
    let row_sums: Vec<f64> = indicators
        .iter()
        .map(|row| row.iter().filter(|&&b| b).count() as f64)
        .collect();
    let total: f64 = row_sums.iter().sum();
    let sq_sum: f64 = row_sums.iter().map(|s| s * s).sum();
    let tf = t as f64;
    let k = (sq_sum - 3.0 * total + 2.0 * tf) / (tf * (tf - 1.0) * (tf - 2.0));

    let mut dims = Vec::new();
    let mut stats = Vec::new();
    let mut joint = indicators.clone();
    for m in 2..=m_max {
        // joint[i][j] for dimension m: indicators ANDed over a length-m window.
        let n = joint.len() - 1;
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = joint[i + 1][j + 1] && indicators[i][j];
            }
        }
        joint = next;
        let c_m = correlation_sum(&joint);

        // 1-dimensional correlation sum on the same truncated sample.
        let trunc: Vec<Vec<bool>> = (m - 1..t)
            .map(|i| ((m - 1)..t).map(|j| indicators[i][j]).collect())
            .collect();
        let c1 = correlation_sum(&trunc);

        let mf = m as f64;
        let mut cross = 0.0;
        for j in 1..m {
            cross += k.powi((m - j) as i32) * c1_full.powi(2 * j as i32);
        }
        let variance = 4.0
            * (k.powi(m as i32) + 2.0 * cross
                + (mf - 1.0).powi(2) * c1_full.powi(2 * m as i32)
                - mf * mf * k * c1_full.powi(2 * m as i32 - 2));
        let n_eff = (t - (m - 1)) as f64;
        let stat = n_eff.sqrt() * (c_m - c1.powi(m as i32)) / variance.sqrt();
        if !stat.is_finite() {
            return Err(TtvarError::numerical("non-finite BDS statistic"));
        }
        dims.push(m);
        stats.push(stat);
    }
    Ok(BdsResult {
        embedding_dims: dims,
        statistics: stats,
        epsilon,
    })
}

pub fn acf(series: &[f64], max_lag: usize, squared: bool) -> Result<AcfResult> {
    let t = series.len();
    if t <= max_lag + 1 {
        return Err(TtvarError::invalid("series too short for acf"));
    }
    let data: Vec<f64> = if squared {
        series.iter().map(|x| x * x).collect()
    } else {
        series.to_vec()
    };
    let mean = data.iter().sum::<f64>() / t as f64;
    let denom: f64 = data.iter().map(|x| (x - mean).powi(2)).sum();
    if denom <= 0.0 {
        return Err(TtvarError::numerical("zero variance in acf"));
    }
    let mut correlations = Vec::with_capacity(max_lag);
    for lag in 1..=max_lag {
        let num: f64 = (lag..t)
            .map(|i| (data[i] - mean) * (data[i - lag] - mean))
            .sum();
        correlations.push(num / denom);
    }
    Ok(AcfResult {
        correlations,
        band: 1.96 / (t as f64).sqrt(),
    })
}

/// Profile MLE for a univariate Student-t fit on a standardized series:
/// inner EM for the scale at fixed nu, golden-section search over ln nu.
fn fit_univariate_t(z: &[f64]) -> Result<(f64, f64)> {
    let log_lik = |nu: f64| -> Result<(f64, f64)> {
        let mut s2 = 1.0;
        for _ in 0..200 {
            let mut acc = 0.0;
            for &x in z {
                let tau = (nu + 1.0) / (nu + x * x / s2);
                acc += tau * x * x;
            }
            let next = acc / z.len() as f64;
            let done = (next - s2).abs() < 1e-10 * s2.max(1e-12);
            s2 = next;
            if done {
                break;
            }
        }
        let sigma = DMatrix::from_element(1, 1, s2);
        let mut ll = 0.0;
        for &x in z {
            ll += t_log_density(&DVector::from_element(1, x), &sigma, nu)?;
        }
        Ok((ll, s2))
    };

    let (lo, hi) = (2.01_f64.ln(), 200.0_f64.ln());
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = log_lik(c.exp())?.0;
    let mut fd = log_lik(d.exp())?.0;
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = log_lik(c.exp())?.0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = log_lik(d.exp())?.0;
        }
        if b - a < 1e-8 {
            break;
        }
    }
    let nu = ((a + b) / 2.0).exp();
    let (_, s2) = log_lik(nu)?;
    if !nu.is_finite() || !s2.is_finite() || s2 <= 0.0 {
        return Err(TtvarError::numerical("univariate t MLE failed"));
    }
    Ok((nu, s2))
}

pub fn qq_points(series: &[f64], dist: QqDist) -> Result<QqResult> {
    let t = series.len();
    if t < 20 {
        return Err(TtvarError::invalid("qq_points needs at least 20 observations"));
    }
    let stats = descriptive_stats(series)?;
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));

    let (nu, quantile): (Option<f64>, Box<dyn Fn(f64) -> f64>) = match dist {
        QqDist::Gaussian => {
            let norm = Normal::new(0.0, 1.0).expect("standard normal");
            (None, Box::new(move |p| norm.inverse_cdf(p)))
        }
        QqDist::StudentT => {
            let z: Vec<f64> = series
                .iter()
                .map(|x| (x - stats.mean) / stats.std_dev)
                .collect();
            let (nu, s2) = fit_univariate_t(&z)?;
            let tdist = StudentsT::new(0.0, 1.0, nu)
                .map_err(|_| TtvarError::numerical("invalid t degrees of freedom"))?;
            let scale = s2.sqrt();
            (Some(nu), Box::new(move |p| scale * tdist.inverse_cdf(p)))
        }
    };

    let points: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .map(|(i, &emp)| {
            let p = (i as f64 + 0.5) / t as f64;
            // Theoretical quantiles are mapped back to the raw scale so
            // the 45 degree line is the reference.
            (stats.mean + stats.std_dev * quantile(p), emp)
        })
        .collect();
    Ok(QqResult { points, nu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::simulation::{gen_garch11, gen_logistic_map, Garch11Spec};
    use approx::assert_relative_eq;

    #[test]
    fn two_point_symmetric_stats() {
        let row = descriptive_stats(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_relative_eq!(row.mean, 0.0);
        assert_relative_eq!(row.std_dev, 1.0);
        assert_relative_eq!(row.skewness, 0.0);
        assert_relative_eq!(row.excess_kurtosis, -2.0);
        assert_relative_eq!(row.min, -1.0);
        assert_relative_eq!(row.max, 1.0);
    }

    #[test]
    fn normal_sample_kurtosis_near_zero() {
        let mut rng = Rng::new(11);
        let sample: Vec<f64> = (0..1_000_000).map(|_| rng.normal()).collect();
        let row = descriptive_stats(&sample).unwrap();
        assert!(row.excess_kurtosis.abs() < 0.02, "{}", row.excess_kurtosis);
        assert!(row.skewness.abs() < 0.02);
    }

    #[test]
    fn constant_series_rejected() {
        assert!(descriptive_stats(&[2.0; 16]).is_err());
        assert!(jarque_bera(&[2.0; 16]).is_err());
        assert!(arch_lm(&[0.5; 200], 4).is_err());
        assert!(acf(&[1.0; 50], 5, false).is_err());
    }

    #[test]
    fn jarque_bera_formula_value() {
        // S=1, K_excess=0, T=600 gives JB = 100; checked by rebuilding the
        // statistic from the reported moments of an arbitrary series.
        let mut rng = Rng::new(5);
        let sample: Vec<f64> = (0..600).map(|_| rng.normal()).collect();
        let row = descriptive_stats(&sample).unwrap();
        let jb = jarque_bera(&sample).unwrap();
        let expect =
            600.0 / 6.0 * (row.skewness.powi(2) + row.excess_kurtosis.powi(2) / 4.0);
        assert_relative_eq!(jb.statistic, expect, epsilon = 1e-10);
        let hand = 600.0 / 6.0 * (1.0_f64.powi(2) + 0.0 / 4.0);
        assert_relative_eq!(hand, 100.0);
    }

    #[test]
    fn jarque_bera_rejects_heavy_tails() {
        let mut rng = Rng::new(9);
        // t(4) via scale mixture.
        let sample: Vec<f64> = (0..5000)
            .map(|_| {
                let tau = rng.gamma(2.0, 2.0);
                rng.normal() / tau.sqrt()
            })
            .collect();
        let jb = jarque_bera(&sample).unwrap();
        assert!(jb.p_value.unwrap() < 0.001);
    }

    #[test]
    fn jarque_bera_affine_invariant() {
        let mut rng = Rng::new(21);
        let sample: Vec<f64> = (0..500).map(|_| rng.normal()).collect();
        let shifted: Vec<f64> = sample.iter().map(|x| 3.0 + 7.0 * x).collect();
        let a = jarque_bera(&sample).unwrap();
        let b = jarque_bera(&shifted).unwrap();
        assert_relative_eq!(a.statistic, b.statistic, epsilon = 1e-8);
    }

    fn default_max_lag(t: usize) -> usize {
        (12.0 * (t as f64 / 100.0).powf(0.25)).floor() as usize
    }

    #[test]
    fn adf_random_walk_not_rejected() {
        let mut rng = Rng::new(31);
        let mut level = 0.0;
        let walk: Vec<f64> = (0..2000)
            .map(|_| {
                level += rng.normal();
                level
            })
            .collect();
        let res = adf_test(&walk, default_max_lag(2000), AdfRegression::Constant).unwrap();
        assert!(res.p_value.unwrap() > 0.10, "p = {:?}", res.p_value);
    }

    #[test]
    fn adf_white_noise_strongly_rejected() {
        let mut rng = Rng::new(32);
        let noise: Vec<f64> = (0..2000).map(|_| rng.normal()).collect();
        let res = adf_test(&noise, default_max_lag(2000), AdfRegression::Constant).unwrap();
        assert!(res.statistic < -10.0, "stat = {}", res.statistic);
        assert!(res.p_value.unwrap() < 0.001);
        assert!(res.detail.starts_with("lag="));
    }

    #[test]
    fn adf_ar1_rejected_at_one_percent() {
        let mut rng = Rng::new(33);
        let mut x = 0.0;
        let series: Vec<f64> = (0..2000)
            .map(|_| {
                x = 0.5 * x + rng.normal();
                x
            })
            .collect();
        let res = adf_test(&series, default_max_lag(2000), AdfRegression::Constant).unwrap();
        assert!(res.p_value.unwrap() < 0.01);
    }

    #[test]
    fn arch_lm_matches_brute_force_oracle() {
        let mut rng = Rng::new(41);
        let series: Vec<f64> = (0..400).map(|_| rng.normal()).collect();
        let lags = 5;
        let res = arch_lm(&series, lags).unwrap();

        // Brute-force normal-equation solve on an explicitly built matrix.
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let sq: Vec<f64> = series.iter().map(|x| (x - mean).powi(2)).collect();
        let n = sq.len() - lags;
        let mut xtx = vec![vec![0.0; lags + 1]; lags + 1];
        let mut xty = vec![0.0; lags + 1];
        let row = |i: usize, j: usize| -> f64 {
            if j == 0 {
                1.0
            } else {
                sq[lags + i - j]
            }
        };
        for i in 0..n {
            for a in 0..=lags {
                xty[a] += row(i, a) * sq[lags + i];
                for b in 0..=lags {
                    xtx[a][b] += row(i, a) * row(i, b);
                }
            }
        }
        let x = DMatrix::from_fn(lags + 1, lags + 1, |a, b| xtx[a][b]);
        let b = x
            .lu()
            .solve(&DVector::from_vec(xty))
            .expect("oracle solve");
        let mut rss = 0.0;
        let mut tss = 0.0;
        let ybar = sq[lags..].iter().sum::<f64>() / n as f64;
        for i in 0..n {
            let fit: f64 = (0..=lags).map(|a| b[a] * row(i, a)).sum();
            rss += (sq[lags + i] - fit).powi(2);
            tss += (sq[lags + i] - ybar).powi(2);
        }
        let lm_oracle = n as f64 * (1.0 - rss / tss);
        assert_relative_eq!(res.lm_statistic, lm_oracle, epsilon = 1e-8);
    }

    #[test]
    fn arch_lm_detects_garch() {
        let spec = Garch11Spec {
            omega: 0.05,
            alpha: 0.10,
            beta: 0.85,
            len: 2000,
            seed: 77,
        };
        let series = gen_garch11(&spec).unwrap();
        let res = arch_lm(&series, 40).unwrap();
        assert!(res.lm_p_value < 0.001, "LM p = {}", res.lm_p_value);
        assert!(res.f_p_value < 0.001, "F p = {}", res.f_p_value);
    }

    #[test]
    fn arch_lm_size_on_iid_noise() {
        let mut rejections = 0;
        for seed in 0..200u64 {
            let mut rng = Rng::new(1000 + seed);
            let series: Vec<f64> = (0..3000).map(|_| rng.normal()).collect();
            let res = arch_lm(&series, 40).unwrap();
            if res.lm_p_value <= 0.01 {
                rejections += 1;
            }
        }
        assert!(rejections <= 10, "{rejections} of 200 seeds rejected at 1%");
    }

    #[test]
    fn correlation_integral_hand_count() {
        // Series [0,1,2] with eps=1.5: pairs {0,1} and {1,2} are within
        // eps, {0,2} is not, so C_1 = 2/3.
        let series = [0.0_f64, 1.0, 2.0];
        let ind: Vec<Vec<bool>> = (0..3)
            .map(|i| (0..3).map(|j| (series[i] - series[j]).abs() < 1.5).collect())
            .collect();
        assert_relative_eq!(correlation_sum(&ind), 2.0 / 3.0);
    }

    #[test]
    fn bds_brute_force_embedding_oracle() {
        // Exact pair counting over explicitly embedded vectors must match
        // the recursive joint-indicator construction.
        let mut rng = Rng::new(55);
        let series: Vec<f64> = (0..250).map(|_| rng.normal()).collect();
        let res = bds_test(&series, 4, 0.7).unwrap();
        let eps = res.epsilon;
        for (&m, &stat) in res.embedding_dims.iter().zip(&res.statistics) {
            assert!(stat.is_finite());
            let n = series.len() - m + 1;
            let mut hits = 0usize;
            for s in 0..n {
                for t in (s + 1)..n {
                    let close = (0..m).all(|j| (series[s + j] - series[t + j]).abs() < eps);
                    if close {
                        hits += 1;
                    }
                }
            }
            let c_m = hits as f64 / (n * (n - 1) / 2) as f64;
            // Rebuild the joint indicator construction to compare.
            let ind: Vec<Vec<bool>> = (0..series.len())
                .map(|i| {
                    (0..series.len())
                        .map(|j| (series[i] - series[j]).abs() < eps)
                        .collect()
                })
                .collect();
            let mut joint = ind.clone();
            for _ in 2..=m {
                let sz = joint.len() - 1;
                let mut next = vec![vec![false; sz]; sz];
                for i in 0..sz {
                    for j in 0..sz {
                        next[i][j] = joint[i + 1][j + 1] && ind[i][j];
                    }
                }
                joint = next;
            }
            assert_relative_eq!(correlation_sum(&joint), c_m, epsilon = 1e-12);
        }
    }

    #[test]
    fn bds_size_on_iid_noise() {
        let mut inside = 0;
        for seed in 0..200u64 {
            let mut rng = Rng::new(9000 + seed);
            let series: Vec<f64> = (0..1000).map(|_| rng.normal()).collect();
            let res = bds_test(&series, 2, 0.7).unwrap();
            if res.statistics[0].abs() < 1.96 {
                inside += 1;
            }
        }
        assert!(inside >= 180, "only {inside} of 200 inside the 5% band");
    }

    #[test]
    fn bds_detects_logistic_chaos() {
        let series = gen_logistic_map(1000, 0.2).unwrap();
        let res = bds_test(&series, 6, 0.7).unwrap();
        for (&m, &stat) in res.embedding_dims.iter().zip(&res.statistics) {
            assert!(stat > 10.0, "m={m} stat={stat}");
        }
    }

    #[test]
    fn bds_rejects_tiny_epsilon() {
        let mut rng = Rng::new(3);
        let series: Vec<f64> = (0..300).map(|_| rng.normal()).collect();
        assert!(bds_test(&series, 2, 1e-12).is_err());
    }

    #[test]
    fn acf_periodic_series() {
        let series: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let res = acf(&series, 2, false).unwrap();
        assert!(res.correlations[1] > 0.95);
        assert!(res.correlations[0] < -0.95);
    }

    #[test]
    fn acf_matches_ar1_analytic() {
        let mut rng = Rng::new(71);
        let mut x = 0.0;
        let series: Vec<f64> = (0..100_000)
            .map(|_| {
                x = 0.8 * x + rng.normal();
                x
            })
            .collect();
        let res = acf(&series, 5, false).unwrap();
        for k in 1..=5usize {
            let expect = 0.8_f64.powi(k as i32);
            assert!(
                (res.correlations[k - 1] - expect).abs() < 0.01,
                "lag {k}: {} vs {expect}",
                res.correlations[k - 1]
            );
        }
        assert_relative_eq!(res.band, 1.96 / (100_000.0_f64).sqrt());
    }

    #[test]
    fn acf_white_noise_inside_band() {
        let mut rng = Rng::new(72);
        let series: Vec<f64> = (0..5000).map(|_| rng.normal()).collect();
        let res = acf(&series, 20, true).unwrap();
        let bound = 3.0 / (5000.0_f64).sqrt();
        let outside = res.correlations.iter().filter(|r| r.abs() > bound).count();
        assert!(outside <= 1, "{outside} of 20 squared-ACF lags outside 3/sqrt(T)");
    }

    #[test]
    fn qq_gaussian_sample_on_diagonal() {
        let mut rng = Rng::new(81);
        let series: Vec<f64> = (0..100_000).map(|_| rng.normal()).collect();
        let res = qq_points(&series, QqDist::Gaussian).unwrap();
        // Skip the extreme 0.1% in each tail where order statistics are noisy.
        let t = res.points.len();
        let max_dev = res.points[t / 1000..t - t / 1000]
            .iter()
            .map(|(q, e)| (q - e).abs())
            .fold(0.0, f64::max);
        assert!(max_dev < 0.1, "max deviation {max_dev}");
        let (q_med, e_med) = res.points[t / 2];
        assert!(q_med.abs() < 0.01 && e_med.abs() < 0.01);
    }

    #[test]
    fn qq_t3_tails_deviate_above_gaussian() {
        let mut rng = Rng::new(82);
        let series: Vec<f64> = (0..20_000)
            .map(|_| {
                let tau = rng.gamma(1.5, 1.5);
                rng.normal() / tau.sqrt()
            })
            .collect();
        let res = qq_points(&series, QqDist::Gaussian).unwrap();
        let last = res.points.last().unwrap();
        let first = res.points.first().unwrap();
        assert!(last.1 > last.0 * 1.3, "upper tail {last:?}");
        assert!(first.1 < first.0 * 1.3, "lower tail {first:?}");
    }

    #[test]
    fn qq_student_t_recovers_nu() {
        let mut rng = Rng::new(83);
        let nu_true = 5.0;
        let series: Vec<f64> = (0..50_000)
            .map(|_| {
                let tau = rng.gamma(nu_true / 2.0, nu_true / 2.0);
                rng.normal() / tau.sqrt()
            })
            .collect();
        let res = qq_points(&series, QqDist::StudentT).unwrap();
        let nu = res.nu.unwrap();
        assert!((nu - nu_true).abs() < 0.8, "fitted nu {nu}");
        // With the right reference, even deep tails stay near the line.
        let t = res.points.len();
        for &(q, e) in &res.points[t / 100..t - t / 100] {
            assert!((q - e).abs() < 0.25, "({q}, {e})");
        }
    }
}
