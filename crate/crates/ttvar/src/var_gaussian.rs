//! Gaussian VAR estimation, lag-order selection, stability and residuals.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TtvarError};
use crate::linalg;
use crate::timeseries::ReturnPanel;

/// Fitted VAR(p): y_t = c + sum_i A_i y_{t-i} + eps_t.
#[derive(Debug, Clone)]
pub struct VarModel {
    pub p: usize,
    pub intercept: DVector<f64>,
    pub lag_matrices: Vec<DMatrix<f64>>,
    /// Residual covariance, dof-corrected by T_eff - K p - 1.
    pub sigma: DMatrix<f64>,
    pub symbols: Vec<String>,
    pub train_range: (NaiveDate, NaiveDate),
}

/// Per-lag information criteria and the chosen lag per criterion.
#[derive(Debug, Clone)]
pub struct LagSelection {
    /// (lag, aic, bic, fpe, hqic), covering 0..=p_max.
    pub rows: Vec<(usize, f64, f64, f64, f64)>,
    pub chosen: BTreeMap<String, usize>,
}

/// Filtered one-step residuals aligned to the dates they explain.
#[derive(Debug, Clone)]
pub struct ResidualPanel {
    pub dates: Vec<NaiveDate>,
    pub symbols: Vec<String>,
    /// (T - p) x K.
    pub residuals: DMatrix<f64>,
}

impl ResidualPanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Stack the lagged design matrix: row t has [1, y_{t-1}, ..., y_{t-p}].
/// Rows cover panel indices start..T where start >= p.
pub(crate) fn lagged_design(panel: &ReturnPanel, p: usize, start: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let t = panel.len();
    let k = panel.n_assets();
    assert!(start >= p && start < t);
    let n = t - start;
    let mut z = DMatrix::zeros(n, 1 + k * p);
    let mut y = DMatrix::zeros(n, k);
    for (row, ti) in (start..t).enumerate() {
        z[(row, 0)] = 1.0;
        for lag in 1..=p {
            for j in 0..k {
                z[(row, (lag - 1) * k + j + 1)] = panel.returns[(ti - lag, j)];
            }
        }
        for j in 0..k {
            y[(row, j)] = panel.returns[(ti, j)];
        }
    }
    (z, y)
}

pub(crate) fn unpack_coefficients(
    beta: &DMatrix<f64>,
    k: usize,
    p: usize,
) -> (DVector<f64>, Vec<DMatrix<f64>>) {
    // beta: (1 + K p) x K, column per equation.
    let intercept = DVector::from_fn(k, |j, _| beta[(0, j)]);
    let mut lags = Vec::with_capacity(p);
    for lag in 0..p {
        // A_lag[j][m] = coefficient of y_{t-lag-1, m} in equation j.
        lags.push(DMatrix::from_fn(k, k, |j, m| beta[(lag * k + m + 1, j)]));
    }
    (intercept, lags)
}

/// Equation-by-equation least squares fit of a VAR(p).
pub fn fit_var(panel: &ReturnPanel, p: usize) -> Result<VarModel> {
    let t = panel.len();
    let k = panel.n_assets();
    if p == 0 {
        return Err(TtvarError::invalid("fit_var requires p >= 1; use p = 0 only in lag selection"));
    }
    if t < p || t - p < k * p + k + 5 {
        return Err(TtvarError::invalid(format!(
            "sample too small: T={t}, p={p}, K={k}"
        )));
    }
    let (z, y) = lagged_design(panel, p, p);
    let (beta, resid) = linalg::ols(&z, &y)?;
    let t_eff = (t - p) as f64;
    let dof = t_eff - (k * p) as f64 - 1.0;
    let sigma = (resid.transpose() * &resid) / dof;
    let (intercept, lag_matrices) = unpack_coefficients(&beta, k, p);
    Ok(VarModel {
        p,
        intercept,
        lag_matrices,
        sigma,
        symbols: panel.symbols.clone(),
        train_range: (panel.dates[0], panel.dates[t - 1]),
    })
}

fn ln_det(m: &DMatrix<f64>) -> Result<f64> {
    nalgebra::Cholesky::new(m.clone())
        .map(|c| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
        .ok_or_else(|| TtvarError::numerical("covariance not positive definite"))
}

/// Score lags 0..=p_max on the common effective sample (rows p_max..T) so
/// that criteria are comparable across lags.
///
/// AIC  = ln det S + 2 n / T_eff           with n = p K^2
/// BIC  = ln det S + ln(T_eff) n / T_eff
/// HQIC = ln det S + 2 ln ln(T_eff) n / T_eff
/// FPE  = ((T_eff + m)/(T_eff - m))^K det S  with m = K p + 1
/// where S is the ML residual covariance (no dof correction).
pub fn select_lag(panel: &ReturnPanel, p_max: usize) -> Result<LagSelection> {
    let t = panel.len();
    let k = panel.n_assets();
    if t <= p_max + k * p_max + k + 5 {
        return Err(TtvarError::invalid(format!(
            "p_max {p_max} too large for sample T={t}, K={k}"
        )));
    }
    let t_eff = (t - p_max) as f64;
    let mut rows = Vec::with_capacity(p_max + 1);
    for p in 0..=p_max {
        let (z, y) = if p == 0 {
            let n = t - p_max;
            let z = DMatrix::from_element(n, 1, 1.0);
            let y = panel.returns.rows(p_max, n).into_owned();
            (z, y)
        } else {
            lagged_design(panel, p, p_max)
        };
        let (_, resid) = linalg::ols(&z, &y)?;
        let sigma_ml = (resid.transpose() * &resid) / t_eff;
        let ld = ln_det(&sigma_ml)?;
        let n_params = (p * k * k) as f64;
        let aic = ld + 2.0 * n_params / t_eff;
        let bic = ld + t_eff.ln() * n_params / t_eff;
        let hqic = ld + 2.0 * t_eff.ln().ln() * n_params / t_eff;
        let m = (k * p + 1) as f64;
        let fpe = ((t_eff + m) / (t_eff - m)).powi(k as i32) * ld.exp();
        rows.push((p, aic, bic, fpe, hqic));
    }
    let argmin = |f: &dyn Fn(&(usize, f64, f64, f64, f64)) -> f64| -> usize {
        rows.iter()
            .min_by(|a, b| f(a).partial_cmp(&f(b)).unwrap())
            .unwrap()
            .0
    };
    let mut chosen = BTreeMap::new();
    chosen.insert("aic".to_string(), argmin(&|r| r.1));
    chosen.insert("bic".to_string(), argmin(&|r| r.2));
    chosen.insert("fpe".to_string(), argmin(&|r| r.3));
    chosen.insert("hqic".to_string(), argmin(&|r| r.4));
    Ok(LagSelection { rows, chosen })
}

/// Largest eigenvalue modulus of the (K p x K p) companion matrix.
/// Stability requires the value to be strictly below one.
pub fn companion_spectral_radius(model: &VarModel) -> f64 {
    let k = model.intercept.len();
    let p = model.p;
    let n = k * p;
    let mut comp = DMatrix::zeros(n, n);
    for (i, a) in model.lag_matrices.iter().enumerate() {
        for r in 0..k {
            for c in 0..k {
                comp[(r, i * k + c)] = a[(r, c)];
            }
        }
    }
    for i in 0..k * (p - 1) {
        comp[(k + i, i)] = 1.0;
    }
    comp.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
}

/// eps_t = y_t - c - sum_i A_i y_{t-i} for every evaluable row.
pub fn residuals(model: &VarModel, panel: &ReturnPanel) -> Result<ResidualPanel> {
    if panel.symbols != model.symbols {
        return Err(TtvarError::invalid("symbol mismatch between model and panel"));
    }
    let t = panel.len();
    let p = model.p;
    if t < p + 1 {
        return Err(TtvarError::invalid("panel shorter than p + 1 rows"));
    }
    let k = panel.n_assets();
    let mut res = DMatrix::zeros(t - p, k);
    for ti in p..t {
        let mut pred = model.intercept.clone();
        for (i, a) in model.lag_matrices.iter().enumerate() {
            let ylag = panel.returns.row(ti - i - 1).transpose();
            pred += a * ylag;
        }
        for j in 0..k {
            res[(ti - p, j)] = panel.returns[(ti, j)] - pred[j];
        }
    }
    Ok(ResidualPanel {
        dates: panel.dates[p..].to_vec(),
        symbols: panel.symbols.clone(),
        residuals: res,
    })
}

/// Pearson correlation matrix of the residual columns.
pub fn residual_correlation(res: &ResidualPanel) -> Result<DMatrix<f64>> {
    let n = res.len();
    if n < 3 {
        return Err(TtvarError::invalid("need at least 3 residual rows"));
    }
    let k = res.symbols.len();
    let means: Vec<f64> = (0..k).map(|j| res.residuals.column(j).mean()).collect();
    let mut cov = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let mut s = 0.0;
            for t in 0..n {
                s += (res.residuals[(t, i)] - means[i]) * (res.residuals[(t, j)] - means[j]);
            }
            cov[(i, j)] = s / n as f64;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    for j in 0..k {
        if cov[(j, j)] <= 0.0 {
            return Err(TtvarError::numerical(format!(
                "zero-variance residual column {}",
                res.symbols[j]
            )));
        }
    }
    let mut corr = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            corr[(i, j)] = cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt();
        }
    }
    Ok(corr)
}

/// One-step forecast c + sum_i A_i recent[-i]; `recent` holds exactly p
/// rows, newest last.
pub fn forecast_one_step(model: &VarModel, recent: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = model.intercept.len();
    if recent.nrows() != model.p || recent.ncols() != k {
        return Err(TtvarError::invalid(format!(
            "expected {} x {} recent rows, got {} x {}",
            model.p,
            k,
            recent.nrows(),
            recent.ncols()
        )));
    }
    let mut f = model.intercept.clone();
    for (i, a) in model.lag_matrices.iter().enumerate() {
        let ylag = recent.row(model.p - 1 - i).transpose();
        f += a * ylag;
    }
    Ok(f)
}

/// Serialize a fitted model: `<stem>.header` (kind, p, K, symbols, range,
/// extra key/values) + `<stem>.coef.csv` (name,value per coefficient).
pub fn save_model_files(
    stem: &Path,
    kind: &str,
    model: &VarModel,
    extra_header: &[(String, String)],
) -> Result<()> {
    let k = model.intercept.len();
    let mut header = String::new();
    header.push_str(&format!("kind = {kind}\n"));
    header.push_str(&format!("p = {}\n", model.p));
    header.push_str(&format!("k = {k}\n"));
    header.push_str(&format!("symbols = {}\n", model.symbols.join(",")));
    header.push_str(&format!(
        "train_range = {}:{}\n",
        model.train_range.0, model.train_range.1
    ));
    for (key, val) in extra_header {
        header.push_str(&format!("{key} = {val}\n"));
    }
    std::fs::write(stem.with_extension("header"), header)?;

    let mut coef = String::from("name,value\n");
    for j in 0..k {
        coef.push_str(&format!("c[{j}],{:.17e}\n", model.intercept[j]));
    }
    for (i, a) in model.lag_matrices.iter().enumerate() {
        for r in 0..k {
            for c in 0..k {
                coef.push_str(&format!("A{}[{r}][{c}],{:.17e}\n", i + 1, a[(r, c)]));
            }
        }
    }
    for r in 0..k {
        for c in 0..k {
            coef.push_str(&format!("sigma[{r}][{c}],{:.17e}\n", model.sigma[(r, c)]));
        }
    }
    std::fs::write(stem.with_extension("coef.csv"), coef)?;
    Ok(())
}

/// Read back a model saved by [`save_model_files`]. Returns the model, the
/// kind string and any extra header fields.
pub fn load_model_files(stem: &Path) -> Result<(VarModel, String, BTreeMap<String, String>)> {
    let header_text = std::fs::read_to_string(stem.with_extension("header"))?;
    let mut fields = BTreeMap::new();
    for line in header_text.lines() {
        if let Some((key, val)) = line.split_once('=') {
            fields.insert(key.trim().to_string(), val.trim().to_string());
        }
    }
    let get = |f: &BTreeMap<String, String>, k: &str| -> Result<String> {
        f.get(k)
            .cloned()
            .ok_or_else(|| TtvarError::invalid(format!("missing header field {k}")))
    };
    let kind = get(&fields, "kind")?;
    let p: usize = get(&fields, "p")?
        .parse()
        .map_err(|e| TtvarError::invalid(format!("bad p: {e}")))?;
    let k: usize = get(&fields, "k")?
        .parse()
        .map_err(|e| TtvarError::invalid(format!("bad k: {e}")))?;
    let symbols: Vec<String> = get(&fields, "symbols")?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let range_raw = get(&fields, "train_range")?;
    let (lo, hi) = range_raw
        .split_once(':')
        .ok_or_else(|| TtvarError::invalid("bad train_range"))?;
    let parse_date = |s: &str| {
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map_err(|e| TtvarError::invalid(format!("bad date: {e}")))
    };
    let train_range = (parse_date(lo)?, parse_date(hi)?);

    let coef_text = std::fs::read_to_string(stem.with_extension("coef.csv"))?;
    let mut values = BTreeMap::new();
    for line in coef_text.lines().skip(1) {
        if let Some((name, val)) = line.split_once(',') {
            let v: f64 = val
                .parse()
                .map_err(|e| TtvarError::invalid(format!("bad value for {name}: {e}")))?;
            values.insert(name.to_string(), v);
        }
    }
    let fetch = |name: &str| -> Result<f64> {
        values
            .get(name)
            .copied()
            .ok_or_else(|| TtvarError::invalid(format!("missing coefficient {name}")))
    };
    let intercept = DVector::from_fn(k, |j, _| values[&format!("c[{j}]")]);
    let mut lag_matrices = Vec::with_capacity(p);
    for i in 1..=p {
        let mut a = DMatrix::zeros(k, k);
        for r in 0..k {
            for c in 0..k {
                a[(r, c)] = fetch(&format!("A{i}[{r}][{c}]"))?;
            }
        }
        lag_matrices.push(a);
    }
    let mut sigma = DMatrix::zeros(k, k);
    for r in 0..k {
        for c in 0..k {
            sigma[(r, c)] = fetch(&format!("sigma[{r}][{c}]"))?;
        }
    }
    Ok((
        VarModel { p, intercept, lag_matrices, sigma, symbols, train_range },
        kind,
        fields,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use approx::assert_relative_eq;

    use crate::testutil::synthetic_panel;

    fn ar_half_panel(t: usize, k: usize, seed: u64) -> ReturnPanel {
        let mut rng = Rng::new(seed);
        let mut m = DMatrix::zeros(t, k);
        let mut prev = vec![0.0; k];
        for i in 0..t {
            for j in 0..k {
                let y = 0.5 * prev[j] + rng.normal();
                m[(i, j)] = y;
            }
            for j in 0..k {
                prev[j] = m[(i, j)];
            }
        }
        synthetic_panel(m, k)
    }

    #[test]
    fn recovers_diagonal_ar() {
        let panel = ar_half_panel(5000, 2, 11);
        let model = fit_var(&panel, 1).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let target = if r == c { 0.5 } else { 0.0 };
                assert!(
                    (model.lag_matrices[0][(r, c)] - target).abs() < 0.03,
                    "A[{r}][{c}] = {}",
                    model.lag_matrices[0][(r, c)]
                );
            }
            assert!(model.intercept[r].abs() < 0.05);
        }
    }

    #[test]
    fn matches_scalar_ar1_ols() {
        let panel = ar_half_panel(500, 1, 3);
        let model = fit_var(&panel, 1).unwrap();
        // Hand-rolled scalar OLS of y_t on (1, y_{t-1}).
        let y: Vec<f64> = panel.returns.column(0).iter().copied().collect();
        let n = y.len() - 1;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for t in 1..y.len() {
            sx += y[t - 1];
            sy += y[t];
            sxx += y[t - 1] * y[t - 1];
            sxy += y[t - 1] * y[t];
        }
        let nf = n as f64;
        let slope = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
        let inter = (sy - slope * sx) / nf;
        assert_relative_eq!(model.lag_matrices[0][(0, 0)], slope, epsilon = 1e-10);
        assert_relative_eq!(model.intercept[0], inter, epsilon = 1e-10);
    }

    #[test]
    fn residuals_orthogonal_to_regressors() {
        let panel = ar_half_panel(800, 2, 5);
        let model = fit_var(&panel, 1).unwrap();
        let res = residuals(&model, &panel).unwrap();
        // Column j residuals orthogonal to each lagged regressor.
        for j in 0..2 {
            for m in 0..2 {
                let mut dot = 0.0;
                for t in 0..res.len() {
                    dot += res.residuals[(t, j)] * panel.returns[(t, m)];
                }
                assert!(dot.abs() < 1e-6, "dot {dot}");
            }
            let sum: f64 = res.residuals.column(j).iter().sum();
            assert!(sum.abs() < 1e-6);
        }
    }

    #[test]
    fn null_model_residuals_equal_panel() {
        let panel = ar_half_panel(50, 2, 8);
        let model = VarModel {
            p: 1,
            intercept: DVector::zeros(2),
            lag_matrices: vec![DMatrix::zeros(2, 2)],
            sigma: DMatrix::identity(2, 2),
            symbols: panel.symbols.clone(),
            train_range: (panel.dates[0], *panel.dates.last().unwrap()),
        };
        let res = residuals(&model, &panel).unwrap();
        for t in 0..res.len() {
            for j in 0..2 {
                assert_relative_eq!(res.residuals[(t, j)], panel.returns[(t + 1, j)]);
            }
        }
    }

    #[test]
    fn noiseless_dgp_zero_residuals() {
        let k = 2;
        let t = 40;
        let mut m = DMatrix::zeros(t, k);
        m[(0, 0)] = 1.0;
        m[(0, 1)] = -0.5;
        for i in 1..t {
            for j in 0..k {
                m[(i, j)] = 0.5 * m[(i - 1, j)];
            }
        }
        let panel = synthetic_panel(m, k);
        let model = VarModel {
            p: 1,
            intercept: DVector::zeros(k),
            lag_matrices: vec![DMatrix::identity(k, k) * 0.5],
            sigma: DMatrix::identity(k, k),
            symbols: panel.symbols.clone(),
            train_range: (panel.dates[0], *panel.dates.last().unwrap()),
        };
        let res = residuals(&model, &panel).unwrap();
        assert!(res.residuals.amax() < 1e-14);
    }

    #[test]
    fn spectral_radius_cases() {
        let mk = |a: Vec<DMatrix<f64>>, k: usize| VarModel {
            p: a.len(),
            intercept: DVector::zeros(k),
            lag_matrices: a,
            sigma: DMatrix::identity(k, k),
            symbols: (0..k).map(|j| format!("S{j}")).collect(),
            train_range: (
                NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2000, 1, 2).unwrap(),
            ),
        };
        let m = mk(vec![DMatrix::identity(2, 2) * 0.5], 2);
        assert_relative_eq!(companion_spectral_radius(&m), 0.5, epsilon = 1e-10);

        let m = mk(vec![DMatrix::identity(2, 2)], 2);
        assert_relative_eq!(companion_spectral_radius(&m), 1.0, epsilon = 1e-10);

        // K=1, p=2: largest root modulus of z^2 - 0.5 z - 0.3.
        let m = mk(
            vec![
                DMatrix::from_element(1, 1, 0.5),
                DMatrix::from_element(1, 1, 0.3),
            ],
            1,
        );
        let expected = (0.5 + (0.25f64 + 1.2).sqrt()) / 2.0;
        assert_relative_eq!(companion_spectral_radius(&m), expected, epsilon = 1e-8);
    }

    #[test]
    fn residual_correlation_basics() {
        // Duplicated column -> off-diagonal 1.
        let mut m = DMatrix::zeros(10, 2);
        let mut rng = Rng::new(4);
        for i in 0..10 {
            let v = rng.normal();
            m[(i, 0)] = v;
            m[(i, 1)] = v;
        }
        let res = ResidualPanel {
            dates: (0..10)
                .map(|i| NaiveDate::from_ymd_opt(2000, 1, 1 + i as u32).unwrap())
                .collect(),
            symbols: vec!["A".into(), "B".into()],
            residuals: m,
        };
        let corr = residual_correlation(&res).unwrap();
        assert_relative_eq!(corr[(0, 1)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(corr[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn independent_columns_near_zero_correlation() {
        let mut rng = Rng::new(77);
        let n = 100_000;
        let m = DMatrix::from_fn(n, 2, |_, _| rng.normal());
        let res = ResidualPanel {
            dates: (0..n as i64)
                .map(|i| NaiveDate::from_ymd_opt(2000, 1, 1).unwrap() + chrono::Duration::days(i))
                .collect(),
            symbols: vec!["A".into(), "B".into()],
            residuals: m,
        };
        let corr = residual_correlation(&res).unwrap();
        assert!(corr[(0, 1)].abs() < 0.01, "corr {}", corr[(0, 1)]);
    }

    #[test]
    fn forecast_rules() {
        let mk = |c: DVector<f64>, a: Vec<DMatrix<f64>>, k: usize| VarModel {
            p: a.len(),
            intercept: c,
            lag_matrices: a,
            sigma: DMatrix::identity(k, k),
            symbols: (0..k).map(|j| format!("S{j}")).collect(),
            train_range: (
                NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2000, 1, 2).unwrap(),
            ),
        };
        // Random-walk rule: c = 0, A = I.
        let m = mk(DVector::zeros(2), vec![DMatrix::identity(2, 2)], 2);
        let recent = DMatrix::from_row_slice(1, 2, &[0.3, -0.7]);
        let f = forecast_one_step(&m, &recent).unwrap();
        assert_relative_eq!(f[0], 0.3);
        assert_relative_eq!(f[1], -0.7);

        // Constant model.
        let m = mk(
            DVector::from_row_slice(&[1.5, 2.5]),
            vec![DMatrix::zeros(2, 2)],
            2,
        );
        let f = forecast_one_step(&m, &recent).unwrap();
        assert_relative_eq!(f[0], 1.5);
        assert_relative_eq!(f[1], 2.5);

        // K=1, p=2, A = (0.5, 0.25), recent [1, 2] newest last.
        let m = mk(
            DVector::zeros(1),
            vec![
                DMatrix::from_element(1, 1, 0.5),
                DMatrix::from_element(1, 1, 0.25),
            ],
            1,
        );
        let recent = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let f = forecast_one_step(&m, &recent).unwrap();
        assert_relative_eq!(f[0], 1.25);

        // Wrong row count.
        let bad = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(forecast_one_step(&m, &bad).is_err());
    }

    #[test]
    fn lag_selection_brute_force_formulas() {
        let panel = ar_half_panel(600, 2, 21);
        let sel = select_lag(&panel, 4).unwrap();
        // Oracle: refit each lag on the common sample and evaluate the
        // formulas independently.
        let t_eff = (panel.len() - 4) as f64;
        let k = 2usize;
        for &(p, aic, bic, fpe, hqic) in &sel.rows {
            let (z, y) = if p == 0 {
                (
                    DMatrix::from_element(panel.len() - 4, 1, 1.0),
                    panel.returns.rows(4, panel.len() - 4).into_owned(),
                )
            } else {
                lagged_design(&panel, p, 4)
            };
            let (_, resid) = linalg::ols(&z, &y).unwrap();
            let s = (resid.transpose() * &resid) / t_eff;
            let ld = nalgebra::Cholesky::new(s).unwrap().l().diagonal().iter()
                .map(|d| 2.0 * d.ln())
                .sum::<f64>();
            let n = (p * k * k) as f64;
            assert_relative_eq!(aic, ld + 2.0 * n / t_eff, epsilon = 1e-10);
            assert_relative_eq!(bic, ld + t_eff.ln() * n / t_eff, epsilon = 1e-10);
            assert_relative_eq!(hqic, ld + 2.0 * t_eff.ln().ln() * n / t_eff, epsilon = 1e-10);
            let m = (k * p + 1) as f64;
            assert_relative_eq!(
                fpe,
                ((t_eff + m) / (t_eff - m)).powi(k as i32) * ld.exp(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn forecast_affine_equivariant() {
        let panel = ar_half_panel(800, 2, 31);
        let model = fit_var(&panel, 1).unwrap();
        let scaled = synthetic_panel(panel.returns.clone() * 3.0, 2);
        let model_s = fit_var(&scaled, 1).unwrap();
        let recent = panel.returns.rows(panel.len() - 1, 1).into_owned();
        let f = forecast_one_step(&model, &recent).unwrap();
        let fs = forecast_one_step(&model_s, &(recent * 3.0)).unwrap();
        for j in 0..2 {
            assert_relative_eq!(fs[j], 3.0 * f[j], max_relative = 1e-8);
        }
    }

    #[test]
    fn model_file_round_trip() {
        let panel = ar_half_panel(300, 2, 51);
        let model = fit_var(&panel, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("model");
        save_model_files(&stem, "var", &model, &[]).unwrap();
        let (loaded, kind, _) = load_model_files(&stem).unwrap();
        assert_eq!(kind, "var");
        assert_eq!(loaded.p, 2);
        assert_eq!(loaded.symbols, model.symbols);
        for (a, b) in model.intercept.iter().zip(loaded.intercept.iter()) {
            assert_relative_eq!(a, b);
        }
        for (ma, mb) in model.lag_matrices.iter().zip(loaded.lag_matrices.iter()) {
            for (a, b) in ma.iter().zip(mb.iter()) {
                assert_relative_eq!(a, b);
            }
        }
    }
}
