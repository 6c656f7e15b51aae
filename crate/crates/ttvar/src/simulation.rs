//! Synthetic data-generating processes used as oracles for the statistical
//! components. Every generator is a deterministic function of (spec, seed)
//! through the crate's SplitMix64 stream; all processes discard a burn-in
//! of 500 observations.

use chrono::NaiveDate;
use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Result, TtvarError};
use crate::rng::Rng;
use crate::timeseries::ReturnPanel;
use crate::var_gaussian::{companion_spectral_radius, fit_var, residuals, VarModel};

pub const BURN_IN: usize = 500;

/// Parameters of a stable VAR(t) process y_t = c + sum A_i y_{t-i} + eps_t.
#[derive(Debug, Clone)]
pub struct VarTSpec {
    pub intercept: DVector<f64>,
    pub lag_matrices: Vec<DMatrix<f64>>,
    /// Scale matrix of the innovations.
    pub sigma: DMatrix<f64>,
    /// Degrees of freedom; use `f64::INFINITY` for Gaussian innovations.
    pub nu: f64,
    pub len: usize,
    pub seed: u64,
}

/// GARCH(1,1) parameters: sigma2_t = omega + alpha r_{t-1}^2 + beta sigma2_{t-1}.
#[derive(Debug, Clone, Copy)]
pub struct Garch11Spec {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub len: usize,
    pub seed: u64,
}

/// Nonlinear-residual process with recorded (mu, g, u) truth tracks:
/// y_t = c + A y_{t-1} + g_t + u_t with, per asset j,
/// g_j = amplitude * sd_j * tanh(gain * ((theta_j' eps_{t-1})^2 - 1)),
/// eps = g + u the composite innovation, u Student-t.
#[derive(Debug, Clone)]
pub struct NonlinearResidualSpec {
    pub intercept: DVector<f64>,
    pub lag_matrix: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub nu: f64,
    /// Correction amplitude as a multiple of the per-asset std of u.
    pub amplitude: f64,
    /// Scale applied inside tanh so the argument saturates.
    pub gain: f64,
    pub len: usize,
    pub seed: u64,
}

/// Hidden components of a generated nonlinear-residual panel.
#[derive(Debug, Clone)]
pub struct TruthTracks {
    pub mu: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub u: DMatrix<f64>,
}

fn synthetic_dates(t: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    (0..t as i64).map(|i| start + chrono::Duration::days(i)).collect()
}

fn check_stability(intercept: &DVector<f64>, lags: &[DMatrix<f64>], sigma: &DMatrix<f64>) -> Result<()> {
    let model = VarModel {
        p: lags.len(),
        intercept: intercept.clone(),
        lag_matrices: lags.to_vec(),
        sigma: sigma.clone(),
        symbols: (0..intercept.len()).map(|j| format!("S{j}")).collect(),
        train_range: (
            NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2000, 1, 2).unwrap(),
        ),
    };
    let radius = companion_spectral_radius(&model);
    if radius >= 1.0 {
        return Err(TtvarError::invalid(format!(
            "unstable VAR: companion spectral radius {radius:.4}"
        )));
    }
    Ok(())
}

/// Draw one multivariate t (or Gaussian for infinite nu) innovation using
/// the scale mixture: tau ~ Gamma(nu/2, nu/2), eps | tau ~ N(0, sigma/tau).
fn draw_innovation(chol: &Cholesky<f64, nalgebra::Dyn>, nu: f64, k: usize, rng: &mut Rng) -> DVector<f64> {
    let z = DVector::from_fn(k, |_, _| rng.normal());
    let mut eps = chol.l() * z;
    if nu.is_finite() {
        let tau = rng.gamma(nu / 2.0, nu / 2.0);
        eps /= tau.sqrt();
    }
    eps
}

/// Simulate a stable VAR with Student-t innovations.
pub fn gen_var_t(spec: &VarTSpec) -> Result<ReturnPanel> {
    let k = spec.intercept.len();
    let p = spec.lag_matrices.len();
    if spec.nu.is_finite() && spec.nu <= 2.0 {
        return Err(TtvarError::invalid("nu must exceed 2"));
    }
    check_stability(&spec.intercept, &spec.lag_matrices, &spec.sigma)?;
    let chol = Cholesky::new(spec.sigma.clone())
        .ok_or_else(|| TtvarError::numerical("sigma not SPD"))?;
    let mut rng = Rng::new(spec.seed);
    let total = spec.len + BURN_IN;
    let mut history: Vec<DVector<f64>> = vec![DVector::zeros(k); p.max(1)];
    let mut out = DMatrix::zeros(spec.len, k);
    for t in 0..total {
        let mut y = spec.intercept.clone();
        for (i, a) in spec.lag_matrices.iter().enumerate() {
            y += a * &history[i];
        }
        y += draw_innovation(&chol, spec.nu, k, &mut rng);
        if t >= BURN_IN {
            for j in 0..k {
                out[(t - BURN_IN, j)] = y[j];
            }
        }
        history.rotate_right(1);
        history[0] = y;
    }
    ReturnPanel::new(
        synthetic_dates(spec.len),
        (0..k).map(|j| format!("S{j}")).collect(),
        out,
    )
}

/// Simulate GARCH(1,1) returns r_t = sigma_t z_t with z iid N(0,1).
pub fn gen_garch11(spec: &Garch11Spec) -> Result<Vec<f64>> {
    if spec.omega <= 0.0 || spec.alpha < 0.0 || spec.beta < 0.0 {
        return Err(TtvarError::invalid("need omega > 0 and alpha, beta >= 0"));
    }
    if spec.alpha + spec.beta >= 1.0 {
        return Err(TtvarError::invalid("nonstationary: alpha + beta >= 1"));
    }
    let mut rng = Rng::new(spec.seed);
    let uncond = spec.omega / (1.0 - spec.alpha - spec.beta);
    let mut var = uncond;
    let mut prev_r2 = uncond;
    let mut out = Vec::with_capacity(spec.len);
    for t in 0..spec.len + BURN_IN {
        var = spec.omega + spec.alpha * prev_r2 + spec.beta * var;
        let r = var.sqrt() * rng.normal();
        prev_r2 = r * r;
        if t >= BURN_IN {
            out.push(r);
        }
    }
    Ok(out)
}

/// Logistic map x_{t+1} = 4 x_t (1 - x_t), demeaned. Deterministic chaos
/// used as a power oracle for the iid tests.
pub fn gen_logistic_map(len: usize, x0: f64) -> Result<Vec<f64>> {
    if x0 <= 0.0 || x0 >= 1.0 {
        return Err(TtvarError::invalid("x0 must lie in (0, 1)"));
    }
    // Fixed points of the map produce constant series.
    if (x0 - 0.75).abs() < 1e-12 || x0 < 1e-12 {
        return Err(TtvarError::invalid("x0 on a fixed point of the map"));
    }
    let mut x = x0;
    let mut out = Vec::with_capacity(len);
    for t in 0..len + BURN_IN {
        x = 4.0 * x * (1.0 - x);
        if t >= BURN_IN {
            out.push(x);
        }
    }
    let mean = out.iter().sum::<f64>() / out.len() as f64;
    for v in &mut out {
        *v -= mean;
    }
    Ok(out)
}

/// Simulate the nonlinear-residual process and return the panel together
/// with the hidden (mu, g, u) tracks. The construction guarantees y = mu +
/// g + u exactly per row.
pub fn gen_nonlinear_residual(spec: &NonlinearResidualSpec) -> Result<(ReturnPanel, TruthTracks)> {
    let k = spec.intercept.len();
    if spec.amplitude < 0.0 {
        return Err(TtvarError::invalid("amplitude must be >= 0"));
    }
    if spec.nu.is_finite() && spec.nu <= 2.0 {
        return Err(TtvarError::invalid("nu must exceed 2"));
    }
    check_stability(&spec.intercept, &[spec.lag_matrix.clone()], &spec.sigma)?;
    let chol = Cholesky::new(spec.sigma.clone())
        .ok_or_else(|| TtvarError::numerical("sigma not SPD"))?;
    let mut rng = Rng::new(spec.seed);

    // Per-asset std of u under the t scale matrix.
    let u_std: Vec<f64> = (0..k)
        .map(|j| {
            let var = if spec.nu.is_finite() {
                spec.sigma[(j, j)] * spec.nu / (spec.nu - 2.0)
            } else {
                spec.sigma[(j, j)]
            };
            var.sqrt()
        })
        .collect();

    // Fixed mixing directions: theta_j couples asset j's correction to a
    // deterministic rotation of the composite innovation.
    let theta = DMatrix::from_fn(k, k, |r, c| {
        let ang = (1 + r * k + c) as f64;
        (ang * 2.399963).sin()
    });

    let total = spec.len + BURN_IN;
    let mut y_prev = DVector::zeros(k);
    let mut eps_prev = DVector::zeros(k);
    let mut y_rows = DMatrix::zeros(spec.len, k);
    let mut mu_rows = DMatrix::zeros(spec.len, k);
    let mut g_rows = DMatrix::zeros(spec.len, k);
    let mut u_rows = DMatrix::zeros(spec.len, k);
    for t in 0..total {
        let mu = &spec.intercept + &spec.lag_matrix * &y_prev;
        let mut g = DVector::zeros(k);
        for j in 0..k {
            let mut arg = 0.0;
            for m in 0..k {
                // Normalize each input so the tanh argument scale is gain.
                arg += theta[(j, m)] * eps_prev[m] / u_std[m];
            }
            // Even in the lagged innovation: the correction is orthogonal
            // to every linear predictor of the level, so a fitted VAR
            // cannot absorb it and it survives intact in the residuals.
            g[j] = spec.amplitude * u_std[j] * (spec.gain * (arg * arg - 1.0)).tanh();
        }
        let u = draw_innovation(&chol, spec.nu, k, &mut rng);
        let eps = &g + &u;
        let y = &mu + &eps;
        if t >= BURN_IN {
            let r = t - BURN_IN;
            for j in 0..k {
                y_rows[(r, j)] = y[j];
                mu_rows[(r, j)] = mu[j];
                g_rows[(r, j)] = g[j];
                u_rows[(r, j)] = u[j];
            }
        }
        y_prev = y;
        eps_prev = eps;
    }
    let panel = ReturnPanel::new(
        synthetic_dates(spec.len),
        (0..k).map(|j| format!("S{j}")).collect(),
        y_rows,
    )?;
    let truth = TruthTracks { mu: mu_rows, g: g_rows, u: u_rows };
    // Generation-time guarantee: whenever the nonlinear correction is
    // active and the sample is long enough to estimate a VAR reliably,
    // the best linear one-step predictor must have strictly higher MSE
    // than the true conditional mean mu + g (whose error is just u).
    if spec.amplitude > 0.0 && spec.len >= 1000 {
        let model = fit_var(&panel, 1)?;
        let res = residuals(&model, &panel)?;
        let lin_mse = res.residuals.iter().map(|v| v * v).sum::<f64>()
            / res.residuals.len() as f64;
        let oracle_mse =
            truth.u.iter().map(|v| v * v).sum::<f64>() / truth.u.len() as f64;
        if lin_mse <= oracle_mse {
            return Err(TtvarError::numerical(
                "nonlinear DGP check failed: linear predictor matched the oracle",
            ));
        }
    }
    Ok((panel, truth))
}

/// Default 3-asset nonlinear-residual specification used by the
/// verification experiments: stable VAR(1) with moderate cross terms,
/// t(6) innovations and a saturating correction.
pub fn default_nonlinear_spec(len: usize, amplitude: f64, seed: u64) -> NonlinearResidualSpec {
    let k = 3;
    let lag = DMatrix::from_row_slice(
        k,
        k,
        &[0.25, 0.10, 0.00, 0.05, 0.20, 0.10, 0.00, 0.05, 0.30],
    );
    let sigma = DMatrix::from_row_slice(
        k,
        k,
        &[1.00, 0.30, 0.10, 0.30, 1.00, 0.20, 0.10, 0.20, 1.00],
    );
    NonlinearResidualSpec {
        intercept: DVector::from_element(k, 0.05),
        lag_matrix: lag,
        sigma,
        nu: 6.0,
        amplitude,
        gain: 2.5,
        len,
        seed,
    }
}
