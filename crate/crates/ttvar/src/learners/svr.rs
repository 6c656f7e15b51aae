//! Epsilon-insensitive support vector regression with an RBF kernel,
//! solved by SMO-style maximal-violating-pair coordinate optimization
//! on the standard doubled dual.

use nalgebra::DMatrix;

use crate::error::{Result, TtvarError};

/// Fitted SVR for a single output column. `beta[j] = alpha_j - alpha*_j`
/// over the training inputs; prediction is
/// sum_j beta_j K(x_j, x) + bias.
#[derive(Debug, Clone)]
pub struct SvrColumn {
    pub beta: Vec<f64>,
    pub bias: f64,
    /// Training inputs (scaled space), one row per sample.
    pub support: DMatrix<f64>,
    pub gamma: f64,
    pub converged: bool,
}

pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let mut d2 = 0.0;
    for (x, y) in a.iter().zip(b) {
        d2 += (x - y) * (x - y);
    }
    (-gamma * d2).exp()
}

const KKT_TOL: f64 = 1e-3;
const MAX_ITER: usize = 200_000;

/// Solve the epsilon-SVR dual for one target column.
///
/// The problem is written over 2N box variables alpha with labels
/// y_i = +1 (i < N) and -1 (i >= N), linear term p_i = eps -/+ t_i, and
/// Hessian y_i y_j K_ij. Pairs are picked by maximal KKT violation and
/// updated with the exact two-variable solve.
pub fn solve_svr_column(
    inputs: &DMatrix<f64>,
    targets: &[f64],
    c: f64,
    eps: f64,
    gamma: f64,
) -> Result<SvrColumn> {
    let n = inputs.nrows();
    if n < 1 {
        return Err(TtvarError::invalid("svr needs at least one sample"));
    }
    if c <= 0.0 || eps <= 0.0 || gamma <= 0.0 {
        return Err(TtvarError::invalid("svr hyperparameters must be positive"));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| inputs.row(i).iter().cloned().collect())
        .collect();
    let kernel: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| rbf_kernel(&rows[i], &rows[j], gamma)).collect())
        .collect();

    let m = 2 * n;
    let label = |i: usize| if i < n { 1.0 } else { -1.0 };
    let lin = |i: usize| {
        if i < n {
            eps - targets[i]
        } else {
            eps + targets[i - n]
        }
    };
    let mut alpha = vec![0.0; m];
    // u_k = sum_j y_j alpha_j K_kj; gradient G_i = y_i u_i + p_i.
    let mut u = vec![0.0; n];
    let mut bias = 0.0;
    let mut converged = false;

    for _ in 0..MAX_ITER {
        // Maximal violating pair over I_up and I_low.
        let mut m_up = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        let mut i_up = usize::MAX;
        let mut i_low = usize::MAX;
        for i in 0..m {
            let y = label(i);
            let g = y * u[i % n] + lin(i);
            let v = -y * g;
            let in_up = (y > 0.0 && alpha[i] < c) || (y < 0.0 && alpha[i] > 0.0);
            let in_low = (y < 0.0 && alpha[i] < c) || (y > 0.0 && alpha[i] > 0.0);
            if in_up && v > m_up {
                m_up = v;
                i_up = i;
            }
            if in_low && v < m_low {
                m_low = v;
                i_low = i;
            }
        }
        bias = (m_up + m_low) / 2.0;
        if m_up - m_low <= KKT_TOL {
            converged = true;
            break;
        }
        let (i, j) = (i_up, i_low);
        let (yi, yj) = (label(i), label(j));
        let (ki, kj) = (i % n, j % n);
        let gi = yi * u[ki] + lin(i);
        let gj = yj * u[kj] + lin(j);
        let quad =
            (kernel[ki][ki] + kernel[kj][kj] - 2.0 * kernel[ki][kj]).max(1e-12);
        // Move along alpha_i += yi*t, alpha_j -= yj*t.
        let mut t = -(yi * gi - yj * gj) / quad;
        let (lo_i, hi_i) = if yi > 0.0 { (-alpha[i], c - alpha[i]) } else { (alpha[i] - c, alpha[i]) };
        let (lo_j, hi_j) = if yj > 0.0 { (alpha[j] - c, alpha[j]) } else { (-alpha[j], c - alpha[j]) };
        t = t.clamp(lo_i.max(lo_j), hi_i.min(hi_j));
        if t == 0.0 {
            converged = true;
            break;
        }
        alpha[i] += yi * t;
        alpha[j] -= yj * t;
        for k in 0..n {
            u[k] += t * (kernel[k][ki] - kernel[k][kj]);
        }
    }

    let beta: Vec<f64> = (0..n).map(|i| alpha[i] - alpha[i + n]).collect();
    Ok(SvrColumn {
        beta,
        bias,
        support: inputs.clone(),
        gamma,
        converged,
    })
}

impl SvrColumn {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut s = self.bias;
        for (j, b) in self.beta.iter().enumerate() {
            if *b != 0.0 {
                let row: Vec<f64> = self.support.row(j).iter().cloned().collect();
                s += b * rbf_kernel(&row, x, self.gamma);
            }
        }
        s
    }

    /// Largest KKT violation of the fitted dual, for testing.
    pub fn kkt_violation(&self, targets: &[f64], c: f64, eps: f64) -> f64 {
        let n = self.beta.len();
        let f: Vec<f64> = (0..n)
            .map(|i| {
                let row: Vec<f64> = self.support.row(i).iter().cloned().collect();
                self.predict(&row) - targets[i]
            })
            .collect();
        let mut worst = 0.0_f64;
        for i in 0..n {
            let b = self.beta[i];
            // Box constraints.
            worst = worst.max(b.abs() - c);
            // epsilon-tube complementary slackness in terms of the
            // residual e_i = f(x_i) - y_i.
            let e = f[i];
            if b.abs() < 1e-12 {
                worst = worst.max(e.abs() - eps);
            } else if b > 0.0 && b < c {
                worst = worst.max((e + eps).abs());
            } else if b < 0.0 && b > -c {
                worst = worst.max((e - eps).abs());
            } else if (b - c).abs() <= 1e-12 {
                worst = worst.max(e + eps);
            } else if (b + c).abs() <= 1e-12 {
                worst = worst.max(-(e - eps));
            }
        }
        worst
    }
}
