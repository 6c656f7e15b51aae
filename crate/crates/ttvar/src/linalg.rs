//! Small shared regression helpers built on nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Result, TtvarError};

/// Multi-RHS least squares via the normal equations. Returns (beta, resid)
/// with beta: (n_reg x n_rhs), resid = y - x beta.
pub fn ols(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    weighted_ols(x, y, None)
}

/// Weighted least squares with optional per-row weights.
pub fn weighted_ols(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    weights: Option<&[f64]>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    assert_eq!(x.nrows(), y.nrows());
    let (xtx, xty) = match weights {
        None => (x.transpose() * x, x.transpose() * y),
        Some(w) => {
            assert_eq!(w.len(), x.nrows());
            let mut xw = x.clone();
            for (i, &wi) in w.iter().enumerate() {
                let s = wi.sqrt();
                for j in 0..x.ncols() {
                    xw[(i, j)] *= s;
                }
            }
            let mut yw = y.clone();
            for (i, &wi) in w.iter().enumerate() {
                let s = wi.sqrt();
                for j in 0..y.ncols() {
                    yw[(i, j)] *= s;
                }
            }
            (xw.transpose() * &xw, xw.transpose() * &yw)
        }
    };
    let chol = Cholesky::new(xtx)
        .ok_or_else(|| TtvarError::numerical("rank-deficient regressor matrix"))?;
    let beta = chol.solve(&xty);
    let resid = y - x * &beta;
    Ok((beta, resid))
}

/// Scalar-target convenience wrapper. Returns (beta, resid).
pub fn ols_vec(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let ym = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    let (b, r) = ols(x, &ym)?;
    Ok((b.column(0).into_owned(), r.column(0).into_owned()))
}

/// R-squared of a scalar regression given residuals and the target.
pub fn r_squared(y: &DVector<f64>, resid: &DVector<f64>) -> f64 {
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let rss: f64 = resid.iter().map(|v| v * v).sum();
    if tss == 0.0 {
        return 0.0;
    }
    1.0 - rss / tss
}
