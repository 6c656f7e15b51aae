//! Shared helpers for unit tests.

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::timeseries::ReturnPanel;

/// Wrap a raw return matrix in a panel with synthetic consecutive dates.
pub(crate) fn synthetic_panel(returns: DMatrix<f64>, k: usize) -> ReturnPanel {
    let t = returns.nrows();
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    let dates: Vec<NaiveDate> = (0..t as i64)
        .map(|i| start + chrono::Duration::days(i))
        .collect();
    let symbols: Vec<String> = (0..k).map(|j| format!("S{j}")).collect();
    ReturnPanel::new(dates, symbols, returns).unwrap()
}
