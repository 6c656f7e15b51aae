//! Price/return panels and the windowing vocabulary shared by every
//! downstream module.
//!
//! The canonical input is a wide CSV: header `date,SYM1,...,SYMK`, ISO-8601
//! dates, `.` decimal separator. Rows with any missing or non-positive
//! price are dropped whole; interpolation would fabricate returns.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{Result, TtvarError};

/// Date-indexed matrix of positive adjusted closes.
#[derive(Debug, Clone)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub symbols: Vec<String>,
    /// T x K, row per date.
    pub prices: DMatrix<f64>,
}

/// Date-indexed matrix of log returns; one row fewer than its source panel.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    pub dates: Vec<NaiveDate>,
    pub symbols: Vec<String>,
    /// T x K, row per date.
    pub returns: DMatrix<f64>,
}

/// Walk-forward window sizes and refit cadences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPlan {
    pub train_len: usize,
    pub test_len: usize,
    pub refit_stride_var: usize,
    pub refit_stride_learner: usize,
}

impl WindowPlan {
    pub fn validate(&self, p_max: usize, k: usize) -> Result<()> {
        if self.train_len < (p_max + 1) * k + 10 {
            return Err(TtvarError::invalid(format!(
                "train_len {} too small for p_max {} and K {}",
                self.train_len, p_max, k
            )));
        }
        if self.test_len == 0 {
            return Err(TtvarError::invalid("test_len must be >= 1"));
        }
        if self.refit_stride_var == 0 || self.refit_stride_learner == 0 {
            return Err(TtvarError::invalid("refit strides must be >= 1"));
        }
        Ok(())
    }
}

impl PricePanel {
    pub fn new(dates: Vec<NaiveDate>, symbols: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(TtvarError::invalid("panel needs at least one symbol"));
        }
        if dates.len() < 2 {
            return Err(TtvarError::invalid("panel needs at least two rows"));
        }
        if prices.nrows() != dates.len() || prices.ncols() != symbols.len() {
            return Err(TtvarError::invalid("price matrix shape mismatch"));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(TtvarError::invalid(format!(
                    "dates not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(TtvarError::invalid("all prices must be finite and positive"));
        }
        Ok(PricePanel { dates, symbols, prices })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_assets(&self) -> usize {
        self.symbols.len()
    }
}

impl ReturnPanel {
    pub fn new(dates: Vec<NaiveDate>, symbols: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        if symbols.is_empty() || dates.is_empty() {
            return Err(TtvarError::invalid("return panel must be nonempty"));
        }
        if returns.nrows() != dates.len() || returns.ncols() != symbols.len() {
            return Err(TtvarError::invalid("return matrix shape mismatch"));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(TtvarError::invalid("dates not strictly increasing"));
            }
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(TtvarError::invalid("returns must be finite"));
        }
        Ok(ReturnPanel { dates, symbols, returns })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_assets(&self) -> usize {
        self.symbols.len()
    }

    /// Column by symbol name.
    pub fn column(&self, symbol: &str) -> Option<Vec<f64>> {
        let idx = self.symbols.iter().position(|s| s == symbol)?;
        Some(self.returns.column(idx).iter().copied().collect())
    }

    /// Sub-panel over rows [start, end).
    pub fn slice_rows(&self, start: usize, end: usize) -> ReturnPanel {
        assert!(start < end && end <= self.len());
        ReturnPanel {
            dates: self.dates[start..end].to_vec(),
            symbols: self.symbols.clone(),
            returns: self.returns.rows(start, end - start).into_owned(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("date");
        for s in &self.symbols {
            out.push(',');
            out.push_str(s);
        }
        out.push('\n');
        for (i, d) in self.dates.iter().enumerate() {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            for j in 0..self.symbols.len() {
                out.push(',');
                out.push_str(&format!("{:.*e}", 16, self.returns[(i, j)]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(path: &Path, symbols: Option<&[String]>) -> Result<ReturnPanel> {
        let (dates, syms, values, _) = read_wide_csv(path, symbols, false)?;
        ReturnPanel::new(dates, syms, values)
    }
}

/// Parse a wide CSV. When `require_positive` is set, rows with any missing
/// or non-positive cell are dropped; otherwise only missing cells drop the
/// row. Returns (dates, symbols, matrix, dropped_row_count).
fn read_wide_csv(
    path: &Path,
    symbols: Option<&[String]>,
    require_positive: bool,
) -> Result<(Vec<NaiveDate>, Vec<String>, DMatrix<f64>, usize)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| TtvarError::invalid("empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2 {
        return Err(TtvarError::Parse {
            line: 1,
            msg: "header must name a date column plus at least one symbol".into(),
        });
    }
    let file_symbols: Vec<String> = cols[1..].iter().map(|s| s.to_string()).collect();

    // Column order follows the request order when a subset is given.
    let (selected, col_idx): (Vec<String>, Vec<usize>) = match symbols {
        Some(req) => {
            let mut idx = Vec::with_capacity(req.len());
            for s in req {
                match file_symbols.iter().position(|f| f == s) {
                    Some(i) => idx.push(i),
                    None => {
                        return Err(TtvarError::invalid(format!("unknown symbol '{s}'")));
                    }
                }
            }
            (req.to_vec(), idx)
        }
        None => (
            file_symbols.clone(),
            (0..file_symbols.len()).collect(),
        ),
    };

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    let mut dropped = 0usize;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != cols.len() {
            return Err(TtvarError::Parse {
                line: lineno + 1,
                msg: format!("expected {} cells, got {}", cols.len(), cells.len()),
            });
        }
        let date = NaiveDate::parse_from_str(cells[0], "%Y-%m-%d").map_err(|e| {
            TtvarError::Parse {
                line: lineno + 1,
                msg: format!("bad date '{}': {e}", cells[0]),
            }
        })?;
        let mut vals = Vec::with_capacity(col_idx.len());
        let mut usable = true;
        for &ci in &col_idx {
            let cell = cells[ci + 1];
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                usable = false;
                break;
            }
            let v: f64 = cell.parse().map_err(|e| TtvarError::Parse {
                line: lineno + 1,
                msg: format!("bad number '{cell}': {e}"),
            })?;
            if !v.is_finite() || (require_positive && v <= 0.0) {
                usable = false;
                break;
            }
            vals.push(v);
        }
        if usable {
            rows.push((date, vals));
        } else {
            dropped += 1;
        }
    }
    rows.sort_by_key(|(d, _)| *d);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(TtvarError::invalid(format!("duplicate date {}", w[0].0)));
        }
    }
    if rows.len() < 2 {
        return Err(TtvarError::invalid(format!(
            "fewer than 2 usable rows ({} dropped)",
            dropped
        )));
    }
    let t = rows.len();
    let k = selected.len();
    let mut m = DMatrix::zeros(t, k);
    let mut dates = Vec::with_capacity(t);
    for (i, (d, vals)) in rows.into_iter().enumerate() {
        dates.push(d);
        for (j, v) in vals.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok((dates, selected, m, dropped))
}

/// Load a wide price CSV, optionally restricted to a symbol subset.
/// Returns the panel and the number of dropped rows.
pub fn load_price_csv(path: &Path, symbols: Option<&[String]>) -> Result<(PricePanel, usize)> {
    let (dates, syms, prices, dropped) = read_wide_csv(path, symbols, true)?;
    let panel = PricePanel::new(dates, syms, prices)?;
    Ok((panel, dropped))
}

/// Log returns: returns[t][k] = ln P_{t+1,k} - ln P_{t,k}.
pub fn to_log_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    let t = panel.len();
    if t < 2 {
        return Err(TtvarError::invalid("need at least two price rows"));
    }
    let k = panel.n_assets();
    let mut r = DMatrix::zeros(t - 1, k);
    for i in 0..t - 1 {
        for j in 0..k {
            r[(i, j)] = panel.prices[(i + 1, j)].ln() - panel.prices[(i, j)].ln();
        }
    }
    ReturnPanel::new(panel.dates[1..].to_vec(), panel.symbols.clone(), r)
}

/// Restrict both panels to their common dates, preserving column order.
pub fn align_panels(a: &PricePanel, b: &PricePanel) -> Result<(PricePanel, PricePanel)> {
    let sa: BTreeSet<NaiveDate> = a.dates.iter().copied().collect();
    let sb: BTreeSet<NaiveDate> = b.dates.iter().copied().collect();
    let common: BTreeSet<NaiveDate> = sa.intersection(&sb).copied().collect();
    if common.len() < 2 {
        return Err(TtvarError::invalid("date intersection too small"));
    }
    let filter = |p: &PricePanel| -> Result<PricePanel> {
        let keep: Vec<usize> = p
            .dates
            .iter()
            .enumerate()
            .filter(|(_, d)| common.contains(d))
            .map(|(i, _)| i)
            .collect();
        let mut m = DMatrix::zeros(keep.len(), p.n_assets());
        let mut dates = Vec::with_capacity(keep.len());
        for (ri, &i) in keep.iter().enumerate() {
            dates.push(p.dates[i]);
            for j in 0..p.n_assets() {
                m[(ri, j)] = p.prices[(i, j)];
            }
        }
        PricePanel::new(dates, p.symbols.clone(), m)
    };
    Ok((filter(a)?, filter(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_basic() {
        let f = write_tmp("date,A,B\n2020-01-01,1.0,2.0\n2020-01-02,1.1,2.1\n2020-01-03,1.2,2.2\n");
        let (p, dropped) = load_price_csv(f.path(), None).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.n_assets(), 2);
        assert_eq!(dropped, 0);
    }

    #[test]
    fn missing_cell_drops_row() {
        let f = write_tmp("date,A\n2020-01-01,1.0\n2020-01-02,\n2020-01-03,1.2\n");
        let (p, dropped) = load_price_csv(f.path(), None).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(dropped, 1);
    }

    #[test]
    fn zero_price_drops_row() {
        let f = write_tmp("date,A\n2020-01-01,1.0\n2020-01-02,0.0\n2020-01-03,1.2\n");
        let (p, dropped) = load_price_csv(f.path(), None).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(dropped, 1);
    }

    #[test]
    fn unknown_symbol_errors() {
        let f = write_tmp("date,A\n2020-01-01,1.0\n2020-01-02,1.1\n");
        let req = vec!["Z".to_string()];
        assert!(load_price_csv(f.path(), Some(&req)).is_err());
    }

    #[test]
    fn duplicate_date_errors() {
        let f = write_tmp("date,A\n2020-01-01,1.0\n2020-01-01,1.1\n2020-01-02,1.2\n");
        assert!(load_price_csv(f.path(), None).is_err());
    }

    #[test]
    fn subset_follows_request_order() {
        let f = write_tmp("date,A,B\n2020-01-01,1.0,2.0\n2020-01-02,1.1,2.1\n");
        let req = vec!["B".to_string(), "A".to_string()];
        let (p, _) = load_price_csv(f.path(), Some(&req)).unwrap();
        assert_eq!(p.symbols, req);
        assert_relative_eq!(p.prices[(0, 0)], 2.0);
        assert_relative_eq!(p.prices[(0, 1)], 1.0);
    }

    #[test]
    fn log_returns_constant_price() {
        let f = write_tmp("date,A\n2020-01-01,100\n2020-01-02,100\n");
        let (p, _) = load_price_csv(f.path(), None).unwrap();
        let r = to_log_returns(&p).unwrap();
        assert_eq!(r.len(), 1);
        assert_relative_eq!(r.returns[(0, 0)], 0.0);
    }

    #[test]
    fn log_returns_e_fold() {
        let prices = DMatrix::from_row_slice(2, 1, &[100.0, 100.0 * std::f64::consts::E]);
        let p = PricePanel::new(
            vec![
                NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2020, 1, 2).unwrap(),
            ],
            vec!["A".into()],
            prices,
        )
        .unwrap();
        let r = to_log_returns(&p).unwrap();
        assert_relative_eq!(r.returns[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn log_returns_geometric() {
        let prices = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 4.0]);
        let p = PricePanel::new(
            vec![
                NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2020, 1, 2).unwrap(),
                NaiveDate::from_ymd_opt(2020, 1, 3).unwrap(),
            ],
            vec!["A".into()],
            prices,
        )
        .unwrap();
        let r = to_log_returns(&p).unwrap();
        assert_relative_eq!(r.returns[(0, 0)], 2.0f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(r.returns[(1, 0)], 2.0f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn exp_cumsum_round_trip() {
        let f = write_tmp(
            "date,A,B\n2020-01-01,3.5,7.1\n2020-01-02,3.6,7.0\n2020-01-03,3.55,7.3\n2020-01-04,3.9,7.2\n",
        );
        let (p, _) = load_price_csv(f.path(), None).unwrap();
        let r = to_log_returns(&p).unwrap();
        for j in 0..p.n_assets() {
            let mut price = p.prices[(0, j)];
            for i in 0..r.len() {
                price *= r.returns[(i, j)].exp();
                assert_relative_eq!(price, p.prices[(i + 1, j)], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn align_intersection() {
        let mk = |dates: &[u32]| {
            let d: Vec<NaiveDate> = dates
                .iter()
                .map(|&x| NaiveDate::from_ymd_opt(2020, 1, x).unwrap())
                .collect();
            let m = DMatrix::from_fn(d.len(), 1, |i, _| 1.0 + i as f64);
            PricePanel::new(d, vec!["A".into()], m).unwrap()
        };
        let a = mk(&[1, 2, 3]);
        let b = mk(&[2, 3, 4]);
        let (a2, b2) = align_panels(&a, &b).unwrap();
        assert_eq!(a2.dates, b2.dates);
        assert_eq!(a2.len(), 2);

        let c = mk(&[10, 11]);
        assert!(align_panels(&a, &c).is_err());
    }

    #[test]
    fn return_csv_round_trip() {
        let f = write_tmp("date,A,B\n2020-01-01,3.5,7.1\n2020-01-02,3.6,7.0\n2020-01-03,3.55,7.3\n");
        let (p, _) = load_price_csv(f.path(), None).unwrap();
        let r = to_log_returns(&p).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        r.write_csv(out.path()).unwrap();
        let r2 = ReturnPanel::from_csv(out.path(), None).unwrap();
        assert_eq!(r.dates, r2.dates);
        for (x, y) in r.returns.iter().zip(r2.returns.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-14);
        }
    }
}
