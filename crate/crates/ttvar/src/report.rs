//! CSV report writers. Layouts mirror the published tables: descriptive
//! statistics, ARCH-LM, lag selection, residual correlation, BDS, RMSE/MAE
//! comparison, comprehensive ranking, Diebold-Mariano grid, regime
//! robustness, improvement percentages, plus plot-data trajectories and a
//! run manifest.

use std::path::{Path, PathBuf};

use crate::diagnostics::{
    acf, adf_test, arch_lm, bds_test, descriptive_stats, jarque_bera, qq_points, AdfRegression,
    QqDist,
};
use crate::error::{Result, TtvarError};
use crate::evaluation::{
    dm_test, improvement_pct, metric_table, regime_split, Bandwidth, DmLoss, MetricTable,
    ModelRanking, RegimeCalendar,
};
use crate::hybrid::ForecastRecordSet;
use crate::rng::str_tag;
use crate::timeseries::ReturnPanel;
use crate::var_gaussian::{residual_correlation, LagSelection, ResidualPanel};

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

/// Significance stars at the conventional 10/5/1 percent levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

fn write(path: &Path, content: &str) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content)?;
    Ok(path.to_path_buf())
}

/// Descriptive statistics plus ADF and Jarque-Bera per asset.
pub fn write_descriptive_stats(panel: &ReturnPanel, out_dir: &Path) -> Result<PathBuf> {
    let mut csv = String::from(
        "Asset,Mean,Std. Dev.,Skewness,Kurtosis,Min,Max,ADF,ADF p-value,Jarque-Bera,JB p-value\n",
    );
    let max_lag = (12.0 * (panel.len() as f64 / 100.0).powf(0.25)).floor() as usize;
    for sym in &panel.symbols {
        let series = panel.column(sym).expect("symbol present");
        let s = descriptive_stats(&series)?;
        let adf = adf_test(&series, max_lag, AdfRegression::Constant)?;
        let jb = jarque_bera(&series)?;
        csv.push_str(&format!(
            "{sym},{},{},{},{},{},{},{},{},{},{}\n",
            f4(s.mean),
            f4(s.std_dev),
            f4(s.skewness),
            f4(s.excess_kurtosis),
            f4(s.min),
            f4(s.max),
            f4(adf.statistic),
            f4(adf.p_value.unwrap_or(f64::NAN)),
            f4(jb.statistic),
            f4(jb.p_value.unwrap_or(f64::NAN)),
        ));
    }
    write(&out_dir.join("descriptive_stats.csv"), &csv)
}

/// Engle's ARCH-LM test per asset, LM and F variants.
pub fn write_arch_lm(panel: &ReturnPanel, lags: usize, out_dir: &Path) -> Result<PathBuf> {
    let mut csv = String::from("Asset,ARCH-LM Statistic,p-value,F Statistic,F p-value\n");
    for sym in &panel.symbols {
        let series = panel.column(sym).expect("symbol present");
        let r = arch_lm(&series, lags)?;
        csv.push_str(&format!(
            "{sym},{},{:.4e},{},{:.4e}\n",
            f4(r.lm_statistic),
            r.lm_p_value,
            f4(r.f_statistic),
            r.f_p_value,
        ));
    }
    write(&out_dir.join("arch_lm.csv"), &csv)
}

/// Information criteria per candidate lag plus the per-criterion choice.
pub fn write_lag_selection(sel: &LagSelection, out_dir: &Path) -> Result<PathBuf> {
    let mut csv = String::from("Lag,AIC,BIC,FPE,HQIC\n");
    for (lag, aic, bic, fpe, hqic) in &sel.rows {
        csv.push_str(&format!("{lag},{},{},{fpe:.4e},{}\n", f4(*aic), f4(*bic), f4(*hqic)));
    }
    let mut chosen = String::from("Criterion,Lag\n");
    for (crit, lag) in &sel.chosen {
        chosen.push_str(&format!("{},{lag}\n", crit.to_uppercase()));
    }
    write(&out_dir.join("lag_selection_chosen.csv"), &chosen)?;
    write(&out_dir.join("lag_selection.csv"), &csv)
}

/// Contemporaneous residual correlation matrix, full square layout.
pub fn write_residual_correlation(res: &ResidualPanel, out_dir: &Path) -> Result<PathBuf> {
    let corr = residual_correlation(res)?;
    let mut csv = format!("Asset,{}\n", res.symbols.join(","));
    for (i, sym) in res.symbols.iter().enumerate() {
        let row: Vec<String> = (0..res.symbols.len()).map(|j| f4(corr[(i, j)])).collect();
        csv.push_str(&format!("{sym},{}\n", row.join(",")));
    }
    write(&out_dir.join("residual_correlation.csv"), &csv)
}

/// BDS statistics per asset across embedding dimensions 2..=m_max.
pub fn write_bds(res: &ResidualPanel, m_max: usize, out_dir: &Path) -> Result<PathBuf> {
    let mut header: Vec<String> = vec!["Asset".to_string()];
    header.extend((2..=m_max).map(|m| format!("m={m}")));
    let mut csv = format!("{}\n", header.join(","));
    for (j, sym) in res.symbols.iter().enumerate() {
        let series: Vec<f64> = res.residuals.column(j).iter().copied().collect();
        let r = bds_test(&series, m_max, 0.7)?;
        let row: Vec<String> = r.statistics.iter().map(|s| f4(*s)).collect();
        csv.push_str(&format!("{sym},{}\n", row.join(",")));
    }
    write(&out_dir.join("bds.csv"), &csv)
}

/// Autocorrelations of squared returns with the white-noise band, one file
/// per asset: acf_<symbol>.csv.
pub fn write_acf(panel: &ReturnPanel, max_lag: usize, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for sym in &panel.symbols {
        let series = panel.column(sym).expect("symbol present");
        let r = acf(&series, max_lag, true)?;
        let mut csv = String::from("lag,acf,band\n");
        for (i, c) in r.correlations.iter().enumerate() {
            csv.push_str(&format!("{},{},{}\n", i + 1, f4(*c), f4(r.band)));
        }
        paths.push(write(&out_dir.join(format!("acf_{sym}.csv")), &csv)?);
    }
    Ok(paths)
}

/// QQ plot data against Gaussian and Student-t references, one file per
/// asset: qq_<symbol>.csv.
pub fn write_qq(panel: &ReturnPanel, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for sym in &panel.symbols {
        let series = panel.column(sym).expect("symbol present");
        let gauss = qq_points(&series, QqDist::Gaussian)?;
        let t = qq_points(&series, QqDist::StudentT)?;
        let nu = t.nu.unwrap_or(f64::NAN);
        let mut csv = String::from("empirical,gaussian,student_t,nu\n");
        for ((tg, e), (tt, _)) in gauss.points.iter().zip(&t.points) {
            csv.push_str(&format!("{},{},{},{}\n", f4(*e), f4(*tg), f4(*tt), f4(nu)));
        }
        paths.push(write(&out_dir.join(format!("qq_{sym}.csv")), &csv)?);
    }
    Ok(paths)
}

/// RMSE and MAE comparison tables, one model per row, one asset per column.
pub fn write_metric_tables(table: &MetricTable, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let header = format!("Model,{}\n", table.assets.join(","));
    let mut rmse_csv = header.clone();
    let mut mae_csv = header;
    for m in &table.models {
        let rmse_row: Vec<String> = table
            .assets
            .iter()
            .map(|a| f4(table.cell(m, a).map(|c| c.rmse).unwrap_or(f64::NAN)))
            .collect();
        let mae_row: Vec<String> = table
            .assets
            .iter()
            .map(|a| f4(table.cell(m, a).map(|c| c.mae).unwrap_or(f64::NAN)))
            .collect();
        rmse_csv.push_str(&format!("{m},{}\n", rmse_row.join(",")));
        mae_csv.push_str(&format!("{m},{}\n", mae_row.join(",")));
    }
    Ok((
        write(&out_dir.join("rmse.csv"), &rmse_csv)?,
        write(&out_dir.join("mae.csv"), &mae_csv)?,
    ))
}

/// Comprehensive ranking table.
pub fn write_ranking(ranking: &[ModelRanking], out_dir: &Path) -> Result<PathBuf> {
    let mut csv = String::from("Model,Avg. RMSE Rank,Avg. MAE Rank,Overall Score,Final Rank\n");
    for r in ranking {
        csv.push_str(&format!(
            "{},{:.2},{:.2},{:.2},{}\n",
            r.model, r.avg_rmse_rank, r.avg_mae_rank, r.overall_score, r.final_rank
        ));
    }
    write(&out_dir.join("ranking.csv"), &csv)
}

/// Diebold-Mariano grid: each benchmark model against the candidate, per
/// asset. Positive statistics mean the benchmark carries higher loss.
pub fn write_dm_grid(
    set: &ForecastRecordSet,
    candidate: &str,
    loss: DmLoss,
    bandwidth: Bandwidth,
    out_dir: &Path,
) -> Result<PathBuf> {
    let models = set.model_ids();
    if !models.iter().any(|m| m == candidate) {
        return Err(TtvarError::invalid(format!("candidate model '{candidate}' not in records")));
    }
    let table = metric_table(set)?;
    let assets = table.assets.clone();
    let mut csv = format!("Benchmark Model,{}\n", assets.join(","));
    for bench in models.iter().filter(|m| *m != candidate) {
        let mut row = Vec::new();
        for asset in &assets {
            let errs = |model: &str| -> Vec<f64> {
                set.records
                    .iter()
                    .filter(|r| r.model == model && r.asset == *asset)
                    .map(|r| r.error)
                    .collect()
            };
            match dm_test(&errs(bench), &errs(candidate), loss, bandwidth) {
                Ok(r) => row.push(format!("{:.2}{}", r.statistic, stars(r.p_value))),
                Err(_) => row.push(String::new()),
            }
        }
        csv.push_str(&format!("{bench},{}\n", row.join(",")));
    }
    write(&out_dir.join("dm.csv"), &csv)
}

/// Regime robustness table: RMSE and MAE per (regime, model, asset), with
/// the full sample first and per-regime N counts.
pub fn write_regime_table(
    set: &ForecastRecordSet,
    calendar: &RegimeCalendar,
    out_dir: &Path,
) -> Result<PathBuf> {
    let full = metric_table(set)?;
    let assets = full.assets.clone();
    let mut header: Vec<String> = vec!["Regime".into(), "N".into(), "Model".into()];
    for a in &assets {
        header.push(format!("{a} RMSE"));
        header.push(format!("{a} MAE"));
    }
    let mut csv = format!("{}\n", header.join(","));
    let mut dates: Vec<_> = set.records.iter().map(|r| r.date).collect();
    dates.sort();
    dates.dedup();
    let push_rows = |label: &str, n: usize, table: &MetricTable, csv: &mut String| {
        for m in &table.models {
            let mut row = vec![label.to_string(), n.to_string(), m.clone()];
            for a in &assets {
                match table.cell(m, a) {
                    Some(c) => {
                        row.push(f4(c.rmse));
                        row.push(f4(c.mae));
                    }
                    None => {
                        row.push(String::new());
                        row.push(String::new());
                    }
                }
            }
            csv.push_str(&format!("{}\n", row.join(",")));
        }
    };
    push_rows("Full Sample", dates.len(), &full, &mut csv);
    for regime in regime_split(set, calendar)? {
        if let Some(table) = &regime.table {
            push_rows(&regime.label, regime.n, table, &mut csv);
        }
    }
    write(&out_dir.join("regimes.csv"), &csv)
}

/// Percentage RMSE improvements of the candidate over the baseline, per
/// asset and regime, with row and column averages.
pub fn write_improvements(
    set: &ForecastRecordSet,
    calendar: &RegimeCalendar,
    baseline: &str,
    candidate: &str,
    out_dir: &Path,
) -> Result<PathBuf> {
    let full = metric_table(set)?;
    let assets = full.assets.clone();
    let mut csv = format!("Market Regime,{},Average\n", assets.join(","));
    let row_for = |table: &MetricTable| -> Result<Option<Vec<f64>>> {
        let mut base = Vec::new();
        let mut cand = Vec::new();
        for a in &assets {
            match (table.cell(baseline, a), table.cell(candidate, a)) {
                (Some(b), Some(c)) => {
                    base.push(b.rmse);
                    cand.push(c.rmse);
                }
                _ => return Ok(None),
            }
        }
        improvement_pct(&base, &cand).map(Some)
    };
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    if let Some(v) = row_for(&full)? {
        rows.push(("Full Sample".to_string(), v));
    }
    for regime in regime_split(set, calendar)? {
        if let Some(table) = &regime.table {
            if let Some(v) = row_for(table)? {
                rows.push((regime.label.clone(), v));
            }
        }
    }
    if rows.is_empty() {
        return Err(TtvarError::invalid(format!(
            "improvements: models '{baseline}'/'{candidate}' not present in any bucket"
        )));
    }
    // Per-regime rows with row averages, then a column-average row over the
    // named regimes (the full-sample row is excluded from the average, as
    // it is not a disjoint bucket).
    for (label, v) in &rows {
        let avg = v.iter().sum::<f64>() / v.len() as f64;
        let cells: Vec<String> = v.iter().map(|x| format!("{x:.2}%")).collect();
        csv.push_str(&format!("{label},{},{avg:.2}%\n", cells.join(",")));
    }
    let regime_rows: Vec<&Vec<f64>> =
        rows.iter().filter(|(l, _)| l != "Full Sample").map(|(_, v)| v).collect();
    if !regime_rows.is_empty() {
        let mut avg_cells = Vec::new();
        let mut total = 0.0;
        for j in 0..assets.len() {
            let col = regime_rows.iter().map(|v| v[j]).sum::<f64>() / regime_rows.len() as f64;
            total += col;
            avg_cells.push(format!("{col:.2}%"));
        }
        csv.push_str(&format!(
            "Average,{},{:.2}%\n",
            avg_cells.join(","),
            total / assets.len() as f64
        ));
    }
    write(&out_dir.join("improvements.csv"), &csv)
}

/// Plot-data trajectories: forecast vs realized and absolute error per
/// (date, asset), one file per model.
pub fn write_trajectories(set: &ForecastRecordSet, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for model in set.model_ids() {
        let mut csv = String::from("date,asset,forecast,realized,abs_error\n");
        for r in set.records.iter().filter(|r| r.model == model) {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                r.date,
                r.asset,
                r.forecast,
                r.realized,
                r.error.abs()
            ));
        }
        paths.push(write(&out_dir.join(format!("trajectory_{model}.csv")), &csv)?);
    }
    Ok(paths)
}

/// Run manifest: enough to reproduce the run exactly. The timestamp line is
/// the only part allowed to differ between identical runs.
pub fn write_manifest(
    config_text: &str,
    seed: u64,
    defaults_filled: &[String],
    wall_time: std::time::Duration,
    out_dir: &Path,
) -> Result<PathBuf> {
    let mut text = String::new();
    text.push_str(&format!("tool_version = {}\n", env!("CARGO_PKG_VERSION")));
    text.push_str(&format!("config_hash = {:016x}\n", str_tag(config_text)));
    text.push_str(&format!("seed = {seed}\n"));
    text.push_str(&format!("wall_time_secs = {:.3}\n", wall_time.as_secs_f64()));
    text.push_str(&format!("timestamp = {}\n", chrono::Utc::now().to_rfc3339()));
    for d in defaults_filled {
        text.push_str(&format!("default_filled = {d}\n"));
    }
    text.push_str("effective_config_begin\n");
    for line in config_text.lines() {
        text.push_str(&format!("  {line}\n"));
    }
    text.push_str("effective_config_end\n");
    write(&out_dir.join("manifest.txt"), &text)
}
