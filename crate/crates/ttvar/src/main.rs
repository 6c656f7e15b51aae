//! `ttvar` command line: ingest, diagnose, select-lag, fit, simulate,
//! backtest, evaluate, dm, report.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numeric
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ttvar::config::{parse_config, RunConfig};
use ttvar::error::{Result, TtvarError};
use ttvar::evaluation::{dm_test, metric_table, rank_models, Bandwidth, DmLoss};
use ttvar::hybrid::{run_recursive, ForecastRecordSet};
use ttvar::report;
use ttvar::simulation::{
    default_nonlinear_spec, gen_garch11, gen_nonlinear_residual, gen_var_t, VarTSpec,
};
use ttvar::timeseries::{load_price_csv, to_log_returns, ReturnPanel};
use ttvar::var_gaussian::{fit_var, residuals, save_model_files, select_lag};
use ttvar::var_student_t::{fit_t_var, FitOptions};

#[derive(Parser)]
#[command(name = "ttvar", version, about = "Heavy-tailed VAR forecasting pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a price CSV into a log-return panel CSV.
    Ingest {
        /// Price CSV: date column plus one column per asset.
        #[arg(long)]
        prices: PathBuf,
        /// Output return panel CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional comma separated subset of symbols.
        #[arg(long)]
        symbols: Option<String>,
    },
    /// Run the stylized-fact battery on a return panel.
    Diagnose {
        #[arg(long)]
        returns: PathBuf,
        /// Output directory for the diagnostic CSVs.
        #[arg(long)]
        out: PathBuf,
        /// VAR order for residual-based tests.
        #[arg(long, default_value_t = 1)]
        p: usize,
        /// ARCH-LM lag count.
        #[arg(long, default_value_t = 40)]
        arch_lags: usize,
        /// Max lag for squared-return autocorrelations.
        #[arg(long, default_value_t = 40)]
        acf_lags: usize,
        /// Largest BDS embedding dimension.
        #[arg(long, default_value_t = 6)]
        bds_m: usize,
    },
    /// Information-criterion lag order selection.
    SelectLag {
        #[arg(long)]
        returns: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        max_lag: usize,
    },
    /// Fit a VAR or Student-t VAR and save the model files.
    Fit {
        #[arg(long)]
        returns: PathBuf,
        /// Output stem; writes <stem>.header and <stem>.coef.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        p: usize,
        /// Innovation distribution: gaussian or t.
        #[arg(long, default_value = "t")]
        dist: String,
    },
    /// Generate a synthetic panel from a documented DGP.
    Simulate {
        /// One of: var_t, garch11, nonlinear_residual.
        #[arg(long)]
        dgp: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        len: usize,
        /// Nonlinear correction amplitude (nonlinear_residual only).
        #[arg(long, default_value_t = 0.5)]
        amplitude: f64,
        /// Degrees of freedom (var_t only; 0 = Gaussian).
        #[arg(long, default_value_t = 6.0)]
        nu: f64,
    },
    /// Walk-forward backtest over the configured model universe.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        /// Output records CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a records CSV: metric tables, ranking, regimes, improvements.
    Evaluate {
        records: PathBuf,
        /// Run config supplying the regime calendar.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Baseline model for improvement percentages.
        #[arg(long, default_value = "var")]
        baseline: String,
        /// Candidate model; default is the top-ranked model.
        #[arg(long)]
        candidate: Option<String>,
    },
    /// Diebold-Mariano test between two models in a records CSV.
    Dm {
        records: PathBuf,
        #[arg(long)]
        candidate: String,
        #[arg(long)]
        benchmark: String,
        /// squared or absolute.
        #[arg(long, default_value = "squared")]
        loss: String,
        /// HAC bandwidth: a lag count or "auto".
        #[arg(long, default_value = "0")]
        bandwidth: String,
    },
    /// Full report: diagnostics inputs optional, evaluation tables,
    /// trajectories, DM grid and manifest.
    Report {
        records: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_symbols(arg: &Option<String>) -> Option<Vec<String>> {
    arg.as_ref()
        .map(|s| s.split(',').map(|t| t.trim().to_string()).collect())
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth> {
    if s == "auto" {
        return Ok(Bandwidth::Auto);
    }
    s.parse::<usize>()
        .map(Bandwidth::Fixed)
        .map_err(|_| TtvarError::invalid(format!("bandwidth must be a lag count or 'auto', found '{s}'")))
}

fn pick_candidate(set: &ForecastRecordSet, requested: &Option<String>) -> Result<String> {
    if let Some(c) = requested {
        if !set.model_ids().contains(c) {
            return Err(TtvarError::invalid(format!("candidate '{c}' not in records")));
        }
        return Ok(c.clone());
    }
    let ranking = rank_models(&metric_table(set)?)?;
    Ok(ranking[0].model.clone())
}

fn evaluate_into(
    set: &ForecastRecordSet,
    config: &Option<RunConfig>,
    out: &std::path::Path,
    baseline: &str,
    candidate: &Option<String>,
) -> Result<()> {
    let table = metric_table(set)?;
    report::write_metric_tables(&table, out)?;
    report::write_ranking(&rank_models(&table)?, out)?;
    let calendar = config.as_ref().map(|c| c.regimes.clone()).unwrap_or_default();
    report::write_regime_table(set, &calendar, out)?;
    let cand = pick_candidate(set, candidate)?;
    if table.models.iter().any(|m| m == baseline) && cand != baseline {
        report::write_improvements(set, &calendar, baseline, &cand, out)?;
    }
    if table.models.len() > 1 {
        report::write_dm_grid(set, &cand, DmLoss::Squared, Bandwidth::Fixed(0), out)?;
    }
    Ok(())
}

fn load_panel_for_backtest(cfg: &RunConfig) -> Result<ReturnPanel> {
    let path = cfg
        .returns_path
        .as_ref()
        .ok_or_else(|| TtvarError::config("backtest needs 'returns' in [data]"))?;
    ReturnPanel::from_csv(path, None)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { prices, out, symbols } => {
            let symbols = parse_symbols(&symbols);
            let (panel, dropped) = load_price_csv(&prices, symbols.as_deref())?;
            let returns = to_log_returns(&panel)?;
            returns.write_csv(&out)?;
            println!(
                "ingested {} assets x {} days ({} rows dropped), wrote {}",
                returns.n_assets(),
                returns.len(),
                dropped,
                out.display()
            );
        }
        Command::Diagnose { returns, out, p, arch_lags, acf_lags, bds_m } => {
            let panel = ReturnPanel::from_csv(&returns, None)?;
            report::write_descriptive_stats(&panel, &out)?;
            report::write_arch_lm(&panel, arch_lags, &out)?;
            report::write_acf(&panel, acf_lags, &out)?;
            report::write_qq(&panel, &out)?;
            let model = fit_var(&panel, p)?;
            let res = residuals(&model, &panel)?;
            report::write_residual_correlation(&res, &out)?;
            report::write_bds(&res, bds_m, &out)?;
            println!("diagnostics written to {}", out.display());
        }
        Command::SelectLag { returns, out, max_lag } => {
            let panel = ReturnPanel::from_csv(&returns, None)?;
            let sel = select_lag(&panel, max_lag)?;
            report::write_lag_selection(&sel, &out)?;
            for (crit, lag) in &sel.chosen {
                println!("{crit}: p = {lag}");
            }
        }
        Command::Fit { returns, out, p, dist } => {
            let panel = ReturnPanel::from_csv(&returns, None)?;
            match dist.as_str() {
                "gaussian" => {
                    let model = fit_var(&panel, p)?;
                    save_model_files(&out, "var", &model, &[])?;
                    println!("fitted Gaussian VAR({p}), saved to {}", out.display());
                }
                "t" => {
                    let model = fit_t_var(&panel, p, &FitOptions::default(), None)?;
                    let extra = vec![
                        ("nu".to_string(), format!("{:.17e}", model.nu)),
                        ("log_likelihood".to_string(), format!("{:.17e}", model.log_likelihood)),
                        ("iterations".to_string(), model.iterations.to_string()),
                        ("converged".to_string(), model.converged.to_string()),
                    ];
                    save_model_files(&out, "var-t", &model.base, &extra)?;
                    println!(
                        "fitted Student-t VAR({p}), nu = {:.3}, saved to {}",
                        model.nu,
                        out.display()
                    );
                }
                other => {
                    return Err(TtvarError::invalid(format!(
                        "unknown dist '{other}' (expected gaussian or t)"
                    )))
                }
            }
        }
        Command::Simulate { dgp, out, seed, len, amplitude, nu } => match dgp.as_str() {
            "var_t" => {
                let base = default_nonlinear_spec(len, 0.0, seed);
                let spec = VarTSpec {
                    intercept: base.intercept,
                    lag_matrices: vec![base.lag_matrix],
                    sigma: base.sigma,
                    nu: if nu == 0.0 { f64::INFINITY } else { nu },
                    len,
                    seed,
                };
                let panel = gen_var_t(&spec)?;
                panel.write_csv(&out)?;
                println!("wrote {}", out.display());
            }
            "garch11" => {
                let spec = ttvar::simulation::Garch11Spec {
                    omega: 0.05,
                    alpha: 0.1,
                    beta: 0.85,
                    len,
                    seed,
                };
                let series = gen_garch11(&spec)?;
                let mut csv = String::from("t,r\n");
                for (i, v) in series.iter().enumerate() {
                    csv.push_str(&format!("{i},{v:.17e}\n"));
                }
                std::fs::write(&out, csv)?;
                println!("wrote {}", out.display());
            }
            "nonlinear_residual" => {
                let spec = default_nonlinear_spec(len, amplitude, seed);
                let (panel, truth) = gen_nonlinear_residual(&spec)?;
                panel.write_csv(&out)?;
                let truth_path = out.with_file_name(format!(
                    "{}_truth.csv",
                    out.file_stem().and_then(|s| s.to_str()).unwrap_or("panel")
                ));
                let mut csv = String::from("date,asset,mu,g,u\n");
                for (i, date) in panel.dates.iter().enumerate() {
                    for (j, sym) in panel.symbols.iter().enumerate() {
                        csv.push_str(&format!(
                            "{date},{sym},{:.17e},{:.17e},{:.17e}\n",
                            truth.mu[(i, j)],
                            truth.g[(i, j)],
                            truth.u[(i, j)]
                        ));
                    }
                }
                std::fs::write(&truth_path, csv)?;
                println!("wrote {} and {}", out.display(), truth_path.display());
            }
            other => {
                return Err(TtvarError::invalid(format!(
                    "unknown dgp '{other}' (expected var_t, garch11 or nonlinear_residual)"
                )))
            }
        },
        Command::Backtest { config, out } => {
            let cfg = parse_config(&config)?;
            let panel = load_panel_for_backtest(&cfg)?;
            let p = match cfg.p {
                Some(p) => p,
                None => {
                    let first = panel.slice_rows(0, cfg.window.train_len.min(panel.len()));
                    let sel = select_lag(&first, 10)?;
                    let p = *sel.chosen.get("aic").expect("aic present");
                    p.max(1)
                }
            };
            let spec = cfg.pipeline_spec(p);
            let records = run_recursive(&panel, &spec)?;
            records.write_csv(&out)?;
            println!(
                "backtest complete: {} records, {} failures, wrote {}",
                records.records.len(),
                records.failures.len(),
                out.display()
            );
        }
        Command::Evaluate { records, config, out, baseline, candidate } => {
            let set = ForecastRecordSet::read_csv(&records)?;
            let cfg = config.as_ref().map(|p| parse_config(p)).transpose()?;
            evaluate_into(&set, &cfg, &out, &baseline, &candidate)?;
            println!("evaluation written to {}", out.display());
        }
        Command::Dm { records, candidate, benchmark, loss, bandwidth } => {
            let set = ForecastRecordSet::read_csv(&records)?;
            let loss: DmLoss = loss.parse()?;
            let bw = parse_bandwidth(&bandwidth)?;
            let table = metric_table(&set)?;
            println!("asset,dm_statistic,p_value,mean_loss_diff,bandwidth");
            for asset in &table.assets {
                let errs = |model: &str| -> Vec<f64> {
                    set.records
                        .iter()
                        .filter(|r| r.model == *model && r.asset == *asset)
                        .map(|r| r.error)
                        .collect()
                };
                let a = errs(&benchmark);
                let b = errs(&candidate);
                if a.is_empty() || b.is_empty() {
                    return Err(TtvarError::invalid(format!(
                        "model '{}' missing for asset {asset}",
                        if a.is_empty() { &benchmark } else { &candidate }
                    )));
                }
                let r = dm_test(&a, &b, loss, bw)?;
                println!(
                    "{asset},{:.4},{:.6},{:.6e},{}",
                    r.statistic, r.p_value, r.mean_diff, r.bandwidth
                );
            }
        }
        Command::Report { records, config, out } => {
            let start = std::time::Instant::now();
            let cfg = parse_config(&config)?;
            let out = out.unwrap_or_else(|| cfg.out_dir.clone());
            let set = ForecastRecordSet::read_csv(&records)?;
            evaluate_into(&set, &Some(cfg.clone()), &out, "var", &None)?;
            report::write_trajectories(&set, &out)?;
            if let Some(path) = &cfg.returns_path {
                let panel = ReturnPanel::from_csv(path, None)?;
                report::write_descriptive_stats(&panel, &out)?;
                report::write_arch_lm(&panel, 40, &out)?;
                report::write_acf(&panel, 40, &out)?;
                report::write_qq(&panel, &out)?;
                let model = fit_var(&panel, cfg.p.unwrap_or(1))?;
                let res = residuals(&model, &panel)?;
                report::write_residual_correlation(&res, &out)?;
                report::write_bds(&res, 6, &out)?;
            }
            let config_text = std::fs::read_to_string(&config)?;
            report::write_manifest(
                &config_text,
                cfg.master_seed,
                &cfg.defaults_filled,
                start.elapsed(),
                &out,
            )?;
            println!("report written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                TtvarError::Numerical(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
