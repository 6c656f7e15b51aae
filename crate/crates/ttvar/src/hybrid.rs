//! Strictly recursive walk-forward forecasting: econometric bases,
//! residual streams, periodically refit learners, and the additive
//! hybrid combination.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{Result, TtvarError};
use crate::learners::{
    embed_matrix, train, tune, Learner, LearnerConfig, LearnerKind, SupervisedSet,
};
use crate::rng::{child_seed, str_tag};
use crate::timeseries::{ReturnPanel, WindowPlan};
use crate::var_gaussian::{fit_var, forecast_one_step, residuals, VarModel};
use crate::var_student_t::{fit_t_var, FitOptions, TVarModel};

/// Econometric base of a model specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseKind {
    Var,
    TVar,
}

/// One entry in the model universe: a base, a learner, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub base: Option<BaseKind>,
    pub learner: Option<LearnerKind>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.base.is_none() && self.learner.is_none() {
            return Err(TtvarError::config("model spec needs a base or a learner"));
        }
        Ok(())
    }

    pub fn is_hybrid(&self) -> bool {
        self.base.is_some() && self.learner.is_some()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.base, self.learner) {
            (Some(BaseKind::Var), None) => write!(f, "var"),
            (Some(BaseKind::TVar), None) => write!(f, "var-t"),
            (None, Some(l)) => write!(f, "{l}"),
            (Some(BaseKind::Var), Some(l)) => write!(f, "var-{l}"),
            (Some(BaseKind::TVar), Some(l)) => write!(f, "var-t-{l}"),
            (None, None) => write!(f, "empty"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = TtvarError;

    fn from_str(s: &str) -> Result<Self> {
        let (base, rest) = if let Some(rest) = s.strip_prefix("var-t-") {
            (Some(BaseKind::TVar), Some(rest))
        } else if s == "var-t" {
            (Some(BaseKind::TVar), None)
        } else if let Some(rest) = s.strip_prefix("var-") {
            (Some(BaseKind::Var), Some(rest))
        } else if s == "var" {
            (Some(BaseKind::Var), None)
        } else {
            (None, Some(s))
        };
        let learner = match rest {
            None => None,
            Some(r) => Some(r.parse::<LearnerKind>().map_err(|_| {
                TtvarError::config(format!("unknown model spec '{s}'"))
            })?),
        };
        Ok(ModelSpec { base, learner })
    }
}

/// The full 14-model universe of the out-of-sample comparison.
pub fn full_universe() -> Vec<ModelSpec> {
    let mut out = vec![
        ModelSpec { base: Some(BaseKind::Var), learner: None },
        ModelSpec { base: Some(BaseKind::TVar), learner: None },
    ];
    for kind in [LearnerKind::Svr, LearnerKind::Mlp, LearnerKind::Lstm, LearnerKind::Gru] {
        out.push(ModelSpec { base: None, learner: Some(kind) });
    }
    for base in [BaseKind::Var, BaseKind::TVar] {
        for kind in [LearnerKind::Svr, LearnerKind::Mlp, LearnerKind::Lstm, LearnerKind::Gru]
        {
            out.push(ModelSpec { base: Some(base), learner: Some(kind) });
        }
    }
    out
}

/// Learner setup per kind: an explicit configuration or a tuning budget
/// resolved once on the first training window.
#[derive(Debug, Clone)]
pub enum LearnerSetup {
    Config(LearnerConfig),
    Tune { budget: usize },
}

/// Everything needed to run the recursive backtest.
#[derive(Debug, Clone)]
pub struct PipelineSpec {
    pub models: Vec<ModelSpec>,
    /// VAR lag order.
    pub p: usize,
    /// Residual lags fed to learners.
    pub q: usize,
    pub window: WindowPlan,
    /// Missing kinds fall back to `LearnerConfig::defaults`.
    pub learners: BTreeMap<LearnerKind, LearnerSetup>,
    pub master_seed: u64,
}

impl PipelineSpec {
    pub fn validate(&self, panel: &ReturnPanel) -> Result<()> {
        if self.models.is_empty() {
            return Err(TtvarError::config("pipeline needs at least one model"));
        }
        for m in &self.models {
            m.validate()?;
        }
        if self.q < 1 {
            return Err(TtvarError::config("q must be >= 1"));
        }
        self.window.validate(self.p, panel.n_assets())?;
        if panel.len() < self.window.train_len + self.window.test_len {
            return Err(TtvarError::invalid(format!(
                "panel has {} rows, need {}",
                panel.len(),
                self.window.train_len + self.window.test_len
            )));
        }
        Ok(())
    }
}

/// One forecast for one (model, date, asset).
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub model: String,
    pub date: NaiveDate,
    pub asset: String,
    pub forecast: f64,
    pub realized: f64,
    pub error: f64,
    /// Base forecast and learner correction, hybrids only.
    pub base: Option<f64>,
    pub correction: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ForecastRecordSet {
    pub records: Vec<ForecastRecord>,
    /// (model id, date, message) for steps that failed.
    pub failures: Vec<(String, NaiveDate, String)>,
    /// Test-step indices at which each model's learner was refit.
    pub learner_refits: BTreeMap<String, Vec<usize>>,
}

impl ForecastRecordSet {
    /// Per-asset error matrix for one model, rows in date order.
    pub fn error_matrix(&self, model: &str, symbols: &[String]) -> DMatrix<f64> {
        let rows: Vec<&ForecastRecord> =
            self.records.iter().filter(|r| r.model == model).collect();
        let dates: Vec<NaiveDate> = {
            let mut d: Vec<NaiveDate> = rows.iter().map(|r| r.date).collect();
            d.dedup();
            d
        };
        let mut m = DMatrix::zeros(dates.len(), symbols.len());
        for r in &rows {
            let i = dates.iter().position(|d| *d == r.date).expect("date present");
            let j = symbols.iter().position(|s| *s == r.asset).expect("asset present");
            m[(i, j)] = r.error;
        }
        m
    }

    pub fn model_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for r in &self.records {
            if !ids.contains(&r.model) {
                ids.push(r.model.clone());
            }
        }
        ids
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("model,date,asset,forecast,realized,error,base,correction\n");
        for r in &self.records {
            let base = r.base.map(|v| format!("{v:.17e}")).unwrap_or_default();
            let corr = r.correction.map(|v| format!("{v:.17e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{:.17e},{:.17e},{:.17e},{},{}\n",
                r.model, r.date, r.asset, r.forecast, r.realized, r.error, base, corr
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<ForecastRecordSet> {
        let text = std::fs::read_to_string(path)?;
        let mut records = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if idx == 0 || line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 8 {
                return Err(TtvarError::Parse {
                    line: idx + 1,
                    msg: format!("expected 8 fields, found {}", parts.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| TtvarError::Parse {
                    line: idx + 1,
                    msg: format!("bad float '{s}'"),
                })
            };
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() { Ok(None) } else { parse(s).map(Some) }
            };
            records.push(ForecastRecord {
                model: parts[0].to_string(),
                date: parts[1].parse().map_err(|_| TtvarError::Parse {
                    line: idx + 1,
                    msg: format!("bad date '{}'", parts[1]),
                })?,
                asset: parts[2].to_string(),
                forecast: parse(parts[3])?,
                realized: parse(parts[4])?,
                error: parse(parts[5])?,
                base: opt(parts[6])?,
                correction: opt(parts[7])?,
            });
        }
        Ok(ForecastRecordSet { records, ..Default::default() })
    }
}

/// Elementwise sum of base forecast and learner correction.
pub fn hybrid_combine(base: &[f64], correction: &[f64]) -> Result<Vec<f64>> {
    if base.len() != correction.len() {
        return Err(TtvarError::invalid("hybrid_combine length mismatch"));
    }
    Ok(base.iter().zip(correction).map(|(b, c)| b + c).collect())
}

/// Split a hybrid record into (mu_hat, g_hat, u_hat).
pub fn decompose_record(record: &ForecastRecord) -> Result<(f64, f64, f64)> {
    match (record.base, record.correction) {
        (Some(mu), Some(g)) => Ok((mu, g, record.realized - mu - g)),
        _ => Err(TtvarError::invalid("decompose_record needs a hybrid record")),
    }
}

enum BaseState {
    Var(VarModel),
    TVar(TVarModel),
}

impl BaseState {
    fn var_model(&self) -> &VarModel {
        match self {
            BaseState::Var(m) => m,
            BaseState::TVar(m) => &m.base,
        }
    }
}

struct ModelRunner<'a> {
    spec: ModelSpec,
    id: String,
    pipeline: &'a PipelineSpec,
    base: Option<BaseState>,
    learner: Option<Learner>,
    learner_config: Option<LearnerConfig>,
    refit_steps: Vec<usize>,
}

impl<'a> ModelRunner<'a> {
    fn new(spec: ModelSpec, pipeline: &'a PipelineSpec) -> Self {
        ModelRunner {
            spec,
            id: spec.to_string(),
            pipeline,
            base: None,
            learner: None,
            learner_config: None,
            refit_steps: Vec::new(),
        }
    }

    /// Resolve the learner configuration on the first training window:
    /// explicit config, tuned config, or defaults.
    fn resolve_config(&mut self, first_set: &SupervisedSet) -> Result<()> {
        let kind = match self.spec.learner {
            Some(k) => k,
            None => return Ok(()),
        };
        let seed = child_seed(self.pipeline.master_seed, &[str_tag(&self.id), str_tag("tune")]);
        let mut config = match self.pipeline.learners.get(&kind) {
            Some(LearnerSetup::Config(c)) => c.clone(),
            Some(LearnerSetup::Tune { budget }) => {
                tune(kind, first_set, *budget, seed)?.0
            }
            None => LearnerConfig::defaults(kind, self.pipeline.q, seed),
        };
        config.q = self.pipeline.q;
        config.kind = kind;
        self.learner_config = Some(config);
        Ok(())
    }

    /// Data stream the learner trains and predicts on: filtered
    /// residuals for hybrids, raw returns for standalone learners.
    fn learner_stream(&self, visible: &ReturnPanel) -> Result<(Vec<NaiveDate>, DMatrix<f64>)> {
        match (&self.base, self.spec.base) {
            (Some(state), Some(_)) => {
                let res = residuals(state.var_model(), visible)?;
                Ok((res.dates, res.residuals))
            }
            (None, None) => Ok((visible.dates.clone(), visible.returns.clone())),
            _ => Err(TtvarError::invalid("base state out of sync with spec")),
        }
    }

    /// Produce the forecast for panel row `t` (visible data is rows 0..t).
    fn step(
        &mut self,
        panel: &ReturnPanel,
        step_idx: usize,
        t: usize,
    ) -> Result<(Vec<f64>, Option<Vec<f64>>, Option<Vec<f64>>)> {
        let pipeline = self.pipeline;
        let visible = panel.slice_rows(0, t);
        let k = panel.n_assets();

        if let Some(base_kind) = self.spec.base {
            if step_idx % pipeline.window.refit_stride_var == 0 || self.base.is_none() {
                self.base = Some(match base_kind {
                    BaseKind::Var => BaseState::Var(fit_var(&visible, pipeline.p)?),
                    BaseKind::TVar => {
                        let warm = match &self.base {
                            Some(BaseState::TVar(m)) => Some(m),
                            _ => None,
                        };
                        BaseState::TVar(fit_t_var(
                            &visible,
                            pipeline.p,
                            &FitOptions::default(),
                            warm,
                        )?)
                    }
                });
            }
        }

        let base_forecast: Option<Vec<f64>> = match &self.base {
            Some(state) => {
                let recent = visible
                    .returns
                    .rows(t - pipeline.p, pipeline.p)
                    .into_owned();
                let f = forecast_one_step(state.var_model(), &recent)?;
                Some(f.iter().cloned().collect())
            }
            None => None,
        };

        let correction: Option<Vec<f64>> = if self.spec.learner.is_some() {
            let (dates, stream) = self.learner_stream(&visible)?;
            if self.learner_config.is_none() {
                let first_set = embed_matrix(&dates, &stream, pipeline.q)?;
                self.resolve_config(&first_set)?;
            }
            if step_idx % pipeline.window.refit_stride_learner == 0 || self.learner.is_none() {
                let refit_idx = (step_idx / pipeline.window.refit_stride_learner) as u64;
                let mut config = self.learner_config.clone().expect("config resolved");
                config.seed = child_seed(
                    pipeline.master_seed,
                    &[str_tag(&self.id), str_tag("refit"), refit_idx],
                );
                let set = embed_matrix(&dates, &stream, pipeline.q)?;
                self.learner = Some(train(&set, &config)?);
                self.refit_steps.push(step_idx);
            }
            let learner = self.learner.as_ref().expect("learner fitted");
            let rows = stream.nrows();
            if rows < pipeline.q {
                return Err(TtvarError::invalid("residual stream shorter than q"));
            }
            let recent = stream.rows(rows - pipeline.q, pipeline.q).into_owned();
            Some(learner.predict(&recent)?)
        } else {
            None
        };

        let forecast = match (&base_forecast, &correction) {
            (Some(b), Some(c)) => hybrid_combine(b, c)?,
            (Some(b), None) => b.clone(),
            (None, Some(c)) => c.clone(),
            (None, None) => vec![0.0; k],
        };
        Ok((forecast, base_forecast, correction))
    }
}

/// Run the walk-forward protocol for every model in the spec.
pub fn run_recursive(panel: &ReturnPanel, spec: &PipelineSpec) -> Result<ForecastRecordSet> {
    spec.validate(panel)?;
    let mut out = ForecastRecordSet::default();
    let k = panel.n_assets();
    for model_spec in &spec.models {
        let mut runner = ModelRunner::new(*model_spec, spec);
        for step_idx in 0..spec.window.test_len {
            let t = spec.window.train_len + step_idx;
            let date = panel.dates[t];
            match runner.step(panel, step_idx, t) {
                Ok((forecast, base, correction)) => {
                    for j in 0..k {
                        let realized = panel.returns[(t, j)];
                        out.records.push(ForecastRecord {
                            model: runner.id.clone(),
                            date,
                            asset: panel.symbols[j].clone(),
                            forecast: forecast[j],
                            realized,
                            error: realized - forecast[j],
                            base: base.as_ref().map(|b| b[j]),
                            correction: correction.as_ref().map(|c| c[j]),
                        });
                    }
                }
                Err(e) => {
                    out.failures.push((runner.id.clone(), date, e.to_string()));
                }
            }
        }
        if runner.spec.learner.is_some() {
            out.learner_refits.insert(runner.id.clone(), runner.refit_steps);
        }
    }
    Ok(out)
}
