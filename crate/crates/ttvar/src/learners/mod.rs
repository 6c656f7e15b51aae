//! Nonlinear residual learners: lag embedding, scaling, the four model
//! families (SVR, MLP, LSTM, GRU), hyperparameter search and
//! serialization.

pub mod net;
pub mod svr;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{Result, TtvarError};
use crate::rng::{child_seed, str_tag, Rng};
use crate::var_gaussian::ResidualPanel;

use net::{eval_loss, train_adam, NetShape, TrainingLog};
use svr::{solve_svr_column, SvrColumn};

/// Supervised pairs built from a residual (or return) stream: each input
/// row stacks the q previous rows newest-first, the target is the
/// current row.
#[derive(Debug, Clone)]
pub struct SupervisedSet {
    /// N x (q*K).
    pub inputs: DMatrix<f64>,
    /// N x K.
    pub targets: DMatrix<f64>,
    /// Target dates, length N.
    pub dates: Vec<NaiveDate>,
    pub q: usize,
    pub k: usize,
}

/// Per-column standardization fitted on a training sample. Input and
/// target columns carry separate statistics.
#[derive(Debug, Clone)]
pub struct Scaler {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LearnerKind {
    Svr,
    Mlp,
    Lstm,
    Gru,
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LearnerKind::Svr => "svr",
            LearnerKind::Mlp => "mlp",
            LearnerKind::Lstm => "lstm",
            LearnerKind::Gru => "gru",
        };
        f.write_str(s)
    }
}

impl FromStr for LearnerKind {
    type Err = TtvarError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svr" => Ok(LearnerKind::Svr),
            "mlp" => Ok(LearnerKind::Mlp),
            "lstm" => Ok(LearnerKind::Lstm),
            "gru" => Ok(LearnerKind::Gru),
            other => Err(TtvarError::config(format!("unknown learner kind '{other}'"))),
        }
    }
}

/// Hyperparameters for one learner. Neural fields are ignored by the
/// SVR and vice versa.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub q: usize,
    /// MLP: one entry per hidden layer. LSTM/GRU: single entry, the
    /// hidden state width.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub svr_c: f64,
    pub svr_epsilon: f64,
    pub svr_gamma: f64,
    pub validation_fraction: f64,
}

impl LearnerConfig {
    pub fn defaults(kind: LearnerKind, q: usize, seed: u64) -> Self {
        LearnerConfig {
            kind,
            q,
            hidden: vec![16],
            learning_rate: 0.003,
            epochs: 300,
            patience: 20,
            seed,
            svr_c: 1.0,
            svr_epsilon: 0.001,
            svr_gamma: 0.1,
            validation_fraction: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 1 {
            return Err(TtvarError::config("residual lag q must be >= 1"));
        }
        if self.validation_fraction <= 0.0 || self.validation_fraction > 0.5 {
            return Err(TtvarError::config("validation_fraction must lie in (0, 0.5]"));
        }
        if self.learning_rate <= 0.0 {
            return Err(TtvarError::config("learning_rate must be positive"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(TtvarError::config("hidden sizes must be positive"));
        }
        if self.svr_c <= 0.0 || self.svr_epsilon <= 0.0 || self.svr_gamma <= 0.0 {
            return Err(TtvarError::config("svr hyperparameters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum LearnerParams {
    Net { shape: NetShape, theta: Vec<f64> },
    Svr { columns: Vec<SvrColumn> },
}

/// A fitted learner: scaler plus parameters plus the training log.
#[derive(Debug, Clone)]
pub struct Learner {
    pub config: LearnerConfig,
    pub k: usize,
    pub scaler: Scaler,
    pub params: LearnerParams,
    pub log: TrainingLog,
}

/// Build supervised pairs from a residual panel.
pub fn embed_lags(res: &ResidualPanel, q: usize) -> Result<SupervisedSet> {
    embed_matrix(&res.dates, &res.residuals, q)
}

/// Build supervised pairs from any dated row matrix (used directly for
/// standalone learners on raw returns).
pub fn embed_matrix(
    dates: &[NaiveDate],
    values: &DMatrix<f64>,
    q: usize,
) -> Result<SupervisedSet> {
    let t = values.nrows();
    let k = values.ncols();
    if q < 1 {
        return Err(TtvarError::invalid("embedding depth q must be >= 1"));
    }
    if t <= q {
        return Err(TtvarError::invalid(format!(
            "need more than q={q} rows to embed, got {t}"
        )));
    }
    let n = t - q;
    let mut inputs = DMatrix::zeros(n, q * k);
    let mut targets = DMatrix::zeros(n, k);
    for i in 0..n {
        let row = q + i;
        // Newest lag first: block l holds row - 1 - l.
        for l in 0..q {
            for j in 0..k {
                inputs[(i, l * k + j)] = values[(row - 1 - l, j)];
            }
        }
        for j in 0..k {
            targets[(i, j)] = values[(row, j)];
        }
    }
    Ok(SupervisedSet {
        inputs,
        targets,
        dates: dates[q..].to_vec(),
        q,
        k,
    })
}

fn column_stats(m: &DMatrix<f64>, rows: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut means = Vec::with_capacity(m.ncols());
    let mut stds = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let mean = (0..rows).map(|i| m[(i, j)]).sum::<f64>() / rows as f64;
        let var = (0..rows).map(|i| (m[(i, j)] - mean).powi(2)).sum::<f64>()
            / (rows as f64 - 1.0);
        if var <= 0.0 {
            return Err(TtvarError::numerical(format!(
                "zero-variance column {j} in scaler fit"
            )));
        }
        means.push(mean);
        stds.push(var.sqrt());
    }
    Ok((means, stds))
}

impl Scaler {
    /// Fit on the first `rows` rows of the set (the chronological
    /// training slice); `rows = N` uses everything.
    pub fn fit(set: &SupervisedSet, rows: usize) -> Result<Scaler> {
        if rows < 2 {
            return Err(TtvarError::invalid("scaler needs at least 2 rows"));
        }
        let (input_mean, input_std) = column_stats(&set.inputs, rows)?;
        let (target_mean, target_std) = column_stats(&set.targets, rows)?;
        Ok(Scaler { input_mean, input_std, target_mean, target_std })
    }

    pub fn identity(input_dim: usize, target_dim: usize) -> Scaler {
        Scaler {
            input_mean: vec![0.0; input_dim],
            input_std: vec![1.0; input_dim],
            target_mean: vec![0.0; target_dim],
            target_std: vec![1.0; target_dim],
        }
    }

    pub fn transform_inputs(&self, inputs: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(inputs.nrows(), inputs.ncols(), |i, j| {
            (inputs[(i, j)] - self.input_mean[j]) / self.input_std[j]
        })
    }

    pub fn transform_targets(&self, targets: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(targets.nrows(), targets.ncols(), |i, j| {
            (targets[(i, j)] - self.target_mean[j]) / self.target_std[j]
        })
    }

    pub fn invert_target(&self, scaled: &[f64]) -> Vec<f64> {
        scaled
            .iter()
            .enumerate()
            .map(|(j, v)| v * self.target_std[j] + self.target_mean[j])
            .collect()
    }

    pub fn invert_inputs(&self, scaled: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(scaled.nrows(), scaled.ncols(), |i, j| {
            scaled[(i, j)] * self.input_std[j] + self.input_mean[j]
        })
    }
}

fn net_shape(config: &LearnerConfig, k: usize) -> Result<NetShape> {
    match config.kind {
        LearnerKind::Mlp => {
            let mut dims = vec![config.q * k];
            dims.extend_from_slice(&config.hidden);
            dims.push(k);
            Ok(NetShape::Mlp { dims })
        }
        LearnerKind::Lstm => Ok(NetShape::Lstm {
            input: k,
            hidden: config.hidden[0],
            output: k,
            steps: config.q,
        }),
        LearnerKind::Gru => Ok(NetShape::Gru {
            input: k,
            hidden: config.hidden[0],
            output: k,
            steps: config.q,
        }),
        LearnerKind::Svr => Err(TtvarError::invalid("svr has no network shape")),
    }
}

/// Train a learner of the configured kind on the supervised set. The
/// scaler is fitted on the chronological training slice only.
pub fn train(set: &SupervisedSet, config: &LearnerConfig) -> Result<Learner> {
    config.validate()?;
    if set.q != config.q {
        return Err(TtvarError::invalid(format!(
            "set embedded with q={} but config.q={}",
            set.q, config.q
        )));
    }
    let n = set.inputs.nrows();
    let n_val = ((n as f64) * config.validation_fraction).floor() as usize;
    let n_train = n - n_val;
    let scaler = Scaler::fit(set, n_train.max(2).min(n))?;
    let inputs = scaler.transform_inputs(&set.inputs);
    let targets = scaler.transform_targets(&set.targets);
    let mut rng = Rng::new(config.seed);
    let (params, log) = match config.kind {
        LearnerKind::Svr => {
            let mut columns = Vec::with_capacity(set.k);
            // The epsilon-tube is convex; no validation-based stopping.
            let train_inputs = inputs.rows(0, n_train).into_owned();
            for j in 0..set.k {
                let y: Vec<f64> = (0..n_train).map(|i| targets[(i, j)]).collect();
                columns.push(solve_svr_column(
                    &train_inputs,
                    &y,
                    config.svr_c,
                    config.svr_epsilon,
                    config.svr_gamma,
                )?);
            }
            (LearnerParams::Svr { columns }, TrainingLog::default())
        }
        _ => {
            let shape = net_shape(config, set.k)?;
            let (theta, log) = train_adam(
                &shape,
                &inputs,
                &targets,
                config.learning_rate,
                config.epochs,
                config.patience,
                config.validation_fraction,
                &mut rng,
            )?;
            (LearnerParams::Net { shape, theta }, log)
        }
    };
    Ok(Learner {
        config: config.clone(),
        k: set.k,
        scaler,
        params,
        log,
    })
}

impl Learner {
    /// One-step prediction from the last q residual rows (newest last).
    pub fn predict(&self, recent: &DMatrix<f64>) -> Result<Vec<f64>> {
        if recent.nrows() != self.config.q || recent.ncols() != self.k {
            return Err(TtvarError::invalid(format!(
                "predict expects a {}x{} matrix, got {}x{}",
                self.config.q,
                self.k,
                recent.nrows(),
                recent.ncols()
            )));
        }
        // Flatten newest-first: input block l is row (q-1-l).
        let q = self.config.q;
        let mut x = vec![0.0; q * self.k];
        for l in 0..q {
            for j in 0..self.k {
                x[l * self.k + j] = recent[(q - 1 - l, j)];
            }
        }
        for (j, v) in x.iter_mut().enumerate() {
            *v = (*v - self.scaler.input_mean[j]) / self.scaler.input_std[j];
        }
        let scaled_out = match &self.params {
            LearnerParams::Net { shape, theta } => shape.forward(theta, &x),
            LearnerParams::Svr { columns } => {
                columns.iter().map(|c| c.predict(&x)).collect()
            }
        };
        Ok(self.scaler.invert_target(&scaled_out))
    }

    /// Mean squared prediction error over a supervised set, in the
    /// original (unscaled) units.
    pub fn score(&self, set: &SupervisedSet) -> Result<f64> {
        let n = set.inputs.nrows();
        let mut sse = 0.0;
        let mut recent = DMatrix::zeros(self.config.q, self.k);
        for i in 0..n {
            for l in 0..self.config.q {
                for j in 0..self.k {
                    // Undo the newest-first flattening into newest-last rows.
                    recent[(self.config.q - 1 - l, j)] = set.inputs[(i, l * self.k + j)];
                }
            }
            let pred = self.predict(&recent)?;
            for j in 0..self.k {
                sse += (pred[j] - set.targets[(i, j)]).powi(2);
            }
        }
        Ok(sse / (n * self.k) as f64)
    }
}

/// One tuner trial: the sampled config and its validation MSE.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub config: LearnerConfig,
    pub val_mse: f64,
}

/// Seeded random search. Each trial trains on the earlier chronological
/// slice of `set` and is scored on the later slice; the argmin config is
/// returned together with the full trial log.
pub fn tune(
    kind: LearnerKind,
    set: &SupervisedSet,
    budget: usize,
    seed: u64,
) -> Result<(LearnerConfig, Vec<TrialRecord>)> {
    if budget < 1 {
        return Err(TtvarError::invalid("tuning budget must be >= 1"));
    }
    let n = set.inputs.nrows();
    let n_holdout = ((n as f64) * 0.2).floor().max(1.0) as usize;
    let n_fit = n - n_holdout;
    if n_fit <= set.q + 2 {
        return Err(TtvarError::invalid("too few rows to tune on"));
    }
    let fit_set = SupervisedSet {
        inputs: set.inputs.rows(0, n_fit).into_owned(),
        targets: set.targets.rows(0, n_fit).into_owned(),
        dates: set.dates[..n_fit].to_vec(),
        q: set.q,
        k: set.k,
    };
    let holdout = SupervisedSet {
        inputs: set.inputs.rows(n_fit, n_holdout).into_owned(),
        targets: set.targets.rows(n_fit, n_holdout).into_owned(),
        dates: set.dates[n_fit..].to_vec(),
        q: set.q,
        k: set.k,
    };
    let mut rng = Rng::new(child_seed(seed, &[str_tag("tune"), str_tag(&kind.to_string())]));
    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<usize> = None;
    let unit_sizes = [8usize, 16, 32, 64];
    for trial in 0..budget {
        let mut config = LearnerConfig::defaults(
            kind,
            set.q,
            child_seed(seed, &[str_tag("trial"), trial as u64]),
        );
        match kind {
            LearnerKind::Svr => {
                config.svr_c = rng.log_uniform(1e-2, 1e2);
                config.svr_epsilon = rng.log_uniform(1e-4, 1e-2);
                config.svr_gamma = rng.log_uniform(1e-2, 1e1);
            }
            LearnerKind::Mlp => {
                let depth = 1 + rng.uniform_usize(3);
                config.hidden = (0..depth)
                    .map(|_| unit_sizes[rng.uniform_usize(4)])
                    .collect();
                config.learning_rate = rng.log_uniform(1e-4, 1e-2);
            }
            LearnerKind::Lstm | LearnerKind::Gru => {
                config.hidden = vec![unit_sizes[rng.uniform_usize(4)]];
                config.learning_rate = rng.log_uniform(1e-4, 1e-2);
            }
        }
        let val_mse = match train(&fit_set, &config) {
            Ok(learner) => learner.score(&holdout)?,
            Err(_) => f64::INFINITY,
        };
        trials.push(TrialRecord { config, val_mse });
        let better = match best {
            None => val_mse.is_finite(),
            Some(b) => val_mse < trials[b].val_mse,
        };
        if better {
            best = Some(trial);
        }
    }
    let best = best.ok_or_else(|| TtvarError::numerical("all tuning trials failed"))?;
    Ok((trials[best].config.clone(), trials))
}

fn write_f64_line(out: &mut String, name: &str, values: &[f64]) {
    out.push_str(name);
    for v in values {
        out.push(' ');
        out.push_str(&format!("{v:.17e}"));
    }
    out.push('\n');
}

impl Learner {
    /// Plain-text serialization: a header of config fields followed by
    /// flat parameter lines. Round-trips bit-exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let c = &self.config;
        out.push_str(&format!(
            "kind {}\nq {}\nk {}\nhidden {}\nlearning_rate {:.17e}\nepochs {}\npatience {}\nseed {}\nsvr_c {:.17e}\nsvr_epsilon {:.17e}\nsvr_gamma {:.17e}\nvalidation_fraction {:.17e}\n",
            c.kind,
            c.q,
            self.k,
            c.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
            c.learning_rate,
            c.epochs,
            c.patience,
            c.seed,
            c.svr_c,
            c.svr_epsilon,
            c.svr_gamma,
            c.validation_fraction,
        ));
        write_f64_line(&mut out, "input_mean", &self.scaler.input_mean);
        write_f64_line(&mut out, "input_std", &self.scaler.input_std);
        write_f64_line(&mut out, "target_mean", &self.scaler.target_mean);
        write_f64_line(&mut out, "target_std", &self.scaler.target_std);
        match &self.params {
            LearnerParams::Net { theta, .. } => {
                write_f64_line(&mut out, "theta", theta);
            }
            LearnerParams::Svr { columns } => {
                out.push_str(&format!("svr_columns {}\n", columns.len()));
                for col in columns {
                    write_f64_line(&mut out, "beta", &col.beta);
                    write_f64_line(&mut out, "bias", &[col.bias]);
                    out.push_str(&format!(
                        "support {} {}\n",
                        col.support.nrows(),
                        col.support.ncols()
                    ));
                    for i in 0..col.support.nrows() {
                        let row: Vec<f64> = col.support.row(i).iter().cloned().collect();
                        write_f64_line(&mut out, "row", &row);
                    }
                    out.push_str(&format!("converged {}\n", col.converged));
                }
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Learner> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let mut next_kv = |expect: &str| -> Result<String> {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| TtvarError::Parse {
                    line: 0,
                    msg: format!("missing '{expect}' line"),
                })?;
            let (key, rest) = line.split_once(' ').ok_or_else(|| TtvarError::Parse {
                line: idx + 1,
                msg: "expected 'key value' line".into(),
            })?;
            if key != expect {
                return Err(TtvarError::Parse {
                    line: idx + 1,
                    msg: format!("expected key '{expect}', found '{key}'"),
                });
            }
            Ok(rest.to_string())
        };
        let parse_f64s = |s: &str| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| TtvarError::Parse {
                        line: 0,
                        msg: format!("bad float '{tok}'"),
                    })
                })
                .collect()
        };

        let kind: LearnerKind = next_kv("kind")?.parse()?;
        let q: usize = next_kv("q")?.parse().map_err(|_| TtvarError::config("bad q"))?;
        let k: usize = next_kv("k")?.parse().map_err(|_| TtvarError::config("bad k"))?;
        let hidden: Vec<usize> = next_kv("hidden")?
            .split(',')
            .map(|h| h.parse().map_err(|_| TtvarError::config("bad hidden size")))
            .collect::<Result<_>>()?;
        let learning_rate: f64 = parse_f64s(&next_kv("learning_rate")?)?[0];
        let epochs: usize =
            next_kv("epochs")?.parse().map_err(|_| TtvarError::config("bad epochs"))?;
        let patience: usize =
            next_kv("patience")?.parse().map_err(|_| TtvarError::config("bad patience"))?;
        let seed: u64 =
            next_kv("seed")?.parse().map_err(|_| TtvarError::config("bad seed"))?;
        let svr_c = parse_f64s(&next_kv("svr_c")?)?[0];
        let svr_epsilon = parse_f64s(&next_kv("svr_epsilon")?)?[0];
        let svr_gamma = parse_f64s(&next_kv("svr_gamma")?)?[0];
        let validation_fraction = parse_f64s(&next_kv("validation_fraction")?)?[0];
        let config = LearnerConfig {
            kind,
            q,
            hidden,
            learning_rate,
            epochs,
            patience,
            seed,
            svr_c,
            svr_epsilon,
            svr_gamma,
            validation_fraction,
        };
        let scaler = Scaler {
            input_mean: parse_f64s(&next_kv("input_mean")?)?,
            input_std: parse_f64s(&next_kv("input_std")?)?,
            target_mean: parse_f64s(&next_kv("target_mean")?)?,
            target_std: parse_f64s(&next_kv("target_std")?)?,
        };
        let params = match kind {
            LearnerKind::Svr => {
                let ncols: usize = next_kv("svr_columns")?
                    .parse()
                    .map_err(|_| TtvarError::config("bad svr_columns"))?;
                let mut columns = Vec::with_capacity(ncols);
                for _ in 0..ncols {
                    let beta = parse_f64s(&next_kv("beta")?)?;
                    let bias = parse_f64s(&next_kv("bias")?)?[0];
                    let dims = next_kv("support")?;
                    let mut it = dims.split_whitespace();
                    let nr: usize = it.next().unwrap_or("0").parse().unwrap_or(0);
                    let nc: usize = it.next().unwrap_or("0").parse().unwrap_or(0);
                    let mut support = DMatrix::zeros(nr, nc);
                    for i in 0..nr {
                        let row = parse_f64s(&next_kv("row")?)?;
                        for j in 0..nc {
                            support[(i, j)] = row[j];
                        }
                    }
                    let converged = next_kv("converged")? == "true";
                    columns.push(SvrColumn {
                        beta,
                        bias,
                        support,
                        gamma: svr_gamma,
                        converged,
                    });
                }
                LearnerParams::Svr { columns }
            }
            _ => {
                let theta = parse_f64s(&next_kv("theta")?)?;
                let shape = net_shape(&config, k)?;
                if theta.len() != shape.param_len() {
                    return Err(TtvarError::Parse {
                        line: 0,
                        msg: format!(
                            "theta length {} does not match shape {:?}",
                            theta.len(),
                            shape
                        ),
                    });
                }
                LearnerParams::Net { shape, theta }
            }
        };
        Ok(Learner {
            config,
            k,
            scaler,
            params,
            log: TrainingLog::default(),
        })
    }
}

/// Validation MSE of a trained learner on the scaled space (used by
/// tests that reason about the training log).
pub fn scaled_validation_loss(learner: &Learner, set: &SupervisedSet) -> Result<f64> {
    match &learner.params {
        LearnerParams::Net { shape, theta } => {
            let inputs = learner.scaler.transform_inputs(&set.inputs);
            let targets = learner.scaler.transform_targets(&set.targets);
            Ok(eval_loss(shape, theta, &inputs, &targets, 0..set.inputs.nrows()))
        }
        LearnerParams::Svr { .. } => learner.score(set),
    }
}
