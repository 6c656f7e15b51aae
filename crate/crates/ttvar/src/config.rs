//! Strict sectioned run configuration.
//!
//! Grammar: plain-text sections `[data] [window] [models] [learner.X]
//! [regimes]` containing `key = value` lines. `#` starts a comment. Unknown
//! keys and unknown sections are fatal so that a typo can never silently
//! fall back to a default. Every default that fills a gap is echoed into
//! `defaults_filled` so the run manifest can list the effective
//! configuration in full.
//!
//! ```text
//! [data]
//! returns = returns.csv        # ReturnPanel CSV (date column + one per asset)
//! seed = 2024                  # required, no unseeded runs
//! out_dir = out                # optional, default "out"
//!
//! [window]
//! train_len = 1500             # required
//! test_len = 1000              # required
//! refit_stride_var = 1         # default 1
//! refit_stride_learner = 20    # default 20
//!
//! [models]
//! list = var, var-t, var-t-lstm   # required, comma separated
//! p = 1                           # optional, default: select by AIC
//! q = 5                           # default 5 residual lags
//!
//! [learner.lstm]               # optional, one section per learner kind
//! hidden = 16                  # MLP takes a comma list, e.g. 32,16
//! learning_rate = 0.003
//! epochs = 300
//! patience = 20
//! validation_fraction = 0.2
//! svr_c = 1.0                  # SVR only
//! svr_epsilon = 0.001
//! svr_gamma = 0.1
//! tune_budget = 20             # if set, random-search instead of the above
//!
//! [regimes]                    # optional; label = start..end (inclusive)
//! COVID Crash = 2020-02-15..2020-07-15
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::error::{Result, TtvarError};
use crate::evaluation::{RegimeCalendar, RegimeInterval};
use crate::hybrid::{LearnerSetup, ModelSpec, PipelineSpec};
use crate::learners::{LearnerConfig, LearnerKind};
use crate::timeseries::WindowPlan;

/// Parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub returns_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub master_seed: u64,
    pub models: Vec<ModelSpec>,
    /// None means: select by AIC on the first training window.
    pub p: Option<usize>,
    pub q: usize,
    pub window: WindowPlan,
    pub learners: BTreeMap<LearnerKind, LearnerSetup>,
    pub regimes: RegimeCalendar,
    /// Human-readable list of defaults that filled gaps, for the manifest.
    pub defaults_filled: Vec<String>,
}

impl RunConfig {
    /// Assemble the backtest pipeline spec once `p` is known.
    pub fn pipeline_spec(&self, p: usize) -> PipelineSpec {
        PipelineSpec {
            models: self.models.clone(),
            p,
            q: self.q,
            window: self.window,
            learners: self.learners.clone(),
            master_seed: self.master_seed,
        }
    }
}

struct Line {
    number: usize,
    key: String,
    value: String,
}

fn parse_err(line: usize, msg: impl Into<String>) -> TtvarError {
    TtvarError::Parse { line, msg: msg.into() }
}

/// Split the raw text into sections of key/value lines, preserving line
/// numbers for error messages.
fn split_sections(text: &str) -> Result<Vec<(String, usize, Vec<Line>)>> {
    let mut sections: Vec<(String, usize, Vec<Line>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(parse_err(number, format!("malformed section header '{line}'")));
            }
            let name = line[1..line.len() - 1].trim().to_string();
            if name.is_empty() {
                return Err(parse_err(number, "empty section name"));
            }
            if sections.iter().any(|(n, _, _)| *n == name) {
                return Err(parse_err(number, format!("duplicate section [{name}]")));
            }
            sections.push((name, number, Vec::new()));
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(parse_err(number, format!("expected 'key = value', found '{line}'")));
        };
        let key = line[..eq].trim().to_string();
        let value = line[eq + 1..].trim().to_string();
        if key.is_empty() {
            return Err(parse_err(number, "empty key"));
        }
        let Some(section) = sections.last_mut() else {
            return Err(parse_err(number, format!("key '{key}' appears before any section")));
        };
        if section.2.iter().any(|l| l.key == key) {
            return Err(parse_err(number, format!("duplicate key '{key}' in [{}]", section.0)));
        }
        section.2.push(Line { number, key, value });
    }
    Ok(sections)
}

/// Typed accessors over one section that track which keys were consumed,
/// so leftovers can be reported as unknown.
struct Section {
    name: String,
    lines: Vec<Line>,
    used: Vec<bool>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        for (i, l) in self.lines.iter().enumerate() {
            if l.key == key {
                self.used[i] = true;
                return Some((l.number, l.value.clone()));
            }
        }
        None
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((number, value)) => value.parse::<T>().map(Some).map_err(|_| {
                parse_err(number, format!("key '{key}' expects {what}, found '{value}'"))
            }),
        }
    }

    fn finish(self) -> Result<()> {
        for (l, used) in self.lines.iter().zip(&self.used) {
            if !used {
                return Err(parse_err(
                    l.number,
                    format!("unknown key '{}' in section [{}]", l.key, self.name),
                ));
            }
        }
        Ok(())
    }
}

fn parse_date_range(number: usize, value: &str) -> Result<(NaiveDate, NaiveDate)> {
    let Some((a, b)) = value.split_once("..") else {
        return Err(parse_err(
            number,
            format!("regime interval expects 'YYYY-MM-DD..YYYY-MM-DD', found '{value}'"),
        ));
    };
    let parse = |s: &str| -> Result<NaiveDate> {
        s.trim()
            .parse()
            .map_err(|_| parse_err(number, format!("bad date '{}'", s.trim())))
    };
    Ok((parse(a)?, parse(b)?))
}

/// Parse a config from text. `base_dir` resolves relative data paths;
/// `check_files` controls whether referenced files must exist.
pub fn parse_config_str(text: &str, base_dir: &Path, check_files: bool) -> Result<RunConfig> {
    let raw_sections = split_sections(text)?;
    let mut defaults_filled = Vec::new();

    let mut sections: Vec<Section> = raw_sections
        .into_iter()
        .map(|(name, _, lines)| {
            let used = vec![false; lines.len()];
            Section { name, lines, used }
        })
        .collect();
    let known = |name: &str| -> bool {
        matches!(name, "data" | "window" | "models" | "regimes")
            || name.starts_with("learner.")
    };
    for s in &sections {
        if !known(&s.name) {
            return Err(TtvarError::config(format!("unknown section [{}]", s.name)));
        }
    }
    fn take_section(sections: &mut Vec<Section>, name: &str) -> Option<Section> {
        let idx = sections.iter().position(|s| s.name == name)?;
        Some(sections.remove(idx))
    }

    // [data]
    let mut data = take_section(&mut sections, "data")
        .ok_or_else(|| TtvarError::config("missing required section [data]"))?;
    let returns_path = data.take("returns").map(|(_, v)| base_dir.join(v));
    if check_files {
        if let Some(p) = &returns_path {
            if !p.exists() {
                return Err(TtvarError::config(format!(
                    "returns file '{}' does not exist",
                    p.display()
                )));
            }
        }
    }
    let master_seed = data
        .take_parsed::<u64>("seed", "an unsigned integer")?
        .ok_or_else(|| TtvarError::config("seed is required in [data]; unseeded runs are not allowed"))?;
    let out_dir = match data.take("out_dir") {
        Some((_, v)) => base_dir.join(v),
        None => {
            defaults_filled.push("out_dir = out".to_string());
            base_dir.join("out")
        }
    };
    data.finish()?;

    // [window]
    let mut window_s = take_section(&mut sections, "window")
        .ok_or_else(|| TtvarError::config("missing required section [window]"))?;
    let train_len = window_s
        .take_parsed::<usize>("train_len", "a positive integer")?
        .ok_or_else(|| TtvarError::config("train_len is required in [window]"))?;
    let test_len = window_s
        .take_parsed::<usize>("test_len", "a positive integer")?
        .ok_or_else(|| TtvarError::config("test_len is required in [window]"))?;
    let refit_stride_var = match window_s.take_parsed::<usize>("refit_stride_var", "a positive integer")? {
        Some(v) => v,
        None => {
            defaults_filled.push("refit_stride_var = 1".to_string());
            1
        }
    };
    let refit_stride_learner =
        match window_s.take_parsed::<usize>("refit_stride_learner", "a positive integer")? {
            Some(v) => v,
            None => {
                defaults_filled.push("refit_stride_learner = 20".to_string());
                20
            }
        };
    window_s.finish()?;
    let window = WindowPlan { train_len, test_len, refit_stride_var, refit_stride_learner };

    // [models]
    let mut models_s = take_section(&mut sections, "models")
        .ok_or_else(|| TtvarError::config("missing required section [models]"))?;
    let (list_line, list_value) = models_s
        .take("list")
        .ok_or_else(|| TtvarError::config("list is required in [models]"))?;
    let mut models = Vec::new();
    for token in list_value.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        let spec: ModelSpec = token
            .parse()
            .map_err(|e: TtvarError| parse_err(list_line, e.to_string()))?;
        if models.contains(&spec) {
            return Err(parse_err(list_line, format!("model '{token}' listed twice")));
        }
        models.push(spec);
    }
    if models.is_empty() {
        return Err(parse_err(list_line, "model list is empty"));
    }
    let p = models_s.take_parsed::<usize>("p", "a positive integer")?;
    if p.is_none() {
        defaults_filled.push("p = auto (AIC on first training window)".to_string());
    }
    let q = match models_s.take_parsed::<usize>("q", "a positive integer")? {
        Some(v) => v,
        None => {
            defaults_filled.push("q = 5".to_string());
            5
        }
    };
    models_s.finish()?;

    // [learner.X]
    let mut learners: BTreeMap<LearnerKind, LearnerSetup> = BTreeMap::new();
    let learner_names: Vec<String> = sections
        .iter()
        .filter(|s| s.name.starts_with("learner."))
        .map(|s| s.name.clone())
        .collect();
    for name in learner_names {
        let mut s = take_section(&mut sections, &name).expect("section present");
        let kind: LearnerKind = name["learner.".len()..]
            .parse()
            .map_err(|e: TtvarError| TtvarError::config(format!("[{name}]: {e}")))?;
        let mut cfg = LearnerConfig::defaults(kind, q, master_seed);
        if let Some((number, v)) = s.take("hidden") {
            cfg.hidden = v
                .split(',')
                .map(|t| {
                    t.trim().parse::<usize>().map_err(|_| {
                        parse_err(number, format!("hidden expects integers, found '{t}'"))
                    })
                })
                .collect::<Result<Vec<usize>>>()?;
        }
        if let Some(v) = s.take_parsed::<f64>("learning_rate", "a number")? {
            cfg.learning_rate = v;
        }
        if let Some(v) = s.take_parsed::<usize>("epochs", "a positive integer")? {
            cfg.epochs = v;
        }
        if let Some(v) = s.take_parsed::<usize>("patience", "a positive integer")? {
            cfg.patience = v;
        }
        if let Some(v) = s.take_parsed::<f64>("validation_fraction", "a number in (0, 0.5]")? {
            cfg.validation_fraction = v;
        }
        if let Some(v) = s.take_parsed::<f64>("svr_c", "a number")? {
            cfg.svr_c = v;
        }
        if let Some(v) = s.take_parsed::<f64>("svr_epsilon", "a number")? {
            cfg.svr_epsilon = v;
        }
        if let Some(v) = s.take_parsed::<f64>("svr_gamma", "a number")? {
            cfg.svr_gamma = v;
        }
        let budget = s.take_parsed::<usize>("tune_budget", "a positive integer")?;
        s.finish()?;
        let setup = match budget {
            Some(b) => LearnerSetup::Tune { budget: b },
            None => {
                cfg.validate()?;
                LearnerSetup::Config(cfg)
            }
        };
        learners.insert(kind, setup);
    }
    // Learners referenced by the model list but without a section get the
    // documented defaults.
    for m in &models {
        if let Some(kind) = m.learner {
            if !learners.contains_key(&kind) {
                defaults_filled.push(format!("[learner.{kind}] = built-in defaults"));
                learners.insert(
                    kind,
                    LearnerSetup::Config(LearnerConfig::defaults(kind, q, master_seed)),
                );
            }
        }
    }

    // [regimes]
    let mut regimes = RegimeCalendar::default();
    if let Some(s) = take_section(&mut sections, "regimes") {
        for l in &s.lines {
            let (start, end) = parse_date_range(l.number, &l.value)?;
            regimes.intervals.push(RegimeInterval { label: l.key.clone(), start, end });
        }
        regimes.validate()?;
    } else {
        defaults_filled.push("regimes = none (full sample only)".to_string());
    }

    for s in &sections {
        debug_assert!(s.name.starts_with("learner."), "unconsumed section {}", s.name);
    }

    Ok(RunConfig {
        returns_path,
        out_dir,
        master_seed,
        models,
        p,
        q,
        window,
        learners,
        regimes,
        defaults_filled,
    })
}

/// Parse a config file from disk; relative paths resolve against the file's
/// directory and referenced files must exist.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base, true)
}
