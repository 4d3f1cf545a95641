//! Experiment configuration: task defaults, `key = value` files, overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use svrhmc_core::samplers::SamplerKind;

use crate::data::{Delimiter, ResponseColumn, Scaling};
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Synthetic,
    Logistic,
    Linreg,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Synthetic => "synthetic",
            Task::Logistic => "logistic",
            Task::Linreg => "linreg",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Task::Synthetic),
            "logistic" => Ok(Task::Logistic),
            "linreg" => Ok(Task::Linreg),
            _ => Err(HarnessError::Config(format!("unknown task `{s}`"))),
        }
    }
}

/// Step-size grid multipliers. Overdamped samplers use `multiplier / L`;
/// kinetic samplers (run with `u = 1/L`) use the multiplier directly.
pub const DEFAULT_GRID: [f64; 13] = [1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub samplers: Vec<SamplerKind>,
    /// Synthetic problem size.
    pub n: usize,
    pub d: usize,
    pub data: Option<PathBuf>,
    pub response_column: ResponseColumn,
    pub delimiter: Option<Delimiter>,
    /// `None` leaves features as read.
    pub scaling: Option<Scaling>,
    pub intercept: bool,
    /// Training fraction.
    pub split: f64,
    /// Fixed step size; when absent it is tuned over `grid`.
    pub eta: Option<f64>,
    pub gamma: f64,
    /// Inverse mass; defaults to `1/L`.
    pub u: Option<f64>,
    /// Defaults to `n`.
    pub epoch_len: Option<usize>,
    /// Fixed iteration count; when absent it is derived from `data_passes`.
    pub iters: Option<usize>,
    pub data_passes: f64,
    pub batch: usize,
    pub chains: usize,
    pub repeats: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub lambda: f64,
    pub sigma_a_sq: f64,
    pub stride: Option<usize>,
    pub zero_noise: bool,
    pub grid: Vec<f64>,
    /// Seed of the validation run used for tuning.
    pub tune_seed: u64,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for `task`.
    pub fn new(task: Task) -> Self {
        let synthetic = task == Task::Synthetic;
        Self {
            task,
            samplers: if synthetic {
                SamplerKind::ALL.to_vec()
            } else {
                // full-gradient runs cannot get past the burn-in on a budget
                // of a few data passes
                SamplerKind::ALL.into_iter().filter(|k| !matches!(k, SamplerKind::Hmc | SamplerKind::Lmc)).collect()
            },
            n: 50,
            d: 2,
            data: None,
            response_column: ResponseColumn::Last,
            delimiter: None,
            scaling: match task {
                Task::Synthetic => None,
                Task::Logistic => Some(Scaling::MinMax),
                Task::Linreg => Some(Scaling::Standardize),
            },
            intercept: false,
            split: 0.5,
            eta: None,
            gamma: 2.0,
            u: None,
            epoch_len: None,
            iters: None,
            data_passes: if synthetic { 20.0 } else { 10.0 },
            batch: 1,
            chains: if synthetic { 2000 } else { 1 },
            repeats: if synthetic { 1 } else { 20 },
            seed: 0,
            burn_in: 50,
            lambda: 1.0,
            sigma_a_sq: 1.0,
            stride: None,
            zero_noise: false,
            grid: DEFAULT_GRID.to_vec(),
            tune_seed: 1_000_003,
            out: None,
        }
    }

    /// Sets one field from its textual form. Keys match the CLI flags without
    /// the leading dashes; `_` and `-` are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let bad = |what: &str| HarnessError::Config(format!("`{key}`: {what}, got `{value}`"));
        macro_rules! parse {
            ($what:expr) => {
                value.parse().map_err(|_| bad($what))?
            };
        }
        match key.as_str() {
            "task" => self.task = value.parse()?,
            "sampler" | "samplers" => self.samplers = parse_samplers(value)?,
            "n" => self.n = parse!("expected a count"),
            "d" => self.d = parse!("expected a count"),
            "data" => self.data = Some(PathBuf::from(value)),
            "response-column" => self.response_column = value.parse()?,
            "delimiter" => self.delimiter = Some(value.parse()?),
            "scaling" => self.scaling = if value == "none" { None } else { Some(value.parse()?) },
            "intercept" => self.intercept = parse_bool(value).ok_or_else(|| bad("expected true/false"))?,
            "split" => self.split = parse!("expected a fraction"),
            "eta" => self.eta = Some(parse!("expected a number")),
            "gamma" => self.gamma = parse!("expected a number"),
            "u" => self.u = Some(parse!("expected a number")),
            "epoch-len" => self.epoch_len = Some(parse!("expected a count")),
            "iters" => self.iters = Some(parse!("expected a count")),
            "data-passes" => self.data_passes = parse!("expected a number"),
            "batch" => self.batch = parse!("expected a count"),
            "chains" => self.chains = parse!("expected a count"),
            "repeats" => self.repeats = parse!("expected a count"),
            "seed" => self.seed = parse!("expected an unsigned integer"),
            "burn-in" => self.burn_in = parse!("expected a count"),
            "lambda" => self.lambda = parse!("expected a number"),
            "sigma-a-sq" => self.sigma_a_sq = parse!("expected a number"),
            "stride" => self.stride = Some(parse!("expected a count")),
            "zero-noise" => self.zero_noise = parse_bool(value).ok_or_else(|| bad("expected true/false"))?,
            "grid" => {
                self.grid = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("expected comma-separated numbers"))?
            }
            "tune-seed" => self.tune_seed = parse!("expected an unsigned integer"),
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(HarnessError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file. `#` starts a comment; blank lines are
    /// ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| HarnessError::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(k, v).map_err(|e| HarnessError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        self.apply_text(&text)
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(HarnessError::Config(msg.to_string()));
        if self.samplers.is_empty() {
            return fail("no sampler selected");
        }
        for (count, name) in [(self.chains, "chains"), (self.repeats, "repeats"), (self.batch, "batch")] {
            if count == 0 {
                return Err(HarnessError::Config(format!("`{name}` must be >= 1")));
            }
        }
        if self.task == Task::Synthetic && (self.n == 0 || self.d == 0) {
            return fail("`n` and `d` must be >= 1");
        }
        if self.task != Task::Synthetic && self.data.is_none() {
            return fail("this task needs `--data`");
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return fail("`split` must be in (0, 1)");
        }
        if self.epoch_len == Some(0) || self.iters == Some(0) || self.stride == Some(0) {
            return fail("`epoch-len`, `iters` and `stride` must be >= 1");
        }
        if self.iters.is_none() && !(self.data_passes > 0.0 && self.data_passes.is_finite()) {
            return fail("`data-passes` must be > 0");
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.gamma)
            || !self.eta.is_none_or(positive)
            || !self.u.is_none_or(positive)
            || !positive(self.sigma_a_sq)
        {
            return fail("`eta`, `gamma`, `u` and `sigma-a-sq` must be finite and > 0");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail("`lambda` must be finite and >= 0");
        }
        if self.eta.is_none() && (self.grid.is_empty() || !self.grid.iter().all(|&g| positive(g))) {
            return fail("`grid` must be a nonempty list of positive numbers");
        }
        Ok(())
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

/// `all` or a comma-separated list of sampler names.
pub fn parse_samplers(s: &str) -> Result<Vec<SamplerKind>> {
    if s.trim() == "all" {
        return Ok(SamplerKind::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in s.split(',') {
        let kind: SamplerKind = name
            .trim()
            .parse()
            .map_err(|_| HarnessError::Config(format!("unknown sampler `{}`", name.trim())))?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    Ok(out)
}
