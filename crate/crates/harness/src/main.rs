use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use svrhmc::{run, ExperimentConfig, ExperimentOutput, HarnessError, Result, Task};

#[derive(Parser)]
#[command(name = "svrhmc", version, about = "Run SVR-HMC and baseline samplers and write CSV traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// W2 convergence on a random Gaussian finite-sum target.
    Synthetic(Flags),
    /// Bayesian logistic regression on a classification dataset.
    Logistic(Flags),
    /// Bayesian linear regression on a regression dataset.
    Linreg(Flags),
}

/// Every value flag overrides the same key in `--config`.
#[derive(Args)]
struct Flags {
    /// `key = value` file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sampler name, comma-separated list, or `all`.
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    u: Option<String>,
    #[arg(long)]
    epoch_len: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    data_passes: Option<String>,
    #[arg(long)]
    chains: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    burn_in: Option<String>,
    #[arg(long)]
    batch: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    sigma_a_sq: Option<String>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    response_column: Option<String>,
    #[arg(long)]
    delimiter: Option<String>,
    /// `standardize`, `minmax` or `none`.
    #[arg(long)]
    scaling: Option<String>,
    #[arg(long)]
    intercept: bool,
    /// Training fraction.
    #[arg(long)]
    split: Option<String>,
    /// Synthetic problem size.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    d: Option<String>,
    /// Comma-separated step-size multipliers for tuning.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    tune_seed: Option<String>,
    /// CSV destination; stdout when absent. Metadata goes to `<out>.meta`.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    stride: Option<String>,
    /// Drop the injected noise (deterministic dynamics).
    #[arg(long)]
    zero_noise: bool,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let opts: [(&'static str, &Option<String>); 25] = [
            ("sampler", &self.sampler),
            ("eta", &self.eta),
            ("gamma", &self.gamma),
            ("u", &self.u),
            ("epoch-len", &self.epoch_len),
            ("iters", &self.iters),
            ("data-passes", &self.data_passes),
            ("chains", &self.chains),
            ("repeats", &self.repeats),
            ("seed", &self.seed),
            ("burn-in", &self.burn_in),
            ("batch", &self.batch),
            ("lambda", &self.lambda),
            ("sigma-a-sq", &self.sigma_a_sq),
            ("data", &self.data),
            ("response-column", &self.response_column),
            ("delimiter", &self.delimiter),
            ("scaling", &self.scaling),
            ("split", &self.split),
            ("n", &self.n),
            ("d", &self.d),
            ("grid", &self.grid),
            ("tune-seed", &self.tune_seed),
            ("out", &self.out),
            ("stride", &self.stride),
        ];
        let mut pairs: Vec<_> = opts
            .into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect();
        if self.intercept {
            pairs.push(("intercept", "true"));
        }
        if self.zero_noise {
            pairs.push(("zero-noise", "true"));
        }
        pairs
    }
}

fn build_config(task: Task, flags: &Flags) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(task);
    if let Some(path) = &flags.config {
        cfg.apply_file(path)?;
        if cfg.task != task {
            return Err(HarnessError::Config(format!(
                "config file sets task `{}` but the subcommand is `{task}`",
                cfg.task
            )));
        }
    }
    for (k, v) in flags.pairs() {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    let rows = out.rows(cfg.task, cfg.seed);
    match &cfg.out {
        Some(path) => {
            let f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
            svrhmc::trace::write_trace(BufWriter::new(f), &rows)?;
            write_metadata(&meta_path(path), &out.metadata)?;
        }
        None => svrhmc::trace::write_trace(io::stdout().lock(), &rows)?,
    }
    for s in &out.summaries {
        eprintln!(
            "{:<7} {:<10} {:.6} +- {:.6}  ({} repeats, {:.2} data passes)",
            s.sampler.name(),
            s.metric,
            s.mean,
            s.std,
            s.repeats,
            s.data_pass
        );
    }
    Ok(())
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn write_metadata(path: &Path, meta: &[(String, String)]) -> Result<()> {
    let write = || -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (k, v) in meta {
            writeln!(w, "{k} = {v}")?;
        }
        w.flush()
    };
    write().map_err(|e| HarnessError::io(path, e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (task, flags) = match &cli.command {
        Command::Synthetic(f) => (Task::Synthetic, f),
        Command::Logistic(f) => (Task::Logistic, f),
        Command::Linreg(f) => (Task::Linreg, f),
    };
    let result = build_config(task, flags).and_then(|cfg| {
        let out = run(&cfg)?;
        write_outputs(&cfg, &out)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
