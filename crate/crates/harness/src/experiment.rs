//! Experiment drivers for the synthetic, logistic and linear-regression
//! tasks.
//!
//! Chain `c` of a run with seed `s` always draws from `chain_rngs(s, 0, c)`.
//! Repeat `r` of an experiment with master seed `s0` is a run with seed
//! `s0 + r` (its synthetic problem and its train/test split are seeded with
//! the same value). Chains are grouped in fixed blocks and merged in block
//! order, so results do not depend on the number of worker threads.

use log::{debug, info};
use rayon::prelude::*;
use svrhmc_core::metrics::{gaussian_w2, linear_test_mse, logistic_test_metrics, GaussianMoments, MomentAccumulator, PathAverage};
use svrhmc_core::model::{synthetic_quadratic, FiniteSumPotential, LinearRegressionPotential, LogisticPotential, TargetGaussian};
use svrhmc_core::samplers::{Chain, GradientEvent, IndexSampling, KineticState, Observer, SamplerConfig, SamplerKind};
use svrhmc_core::seeding::chain_rngs;

use crate::accountant::{default_stride, iterations_for_budget, GradientAccountant};
use crate::config::{ExperimentConfig, Task};
use crate::data::{self, Dataset};
use crate::error::{HarnessError, Result};
use crate::trace::TraceRecord;

/// Chains per parallel work item.
const BLOCK: usize = 64;

/// Multiplier-to-step-size conversion for the tuning grid: `1/L` for the
/// overdamped samplers, 1 for the kinetic ones (whose `u = 1/L` already
/// carries the scale).
pub fn step_scale(kind: SamplerKind, smoothness: f64) -> f64 {
    if kind.is_kinetic() {
        1.0
    } else {
        1.0 / smoothness
    }
}

/// Everything but the step size, resolved against a potential.
pub fn sampler_config<P: FiniteSumPotential + ?Sized>(
    cfg: &ExperimentConfig,
    kind: SamplerKind,
    potential: &P,
    eta: f64,
    seed: u64,
) -> Result<SamplerConfig> {
    let n = potential.num_components();
    let l = smoothness(potential)?;
    let mut sc = SamplerConfig {
        eta,
        gamma: cfg.gamma,
        u: cfg.u.unwrap_or(1.0 / l),
        epoch_len: cfg.epoch_len.unwrap_or(n),
        iterations: 0,
        seed,
        batch_size: cfg.batch,
        index_sampling: IndexSampling::WithReplacement,
        zero_noise: cfg.zero_noise,
    };
    sc.iterations = match cfg.iters {
        Some(k) => k,
        None => iterations_for_budget(kind, n, &sc, cfg.data_passes),
    };
    if sc.iterations == 0 {
        return Err(HarnessError::Config(format!(
            "{} data passes do not pay for a single {kind} iteration",
            cfg.data_passes
        )));
    }
    sc.validate(n)?;
    Ok(sc)
}

fn smoothness<P: FiniteSumPotential + ?Sized>(potential: &P) -> Result<f64> {
    potential
        .smoothness()
        .ok_or_else(|| HarnessError::Config("potential does not declare a smoothness constant".into()))
}

/// Iterations at which a run of `k_total` steps is recorded: multiples of
/// `stride` plus the last one. Variance-reduced samplers skip `k = 0`
/// because their first data pass goes to the anchor gradient.
pub fn record_points(kind: SamplerKind, k_total: usize, stride: usize, first: usize) -> Vec<usize> {
    let start = if kind.is_variance_reduced() { first.max(1) } else { first };
    let mut pts: Vec<usize> = (start..=k_total).filter(|k| k % stride == 0).collect();
    if pts.last() != Some(&k_total) {
        pts.push(k_total);
    }
    pts
}

/// One recorded point of a W2 curve.
#[derive(Debug, Clone, PartialEq)]
pub struct W2Point {
    pub iteration: usize,
    pub data_pass: f64,
    pub w2: f64,
}

struct SnapshotRecorder<'a> {
    points: &'a [usize],
    next: usize,
    accs: &'a mut [MomentAccumulator],
    passes: Vec<f64>,
    accountant: GradientAccountant,
}

impl SnapshotRecorder<'_> {
    fn offer(&mut self, k: usize, x: &[f64]) {
        if self.points.get(self.next) == Some(&k) {
            self.accs[self.next].push(x);
            self.passes.push(self.accountant.data_passes());
            self.next += 1;
        }
    }
}

impl Observer for SnapshotRecorder<'_> {
    fn on_iterate(&mut self, k: usize, x: &[f64]) {
        self.offer(k, x);
    }
    fn on_gradient(&mut self, event: GradientEvent) {
        self.accountant.record(event);
    }
}

/// Runs `chains` chains from `x_0 = 0, v_0 = 0` and returns the
/// moment-matched W2 to `target` at each point of `points` (sorted).
pub fn synthetic_w2_curve<P: FiniteSumPotential + Sync + ?Sized>(
    potential: &P,
    target: &TargetGaussian,
    kind: SamplerKind,
    config: &SamplerConfig,
    chains: usize,
    points: &[usize],
) -> Result<Vec<W2Point>> {
    let d = potential.dim();
    let n = potential.num_components();
    let blocks = chains.div_ceil(BLOCK);
    let per_block: Vec<(Vec<MomentAccumulator>, Vec<f64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut accs = vec![MomentAccumulator::new(d); points.len()];
            let mut passes = Vec::new();
            for c in b * BLOCK..((b + 1) * BLOCK).min(chains) {
                let mut rec = SnapshotRecorder {
                    points,
                    next: 0,
                    accs: &mut accs,
                    passes: Vec::with_capacity(points.len()),
                    accountant: GradientAccountant::new(n),
                };
                let mut chain = Chain::new(potential, kind, config.clone(), KineticState::zeros(d))?;
                rec.offer(0, &chain.state().x);
                let mut rngs = chain_rngs(config.seed, 0, c as u64);
                chain.run(&mut rngs, &mut rec)?;
                if c == 0 {
                    passes = rec.passes;
                }
            }
            Ok((accs, passes))
        })
        .collect::<Result<_>>()?;

    let mut iter = per_block.into_iter();
    let (mut total, passes) = iter.next().expect("at least one block");
    for (accs, _) in iter {
        for (t, a) in total.iter_mut().zip(&accs) {
            t.merge(a);
        }
    }
    let reference = GaussianMoments::from(target);
    total
        .iter()
        .zip(points)
        .zip(passes)
        .map(|((acc, &k), dp)| {
            Ok(W2Point {
                iteration: k,
                data_pass: dp,
                w2: gaussian_w2(&acc.finish()?, &reference)?,
            })
        })
        .collect()
}

/// Outcome of a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct Tuned {
    pub eta: f64,
    pub multiplier: f64,
    pub score: f64,
    /// `(multiplier, score)` per grid value; diverged runs score infinity.
    pub scores: Vec<(f64, f64)>,
}

/// Evaluates `score(eta)` over the grid and keeps the smallest finite score.
/// Ties go to the earlier grid entry.
pub fn tune<F>(grid: &[f64], scale: f64, score: F) -> Result<Tuned>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let scores: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&g| match score(g * scale) {
            Ok(s) if s.is_finite() => Ok((g, s)),
            Ok(_) => Ok((g, f64::INFINITY)),
            Err(HarnessError::Core(e)) if !e.is_usage() => {
                debug!("grid value {g}: {e}");
                Ok((g, f64::INFINITY))
            }
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let best = scores
        .iter()
        .copied()
        .filter(|(_, s)| s.is_finite())
        .fold(None, |best: Option<(f64, f64)>, cur| match best {
            Some(b) if b.1 <= cur.1 => Some(b),
            _ => Some(cur),
        })
        .ok_or_else(|| HarnessError::Config("every grid value diverged".into()))?;
    Ok(Tuned {
        eta: best.0 * scale,
        multiplier: best.0,
        score: best.1,
        scores,
    })
}

/// Mean and sample standard deviation of a metric's final values over
/// repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub sampler: SamplerKind,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub repeats: usize,
    pub iteration: usize,
    pub data_pass: f64,
}

fn summarize(sampler: SamplerKind, metric: &str, values: &[f64], iteration: usize, data_pass: f64) -> Summary {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Summary {
        sampler,
        metric: metric.into(),
        mean,
        std,
        repeats: values.len(),
        iteration,
        data_pass,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<TraceRecord>,
    pub summaries: Vec<Summary>,
    /// `key = value` pairs describing how the run was configured.
    pub metadata: Vec<(String, String)>,
}

impl ExperimentOutput {
    fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    /// Trace rows followed by one `<metric>_mean` and one `<metric>_std` row
    /// per summary, tagged with the master seed.
    pub fn rows(&self, task: Task, master_seed: u64) -> Vec<TraceRecord> {
        let mut rows = self.records.clone();
        for s in &self.summaries {
            for (suffix, value) in [("mean", s.mean), ("std", s.std)] {
                rows.push(TraceRecord {
                    task: task.name().into(),
                    sampler: s.sampler.name().into(),
                    seed: master_seed,
                    data_pass: s.data_pass,
                    iteration: s.iteration,
                    metric: format!("{}_{suffix}", s.metric),
                    value,
                });
            }
        }
        rows
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.task {
        Task::Synthetic => run_synthetic(cfg),
        Task::Logistic | Task::Linreg => {
            let path = cfg.data.as_deref().expect("validated");
            let ds = data::load(path, cfg.response_column, cfg.delimiter)?;
            if cfg.task == Task::Logistic {
                run_logistic(cfg, &ds)
            } else {
                run_linreg(cfg, &ds)
            }
        }
    }
}

fn header_metadata(cfg: &ExperimentConfig, out: &mut ExperimentOutput) {
    out.meta("task", cfg.task);
    out.meta("seed", cfg.seed);
    out.meta("repeats", cfg.repeats);
    out.meta("chains", cfg.chains);
    out.meta("gamma", cfg.gamma);
    out.meta("batch", cfg.batch);
    if cfg.eta.is_none() {
        let grid: Vec<String> = cfg.grid.iter().map(f64::to_string).collect();
        out.meta("grid", grid.join(","));
        out.meta("grid_scale", "kinetic: 1, overdamped: 1/L");
        out.meta("tune_seed", cfg.tune_seed);
    }
}

fn sampler_metadata(out: &mut ExperimentOutput, kind: SamplerKind, sc: &SamplerConfig, tuned: Option<&Tuned>) {
    let k = kind.name();
    out.meta(format!("{k}.eta"), sc.eta);
    out.meta(format!("{k}.u"), sc.u);
    out.meta(format!("{k}.epoch_len"), sc.epoch_len);
    out.meta(format!("{k}.iterations"), sc.iterations);
    if let Some(t) = tuned {
        out.meta(format!("{k}.grid_multiplier"), t.multiplier);
        out.meta(format!("{k}.validation_score"), t.score);
    }
}

/// W2 curves on `synthetic_quadratic(n, d, seed + r)` for every sampler.
pub fn run_synthetic(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    header_metadata(cfg, &mut out);
    out.meta("n", cfg.n);
    out.meta("d", cfg.d);

    for &kind in &cfg.samplers {
        let eta = match cfg.eta {
            Some(eta) => (eta, None),
            None => {
                let t = tune_synthetic(cfg, kind)?;
                info!("{kind}: tuned eta = {} (validation W2 {:.4})", t.eta, t.score);
                (t.eta, Some(t))
            }
        };
        let mut finals = Vec::with_capacity(cfg.repeats);
        let mut last = (0, 0.0);
        for r in 0..cfg.repeats as u64 {
            let seed = cfg.seed.wrapping_add(r);
            let (p, target) = synthetic_quadratic(cfg.n, cfg.d, seed)?;
            let sc = sampler_config(cfg, kind, &p, eta.0, seed)?;
            if r == 0 {
                sampler_metadata(&mut out, kind, &sc, eta.1.as_ref());
            }
            let points = record_points(kind, sc.iterations, cfg.stride.unwrap_or(1), 0);
            let curve = synthetic_w2_curve(&p, &target, kind, &sc, cfg.chains, &points)?;
            for pt in &curve {
                out.records.push(TraceRecord {
                    task: Task::Synthetic.name().into(),
                    sampler: kind.name().into(),
                    seed,
                    data_pass: pt.data_pass,
                    iteration: pt.iteration,
                    metric: "w2".into(),
                    value: pt.w2,
                });
            }
            let end = curve.last().expect("nonempty curve");
            finals.push(end.w2);
            last = (end.iteration, end.data_pass);
        }
        out.summaries.push(summarize(kind, "w2", &finals, last.0, last.1));
    }
    Ok(out)
}

/// Picks the step size minimizing the final W2 on the problem generated
/// from `cfg.tune_seed`.
pub fn tune_synthetic(cfg: &ExperimentConfig, kind: SamplerKind) -> Result<Tuned> {
    let (p, target) = synthetic_quadratic(cfg.n, cfg.d, cfg.tune_seed)?;
    let scale = step_scale(kind, smoothness(&p)?);
    tune(&cfg.grid, scale, |eta| {
        let sc = sampler_config(cfg, kind, &p, eta, cfg.tune_seed)?;
        let curve = synthetic_w2_curve(&p, &target, kind, &sc, cfg.chains, &[sc.iterations])?;
        Ok(curve[0].w2)
    })
}

/// Path-average estimate at one recorded iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub iteration: usize,
    pub data_pass: f64,
    /// Mean over chains of each chain's path average.
    pub estimate: Vec<f64>,
}

struct PathRecorder<'a> {
    points: &'a [usize],
    next: usize,
    average: PathAverage,
    out: Vec<(f64, Vec<f64>)>,
    accountant: GradientAccountant,
}

impl Observer for PathRecorder<'_> {
    fn on_iterate(&mut self, k: usize, x: &[f64]) {
        self.average.push(x);
        if self.points.get(self.next) == Some(&k) {
            let mean = self.average.mean().expect("points lie after the burn-in").to_vec();
            self.out.push((self.accountant.data_passes(), mean));
            self.next += 1;
        }
    }
    fn on_gradient(&mut self, event: GradientEvent) {
        self.accountant.record(event);
    }
}

/// Runs `chains` chains from the origin and returns, at each point of
/// `points`, the path average of `x_1, x_2, ...` with the first `burn_in`
/// iterates discarded. Points must be sorted and exceed `burn_in`.
pub fn path_average_trace<P: FiniteSumPotential + Sync + ?Sized>(
    potential: &P,
    kind: SamplerKind,
    config: &SamplerConfig,
    chains: usize,
    burn_in: usize,
    points: &[usize],
) -> Result<Vec<PathPoint>> {
    if points.first().is_none_or(|&k| k <= burn_in) {
        return Err(svrhmc_core::Error::InsufficientSamples {
            needed: burn_in + 1,
            got: points.first().copied().unwrap_or(0),
        }
        .into());
    }
    let d = potential.dim();
    let n = potential.num_components();
    let per_chain: Vec<Vec<(f64, Vec<f64>)>> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut rec = PathRecorder {
                points,
                next: 0,
                average: PathAverage::new(d, burn_in),
                out: Vec::with_capacity(points.len()),
                accountant: GradientAccountant::new(n),
            };
            let mut chain = Chain::new(potential, kind, config.clone(), KineticState::zeros(d))?;
            chain.run(&mut chain_rngs(config.seed, 0, c as u64), &mut rec)?;
            Ok(rec.out)
        })
        .collect::<Result<_>>()?;

    let inv = 1.0 / chains as f64;
    Ok(points
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let mut estimate = vec![0.0; d];
            for chain in &per_chain {
                for (e, v) in estimate.iter_mut().zip(&chain[j].1) {
                    *e += v * inv;
                }
            }
            PathPoint {
                iteration: k,
                data_pass: per_chain[0][j].0,
                estimate,
            }
        })
        .collect())
}

/// A regression task's model and test metric, shared by the logistic and
/// linear drivers.
trait RegressionTask: Sync {
    type Potential: FiniteSumPotential + Sync;
    fn build(&self, train: &Dataset) -> Result<Self::Potential>;
    /// `(metric name, value)` pairs for an estimate on held-out data; the
    /// first one is the tuning objective.
    fn evaluate(&self, x_hat: &[f64], test: &Dataset) -> Result<Vec<(&'static str, f64)>>;
}

struct Logistic {
    lambda: f64,
}

impl RegressionTask for Logistic {
    type Potential = LogisticPotential;

    fn build(&self, train: &Dataset) -> Result<LogisticPotential> {
        Ok(LogisticPotential::new(train.features.clone(), train.labels.clone(), self.lambda)?)
    }

    fn evaluate(&self, x_hat: &[f64], test: &Dataset) -> Result<Vec<(&'static str, f64)>> {
        let m = logistic_test_metrics(x_hat, &test.features, &test.labels)?;
        Ok(vec![("nll", m.nll), ("test_error", m.error_rate)])
    }
}

struct Linear {
    sigma_a_sq: f64,
    lambda: f64,
}

impl RegressionTask for Linear {
    type Potential = LinearRegressionPotential;

    fn build(&self, train: &Dataset) -> Result<LinearRegressionPotential> {
        Ok(LinearRegressionPotential::new(
            train.features.clone(),
            train.labels.clone(),
            self.sigma_a_sq,
            self.lambda,
        )?)
    }

    fn evaluate(&self, x_hat: &[f64], test: &Dataset) -> Result<Vec<(&'static str, f64)>> {
        Ok(vec![("mse", linear_test_mse(x_hat, &test.features, &test.labels)?)])
    }
}

/// Scaling (if configured) on the full dataset; [`data::split`] then refits
/// it on each training side.
fn prepare(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Dataset> {
    match cfg.scaling {
        Some(method) => data::normalize_with(ds, method, cfg.task == Task::Linreg),
        None => Ok(ds.clone()),
    }
}

fn split_for(cfg: &ExperimentConfig, ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = data::split(ds, fraction, seed)?;
    if cfg.intercept {
        Ok((train.with_intercept(), test.with_intercept()))
    } else {
        Ok((train, test))
    }
}

fn run_regression<T: RegressionTask>(cfg: &ExperimentConfig, ds: &Dataset, task: &T) -> Result<ExperimentOutput> {
    let ds = prepare(cfg, ds)?;
    let mut out = ExperimentOutput::default();
    header_metadata(cfg, &mut out);
    out.meta("rows", ds.len());
    out.meta("features", ds.dim() + usize::from(cfg.intercept));
    out.meta("burn_in", cfg.burn_in);
    out.meta("lambda", cfg.lambda);
    if cfg.task == Task::Linreg {
        out.meta("sigma_a_sq", cfg.sigma_a_sq);
    }

    for &kind in &cfg.samplers {
        let tuned = match cfg.eta {
            Some(_) => None,
            None => {
                let t = tune_regression(cfg, &ds, task, kind)?;
                info!("{kind}: tuned grid multiplier {} (validation score {:.5})", t.multiplier, t.score);
                Some(t)
            }
        };

        // (records, final metric values, final (iteration, data pass), config)
        let runs: Vec<(Vec<TraceRecord>, Vec<(&'static str, f64)>, (usize, f64), SamplerConfig)> = (0..cfg.repeats as u64)
            .into_par_iter()
            .map(|r| {
                let seed = cfg.seed.wrapping_add(r);
                let (train, test) = split_for(cfg, &ds, cfg.split, seed)?;
                let p = task.build(&train)?;
                let eta = match (&tuned, cfg.eta) {
                    (_, Some(eta)) => eta,
                    (Some(t), None) => t.multiplier * step_scale(kind, smoothness(&p)?),
                    (None, None) => unreachable!("tuned when eta is absent"),
                };
                let sc = sampler_config(cfg, kind, &p, eta, seed)?;
                let stride = cfg.stride.unwrap_or_else(|| default_stride(kind, p.num_components(), &sc));
                let points = record_points(kind, sc.iterations, stride, cfg.burn_in + 1);
                let trace = path_average_trace(&p, kind, &sc, cfg.chains, cfg.burn_in, &points)?;
                let mut records = Vec::new();
                let mut finals = Vec::new();
                for pt in &trace {
                    finals = task.evaluate(&pt.estimate, &test)?;
                    for &(metric, value) in &finals {
                        records.push(TraceRecord {
                            task: cfg.task.name().into(),
                            sampler: kind.name().into(),
                            seed,
                            data_pass: pt.data_pass,
                            iteration: pt.iteration,
                            metric: metric.into(),
                            value,
                        });
                    }
                }
                let end = trace.last().expect("nonempty trace");
                Ok((records, finals, (end.iteration, end.data_pass), sc))
            })
            .collect::<Result<_>>()?;

        sampler_metadata(&mut out, kind, &runs[0].3, tuned.as_ref());
        let (iteration, data_pass) = runs[0].2;
        let metrics: Vec<&'static str> = runs[0].1.iter().map(|m| m.0).collect();
        for (j, metric) in metrics.iter().enumerate() {
            let values: Vec<f64> = runs.iter().map(|r| r.1[j].1).collect();
            out.summaries.push(summarize(kind, metric, &values, iteration, data_pass));
        }
        for (records, ..) in runs {
            out.records.extend(records);
        }
    }
    Ok(out)
}

/// Grid search on a validation split: the data is split with
/// `cfg.tune_seed`, the training side is split again 80/20, and each step
/// size is scored by the first metric of the task on the 20% part after one
/// chain.
fn tune_regression<T: RegressionTask>(cfg: &ExperimentConfig, ds: &Dataset, task: &T, kind: SamplerKind) -> Result<Tuned> {
    let (train, _) = data::split(ds, cfg.split, cfg.tune_seed)?;
    let (fit, val) = split_for(cfg, &train, 0.8, cfg.tune_seed)?;
    let p = task.build(&fit)?;
    let scale = step_scale(kind, smoothness(&p)?);
    tune(&cfg.grid, scale, |eta| {
        let sc = sampler_config(cfg, kind, &p, eta, cfg.tune_seed)?;
        let trace = path_average_trace(&p, kind, &sc, 1, cfg.burn_in, &[sc.iterations])?;
        Ok(task.evaluate(&trace[0].estimate, &val)?[0].1)
    })
}

/// Bayesian logistic regression with test NLL and error rate of the path
/// average.
pub fn run_logistic(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ExperimentOutput> {
    if !ds.is_binary() {
        return Err(HarnessError::Data("logistic regression needs labels in {-1, +1} (or a mappable binary set)".into()));
    }
    run_regression(cfg, ds, &Logistic { lambda: cfg.lambda })
}

/// Bayesian linear regression with test MSE of the path average.
pub fn run_linreg(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ExperimentOutput> {
    run_regression(
        cfg,
        ds,
        &Linear {
            sigma_a_sq: cfg.sigma_a_sq,
            lambda: cfg.lambda,
        },
    )
}
