//! SVR-HMC and the five baselines behind one step interface.
//!
//! | kind    | gradient estimate                           | dynamics    |
//! |---------|---------------------------------------------|-------------|
//! | SVR-HMC | `grad f_i(x) - grad f_i(x~) + grad f(x~)`   | kinetic     |
//! | HMC     | `grad f(x)`                                 | kinetic     |
//! | SG-HMC  | minibatch mean                              | kinetic     |
//! | LMC     | `grad f(x)`                                 | overdamped  |
//! | SGLD    | minibatch mean                              | overdamped  |
//! | VR-SGLD | `grad f_i(x) - grad f_i(x~) + grad f(x~)`   | overdamped  |
//!
//! Kinetic samplers inject the correlated pair from [`NoiseModel`];
//! overdamped samplers inject `sqrt(2 eta) * N(0, I)`. Noise comes from
//! one random stream and index sampling from another, so switching the
//! gradient estimator never shifts the noise sequence.

mod chain;
mod theory;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_dim, ensure_finite, ensure_positive, Error, Result};
use crate::model::{component_gradient_into, full_gradient_into, mean_gradient_into, FiniteSumPotential};
use crate::noise::NoiseModel;

pub use chain::{run_chain, svr_hmc_run, Chain, GradientEvent, IterateFn, Observer, RunOutcome};
pub use theory::{select_step_size, theory_bound, StepSizeChoice, TheoryBoundInputs};

/// Position and velocity of one chain. Overdamped samplers leave `v` alone.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl KineticState {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        ensure_dim(x.len(), v.len())?;
        ensure_finite(&x, "initial position")?;
        ensure_finite(&v, "initial velocity")?;
        Ok(Self { x, v })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            x: vec![0.0; d],
            v: vec![0.0; d],
        }
    }

    /// Position `x` with `v ~ N(0, u I)`, the velocity marginal of the
    /// invariant law `exp(-f(x) - ||v||^2 / (2u))`.
    pub fn with_stationary_velocity<R: Rng + ?Sized>(x: Vec<f64>, u: f64, rng: &mut R) -> Result<Self> {
        ensure_positive(u, "u")?;
        let s = libm::sqrt(u);
        let v = x.iter().map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect();
        Self::new(x, v)
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.v).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SamplerKind {
    SvrHmc,
    Hmc,
    SgHmc,
    Lmc,
    Sgld,
    VrSgld,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 6] = [
        SamplerKind::SvrHmc,
        SamplerKind::Hmc,
        SamplerKind::SgHmc,
        SamplerKind::Lmc,
        SamplerKind::Sgld,
        SamplerKind::VrSgld,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::SvrHmc => "svrhmc",
            SamplerKind::Hmc => "hmc",
            SamplerKind::SgHmc => "sghmc",
            SamplerKind::Lmc => "lmc",
            SamplerKind::Sgld => "sgld",
            SamplerKind::VrSgld => "vrsgld",
        }
    }

    /// Uses position/velocity dynamics with the correlated noise pair.
    pub fn is_kinetic(self) -> bool {
        matches!(self, SamplerKind::SvrHmc | SamplerKind::Hmc | SamplerKind::SgHmc)
    }

    /// Uses epoch anchors and semi-stochastic gradients.
    pub fn is_variance_reduced(self) -> bool {
        matches!(self, SamplerKind::SvrHmc | SamplerKind::VrSgld)
    }

    pub fn uses_minibatch(self) -> bool {
        matches!(self, SamplerKind::SgHmc | SamplerKind::Sgld)
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s) || s.replace(['-', '_'], "").eq_ignore_ascii_case(k.name()))
            .ok_or(Error::InvalidParameter {
                name: "sampler",
                reason: "expected one of svrhmc, hmc, sghmc, lmc, sgld, vrsgld",
            })
    }
}

/// How minibatch samplers choose their components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexSampling {
    /// `batch_size` indices uniform on `[n]`, with replacement.
    #[default]
    WithReplacement,
    /// Every component once, in order. Test hook: turns a minibatch
    /// gradient into the full gradient.
    Enumerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Step size `eta`.
    pub eta: f64,
    /// Friction `gamma`.
    pub gamma: f64,
    /// Inverse mass `u`.
    pub u: f64,
    /// Epoch length `m` of the variance-reduced samplers.
    pub epoch_len: usize,
    /// Total iterations `K`.
    pub iterations: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub index_sampling: IndexSampling,
    /// Test hook: drop all Gaussian injections (no random draws are made).
    pub zero_noise: bool,
}

impl SamplerConfig {
    /// `gamma = 2`, `u = 1/L`, `m = n`, batch size 1. Fails when the
    /// potential does not declare `L`; pass `u` explicitly in that case.
    pub fn theorem_defaults<P: FiniteSumPotential + ?Sized>(eta: f64, potential: &P, iterations: usize) -> Result<Self> {
        let l = potential.smoothness().ok_or(Error::InvalidParameter {
            name: "u",
            reason: "potential declares no smoothness constant; set u explicitly",
        })?;
        ensure_positive(l, "L")?;
        Ok(Self {
            eta,
            gamma: 2.0,
            u: 1.0 / l,
            epoch_len: potential.num_components(),
            iterations,
            seed: 0,
            batch_size: 1,
            index_sampling: IndexSampling::WithReplacement,
            zero_noise: false,
        })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        ensure_positive(self.eta, "eta")?;
        ensure_positive(self.gamma, "gamma")?;
        ensure_positive(self.u, "u")?;
        let positive = |v: usize, name| {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, reason: "must be >= 1" })
            }
        };
        positive(self.epoch_len, "epoch_len")?;
        positive(self.iterations, "iterations")?;
        positive(self.batch_size, "batch_size")?;
        if self.batch_size > n {
            return Err(Error::InvalidParameter {
                name: "batch_size",
                reason: "must not exceed the number of components",
            });
        }
        Ok(())
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.gamma, self.u, self.eta)
    }
}

/// Snapshot `x~` of an epoch together with `grad f(x~)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochAnchor {
    pub(crate) x_tilde: Vec<f64>,
    pub(crate) g_tilde: Vec<f64>,
}

impl EpochAnchor {
    pub fn new<P: FiniteSumPotential + ?Sized>(potential: &P, x_tilde: Vec<f64>) -> Result<Self> {
        ensure_dim(potential.dim(), x_tilde.len())?;
        ensure_finite(&x_tilde, "snapshot")?;
        let mut g_tilde = vec![0.0; x_tilde.len()];
        full_gradient_into(potential, &x_tilde, &mut g_tilde);
        Ok(Self { x_tilde, g_tilde })
    }

    pub fn x_tilde(&self) -> &[f64] {
        &self.x_tilde
    }

    pub fn g_tilde(&self) -> &[f64] {
        &self.g_tilde
    }
}

/// `out = (grad f_i(x) - grad f_i(x~)) + grad f(x~)`. Unchecked; the two
/// scratch buffers have length `d`.
///
/// The component difference is formed first so that `x == x~` returns
/// `grad f(x~)` bit for bit.
pub(crate) fn semi_stochastic_gradient_into<P: FiniteSumPotential + ?Sized>(
    potential: &P,
    anchor: &EpochAnchor,
    x: &[f64],
    i: usize,
    at_x: &mut [f64],
    at_snapshot: &mut [f64],
    out: &mut [f64],
) {
    component_gradient_into(potential, i, x, at_x);
    component_gradient_into(potential, i, &anchor.x_tilde, at_snapshot);
    for (((o, a), b), g) in out.iter_mut().zip(at_x.iter()).zip(at_snapshot.iter()).zip(&anchor.g_tilde) {
        *o = (a - b) + g;
    }
}

/// Checked semi-stochastic gradient at `x` for component `i`.
pub fn semi_stochastic_gradient<P: FiniteSumPotential + ?Sized>(
    potential: &P,
    anchor: &EpochAnchor,
    x: &[f64],
    i: usize,
) -> Result<Vec<f64>> {
    let n = potential.num_components();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let d = potential.dim();
    ensure_dim(d, x.len())?;
    ensure_dim(d, anchor.x_tilde.len())?;
    ensure_dim(d, anchor.g_tilde.len())?;
    ensure_finite(x, "position")?;
    let (mut a, mut b, mut out) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    semi_stochastic_gradient_into(potential, anchor, x, i, &mut a, &mut b, &mut out);
    Ok(out)
}

/// `x' = x + eta v + eps_x`, `v' = v - gamma eta v - eta u g + eps_v`; the
/// position update uses the old velocity.
pub fn kinetic_update(state: &mut KineticState, g: &[f64], eta: f64, gamma: f64, u: f64, eps_x: &[f64], eps_v: &[f64]) {
    let friction = gamma * eta;
    let drift = eta * u;
    for j in 0..state.x.len() {
        let v = state.v[j];
        state.x[j] = state.x[j] + eta * v + eps_x[j];
        state.v[j] = v - friction * v - drift * g[j] + eps_v[j];
    }
}

/// `x' = x - eta g + xi` where `xi` is already scaled.
pub fn overdamped_update(x: &mut [f64], g: &[f64], eta: f64, xi: &[f64]) {
    for ((x, g), xi) in x.iter_mut().zip(g).zip(xi) {
        *x = *x - eta * g + xi;
    }
}

pub(crate) fn draw_overdamped_noise<R: Rng + ?Sized>(eta: f64, rng: &mut R, out: &mut [f64]) {
    let scale = libm::sqrt(2.0 * eta);
    for o in out.iter_mut() {
        *o = scale * rng.sample::<f64, _>(StandardNormal);
    }
}

fn check_state(state: &KineticState, iteration: usize) -> Result<()> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { iteration })
    }
}

fn draw_pair<R: Rng + ?Sized>(config: &SamplerConfig, noise: &NoiseModel, rng: &mut R, d: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut ex, mut ev) = (vec![0.0; d], vec![0.0; d]);
    if !config.zero_noise {
        noise.sample_into(rng, &mut ex, &mut ev);
    }
    (ex, ev)
}

fn draw_overdamped<R: Rng + ?Sized>(config: &SamplerConfig, rng: &mut R, d: usize) -> Vec<f64> {
    let mut xi = vec![0.0; d];
    if !config.zero_noise {
        draw_overdamped_noise(config.eta, rng, &mut xi);
    }
    xi
}

pub(crate) fn minibatch_into<R: Rng + ?Sized>(
    n: usize,
    config: &SamplerConfig,
    rng: &mut R,
    out: &mut Vec<usize>,
) {
    out.clear();
    match config.index_sampling {
        IndexSampling::WithReplacement => out.extend((0..config.batch_size).map(|_| rng.random_range(0..n))),
        IndexSampling::Enumerate => out.extend(0..n),
    }
}

/// One SVR-HMC update with a precomputed gradient estimate `g`.
pub fn svr_hmc_step<R: Rng + ?Sized>(
    state: &mut KineticState,
    g: &[f64],
    config: &SamplerConfig,
    noise: &NoiseModel,
    rng: &mut R,
    iteration: usize,
) -> Result<()> {
    ensure_dim(state.dim(), g.len())?;
    let (ex, ev) = draw_pair(config, noise, rng, state.dim());
    kinetic_update(state, g, config.eta, config.gamma, config.u, &ex, &ev);
    check_state(state, iteration)
}

/// Full-gradient kinetic step.
pub fn hmc_step<P: FiniteSumPotential + ?Sized, R: Rng + ?Sized>(
    state: &mut KineticState,
    potential: &P,
    config: &SamplerConfig,
    noise: &NoiseModel,
    rng: &mut R,
    iteration: usize,
) -> Result<()> {
    ensure_dim(potential.dim(), state.dim())?;
    let mut g = vec![0.0; state.dim()];
    full_gradient_into(potential, &state.x, &mut g);
    svr_hmc_step(state, &g, config, noise, rng, iteration)
}

/// Minibatch kinetic step.
pub fn sghmc_step<P: FiniteSumPotential + ?Sized, R: Rng + ?Sized, S: Rng + ?Sized>(
    state: &mut KineticState,
    potential: &P,
    config: &SamplerConfig,
    noise: &NoiseModel,
    noise_rng: &mut R,
    index_rng: &mut S,
    iteration: usize,
) -> Result<()> {
    ensure_dim(potential.dim(), state.dim())?;
    let (ex, ev) = draw_pair(config, noise, noise_rng, state.dim());
    let mut batch = Vec::new();
    minibatch_into(potential.num_components(), config, index_rng, &mut batch);
    let mut g = vec![0.0; state.dim()];
    mean_gradient_into(potential, batch, &state.x, &mut g);
    kinetic_update(state, &g, config.eta, config.gamma, config.u, &ex, &ev);
    check_state(state, iteration)
}

/// Euler-Maruyama Langevin step at unit temperature.
pub fn lmc_step<P: FiniteSumPotential + ?Sized, R: Rng + ?Sized>(
    state: &mut KineticState,
    potential: &P,
    config: &SamplerConfig,
    rng: &mut R,
    iteration: usize,
) -> Result<()> {
    ensure_dim(potential.dim(), state.dim())?;
    let xi = draw_overdamped(config, rng, state.dim());
    let mut g = vec![0.0; state.dim()];
    full_gradient_into(potential, &state.x, &mut g);
    overdamped_update(&mut state.x, &g, config.eta, &xi);
    check_state(state, iteration)
}

/// Langevin step with a minibatch gradient.
pub fn sgld_step<P: FiniteSumPotential + ?Sized, R: Rng + ?Sized, S: Rng + ?Sized>(
    state: &mut KineticState,
    potential: &P,
    config: &SamplerConfig,
    noise_rng: &mut R,
    index_rng: &mut S,
    iteration: usize,
) -> Result<()> {
    ensure_dim(potential.dim(), state.dim())?;
    let xi = draw_overdamped(config, noise_rng, state.dim());
    let mut batch = Vec::new();
    minibatch_into(potential.num_components(), config, index_rng, &mut batch);
    let mut g = vec![0.0; state.dim()];
    mean_gradient_into(potential, batch, &state.x, &mut g);
    overdamped_update(&mut state.x, &g, config.eta, &xi);
    check_state(state, iteration)
}

/// Langevin step with the semi-stochastic gradient for component `i`.
pub fn vr_sgld_step<P: FiniteSumPotential + ?Sized, R: Rng + ?Sized>(
    state: &mut KineticState,
    potential: &P,
    anchor: &EpochAnchor,
    config: &SamplerConfig,
    rng: &mut R,
    i: usize,
    iteration: usize,
) -> Result<()> {
    let g = semi_stochastic_gradient(potential, anchor, &state.x, i)?;
    let xi = draw_overdamped(config, rng, state.dim());
    overdamped_update(&mut state.x, &g, config.eta, &xi);
    check_state(state, iteration)
}

/// Plain gradient descent from the origin, used as an optional warm start.
pub fn warm_start<P: FiniteSumPotential + ?Sized>(potential: &P, steps: usize, step_size: f64) -> Result<Vec<f64>> {
    ensure_positive(step_size, "step_size")?;
    let d = potential.dim();
    let (mut x, mut g) = (vec![0.0; d], vec![0.0; d]);
    for k in 0..steps {
        full_gradient_into(potential, &x, &mut g);
        for (x, g) in x.iter_mut().zip(&g) {
            *x -= step_size * g;
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { iteration: k });
        }
    }
    Ok(x)
}
