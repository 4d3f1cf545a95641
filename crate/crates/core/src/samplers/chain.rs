use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{
    draw_overdamped_noise, kinetic_update, minibatch_into, overdamped_update, semi_stochastic_gradient_into,
    EpochAnchor, KineticState, SamplerConfig, SamplerKind,
};
use crate::error::{ensure_dim, Error, Result};
use crate::model::{full_gradient_into, mean_gradient_into, FiniteSumPotential};
use crate::noise::NoiseModel;
use crate::seeding::{chain_rngs, ChainRngs};

/// Which gradient a step paid for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientEvent {
    /// `n` component evaluations.
    Full,
    /// Two component evaluations, at `x_k` and at the snapshot.
    SemiStochastic,
    /// One evaluation per minibatch entry.
    Minibatch(usize),
}

/// Hooks called by [`Chain::step`]. All methods default to no-ops.
pub trait Observer {
    /// After each update, with `k` the index of the new iterate `x_k`.
    fn on_iterate(&mut self, _k: usize, _x: &[f64]) {}

    /// At the start of epoch `j`, after the anchor gradient was computed.
    fn on_epoch(&mut self, _j: usize, _x_tilde: &[f64], _grad_evals: u64) {}

    fn on_gradient(&mut self, _event: GradientEvent) {}
}

impl Observer for () {}

impl<O: Observer + ?Sized> Observer for &mut O {
    fn on_iterate(&mut self, k: usize, x: &[f64]) {
        (**self).on_iterate(k, x)
    }
    fn on_epoch(&mut self, j: usize, x_tilde: &[f64], grad_evals: u64) {
        (**self).on_epoch(j, x_tilde, grad_evals)
    }
    fn on_gradient(&mut self, event: GradientEvent) {
        (**self).on_gradient(event)
    }
}

/// Adapts a closure over `(k, x_k)` into an [`Observer`].
pub struct IterateFn<F>(pub F);

impl<F: FnMut(usize, &[f64])> Observer for IterateFn<F> {
    fn on_iterate(&mut self, k: usize, x: &[f64]) {
        (self.0)(k, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub state: KineticState,
    pub iterations: usize,
    pub grad_evals: u64,
}

/// One sequential chain. Owns its state and scratch space, borrows the
/// (shared, immutable) potential.
///
/// Variance-reduced kinds follow the epoch schedule: at `l = k mod m = 0`
/// the anchor gradient is recomputed at the snapshot, and after the update
/// at `l = m - 1` the snapshot moves to the new iterate. The run stops after
/// exactly `K` iterations, also in the middle of an epoch.
#[derive(Debug, Clone)]
pub struct Chain<'p, P: ?Sized> {
    potential: &'p P,
    kind: SamplerKind,
    config: SamplerConfig,
    noise: Option<NoiseModel>,
    state: KineticState,
    anchor: Option<EpochAnchor>,
    iteration: usize,
    grad_evals: u64,
    eps_x: Vec<f64>,
    eps_v: Vec<f64>,
    grad: Vec<f64>,
    scratch_a: Vec<f64>,
    scratch_b: Vec<f64>,
    batch: Vec<usize>,
}

impl<'p, P: FiniteSumPotential + ?Sized> Chain<'p, P> {
    pub fn new(potential: &'p P, kind: SamplerKind, config: SamplerConfig, init: KineticState) -> Result<Self> {
        let d = potential.dim();
        ensure_dim(d, init.x.len())?;
        ensure_dim(d, init.v.len())?;
        if !init.is_finite() {
            return Err(Error::NonFinite("initial state"));
        }
        config.validate(potential.num_components())?;
        let noise = if kind.is_kinetic() {
            Some(config.noise_model()?)
        } else {
            None
        };
        let anchor = kind.is_variance_reduced().then(|| EpochAnchor {
            x_tilde: init.x.clone(),
            g_tilde: vec![0.0; d],
        });
        Ok(Self {
            potential,
            kind,
            config,
            noise,
            state: init,
            anchor,
            iteration: 0,
            grad_evals: 0,
            eps_x: vec![0.0; d],
            eps_v: vec![0.0; d],
            grad: vec![0.0; d],
            scratch_a: vec![0.0; d],
            scratch_b: vec![0.0; d],
            batch: Vec::new(),
        })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn state(&self) -> &KineticState {
        &self.state
    }

    pub fn into_state(self) -> KineticState {
        self.state
    }

    /// Iterations taken so far.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Component-gradient evaluations so far.
    pub fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    pub fn anchor(&self) -> Option<&EpochAnchor> {
        self.anchor.as_ref()
    }

    /// The most recent gradient estimate.
    pub fn last_gradient(&self) -> &[f64] {
        &self.grad
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.config.iterations
    }

    /// Advances one iteration. Noise is drawn from `noise_rng`, component
    /// indices from `index_rng`.
    pub fn step<R, S, O>(&mut self, noise_rng: &mut R, index_rng: &mut S, observer: &mut O) -> Result<()>
    where
        R: Rng + ?Sized,
        S: Rng + ?Sized,
        O: Observer + ?Sized,
    {
        let k = self.iteration;
        let m = self.config.epoch_len;
        let n = self.potential.num_components();
        let p = self.potential;

        if let Some(anchor) = self.anchor.as_mut() {
            if k.is_multiple_of(m) {
                full_gradient_into(p, &anchor.x_tilde, &mut anchor.g_tilde);
                self.grad_evals += n as u64;
                observer.on_gradient(GradientEvent::Full);
                observer.on_epoch(k / m, &anchor.x_tilde, self.grad_evals);
            }
        }

        if !self.config.zero_noise {
            match &self.noise {
                Some(noise) => noise.sample_into(noise_rng, &mut self.eps_x, &mut self.eps_v),
                None => draw_overdamped_noise(self.config.eta, noise_rng, &mut self.eps_x),
            }
        }

        match self.kind {
            SamplerKind::SvrHmc | SamplerKind::VrSgld => {
                let anchor = self.anchor.as_ref().expect("variance-reduced chains carry an anchor");
                let i = index_rng.random_range(0..n);
                semi_stochastic_gradient_into(
                    p,
                    anchor,
                    &self.state.x,
                    i,
                    &mut self.scratch_a,
                    &mut self.scratch_b,
                    &mut self.grad,
                );
                self.grad_evals += 2;
                observer.on_gradient(GradientEvent::SemiStochastic);
            }
            SamplerKind::Hmc | SamplerKind::Lmc => {
                full_gradient_into(p, &self.state.x, &mut self.grad);
                self.grad_evals += n as u64;
                observer.on_gradient(GradientEvent::Full);
            }
            SamplerKind::SgHmc | SamplerKind::Sgld => {
                minibatch_into(n, &self.config, index_rng, &mut self.batch);
                let b = mean_gradient_into(p, self.batch.iter().copied(), &self.state.x, &mut self.grad);
                self.grad_evals += b as u64;
                observer.on_gradient(GradientEvent::Minibatch(b));
            }
        }

        let c = &self.config;
        if self.kind.is_kinetic() {
            kinetic_update(&mut self.state, &self.grad, c.eta, c.gamma, c.u, &self.eps_x, &self.eps_v);
        } else {
            overdamped_update(&mut self.state.x, &self.grad, c.eta, &self.eps_x);
        }
        if !self.state.is_finite() {
            return Err(Error::Diverged { iteration: k });
        }

        if let Some(anchor) = self.anchor.as_mut() {
            if k % m == m - 1 {
                anchor.x_tilde.copy_from_slice(&self.state.x);
            }
        }

        self.iteration += 1;
        observer.on_iterate(self.iteration, &self.state.x);
        Ok(())
    }

    /// Steps until `config.iterations` is reached.
    pub fn run<O: Observer + ?Sized>(&mut self, rngs: &mut ChainRngs, observer: &mut O) -> Result<()> {
        while !self.is_done() {
            self.step(&mut rngs.noise, &mut rngs.index, observer)?;
        }
        Ok(())
    }
}

/// Runs one chain of `kind` with streams derived from `config.seed`.
pub fn run_chain<P, O>(
    potential: &P,
    kind: SamplerKind,
    config: &SamplerConfig,
    init: KineticState,
    observer: &mut O,
) -> Result<RunOutcome>
where
    P: FiniteSumPotential + ?Sized,
    O: Observer + ?Sized,
{
    let mut rngs = chain_rngs(config.seed, 0, 0);
    let mut chain = Chain::new(potential, kind, config.clone(), init)?;
    chain.run(&mut rngs, observer)?;
    Ok(RunOutcome {
        iterations: chain.iteration(),
        grad_evals: chain.grad_evals(),
        state: chain.into_state(),
    })
}

/// SVR-HMC for `config.iterations` steps; the outcome holds `x_K`.
pub fn svr_hmc_run<P, O>(potential: &P, config: &SamplerConfig, init: KineticState, observer: &mut O) -> Result<RunOutcome>
where
    P: FiniteSumPotential + ?Sized,
    O: Observer + ?Sized,
{
    run_chain(potential, SamplerKind::SvrHmc, config, init, observer)
}
