//! Gradient-evaluation bookkeeping in units of data passes.

use svrhmc_core::samplers::{GradientEvent, IndexSampling, Observer, SamplerConfig, SamplerKind};

/// Counts component-gradient evaluations reported by a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradientAccountant {
    n: usize,
    evals: u64,
}

impl GradientAccountant {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "n must be positive");
        Self { n, evals: 0 }
    }

    pub fn record(&mut self, event: GradientEvent) {
        self.evals += match event {
            GradientEvent::Full => self.n as u64,
            GradientEvent::SemiStochastic => 2,
            GradientEvent::Minibatch(b) => b as u64,
        };
    }

    pub fn grad_evals(&self) -> u64 {
        self.evals
    }

    /// Evaluations divided by `n`.
    pub fn data_passes(&self) -> f64 {
        self.evals as f64 / self.n as f64
    }
}

impl Observer for GradientAccountant {
    fn on_gradient(&mut self, event: GradientEvent) {
        self.record(event);
    }
}

/// Per-iteration cost outside epoch starts.
fn step_cost(kind: SamplerKind, n: usize, config: &SamplerConfig) -> u64 {
    match kind {
        SamplerKind::Hmc | SamplerKind::Lmc => n as u64,
        SamplerKind::SvrHmc | SamplerKind::VrSgld => 2,
        SamplerKind::SgHmc | SamplerKind::Sgld => match config.index_sampling {
            IndexSampling::Enumerate => n as u64,
            IndexSampling::WithReplacement => config.batch_size as u64,
        },
    }
}

/// Closed-form evaluation count after `k` iterations: `ceil(k/m) n + 2k` for
/// the variance-reduced kinds, `k n` for full gradients, `k b` for
/// minibatches.
pub fn expected_grad_evals(kind: SamplerKind, n: usize, config: &SamplerConfig, k: usize) -> u64 {
    let per_step = step_cost(kind, n, config) * k as u64;
    if kind.is_variance_reduced() {
        k.div_ceil(config.epoch_len) as u64 * n as u64 + per_step
    } else {
        per_step
    }
}

/// The largest iteration count whose cost stays within `passes` data passes.
pub fn iterations_for_budget(kind: SamplerKind, n: usize, config: &SamplerConfig, passes: f64) -> usize {
    let budget = (passes * n as f64).floor() as u64;
    let per_step = step_cost(kind, n, config);
    let mut k = (budget / per_step) as usize;
    while k > 0 && expected_grad_evals(kind, n, config, k) > budget {
        k -= 1;
    }
    k
}

/// Iterations between recorded points: about ten per data pass.
pub fn default_stride(kind: SamplerKind, n: usize, config: &SamplerConfig) -> usize {
    let per_step = step_cost(kind, n, config) as usize;
    (n / (10 * per_step)).max(1)
}
