//! Stochastic variance-reduced Hamiltonian Monte Carlo and its baselines.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! core: finite-sum potentials, the correlated noise of the exact
//! underdamped Langevin step, the samplers themselves and the diagnostics
//! used to score them. File formats, experiment drivers and the CLI live in
//! the companion `svrhmc` crate.
//!
//! All samplers share one update skeleton. The kinetic samplers (SVR-HMC,
//! HMC, SG-HMC) evolve a position/velocity pair
//!
//! ```text
//! x' = x + eta * v + eps_x
//! v' = v - gamma * eta * v - eta * u * g + eps_v
//! ```
//!
//! and differ only in the gradient estimate `g`. The overdamped samplers
//! (LMC, SGLD, VR-SGLD) use `x' = x - eta * g + sqrt(2 eta) * xi`.
//!
//! ```
//! use svrhmc_core::model::synthetic_quadratic;
//! use svrhmc_core::samplers::{Chain, SamplerConfig, SamplerKind, KineticState};
//! use svrhmc_core::seeding::chain_rngs;
//!
//! let (potential, _target) = synthetic_quadratic(50, 2, 7).unwrap();
//! let config = SamplerConfig::theorem_defaults(0.05, &potential, 200).unwrap();
//! let mut chain = Chain::new(&potential, SamplerKind::SvrHmc, config, KineticState::zeros(2)).unwrap();
//! let mut rngs = chain_rngs(7, 0, 0);
//! chain.run(&mut rngs, &mut ()).unwrap();
//! assert_eq!(chain.iteration(), 200);
//! ```
#![no_std]

extern crate alloc;

pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod samplers;
pub mod seeding;

pub use error::{Error, Result};
