//! Correlated Gaussian noise of one exact underdamped Langevin step.
//!
//! Per coordinate, `(eps_x, eps_v)` is a zero-mean Gaussian pair with
//!
//! ```text
//! E[eps_v^2]     = u (1 - e^{-2 gamma eta})
//! E[eps_x^2]     = u / gamma^2 (2 gamma eta + 4 e^{-gamma eta} - e^{-2 gamma eta} - 3)
//! E[eps_x eps_v] = u / gamma (1 - 2 e^{-gamma eta} + e^{-2 gamma eta})
//! ```
//!
//! and coordinates are independent. Draws use the 2x2 Cholesky factor with
//! the position coordinate first: `eps_x = l11 z1`, `eps_v = l21 z1 + l22 z2`
//! for independent standard normals `z1, z2` taken in that order from the
//! stream. Standard normals come from `rand_distr::StandardNormal`
//! (ziggurat).

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub gamma: f64,
    pub u: f64,
    pub eta: f64,
    pub sigma_xx: f64,
    pub sigma_vx: f64,
    pub sigma_vv: f64,
    pub chol_l11: f64,
    pub chol_l21: f64,
    pub chol_l22: f64,
}

/// `2t + 4e^{-t} - e^{-2t} - 3`, accurate for all `t > 0`.
///
/// The closed form cancels down to `O(t^3)`, so below `t = 1` the Taylor
/// series `sum_{k>=3} (-1)^k (4 - 2^k) t^k / k!` is summed instead.
pub fn position_variance_factor(t: f64) -> f64 {
    if t < 1.0 {
        let mut power = t * t * t / 6.0; // t^k / k!
        let mut two_k = 8.0;
        let mut sign = -1.0;
        let mut sum = 0.0;
        for k in 3..60 {
            let term = sign * (4.0 - two_k) * power;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            power *= t / (k + 1) as f64;
            two_k *= 2.0;
            sign = -sign;
        }
        sum
    } else {
        let em = libm::expm1(-t);
        2.0 * t + 2.0 * em - em * em
    }
}

impl NoiseModel {
    pub fn new(gamma: f64, u: f64, eta: f64) -> Result<Self> {
        ensure_positive(gamma, "gamma")?;
        ensure_positive(u, "u")?;
        ensure_positive(eta, "eta")?;

        let t = gamma * eta;
        let em = libm::expm1(-t); // e^{-t} - 1
        let sigma_vv = -u * libm::expm1(-2.0 * t);
        let sigma_vx = u / gamma * em * em;
        let sigma_xx = u / (gamma * gamma) * position_variance_factor(t);

        let determinant = sigma_vv * sigma_xx - sigma_vx * sigma_vx;
        let not_pd = || Error::NoiseNotPositiveDefinite {
            gamma,
            u,
            eta,
            determinant,
        };
        if !(sigma_xx > 0.0 && sigma_vv > 0.0 && determinant > 0.0 && determinant.is_finite()) {
            return Err(not_pd());
        }
        let chol_l11 = libm::sqrt(sigma_xx);
        let chol_l21 = sigma_vx / chol_l11;
        let schur = sigma_vv - chol_l21 * chol_l21;
        if !(schur > 0.0) {
            return Err(not_pd());
        }
        Ok(Self {
            gamma,
            u,
            eta,
            sigma_xx,
            sigma_vx,
            sigma_vv,
            chol_l11,
            chol_l21,
            chol_l22: libm::sqrt(schur),
        })
    }

    /// `sigma_vv * sigma_xx - sigma_vx^2`.
    pub fn determinant(&self) -> f64 {
        self.sigma_vv * self.sigma_xx - self.sigma_vx * self.sigma_vx
    }

    /// `[[sigma_xx, sigma_vx], [sigma_vx, sigma_vv]]`.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        [[self.sigma_xx, self.sigma_vx], [self.sigma_vx, self.sigma_vv]]
    }

    /// Fills `eps_x`, `eps_v` with one correlated draw per coordinate.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, eps_x: &mut [f64], eps_v: &mut [f64]) {
        debug_assert_eq!(eps_x.len(), eps_v.len());
        for (ex, ev) in eps_x.iter_mut().zip(eps_v.iter_mut()) {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            *ex = self.chol_l11 * z1;
            *ev = self.chol_l21 * z1 + self.chol_l22 * z2;
        }
    }
}

pub fn build_noise_model(gamma: f64, u: f64, eta: f64) -> Result<NoiseModel> {
    NoiseModel::new(gamma, u, eta)
}

/// One correlated draw `(eps_x, eps_v)` of dimension `d`.
pub fn sample_noise_pair<R: Rng + ?Sized>(model: &NoiseModel, d: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let mut eps_x = vec![0.0; d];
    let mut eps_v = vec![0.0; d];
    model.sample_into(rng, &mut eps_x, &mut eps_v);
    (eps_x, eps_v)
}
