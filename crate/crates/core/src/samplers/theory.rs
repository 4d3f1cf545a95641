use crate::error::{ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizeChoice {
    pub eta: f64,
    pub epoch_len: usize,
}

/// Step size and epoch length for target accuracy `epsilon`:
/// `m = n`, `eta = c * min(eps / (kappa sqrt(d)), eps^{2/3} / (kappa^{1/3} d^{1/3} n^{2/3}))`.
pub fn select_step_size(epsilon: f64, kappa: f64, d: usize, n: usize, c: f64) -> Result<StepSizeChoice> {
    ensure_positive(epsilon, "epsilon")?;
    ensure_positive(kappa, "kappa")?;
    ensure_positive(c, "c")?;
    if d == 0 || n == 0 {
        return Err(Error::InvalidParameter {
            name: "d/n",
            reason: "must be >= 1",
        });
    }
    let (d, nf) = (d as f64, n as f64);
    let dimension_branch = epsilon / (kappa * libm::sqrt(d));
    let sample_branch = libm::pow(epsilon, 2.0 / 3.0) / (libm::cbrt(kappa) * libm::cbrt(d) * libm::pow(nf, 2.0 / 3.0));
    Ok(StepSizeChoice {
        eta: c * dimension_branch.min(sample_branch),
        epoch_len: n,
    })
}

/// Inputs of the last-iterate Wasserstein bound for SVR-HMC run with
/// `u = 1/L`, `gamma = 2`. `uv` and `uf` are only known up to order, so the
/// caller supplies them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryBoundInputs {
    /// `W2(P(x_0), pi)`.
    pub w0: f64,
    pub eta: f64,
    pub m: usize,
    pub k: u64,
    pub kappa: f64,
    pub l: f64,
    pub mu: f64,
    pub d: usize,
    pub u: f64,
    pub uv: f64,
    pub uf: f64,
}

impl TheoryBoundInputs {
    fn validate(&self) -> Result<()> {
        if !(self.w0 >= 0.0 && self.w0.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "w0",
                reason: "must be finite and >= 0",
            });
        }
        ensure_positive(self.eta, "eta")?;
        ensure_positive(self.kappa, "kappa")?;
        ensure_positive(self.l, "L")?;
        ensure_positive(self.mu, "mu")?;
        ensure_positive(self.u, "u")?;
        ensure_positive(self.uv, "Uv")?;
        ensure_positive(self.uf, "Uf")?;
        if self.m == 0 || self.d == 0 {
            return Err(Error::InvalidParameter {
                name: "m/d",
                reason: "must be >= 1",
            });
        }
        Ok(())
    }

    fn constants(&self) -> (f64, f64, f64) {
        let (eta, l, d) = (self.eta, self.l, self.d as f64);
        let d1 = (8.0 * eta * eta / 5.0 + 4.0 / 3.0) * self.uv + 4.0 / (3.0 * l) * self.uf + 16.0 * d * eta / (3.0 * l);
        let d2 = 13.0 * self.uv + 8.0 * self.uf / l + 28.0 * d * eta / l;
        let d3 = self.uv + 4.0 * self.u * d;
        (d1, d2, d3)
    }

    /// The part of the bound that does not decay with `K`.
    pub fn residual(&self) -> Result<f64> {
        self.validate()?;
        let (d1, d2, d3) = self.constants();
        let (eta, kappa) = (self.eta, self.kappa);
        Ok(4.0 * eta * kappa * (2.0 * libm::sqrt(d1) + libm::sqrt(d2))
            + 2.0 * libm::sqrt(kappa * d3) * self.m as f64 * libm::pow(eta, 1.5))
    }
}

/// `e^{-K eta / (2 kappa)} w0 + 4 eta kappa (2 sqrt(D1) + sqrt(D2)) + 2 sqrt(kappa D3) m eta^{3/2}`.
pub fn theory_bound(inputs: &TheoryBoundInputs) -> Result<f64> {
    let residual = inputs.residual()?;
    let contraction = libm::exp(-(inputs.k as f64) * inputs.eta / (2.0 * inputs.kappa));
    Ok(contraction * inputs.w0 + residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spot() -> TheoryBoundInputs {
        TheoryBoundInputs {
            w0: 1.0,
            eta: 0.01,
            m: 10,
            k: 1000,
            kappa: 2.25,
            l: 1.5,
            mu: 2.0 / 3.0,
            d: 2,
            u: 2.0 / 3.0,
            uv: 3.0,
            uf: 4.5,
        }
    }

    #[test]
    fn first_branch_is_linear_in_epsilon() {
        let a = select_step_size(1e-4, 2.0, 4, 10, 1.0).unwrap();
        let b = select_step_size(2e-4, 2.0, 4, 10, 1.0).unwrap();
        assert!((b.eta / a.eta - 2.0).abs() < 1e-12);
        assert!((a.eta - 1e-4 / (2.0 * 2.0)).abs() < 1e-18);
    }

    #[test]
    fn second_branch_scales_with_n() {
        let a = select_step_size(1.0, 1.0, 1, 1000, 1.0).unwrap();
        let b = select_step_size(1.0, 1.0, 1, 2000, 1.0).unwrap();
        assert!((a.eta / b.eta - libm::pow(2.0, 2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(a.epoch_len, 1000);
        assert_eq!(b.epoch_len, 2000);
        let c = select_step_size(1.0, 1.0, 1, 1000, 0.5).unwrap();
        assert!((c.eta - 0.5 * a.eta).abs() < 1e-15);
    }

    #[test]
    fn bound_rejects_non_positive_inputs() {
        let mut bad = spot();
        bad.eta = 0.0;
        assert!(theory_bound(&bad).unwrap_err().is_usage());
        let mut bad = spot();
        bad.uf = -1.0;
        assert!(theory_bound(&bad).is_err());
        assert!(select_step_size(0.0, 1.0, 1, 1, 1.0).is_err());
    }

    #[test]
    fn discretization_terms_vanish_with_step() {
        let mut prev = f64::INFINITY;
        for e in [1e-2, 1e-4, 1e-6, 1e-8] {
            let mut inputs = spot();
            inputs.eta = e;
            inputs.k = (10.0 / e) as u64;
            let r = inputs.residual().unwrap();
            assert!(r < prev);
            prev = r;
        }
        assert!(prev < 1e-5);
    }
}
