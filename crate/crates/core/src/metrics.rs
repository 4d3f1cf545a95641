//! Evaluation quantities: moment-matched 2-Wasserstein distance, test
//! likelihood and error for classification, test MSE for regression, and
//! path averages.
//!
//! The Wasserstein distance between `N(m_a, C_a)` and `N(m_b, C_b)` has
//! the closed (Bures) form
//!
//! ```text
//! W2^2 = ||m_a - m_b||^2 + tr(C_a + C_b - 2 (C_b^{1/2} C_a C_b^{1/2})^{1/2})
//! ```
//!
//! Chain output is summarized by its empirical mean and covariance and
//! plugged into this formula. For linear-Gaussian chains that is exact up
//! to sampling error; for stochastic-gradient chains it is an approximation
//! that only sees the first two moments.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::linalg::{dot, Matrix};
use crate::model::{softplus, symmetrize, TargetGaussian};

/// Eigenvalues down to `-PSD_TOLERANCE` are treated as roundoff and
/// clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    pub sample_count: usize,
}

impl GaussianMoments {
    pub fn new(mean: Vec<f64>, covariance: Matrix, sample_count: usize) -> Result<Self> {
        ensure_dim(mean.len(), covariance.rows())?;
        ensure_dim(mean.len(), covariance.cols())?;
        ensure_finite(&mean, "mean")?;
        ensure_finite(covariance.as_slice(), "covariance")?;
        if !covariance.is_symmetric(1e-12 * (1.0 + covariance.trace().abs())) {
            return Err(Error::InvalidParameter {
                name: "covariance",
                reason: "must be symmetric",
            });
        }
        Ok(Self {
            mean,
            covariance,
            sample_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

impl From<&TargetGaussian> for GaussianMoments {
    fn from(t: &TargetGaussian) -> Self {
        Self {
            mean: t.mean.clone(),
            covariance: t.covariance.clone(),
            sample_count: 0,
        }
    }
}

/// Streaming mean/covariance with a pairwise merge, so chains can be
/// accumulated in blocks and combined.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    count: usize,
    mean: Vec<f64>,
    comoment: Matrix,
    delta: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(d: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; d],
            comoment: Matrix::zeros(d, d),
            delta: vec![0.0; d],
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        for (dl, (m, x)) in self.delta.iter_mut().zip(self.mean.iter_mut().zip(x)) {
            *dl = x - *m;
            *m += *dl * inv;
        }
        // comoment += delta_old * (x - mean_new)^T
        let d = self.mean.len();
        for r in 0..d {
            for c in 0..d {
                self.comoment[(r, c)] += self.delta[r] * (x[c] - self.mean[c]);
            }
        }
    }

    /// Chan et al. parallel combination.
    pub fn merge(&mut self, other: &MomentAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        let d = self.mean.len();
        for j in 0..d {
            self.delta[j] = other.mean[j] - self.mean[j];
        }
        for r in 0..d {
            for c in 0..d {
                self.comoment[(r, c)] += other.comoment[(r, c)] + self.delta[r] * self.delta[c] * na * nb / total;
            }
        }
        for j in 0..d {
            self.mean[j] += self.delta[j] * nb / total;
        }
        self.count += other.count;
    }

    /// Unbiased moments (divisor `count - 1`).
    pub fn finish(&self) -> Result<GaussianMoments> {
        if self.count < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: self.count,
            });
        }
        let d = self.mean.len();
        let mut cov = Matrix::zeros(d, d);
        let denom = (self.count - 1) as f64;
        for r in 0..d {
            for c in 0..d {
                cov[(r, c)] = 0.5 * (self.comoment[(r, c)] + self.comoment[(c, r)]) / denom;
            }
        }
        GaussianMoments::new(self.mean.clone(), cov, self.count)
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Unbiased sample mean and covariance.
///
/// Samples are visited in a canonical (lexicographic) order, so the result
/// does not depend, bit for bit, on the order they are passed in.
pub fn empirical_moments<S: AsRef<[f64]>>(samples: &[S]) -> Result<GaussianMoments> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let d = samples[0].as_ref().len();
    let mut order: Vec<&[f64]> = Vec::with_capacity(samples.len());
    for s in samples {
        let s = s.as_ref();
        ensure_dim(d, s.len())?;
        ensure_finite(s, "sample")?;
        order.push(s);
    }
    order.sort_by(|a, b| lexicographic(a, b));

    let count = order.len() as f64;
    let mut mean = vec![0.0; d];
    for s in &order {
        for (m, x) in mean.iter_mut().zip(s.iter()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    let mut cov = Matrix::zeros(d, d);
    for s in &order {
        for r in 0..d {
            let dr = s[r] - mean[r];
            for c in r..d {
                cov[(r, c)] += dr * (s[c] - mean[c]);
            }
        }
    }
    for r in 0..d {
        for c in r..d {
            let v = cov[(r, c)] / (count - 1.0);
            cov[(r, c)] = v;
            cov[(c, r)] = v;
        }
    }
    GaussianMoments::new(mean, cov, order.len())
}

fn checked_eigen(m: &Matrix) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let eig = symmetrize(&m.to_nalgebra()).symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE {
        return Err(Error::NotPositiveSemidefinite { eigenvalue: min });
    }
    Ok(eig)
}

fn sqrt_from_eigen(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let roots = eig.eigenvalues.map(|l| libm::sqrt(l.max(0.0)));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&roots) * v.transpose()))
}

/// Principal square root of a symmetric PSD matrix via eigendecomposition.
pub fn matrix_sqrt(m: &Matrix) -> Result<Matrix> {
    ensure_dim(m.rows(), m.cols())?;
    ensure_finite(m.as_slice(), "matrix")?;
    Ok(Matrix::from_nalgebra(&sqrt_from_eigen(&checked_eigen(m)?)))
}

/// 2-Wasserstein distance between two Gaussians.
pub fn gaussian_w2(a: &GaussianMoments, b: &GaussianMoments) -> Result<f64> {
    ensure_dim(a.dim(), b.dim())?;
    let root_a = sqrt_from_eigen(&checked_eigen(&a.covariance)?);
    let root_b = sqrt_from_eigen(&checked_eigen(&b.covariance)?);
    // tr((A^1/2 B A^1/2)^1/2) is the nuclear norm of A^1/2 B^1/2; singular
    // values keep absolute accuracy near rank deficiency where eigenvalues
    // of the product would lose half the digits under the square root
    let cross: f64 = (&root_a * &root_b).singular_values().iter().sum();
    let bures = root_a.norm_squared() + root_b.norm_squared() - 2.0 * cross;
    let shift: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(libm::sqrt(shift + bures.max(0.0)))
}

/// Moment-matched `W2` between same-iteration states of independent chains
/// and a Gaussian target. Invariant under permutation of the snapshots.
pub fn w2_to_target<S: AsRef<[f64]>>(snapshots: &[S], target: &TargetGaussian) -> Result<f64> {
    let moments = empirical_moments(snapshots)?;
    gaussian_w2(&moments, &GaussianMoments::from(target))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticTestMetrics {
    /// Mean of `log(1 + exp(-y x^T a))` over the test set.
    pub nll: f64,
    /// Fraction with `sign(x^T a) != y`, where `sign(0) = +1`.
    pub error_rate: f64,
}

/// Test negative log-likelihood and error rate of a point estimate.
/// Labels must be in `{-1, +1}`.
pub fn logistic_test_metrics(x_hat: &[f64], features: &Matrix, labels: &[f64]) -> Result<LogisticTestMetrics> {
    if features.rows() == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    ensure_dim(features.rows(), labels.len())?;
    ensure_dim(features.cols(), x_hat.len())?;
    ensure_finite(x_hat, "estimate")?;
    let mut nll = 0.0;
    let mut wrong = 0usize;
    for (row, &y) in features.row_iter().zip(labels) {
        let z = dot(x_hat, row);
        nll += softplus(-y * z);
        let predicted = if z >= 0.0 { 1.0 } else { -1.0 };
        if predicted != y {
            wrong += 1;
        }
    }
    let n = labels.len() as f64;
    Ok(LogisticTestMetrics {
        nll: nll / n,
        error_rate: wrong as f64 / n,
    })
}

/// `(1/n) sum (y_i - x^T a_i)^2`.
pub fn linear_test_mse(x_hat: &[f64], features: &Matrix, responses: &[f64]) -> Result<f64> {
    if features.rows() == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    ensure_dim(features.rows(), responses.len())?;
    ensure_dim(features.cols(), x_hat.len())?;
    ensure_finite(x_hat, "estimate")?;
    let sum: f64 = features
        .row_iter()
        .zip(responses)
        .map(|(row, y)| {
            let r = y - dot(x_hat, row);
            r * r
        })
        .sum();
    Ok(sum / responses.len() as f64)
}

/// Running mean of the iterates after a burn-in prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAverage {
    burn_in: usize,
    seen: usize,
    mean: Vec<f64>,
}

impl PathAverage {
    pub fn new(d: usize, burn_in: usize) -> Self {
        Self {
            burn_in,
            seen: 0,
            mean: vec![0.0; d],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.seen += 1;
        if self.seen <= self.burn_in {
            return;
        }
        let inv = 1.0 / (self.seen - self.burn_in) as f64;
        for (m, x) in self.mean.iter_mut().zip(x) {
            *m += (x - *m) * inv;
        }
    }

    /// Iterates that entered the average.
    pub fn count(&self) -> usize {
        self.seen.saturating_sub(self.burn_in)
    }

    pub fn mean(&self) -> Option<&[f64]> {
        (self.count() > 0).then_some(&self.mean[..])
    }
}

pub fn path_average<I, S>(iterates: I, burn_in: usize) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[f64]>,
{
    let mut iter = iterates.into_iter().peekable();
    let d = match iter.peek() {
        Some(first) => first.as_ref().len(),
        None => return Err(Error::InsufficientSamples { needed: burn_in + 1, got: 0 }),
    };
    let mut avg = PathAverage::new(d, burn_in);
    for x in iter {
        let x = x.as_ref();
        ensure_dim(d, x.len())?;
        avg.push(x);
    }
    match avg.mean() {
        Some(m) => Ok(m.to_vec()),
        None => Err(Error::InsufficientSamples {
            needed: burn_in + 1,
            got: avg.seen,
        }),
    }
}
