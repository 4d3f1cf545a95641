//! Finite-sum potentials `f(x) = (1/n) sum_i f_i(x)` and the target
//! families used by the experiments.
//!
//! Every concrete potential is immutable after construction, so one
//! instance can be shared by any number of chains.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_dim, ensure_finite, ensure_positive, Error, Result};
use crate::linalg::{dot, norm_sq, Matrix};

/// A potential with finite-sum structure.
///
/// Implementors provide the per-component gradient in accumulating form;
/// full and minibatch gradients are averages of it (see
/// [`mean_gradient_into`]), so every gradient route in the crate sums
/// components in the same order.
pub trait FiniteSumPotential {
    /// Number of components `n`.
    fn num_components(&self) -> usize;

    /// Dimension `d` of the parameter.
    fn dim(&self) -> usize;

    /// Declared per-component smoothness constant `L`, if known.
    fn smoothness(&self) -> Option<f64> {
        None
    }

    /// Declared strong-convexity constant `mu` of the average, if known.
    fn strong_convexity(&self) -> Option<f64> {
        None
    }

    /// `out += weight * grad f_i(x)`. No bounds or finiteness checks.
    fn add_component_gradient(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]);

    /// `f_i(x)`.
    fn component_value(&self, i: usize, x: &[f64]) -> f64;

    /// `(1/n) sum_i f_i(x)`, possibly shifted by a constant documented on
    /// the concrete type.
    fn value(&self, x: &[f64]) -> f64 {
        let n = self.num_components();
        (0..n).map(|i| self.component_value(i, x)).sum::<f64>() / n as f64
    }

    /// `L / mu` when both constants are declared.
    fn condition_number(&self) -> Option<f64> {
        Some(self.smoothness()? / self.strong_convexity()?)
    }
}

impl<P: FiniteSumPotential + ?Sized> FiniteSumPotential for &P {
    fn num_components(&self) -> usize {
        (**self).num_components()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn smoothness(&self) -> Option<f64> {
        (**self).smoothness()
    }
    fn strong_convexity(&self) -> Option<f64> {
        (**self).strong_convexity()
    }
    fn add_component_gradient(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        (**self).add_component_gradient(i, x, weight, out)
    }
    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        (**self).component_value(i, x)
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
}

/// `out = (1/|S|) sum_{i in S} grad f_i(x)`, summing in iteration order.
/// Returns `|S|`. Unchecked.
pub fn mean_gradient_into<P, I>(potential: &P, indices: I, x: &[f64], out: &mut [f64]) -> usize
where
    P: FiniteSumPotential + ?Sized,
    I: IntoIterator<Item = usize>,
{
    out.fill(0.0);
    let mut count = 0usize;
    for i in indices {
        potential.add_component_gradient(i, x, 1.0, out);
        count += 1;
    }
    let scale = count as f64;
    for o in out.iter_mut() {
        *o /= scale;
    }
    count
}

/// `out = grad f(x)`. Unchecked; a single pass over the components.
pub fn full_gradient_into<P: FiniteSumPotential + ?Sized>(potential: &P, x: &[f64], out: &mut [f64]) {
    mean_gradient_into(potential, 0..potential.num_components(), x, out);
}

/// `out = grad f_i(x)`. Unchecked.
pub fn component_gradient_into<P: FiniteSumPotential + ?Sized>(
    potential: &P,
    i: usize,
    x: &[f64],
    out: &mut [f64],
) {
    out.fill(0.0);
    potential.add_component_gradient(i, x, 1.0, out);
}

/// Checked `grad f_i(x)`.
pub fn grad_component<P: FiniteSumPotential + ?Sized>(potential: &P, i: usize, x: &[f64]) -> Result<Vec<f64>> {
    let n = potential.num_components();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    ensure_dim(potential.dim(), x.len())?;
    ensure_finite(x, "position")?;
    let mut out = vec![0.0; x.len()];
    component_gradient_into(potential, i, x, &mut out);
    Ok(out)
}

/// Checked `grad f(x)`.
pub fn grad_full<P: FiniteSumPotential + ?Sized>(potential: &P, x: &[f64]) -> Result<Vec<f64>> {
    ensure_dim(potential.dim(), x.len())?;
    ensure_finite(x, "position")?;
    let mut out = vec![0.0; x.len()];
    full_gradient_into(potential, x, &mut out);
    Ok(out)
}

/// Checked `f(x)`.
pub fn potential_value<P: FiniteSumPotential + ?Sized>(potential: &P, x: &[f64]) -> Result<f64> {
    ensure_dim(potential.dim(), x.len())?;
    ensure_finite(x, "position")?;
    Ok(potential.value(x))
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

/// `1 / (1 + e^{-z})` without overflow.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Gaussian target `N(mean, covariance)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetGaussian {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
}

/// `f_i(x) = (x - a_i)^T Sigma (x - a_i) / 2`.
///
/// All components share the curvature `Sigma`, so the target is
/// `N(a_bar, Sigma^{-1})` with `a_bar` the mean of the centers.
/// [`FiniteSumPotential::value`] returns `(x - a_bar)^T Sigma (x - a_bar) / 2`,
/// i.e. the average of the components minus their spread around `a_bar`,
/// so that the minimum value is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPotential {
    sigma: Matrix,
    centers: Matrix,
    mean_center: Vec<f64>,
    eig_min: f64,
    eig_max: f64,
}

impl QuadraticPotential {
    /// `centers` is `n x d`, one center per row. `sigma` must be symmetric
    /// positive definite.
    pub fn new(sigma: Matrix, centers: Matrix) -> Result<Self> {
        let d = centers.cols();
        if centers.rows() == 0 || d == 0 {
            return Err(Error::InvalidParameter {
                name: "centers",
                reason: "need at least one center of positive dimension",
            });
        }
        ensure_dim(d, sigma.rows())?;
        ensure_dim(d, sigma.cols())?;
        ensure_finite(sigma.as_slice(), "sigma")?;
        ensure_finite(centers.as_slice(), "centers")?;
        if !sigma.is_symmetric(1e-12 * (1.0 + sigma.trace().abs())) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: "must be symmetric",
            });
        }
        let eig = sigma.to_nalgebra().symmetric_eigen();
        let eig_min = eig.eigenvalues.min();
        let eig_max = eig.eigenvalues.max();
        if eig_min <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: "must be positive definite",
            });
        }
        let n = centers.rows();
        let mut mean_center = vec![0.0; d];
        for row in centers.row_iter() {
            for (m, a) in mean_center.iter_mut().zip(row) {
                *m += a;
            }
        }
        for m in &mut mean_center {
            *m /= n as f64;
        }
        Ok(Self {
            sigma,
            centers,
            mean_center,
            eig_min,
            eig_max,
        })
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn mean_center(&self) -> &[f64] {
        &self.mean_center
    }

    /// `(lambda_min, lambda_max)` of `Sigma`.
    pub fn eigenvalue_range(&self) -> (f64, f64) {
        (self.eig_min, self.eig_max)
    }

    /// `N(a_bar, Sigma^{-1})`.
    pub fn target(&self) -> TargetGaussian {
        let inv = self
            .sigma
            .to_nalgebra()
            .cholesky()
            .expect("sigma was checked positive definite")
            .inverse();
        let inv = symmetrize(&inv);
        TargetGaussian {
            mean: self.mean_center.clone(),
            covariance: Matrix::from_nalgebra(&inv),
        }
    }

    fn quadratic_form(&self, x: &[f64], center: &[f64]) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for r in 0..d {
            let row = self.sigma.row(r);
            let s: f64 = (0..d).map(|c| row[c] * (x[c] - center[c])).sum();
            acc += (x[r] - center[r]) * s;
        }
        0.5 * acc
    }
}

impl FiniteSumPotential for QuadraticPotential {
    fn num_components(&self) -> usize {
        self.centers.rows()
    }

    fn dim(&self) -> usize {
        self.centers.cols()
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.eig_max)
    }

    fn strong_convexity(&self) -> Option<f64> {
        Some(self.eig_min)
    }

    fn add_component_gradient(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let a = self.centers.row(i);
        for (r, o) in out.iter_mut().enumerate() {
            let row = self.sigma.row(r);
            let s: f64 = row.iter().zip(x.iter().zip(a)).map(|(s, (x, a))| s * (x - a)).sum();
            *o += weight * s;
        }
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        self.quadratic_form(x, self.centers.row(i))
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.quadratic_form(x, &self.mean_center)
    }
}

/// Bayesian logistic regression with `N(0, lambda^{-1} I)` prior:
/// `f_i(x) = n * log(1 + exp(-y_i x^T a_i)) + lambda/2 ||x||^2`.
///
/// The average of the components is the exact negative log posterior (no
/// constant dropped); at `x = 0, lambda = 0` it equals `n log 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticPotential {
    features: Matrix,
    labels: Vec<f64>,
    lambda: f64,
    smoothness: f64,
}

impl LogisticPotential {
    /// Labels must already be in `{-1, +1}`.
    pub fn new(features: Matrix, labels: Vec<f64>, lambda: f64) -> Result<Self> {
        validate_design(&features, &labels)?;
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: "must be -1 or +1",
            });
        }
        validate_lambda(lambda)?;
        let n = features.rows() as f64;
        let max_row = features.row_iter().map(norm_sq).fold(0.0, f64::max);
        Ok(Self {
            smoothness: n * max_row / 4.0 + lambda,
            features,
            labels,
            lambda,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl FiniteSumPotential for LogisticPotential {
    fn num_components(&self) -> usize {
        self.features.rows()
    }

    fn dim(&self) -> usize {
        self.features.cols()
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.smoothness)
    }

    fn strong_convexity(&self) -> Option<f64> {
        (self.lambda > 0.0).then_some(self.lambda)
    }

    fn add_component_gradient(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let a = self.features.row(i);
        let y = self.labels[i];
        let n = self.features.rows() as f64;
        let coef = -n * y * sigmoid(-y * dot(x, a));
        for ((o, a), x) in out.iter_mut().zip(a).zip(x) {
            *o += weight * (coef * a + self.lambda * x);
        }
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let n = self.features.rows() as f64;
        let z = self.labels[i] * dot(x, self.features.row(i));
        n * softplus(-z) + 0.5 * self.lambda * norm_sq(x)
    }
}

/// Bayesian linear regression with likelihood `N(x^T a_i, sigma_a^2)` and
/// prior `N(0, lambda^{-1} I)`:
/// `f_i(x) = n (y_i - x^T a_i)^2 / (2 sigma_a^2) + lambda/2 ||x||^2`.
///
/// The average of the components is the negative log posterior with the
/// Gaussian normalizing constants dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegressionPotential {
    features: Matrix,
    responses: Vec<f64>,
    sigma_a_sq: f64,
    lambda: f64,
    smoothness: f64,
}

impl LinearRegressionPotential {
    pub fn new(features: Matrix, responses: Vec<f64>, sigma_a_sq: f64, lambda: f64) -> Result<Self> {
        validate_design(&features, &responses)?;
        ensure_positive(sigma_a_sq, "sigma_a_sq")?;
        validate_lambda(lambda)?;
        let n = features.rows() as f64;
        let max_row = features.row_iter().map(norm_sq).fold(0.0, f64::max);
        Ok(Self {
            smoothness: n * max_row / sigma_a_sq + lambda,
            features,
            responses,
            sigma_a_sq,
            lambda,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn sigma_a_sq(&self) -> f64 {
        self.sigma_a_sq
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl FiniteSumPotential for LinearRegressionPotential {
    fn num_components(&self) -> usize {
        self.features.rows()
    }

    fn dim(&self) -> usize {
        self.features.cols()
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.smoothness)
    }

    fn strong_convexity(&self) -> Option<f64> {
        (self.lambda > 0.0).then_some(self.lambda)
    }

    fn add_component_gradient(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let a = self.features.row(i);
        let n = self.features.rows() as f64;
        let coef = -n * (self.responses[i] - dot(x, a)) / self.sigma_a_sq;
        for ((o, a), x) in out.iter_mut().zip(a).zip(x) {
            *o += weight * (coef * a + self.lambda * x);
        }
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let n = self.features.rows() as f64;
        let r = self.responses[i] - dot(x, self.features.row(i));
        n * r * r / (2.0 * self.sigma_a_sq) + 0.5 * self.lambda * norm_sq(x)
    }
}

/// `f_i(x) + lambda/2 ||x||^2` around any finite-sum potential.
#[derive(Debug, Clone, PartialEq)]
pub struct Ridge<P> {
    inner: P,
    lambda: f64,
}

/// Adds a ridge term so that a merely convex `f` becomes `lambda`-strongly
/// convex and `(L + lambda)`-smooth.
pub fn ridge_wrap<P: FiniteSumPotential>(potential: P, lambda: f64) -> Result<Ridge<P>> {
    ensure_positive(lambda, "lambda")?;
    Ok(Ridge {
        inner: potential,
        lambda,
    })
}

impl<P> Ridge<P> {
    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl<P: FiniteSumPotential> FiniteSumPotential for Ridge<P> {
    fn num_components(&self) -> usize {
        self.inner.num_components()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn smoothness(&self) -> Option<f64> {
        self.inner.smoothness().map(|l| l + self.lambda)
    }

    fn strong_convexity(&self) -> Option<f64> {
        Some(self.inner.strong_convexity().unwrap_or(0.0) + self.lambda)
    }

    fn add_component_gradient(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        self.inner.add_component_gradient(i, x, weight, out);
        for (o, x) in out.iter_mut().zip(x) {
            *o += weight * self.lambda * x;
        }
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        self.inner.component_value(i, x) + 0.5 * self.lambda * norm_sq(x)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x) + 0.5 * self.lambda * norm_sq(x)
    }
}

/// Generator for the synthetic Gaussian benchmark.
///
/// Centers have i.i.d. `N(center_mean, center_std^2)` entries. `Sigma` is
/// `Q diag(lambda) Q^T` with eigenvalues linearly spaced on
/// `[eig_min, eig_max]` (both endpoints included) and `Q` a random
/// orthogonal matrix from the QR factorization of a Gaussian matrix. With
/// `d = 1` the single eigenvalue is `eig_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticQuadratic {
    pub n: usize,
    pub d: usize,
    pub center_mean: f64,
    pub center_std: f64,
    pub eig_min: f64,
    pub eig_max: f64,
}

impl SyntheticQuadratic {
    /// `N(2, 4)` centers read as variance 4, spectrum `[2/3, 3/2]`.
    pub fn new(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            center_mean: 2.0,
            center_std: 2.0,
            eig_min: 2.0 / 3.0,
            eig_max: 1.5,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<(QuadraticPotential, TargetGaussian)> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidParameter {
                name: "n/d",
                reason: "must be >= 1",
            });
        }
        ensure_positive(self.eig_min, "eig_min")?;
        if self.eig_max < self.eig_min || !self.center_std.is_finite() || self.center_std < 0.0 {
            return Err(Error::InvalidParameter {
                name: "synthetic",
                reason: "need eig_min <= eig_max and a finite non-negative center_std",
            });
        }
        let (n, d) = (self.n, self.d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut centers = Matrix::zeros(n, d);
        for i in 0..n {
            for v in centers.row_mut(i) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = self.center_mean + self.center_std * z;
            }
        }

        let eigenvalues: Vec<f64> = if d == 1 {
            vec![self.eig_max]
        } else {
            (0..d)
                .map(|k| {
                    let t = k as f64 / (d - 1) as f64;
                    self.eig_min + t * (self.eig_max - self.eig_min)
                })
                .collect()
        };

        let gaussian: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
        let qr = gaussian.qr();
        let r = qr.r();
        let mut q = qr.q();
        for c in 0..d {
            if r[(c, c)] < 0.0 {
                q.column_mut(c).neg_mut();
            }
        }
        let conj = |vals: &[f64]| {
            let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(vals));
            symmetrize(&(&q * diag * q.transpose()))
        };
        let sigma = conj(&eigenvalues);
        let inverse: Vec<f64> = eigenvalues.iter().map(|l| 1.0 / l).collect();
        let covariance = conj(&inverse);

        let potential = QuadraticPotential::new(Matrix::from_nalgebra(&sigma), centers)?;
        let target = TargetGaussian {
            mean: potential.mean_center().to_vec(),
            covariance: Matrix::from_nalgebra(&covariance),
        };
        Ok((potential, target))
    }
}

/// Synthetic Gaussian benchmark with default settings; deterministic in `seed`.
pub fn synthetic_quadratic(n: usize, d: usize, seed: u64) -> Result<(QuadraticPotential, TargetGaussian)> {
    SyntheticQuadratic::new(n, d).generate(seed)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn validate_design(features: &Matrix, targets: &[f64]) -> Result<()> {
    if features.rows() == 0 || features.cols() == 0 {
        return Err(Error::InvalidParameter {
            name: "features",
            reason: "need n >= 1 rows and d >= 1 columns",
        });
    }
    ensure_dim(features.rows(), targets.len())?;
    ensure_finite(features.as_slice(), "features")?;
    ensure_finite(targets, "targets")
}

fn validate_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "lambda",
            reason: "must be finite and >= 0",
        })
    }
}
