//! Gaussian random-walk proposals, fixed or with the adaptive covariance
//! schedule `Σ_t = I` for `t <= t0` and `cov(θ_0..θ_{t-1}) + εI` afterwards.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ADAPT_T0: usize = 1000;
pub const DEFAULT_ADAPT_EPSILON: f64 = 1e-4;

/// Untuned step multiplier, `2.38^2 / d`.
pub fn default_h(dim: usize) -> f64 {
    2.38 * 2.38 / dim as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProposalMode {
    Fixed,
    Adaptive { t0: usize, epsilon: f64 },
}

impl ProposalMode {
    pub fn adaptive_default() -> Self {
        Self::Adaptive {
            t0: DEFAULT_ADAPT_T0,
            epsilon: DEFAULT_ADAPT_EPSILON,
        }
    }
}

/// `θ' ~ N(θ, h Σ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub h: f64,
    pub sigma: DMatrix<f64>,
    pub mode: ProposalMode,
}

impl Proposal {
    pub fn fixed(h: f64, sigma: DMatrix<f64>) -> Result<Self> {
        let p = Self {
            h,
            sigma,
            mode: ProposalMode::Fixed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn adaptive(h: f64, dim: usize, t0: usize, epsilon: f64) -> Result<Self> {
        let p = Self {
            h,
            sigma: DMatrix::identity(dim, dim),
            mode: ProposalMode::Adaptive { t0, epsilon },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidArgument(format!("h must be >= 0, got {}", self.h)));
        }
        if !self.sigma.is_square() {
            return Err(Error::Tuning("sigma must be square".into()));
        }
        let asym = (&self.sigma - self.sigma.transpose()).abs().max();
        if asym > 1e-12 * self.sigma.abs().max().max(1.0) {
            return Err(Error::Tuning("sigma must be symmetric".into()));
        }
        if let ProposalMode::Adaptive { epsilon, .. } = self.mode {
            if !(epsilon > 0.0) {
                return Err(Error::InvalidArgument(format!("adaptive epsilon must be > 0, got {epsilon}")));
            }
        }
        Ok(())
    }

    /// Draw using the fixed covariance.
    pub fn propose<R: Rng + ?Sized>(&self, current: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        propose(current, self.h, &self.sigma, rng)
    }
}

/// Lower Cholesky factor of `sigma`, adding diagonal jitter if needed.
pub fn cholesky_jittered(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if let Some(c) = sigma.clone().cholesky() {
        return Ok(c.l());
    }
    let scale = (0..n).map(|i| sigma[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut jitter = 1e-12 * scale;
    for _ in 0..8 {
        let m = sigma + DMatrix::identity(n, n) * jitter;
        if let Some(c) = m.cholesky() {
            log::debug!("proposal covariance needed jitter {jitter:e}");
            return Ok(c.l());
        }
        jitter *= 10.0;
    }
    Err(Error::Tuning(format!("covariance is not positive semi-definite: {sigma}")))
}

/// Draw from `N(current, h Σ)`. `h == 0` returns `current` exactly.
pub fn propose<R: Rng + ?Sized>(current: &[f64], h: f64, sigma: &DMatrix<f64>, rng: &mut R) -> Result<Vec<f64>> {
    let d = current.len();
    if sigma.nrows() != d || sigma.ncols() != d {
        return Err(Error::InvalidArgument(format!(
            "θ has {d} components, covariance is {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let l = cholesky_jittered(sigma)?;
    let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let step = l * z * h.sqrt();
    Ok(current.iter().zip(step.iter()).map(|(x, s)| x + s).collect())
}

/// Log density of `N(mean, cov)` at `x`.
pub fn mvn_log_density(x: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    let d = x.len();
    let l = cholesky_jittered(cov)?;
    let diff = DVector::from_iterator(d, x.iter().zip(mean).map(|(a, b)| a - b));
    let z = l
        .solve_lower_triangular(&diff)
        .ok_or_else(|| Error::Tuning("singular covariance".into()))?;
    let log_det: f64 = (0..d).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    Ok(-0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + z.norm_squared()))
}

/// Running mean and scatter matrix (Welford), for the adaptive covariance.
#[derive(Clone, Debug)]
pub struct RunningCovariance {
    n: usize,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl RunningCovariance {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let x = DVector::from_column_slice(x);
        let delta = &x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = &x - &self.mean;
        self.scatter += &delta * delta2.transpose();
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// Unbiased sample covariance; zero with fewer than two points.
    pub fn covariance(&self) -> DMatrix<f64> {
        if self.n < 2 {
            return DMatrix::zeros(self.mean.len(), self.mean.len());
        }
        let c = &self.scatter / (self.n - 1) as f64;
        // symmetrize away rounding
        (&c + c.transpose()) * 0.5
    }
}

/// Two-pass unbiased sample covariance of row vectors.
pub fn sample_covariance(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len();
    if n < 2 {
        return DMatrix::zeros(d, d);
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut c = DMatrix::zeros(d, d);
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                c[(i, j)] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    c / (n - 1) as f64
}
