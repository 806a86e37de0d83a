use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::open_closed_unit;

/// Prior over the free parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Prior {
    /// Independent `Uniform(lower_i, upper_i)`; zero density on the bounds' lower edge.
    IndependentUniform { lower: Vec<f64>, upper: Vec<f64> },
    /// Improper density `∝ 1` on `0 < θ_i <= upper_i`.
    FlatPositive { upper: Vec<f64> },
}

impl Prior {
    pub fn uniform(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let p = Self::IndependentUniform { lower, upper };
        p.validate()?;
        Ok(p)
    }

    /// Flat on the positive orthant of dimension `dim`.
    pub fn flat_positive(dim: usize) -> Self {
        Self::FlatPositive {
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::IndependentUniform { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::InvalidArgument("prior bounds differ in length".into()));
                }
                if let Some((l, u)) = lower.iter().zip(upper).find(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "uniform prior needs finite lower < upper, got ({l}, {u})"
                    )));
                }
                Ok(())
            }
            Self::FlatPositive { upper } => {
                if upper.iter().any(|u| !(*u > 0.0)) {
                    return Err(Error::InvalidArgument("flat prior upper bounds must be > 0".into()));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::IndependentUniform { lower, .. } => lower.len(),
            Self::FlatPositive { upper } => upper.len(),
        }
    }

    /// Log density, `-inf` outside the support.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.dim() || theta.iter().any(|x| x.is_nan()) {
            return f64::NEG_INFINITY;
        }
        match self {
            Self::IndependentUniform { lower, upper } => {
                let mut lp = 0.0;
                for ((&x, &l), &u) in theta.iter().zip(lower).zip(upper) {
                    if !(x > l && x <= u) {
                        return f64::NEG_INFINITY;
                    }
                    lp -= (u - l).ln();
                }
                lp
            }
            Self::FlatPositive { upper } => {
                if theta.iter().zip(upper).all(|(&x, &u)| x > 0.0 && x <= u) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Draw from a proper prior; the flat prior cannot be sampled.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Self::IndependentUniform { lower, upper } => Ok(lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| l + (u - l) * open_closed_unit(rng))
                .collect()),
            Self::FlatPositive { .. } => Err(Error::InvalidArgument(
                "cannot sample from an improper flat prior".into(),
            )),
        }
    }
}
