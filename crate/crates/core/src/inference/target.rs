use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Params, StateVector};
use crate::observation::{ObservationModel, ObservedSeries};
use crate::smc;

/// A parameter that can be free in θ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    Beta,
    Gamma,
    Alpha,
    PObs,
}

impl ParamName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Beta => "beta",
            Self::Gamma => "gamma",
            Self::Alpha => "alpha",
            Self::PObs => "p_obs",
        }
    }

    /// Upper edge of the natural support.
    pub fn upper_bound(self) -> f64 {
        match self {
            Self::PObs => 1.0,
            _ => f64::INFINITY,
        }
    }
}

/// Which parameters θ holds, and in what order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout(Vec<ParamName>);

impl ParamLayout {
    pub fn new(names: Vec<ParamName>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidArgument("θ must have at least one component".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidArgument(format!("{} listed twice", n.as_str())));
            }
        }
        Ok(Self(names))
    }

    /// The model's rates, optionally followed by `p_obs`.
    pub fn for_model(spec: &ModelSpec, with_p_obs: bool) -> Self {
        let mut v = vec![ParamName::Beta, ParamName::Gamma];
        if spec.rate_names().contains(&"alpha") {
            v.push(ParamName::Alpha);
        }
        if with_p_obs {
            v.push(ParamName::PObs);
        }
        Self(v)
    }

    pub fn names(&self) -> &[ParamName] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.0.iter().map(|n| n.as_str().to_owned()).collect()
    }

    /// θ read out of a full parameter set.
    pub fn extract(&self, params: &Params) -> Result<Vec<f64>> {
        self.0
            .iter()
            .map(|n| match n {
                ParamName::Beta => Ok(params.beta),
                ParamName::Gamma => Ok(params.gamma),
                ParamName::Alpha => params
                    .alpha
                    .ok_or_else(|| Error::InvalidParams("alpha not set".into())),
                ParamName::PObs => params
                    .p_obs
                    .ok_or_else(|| Error::InvalidParams("p_obs not set".into())),
            })
            .collect()
    }

    /// `base` with the free components overwritten by θ.
    pub fn apply(&self, theta: &[f64], base: &Params) -> Result<Params> {
        if theta.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "θ has {} components, layout has {}",
                theta.len(),
                self.dim()
            )));
        }
        let mut p = *base;
        for (n, &v) in self.0.iter().zip(theta) {
            match n {
                ParamName::Beta => p.beta = v,
                ParamName::Gamma => p.gamma = v,
                ParamName::Alpha => p.alpha = Some(v),
                ParamName::PObs => p.p_obs = Some(v),
            }
        }
        Ok(p)
    }
}

/// Everything the particle filter needs except θ.
#[derive(Clone, Debug)]
pub struct PmmhTarget {
    pub spec: ModelSpec,
    /// Values for the parameters that are not free.
    pub base: Params,
    pub obs_model: ObservationModel,
    pub observed: ObservedSeries,
    pub init: StateVector,
    pub layout: ParamLayout,
    pub n_particles: usize,
}

impl PmmhTarget {
    /// Model rates and emission model at θ. `p_obs`, when free or set in
    /// `base`, overrides the emission probability.
    pub fn resolve(&self, theta: &[f64]) -> Result<(Params, ObservationModel)> {
        let p = self.layout.apply(theta, &self.base)?;
        let obs = match p.p_obs {
            Some(q) if self.obs_model.is_integer_valued() => self.obs_model.with_p_obs(q)?,
            _ => self.obs_model.clone(),
        };
        Ok((p, obs))
    }

    /// Particle-filter estimate of `ln p(y | θ)`.
    pub fn log_likelihood(&self, theta: &[f64], seed: u64) -> Result<f64> {
        let (p, obs) = self.resolve(theta)?;
        smc::log_likelihood(&self.spec, &p, &obs, &self.observed, &self.init, self.n_particles, seed)
    }
}
