//! Scenario configuration: one JSON document per run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{AbcConfig, ParamLayout, ParamName, PilotConfig, Prior};
use crate::model::{ModelKind, ModelSpec, Params, StateVector};
use crate::observation::{ObservationKind, ObservationModel};

/// Source of the hidden path that observations are drawn from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenSource {
    /// RK4 solution of the mean-field equations (real-valued).
    #[default]
    Deterministic,
    /// One exact stochastic path (integer-valued).
    Stochastic,
}

/// Observation times `first, first + 1, ..., last`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub first: u32,
    pub last: u32,
}

impl GridConfig {
    pub fn times(&self) -> Vec<f64> {
        (self.first..=self.last).map(f64::from).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub t0: usize,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmmhConfig {
    pub n_steps: usize,
    #[serde(default = "one")]
    pub n_chains: usize,
    pub n_particles: usize,
    #[serde(default)]
    pub burn: usize,
    #[serde(default = "one")]
    pub thin: usize,
    /// Free parameters, in θ order.
    pub free: Vec<ParamName>,
    pub theta0: Vec<f64>,
    /// Two-stage pilot before the main chains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot: Option<PilotConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive: Option<AdaptiveConfig>,
    /// Step multiplier; defaults to `2.38^2 / d` when not tuned by a pilot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Defaults to flat on `(0, ∞)`, or `(0, 1]` for `p_obs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Prior>,
    /// Posterior-predictive draws for `bands.csv`.
    #[serde(default = "default_band_draws")]
    pub band_draws: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbcSamplerConfig {
    pub epsilon: f64,
    pub n_accept: usize,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u64,
    pub free: Vec<ParamName>,
    pub prior_lower: Vec<f64>,
    pub prior_upper: Vec<f64>,
    #[serde(default = "default_band_draws")]
    pub band_draws: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SamplerConfig {
    Pmmh(PmmhConfig),
    Abc(AbcSamplerConfig),
}

/// A field varied across sub-runs of one scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepField {
    NRatio,
    PObs,
    GridLast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub field: SweepField,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub model: ModelKind,
    pub population: u32,
    /// Counts at time 0, in compartment order.
    pub initial: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_params: Option<Params>,
    #[serde(default)]
    pub hidden: HiddenSource,
    pub obs: ObservationKind,
    /// Observed compartment indices; all of them by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<Vec<usize>>,
    pub grid: GridConfig,
    pub sampler: SamplerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    pub seed: u64,
}

impl AbcSamplerConfig {
    pub fn abc(&self) -> AbcConfig {
        AbcConfig {
            epsilon: self.epsilon,
            n_accept: self.n_accept,
            max_attempts: self.max_attempts,
        }
    }
}

fn default_max_attempts() -> u64 {
    crate::inference::abc::DEFAULT_MAX_ATTEMPTS
}

fn one() -> usize {
    1
}

fn default_band_draws() -> usize {
    1000
}

fn bad(path: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_owned(),
        msg: msg.into(),
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| bad("$", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config { path: p, msg } => bad(&p, format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.model, self.population).map_err(|e| bad("population", e.to_string()))
    }

    pub fn init(&self) -> Result<StateVector> {
        self.spec()?.state(&self.initial).map_err(|e| bad("initial", e.to_string()))
    }

    pub fn observation_model(&self) -> Result<ObservationModel> {
        let n = self.spec()?.n_compartments();
        let observed = self.observed.clone().unwrap_or_else(|| (0..n).collect());
        if let Some(&c) = observed.iter().find(|&&c| c >= n) {
            return Err(bad("observed", format!("compartment index {c} out of range")));
        }
        ObservationModel::new(self.obs, observed).map_err(|e| bad("obs", e.to_string()))
    }

    pub fn free_params(&self) -> &[ParamName] {
        match &self.sampler {
            SamplerConfig::Pmmh(p) => &p.free,
            SamplerConfig::Abc(a) => &a.free,
        }
    }

    pub fn layout(&self) -> Result<ParamLayout> {
        ParamLayout::new(self.free_params().to_vec()).map_err(|e| bad("sampler.free", e.to_string()))
    }

    /// Values for parameters that are not free: the true parameters when
    /// given, unit rates otherwise.
    pub fn base_params(&self) -> Params {
        let mut p = self.true_params.unwrap_or(Params {
            beta: 1.0,
            gamma: 1.0,
            alpha: (self.model == ModelKind::Seir).then_some(1.0),
            p_obs: None,
        });
        // the emission probability lives in `obs`
        p.p_obs = None;
        p
    }

    /// Parameter values matching `free_params`, where known.
    pub fn truth(&self) -> Option<Vec<f64>> {
        let mut p = self.true_params?;
        if let ObservationKind::BinomialThinning { p_obs } = self.obs {
            p.p_obs.get_or_insert(p_obs);
        }
        self.layout().ok()?.extract(&p).ok()
    }

    pub fn prior(&self) -> Result<Prior> {
        match &self.sampler {
            SamplerConfig::Pmmh(p) => Ok(p.prior.clone().unwrap_or_else(|| Prior::FlatPositive {
                upper: p.free.iter().map(|n| n.upper_bound()).collect(),
            })),
            SamplerConfig::Abc(a) => Prior::uniform(a.prior_lower.clone(), a.prior_upper.clone())
                .map_err(|e| bad("sampler.prior_lower", e.to_string())),
        }
    }

    /// The same scenario with one sweep value substituted.
    pub fn with_sweep_value(&self, field: SweepField, value: f64) -> Result<Self> {
        let mut c = self.clone();
        c.sweep = None;
        match (field, &mut c.obs) {
            (SweepField::NRatio, ObservationKind::GaussianNoise { n_ratio, .. }) => *n_ratio = value,
            (SweepField::PObs, ObservationKind::BinomialThinning { p_obs }) => *p_obs = value,
            (SweepField::GridLast, _) => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(bad("sweep.values", format!("grid length {value} is not a positive integer")));
                }
                c.grid.last = value as u32;
            }
            _ => return Err(bad("sweep.field", "field does not match the observation model")),
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.spec()?;
        let nc = spec.n_compartments();
        if self.initial.len() != nc {
            return Err(bad("initial", format!("expected {nc} counts, got {}", self.initial.len())));
        }
        self.init()?;
        if let Some(p) = &self.true_params {
            p.validate().map_err(|e| bad("true_params", e.to_string()))?;
            if p.p_obs.is_some() {
                return Err(bad("true_params.p_obs", "set p_obs in obs instead"));
            }
            spec.rate_constants(p).map_err(|e| bad("true_params", e.to_string()))?;
        }
        self.observation_model()?;
        if self.grid.first == 0 || self.grid.last < self.grid.first {
            return Err(bad("grid", "need 1 <= first <= last"));
        }
        let layout = self.layout()?;
        for n in layout.names() {
            if *n == ParamName::Alpha && self.model != ModelKind::Seir {
                return Err(bad("sampler.free", "alpha is only a parameter of the SEIR model"));
            }
            if *n == ParamName::PObs && !matches!(self.obs, ObservationKind::BinomialThinning { .. }) {
                return Err(bad("sampler.free", "p_obs can only be free with binomial observations"));
            }
        }
        let d = layout.dim();
        match &self.sampler {
            SamplerConfig::Pmmh(p) => {
                if p.n_steps == 0 || p.n_chains == 0 || p.n_particles == 0 || p.thin == 0 {
                    return Err(bad("sampler", "n_steps, n_chains, n_particles and thin must be >= 1"));
                }
                if p.burn > p.n_steps {
                    return Err(bad("sampler.burn", "burn exceeds the chain length"));
                }
                if p.theta0.len() != d {
                    return Err(bad("sampler.theta0", format!("expected {d} values")));
                }
                if p.pilot.is_some() && p.adaptive.is_some() {
                    return Err(bad("sampler", "pilot and adaptive are mutually exclusive"));
                }
                if let Some(h) = p.h {
                    if !(h >= 0.0 && h.is_finite()) {
                        return Err(bad("sampler.h", "h must be >= 0"));
                    }
                }
                if let Some(a) = &p.adaptive {
                    if !(a.epsilon > 0.0) {
                        return Err(bad("sampler.adaptive.epsilon", "must be > 0"));
                    }
                }
                let prior = self.prior()?;
                prior.validate().map_err(|e| bad("sampler.prior", e.to_string()))?;
                if prior.dim() != d {
                    return Err(bad("sampler.prior", format!("expected dimension {d}")));
                }
                if prior.log_density(&p.theta0) == f64::NEG_INFINITY {
                    return Err(bad("sampler.theta0", "outside the prior support"));
                }
            }
            SamplerConfig::Abc(a) => {
                a.abc().validate().map_err(|e| bad("sampler", e.to_string()))?;
                if a.prior_lower.len() != d || a.prior_upper.len() != d {
                    return Err(bad("sampler.prior_lower", format!("expected {d} bounds")));
                }
                self.prior()?;
                let s = spec.n_compartments();
                let obs = self.observation_model()?;
                for c in [s - 2, s - 1] {
                    if !obs.observed_compartments().contains(&c) {
                        return Err(bad("observed", "ABC needs the infected and removed compartments observed"));
                    }
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(bad("sweep.values", "empty sweep"));
            }
        }
        Ok(())
    }
}
