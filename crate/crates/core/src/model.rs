//! Compartmental models: state containers, parameters, propensities and the
//! deterministic (ODE) form of the same models.
//!
//! Infection is frequency dependent everywhere, `beta * S * I / N`, for both
//! the jump process and the ODE. The ODE drift is literally the sum of the
//! propensities times their change vectors, so the two forms cannot drift
//! apart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_COMPARTMENTS: usize = 4;
pub const MAX_EVENTS: usize = 3;

/// Default RK4 step in time units.
pub const ODE_STEP: f64 = 1e-3;

/// Integer compartment counts at one instant.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateVector {
    counts: [u32; MAX_COMPARTMENTS],
    len: u8,
}

impl StateVector {
    pub fn new(counts: &[u32]) -> Result<Self> {
        if counts.is_empty() || counts.len() > MAX_COMPARTMENTS {
            return Err(Error::InvalidState(format!(
                "expected 1..={MAX_COMPARTMENTS} compartments, got {}",
                counts.len()
            )));
        }
        let mut buf = [0; MAX_COMPARTMENTS];
        buf[..counts.len()].copy_from_slice(counts);
        Ok(Self {
            counts: buf,
            len: counts.len() as u8,
        })
    }

    #[inline]
    pub fn as_slice(&self) -> &[u32] {
        &self.counts[..self.len as usize]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> u32 {
        self.as_slice()[i]
    }

    pub fn total(&self) -> u64 {
        self.as_slice().iter().map(|&c| u64::from(c)).sum()
    }

    #[inline]
    fn as_f64(&self) -> [f64; MAX_COMPARTMENTS] {
        let c = &self.counts;
        [c[0] as f64, c[1] as f64, c[2] as f64, c[3] as f64]
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.as_slice().iter().map(|&c| f64::from(c)).collect()
    }

    /// Adds a change vector. Callers guarantee the result stays non-negative.
    #[inline]
    fn apply(&mut self, change: &[i32; MAX_COMPARTMENTS]) {
        for (c, &d) in self.counts.iter_mut().zip(change) {
            *c = c.wrapping_add_signed(d);
        }
    }
}

impl std::fmt::Debug for StateVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Sir,
    Seir,
}

/// Epidemic rates. Construction enforces strict positivity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub beta: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_obs: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")))
    }
}

impl Params {
    pub fn sir(beta: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            beta,
            gamma,
            alpha: None,
            p_obs: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn seir(beta: f64, gamma: f64, alpha: f64) -> Result<Self> {
        let p = Self {
            beta,
            gamma,
            alpha: Some(alpha),
            p_obs: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_p_obs(mut self, p_obs: f64) -> Result<Self> {
        self.p_obs = Some(p_obs);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        positive("beta", self.beta)?;
        positive("gamma", self.gamma)?;
        if let Some(a) = self.alpha {
            positive("alpha", a)?;
        }
        if let Some(p) = self.p_obs {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParams(format!(
                    "p_obs must lie in (0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }

    /// Like [`Params::validate`] but allows `beta == 0`, which the pure-removal
    /// and absorbing-state checks need.
    fn validate_rates_nonneg(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        positive("gamma", self.gamma)?;
        if let Some(a) = self.alpha {
            positive("alpha", a)?;
        }
        Ok(())
    }
}

/// Rate constants with the `1/N` scaling folded in.
#[derive(Clone, Copy, Debug)]
pub struct RateConstants {
    beta_over_n: f64,
    gamma: f64,
    alpha: f64,
}

/// Compartment layout, population size and the jump structure.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    kind: ModelKind,
    compartments: Vec<&'static str>,
    population: u32,
    stoichiometry: Vec<[i32; MAX_COMPARTMENTS]>,
    /// Infection propensity is `beta * S * I / N` rather than `beta * S * I`.
    pub frequency_dependent: bool,
}

/// Two events: infection (-1,+1,0) at `beta*S*I/N`, removal (0,-1,+1) at `gamma*I`.
pub fn sir_spec(population: u32) -> Result<ModelSpec> {
    if population == 0 {
        return Err(Error::InvalidPopulation);
    }
    Ok(ModelSpec {
        kind: ModelKind::Sir,
        compartments: vec!["S", "I", "R"],
        population,
        stoichiometry: vec![[-1, 1, 0, 0], [0, -1, 1, 0]],
        frequency_dependent: true,
    })
}

/// Three events over (S,E,I,R): exposure at `beta*S*I/N`, progression at
/// `alpha*E`, removal at `gamma*I`.
pub fn seir_spec(population: u32) -> Result<ModelSpec> {
    if population == 0 {
        return Err(Error::InvalidPopulation);
    }
    Ok(ModelSpec {
        kind: ModelKind::Seir,
        compartments: vec!["S", "E", "I", "R"],
        population,
        stoichiometry: vec![[-1, 1, 0, 0], [0, -1, 1, 0], [0, 0, -1, 1]],
        frequency_dependent: true,
    })
}

impl ModelSpec {
    pub fn new(kind: ModelKind, population: u32) -> Result<Self> {
        match kind {
            ModelKind::Sir => sir_spec(population),
            ModelKind::Seir => seir_spec(population),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn compartments(&self) -> &[&'static str] {
        &self.compartments
    }

    pub fn n_compartments(&self) -> usize {
        self.compartments.len()
    }

    pub fn n_events(&self) -> usize {
        self.stoichiometry.len()
    }

    pub fn population(&self) -> u32 {
        self.population
    }

    pub fn stoichiometry(&self, event: usize) -> &[i32] {
        &self.stoichiometry[event][..self.n_compartments()]
    }

    #[inline]
    pub(crate) fn change(&self, event: usize) -> &[i32; MAX_COMPARTMENTS] {
        &self.stoichiometry[event]
    }

    /// Names of the rate parameters this model uses, in canonical order.
    pub fn rate_names(&self) -> &'static [&'static str] {
        match self.kind {
            ModelKind::Sir => &["beta", "gamma"],
            ModelKind::Seir => &["beta", "gamma", "alpha"],
        }
    }

    pub fn rate_constants(&self, params: &Params) -> Result<RateConstants> {
        params.validate_rates_nonneg()?;
        let alpha = match (self.kind, params.alpha) {
            (ModelKind::Seir, Some(a)) => a,
            (ModelKind::Seir, None) => {
                return Err(Error::InvalidParams("SEIR model requires alpha".into()))
            }
            (ModelKind::Sir, _) => 0.0,
        };
        let scale = if self.frequency_dependent {
            1.0 / f64::from(self.population)
        } else {
            1.0
        };
        Ok(RateConstants {
            beta_over_n: params.beta * scale,
            gamma: params.gamma,
            alpha,
        })
    }

    /// Propensities at a (possibly real-valued) state; only the first
    /// [`ModelSpec::n_events`] entries are meaningful.
    #[inline]
    pub fn propensities_at(&self, k: &RateConstants, x: &[f64; MAX_COMPARTMENTS]) -> [f64; MAX_EVENTS] {
        match self.kind {
            ModelKind::Sir => [k.beta_over_n * x[0] * x[1], k.gamma * x[1], 0.0],
            ModelKind::Seir => [
                k.beta_over_n * x[0] * x[2],
                k.alpha * x[1],
                k.gamma * x[2],
            ],
        }
    }

    #[inline]
    pub(crate) fn propensities_int(&self, k: &RateConstants, s: &StateVector) -> [f64; MAX_EVENTS] {
        self.propensities_at(k, &s.as_f64())
    }

    pub fn propensities(&self, params: &Params, state: &StateVector) -> Result<Vec<f64>> {
        let k = self.rate_constants(params)?;
        Ok(self.propensities_int(&k, state)[..self.n_events()].to_vec())
    }

    /// Checks compartment count and the closed-population identity.
    pub fn check_state(&self, s: &StateVector) -> Result<()> {
        if s.len() != self.n_compartments() {
            return Err(Error::InvalidState(format!(
                "expected {} compartments, got {}",
                self.n_compartments(),
                s.len()
            )));
        }
        if s.total() != u64::from(self.population) {
            return Err(Error::InvalidState(format!(
                "counts {:?} sum to {}, population is {}",
                s,
                s.total(),
                self.population
            )));
        }
        Ok(())
    }

    pub fn state(&self, counts: &[u32]) -> Result<StateVector> {
        let s = StateVector::new(counts)?;
        self.check_state(&s)?;
        Ok(s)
    }

    #[inline]
    pub(crate) fn apply_event(&self, s: &mut StateVector, event: usize) {
        s.apply(self.change(event));
    }
}

/// Basic reproduction number under frequency-dependent transmission: `beta / gamma`.
pub fn basic_reproduction_number(params: &Params, spec: &ModelSpec) -> Result<f64> {
    spec.rate_constants(params)?;
    Ok(params.beta / params.gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    EventResolved,
    GridSampled,
}

/// Integer-valued path.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub kind: TrajectoryKind,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&StateVector> {
        self.states.last()
    }

    /// Column of one compartment.
    pub fn compartment(&self, c: usize) -> Vec<u32> {
        self.states.iter().map(|s| s.get(c)).collect()
    }

    pub fn to_real(&self) -> RealTrajectory {
        RealTrajectory {
            times: self.times.clone(),
            states: self.states.iter().map(StateVector::to_f64_vec).collect(),
        }
    }
}

/// Real-valued path from the ODE.
#[derive(Clone, Debug, PartialEq)]
pub struct RealTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

pub(crate) fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidGrid("time grid is empty".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid("time grid has non-finite entries".into()));
    }
    if let Some(w) = t_grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!(
            "times must be strictly increasing ({} followed by {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Fixed-step RK4 solution sampled at `t_grid`; `init` is the state at `t_grid[0]`.
pub fn integrate_deterministic(
    spec: &ModelSpec,
    params: &Params,
    init: &[f64],
    t_grid: &[f64],
) -> Result<RealTrajectory> {
    integrate_with_step(spec, params, init, t_grid, ODE_STEP)
}

/// [`integrate_deterministic`] with an explicit maximum step. Each grid gap is
/// split into `ceil(gap / max_step)` equal steps so grid points are hit exactly.
pub fn integrate_with_step(
    spec: &ModelSpec,
    params: &Params,
    init: &[f64],
    t_grid: &[f64],
    max_step: f64,
) -> Result<RealTrajectory> {
    check_grid(t_grid)?;
    if !(max_step > 0.0) {
        return Err(Error::InvalidArgument(format!("ODE step must be > 0, got {max_step}")));
    }
    let d = spec.n_compartments();
    if init.len() != d {
        return Err(Error::InvalidState(format!(
            "expected {d} compartments, got {}",
            init.len()
        )));
    }
    let n = f64::from(spec.population());
    let sum: f64 = init.iter().sum();
    if init.iter().any(|&x| x < 0.0) || (sum - n).abs() > 1e-6 * n {
        return Err(Error::InvalidState(format!(
            "initial state {init:?} must be non-negative and sum to {n}"
        )));
    }
    let k = spec.rate_constants(params)?;

    let drift = |x: &[f64; MAX_COMPARTMENTS]| -> [f64; MAX_COMPARTMENTS] {
        let a = spec.propensities_at(&k, x);
        let mut dx = [0.0; MAX_COMPARTMENTS];
        for (j, rate) in a.iter().enumerate().take(spec.n_events()) {
            for (c, &v) in spec.change(j).iter().enumerate() {
                dx[c] += rate * f64::from(v);
            }
        }
        dx
    };
    let axpy = |x: &[f64; MAX_COMPARTMENTS], h: f64, k: &[f64; MAX_COMPARTMENTS]| {
        let mut out = *x;
        for c in 0..MAX_COMPARTMENTS {
            out[c] += h * k[c];
        }
        out
    };

    let mut x = [0.0; MAX_COMPARTMENTS];
    x[..d].copy_from_slice(init);
    let mut states = Vec::with_capacity(t_grid.len());
    states.push(init.to_vec());
    for w in t_grid.windows(2) {
        let gap = w[1] - w[0];
        let steps = (gap / max_step).ceil().max(1.0) as usize;
        let h = gap / steps as f64;
        for _ in 0..steps {
            let k1 = drift(&x);
            let k2 = drift(&axpy(&x, h / 2.0, &k1));
            let k3 = drift(&axpy(&x, h / 2.0, &k2));
            let k4 = drift(&axpy(&x, h, &k3));
            for c in 0..MAX_COMPARTMENTS {
                x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        states.push(x[..d].to_vec());
    }
    Ok(RealTrajectory {
        times: t_grid.to_vec(),
        states,
    })
}

/// Round half to even, used when a real-valued path feeds an integer model.
pub fn round_half_even(x: f64) -> f64 {
    let r = x.round();
    if (x - x.trunc()).abs() == 0.5 {
        2.0 * (x / 2.0).round()
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sir() -> ModelSpec {
        sir_spec(4820).unwrap()
    }

    #[test]
    fn sir_propensities_match_direct_evaluation() {
        let spec = sir();
        let p = Params::sir(2.0, 1.0).unwrap();
        let s = spec.state(&[4800, 20, 0]).unwrap();
        let a = spec.propensities(&p, &s).unwrap();
        assert!((a[0] - 2.0 * 4800.0 * 20.0 / 4820.0).abs() < 1e-12);
        assert!((a[0] - 39.834_024_896_265_56).abs() < 1e-9);
        assert_eq!(a[1], 20.0);
    }

    #[test]
    fn seir_propensities_match_direct_evaluation() {
        let spec = seir_spec(4820).unwrap();
        let p = Params::seir(4.0, 1.0, 1.0).unwrap();
        let s = spec.state(&[4800, 0, 20, 0]).unwrap();
        let a = spec.propensities(&p, &s).unwrap();
        assert!((a[0] - 4.0 * 4800.0 * 20.0 / 4820.0).abs() < 1e-12);
        assert_eq!(a[1], 0.0);
        assert_eq!(a[2], 20.0);

        let dead = spec.state(&[4800, 0, 0, 20]).unwrap();
        assert!(spec.propensities(&p, &dead).unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn absorbing_sir_state() {
        let spec = sir();
        let p = Params::sir(2.0, 1.0).unwrap();
        let s = spec.state(&[4000, 0, 820]).unwrap();
        assert_eq!(spec.propensities(&p, &s).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_population_rejected() {
        assert!(matches!(sir_spec(0), Err(Error::InvalidPopulation)));
        assert!(matches!(seir_spec(0), Err(Error::InvalidPopulation)));
        assert_eq!(sir_spec(4820).unwrap().population(), 4820);
    }

    #[test]
    fn stoichiometry_is_closed() {
        for spec in [sir(), seir_spec(10).unwrap()] {
            for j in 0..spec.n_events() {
                assert_eq!(spec.stoichiometry(j).iter().sum::<i32>(), 0);
            }
        }
    }

    #[test]
    fn params_positivity() {
        assert!(Params::sir(0.0, 1.0).is_err());
        assert!(Params::sir(1.0, -1.0).is_err());
        assert!(Params::seir(1.0, 1.0, 0.0).is_err());
        assert!(Params::sir(1.0, 1.0).unwrap().with_p_obs(0.0).is_err());
        assert!(Params::sir(1.0, 1.0).unwrap().with_p_obs(1.0).is_ok());
        assert!(Params::sir(1.0, 1.0).unwrap().with_p_obs(1.2).is_err());
        let missing_alpha = Params::sir(1.0, 1.0).unwrap();
        assert!(seir_spec(10).unwrap().rate_constants(&missing_alpha).is_err());
    }

    #[test]
    fn r0_is_beta_over_gamma() {
        let spec = sir();
        assert_eq!(basic_reproduction_number(&Params::sir(2.0, 1.0).unwrap(), &spec).unwrap(), 2.0);
        assert_eq!(basic_reproduction_number(&Params::sir(0.7, 0.7).unwrap(), &spec).unwrap(), 1.0);
        let seir = seir_spec(4820).unwrap();
        assert_eq!(
            basic_reproduction_number(&Params::seir(4.0, 1.0, 1.0).unwrap(), &seir).unwrap(),
            4.0
        );
    }

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|t| t as f64).collect()
    }

    #[test]
    fn ode_pure_decay_when_beta_zero() {
        let spec = sir();
        let p = Params { beta: 0.0, gamma: 1.0, alpha: None, p_obs: None };
        let traj = integrate_deterministic(&spec, &p, &[4800.0, 20.0, 0.0], &grid(5)).unwrap();
        for (t, x) in traj.times.iter().zip(&traj.states) {
            assert_eq!(x[0], 4800.0);
            assert!((x[1] - 20.0 * (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn ode_epidemic_peaks_inside_window() {
        let spec = sir();
        let p = Params::sir(2.0, 1.0).unwrap();
        let g = grid(15);
        let coarse = integrate_deterministic(&spec, &p, &[4800.0, 20.0, 0.0], &g).unwrap();
        let fine = integrate_with_step(&spec, &p, &[4800.0, 20.0, 0.0], &g, ODE_STEP / 10.0).unwrap();
        let i: Vec<f64> = coarse.states.iter().map(|x| x[1]).collect();
        let (peak, _) = i
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
        assert!(peak > 0 && peak < 15);
        assert!(i[15] < i[peak]);
        for (a, b) in coarse.states.iter().zip(&fine.states) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-4 * y.abs().max(1.0));
            }
        }
        for x in &coarse.states {
            assert!((x[2] - (4820.0 - x[0] - x[1])).abs() < 1e-6 * 4820.0);
        }
    }

    #[test]
    fn ode_rejects_bad_grid() {
        let spec = sir();
        let p = Params::sir(2.0, 1.0).unwrap();
        let init = [4800.0, 20.0, 0.0];
        assert!(matches!(
            integrate_deterministic(&spec, &p, &init, &[0.0, 1.0, 1.0]),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            integrate_deterministic(&spec, &p, &init, &[]),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even(2.5), 2.0);
        assert_eq!(round_half_even(3.5), 4.0);
        assert_eq!(round_half_even(-2.5), -2.0);
        assert_eq!(round_half_even(2.4999), 2.0);
        assert_eq!(round_half_even(7.0), 7.0);
    }

    proptest! {
        #[test]
        fn ode_conserves_and_halving_step_converges(
            beta in 0.1f64..5.0, gamma in 0.1f64..3.0, i0 in 1u32..200,
        ) {
            let spec = sir();
            let p = Params::sir(beta, gamma).unwrap();
            let init = [f64::from(4820 - i0), f64::from(i0), 0.0];
            let g = grid(6);
            let a = integrate_with_step(&spec, &p, &init, &g, 0.01).unwrap();
            let b = integrate_with_step(&spec, &p, &init, &g, 0.005).unwrap();
            for (x, y) in a.states.iter().zip(&b.states) {
                let sum: f64 = x.iter().sum();
                prop_assert!((sum - 4820.0).abs() < 1e-6 * 4820.0);
                for (u, v) in x.iter().zip(y) {
                    prop_assert!((u - v).abs() <= 1e-4 * v.abs().max(1.0));
                }
            }
        }

        #[test]
        fn propensities_nonnegative_and_events_stay_valid(
            s in 0u32..50, i in 0u32..50, beta in 0.01f64..5.0, gamma in 0.01f64..5.0,
        ) {
            let n = 100;
            let spec = sir_spec(n).unwrap();
            let p = Params::sir(beta, gamma).unwrap();
            let st = spec.state(&[s, i, n - s - i]).unwrap();
            let a = spec.propensities(&p, &st).unwrap();
            for (j, &rate) in a.iter().enumerate() {
                prop_assert!(rate >= 0.0);
                if rate > 0.0 {
                    let mut next = st;
                    spec.apply_event(&mut next, j);
                    prop_assert!(spec.check_state(&next).is_ok());
                    prop_assert!(next.as_slice().iter().all(|&c| c <= n));
                }
            }
        }
    }
}
