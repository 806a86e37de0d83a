//! Exact simulation of the Markov jump process by the direct method.
//!
//! Waiting times are `ln(1/r1) / a0` with `r1` drawn on `(0, 1]`; the event
//! is the first index whose propensity prefix sum exceeds `r2 * a0`, with
//! `r2` drawn on `[0, 1)`. Simulation stops at absorption (`a0 == 0`) or
//! when the next event would fall after the horizon. Because waiting times
//! are memoryless, discarding the overshooting draw keeps the endpoint
//! exact, so [`gillespie_propagate`] can be chained interval by interval.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{check_grid, ModelSpec, Params, RateConstants, StateVector, Trajectory, TrajectoryKind};
use crate::rng::open_closed_unit;

/// One fired event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub event_index: usize,
    pub state_after: StateVector,
}

/// Precomputed rate constants bound to a model.
#[derive(Clone, Copy, Debug)]
pub struct Kernel<'a> {
    spec: &'a ModelSpec,
    rates: RateConstants,
}

impl<'a> Kernel<'a> {
    pub fn new(spec: &'a ModelSpec, params: &Params) -> Result<Self> {
        Ok(Self {
            spec,
            rates: spec.rate_constants(params)?,
        })
    }

    pub fn spec(&self) -> &'a ModelSpec {
        self.spec
    }

    /// Draws `(waiting time, event index)`, or `None` in an absorbing state.
    #[inline]
    pub fn next_event<R: Rng + ?Sized>(&self, state: &StateVector, rng: &mut R) -> Option<(f64, usize)> {
        let a = self.spec.propensities_int(&self.rates, state);
        let n = self.spec.n_events();
        let total: f64 = a[..n].iter().sum();
        if total <= 0.0 {
            return None;
        }
        let tau = (1.0 / open_closed_unit(rng)).ln() / total;
        let target = rng.random::<f64>() * total;
        let mut cum = 0.0;
        let mut j = n - 1;
        for (k, &rate) in a[..n].iter().enumerate() {
            cum += rate;
            if cum > target {
                j = k;
                break;
            }
        }
        // Rounding can leave `cum` a hair below `target`; fall back to the
        // last event with positive rate.
        while a[j] <= 0.0 {
            j -= 1;
        }
        Some((tau, j))
    }

    /// Advances `state` in place from `t` to `t_end`.
    #[inline]
    pub fn advance<R: Rng + ?Sized>(&self, state: &mut StateVector, t: f64, t_end: f64, rng: &mut R) {
        let mut t = t;
        while let Some((tau, j)) = self.next_event(state, rng) {
            t += tau;
            if t > t_end {
                break;
            }
            self.spec.apply_event(state, j);
        }
    }
}

/// Every event between `t0` and `t_end`.
pub fn gillespie_events<R: Rng + ?Sized>(
    spec: &ModelSpec,
    params: &Params,
    init: &StateVector,
    t0: f64,
    t_end: f64,
    rng: &mut R,
) -> Result<Vec<EventRecord>> {
    spec.check_state(init)?;
    if !(t_end > t0) {
        return Err(Error::InvalidArgument(format!(
            "t_end ({t_end}) must exceed t0 ({t0})"
        )));
    }
    let kernel = Kernel::new(spec, params)?;
    let mut state = *init;
    let mut t = t0;
    let mut out = Vec::new();
    while let Some((tau, j)) = kernel.next_event(&state, rng) {
        t += tau;
        if t > t_end {
            break;
        }
        spec.apply_event(&mut state, j);
        out.push(EventRecord {
            time: t,
            event_index: j,
            state_after: state,
        });
    }
    Ok(out)
}

/// Event-resolved path: the initial point, one point per event, and the final
/// state stamped at `t_end`.
pub fn gillespie_run<R: Rng + ?Sized>(
    spec: &ModelSpec,
    params: &Params,
    init: &StateVector,
    t0: f64,
    t_end: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let events = gillespie_events(spec, params, init, t0, t_end, rng)?;
    let mut times = Vec::with_capacity(events.len() + 2);
    let mut states = Vec::with_capacity(events.len() + 2);
    times.push(t0);
    states.push(*init);
    for e in &events {
        times.push(e.time);
        states.push(e.state_after);
    }
    // An event landing exactly on t_end already carries the final state.
    if *times.last().unwrap() < t_end {
        let last = *states.last().unwrap();
        times.push(t_end);
        states.push(last);
    }
    Ok(Trajectory {
        times,
        states,
        kind: TrajectoryKind::EventResolved,
    })
}

/// Endpoint of one interval of length `dt`.
pub fn gillespie_propagate<R: Rng + ?Sized>(
    spec: &ModelSpec,
    params: &Params,
    state: &StateVector,
    dt: f64,
    rng: &mut R,
) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    let kernel = Kernel::new(spec, params)?;
    let mut s = *state;
    kernel.advance(&mut s, 0.0, dt, rng);
    Ok(s)
}

/// Path recorded at each grid time (the state holding at that instant).
/// `init` is the state at `t0`; the grid must start at or after `t0`.
pub fn simulate_on_grid<R: Rng + ?Sized>(
    spec: &ModelSpec,
    params: &Params,
    init: &StateVector,
    t0: f64,
    grid: &[f64],
    rng: &mut R,
) -> Result<Trajectory> {
    spec.check_state(init)?;
    check_grid(grid)?;
    if grid[0] < t0 {
        return Err(Error::InvalidGrid(format!(
            "grid starts at {} before the initial time {t0}",
            grid[0]
        )));
    }
    let kernel = Kernel::new(spec, params)?;
    let mut state = *init;
    let mut t = t0;
    let mut states = Vec::with_capacity(grid.len());
    for &g in grid {
        if g > t {
            kernel.advance(&mut state, t, g, rng);
            t = g;
        }
        states.push(state);
    }
    Ok(Trajectory {
        times: grid.to_vec(),
        states,
        kind: TrajectoryKind::GridSampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sir_spec;
    use crate::rng::substream;

    #[test]
    fn absorbing_start_gives_two_point_path() {
        let spec = sir_spec(100).unwrap();
        let p = Params::sir(2.0, 1.0).unwrap();
        let init = spec.state(&[90, 0, 10]).unwrap();
        let mut rng = substream(0, "t", &[]);
        let traj = gillespie_run(&spec, &p, &init, 0.0, 5.0, &mut rng).unwrap();
        assert_eq!(traj.times, vec![0.0, 5.0]);
        assert_eq!(traj.states, vec![init, init]);
        assert_eq!(gillespie_propagate(&spec, &p, &init, 1.0, &mut rng).unwrap(), init);
    }

    #[test]
    fn sir_event_bookkeeping() {
        let spec = sir_spec(4820).unwrap();
        let p = Params::sir(2.0, 1.0).unwrap();
        let init = spec.state(&[4800, 20, 0]).unwrap();
        for seed in 0..20 {
            let mut rng = substream(seed, "bookkeeping", &[]);
            let events = gillespie_events(&spec, &p, &init, 0.0, 30.0, &mut rng).unwrap();
            let last = events.last().map(|e| e.state_after).unwrap_or(init);
            let infections = events.iter().filter(|e| e.event_index == 0).count() as u32;
            let removals = events.iter().filter(|e| e.event_index == 1).count() as u32;
            assert_eq!(infections, 4800 - last.get(0));
            assert_eq!(removals, last.get(2));
            let mut prev = 0.0;
            for e in &events {
                assert!(e.time > prev);
                prev = e.time;
                spec.check_state(&e.state_after).unwrap();
            }
            let traj = gillespie_run(&spec, &p, &init, 0.0, 30.0, &mut substream(seed, "bookkeeping", &[])).unwrap();
            assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
            assert!(traj.states.windows(2).all(|w| w[1].get(0) <= w[0].get(0) && w[1].get(2) >= w[0].get(2)));
            assert_eq!(*traj.last_state().unwrap(), last);
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let spec = sir_spec(4820).unwrap();
        let p = Params::sir(2.0, 1.0).unwrap();
        let init = spec.state(&[4800, 20, 0]).unwrap();
        let a = gillespie_run(&spec, &p, &init, 0.0, 15.0, &mut substream(9, "x", &[1])).unwrap();
        let b = gillespie_run(&spec, &p, &init, 0.0, 15.0, &mut substream(9, "x", &[1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_sampling_matches_event_path() {
        let spec = sir_spec(500).unwrap();
        let p = Params::sir(2.0, 1.0).unwrap();
        let init = spec.state(&[490, 10, 0]).unwrap();
        let grid: Vec<f64> = (0..=10).map(f64::from).collect();
        let path = simulate_on_grid(&spec, &p, &init, 0.0, &grid, &mut substream(3, "g", &[])).unwrap();
        assert_eq!(path.states[0], init);
        for s in &path.states {
            spec.check_state(s).unwrap();
        }
    }

    #[test]
    fn rejects_bad_horizon() {
        let spec = sir_spec(10).unwrap();
        let p = Params::sir(1.0, 1.0).unwrap();
        let init = spec.state(&[9, 1, 0]).unwrap();
        let mut rng = substream(0, "t", &[]);
        assert!(gillespie_run(&spec, &p, &init, 1.0, 1.0, &mut rng).is_err());
        assert!(gillespie_propagate(&spec, &p, &init, 0.0, &mut rng).is_err());
    }
}
