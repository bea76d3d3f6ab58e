use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::{DurationKind, DurationSample, JumpTable};
use crate::error::{invalid, Error, Result};
use crate::process::BirthDeathSpec;

/// Piecewise-constant path: `states[i]` is held on `[times[i], times[i+1])`,
/// the last state until `end_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub times: Vec<f64>,
    pub end_time: f64,
}

impl Trajectory {
    pub fn new(states: Vec<usize>, times: Vec<f64>, end_time: f64) -> Result<Self> {
        if states.len() != times.len() {
            return Err(invalid("trajectory needs one entry time per state"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("trajectory event times must be strictly increasing"));
        }
        if let Some(&last) = times.last() {
            if !(end_time >= last) {
                return Err(invalid("trajectory end time precedes its last event"));
            }
        }
        Ok(Self {
            states,
            times,
            end_time,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    /// Drawn from the stationary law of the chain.
    Stationary,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Events(u64),
    Time(f64),
}

/// Streaming burst/inter-burst extraction at a threshold state.
///
/// Feed `(state, entry_time)` pairs in order; only intervals bounded by two
/// observed threshold crossings are kept.
#[derive(Debug, Clone)]
pub struct CrossingCollector {
    threshold: usize,
    above: Option<bool>,
    crossed: bool,
    since: f64,
    pub bursts: Vec<f64>,
    pub inter_bursts: Vec<f64>,
}

impl CrossingCollector {
    pub fn new(threshold: usize) -> Self {
        Self {
            threshold,
            above: None,
            crossed: false,
            since: 0.0,
            bursts: Vec::new(),
            inter_bursts: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, state: usize, time: f64) {
        let now_above = state >= self.threshold;
        match self.above {
            None => self.above = Some(now_above),
            Some(was) if was != now_above => {
                if self.crossed {
                    let d = time - self.since;
                    if was {
                        self.bursts.push(d);
                    } else {
                        self.inter_bursts.push(d);
                    }
                }
                self.crossed = true;
                self.since = time;
                self.above = Some(now_above);
            }
            Some(_) => {}
        }
    }
}

/// Splits a path into complete sojourns in `X ≥ n` (bursts) and `X < n`
/// (inter-bursts). The partial intervals at both ends are dropped.
pub fn extract_durations(traj: &Trajectory, threshold_state: usize) -> Result<(DurationSample, DurationSample)> {
    if traj.is_empty() {
        return Err(invalid("cannot extract durations from an empty trajectory"));
    }
    let mut c = CrossingCollector::new(threshold_state);
    for (&s, &t) in traj.states.iter().zip(&traj.times) {
        c.push(s, t);
    }
    Ok(finish(c, "trajectory", 0))
}

fn finish(c: CrossingCollector, label: &str, seed: u64) -> (DurationSample, DurationSample) {
    let mk = |durations: Vec<f64>, kind| {
        let n = durations.len();
        DurationSample {
            durations,
            kind,
            threshold_state: c.threshold,
            spec_label: label.to_string(),
            rng_seed: seed,
            n_requested: n,
        }
    };
    (
        mk(c.bursts.clone(), DurationKind::Burst),
        mk(c.inter_bursts.clone(), DurationKind::InterBurst),
    )
}

fn initial_state<R: Rng>(spec: &BirthDeathSpec, init: InitialState, rng: &mut R) -> Result<usize> {
    match init {
        InitialState::Fixed(x) if x <= spec.n_states() => Ok(x),
        InitialState::Fixed(x) => Err(Error::OutOfRange {
            what: "initial state",
            value: x as i64,
            lo: 0,
            hi: spec.n_states() as i64,
        }),
        InitialState::Stationary => {
            let p = spec.stationary_distribution()?;
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut last = 0;
            for (x, &px) in p.iter().enumerate() {
                if px > 0.0 {
                    last = x;
                    acc += px;
                    if u < acc {
                        return Ok(x);
                    }
                }
            }
            Ok(last)
        }
    }
}

/// One continuous-time path of the chain, single stream `(seed, 0)`.
pub fn simulate_trajectory(
    spec: &BirthDeathSpec,
    init: InitialState,
    horizon: Horizon,
    rng_seed: u64,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let table = JumpTable::new(spec);
    let mut x = initial_state(spec, init, &mut rng)?;
    let mut t = 0.0;
    let mut states = vec![x];
    let mut times = vec![0.0];
    let mut events = 0u64;
    loop {
        if let Horizon::Events(k) = horizon {
            if events >= k {
                return Ok(Trajectory {
                    states,
                    times,
                    end_time: t,
                });
            }
        }
        let total = table.total[x];
        if total <= 0.0 {
            let end = match horizon {
                Horizon::Time(tmax) => tmax,
                Horizon::Events(_) => t,
            };
            return Ok(Trajectory {
                states,
                times,
                end_time: end,
            });
        }
        let wait: f64 = rng.sample(Exp1);
        let next_t = t + wait / total;
        if let Horizon::Time(tmax) = horizon {
            if next_t >= tmax {
                return Ok(Trajectory {
                    states,
                    times,
                    end_time: tmax,
                });
            }
        }
        t = next_t;
        let u: f64 = rng.random();
        x = if u < table.p_up[x] { x + 1 } else { x - 1 };
        states.push(x);
        times.push(t);
        events += 1;
    }
}

/// Runs one long path and keeps complete sojourns at `threshold_state`
/// until `n_bursts` bursts have been observed, without storing the path.
pub fn collect_crossings(
    spec: &BirthDeathSpec,
    threshold_state: usize,
    rng_seed: u64,
    n_bursts: usize,
    init: InitialState,
    step_cap: u64,
) -> Result<(DurationSample, DurationSample)> {
    if threshold_state == 0 || threshold_state > spec.n_states() {
        return Err(Error::OutOfRange {
            what: "threshold state",
            value: threshold_state as i64,
            lo: 1,
            hi: spec.n_states() as i64,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let table = JumpTable::new(spec);
    let mut x = initial_state(spec, init, &mut rng)?;
    let mut t = 0.0;
    let mut c = CrossingCollector::new(threshold_state);
    c.push(x, t);
    let mut steps = 0u64;
    while c.bursts.len() < n_bursts {
        let total = table.total[x];
        if total <= 0.0 {
            return Err(Error::Unreachable {
                from: x,
                to: threshold_state,
                reason: "path reached an absorbing state".into(),
            });
        }
        let wait: f64 = rng.sample(Exp1);
        t += wait / total;
        let u: f64 = rng.random();
        x = if u < table.p_up[x] { x + 1 } else { x - 1 };
        c.push(x, t);
        steps += 1;
        if steps >= step_cap {
            return Err(Error::StepCapExceeded(step_cap));
        }
    }
    c.bursts.truncate(n_bursts);
    Ok(finish(c, spec.label(), rng_seed))
}
