//! Birth–death process definitions.
//!
//! A process on the states `0..=N` is fully described by its per-state birth
//! (up) and death (down) rates. Rates are tabulated once at construction so the
//! simulator and the spectrum code only ever do table lookups.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest supported `N`.
pub const MAX_STATES: usize = 1_000_000;

/// A birth–death process on `{0, …, N}` with tabulated rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathSpec {
    n_states: usize,
    birth: Vec<f64>,
    death: Vec<f64>,
    label: String,
}

impl BirthDeathSpec {
    /// Symmetric Bessel-like process with equal indices at both walls.
    ///
    /// The raw rates are `N²/2 · (1 ± a/X ∓ a/(N−X))` with `a = ν + 1/2`.
    /// Negative values are clamped to zero, and the singular `1/X` and
    /// `1/(N−X)` terms at the walls are evaluated one lattice step inside
    /// (`X → max(X, 1)`), which keeps `λ⁺(0)` and `λ⁻(N)` finite.
    pub fn bessel_like(nu: f64, n_states: usize) -> Result<Self> {
        let k = nu - 0.5;
        if !nu.is_finite() || k < -1e-12 || (k - k.round()).abs() > 1e-12 {
            return Err(invalid(format!(
                "bessel-like index must be 1/2 + n with n >= 0, got {nu}"
            )));
        }
        if n_states < 4 {
            return Err(invalid(format!(
                "bessel-like process needs N >= 4, got {n_states}"
            )));
        }
        check_size(n_states)?;
        let a = k.round() + 1.0;
        let n = n_states as f64;
        let half_n2 = 0.5 * n * n;
        // g(X) is the birth rate at X; the death rate at X is g(N − X).
        let g = |x: usize| {
            let left = x.max(1) as f64;
            let right = (n_states - x).max(1) as f64;
            (half_n2 * (1.0 + a / left - a / right)).max(0.0)
        };
        let birth = (0..=n_states)
            .map(|x| if x == n_states { 0.0 } else { g(x) })
            .collect();
        let death = (0..=n_states)
            .map(|x| if x == 0 { 0.0 } else { g(n_states - x) })
            .collect();
        Ok(Self {
            n_states,
            birth,
            death,
            label: format!("bessel-like(nu={nu},N={n_states})"),
        })
    }

    /// Ornstein–Uhlenbeck-like process: `λ⁺ = N²(1 − X/N)`, `λ⁻ = N²·X/N`.
    pub fn ornstein_uhlenbeck(n_states: usize) -> Result<Self> {
        if n_states < 2 {
            return Err(invalid(format!(
                "ornstein-uhlenbeck process needs N >= 2, got {n_states}"
            )));
        }
        check_size(n_states)?;
        let n = n_states as f64;
        // N²(1 − X/N) = N·(N − X); the integer form keeps mirror symmetry exact.
        let birth = (0..=n_states).map(|x| n * (n_states - x) as f64).collect();
        let death = (0..=n_states).map(|x| n * x as f64).collect();
        Ok(Self {
            n_states,
            birth,
            death,
            label: format!("ou(N={n_states})"),
        })
    }

    /// Kirman-style imitation process: `λ⁺ = (N−X)(ε+X)`, `λ⁻ = X(ε+N−X)`.
    pub fn imitation(epsilon: f64, n_states: usize) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid(format!(
                "imitation epsilon must be positive, got {epsilon}"
            )));
        }
        if n_states < 2 {
            return Err(invalid(format!(
                "imitation process needs N >= 2, got {n_states}"
            )));
        }
        check_size(n_states)?;
        let rate = |movers: usize, others: usize| movers as f64 * (epsilon + others as f64);
        let birth = (0..=n_states).map(|x| rate(n_states - x, x)).collect();
        let death = (0..=n_states).map(|x| rate(x, n_states - x)).collect();
        Ok(Self {
            n_states,
            birth,
            death,
            label: format!("imitation(epsilon={epsilon},N={n_states})"),
        })
    }

    /// Builds a process from explicit rate tables of length `N + 1`.
    pub fn from_table(birth: Vec<f64>, death: Vec<f64>) -> Result<Self> {
        if birth.len() != death.len() {
            return Err(Error::InvalidRates(format!(
                "birth table has {} entries but death table has {}",
                birth.len(),
                death.len()
            )));
        }
        if birth.len() < 2 {
            return Err(Error::InvalidRates(
                "need at least two states".to_string(),
            ));
        }
        let n_states = birth.len() - 1;
        check_size(n_states)?;
        for (x, (&b, &d)) in birth.iter().zip(&death).enumerate() {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::InvalidRates(format!("birth rate {b} at state {x}")));
            }
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::InvalidRates(format!("death rate {d} at state {x}")));
            }
        }
        if death[0] != 0.0 {
            return Err(Error::InvalidRates(format!(
                "death rate at state 0 must be 0, got {}",
                death[0]
            )));
        }
        if birth[n_states] != 0.0 {
            return Err(Error::InvalidRates(format!(
                "birth rate at state N={n_states} must be 0, got {}",
                birth[n_states]
            )));
        }
        Ok(Self {
            n_states,
            birth,
            death,
            label: format!("table(N={n_states})"),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `N`; the state space is `0..=N`.
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn birth_rate(&self, x: usize) -> f64 {
        self.birth[x]
    }

    #[inline]
    pub fn death_rate(&self, x: usize) -> f64 {
        self.death[x]
    }

    pub fn birth_rates(&self) -> &[f64] {
        &self.birth
    }

    pub fn death_rates(&self) -> &[f64] {
        &self.death
    }

    /// The process seen through `X ↦ N − X`.
    pub fn mirrored(&self) -> Self {
        let mut birth = self.death.clone();
        let mut death = self.birth.clone();
        birth.reverse();
        death.reverse();
        Self {
            n_states: self.n_states,
            birth,
            death,
            label: format!("mirror({})", self.label),
        }
    }

    /// Checks `λ⁺(X) = λ⁻(N − X)` exactly for every state.
    pub fn is_mirror_symmetric(&self) -> bool {
        (0..=self.n_states).all(|x| self.birth[x] == self.death[self.n_states - x])
    }

    /// Lowest state reachable from `x` by downward moves alone.
    pub fn lowest_reachable(&self, x: usize) -> usize {
        let mut lo = x;
        while lo > 0 && self.death[lo] > 0.0 {
            lo -= 1;
        }
        lo
    }

    /// Highest state reachable from `x` by upward moves alone.
    pub fn highest_reachable(&self, x: usize) -> usize {
        let mut hi = x;
        while hi < self.n_states && self.birth[hi] > 0.0 {
            hi += 1;
        }
        hi
    }

    /// Checks that a passage from `start` to `target` terminates with
    /// probability one.
    ///
    /// For an upward passage every state the walk can fall back to must be
    /// able to step up again; symmetrically for downward passages.
    pub fn check_passage(&self, start: usize, target: usize) -> Result<()> {
        let n = self.n_states;
        if start > n {
            return Err(Error::OutOfRange {
                what: "start state",
                value: start as i64,
                lo: 0,
                hi: n as i64,
            });
        }
        if target > n {
            return Err(Error::OutOfRange {
                what: "target state",
                value: target as i64,
                lo: 0,
                hi: n as i64,
            });
        }
        if start == target {
            return Err(invalid("start and target states coincide"));
        }
        if start < target {
            let lo = self.lowest_reachable(start);
            if let Some(k) = (lo..target).find(|&k| self.birth[k] <= 0.0) {
                return Err(Error::Unreachable {
                    from: start,
                    to: target,
                    reason: format!("birth rate vanishes at state {k}"),
                });
            }
        } else {
            let hi = self.highest_reachable(start);
            if let Some(k) = (target + 1..=hi).find(|&k| self.death[k] <= 0.0) {
                return Err(Error::Unreachable {
                    from: start,
                    to: target,
                    reason: format!("death rate vanishes at state {k}"),
                });
            }
        }
        Ok(())
    }

    /// Stationary distribution from the detailed-balance product form,
    /// restricted to the closed communicating class.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        let n = self.n_states;
        let (lo, hi) = self.closed_class()?;
        let mut log_w = vec![f64::NEG_INFINITY; n + 1];
        log_w[lo] = 0.0;
        for x in lo..hi {
            log_w[x + 1] = log_w[x] + self.birth[x].ln() - self.death[x + 1].ln();
        }
        let max = log_w[lo..=hi]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = log_w.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= total);
        Ok(p)
    }

    /// The unique closed communicating class `[lo, hi]`.
    fn closed_class(&self) -> Result<(usize, usize)> {
        let n = self.n_states;
        let mut classes = Vec::new();
        let mut lo = 0;
        while lo <= n {
            let mut hi = lo;
            while hi < n && self.birth[hi] > 0.0 && self.death[hi + 1] > 0.0 {
                hi += 1;
            }
            let closed_below = lo == 0 || self.death[lo] == 0.0;
            let closed_above = hi == n || self.birth[hi] == 0.0;
            if closed_below && closed_above {
                classes.push((lo, hi));
            }
            lo = hi + 1;
        }
        match classes.as_slice() {
            [one] => Ok(*one),
            [] => Err(Error::InvalidRates("no closed communicating class".into())),
            _ => Err(Error::InvalidRates(format!(
                "{} closed communicating classes; stationary law is not unique",
                classes.len()
            ))),
        }
    }

    /// Writes the `state,birth_rate,death_rate` table.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["state", "birth_rate", "death_rate"])?;
        for x in 0..=self.n_states {
            wtr.write_record([
                x.to_string(),
                self.birth[x].to_string(),
                self.death[x].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            state: usize,
            birth_rate: f64,
            death_rate: f64,
        }
        let mut rdr = csv::Reader::from_reader(r);
        let mut birth = Vec::new();
        let mut death = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            if row.state != i {
                return Err(Error::InvalidRates(format!(
                    "row {i} lists state {}; states must be 0, 1, 2, … in order",
                    row.state
                )));
            }
            birth.push(row.birth_rate);
            death.push(row.death_rate);
        }
        Self::from_table(birth, death)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Ok(Self::read_csv(file)?.with_label(format!("table({})", path.display())))
    }
}

fn check_size(n_states: usize) -> Result<()> {
    if n_states > MAX_STATES {
        return Err(invalid(format!(
            "N = {n_states} exceeds the supported maximum {MAX_STATES}"
        )));
    }
    Ok(())
}

/// Maps a threshold level `h ∈ (0, 1)` to the lattice state `round(h·N)`.
pub fn level_state(h: f64, n_states: usize) -> Result<usize> {
    if !(h > 0.0 && h < 1.0) {
        return Err(invalid(format!("threshold h must lie in (0, 1), got {h}")));
    }
    let n = (h * n_states as f64).round() as usize;
    if n == 0 || n >= n_states {
        return Err(invalid(format!(
            "threshold h = {h} maps to boundary state {n} for N = {n_states}"
        )));
    }
    Ok(n)
}
