//! Continuous Bessel process reference: the first-passage series for
//! half-integer index, its integral approximation, and a diffusion simulator.

use std::f64::consts::{FRAC_2_PI, PI};
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::approx::erf::erfcx;
use crate::error::{invalid, Result};
use crate::simulate::{substream, with_workers, DurationKind, DurationSample};

/// Returns `n` when `nu = n + 1/2`.
fn half_integer_order(nu: f64) -> Result<usize> {
    let n = nu - 0.5;
    if !(nu.is_finite() && nu >= 0.5) || (n - n.round()).abs() > 1e-12 {
        return Err(invalid(format!(
            "only half-integer indices 1/2, 3/2, ... are supported, got {nu}"
        )));
    }
    Ok(n.round() as usize)
}

/// Ascending series `Σ (−1)^m (x/2)^{2m+ν} / (m! Γ(m+ν+1))`.
fn j_series(n: usize, x: f64, terms: usize) -> f64 {
    let nu = n as f64 + 0.5;
    // Γ(n + 3/2) = √π · ∏_{i=0}^{n} (i + 1/2)
    let gamma = PI.sqrt() * (0..=n).map(|i| i as f64 + 0.5).product::<f64>();
    let q = -(x * x) / 4.0;
    let mut term = (x / 2.0).powf(nu) / gamma;
    let mut sum = term;
    for m in 1..terms {
        term *= q / (m as f64 * (m as f64 + nu));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Upward recurrence from `J_{1/2}` and `J_{3/2}`.
fn j_recurrence(n: usize, x: f64) -> f64 {
    let s = (FRAC_2_PI / x).sqrt();
    let (sin, cos) = x.sin_cos();
    let mut prev = s * sin;
    if n == 0 {
        return prev;
    }
    let mut cur = s * (sin / x - cos);
    for k in 1..n {
        let nu = k as f64 + 0.5;
        let next = 2.0 * nu / x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Bessel function of the first kind for half-integer `nu`, `x > 0`.
pub fn bessel_j_half(nu: f64, x: f64) -> Result<f64> {
    let n = half_integer_order(nu)?;
    if !(x.is_finite() && x > 0.0) {
        return Err(invalid(format!("Bessel argument must be positive, got {x}")));
    }
    Ok(j_half(n, x))
}

fn j_half(n: usize, x: f64) -> f64 {
    // the recurrence loses digits below the turning point
    if x < n as f64 + 1.0 {
        j_series(n, x, 200)
    } else {
        j_recurrence(n, x)
    }
}

fn bisect_zero(n: usize, mut a: f64, mut b: f64) -> f64 {
    let mut fa = j_half(n, a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= 4.0 * f64::EPSILON * m {
            break;
        }
        let fm = j_half(n, m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// The first `k_max` positive zeros of `J_nu`.
pub fn bessel_zeros(nu: f64, k_max: usize) -> Result<Vec<f64>> {
    let n = half_integer_order(nu)?;
    let mut out = Vec::with_capacity(k_max);
    if nu <= 2.5 {
        // one zero per McMahon bracket (k + ν/2 − 1/4)π ± π/2
        for k in 1..=k_max {
            let guess = (k as f64 + nu / 2.0 - 0.25) * PI;
            let lo = (guess - PI / 2.0).max(1e-3);
            out.push(bisect_zero(n, lo, guess + PI / 2.0));
        }
        return Ok(out);
    }
    // zeros lie above ν and are at least π apart less a little; scan finely
    let step = 0.25;
    let mut a = nu;
    let mut fa = j_half(n, a);
    while out.len() < k_max {
        let b = a + step;
        let fb = j_half(n, b);
        if (fa > 0.0) != (fb > 0.0) {
            out.push(bisect_zero(n, a, b));
        }
        a = b;
        fa = fb;
    }
    Ok(out)
}

/// The `k`-th positive zero of `J_nu`, counting from 1.
pub fn bessel_zero(nu: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid("zero index counts from 1"));
    }
    Ok(*bessel_zeros(nu, k)?.last().expect("k ≥ 1"))
}

/// Passage from `y0` up to `h` of the Bessel process of index `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesselFptSpec {
    pub nu: f64,
    pub h: f64,
    pub y0: f64,
    pub k_max: usize,
}

impl BesselFptSpec {
    pub fn new(nu: f64, h: f64, y0: f64, k_max: usize) -> Result<Self> {
        let s = Self { nu, h, y0, k_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        half_integer_order(self.nu)?;
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(invalid(format!("threshold h must be positive, got {}", self.h)));
        }
        if !(self.y0 > 0.0 && self.y0 < self.h) {
            return Err(invalid(format!(
                "start y0 must lie in (0, h) = (0, {}), got {}",
                self.h, self.y0
            )));
        }
        if self.k_max < 10 {
            return Err(invalid(format!("k_max must be at least 10, got {}", self.k_max)));
        }
        Ok(())
    }

    pub fn series(&self) -> Result<BesselSeries> {
        BesselSeries::new(self)
    }
}

/// One evaluation of the truncated series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    /// Magnitude of the last retained term.
    pub truncation_error: f64,
    /// Set when the last term exceeds 10⁻⁶ of the sum.
    pub warn: bool,
}

/// The passage-time series with zeros and coefficients precomputed.
///
/// `p(θ) = Σ cₖ exp(−rₖθ)` with `rₖ = j²_{ν,k}/(2h²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselSeries {
    pub spec: BesselFptSpec,
    pub zeros: Vec<f64>,
    pub rates: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl BesselSeries {
    pub fn new(spec: &BesselFptSpec) -> Result<Self> {
        spec.validate()?;
        let n = half_integer_order(spec.nu)?;
        let zeros = bessel_zeros(spec.nu, spec.k_max)?;
        let BesselFptSpec { nu, h, y0, .. } = *spec;
        let scale = h.powf(nu - 2.0) / y0.powf(nu);
        let rates = zeros.iter().map(|j| j * j / (2.0 * h * h)).collect();
        let coefficients = zeros
            .iter()
            .map(|&j| scale * j * j_half(n, y0 / h * j) / j_half(n + 1, j))
            .collect();
        Ok(Self {
            spec: *spec,
            zeros,
            rates,
            coefficients,
        })
    }

    fn sum(&self, theta: f64, power: i32) -> SeriesValue {
        let mut sum = 0.0;
        let mut last = 0.0;
        for (c, r) in self.coefficients.iter().zip(&self.rates) {
            last = c / r.powi(power) * (-r * theta).exp();
            sum += last;
        }
        let truncation_error = last.abs();
        SeriesValue {
            value: sum,
            truncation_error,
            warn: truncation_error > 1e-6 * sum.abs(),
        }
    }

    pub fn density(&self, theta: f64) -> Result<SeriesValue> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(invalid(format!("θ must be positive, got {theta}")));
        }
        Ok(self.sum(theta, 0))
    }

    /// `P(T > θ)` from the termwise-integrated series.
    pub fn survival(&self, theta: f64) -> Result<SeriesValue> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(invalid(format!("θ must be positive, got {theta}")));
        }
        Ok(self.sum(theta, 1))
    }

    /// Mean passage time, `Σ cₖ/rₖ²`.
    pub fn mean(&self) -> f64 {
        self.coefficients
            .iter()
            .zip(&self.rates)
            .map(|(c, r)| c / (r * r))
            .sum()
    }

    /// The `k = 1` term alone.
    pub fn leading_term(&self, theta: f64) -> f64 {
        self.coefficients[0] * (-self.rates[0] * theta).exp()
    }
}

/// `series_density` for a one-off evaluation.
pub fn series_density(spec: &BesselFptSpec, theta: f64) -> Result<SeriesValue> {
    BesselSeries::new(spec)?.density(theta)
}

/// The integral approximation with its normalization on `[θ_min, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralApprox {
    pub nu: f64,
    pub h: f64,
    pub theta_min: f64,
    /// First zero `j_{ν,1}`.
    pub j1: f64,
    /// `∫_{θ_min}^∞` of the bracket, scaled by `exp(j₁²θ_min/(2h²))`.
    scaled_norm: f64,
}

impl IntegralApprox {
    pub fn new(nu: f64, h: f64, theta_min: f64) -> Result<Self> {
        let j1 = bessel_zero(nu, 1)?;
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid(format!("threshold h must be positive, got {h}")));
        }
        if !(theta_min.is_finite() && theta_min > 0.0) {
            return Err(invalid(format!("θ_min must be positive, got {theta_min}")));
        }
        // the bracket equals ∫_{j₁}^∞ x² e^{−x²θ/(2h²)} dx, so its θ-integral
        // is 2h² ∫_{j₁}^∞ e^{−x²θ_min/(2h²)} dx
        let c0 = theta_min / (2.0 * h * h);
        let scaled_norm = h * h * PI.sqrt() * erfcx(j1 * c0.sqrt()) / c0.sqrt();
        Ok(Self {
            nu,
            h,
            theta_min,
            j1,
            scaled_norm,
        })
    }

    fn rate(&self) -> f64 {
        self.j1 * self.j1 / (2.0 * self.h * self.h)
    }

    /// The exponential and erfc terms of the bracket, both scaled by
    /// `exp(j₁²θ_min/(2h²))`.
    pub fn terms(&self, theta: f64) -> (f64, f64) {
        let h = self.h;
        let damp = (-self.rate() * (theta - self.theta_min)).exp();
        let z = self.j1 * theta.sqrt() / (2f64.sqrt() * h);
        let first = damp * h * h * self.j1 / theta;
        let second = damp * (PI / 2.0).sqrt() * h.powi(3) * erfcx(z) / theta.powf(1.5);
        (first, second)
    }

    pub fn density(&self, theta: f64) -> Result<f64> {
        if !(theta >= self.theta_min) || !theta.is_finite() {
            return Err(invalid(format!(
                "θ = {theta} lies below θ_min = {} where the approximation diverges",
                self.theta_min
            )));
        }
        let (a, b) = self.terms(theta);
        Ok((a + b) / self.scaled_norm)
    }
}

/// Normalized integral approximation at `theta ≥ theta_min`.
pub fn integral_approx_density(nu: f64, h: f64, theta: f64, theta_min: f64) -> Result<f64> {
    IntegralApprox::new(nu, h, theta_min)?.density(theta)
}

/// Writes `theta,pdf,truncation_error` rows.
pub fn write_density_csv<W: Write>(rows: &[(f64, f64, f64)], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["theta", "pdf", "truncation_error"])?;
    for (t, p, e) in rows {
        wtr.write_record([t.to_string(), p.to_string(), e.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reflections allowed in one simulated passage before giving up.
pub const MAX_REFLECTIONS: u64 = 1_000_000;

/// Euler–Maruyama passages of `dx = (ν+½)/x dt + dW` from `y0` to `h`.
///
/// Between grid points the path is treated as a Brownian bridge, so a
/// crossing of `h` inside a step is detected with probability
/// `exp(−2(h−x)(h−x')/dt)`.
pub fn simulate_bessel_em(
    nu: f64,
    h: f64,
    y0: f64,
    dt: f64,
    rng_seed: u64,
    n_samples: usize,
) -> Result<DurationSample> {
    simulate_bessel_em_with(nu, h, y0, dt, rng_seed, n_samples, None)
}

pub fn simulate_bessel_em_with(
    nu: f64,
    h: f64,
    y0: f64,
    dt: f64,
    rng_seed: u64,
    n_samples: usize,
    workers: Option<usize>,
) -> Result<DurationSample> {
    BesselFptSpec::new(nu, h, y0, 10)?;
    if !(dt > 0.0 && dt <= 1e-4 * h * h) {
        return Err(invalid(format!(
            "time step must lie in (0, 1e-4·h²] = (0, {}], got {dt}",
            1e-4 * h * h
        )));
    }
    let drift = nu + 0.5;
    let sdt = dt.sqrt();
    let one = |j: usize| -> Result<f64> {
        let mut rng = substream(rng_seed, j as u64);
        let mut x = y0;
        let mut t = 0.0;
        let mut reflections = 0u64;
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let mut nx = x + drift * dt / x + sdt * z;
            if nx >= h {
                return Ok(t + dt * (h - x) / (nx - x));
            }
            if nx <= 0.0 {
                nx = -nx;
                reflections += 1;
                if reflections > MAX_REFLECTIONS {
                    return Err(invalid(format!(
                        "sample {j}: more than {MAX_REFLECTIONS} reflections at the origin"
                    )));
                }
            }
            let gap = (h - x) * (h - nx);
            if gap < 20.0 * dt {
                let u: f64 = rng.random();
                if u < (-2.0 * gap / dt).exp() {
                    return Ok(t + 0.5 * dt);
                }
            }
            x = nx;
            t += dt;
        }
    };
    let durations = with_workers(workers, || {
        (0..n_samples)
            .into_par_iter()
            .map(one)
            .collect::<Result<Vec<f64>>>()
    })??;
    Ok(DurationSample {
        durations,
        kind: DurationKind::InterBurst,
        threshold_state: 0,
        spec_label: format!("bessel(nu={nu}, h={h}, y0={y0}, dt={dt})"),
        rng_seed,
        n_requested: n_samples,
    })
}
