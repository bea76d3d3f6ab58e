//! Closed-form approximations of first-passage densities.
//!
//! The passage density from `n − 1` to `n` is a sum of exponentials whose
//! rates are the eigenvalues of the generator truncated at `n`. When `√λᵢ`
//! grows linearly in the rank, that sum is well approximated by the integral
//!
//! ```text
//! I(θ; a, b) = 1/(√b − √a) ∫_{√a}^{√b} x² exp(−x²θ) dx,
//! ```
//!
//! and splitting the slowest mode off gives the four-parameter mixture
//! `ρ·λ₁·exp(−λ₁θ) + (1 − ρ)·I(θ; λ₂, λₘ)`, with `ρ` fixed by the exact mean
//! passage time.

pub mod erf;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::process::BirthDeathSpec;
use crate::quad::gauss_legendre;
use crate::spectrum::TruncatedGenerator;

pub use erf::{erf, erfc, erfcx};

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Beyond this value of `√(aθ)` the closed form is evaluated with `erfcx`.
const SCALED_SWITCH: f64 = 25.0;

/// Below this value of `θ(b − a)` the closed form loses digits to
/// cancellation and the integral is taken by quadrature instead.
const CANCELLATION_SWITCH: f64 = 1.0;

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && a > 0.0) {
        return Err(invalid(format!("rates must be positive and finite, got {a}, {b}")));
    }
    if a >= b {
        return Err(Error::DegenerateInterval { lower: a, upper: b });
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(invalid(format!("theta must be non-negative, got {theta}")));
    }
    Ok(())
}

/// The integral density `I(θ; a, b)`; normalized on `(0, ∞)` with mean `1/√(ab)`.
pub fn i_density(theta: f64, a: f64, b: f64) -> Result<f64> {
    check_interval(a, b)?;
    check_theta(theta)?;
    let (sa, sb) = (a.sqrt(), b.sqrt());
    if theta * (b - a) <= CANCELLATION_SWITCH {
        let f = |x: f64| x * x * (-x * x * theta).exp();
        return Ok(gauss_legendre(&f, sa, sb) / (sb - sa));
    }
    let (ra, rb) = ((a * theta).sqrt(), (b * theta).sqrt());
    let t32 = theta * theta.sqrt();
    let value = if ra > SCALED_SWITCH {
        // every term carries exp(−aθ); factor it out
        let decay = (-(b - a) * theta).exp();
        let bracket = 2.0 * (sa - sb * decay) / theta
            + SQRT_PI * (erfcx(ra) - decay * erfcx(rb)) / t32;
        (-a * theta).exp() * bracket
    } else {
        2.0 * (sa * (-a * theta).exp() - sb * (-b * theta).exp()) / theta
            + SQRT_PI * (erfc(ra) - erfc(rb)) / t32
    };
    Ok((value / (4.0 * (sb - sa))).max(0.0))
}

/// `P(T > θ)` under `I(·; a, b)`.
pub fn i_survival(theta: f64, a: f64, b: f64) -> Result<f64> {
    check_interval(a, b)?;
    check_theta(theta)?;
    let (sa, sb) = (a.sqrt(), b.sqrt());
    if theta * (b - a) <= CANCELLATION_SWITCH {
        let f = |x: f64| (-x * x * theta).exp();
        return Ok(gauss_legendre(&f, sa, sb) / (sb - sa));
    }
    let (ra, rb) = ((a * theta).sqrt(), (b * theta).sqrt());
    let diff = if ra > SCALED_SWITCH {
        (-a * theta).exp() * (erfcx(ra) - (-(b - a) * theta).exp() * erfcx(rb))
    } else if ra > 0.5 {
        erfc(ra) - erfc(rb)
    } else {
        erf(rb) - erf(ra)
    };
    Ok((SQRT_PI * diff / (2.0 * theta.sqrt() * (sb - sa))).clamp(0.0, 1.0))
}

/// First-order approximation: the integral density over the whole spectrum.
pub fn first_order_density(theta: f64, lambda_min: f64, lambda_max: f64) -> Result<f64> {
    i_density(theta, lambda_min, lambda_max)
}

/// Parameters of the second-order mixture density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub rho: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_m: f64,
}

impl MixtureParams {
    pub fn new(rho: f64, lambda1: f64, lambda2: f64, lambda_m: f64) -> Result<Self> {
        let p = Self {
            rho,
            lambda1,
            lambda2,
            lambda_m,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.rho <= 1.0) {
            return Err(invalid(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if !(self.lambda1.is_finite() && self.lambda1 > 0.0) {
            return Err(invalid(format!("lambda1 must be positive, got {}", self.lambda1)));
        }
        if !(self.lambda1 <= self.lambda2) {
            return Err(invalid(format!(
                "lambda1 = {} exceeds lambda2 = {}",
                self.lambda1, self.lambda2
            )));
        }
        check_interval(self.lambda2, self.lambda_m)
    }

    /// Mean of the mixture.
    pub fn mean(&self) -> f64 {
        self.rho / self.lambda1 + (1.0 - self.rho) / (self.lambda2 * self.lambda_m).sqrt()
    }
}

/// Second-order approximation `ρλ₁e^{−λ₁θ} + (1 − ρ)·I(θ; λ₂, λₘ)`.
pub fn second_order_density(theta: f64, p: &MixtureParams) -> Result<f64> {
    p.validate()?;
    check_theta(theta)?;
    let slow = p.rho * p.lambda1 * (-p.lambda1 * theta).exp();
    if p.rho == 1.0 {
        return Ok(slow);
    }
    Ok(slow + (1.0 - p.rho) * i_density(theta, p.lambda2, p.lambda_m)?)
}

pub fn second_order_survival(theta: f64, p: &MixtureParams) -> Result<f64> {
    p.validate()?;
    check_theta(theta)?;
    let slow = p.rho * (-p.lambda1 * theta).exp();
    if p.rho == 1.0 {
        return Ok(slow);
    }
    Ok(slow + (1.0 - p.rho) * i_survival(theta, p.lambda2, p.lambda_m)?)
}

pub fn second_order_cdf(theta: f64, p: &MixtureParams) -> Result<f64> {
    Ok(1.0 - second_order_survival(theta, p)?)
}

/// Weight of the slowest mode fixed by matching the mixture mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    /// Weight after clamping to `[0, 1]`.
    pub rho: f64,
    /// Unclamped value.
    pub raw: f64,
    pub clamped: bool,
}

pub fn rho_from_mean(exact_mean: f64, lambda1: f64, lambda2: f64, lambda_m: f64) -> Result<RhoEstimate> {
    if !(exact_mean.is_finite() && exact_mean > 0.0) {
        return Err(invalid(format!("mean must be positive, got {exact_mean}")));
    }
    if !(lambda1 > 0.0 && lambda1 <= lambda2) {
        return Err(invalid(format!(
            "need 0 < lambda1 <= lambda2, got {lambda1}, {lambda2}"
        )));
    }
    check_interval(lambda2, lambda_m)?;
    let s = (lambda2 * lambda_m).sqrt();
    let denom = lambda1 - s;
    if denom == 0.0 {
        return Err(Error::DegenerateWeight(lambda1));
    }
    let raw = lambda1 * (1.0 - s * exact_mean) / denom;
    let rho = raw.clamp(0.0, 1.0);
    Ok(RhoEstimate {
        rho,
        raw,
        clamped: rho != raw,
    })
}

/// Mean passage time from `threshold_state − 1` to `threshold_state`.
pub fn exact_mean_hitting(spec: &BirthDeathSpec, threshold_state: usize) -> Result<f64> {
    Ok(exact_hitting_raw_moments(spec, threshold_state, 1)?[0])
}

/// Raw moments `E[Tᵐ]`, `m = 1..=max_order`, of the passage time from
/// `threshold_state − 1` to `threshold_state`.
///
/// With `ψₖ(s) = 1 − E[exp(−sTₖ)]` for the step `k → k+1`,
/// `ψₖ = (λ⁻ₖψₖ₋₁ + s)/(λ⁺ₖ + λ⁻ₖψₖ₋₁ + s)`; the recursion is carried out
/// on power series truncated at order `max_order`. At first order it reduces
/// to `mₖ = 1/λ⁺ₖ + (λ⁻ₖ/λ⁺ₖ)·mₖ₋₁`.
pub fn exact_hitting_raw_moments(
    spec: &BirthDeathSpec,
    threshold_state: usize,
    max_order: usize,
) -> Result<Vec<f64>> {
    let n = threshold_state;
    if n < 1 || n > spec.n_states() {
        return Err(Error::OutOfRange {
            what: "threshold state",
            value: n as i64,
            lo: 1,
            hi: spec.n_states() as i64,
        });
    }
    if !(1..=8).contains(&max_order) {
        return Err(invalid(format!("moment order must be in 1..=8, got {max_order}")));
    }
    spec.check_passage(n - 1, n)?;
    let order = max_order + 1;
    let lo = spec.lowest_reachable(n - 1);
    // series coefficients of ψ in powers of s; ψ(0) = 0
    let mut psi = vec![0.0; order];
    for k in lo..n {
        let up = spec.birth_rate(k);
        let down = spec.death_rate(k);
        let mut num: Vec<f64> = psi.iter().map(|c| down * c).collect();
        num[1] += 1.0;
        let mut den = num.clone();
        den[0] += up;
        psi = series_div(&num, &den);
    }
    let mut out = Vec::with_capacity(max_order);
    let mut fact = 1.0;
    for m in 1..=max_order {
        fact *= m as f64;
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        out.push(sign * fact * psi[m]);
    }
    Ok(out)
}

fn series_div(num: &[f64], den: &[f64]) -> Vec<f64> {
    let n = num.len();
    let mut q = vec![0.0; n];
    for i in 0..n {
        let mut acc = num[i];
        for j in 1..=i {
            acc -= den[j] * q[i - j];
        }
        q[i] = acc / den[0];
    }
    q
}

/// Mean plus raw and central moments of a passage-time law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingMoments {
    pub mean: f64,
    /// `E[θᵐ]` for `m = 1, 2, …`.
    pub raw_moments: Vec<f64>,
    /// Variance, third and fourth central moments (as many as available).
    pub central_moments: Vec<f64>,
}

impl HittingMoments {
    pub fn from_raw(raw: Vec<f64>) -> Self {
        let mu = raw[0];
        let mut central = Vec::new();
        if raw.len() >= 2 {
            central.push(raw[1] - mu * mu);
        }
        if raw.len() >= 3 {
            central.push(raw[2] - 3.0 * mu * raw[1] + 2.0 * mu.powi(3));
        }
        if raw.len() >= 4 {
            central.push(
                raw[3] - 4.0 * mu * raw[2] + 6.0 * mu * mu * raw[1] - 3.0 * mu.powi(4),
            );
        }
        Self {
            mean: mu,
            raw_moments: raw,
            central_moments: central,
        }
    }

    /// Mean, variance, third and fourth central moment.
    pub fn matched(&self) -> Option<[f64; 4]> {
        match self.central_moments.as_slice() {
            [v, m3, m4] => Some([self.mean, *v, *m3, *m4]),
            _ => None,
        }
    }
}

/// Exact moments of the passage time from `threshold_state − 1`.
pub fn exact_hitting_moments(spec: &BirthDeathSpec, threshold_state: usize) -> Result<HittingMoments> {
    Ok(HittingMoments::from_raw(exact_hitting_raw_moments(
        spec,
        threshold_state,
        4,
    )?))
}

/// `∫_{√a}^{√b} x^{−2m} dx / (√b − √a)` without cancellation between the ends.
fn inverse_power_mean(a: f64, b: f64, m: i32) -> f64 {
    let (s, t) = (a.sqrt(), b.sqrt());
    let k = 2 * m - 1;
    // (s^{−k} − t^{−k})/(t − s) = Σ_{j=0}^{k−1} t^j s^{k−1−j} / (st)^k
    let sum: f64 = (0..k).map(|j| t.powi(j) * s.powi(k - 1 - j)).sum();
    sum / (s * t).powi(k) / k as f64
}

/// Analytic moments of the mixture up to `max_order ≤ 4`.
pub fn mixture_moments(p: &MixtureParams, max_order: usize) -> Result<HittingMoments> {
    p.validate()?;
    if !(1..=4).contains(&max_order) {
        return Err(invalid(format!("moment order must be in 1..=4, got {max_order}")));
    }
    let mut raw = Vec::with_capacity(max_order);
    let mut fact = 1.0;
    for m in 1..=max_order as i32 {
        fact *= m as f64;
        let slow = p.rho * fact / p.lambda1.powi(m);
        let spread = (1.0 - p.rho) * fact * inverse_power_mean(p.lambda2, p.lambda_m, m);
        raw.push(slow + spread);
    }
    Ok(HittingMoments::from_raw(raw))
}

/// Everything that goes into the second-order approximation at a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderApprox {
    pub params: MixtureParams,
    pub rho: RhoEstimate,
    pub exact_mean: f64,
    /// Number of eigenvalues in the passage block.
    pub spectrum_size: usize,
}

/// Truncate, solve the spectrum, take the exact mean and fix `ρ`.
pub fn second_order_approx(spec: &BirthDeathSpec, threshold_state: usize) -> Result<SecondOrderApprox> {
    if threshold_state < 3 {
        return Err(invalid(format!(
            "second-order approximation needs threshold state >= 3, got {threshold_state}"
        )));
    }
    let g = TruncatedGenerator::truncate(spec, threshold_state)?;
    let eigs = g.passage_eigenvalues()?;
    if eigs.len() < 3 {
        return Err(invalid(format!(
            "passage block has only {} states; need at least 3",
            eigs.len()
        )));
    }
    let (l1, l2, lm) = (eigs[0], eigs[1], eigs[eigs.len() - 1]);
    let exact_mean = exact_mean_hitting(spec, threshold_state)?;
    let rho = rho_from_mean(exact_mean, l1, l2, lm)?;
    let params = MixtureParams::new(rho.rho, l1, l2, lm)?;
    Ok(SecondOrderApprox {
        params,
        rho,
        exact_mean,
        spectrum_size: eigs.len(),
    })
}

pub fn approx_pdf_from_spec(spec: &BirthDeathSpec, threshold_state: usize) -> Result<MixtureParams> {
    Ok(second_order_approx(spec, threshold_state)?.params)
}
