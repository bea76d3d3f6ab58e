//! Four-moment fitting of the mixture density to duration samples.

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{mixture_moments, second_order_survival, HittingMoments, MixtureParams};
use crate::error::{invalid, Error, Result};
use crate::simulate::log_binned_pdf;

/// Fewest samples accepted for moment estimation.
pub const MIN_MOMENT_SAMPLES: usize = 1000;
/// Jittered restarts after the run from the initial point.
pub const RESTARTS: usize = 8;
/// Largest accepted relative moment residual for a converged fit.
pub const RESIDUAL_TOL: f64 = 1e-6;

/// Mean, variance, third and fourth central moments by two passes.
pub fn sample_central_moments(samples: &[f64]) -> Result<HittingMoments> {
    if samples.len() < MIN_MOMENT_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_MOMENT_SAMPLES,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let raw = vec![
        mean,
        m2 + mean * mean,
        m3 + 3.0 * mean * m2 + mean.powi(3),
        m4 + 4.0 * mean * m3 + 6.0 * mean * mean * m2 + mean.powi(4),
    ];
    Ok(HittingMoments {
        mean,
        raw_moments: raw,
        central_moments: vec![m2, m3, m4],
    })
}

/// Outcome of a moment fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(flatten)]
    pub params: MixtureParams,
    /// Relative errors of mean, variance, third and fourth central moment.
    #[serde(rename = "residuals")]
    pub moment_residuals: [f64; 4],
    pub converged: bool,
    pub objective: f64,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Unconstrained coordinates `(logit ρ, ln λ₁, ln ln(λ₂/λ₁), ln ln(λₘ/λ₂))`.
fn to_params(z: &[f64; 4]) -> Option<MixtureParams> {
    let rho = logistic(z[0]);
    let l1 = z[1];
    let l2 = l1 + z[2].exp();
    let lm = l2 + z[3].exp();
    let p = MixtureParams {
        rho,
        lambda1: l1.exp(),
        lambda2: l2.exp(),
        lambda_m: lm.exp(),
    };
    let ok = [p.lambda1, p.lambda2, p.lambda_m]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0)
        && p.lambda2 < p.lambda_m
        && p.validate().is_ok();
    ok.then_some(p)
}

fn to_coords(p: &MixtureParams) -> [f64; 4] {
    let rho = p.rho.clamp(1e-6, 1.0 - 1e-6);
    let l1 = p.lambda1.ln();
    let l2 = p.lambda2.ln().max(l1 + 1e-9);
    let lm = p.lambda_m.ln().max(l2 + 1e-9);
    [logit(rho), l1, (l2 - l1).ln(), (lm - l2).ln()]
}

struct Target {
    moments: [f64; 4],
}

impl Target {
    fn model(&self, p: &MixtureParams) -> Option<[f64; 4]> {
        let m = mixture_moments(p, 4).ok()?.matched()?;
        m.iter().all(|v| v.is_finite()).then_some(m)
    }

    /// Log-ratio residuals, relative error where a log is undefined.
    fn residuals(&self, model: &[f64; 4]) -> [f64; 4] {
        let mut r = [0.0; 4];
        for i in 0..4 {
            let (m, e) = (model[i], self.moments[i]);
            r[i] = if m > 0.0 && e > 0.0 {
                (m / e).ln()
            } else if e != 0.0 {
                (m - e) / e.abs()
            } else {
                m
            };
        }
        r
    }

    fn relative(&self, model: &[f64; 4]) -> [f64; 4] {
        let mut r = [0.0; 4];
        for i in 0..4 {
            let e = self.moments[i];
            r[i] = if e != 0.0 {
                (model[i] - e) / e.abs()
            } else {
                model[i]
            };
        }
        r
    }

    fn objective(&self, z: &[f64; 4]) -> f64 {
        match to_params(z).and_then(|p| self.model(&p)) {
            Some(m) => self.residuals(&m).iter().map(|r| r * r).sum(),
            None => f64::INFINITY,
        }
    }
}

struct Simplex {
    best: [f64; 4],
    value: f64,
}

/// Nelder–Mead with standard coefficients.
fn nelder_mead(f: &impl Fn(&[f64; 4]) -> f64, start: [f64; 4], step: f64, max_iter: usize) -> Simplex {
    let mut pts: Vec<[f64; 4]> = vec![start];
    for i in 0..4 {
        let mut p = start;
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(f).collect();
    let lerp = |a: &[f64; 4], b: &[f64; 4], t: f64| {
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = a[i] + t * (b[i] - a[i]);
        }
        out
    };
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i]).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = (vals[4] - vals[0]).abs();
        let size = (1..5)
            .map(|k| (0..4).map(|i| (pts[k][i] - pts[0][i]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (spread <= 1e-16 * (1.0 + vals[0].abs()) && size < 1e-6) || size < 1e-12 {
            break;
        }
        let mut centroid = [0.0; 4];
        for p in &pts[..4] {
            for i in 0..4 {
                centroid[i] += p[i] / 4.0;
            }
        }
        let worst = pts[4];
        let refl = lerp(&centroid, &worst, -1.0);
        let fr = f(&refl);
        if fr < vals[0] {
            let exp = lerp(&centroid, &worst, -2.0);
            let fe = f(&exp);
            if fe < fr {
                pts[4] = exp;
                vals[4] = fe;
            } else {
                pts[4] = refl;
                vals[4] = fr;
            }
        } else if fr < vals[3] {
            pts[4] = refl;
            vals[4] = fr;
        } else {
            let (cand, fc) = if fr < vals[4] {
                let c = lerp(&centroid, &refl, 0.5);
                (c, f(&c))
            } else {
                let c = lerp(&centroid, &worst, 0.5);
                (c, f(&c))
            };
            if fc < vals[4].min(fr) {
                pts[4] = cand;
                vals[4] = fc;
            } else {
                let best = pts[0];
                for k in 1..5 {
                    pts[k] = lerp(&best, &pts[k], 0.5);
                    vals[k] = f(&pts[k]);
                }
            }
        }
    }
    let k = (0..5).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Simplex {
        best: pts[k],
        value: vals[k],
    }
}

/// Damped Gauss–Newton on the four residuals, starting from the simplex result.
fn polish(target: &Target, start: [f64; 4]) -> ([f64; 4], f64) {
    let resid = |z: &[f64; 4]| -> Option<Vector4<f64>> {
        let p = to_params(z)?;
        let m = target.model(&p)?;
        Some(Vector4::from(target.residuals(&m)))
    };
    let mut z = start;
    let Some(mut r) = resid(&z) else {
        return (z, f64::INFINITY);
    };
    let mut obj = r.norm_squared();
    let mut mu = 1e-3;
    for _ in 0..200 {
        if obj < 1e-30 {
            break;
        }
        let mut jac = Matrix4::<f64>::zeros();
        let mut ok = true;
        for j in 0..4 {
            let h = 1e-6 * (1.0 + z[j].abs());
            let (mut zp, mut zm) = (z, z);
            zp[j] += h;
            zm[j] -= h;
            match (resid(&zp), resid(&zm)) {
                (Some(a), Some(b)) => jac.set_column(j, &((a - b) / (2.0 * h))),
                _ => ok = false,
            }
        }
        if !ok {
            break;
        }
        let jtj = jac.transpose() * jac;
        let g = jac.transpose() * r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for i in 0..4 {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-g)) else {
                mu *= 10.0;
                continue;
            };
            let mut cand = z;
            for i in 0..4 {
                cand[i] += step[i];
            }
            if let Some(rc) = resid(&cand) {
                let oc = rc.norm_squared();
                if oc < obj {
                    z = cand;
                    r = rc;
                    obj = oc;
                    mu = (mu / 10.0).max(1e-12);
                    improved = true;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (z, obj)
}

fn default_init(samples: &[f64], mean: f64) -> MixtureParams {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    let lambda_m = 1.0 / lo;
    let mut lambda1 = 1.0 / hi;
    if !(lambda1 < lambda_m) {
        lambda1 = lambda_m / 10.0;
    }
    let lambda2 = (lambda1 * lambda_m).sqrt();
    let s = (lambda2 * lambda_m).sqrt();
    let raw = lambda1 * (1.0 - s * mean) / (lambda1 - s);
    MixtureParams {
        rho: raw.clamp(0.05, 0.95),
        lambda1,
        lambda2,
        lambda_m,
    }
}

/// Fits `ρ, λ₁, λ₂, λₘ` by matching the four moments of `samples`.
pub fn fit_moments(samples: &[f64], init: Option<MixtureParams>) -> Result<FitResult> {
    if samples.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(invalid("durations must be positive and finite"));
    }
    let emp = sample_central_moments(samples)?;
    let moments = emp.matched().expect("four sample moments");
    let target = Target { moments };
    let start = match init {
        Some(p) => {
            p.validate()?;
            p
        }
        None => default_init(samples, emp.mean),
    };
    let z0 = to_coords(&start);
    let mut jitter = ChaCha8Rng::seed_from_u64(0x6d6f_6d65_6e74);
    let mut starts = vec![z0];
    for _ in 0..RESTARTS {
        let mut z = z0;
        for v in z.iter_mut() {
            *v += jitter.random_range(-1.5..1.5);
        }
        starts.push(z);
    }
    let f = |z: &[f64; 4]| target.objective(z);
    let runs: Vec<([f64; 4], f64)> = starts
        .par_iter()
        .map(|&z| {
            let mut s = nelder_mead(&f, z, 0.5, 4000);
            // one restart from the simplex optimum escapes early collapse
            let again = nelder_mead(&f, s.best, 0.1, 4000);
            if again.value < s.value {
                s = again;
            }
            let (zp, op) = polish(&target, s.best);
            if op < s.value {
                (zp, op)
            } else {
                (s.best, s.value)
            }
        })
        .collect();
    let mut best: Option<([f64; 4], f64, MixtureParams)> = None;
    for (z, obj) in runs {
        let Some(p) = to_params(&z) else { continue };
        let better = match &best {
            None => true,
            Some((_, bo, bp)) => {
                let tie = (obj - bo).abs() <= 1e-12 * bo.abs().max(1e-300);
                if tie {
                    p.lambda_m < bp.lambda_m
                } else {
                    obj < *bo
                }
            }
        };
        if better {
            best = Some((z, obj, p));
        }
    }
    let (_, objective, params) =
        best.ok_or_else(|| invalid("no restart produced a valid parameter set"))?;
    let model = target.model(&params).expect("valid optimum");
    let moment_residuals = target.relative(&model);
    let converged = moment_residuals.iter().all(|r| r.abs() <= RESIDUAL_TOL);
    Ok(FitResult {
        params,
        moment_residuals,
        converged,
        objective,
    })
}

/// Per-bin comparison of the log-binned sample density with the model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinComparison {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
    pub empirical: f64,
    /// Model density averaged over the bin.
    pub model: f64,
    pub log_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitDiagnostics {
    pub bins: Vec<BinComparison>,
    /// Bins holding at least `min_count` samples.
    pub qualifying_bins: usize,
    pub min_count: u64,
    pub max_abs_log_ratio: Option<f64>,
    pub insufficient_data: bool,
}

/// Fewest samples a bin needs to count towards the maximum log-ratio.
pub const QUALIFYING_COUNT: u64 = 100;

pub fn fit_diagnostics(samples: &[f64], params: &MixtureParams, bins_per_decade: usize) -> Result<FitDiagnostics> {
    params.validate()?;
    let pdf = log_binned_pdf(samples, bins_per_decade)?;
    let mut bins = Vec::with_capacity(pdf.n_bins());
    let mut max_abs: Option<f64> = None;
    let mut qualifying = 0;
    for i in 0..pdf.n_bins() {
        let (lo, hi) = pdf.bin(i);
        let mass = second_order_survival(lo, params)? - second_order_survival(hi, params)?;
        let model = mass / (hi - lo);
        let empirical = pdf.densities[i];
        let log_ratio = (empirical / model).ln();
        if pdf.counts[i] >= QUALIFYING_COUNT {
            qualifying += 1;
            let a = log_ratio.abs();
            max_abs = Some(max_abs.map_or(a, |m: f64| m.max(a)));
        }
        bins.push(BinComparison {
            bin_lo: lo,
            bin_hi: hi,
            count: pdf.counts[i],
            empirical,
            model,
            log_ratio,
        });
    }
    Ok(FitDiagnostics {
        bins,
        qualifying_bins: qualifying,
        min_count: QUALIFYING_COUNT,
        max_abs_log_ratio: max_abs,
        insufficient_data: qualifying == 0,
    })
}

/// Mixture sampler used by round-trip checks.
pub mod testing {
    use super::*;
    use rand_distr::Exp1;

    /// Draws from the mixture: `Exp(λ₁)` with probability `ρ`, otherwise
    /// `Exp(u²)` with `u` uniform on `[√λ₂, √λₘ]`.
    pub fn sample_mixture(params: &MixtureParams, n: usize, seed: u64) -> Result<Vec<f64>> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, t) = (params.lambda2.sqrt(), params.lambda_m.sqrt());
        Ok((0..n)
            .map(|_| {
                let e: f64 = rng.sample(Exp1);
                let pick: f64 = rng.random();
                if pick < params.rho {
                    e / params.lambda1
                } else {
                    let u = s + (t - s) * rng.random::<f64>();
                    e / (u * u)
                }
            })
            .collect())
    }
}
