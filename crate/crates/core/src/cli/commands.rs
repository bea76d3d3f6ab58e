use std::path::Path;

use serde::Serialize;

use super::{create_file, write_json, Artifacts, KindArg, Settings};
use crate::approx::{
    exact_hitting_moments, first_order_density, mixture_moments, second_order_approx,
    second_order_density, HittingMoments, MixtureParams, SecondOrderApprox,
};
use crate::bessel::{simulate_bessel_em_with, write_density_csv, BesselFptSpec, IntegralApprox};
use crate::error::{invalid, Error, Result};
use crate::fit::{fit_diagnostics, fit_moments};
use crate::process::BirthDeathSpec;
use crate::simulate::{
    burst_durations, inter_burst_durations, log_binned_pdf, DurationSample, SimOptions,
};
use crate::spectrum::{sqrt_linearity, write_spectrum_csv, TruncatedGenerator};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_BINS_PER_DECADE: usize = 10;
pub const DEFAULT_POINTS: usize = 200;

/// `points` log-spaced values from `lo` to `hi`.
pub(crate) fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    let step = (hi / lo).ln() / (points - 1) as f64;
    (0..points).map(|i| lo * (step * i as f64).exp()).collect()
}

pub(crate) fn spectrum_artifacts(
    spec: &BirthDeathSpec,
    n: usize,
    dir: &Path,
    prefix: &str,
    art: &mut Artifacts,
) -> Result<()> {
    let eigs = TruncatedGenerator::truncate(spec, n)?.passage_eigenvalues()?;
    write_spectrum_csv(&eigs, create_file(dir, &format!("{prefix}spectrum.csv"), art)?)?;
    let report = sqrt_linearity(&eigs, None)?;
    #[derive(Serialize)]
    struct Fit<'a> {
        threshold_state: usize,
        n_eigenvalues: usize,
        slope: f64,
        intercept: f64,
        fit_window: (usize, usize),
        r_squared: f64,
        spec_label: &'a str,
    }
    write_json(
        dir,
        &format!("{prefix}spectrum_fit.json"),
        &Fit {
            threshold_state: n,
            n_eigenvalues: eigs.len(),
            slope: report.sqrt_fit_slope,
            intercept: report.sqrt_fit_intercept,
            fit_window: report.fit_window,
            r_squared: report.r_squared,
            spec_label: spec.label(),
        },
        art,
    )
}

pub fn spectrum(s: &Settings, dir: &Path, art: &mut Artifacts) -> Result<()> {
    let spec = s.spec()?;
    let n = s.threshold(&spec)?;
    spectrum_artifacts(&spec, n, dir, "", art)
}

#[derive(Serialize)]
struct ApproxReport<'a> {
    spec_label: &'a str,
    threshold_state: usize,
    #[serde(flatten)]
    approx: &'a SecondOrderApprox,
    exact_moments: HittingMoments,
    mixture_moments: HittingMoments,
}

/// Density of the mixture and of the first-order form on a log grid.
pub(crate) fn approx_curve(p: &MixtureParams, points: usize, w: impl std::io::Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["theta", "pdf", "first_order_pdf"])?;
    for t in log_grid(0.01 / p.lambda_m, 20.0 / p.lambda1, points) {
        let pdf = second_order_density(t, p)?;
        let first = first_order_density(t, p.lambda1, p.lambda_m)?;
        wtr.write_record([t.to_string(), pdf.to_string(), first.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub(crate) fn approx_artifacts(
    spec: &BirthDeathSpec,
    n: usize,
    points: usize,
    dir: &Path,
    prefix: &str,
    art: &mut Artifacts,
) -> Result<MixtureParams> {
    let approx = second_order_approx(spec, n)?;
    let report = ApproxReport {
        spec_label: spec.label(),
        threshold_state: n,
        approx: &approx,
        exact_moments: exact_hitting_moments(spec, n)?,
        mixture_moments: mixture_moments(&approx.params, 4)?,
    };
    write_json(dir, &format!("{prefix}approx.json"), &report, art)?;
    approx_curve(
        &approx.params,
        points,
        create_file(dir, &format!("{prefix}approx_pdf.csv"), art)?,
    )?;
    Ok(approx.params)
}

pub fn approx(s: &Settings, dir: &Path, art: &mut Artifacts) -> Result<()> {
    let spec = s.spec()?;
    let n = s.threshold(&spec)?;
    approx_artifacts(&spec, n, s.points.unwrap_or(DEFAULT_POINTS), dir, "", art)?;
    Ok(())
}

/// Duration CSV, sidecar and, with enough samples, the log-binned density.
pub(crate) fn sample_artifacts(
    sample: &DurationSample,
    bins_per_decade: usize,
    dir: &Path,
    stem: &str,
    art: &mut Artifacts,
) -> Result<()> {
    sample.write_csv(create_file(dir, &format!("{stem}.csv"), art)?)?;
    write_json(dir, &format!("{stem}.json"), &sample.metadata(), art)?;
    if sample.len() >= 100 {
        let pdf = log_binned_pdf(&sample.durations, bins_per_decade)?;
        pdf.write_csv(create_file(dir, &format!("{stem}_pdf.csv"), art)?)?;
    }
    Ok(())
}

pub fn simulate(s: &Settings, dir: &Path, art: &mut Artifacts) -> Result<()> {
    let spec = s.spec()?;
    let n = s.threshold(&spec)?;
    let seed = s.seed.unwrap_or(DEFAULT_SEED);
    let count = s.n_samples.unwrap_or(DEFAULT_SAMPLES);
    let bpd = s.bins_per_decade.unwrap_or(DEFAULT_BINS_PER_DECADE);
    let opts = SimOptions {
        workers: s.workers,
        ..Default::default()
    };
    let kind = s.kind.unwrap_or(KindArg::InterBurst);
    if matches!(kind, KindArg::InterBurst | KindArg::Both) {
        let sample = inter_burst_durations(&spec, n, seed, count, &opts)?;
        sample_artifacts(&sample, bpd, dir, "inter_burst", art)?;
    }
    if matches!(kind, KindArg::Burst | KindArg::Both) {
        let sample = burst_durations(&spec, n, seed, count, &opts)?;
        sample_artifacts(&sample, bpd, dir, "burst", art)?;
    }
    Ok(())
}

pub fn fit(s: &Settings, dir: &Path, art: &mut Artifacts) -> Result<()> {
    let input = s
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("--input is required for fit".into()))?;
    let sample = DurationSample::load(input)?;
    let result = fit_moments(&sample.durations, None)?;
    write_json(dir, "fit.json", &result, art)?;
    let bpd = s.bins_per_decade.unwrap_or(DEFAULT_BINS_PER_DECADE);
    let diag = fit_diagnostics(&sample.durations, &result.params, bpd)?;
    write_json(dir, "fit_diagnostics.json", &diag, art)?;
    approx_curve(
        &result.params,
        s.points.unwrap_or(DEFAULT_POINTS),
        create_file(dir, "fit_pdf.csv", art)?,
    )?;
    Ok(())
}

pub const DEFAULT_K_MAX: usize = 4000;

pub(crate) fn bessel_artifacts(
    s: &Settings,
    nu: f64,
    h: f64,
    dir: &Path,
    prefix: &str,
    art: &mut Artifacts,
) -> Result<()> {
    let y0 = s.y0.unwrap_or(0.5 * h);
    let spec = BesselFptSpec::new(nu, h, y0, s.k_max.unwrap_or(DEFAULT_K_MAX))?;
    let series = spec.series()?;
    let tau1 = 1.0 / series.rates[0];
    let dt = s.dt.unwrap_or(2e-5 * h * h);
    let theta_min = s.theta_min.unwrap_or(dt);
    let points = s.points.unwrap_or(DEFAULT_POINTS);
    let grid = log_grid(theta_min, 20.0 * tau1, points);
    let mut rows = Vec::with_capacity(points);
    for &t in &grid {
        let v = series.density(t)?;
        rows.push((t, v.value, v.truncation_error));
    }
    write_density_csv(&rows, create_file(dir, &format!("{prefix}series_pdf.csv"), art)?)?;
    let integral = IntegralApprox::new(nu, h, theta_min)?;
    let rows = grid
        .iter()
        .map(|&t| Ok((t, integral.density(t)?, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    write_density_csv(&rows, create_file(dir, &format!("{prefix}integral_pdf.csv"), art)?)?;
    if let Some(count) = s.n_samples.filter(|&c| c > 0) {
        let sample = simulate_bessel_em_with(
            nu,
            h,
            y0,
            dt,
            s.seed.unwrap_or(DEFAULT_SEED),
            count,
            s.workers,
        )?;
        let bpd = s.bins_per_decade.unwrap_or(DEFAULT_BINS_PER_DECADE);
        sample_artifacts(&sample, bpd, dir, &format!("{prefix}em"), art)?;
    }
    Ok(())
}

pub fn bessel(s: &Settings, dir: &Path, art: &mut Artifacts) -> Result<()> {
    let nu = s.nu.unwrap_or(0.5);
    let h = s
        .h
        .ok_or_else(|| Error::Config("--h (the level) is required for bessel".into()))?;
    if !(h > 0.0) {
        return Err(invalid(format!("level h must be positive, got {h}")));
    }
    bessel_artifacts(s, nu, h, dir, "", art)
}
