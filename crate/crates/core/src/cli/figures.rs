//! Data for every process figure: duration histograms, approximation
//! curves and spectra for the parameter sets used there.

use std::path::Path;

use super::commands::{
    approx_artifacts, bessel_artifacts, sample_artifacts, spectrum_artifacts, DEFAULT_BINS_PER_DECADE,
    DEFAULT_POINTS, DEFAULT_SEED,
};
use super::{Artifacts, Settings};
use crate::error::Result;
use crate::process::{level_state, BirthDeathSpec};
use crate::simulate::{burst_durations, inter_burst_durations, SimOptions};

/// Samples per histogram when `--n-samples` is not given.
pub const FIGURE_SAMPLES: usize = 100_000;

/// One histogram panel: a process with its inter-burst and burst levels.
#[derive(Debug, Clone, Copy)]
pub struct Panel {
    pub name: &'static str,
    pub model: Model,
    pub inter_burst_h: f64,
    pub burst_h: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum Model {
    BesselLike(f64),
    Ou,
    Imitation(f64),
}

impl Model {
    pub fn build(&self, n: usize) -> Result<BirthDeathSpec> {
        match *self {
            Model::BesselLike(nu) => BirthDeathSpec::bessel_like(nu, n),
            Model::Ou => BirthDeathSpec::ornstein_uhlenbeck(n),
            Model::Imitation(eps) => BirthDeathSpec::imitation(eps, n),
        }
    }
}

pub const N_AGENTS: usize = 1000;

pub const PANELS: [Panel; 9] = [
    Panel { name: "bessel_like_a", model: Model::BesselLike(0.5), inter_burst_h: 0.3, burst_h: 0.7 },
    Panel { name: "bessel_like_b", model: Model::BesselLike(1.5), inter_burst_h: 0.2, burst_h: 0.8 },
    Panel { name: "bessel_like_c", model: Model::BesselLike(2.5), inter_burst_h: 0.7, burst_h: 0.3 },
    Panel { name: "ou_a", model: Model::Ou, inter_burst_h: 0.45, burst_h: 0.55 },
    Panel { name: "ou_b", model: Model::Ou, inter_burst_h: 0.5, burst_h: 0.5 },
    Panel { name: "ou_c", model: Model::Ou, inter_burst_h: 0.55, burst_h: 0.45 },
    Panel { name: "imitation_a", model: Model::Imitation(0.5), inter_burst_h: 0.3, burst_h: 0.7 },
    Panel { name: "imitation_b", model: Model::Imitation(1.0), inter_burst_h: 0.2, burst_h: 0.8 },
    Panel { name: "imitation_c", model: Model::Imitation(1.5), inter_burst_h: 0.7, burst_h: 0.3 },
];

/// Spectrum panels reuse the parameters of one histogram panel each.
pub const SPECTRUM_PANELS: [(&str, usize); 3] = [("bessel_like_d", 0), ("ou_d", 4), ("imitation_d", 6)];

/// Indices of the continuous Bessel reference.
pub const BESSEL_INDICES: [f64; 3] = [0.5, 1.5, 2.5];
pub const BESSEL_LEVEL: f64 = 0.7;

pub fn reproduce(s: &Settings, dir: &Path, art: &mut Artifacts) -> Result<()> {
    let seed = s.seed.unwrap_or(DEFAULT_SEED);
    let count = s.n_samples.unwrap_or(FIGURE_SAMPLES);
    let bpd = s.bins_per_decade.unwrap_or(DEFAULT_BINS_PER_DECADE);
    let points = s.points.unwrap_or(DEFAULT_POINTS);
    let opts = SimOptions {
        workers: s.workers,
        ..Default::default()
    };

    for nu in BESSEL_INDICES {
        let prefix = format!("continuous_bessel/nu_{nu}_");
        let sub = Settings {
            n_samples: Some(count),
            ..s.clone()
        };
        bessel_artifacts(&sub, nu, BESSEL_LEVEL, dir, &prefix, art)?;
    }

    for panel in PANELS {
        let spec = panel.model.build(N_AGENTS)?;
        let ib = level_state(panel.inter_burst_h, N_AGENTS)?;
        let b = level_state(panel.burst_h, N_AGENTS)?;
        let prefix = format!("{}/", panel.name);
        let sample = inter_burst_durations(&spec, ib, seed, count, &opts)?;
        sample_artifacts(&sample, bpd, dir, &format!("{prefix}inter_burst"), art)?;
        let sample = burst_durations(&spec, b, seed, count, &opts)?;
        sample_artifacts(&sample, bpd, dir, &format!("{prefix}burst"), art)?;
        approx_artifacts(&spec, ib, points, dir, &prefix, art)?;
    }

    for (name, idx) in SPECTRUM_PANELS {
        let panel = PANELS[idx];
        let spec = panel.model.build(N_AGENTS)?;
        let n = level_state(panel.inter_burst_h, N_AGENTS)?;
        spectrum_artifacts(&spec, n, dir, &format!("{name}/"), art)?;
    }
    Ok(())
}
