//! Command-line front end.
//!
//! Every option can come from a flag or from a TOML file given by
//! `--config`; flags win. The output directory falls back to the
//! `BDFPT_OUTPUT` environment variable, then to the working directory.

mod commands;
mod figures;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{level_state, BirthDeathSpec};
use crate::simulate::PRNG_FAMILY;

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "BDFPT_OUTPUT";

#[derive(Debug, Parser)]
#[command(name = "bdfpt", version, about = "Burst and inter-burst durations of birth-death processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of the truncated generator and the fit of their square roots.
    Spectrum(Invocation),
    /// Second-order approximation parameters and density curve.
    Approx(Invocation),
    /// Monte Carlo burst or inter-burst durations.
    Simulate(Invocation),
    /// Four-moment fit of the mixture density to a duration CSV.
    Fit(Invocation),
    /// Continuous Bessel process reference curves and simulation.
    Bessel(Invocation),
    /// Regenerate the data behind every figure in one run.
    ReproduceFigures(Invocation),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Approx(_) => "approx",
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Bessel(_) => "bessel",
            Command::ReproduceFigures(_) => "reproduce-figures",
        }
    }

    fn invocation(&self) -> &Invocation {
        match self {
            Command::Spectrum(i)
            | Command::Approx(i)
            | Command::Simulate(i)
            | Command::Fit(i)
            | Command::Bessel(i)
            | Command::ReproduceFigures(i) => i,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Invocation {
    /// TOML file with default values for any of the options below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    BesselLike,
    Ou,
    Imitation,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    InterBurst,
    Burst,
    Both,
}

/// All options; which ones a command reads is listed in its help.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Built-in process or `table` for a rate CSV.
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Bessel-like process index (half-integer).
    #[arg(long)]
    pub nu: Option<f64>,
    /// Imitation process idiosyncratic rate.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of agents; states run from 0 to N.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n_states: Option<usize>,
    /// Rate table CSV with columns state,birth_rate,death_rate.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Threshold as a fraction of N (for `bessel`: the level in position units).
    #[arg(long, conflicts_with = "state")]
    pub h: Option<f64>,
    /// Threshold as an explicit state.
    #[arg(long)]
    pub state: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub bins_per_decade: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads for simulation.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Which durations to simulate.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Duration CSV to fit.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Bessel start position.
    #[arg(long)]
    pub y0: Option<f64>,
    /// Bessel series length.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Bessel simulation time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Lower cut-off of the Bessel integral approximation.
    #[arg(long)]
    pub theta_min: Option<f64>,
    /// Points on density curves.
    #[arg(long)]
    pub points: Option<usize>,
}

macro_rules! overlay {
    ($flags:expr, $file:expr, $($field:ident),*) => {
        Settings { $($field: $flags.$field.clone().or($file.$field.clone()),)* }
    };
}

impl Settings {
    /// Flag values over file values; `h` and `state` are taken as a pair so
    /// a flag for one overrides a file value for the other.
    pub fn overlay(flags: &Settings, file: &Settings) -> Settings {
        let mut s = overlay!(
            flags, file, model, nu, epsilon, n_states, table, h, state, seed, n_samples,
            bins_per_decade, output, workers, kind, input, y0, k_max, dt, theta_min, points
        );
        if flags.h.is_some() || flags.state.is_some() {
            s.h = flags.h;
            s.state = flags.state;
        }
        s
    }

    pub fn from_toml(text: &str) -> Result<Settings> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn require_n(&self) -> Result<usize> {
        self.n_states
            .ok_or_else(|| Error::Config("--N is required for built-in models".into()))
    }

    /// The process selected by `model` and its parameters.
    pub fn spec(&self) -> Result<BirthDeathSpec> {
        let model = self
            .model
            .ok_or_else(|| Error::Config("--model is required".into()))?;
        match model {
            ModelKind::BesselLike => {
                let nu = self
                    .nu
                    .ok_or_else(|| Error::Config("--nu is required for bessel-like".into()))?;
                BirthDeathSpec::bessel_like(nu, self.require_n()?)
            }
            ModelKind::Ou => BirthDeathSpec::ornstein_uhlenbeck(self.require_n()?),
            ModelKind::Imitation => {
                let eps = self
                    .epsilon
                    .ok_or_else(|| Error::Config("--epsilon is required for imitation".into()))?;
                BirthDeathSpec::imitation(eps, self.require_n()?)
            }
            ModelKind::Table => {
                let path = self
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::Config("--table is required for model table".into()))?;
                BirthDeathSpec::from_csv_path(path)
            }
        }
    }

    /// Threshold state from exactly one of `h` and `state`.
    pub fn threshold(&self, spec: &BirthDeathSpec) -> Result<usize> {
        match (self.h, self.state) {
            (Some(h), None) => level_state(h, spec.n_states()),
            (None, Some(n)) => {
                if n == 0 || n >= spec.n_states() {
                    return Err(Error::OutOfRange {
                        what: "threshold state",
                        value: n as i64,
                        lo: 1,
                        hi: spec.n_states() as i64 - 1,
                    });
                }
                Ok(n)
            }
            (Some(_), Some(_)) => Err(Error::Config("give only one of --h and --state".into())),
            (None, None) => Err(Error::Config("one of --h or --state is required".into())),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Record written next to every set of artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: Settings,
    pub version: String,
    pub prng_family: String,
    pub artifacts: Vec<String>,
    pub started_unix_seconds: f64,
    pub wall_seconds: f64,
}

/// Files produced by a command, relative to the output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<String>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>) {
        self.files.push(name.into());
    }
}

pub(crate) fn create_file(dir: &Path, name: &str, art: &mut Artifacts) -> Result<std::io::BufWriter<std::fs::File>> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    art.add(name);
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub(crate) fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, art: &mut Artifacts) -> Result<()> {
    let mut w = create_file(dir, name, art)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

/// Resolves the configuration, runs the command and writes the manifest.
pub fn run(cli: &Cli) -> Result<Manifest> {
    let inv = cli.command.invocation();
    let file = match &inv.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            Settings::from_toml(&text)?
        }
        None => Settings::default(),
    };
    let settings = Settings::overlay(&inv.settings, &file);
    let out = settings.output_dir();
    std::fs::create_dir_all(&out)?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let clock = Instant::now();
    let mut art = Artifacts::default();
    match &cli.command {
        Command::Spectrum(_) => commands::spectrum(&settings, &out, &mut art)?,
        Command::Approx(_) => commands::approx(&settings, &out, &mut art)?,
        Command::Simulate(_) => commands::simulate(&settings, &out, &mut art)?,
        Command::Fit(_) => commands::fit(&settings, &out, &mut art)?,
        Command::Bessel(_) => commands::bessel(&settings, &out, &mut art)?,
        Command::ReproduceFigures(_) => figures::reproduce(&settings, &out, &mut art)?,
    }
    let manifest = Manifest {
        command: cli.command.name().to_string(),
        config: Settings {
            output: Some(out.clone()),
            ..settings
        },
        version: env!("CARGO_PKG_VERSION").to_string(),
        prng_family: PRNG_FAMILY.to_string(),
        artifacts: art.files,
        started_unix_seconds: started,
        wall_seconds: clock.elapsed().as_secs_f64(),
    };
    let f = std::fs::File::create(out.join("manifest.json"))?;
    serde_json::to_writer_pretty(f, &manifest)?;
    Ok(manifest)
}

/// Exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        _ => 1,
    }
}

pub fn error_json(err: &Error) -> serde_json::Value {
    serde_json::json!({ "error": { "kind": err.kind(), "message": err.to_string() } })
}

/// Parses `args`, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            exit_code(&err)
        }
    }
}
