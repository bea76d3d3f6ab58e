//! Exact stochastic simulation of birth–death passages.
//!
//! Every passage sample is an independent run of the direct method: hold an
//! exponential time with the total rate of the current state, then step up
//! or down in proportion to the two rates. Sample `j` of a run draws from its
//! own ChaCha8 stream `(seed, j)`, so the output depends only on the seed and
//! the sample count, never on how many workers produced it.

mod exact;
mod histogram;
mod trajectory;

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::process::BirthDeathSpec;

pub use exact::{exact_small_n_density, ExactPassageLaw, MAX_EXACT_STATES};
pub use histogram::{log_binned_pdf, LogBinnedPdf};
pub use trajectory::{
    collect_crossings, extract_durations, simulate_trajectory, CrossingCollector, Horizon,
    InitialState, Trajectory,
};

/// PRNG family recorded in every output's metadata.
pub const PRNG_FAMILY: &str = "ChaCha8 (rand_chacha 0.9); sample j uses seed_from_u64(seed) with stream j";

/// Default per-sample event cap.
pub const DEFAULT_STEP_CAP: u64 = 10_000_000_000;

/// Which side of the threshold a duration was spent on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationKind {
    Burst,
    InterBurst,
}

impl DurationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DurationKind::Burst => "burst",
            DurationKind::InterBurst => "inter_burst",
        }
    }
}

/// A batch of first-passage durations with provenance.
///
/// `threshold_state` follows the path convention of [`extract_durations`]:
/// bursts are sojourns in `X ≥ threshold_state`, inter-bursts sojourns in
/// `X < threshold_state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationSample {
    pub durations: Vec<f64>,
    pub kind: DurationKind,
    pub threshold_state: usize,
    pub spec_label: String,
    pub rng_seed: u64,
    pub n_requested: usize,
}

/// JSON sidecar written next to a duration CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub kind: DurationKind,
    pub threshold_state: usize,
    pub spec_label: String,
    pub rng_seed: u64,
    pub prng_family: String,
    pub n_requested: usize,
    pub n_samples: usize,
}

impl DurationSample {
    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn metadata(&self) -> SampleMetadata {
        SampleMetadata {
            kind: self.kind,
            threshold_state: self.threshold_state,
            spec_label: self.spec_label.clone(),
            rng_seed: self.rng_seed,
            prng_family: PRNG_FAMILY.to_string(),
            n_requested: self.n_requested,
            n_samples: self.durations.len(),
        }
    }

    /// One `duration` column with a header line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["duration"])?;
        for d in &self.durations {
            wtr.write_record([d.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes `<stem>.csv` and its `<stem>.json` sidecar.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let csv = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        self.write_csv(std::io::BufWriter::new(csv))?;
        let json = std::fs::File::create(dir.join(format!("{stem}.json")))?;
        serde_json::to_writer_pretty(json, &self.metadata())?;
        Ok(())
    }

    pub fn read_csv_durations<R: Read>(r: R) -> Result<Vec<f64>> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let col = headers
            .iter()
            .position(|h| h.trim() == "duration")
            .ok_or_else(|| invalid("duration CSV needs a `duration` column"))?;
        let mut out = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let v: f64 = rec
                .get(col)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad duration value {:?}", rec.get(col))))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("durations must be positive, got {v}")));
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Loads a duration CSV, taking provenance from the sidecar when present.
    pub fn load(csv_path: &Path) -> Result<Self> {
        let durations = Self::read_csv_durations(std::fs::File::open(csv_path)?)?;
        let sidecar = csv_path.with_extension("json");
        let meta: Option<SampleMetadata> = match std::fs::File::open(&sidecar) {
            Ok(f) => Some(serde_json::from_reader(f)?),
            Err(_) => None,
        };
        let n = durations.len();
        Ok(match meta {
            Some(m) => Self {
                durations,
                kind: m.kind,
                threshold_state: m.threshold_state,
                spec_label: m.spec_label,
                rng_seed: m.rng_seed,
                n_requested: m.n_requested,
            },
            None => Self {
                durations,
                kind: DurationKind::InterBurst,
                threshold_state: 0,
                spec_label: csv_path.display().to_string(),
                rng_seed: 0,
                n_requested: n,
            },
        })
    }
}

/// Knobs for passage sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub step_cap: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            step_cap: DEFAULT_STEP_CAP,
            workers: None,
        }
    }
}

/// The RNG for sample `index` of a run seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `f` on a pool of `workers` threads, or inline on the global pool.
pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(invalid("worker count must be positive")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Precomputed per-state jump tables.
struct JumpTable {
    total: Vec<f64>,
    p_up: Vec<f64>,
}

impl JumpTable {
    fn new(spec: &BirthDeathSpec) -> Self {
        let n = spec.n_states();
        let mut total = Vec::with_capacity(n + 1);
        let mut p_up = Vec::with_capacity(n + 1);
        for x in 0..=n {
            let (b, d) = (spec.birth_rate(x), spec.death_rate(x));
            let t = b + d;
            total.push(t);
            p_up.push(if t > 0.0 { b / t } else { 0.0 });
        }
        Self { total, p_up }
    }

    /// One passage from `start` to `target`.
    fn passage<R: Rng>(&self, rng: &mut R, start: usize, target: usize, cap: u64) -> Result<f64> {
        let mut x = start;
        let mut t = 0.0;
        let mut steps = 0u64;
        while x != target {
            let wait: f64 = rng.sample(Exp1);
            t += wait / self.total[x];
            let u: f64 = rng.random();
            if u < self.p_up[x] {
                x += 1;
            } else {
                x -= 1;
            }
            steps += 1;
            if steps >= cap && x != target {
                return Err(Error::StepCapExceeded(cap));
            }
        }
        Ok(t)
    }
}

/// `n_samples` independent first-passage times from `start` to `target`.
pub fn sample_fpt(
    spec: &BirthDeathSpec,
    start: usize,
    target: usize,
    rng_seed: u64,
    n_samples: usize,
) -> Result<DurationSample> {
    sample_fpt_with(spec, start, target, rng_seed, n_samples, &SimOptions::default())
}

pub fn sample_fpt_with(
    spec: &BirthDeathSpec,
    start: usize,
    target: usize,
    rng_seed: u64,
    n_samples: usize,
    opts: &SimOptions,
) -> Result<DurationSample> {
    spec.check_passage(start, target)?;
    if opts.step_cap == 0 {
        return Err(invalid("step cap must be positive"));
    }
    let table = JumpTable::new(spec);
    let durations = with_workers(opts.workers, || {
        (0..n_samples)
            .into_par_iter()
            .map(|j| {
                let mut rng = substream(rng_seed, j as u64);
                table.passage(&mut rng, start, target, opts.step_cap)
            })
            .collect::<Result<Vec<f64>>>()
    })??;
    let (kind, threshold_state) = if start < target {
        (DurationKind::InterBurst, target)
    } else {
        (DurationKind::Burst, target + 1)
    };
    Ok(DurationSample {
        durations,
        kind,
        threshold_state,
        spec_label: spec.label().to_string(),
        rng_seed,
        n_requested: n_samples,
    })
}

/// Durations spent below the level state `level`: passages `level − 1 → level`.
pub fn inter_burst_durations(
    spec: &BirthDeathSpec,
    level: usize,
    rng_seed: u64,
    n_samples: usize,
    opts: &SimOptions,
) -> Result<DurationSample> {
    if level == 0 {
        return Err(invalid("inter-burst level must be above state 0"));
    }
    sample_fpt_with(spec, level - 1, level, rng_seed, n_samples, opts)
}

/// Durations spent above the level state `level`: passages `level + 1 → level`.
pub fn burst_durations(
    spec: &BirthDeathSpec,
    level: usize,
    rng_seed: u64,
    n_samples: usize,
    opts: &SimOptions,
) -> Result<DurationSample> {
    if level >= spec.n_states() {
        return Err(invalid("burst level must be below state N"));
    }
    sample_fpt_with(spec, level + 1, level, rng_seed, n_samples, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn single_step_mean() {
        let ou = BirthDeathSpec::ornstein_uhlenbeck(10).unwrap();
        let n = 200_000;
        let s = sample_fpt(&ou, 0, 1, 7, n).unwrap();
        assert_eq!(s.kind, DurationKind::InterBurst);
        assert_eq!(s.threshold_state, 1);
        assert!(s.durations.iter().all(|&d| d > 0.0));
        let se = 0.01 / (n as f64).sqrt();
        assert!((mean(&s.durations) - 0.01).abs() < 3.0 * se);
    }

    #[test]
    fn reproducible_across_worker_counts() {
        let ou = BirthDeathSpec::ornstein_uhlenbeck(50).unwrap();
        let one = SimOptions {
            workers: Some(1),
            ..Default::default()
        };
        let three = SimOptions {
            workers: Some(3),
            ..Default::default()
        };
        let a = sample_fpt_with(&ou, 29, 30, 99, 2000, &one).unwrap();
        let b = sample_fpt_with(&ou, 29, 30, 99, 2000, &three).unwrap();
        assert_eq!(a.durations, b.durations);
        let c = sample_fpt_with(&ou, 29, 30, 100, 2000, &one).unwrap();
        assert_ne!(a.durations, c.durations);
    }

    #[test]
    fn prefix_stability() {
        // sample j only depends on (seed, j)
        let ou = BirthDeathSpec::ornstein_uhlenbeck(20).unwrap();
        let a = sample_fpt(&ou, 12, 11, 5, 100).unwrap();
        let b = sample_fpt(&ou, 12, 11, 5, 50).unwrap();
        assert_eq!(&a.durations[..50], &b.durations[..]);
        assert_eq!(a.kind, DurationKind::Burst);
        assert_eq!(a.threshold_state, 12);
    }

    #[test]
    fn unreachable_and_cap() {
        let t = BirthDeathSpec::from_table(vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 1.0, 1.0])
            .unwrap();
        assert!(matches!(
            sample_fpt(&t, 1, 3, 0, 10),
            Err(Error::Unreachable { .. })
        ));
        let ou = BirthDeathSpec::ornstein_uhlenbeck(100).unwrap();
        let opts = SimOptions {
            step_cap: 3,
            workers: None,
        };
        assert!(matches!(
            sample_fpt_with(&ou, 10, 90, 0, 10, &opts),
            Err(Error::StepCapExceeded(3))
        ));
    }

    #[test]
    fn csv_and_sidecar() {
        let ou = BirthDeathSpec::ornstein_uhlenbeck(10).unwrap();
        let s = sample_fpt(&ou, 1, 2, 3, 20).unwrap();
        let dir = tempfile::tempdir().unwrap();
        s.save(dir.path(), "ib").unwrap();
        let back = DurationSample::load(&dir.path().join("ib.csv")).unwrap();
        assert_eq!(back, s);
        let meta: serde_json::Value =
            serde_json::from_reader(std::fs::File::open(dir.path().join("ib.json")).unwrap())
                .unwrap();
        assert_eq!(meta["kind"], "inter_burst");
        assert_eq!(meta["prng_family"], PRNG_FAMILY);
    }
}
