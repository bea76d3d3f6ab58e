//! Truncated generators and their eigenvalue spectra.
//!
//! Truncating a birth–death generator at state `n` makes `n` absorbing. The
//! negative of the remaining `n × n` block is a tridiagonal M-matrix whose
//! eigenvalues are the decay rates of the passage-time density from `n − 1`.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::process::BirthDeathSpec;

/// `−Q` restricted to the states `0..size`, stored by diagonals.
///
/// `upper[i]` is the rate `i → i+1`, `lower[i]` the rate `i+1 → i`. Any
/// excess of the diagonal over the row's off-diagonal rates is the rate of
/// leaving the truncated block, kept separately in `killing` so it never has
/// to be recovered by subtraction.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGenerator {
    size: usize,
    diag: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    killing: Vec<f64>,
}

impl TruncatedGenerator {
    /// Truncates `spec` at `threshold_state`, removing every transition into it.
    pub fn truncate(spec: &BirthDeathSpec, threshold_state: usize) -> Result<Self> {
        let n = threshold_state;
        if n < 1 || n > spec.n_states() {
            return Err(Error::OutOfRange {
                what: "threshold state",
                value: n as i64,
                lo: 1,
                hi: spec.n_states() as i64,
            });
        }
        let diag = (0..n)
            .map(|i| spec.birth_rate(i) + spec.death_rate(i))
            .collect();
        let upper = (0..n - 1).map(|i| spec.birth_rate(i)).collect();
        let lower = (0..n - 1).map(|i| spec.death_rate(i + 1)).collect();
        let mut killing = vec![0.0; n];
        killing[n - 1] = spec.birth_rate(n - 1);
        Ok(Self {
            size: n,
            diag,
            lower,
            upper,
            killing,
        })
    }

    /// Builds a generator from explicit diagonals, checking that each row of
    /// `−Q` is weakly diagonally dominant and strictly so in the last row.
    pub fn from_parts(diag: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(invalid("generator must have at least one state"));
        }
        if lower.len() != n - 1 || upper.len() != n - 1 {
            return Err(invalid(format!(
                "off-diagonals must have {} entries, got lower={} upper={}",
                n - 1,
                lower.len(),
                upper.len()
            )));
        }
        if diag
            .iter()
            .chain(&lower)
            .chain(&upper)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(invalid("generator entries must be finite and non-negative"));
        }
        let mut killing = Vec::with_capacity(n);
        for i in 0..n {
            let off = row_off(&lower, &upper, i);
            let excess = diag[i] - off;
            if excess < -1e-12 * diag[i].max(off) {
                return Err(invalid(format!(
                    "row {i}: diagonal {} is below the outgoing rates {off}",
                    diag[i]
                )));
            }
            killing.push(excess.max(0.0));
        }
        if killing[n - 1] <= 0.0 {
            return Err(invalid(
                "last row must leak into the absorbing state (strict dominance)",
            ));
        }
        Ok(Self {
            size: n,
            diag,
            lower,
            upper,
            killing,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Symmetrized form: the same diagonal with off-diagonal `√(upper·lower)`.
    pub fn symmetrized(&self) -> (Vec<f64>, Vec<f64>) {
        let off = self
            .upper
            .iter()
            .zip(&self.lower)
            .map(|(u, l)| (u * l).sqrt())
            .collect();
        (self.diag.clone(), off)
    }

    /// Index ranges of the blocks left after cutting every coupling with
    /// `upper[i]·lower[i] = 0`.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 0..self.size - 1 {
            if self.upper[i] * self.lower[i] == 0.0 {
                out.push(start..i + 1);
                start = i + 1;
            }
        }
        out.push(start..self.size);
        out
    }

    /// The block containing the last state, i.e. the states a passage started
    /// at `size − 1` can visit.
    ///
    /// Fails when the walk can fall out of that block below and never return,
    /// which would leave the absorbing state unreachable.
    pub fn passage_block(&self) -> Result<Range<usize>> {
        let block = self.blocks().pop().expect("at least one block");
        if block.start > 0 {
            let cut = block.start - 1;
            if self.lower[cut] > 0.0 && self.upper[cut] == 0.0 {
                return Err(Error::Unreachable {
                    from: self.size - 1,
                    to: self.size,
                    reason: format!("no way back up from state {cut}"),
                });
            }
        }
        Ok(block)
    }

    /// The principal sub-generator on `range`. Couplings cut at the range
    /// boundary turn into killing rates.
    pub fn sub_generator(&self, range: Range<usize>) -> Self {
        let Range { start, end } = range;
        assert!(start < end && end <= self.size);
        let mut killing = self.killing[start..end].to_vec();
        if start > 0 {
            killing[0] += self.lower[start - 1];
        }
        if end < self.size {
            *killing.last_mut().unwrap() += self.upper[end - 1];
        }
        Self {
            size: end - start,
            diag: self.diag[start..end].to_vec(),
            lower: self.lower[start..end - 1].to_vec(),
            upper: self.upper[start..end - 1].to_vec(),
            killing,
        }
    }

    /// Number of eigenvalues strictly below `x`.
    ///
    /// Counts negative pivots of `LDU(−Q − x)`, carried in a differential
    /// form `q_r = upper_r + killing_r + t_r` that never subtracts two large
    /// rates. Small eigenvalues of stiff generators stay relatively accurate.
    pub fn count_below(&self, x: f64) -> usize {
        let m = self.size;
        let pivmin = f64::MIN_POSITIVE * 1e4;
        let up = |r: usize| if r + 1 < m { self.upper[r] } else { 0.0 };
        let mut count = 0;
        let mut t = -x;
        let mut q = up(0) + self.killing[0] + t;
        for r in 1..m {
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
            t = self.lower[r - 1] * (self.killing[r - 1] + t) / q - x;
            q = up(r) + self.killing[r] + t;
        }
        if q < 0.0 || q.abs() < pivmin {
            count += 1;
        }
        count
    }

    fn gershgorin_upper(&self) -> f64 {
        (0..self.size)
            .map(|i| self.diag[i] + row_off(&self.lower, &self.upper, i))
            .fold(0.0, f64::max)
    }

    /// All eigenvalues of this generator (every block), ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut eigs = Vec::with_capacity(self.size);
        for block in self.blocks() {
            let sub = if block.len() == self.size {
                self.clone()
            } else {
                self.sub_generator(block)
            };
            eigs.extend(sub.bisect_all());
        }
        eigs.sort_by(f64::total_cmp);
        check_positive(&eigs)?;
        Ok(eigs)
    }

    /// Eigenvalues of the passage block only; these are the rates that enter
    /// the first-passage density from `size − 1`.
    pub fn passage_eigenvalues(&self) -> Result<Vec<f64>> {
        let block = self.passage_block()?;
        let sub = if block.len() == self.size {
            self.clone()
        } else {
            self.sub_generator(block)
        };
        let eigs = sub.bisect_all();
        check_positive(&eigs)?;
        Ok(eigs)
    }

    fn bisect_all(&self) -> Vec<f64> {
        if self.size == 1 {
            return vec![self.diag[0]];
        }
        let hi0 = self.gershgorin_upper() * (1.0 + 4.0 * f64::EPSILON) + f64::MIN_POSITIVE;
        let mut out = Vec::with_capacity(self.size);
        let mut floor = 0.0f64;
        for k in 0..self.size {
            let (mut lo, mut hi) = (floor, hi0);
            for _ in 0..MAX_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi || hi - lo <= BISECT_RTOL * hi.abs() {
                    break;
                }
                if self.count_below(mid) <= k {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let value = 0.5 * (lo + hi);
            floor = lo;
            out.push(value);
        }
        out
    }
}

const BISECT_RTOL: f64 = 4.0 * f64::EPSILON;
/// Enough halvings to walk from the Gershgorin bound down to the subnormal range.
const MAX_BISECTIONS: usize = 2200;

fn row_off(lower: &[f64], upper: &[f64], i: usize) -> f64 {
    let left = if i > 0 { lower[i - 1] } else { 0.0 };
    let right = if i < upper.len() { upper[i] } else { 0.0 };
    left + right
}

fn check_positive(eigs: &[f64]) -> Result<()> {
    match eigs.iter().position(|&v| !(v > 0.0)) {
        Some(rank) => Err(Error::NonPositiveEigenvalue {
            rank: rank + 1,
            value: eigs[rank],
        }),
        None => Ok(()),
    }
}

/// Spectrum of the passage block of `spec` truncated at `threshold_state`.
pub fn passage_spectrum(spec: &BirthDeathSpec, threshold_state: usize) -> Result<Vec<f64>> {
    TruncatedGenerator::truncate(spec, threshold_state)?.passage_eigenvalues()
}

/// Sorted eigenvalues plus a least-squares line through `√λᵢ` against rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub sqrt_fit_slope: f64,
    pub sqrt_fit_intercept: f64,
    /// Inclusive 1-based rank range used by the fit.
    pub fit_window: (usize, usize),
    pub r_squared: f64,
    /// `√λᵢ − (slope·i + intercept)` over the window.
    pub residuals: Vec<f64>,
}

/// Default fit window, ranks `⌈0.2n⌉ ..= ⌊0.8n⌋`.
pub fn default_window(n: usize) -> (usize, usize) {
    let lo = ((0.2 * n as f64).ceil() as usize).max(1);
    let hi = (0.8 * n as f64).floor() as usize;
    (lo, hi)
}

pub fn sqrt_linearity(eigs: &[f64], window: Option<(usize, usize)>) -> Result<SpectrumReport> {
    if eigs.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: eigs.len(),
        });
    }
    let (lo, hi) = window.unwrap_or_else(|| default_window(eigs.len()));
    if lo < 1 || hi > eigs.len() || hi < lo + 2 {
        return Err(invalid(format!(
            "fit window {lo}..={hi} must hold at least 3 ranks within 1..={}",
            eigs.len()
        )));
    }
    let xs: Vec<f64> = (lo..=hi).map(|i| i as f64).collect();
    let ys: Vec<f64> = eigs[lo - 1..hi].iter().map(|v| v.sqrt()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (slope * x + intercept))
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(SpectrumReport {
        eigenvalues: eigs.to_vec(),
        sqrt_fit_slope: slope,
        sqrt_fit_intercept: intercept,
        fit_window: (lo, hi),
        r_squared,
        residuals,
    })
}

/// Writes `rank,eigenvalue,sqrt_eigenvalue`.
pub fn write_spectrum_csv<W: Write>(eigs: &[f64], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["rank", "eigenvalue", "sqrt_eigenvalue"])?;
    for (i, v) in eigs.iter().enumerate() {
        wtr.write_record([(i + 1).to_string(), v.to_string(), v.sqrt().to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
