use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Density estimate on geometrically spaced bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogBinnedPdf {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub counts: Vec<u64>,
}

impl LogBinnedPdf {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin(&self, i: usize) -> (f64, f64) {
        (self.bin_edges[i], self.bin_edges[i + 1])
    }

    /// Geometric bin centre.
    pub fn center(&self, i: usize) -> f64 {
        (self.bin_edges[i] * self.bin_edges[i + 1]).sqrt()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["bin_lo", "bin_hi", "count", "density"])?;
        for i in 0..self.n_bins() {
            let (lo, hi) = self.bin(i);
            wtr.write_record([
                lo.to_string(),
                hi.to_string(),
                self.counts[i].to_string(),
                self.densities[i].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Histogram with `bins_per_decade` geometric bins spanning the sample range.
pub fn log_binned_pdf(samples: &[f64], bins_per_decade: usize) -> Result<LogBinnedPdf> {
    if samples.len() < 100 {
        return Err(Error::InsufficientData {
            needed: 100,
            got: samples.len(),
        });
    }
    if !(2..=20).contains(&bins_per_decade) {
        return Err(Error::OutOfRange {
            what: "bins per decade",
            value: bins_per_decade as i64,
            lo: 2,
            hi: 20,
        });
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &s in samples {
        if !(s.is_finite() && s > 0.0) {
            return Err(invalid(format!("log binning needs positive samples, got {s}")));
        }
        lo = lo.min(s);
        hi = hi.max(s);
    }
    let ratio = 10f64.powf(1.0 / bins_per_decade as f64);
    let n_bins = if hi > lo {
        ((hi / lo).ln() / ratio.ln()).ceil().max(1.0) as usize
    } else {
        1
    };
    let bin_edges: Vec<f64> = if hi > lo {
        (0..=n_bins).map(|i| lo * ratio.powi(i as i32)).collect()
    } else {
        // point mass: one bin of the nominal ratio centred on the value
        let half = ratio.sqrt();
        vec![lo / half, lo * half]
    };
    let mut counts = vec![0u64; n_bins];
    let base = bin_edges[0];
    for &s in samples {
        let mut i = ((s / base).ln() / ratio.ln()).floor() as isize;
        i = i.clamp(0, n_bins as isize - 1);
        let mut i = i as usize;
        // guard against rounding at the edges
        while i > 0 && s < bin_edges[i] {
            i -= 1;
        }
        while i + 1 < n_bins && s >= bin_edges[i + 1] {
            i += 1;
        }
        counts[i] += 1;
    }
    let total = samples.len() as f64;
    let densities = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| c as f64 / (total * (bin_edges[i + 1] - bin_edges[i])))
        .collect();
    Ok(LogBinnedPdf {
        bin_edges,
        densities,
        counts,
    })
}
