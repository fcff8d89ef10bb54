//! Eye-trace and level-histogram exports.
//!
//! CSV schemas:
//!   histogram: value_bin,count_class0,count_class1
//!   eye:       bit_phase,amplitude

use crate::error::{Error, Result};
use crate::metrics::UndersampledTrace;
use crate::wave::SampledWaveform;
use std::io::Write;
use std::path::Path;

/// Two-class level histogram over normalized amplitude [0, 1].
#[derive(Debug, Clone)]
pub struct LevelHistogram {
    /// Bin centers on the normalized amplitude axis.
    pub bin_centers: Vec<f64>,
    pub count_class0: Vec<u64>,
    pub count_class1: Vec<u64>,
    /// Normalization used: (min, max) of the raw values.
    pub value_range: (f64, f64),
}

/// Normalize values to [0, 1] by their own min/max.
pub fn normalize01(values: &[f64]) -> Result<(Vec<f64>, (f64, f64))> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::degenerate("flat trace cannot be normalized"));
    }
    Ok((values.iter().map(|&v| (v - lo) / (hi - lo)).collect(), (lo, hi)))
}

/// Histogram of an undersampled trace, classes split by the ground-truth
/// labels, on the normalized amplitude axis.
pub fn level_histogram(trace: &UndersampledTrace, n_bins: usize) -> Result<LevelHistogram> {
    if n_bins < 2 {
        return Err(Error::param("need at least two bins"));
    }
    let (normalized, range) = normalize01(&trace.values)?;
    let mut count_class0 = vec![0u64; n_bins];
    let mut count_class1 = vec![0u64; n_bins];
    for (&v, &b) in normalized.iter().zip(&trace.labels) {
        let bin = ((v * n_bins as f64) as usize).min(n_bins - 1);
        if b == 0 {
            count_class0[bin] += 1;
        } else {
            count_class1[bin] += 1;
        }
    }
    let bin_centers = (0..n_bins).map(|i| (i as f64 + 0.5) / n_bins as f64).collect();
    Ok(LevelHistogram { bin_centers, count_class0, count_class1, value_range: range })
}

impl LevelHistogram {
    /// Overlap integral of the per-class normalized densities:
    /// sum over bins of min(p0, p1). 0 for disjoint clusters, 1 for equal.
    pub fn class_overlap(&self) -> f64 {
        let n0: u64 = self.count_class0.iter().sum();
        let n1: u64 = self.count_class1.iter().sum();
        if n0 == 0 || n1 == 0 {
            return 0.0;
        }
        self.count_class0
            .iter()
            .zip(&self.count_class1)
            .map(|(&c0, &c1)| (c0 as f64 / n0 as f64).min(c1 as f64 / n1 as f64))
            .sum()
    }
}

/// Fraction of class-0 samples whose normalized amplitude falls in
/// [lo, hi]; the raised-zero population of a dispersed link shows up here.
pub fn class0_band_fraction(trace: &UndersampledTrace, lo: f64, hi: f64) -> Result<f64> {
    let (normalized, _) = normalize01(&trace.values)?;
    let mut in_band = 0usize;
    let mut total = 0usize;
    for (&v, &b) in normalized.iter().zip(&trace.labels) {
        if b == 0 {
            total += 1;
            if v >= lo && v <= hi {
                in_band += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::degenerate("no class-0 samples"));
    }
    Ok(in_band as f64 / total as f64)
}

/// Write the histogram CSV: value_bin,count_class0,count_class1.
pub fn write_histogram_csv(path: &Path, hist: &LevelHistogram) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "value_bin,count_class0,count_class1")?;
    for i in 0..hist.bin_centers.len() {
        writeln!(
            f,
            "{:.6},{},{}",
            hist.bin_centers[i], hist.count_class0[i], hist.count_class1[i]
        )?;
    }
    Ok(())
}

/// Write the overlaid eye CSV: bit_phase,amplitude. One row per sample of
/// every bit, phase counted 1..=samples_per_bit.
pub fn write_eye_csv(path: &Path, aligned: &SampledWaveform, samples_per_bit: usize) -> Result<()> {
    if samples_per_bit == 0 || aligned.len() % samples_per_bit != 0 {
        return Err(Error::param("trace length must be a whole number of bits"));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "bit_phase,amplitude")?;
    for (i, &v) in aligned.samples.iter().enumerate() {
        writeln!(f, "{},{:.6e}", i % samples_per_bit + 1, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(values: Vec<f64>, labels: Vec<u8>) -> UndersampledTrace {
        UndersampledTrace { values, sample_index: 2, labels }
    }

    #[test]
    fn clean_levels_make_disjoint_clusters() {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..1000 {
            if i % 2 == 0 {
                values.push(0.02 + 1e-4 * (i % 5) as f64);
                labels.push(0);
            } else {
                values.push(0.98 + 1e-4 * (i % 5) as f64);
                labels.push(1);
            }
        }
        let hist = level_histogram(&trace(values, labels), 50).unwrap();
        assert_eq!(hist.class_overlap(), 0.0);
        let n0: u64 = hist.count_class0.iter().sum();
        assert_eq!(n0, 500);
    }

    #[test]
    fn overlapping_levels_have_high_overlap() {
        // Both classes see the same value population.
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..2000 {
            values.push(((i / 2) % 100) as f64);
            labels.push((i % 2) as u8);
        }
        let hist = level_histogram(&trace(values, labels), 40).unwrap();
        assert!(hist.class_overlap() > 0.95);
    }

    #[test]
    fn band_fraction_counts_raised_zeros() {
        // Half the zeros sit mid-band, half at the bottom; ones at the top.
        let mut values = vec![0.0, 0.35, 1.0, 0.0, 0.35, 1.0];
        let mut labels = vec![0u8, 0, 1, 0, 0, 1];
        values.push(0.0);
        labels.push(0);
        let t = trace(values, labels);
        let frac = class0_band_fraction(&t, 0.3, 0.4).unwrap();
        assert!((frac - 0.4).abs() < 1e-12, "band fraction {frac}");
    }

    #[test]
    fn csv_files_have_expected_schemas() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f64> = (0..100).map(|i| (i % 10) as f64).collect();
        let labels: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let hist = level_histogram(&trace(values, labels), 10).unwrap();
        let hpath = dir.path().join("hist.csv");
        write_histogram_csv(&hpath, &hist).unwrap();
        let text = std::fs::read_to_string(&hpath).unwrap();
        assert!(text.starts_with("value_bin,count_class0,count_class1\n"));
        assert_eq!(text.lines().count(), 11);

        let wave = SampledWaveform::new((0..32).map(|i| i as f64).collect(), 40e9).unwrap();
        let epath = dir.path().join("eye.csv");
        write_eye_csv(&epath, &wave, 4).unwrap();
        let text = std::fs::read_to_string(&epath).unwrap();
        assert!(text.starts_with("bit_phase,amplitude\n"));
        assert_eq!(text.lines().count(), 33);
        assert!(text.lines().nth(1).unwrap().starts_with("1,"));
        assert!(text.lines().nth(4).unwrap().starts_with("4,"));
    }
}
