//! Waveform carriers: real sampled traces and complex optical field envelopes.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Uniformly sampled real-valued waveform (volts or watts by context).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    /// Sample values.
    pub samples: Vec<f64>,
    /// Samples per second; spacing is `1 / sample_rate_hz`.
    pub sample_rate_hz: f64,
    /// Time of the first sample.
    pub t0_s: f64,
}

impl SampledWaveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0) {
            return Err(Error::param("sample_rate_hz must be positive"));
        }
        Ok(Self { samples, sample_rate_hz, t0_s: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn variance(&self) -> f64 {
        if self.samples.len() < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.samples.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / self.samples.len() as f64
    }
}

/// Complex optical field envelope on a uniform grid; |samples|^2 is the
/// instantaneous optical power in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEnvelope {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
}

impl ComplexEnvelope {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0) {
            return Err(Error::param("sample_rate_hz must be positive"));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean optical power `<|A|^2>` in watts.
    pub fn mean_power_w(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|a| a.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Total energy `sum |A|^2 * dt` in joules.
    pub fn energy_j(&self) -> f64 {
        self.samples.iter().map(|a| a.norm_sqr()).sum::<f64>() / self.sample_rate_hz
    }

    /// Instantaneous power trace |A|^2.
    pub fn power_w(&self) -> Vec<f64> {
        self.samples.iter().map(|a| a.norm_sqr()).collect()
    }

    /// RMS temporal width of the |A|^2 distribution, with the time origin at
    /// the power-weighted centroid.
    pub fn rms_width_s(&self) -> Result<f64> {
        let total: f64 = self.samples.iter().map(|a| a.norm_sqr()).sum();
        if !(total > 0.0) {
            return Err(Error::degenerate("zero-energy envelope has no width"));
        }
        let dt = 1.0 / self.sample_rate_hz;
        let mut t_mean = 0.0;
        for (i, a) in self.samples.iter().enumerate() {
            t_mean += i as f64 * dt * a.norm_sqr();
        }
        t_mean /= total;
        let mut var = 0.0;
        for (i, a) in self.samples.iter().enumerate() {
            let t = i as f64 * dt - t_mean;
            var += t * t * a.norm_sqr();
        }
        Ok((var / total).sqrt())
    }

    /// Samples per bit for a given bitrate; errors unless it is integral.
    pub fn samples_per_bit(&self, bitrate_hz: f64) -> Result<usize> {
        samples_per_bit(self.sample_rate_hz, bitrate_hz)
    }
}

/// Integral samples-per-bit check shared by the transmitter and receiver.
pub fn samples_per_bit(sample_rate_hz: f64, bitrate_hz: f64) -> Result<usize> {
    if !(bitrate_hz > 0.0) || !(sample_rate_hz > 0.0) {
        return Err(Error::param("rates must be positive"));
    }
    let ratio = sample_rate_hz / bitrate_hz;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-6 * ratio.max(1.0) {
        return Err(Error::param(format!(
            "sample rate {sample_rate_hz} Hz is not an integer multiple of bitrate {bitrate_hz} Hz"
        )));
    }
    Ok(rounded as usize)
}

/// 10^(dBm/10) mW expressed in watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Inverse of [`dbm_to_watts`].
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}
