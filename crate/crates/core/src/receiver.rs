//! Direct-detection receiver chain: square-law detection, measured noise
//! statistics, scope band-limiting, 8-bit quantization and asynchronous
//! horizontal sampling.
//!
//! Stage order follows the measurement chain: noise is added to the detected
//! voltage on the dense grid, the scope filter band-limits it, the vertical
//! quantizer and the horizontal decimation come last. The noise fit
//! sigma^2 = m V + q is applied per grid sample, so the pre-filter variance
//! reproduces the fitted coefficients directly.

use crate::bessel::BesselLowPass;
use crate::error::{Error, Result};
use crate::metrics::LevelStats;
use crate::rng::{self, Domain};
use crate::wave::{dbm_to_watts, samples_per_bit, ComplexEnvelope, SampledWaveform};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Receiver and oscilloscope parameters. Voltages are carried in mV, the
/// natural unit of the fitted noise model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReceiverParams {
    /// Shot-noise-like coefficient m in sigma^2 = m V + q, mV.
    pub noise_m_mv: f64,
    /// Voltage-independent noise floor q, mV^2.
    pub noise_q_mv2: f64,
    /// Scope analog bandwidth (-3 dB), Hz.
    pub scope_bw_hz: f64,
    /// Scope horizontal sampling rate, Sa/s.
    pub scope_rate_hz: f64,
    /// Vertical resolution in bits.
    pub adc_bits: u32,
    /// Vertical full scale, mV; codes cover [0, full_scale].
    pub full_scale_mv: f64,
    /// Optical power to voltage conversion, mV per mW.
    pub responsivity_mv_per_mw: f64,
}

impl ReceiverParams {
    /// 10 Gbps configuration: 16 GHz scope at 40 GSa/s.
    pub fn ten_gbps() -> Self {
        Self {
            noise_m_mv: 0.0189,
            noise_q_mv2: 0.2263,
            scope_bw_hz: 16e9,
            scope_rate_hz: 40e9,
            adc_bits: 8,
            full_scale_mv: 100.0,
            responsivity_mv_per_mw: 50.0,
        }
    }

    /// 40 Gbps configuration: 28 GHz scope at 160 GSa/s.
    pub fn forty_gbps() -> Self {
        Self { scope_bw_hz: 28e9, scope_rate_hz: 160e9, ..Self::ten_gbps() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise_m_mv < 0.0 || self.noise_q_mv2 < 0.0 {
            return Err(Error::param("noise coefficients must be non-negative"));
        }
        if !(1..=16).contains(&self.adc_bits) {
            return Err(Error::param("adc_bits must lie in [1, 16]"));
        }
        if !(self.full_scale_mv > 0.0) || !(self.responsivity_mv_per_mw > 0.0) {
            return Err(Error::param("full scale and responsivity must be positive"));
        }
        if !(self.scope_bw_hz > 0.0) || !(self.scope_rate_hz > 0.0) {
            return Err(Error::param("scope bandwidth and rate must be positive"));
        }
        Ok(())
    }

    /// Quantizer step in mV.
    pub fn lsb_mv(&self) -> f64 {
        self.full_scale_mv / ((1u32 << self.adc_bits) - 1) as f64
    }
}

/// Result of one simulated acquisition.
#[derive(Debug, Clone)]
pub struct Detection {
    /// Scope-rate voltage trace in mV, quantized. `t0_s` records the random
    /// trigger offset.
    pub waveform: SampledWaveform,
    /// Trigger offset in grid samples, uniform over the first quarter bit.
    pub offset_grid_samples: usize,
    /// Fraction of post-filter samples clipped at full scale.
    pub clipped_fraction: f64,
    /// Set when more than half of the samples overflow the vertical range;
    /// the PRX configuration is suspect.
    pub overflow_warning: bool,
}

/// Per-sample additive noise with variance m V + q (V clamped at zero for
/// the variance evaluation).
pub fn add_noise(voltage_mv: &[f64], m_mv: f64, q_mv2: f64, rng: &mut impl Rng) -> Vec<f64> {
    voltage_mv
        .iter()
        .map(|&v| {
            let sigma = (m_mv * v.max(0.0) + q_mv2).sqrt();
            let g: f64 = StandardNormal.sample(rng);
            v + sigma * g
        })
        .collect()
}

/// Uniform vertical quantization over [0, full_scale]; values outside the
/// range clip to the end codes.
pub fn quantize(voltage_mv: &[f64], adc_bits: u32, full_scale_mv: f64) -> Vec<f64> {
    let levels = ((1u32 << adc_bits) - 1) as f64;
    voltage_mv
        .iter()
        .map(|&v| {
            let code = (v.clamp(0.0, full_scale_mv) / full_scale_mv * levels).round();
            code * full_scale_mv / levels
        })
        .collect()
}

/// Circular decimation by an integer factor starting at `offset`.
pub fn decimate(samples: &[f64], factor: usize, offset: usize) -> Result<Vec<f64>> {
    if factor == 0 || samples.len() % factor != 0 {
        return Err(Error::param("decimation factor must divide the window length"));
    }
    let n = samples.len();
    Ok((0..n / factor).map(|i| samples[(offset + i * factor) % n]).collect())
}

/// Full receiver pipeline. The envelope is rescaled so its mean optical
/// power equals `prx_dbm`, detected as |A|^2, and then passed through
/// noise -> scope filter -> quantizer -> asynchronous decimation.
///
/// `rng_seed` fixes both the noise realization and the trigger offset.
pub fn detect(
    field: &ComplexEnvelope,
    params: &ReceiverParams,
    prx_dbm: f64,
    bitrate_hz: f64,
    rng_seed: u64,
) -> Result<Detection> {
    params.validate()?;
    if field.is_empty() {
        return Err(Error::degenerate("empty envelope at the receiver"));
    }
    let mean_p = field.mean_power_w();
    if !(mean_p > 0.0) {
        return Err(Error::degenerate("zero optical power at the receiver"));
    }
    let grid_rate = field.sample_rate_hz;
    let spb = samples_per_bit(grid_rate, bitrate_hz)?;
    let decim = {
        let ratio = grid_rate / params.scope_rate_hz;
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > 1e-6 {
            return Err(Error::param("scope rate must divide the grid rate"));
        }
        rounded as usize
    };

    let mut rng = rng::stream(rng_seed, Domain::Acquisition, 0);
    // Trigger offset: uniform over the first quarter of the first bit.
    let support = (spb / 4).max(1);
    let offset = rng.random_range(0..support);

    let prx_mw = dbm_to_watts(prx_dbm) * 1e3;
    let power_scale = prx_mw / (mean_p * 1e3);
    let voltage: Vec<f64> = field
        .samples
        .iter()
        .map(|a| a.norm_sqr() * 1e3 * power_scale * params.responsivity_mv_per_mw)
        .collect();

    let noisy = add_noise(&voltage, params.noise_m_mv, params.noise_q_mv2, &mut rng);
    let filtered = BesselLowPass::new(params.scope_bw_hz).apply(&noisy, grid_rate);

    let clipped = filtered.iter().filter(|&&v| v > params.full_scale_mv).count();
    let clipped_fraction = clipped as f64 / filtered.len() as f64;

    let quantized = quantize(&filtered, params.adc_bits, params.full_scale_mv);
    let scope_samples = decimate(&quantized, decim, offset)?;

    let mut waveform = SampledWaveform::new(scope_samples, params.scope_rate_hz)?;
    waveform.t0_s = offset as f64 / grid_rate;

    Ok(Detection {
        waveform,
        offset_grid_samples: offset,
        clipped_fraction,
        overflow_warning: clipped_fraction > 0.5,
    })
}

/// Measured SNR in dB from labeled level statistics:
/// 10 log10(swing^2 / mean noise variance) with swing = I1 - I0 and the mean
/// variance (sigma0^2 + sigma1^2) / 2. Noiseless signals cap at 99 dB.
pub fn snr_at_receiver(stats: &LevelStats) -> Result<f64> {
    let swing = stats.i1 - stats.i0;
    if !(swing > 0.0) {
        return Err(Error::degenerate("single-level signal has no defined SNR"));
    }
    let mean_var = 0.5 * (stats.sigma0 * stats.sigma0 + stats.sigma1 * stats.sigma1);
    if mean_var <= 0.0 {
        return Ok(99.0);
    }
    Ok((10.0 * (swing * swing / mean_var).log10()).min(99.0))
}

/// Model SNR of a clean two-level signal at a given received power, using
/// the static extinction levels and the fitted pre-filter noise variance.
pub fn analytic_snr_db(prx_dbm: f64, extinction_ratio_db: f64, params: &ReceiverParams) -> f64 {
    let r = 10f64.powf(extinction_ratio_db / 10.0);
    let v_mean = dbm_to_watts(prx_dbm) * 1e3 * params.responsivity_mv_per_mw;
    let swing = 2.0 * v_mean * (r - 1.0) / (r + 1.0);
    let mean_var = params.noise_m_mv * v_mean + params.noise_q_mv2;
    10.0 * (swing * swing / mean_var).log10()
}

/// Invert [`analytic_snr_db`]: the received power (dBm) at which the clean
/// two-level signal reaches the target SNR. This pins the operating points
/// (the training point and the fixed-SNR studies).
pub fn prx_dbm_for_snr(target_snr_db: f64, extinction_ratio_db: f64, params: &ReceiverParams) -> f64 {
    let r = 10f64.powf(extinction_ratio_db / 10.0);
    let c = (r - 1.0) / (r + 1.0);
    let s = 10f64.powf(target_snr_db / 10.0);
    // 4 c^2 V^2 = s (m V + q)  =>  V = [s m + sqrt(s^2 m^2 + 16 c^2 s q)] / (8 c^2)
    let m = params.noise_m_mv;
    let q = params.noise_q_mv2;
    let v_mean = (s * m + (s * s * m * m + 16.0 * c * c * s * q).sqrt()) / (8.0 * c * c);
    let prx_mw = v_mean / params.responsivity_mv_per_mw;
    10.0 * prx_mw.log10()
}
