//! NRZ transmitter: PRBS drive through a band-limited, chirp-free intensity
//! modulator.
//!
//! The modulator is an ideal intensity mapper: the rectangular drive is
//! low-pass filtered to the analog bandwidth, clipped at zero, and mapped
//! onto static power levels set by the extinction ratio. With null chirp the
//! emitted field is the square root of the instantaneous power with zero
//! phase everywhere.

use crate::bessel::BesselLowPass;
use crate::error::{Error, Result};
use crate::prbs::BitSequence;
use crate::wave::{samples_per_bit, ComplexEnvelope};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Static modulator parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModulatorParams {
    /// Electro-optical analog bandwidth of the drive path.
    pub analog_bandwidth_hz: f64,
    /// Static extinction ratio P_high / P_low in dB.
    pub extinction_ratio_db: f64,
    /// Modulation chirp; must be 0 (chirp-free contract).
    pub chirp: f64,
    /// Target mean optical power in watts.
    pub avg_power_w: f64,
}

impl ModulatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.extinction_ratio_db > 0.0) {
            return Err(Error::param("extinction_ratio_db must be positive"));
        }
        if self.chirp != 0.0 {
            return Err(Error::param("only chirp-free modulation is modeled"));
        }
        if !(self.analog_bandwidth_hz > 0.0) {
            return Err(Error::param("analog_bandwidth_hz must be positive"));
        }
        if !(self.avg_power_w > 0.0) {
            return Err(Error::param("avg_power_w must be positive"));
        }
        Ok(())
    }
}

/// Modulate a bit sequence onto the optical carrier at `grid_rate_hz`.
///
/// The mean of |A|^2 equals `avg_power_w` exactly for the supplied pattern;
/// the high/low power ratio equals the static extinction ratio.
pub fn modulate(bits: &BitSequence, params: &ModulatorParams, grid_rate_hz: f64) -> Result<ComplexEnvelope> {
    params.validate()?;
    if bits.is_empty() {
        return Err(Error::degenerate("empty bit sequence"));
    }
    let spb = samples_per_bit(grid_rate_hz, bits.bitrate_hz)?;

    let drive = bits.nrz_drive(spb, 1);
    let filter = BesselLowPass::new(params.analog_bandwidth_hz);
    let mut filtered = filter.apply(&drive, grid_rate_hz);
    // Negative excursions would make the square root complex; clip them.
    for v in filtered.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }

    let mean_drive = filtered.iter().sum::<f64>() / filtered.len() as f64;
    let r = 10f64.powf(params.extinction_ratio_db / 10.0);
    // Solve P_high from <P> = P_low + (P_high - P_low) <drive>, P_low = P_high / r.
    let p_high = params.avg_power_w / (mean_drive * (1.0 - 1.0 / r) + 1.0 / r);
    let p_low = p_high / r;

    let samples = filtered
        .iter()
        .map(|&d| Complex64::new((p_low + (p_high - p_low) * d).sqrt(), 0.0))
        .collect();
    ComplexEnvelope::new(samples, grid_rate_hz)
}
