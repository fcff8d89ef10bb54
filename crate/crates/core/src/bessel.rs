//! 5th-order Bessel low-pass filter, applied as a frequency-domain transfer
//! function over one circular period (phase-faithful realization).
//!
//! The same family serves both the modulator band limit and the oscilloscope
//! front end.

use crate::fft;
use num_complex::Complex64;
use std::f64::consts::TAU;
use std::sync::OnceLock;

/// Reverse Bessel polynomial coefficients for order 5, constant term first:
/// theta_5(s) = 945 + 945 s + 420 s^2 + 105 s^3 + 15 s^4 + s^5.
const THETA5: [f64; 6] = [945.0, 945.0, 420.0, 105.0, 15.0, 1.0];

fn theta5(s: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in THETA5.iter().rev() {
        acc = acc * s + c;
    }
    acc
}

/// Normalized prototype response at natural angular frequency `w`.
fn prototype(w: f64) -> Complex64 {
    THETA5[0] / theta5(Complex64::new(0.0, w))
}

/// Natural frequency of the -3 dB point of the order-5 prototype, solved
/// once by bisection on |H|^2 = 1/2.
fn w3db() -> f64 {
    static W3: OnceLock<f64> = OnceLock::new();
    *W3.get_or_init(|| {
        let (mut lo, mut hi) = (1.0f64, 4.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if prototype(mid).norm_sqr() > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// 5th-order Bessel low-pass with a given -3 dB cutoff.
#[derive(Debug, Clone, Copy)]
pub struct BesselLowPass {
    pub cutoff_hz: f64,
}

impl BesselLowPass {
    pub fn new(cutoff_hz: f64) -> Self {
        Self { cutoff_hz }
    }

    /// Complex transfer at baseband angular frequency `omega` (rad/s).
    /// DC gain is exactly 1; |H|^2 = 1/2 at the cutoff.
    pub fn transfer(&self, omega: f64) -> Complex64 {
        prototype(w3db() * omega / (TAU * self.cutoff_hz))
    }

    /// Filter a real waveform circularly over its full length.
    pub fn apply(&self, samples: &[f64], sample_rate_hz: f64) -> Vec<f64> {
        fft::filter_real(samples, sample_rate_hz, |omega| self.transfer(omega))
    }

    /// Noise power gain for white noise sampled at `sample_rate_hz`:
    /// the mean of |H|^2 over the sampling band. Multiplying a white
    /// per-sample variance by this factor gives the post-filter variance.
    pub fn noise_bandwidth_factor(&self, sample_rate_hz: f64) -> f64 {
        let n = 8192;
        let mut acc = 0.0;
        for k in 0..n {
            let f = (k as f64 + 0.5) / n as f64 * sample_rate_hz / 2.0;
            acc += self.transfer(TAU * f).norm_sqr();
        }
        acc / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_gain_is_unity() {
        let f = BesselLowPass::new(16e9);
        let h0 = f.transfer(0.0);
        assert!((h0.re - 1.0).abs() < 1e-12 && h0.im.abs() < 1e-12);
    }

    #[test]
    fn cutoff_is_3db() {
        let f = BesselLowPass::new(16e9);
        let mag2 = f.transfer(TAU * 16e9).norm_sqr();
        assert!((mag2 - 0.5).abs() < 1e-9, "|H(fc)|^2 = {mag2}");
    }

    #[test]
    fn response_rolls_off() {
        let f = BesselLowPass::new(16e9);
        let g1 = f.transfer(TAU * 8e9).norm_sqr();
        let g2 = f.transfer(TAU * 32e9).norm_sqr();
        let g3 = f.transfer(TAU * 96e9).norm_sqr();
        assert!(g1 > 0.5 && g2 < 0.5 && g3 < 1e-3);
        // Hermitian symmetry: negative frequencies mirror.
        let hp = f.transfer(TAU * 10e9);
        let hn = f.transfer(-TAU * 10e9);
        assert!((hp - hn.conj()).norm() < 1e-12);
    }

    #[test]
    fn constant_input_passes_unchanged() {
        let f = BesselLowPass::new(30e9);
        let x = vec![3.25; 512];
        let y = f.apply(&x, 320e9);
        for v in y {
            assert!((v - 3.25).abs() < 1e-9);
        }
    }

    #[test]
    fn filtered_mean_is_preserved() {
        // DC gain 1 within 1e-3: the mean of any circular block is preserved.
        let x: Vec<f64> = (0..1024).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let f = BesselLowPass::new(16e9);
        let y = f.apply(&x, 320e9);
        let mx = x.iter().sum::<f64>() / x.len() as f64;
        let my = y.iter().sum::<f64>() / y.len() as f64;
        assert!((mx - my).abs() < 1e-3 * mx.abs().max(1.0));
    }

    #[test]
    fn noise_bandwidth_scales_with_cutoff() {
        let narrow = BesselLowPass::new(16e9).noise_bandwidth_factor(320e9);
        let wide = BesselLowPass::new(28e9).noise_bandwidth_factor(320e9);
        assert!(narrow > 0.05 && narrow < 0.2, "narrow factor {narrow}");
        assert!((wide / narrow - 28.0 / 16.0).abs() < 0.05, "ratio {}", wide / narrow);
    }
}
