//! Shared FFT plans and frequency-grid helpers.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex, OnceLock};

struct PlanCache {
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
    planner: FftPlanner<f64>,
}

fn cache() -> &'static Mutex<PlanCache> {
    static CACHE: OnceLock<Mutex<PlanCache>> = OnceLock::new();
    CACHE.get_or_init(|| {
        Mutex::new(PlanCache {
            forward: HashMap::new(),
            inverse: HashMap::new(),
            planner: FftPlanner::new(),
        })
    })
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut c = cache().lock().expect("fft plan cache poisoned");
    let c = &mut *c;
    let map = if forward { &mut c.forward } else { &mut c.inverse };
    map.entry(n)
        .or_insert_with(|| {
            if forward {
                c.planner.plan_fft_forward(n)
            } else {
                c.planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

/// In-place forward FFT (unnormalized, rustfft convention).
pub fn forward(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
}

/// In-place inverse FFT, normalized by 1/N so that `inverse(forward(x)) == x`.
pub fn inverse(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Baseband angular frequency ω for FFT bin `k` of an N-point transform at
/// `sample_rate_hz`. Standard FFT ordering: ω = 0 at the DC bin, negative
/// frequencies in the upper half.
pub fn angular_frequency(k: usize, n: usize, sample_rate_hz: f64) -> f64 {
    let k = k as f64;
    let n_f = n as f64;
    let cycles = if k <= n_f / 2.0 { k } else { k - n_f };
    TAU * cycles * sample_rate_hz / n_f
}

/// Apply a frequency-domain transfer function to a real-valued waveform over
/// one circular period. `transfer(omega)` is evaluated on the signed baseband
/// grid; for real-coefficient filters this keeps the output real up to
/// roundoff, and the tiny imaginary residue is dropped.
pub fn filter_real(samples: &[f64], sample_rate_hz: f64, transfer: impl Fn(f64) -> Complex64) -> Vec<f64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    forward(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= transfer(angular_frequency(k, n, sample_rate_hz));
    }
    inverse(&mut buf);
    buf.into_iter().map(|v| v.re).collect()
}
