//! The 4-channel time-delayed complex perceptron.
//!
//! The input field is split into `n_taps` branches; branch k carries a fixed
//! spiral attenuation a_k, a tunable phase phi_k and an integer-sample delay
//! (k-1) * delta_t, and the branches recombine coherently:
//!
//!   out(t) = (1/N) sum_k a_k exp(i phi_k) u(t - (k-1) delta_t)
//!
//! The 1/N amplitude factor models the ideal 1xN split plus Nx1 combine
//! (amplitude 1/sqrt(N) each), so a single equal-amplitude in-phase N-way
//! recombination reaches 0 dB excess loss. Chromatic dispersion inside the
//! device is negligible (the spirals are ~1 cm against a ~2 km dispersion
//! length) and the delays act as exact circular sample shifts.

use crate::error::{Error, Result};
use crate::wave::ComplexEnvelope;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Tunable and fixed state of the perceptron.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceState {
    /// Number of taps N_T.
    pub n_taps: usize,
    /// Delay granularity between adjacent channels, seconds.
    pub delta_t_s: f64,
    /// Per-channel spiral attenuation in dB; channel 1 is the undelayed
    /// reference and must sit at 0 dB.
    pub attenuation_db: Vec<f64>,
    /// Per-channel zero-current phase offsets phi_k^0, radians.
    pub phase_offsets_rad: Vec<f64>,
    /// Per-channel heater currents, mA.
    pub currents_ma: Vec<f64>,
    /// Current-to-phase conversion, rad/mA^2.
    pub gamma_rad_per_ma2: f64,
    /// Allowed current range [lo, hi] in mA.
    pub current_bounds_ma: [f64; 2],
    /// Fixed grating/insertion loss in dB; reporting only, excluded from the
    /// excess-loss figure.
    pub insertion_loss_db: f64,
}

impl DeviceState {
    /// The fabricated 4-channel device: spiral losses 0 / 2.1 / 4.3 / 6.4 dB,
    /// gamma = 0.01 rad/mA^2, currents tunable in [0, 30] mA.
    pub fn paper_default(delta_t_s: f64) -> Self {
        Self {
            n_taps: 4,
            delta_t_s,
            attenuation_db: vec![0.0, 2.1, 4.3, 6.4],
            phase_offsets_rad: vec![0.0; 4],
            currents_ma: vec![0.0; 4],
            gamma_rad_per_ma2: 0.01,
            current_bounds_ma: [0.0, 30.0],
            insertion_loss_db: 8.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_taps == 0 {
            return Err(Error::param("device needs at least one tap"));
        }
        for field in [&self.attenuation_db, &self.phase_offsets_rad, &self.currents_ma] {
            if field.len() != self.n_taps {
                return Err(Error::param(format!(
                    "per-channel lists must have n_taps = {} entries",
                    self.n_taps
                )));
            }
        }
        if self.attenuation_db[0] != 0.0 {
            return Err(Error::param("channel 1 is the reference and must have 0 dB attenuation"));
        }
        if !(self.delta_t_s > 0.0) && self.n_taps > 1 {
            return Err(Error::param("delta_t_s must be positive"));
        }
        Ok(())
    }

    /// Per-channel amplitude weights |w_k| = 10^(-attenuation/20).
    pub fn weight_magnitudes(&self) -> Vec<f64> {
        self.attenuation_db.iter().map(|&a| 10f64.powf(-a / 20.0)).collect()
    }

    /// Replace the tunable phases directly (phase-space training mode):
    /// offsets take the given values and currents are zeroed.
    pub fn with_phases(mut self, phases: &[f64]) -> Self {
        self.phase_offsets_rad = phases.to_vec();
        self.phase_offsets_rad[0] = 0.0;
        self.currents_ma = vec![0.0; self.n_taps];
        self
    }

    /// Replace the heater currents; channel 1 stays at its reference value.
    pub fn with_currents(mut self, currents: &[f64]) -> Self {
        self.currents_ma = currents.to_vec();
        self
    }

    pub fn phases(&self) -> Result<Vec<f64>> {
        phases_from_currents(self)
    }
}

/// Recombination phases from the heater currents: phi_1 = 0 (reference),
/// phi_k = phi_k^0 + gamma * i_k^2 for k >= 2.
pub fn phases_from_currents(state: &DeviceState) -> Result<Vec<f64>> {
    state.validate()?;
    let [lo, hi] = state.current_bounds_ma;
    for (k, &i) in state.currents_ma.iter().enumerate() {
        if !i.is_finite() {
            return Err(Error::param(format!("channel {} current is not finite", k + 1)));
        }
        if i < lo - 1e-9 || i > hi + 1e-9 {
            return Err(Error::param(format!(
                "channel {} current {i} mA outside bounds [{lo}, {hi}] mA",
                k + 1
            )));
        }
    }
    let mut phases = Vec::with_capacity(state.n_taps);
    phases.push(0.0);
    for k in 1..state.n_taps {
        let i = state.currents_ma[k];
        phases.push(state.phase_offsets_rad[k] + i * i * state.gamma_rad_per_ma2);
    }
    Ok(phases)
}

/// Apply the perceptron to a periodic field. Delays are realized as circular
/// sample shifts and must be an exact multiple of the sample period.
pub fn apply(field: &ComplexEnvelope, state: &DeviceState) -> Result<ComplexEnvelope> {
    let phases = phases_from_currents(state)?;
    apply_with_phases(field, state, &phases)
}

/// Tap-sum with explicit per-channel phases; `apply` derives them from the
/// currents first.
pub fn apply_with_phases(field: &ComplexEnvelope, state: &DeviceState, phases: &[f64]) -> Result<ComplexEnvelope> {
    if phases.len() != state.n_taps {
        return Err(Error::param("one phase per tap required"));
    }
    if field.is_empty() {
        return Err(Error::degenerate("cannot process an empty envelope"));
    }
    let n = field.len();
    let delay = if state.n_taps > 1 {
        let exact = state.delta_t_s * field.sample_rate_hz;
        let rounded = exact.round();
        if (exact - rounded).abs() > 1e-6 * exact.max(1.0) || rounded < 0.0 {
            return Err(Error::param(format!(
                "delta_t {} s is not an integral number of samples at {} Sa/s",
                state.delta_t_s, field.sample_rate_hz
            )));
        }
        rounded as usize
    } else {
        0
    };

    let magnitudes = state.weight_magnitudes();
    let scale = 1.0 / state.n_taps as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..state.n_taps {
        let w = Complex64::from_polar(magnitudes[k] * scale, phases[k]);
        let shift = (k * delay) % n;
        for i in 0..n {
            let src = (i + n - shift) % n;
            out[i] += w * field.samples[src];
        }
    }
    ComplexEnvelope::new(out, field.sample_rate_hz)
}

/// Excess loss of the configured device for the given field, in dB:
/// -10 log10(P_out / P_in). The fixed grating/insertion contribution is not
/// included.
pub fn excess_loss_db(state: &DeviceState, field: &ComplexEnvelope) -> Result<f64> {
    let p_in = field.mean_power_w();
    if !(p_in > 0.0) {
        return Err(Error::degenerate("zero input power"));
    }
    let out = apply(field, state)?;
    Ok(-10.0 * (out.mean_power_w() / p_in).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn constant_field(value: f64, n: usize) -> ComplexEnvelope {
        ComplexEnvelope::new(vec![Complex64::new(value, 0.0); n], 320e9).unwrap()
    }

    fn ramp_field(n: usize) -> ComplexEnvelope {
        let samples = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        ComplexEnvelope::new(samples, 320e9).unwrap()
    }

    /// Independent oracle: direct tap-sum evaluation.
    fn tap_sum_oracle(field: &ComplexEnvelope, state: &DeviceState) -> Vec<Complex64> {
        let n = field.len();
        let phases = phases_from_currents(state).unwrap();
        let mags = state.weight_magnitudes();
        let delay = (state.delta_t_s * field.sample_rate_hz).round() as usize;
        (0..n)
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..state.n_taps {
                    let src = (i + n - (k * delay) % n) % n;
                    acc += mags[k]
                        * Complex64::from_polar(1.0, phases[k])
                        * field.samples[src]
                        / state.n_taps as f64;
                }
                acc
            })
            .collect()
    }

    fn two_tap(phase2: f64) -> DeviceState {
        DeviceState {
            n_taps: 2,
            delta_t_s: 50e-12,
            attenuation_db: vec![0.0, 0.0],
            phase_offsets_rad: vec![0.0, phase2],
            currents_ma: vec![0.0, 0.0],
            gamma_rad_per_ma2: 0.01,
            current_bounds_ma: [0.0, 30.0],
            insertion_loss_db: 0.0,
        }
    }

    #[test]
    fn single_tap_is_passthrough() {
        let state = DeviceState {
            n_taps: 1,
            delta_t_s: 50e-12,
            attenuation_db: vec![0.0],
            phase_offsets_rad: vec![0.0],
            currents_ma: vec![0.0],
            gamma_rad_per_ma2: 0.01,
            current_bounds_ma: [0.0, 30.0],
            insertion_loss_db: 0.0,
        };
        let x = ramp_field(128);
        let y = apply(&x, &state).unwrap();
        for (a, b) in x.samples.iter().zip(&y.samples) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(excess_loss_db(&state, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn opposed_phases_cancel_constant_input() {
        let x = constant_field(1.0, 64);
        let y = apply(&x, &two_tap(PI)).unwrap();
        assert!(y.mean_power_w() < 1e-28, "residual power {}", y.mean_power_w());
    }

    #[test]
    fn impulse_response_reproduces_spiral_losses() {
        let mut samples = vec![Complex64::new(0.0, 0.0); 256];
        samples[0] = Complex64::new(1.0, 0.0);
        let x = ComplexEnvelope::new(samples, 320e9).unwrap();
        let state = DeviceState::paper_default(50e-12);
        let y = apply(&x, &state).unwrap();

        let delay = 16; // 50 ps at 320 GSa/s
        let expected: Vec<f64> = [0.0f64, 2.1, 4.3, 6.4].iter().map(|a| 10f64.powf(-a / 20.0)).collect();
        for k in 0..4 {
            let got = y.samples[k * delay].norm() / y.samples[0].norm();
            let want = expected[k] / expected[0];
            assert!((got - want).abs() < 1e-12, "tap {k}: ratio {got} vs {want}");
        }
        // Everything else is zero.
        for (i, v) in y.samples.iter().enumerate() {
            if i % delay != 0 || i / delay >= 4 {
                assert!(v.norm() < 1e-15, "leakage at {i}");
            }
        }
        // Cross-check the full response against the direct tap-sum oracle.
        let oracle = tap_sum_oracle(&x, &state);
        for (a, b) in y.samples.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn matches_tap_sum_oracle_on_dense_input() {
        let x = ramp_field(192);
        let mut state = DeviceState::paper_default(50e-12);
        state.currents_ma = vec![0.0, 7.5, 14.0, 21.0];
        let y = apply(&x, &state).unwrap();
        let oracle = tap_sum_oracle(&x, &state);
        for (a, b) in y.samples.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_current_phases_equal_offsets() {
        let mut state = DeviceState::paper_default(50e-12);
        state.phase_offsets_rad = vec![0.0, 0.4, -0.8, 1.2];
        let phases = phases_from_currents(&state).unwrap();
        assert_eq!(phases, vec![0.0, 0.4, -0.8, 1.2]);
    }

    #[test]
    fn ten_milliamp_gives_one_radian() {
        let mut state = DeviceState::paper_default(50e-12);
        state.currents_ma = vec![0.0, 10.0, 0.0, 0.0];
        let phases = phases_from_currents(&state).unwrap();
        assert!((phases[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn current_for_full_turn() {
        // i = sqrt(2 pi / gamma) drives one full turn.
        let gamma = 0.01;
        let i_star = (TAU / gamma).sqrt();
        let mut state = DeviceState::paper_default(50e-12);
        state.currents_ma = vec![0.0, i_star, 0.0, 0.0];
        let phases = phases_from_currents(&state).unwrap();
        assert!((phases[1] - TAU).abs() < 1e-3);
    }

    #[test]
    fn rejects_out_of_bounds_current() {
        let mut state = DeviceState::paper_default(50e-12);
        state.currents_ma = vec![0.0, 31.0, 0.0, 0.0];
        assert!(phases_from_currents(&state).is_err());
        state.currents_ma = vec![0.0, f64::NAN, 0.0, 0.0];
        assert!(phases_from_currents(&state).is_err());
    }

    #[test]
    fn rejects_nonzero_reference_attenuation() {
        let mut state = DeviceState::paper_default(50e-12);
        state.attenuation_db[0] = 1.0;
        assert!(state.validate().is_err());
    }

    #[test]
    fn rejects_non_integral_delay() {
        let state = DeviceState::paper_default(48.3e-12);
        let x = ramp_field(64);
        assert!(apply(&x, &state).is_err());
    }

    #[test]
    fn phase_periodicity() {
        let x = ramp_field(96);
        let base = two_tap(0.7);
        let turned = two_tap(0.7 + TAU);
        let a = apply(&x, &base).unwrap();
        let b = apply(&x, &turned).unwrap();
        for (u, v) in a.samples.iter().zip(&b.samples) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn global_phase_leaves_power_invariant() {
        let x = ramp_field(96);
        let state = DeviceState::paper_default(50e-12);
        let phases = vec![0.0, 0.3, 1.1, 2.2];
        let shifted: Vec<f64> = phases.iter().map(|p| p + 0.9).collect();
        let a = apply_with_phases(&x, &state, &phases).unwrap();
        let b = apply_with_phases(&x, &state, &shifted).unwrap();
        for (u, v) in a.samples.iter().zip(&b.samples) {
            assert!((u.norm_sqr() - v.norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn time_invariance() {
        let x = ramp_field(128);
        let mut state = DeviceState::paper_default(50e-12);
        state.currents_ma = vec![0.0, 5.0, 9.0, 13.0];
        let y = apply(&x, &state).unwrap();

        let shift = 37;
        let n = x.len();
        let shifted_in = ComplexEnvelope::new(
            (0..n).map(|i| x.samples[(i + n - shift) % n]).collect(),
            x.sample_rate_hz,
        )
        .unwrap();
        let y_shifted = apply(&shifted_in, &state).unwrap();
        for i in 0..n {
            let expect = y.samples[(i + n - shift) % n];
            assert_eq!(y_shifted.samples[i], expect);
        }
    }

    #[test]
    fn linearity_in_the_field() {
        let x = ramp_field(64);
        let y = constant_field(0.8, 64);
        let state = DeviceState::paper_default(50e-12);
        let (a, b) = (Complex64::new(1.3, 0.2), Complex64::new(-0.5, 0.7));
        let combined = ComplexEnvelope::new(
            x.samples.iter().zip(&y.samples).map(|(u, v)| a * u + b * v).collect(),
            x.sample_rate_hz,
        )
        .unwrap();
        let lhs = apply(&combined, &state).unwrap();
        let fx = apply(&x, &state).unwrap();
        let fy = apply(&y, &state).unwrap();
        for i in 0..x.len() {
            let rhs = a * fx.samples[i] + b * fy.samples[i];
            assert!((lhs.samples[i] - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn excess_loss_of_coherent_recombination() {
        // Two equal in-phase taps on a constant field recombine to the input:
        // the direct power-ratio oracle gives 0 dB under the 1/N convention.
        let x = constant_field(1.0, 64);
        let state = two_tap(0.0);
        let el = excess_loss_db(&state, &x).unwrap();
        assert!(el.abs() < 1e-9, "EL = {el} dB");

        // Four in-phase taps with the spiral losses: amplitude (sum a_k) / 4.
        let state4 = DeviceState::paper_default(50e-12);
        let el4 = excess_loss_db(&state4, &x).unwrap();
        let amp: f64 = state4.weight_magnitudes().iter().sum::<f64>() / 4.0;
        let oracle = -10.0 * (amp * amp).log10();
        assert!((el4 - oracle).abs() < 1e-9, "EL {el4} vs oracle {oracle}");
    }

    #[test]
    fn excess_loss_rejects_dark_input() {
        let state = DeviceState::paper_default(50e-12);
        let x = constant_field(0.0, 32);
        assert!(excess_loss_db(&state, &x).is_err());
    }
}
