//! Trace alignment, per-bit undersampling, level statistics, the separation
//! loss, counted BER and the erfc BER model.

use crate::error::{Error, Result};
use crate::fft;
use crate::wave::SampledWaveform;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

/// Fraction of a Gaussian population beyond the 1.28 sigma cut (~10%); the
/// separation loss measures the mean of these tails.
pub const TAIL_SIGMA_CUT: f64 = 1.28;

/// Mean low/high levels, their spreads and the decision threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LevelStats {
    pub i0: f64,
    pub i1: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    /// Decision threshold I_D.
    pub i_d: f64,
}

impl LevelStats {
    /// Estimate level statistics from a labeled trace; the threshold is set
    /// midway unless overridden later.
    pub fn from_labeled(values: &[f64], labels: &[u8]) -> Result<Self> {
        let (lows, highs) = split_by_label(values, labels)?;
        let (i0, sigma0) = mean_std(&lows);
        let (i1, sigma1) = mean_std(&highs);
        Ok(Self { i0, i1, sigma0, sigma1, i_d: 0.5 * (i0 + i1) })
    }

    pub fn with_threshold(mut self, i_d: f64) -> Self {
        self.i_d = i_d;
        self
    }
}

/// One value per bit extracted at a fixed intra-bit sample position.
#[derive(Debug, Clone)]
pub struct UndersampledTrace {
    /// Per-bit values.
    pub values: Vec<f64>,
    /// Which intra-bit sample was taken (1-based).
    pub sample_index: usize,
    /// Ground-truth bit labels, same length as `values`.
    pub labels: Vec<u8>,
}

/// Detailed separation-loss output; `loss` is the training objective.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SeparationReport {
    /// E[0] - E[1]: negative when the level distributions separate.
    pub loss: f64,
    /// Tail mean of the low distribution (values above I0 + 1.28 sigma0).
    pub e0: f64,
    /// Tail mean of the high distribution (values below I1 - 1.28 sigma1).
    pub e1: f64,
    /// Fraction of low-labeled samples inside the tail cut.
    pub tail_fraction_low: f64,
    /// Fraction of high-labeled samples inside the tail cut.
    pub tail_fraction_high: f64,
}

/// Counted-BER outcome with the minimizing threshold and sample index.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BerCount {
    pub ber: f64,
    pub errors: usize,
    pub bits: usize,
    pub best_threshold: f64,
    /// 1-based intra-bit sample index that minimized the error count.
    pub best_sample: usize,
}

fn split_by_label(values: &[f64], labels: &[u8]) -> Result<(Vec<f64>, Vec<f64>)> {
    if values.len() != labels.len() {
        return Err(Error::param("values and labels must have equal length"));
    }
    let mut lows = Vec::new();
    let mut highs = Vec::new();
    for (&v, &b) in values.iter().zip(labels) {
        if b == 0 {
            lows.push(v);
        } else {
            highs.push(v);
        }
    }
    if lows.is_empty() || highs.is_empty() {
        return Err(Error::degenerate("both label classes must be present"));
    }
    Ok((lows, highs))
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Circular shift (in samples) that best aligns `output` onto `input`,
/// found at the peak of their normalized cross-correlation. Applying
/// `rotate_left(shift)` to the output samples aligns the two traces.
pub fn align(input: &SampledWaveform, output: &SampledWaveform) -> Result<usize> {
    if input.len() != output.len() || input.is_empty() {
        return Err(Error::param("alignment requires equal-length, non-empty traces"));
    }
    if (input.sample_rate_hz - output.sample_rate_hz).abs() > 1e-6 * input.sample_rate_hz {
        return Err(Error::param("alignment requires equal sample rates"));
    }
    if input.variance() == 0.0 || output.variance() == 0.0 {
        return Err(Error::degenerate("flat trace cannot be aligned"));
    }
    let n = input.len();
    let mx = input.mean();
    let my = output.mean();
    let mut fx: Vec<Complex64> = input.samples.iter().map(|&v| Complex64::new(v - mx, 0.0)).collect();
    let mut fy: Vec<Complex64> = output.samples.iter().map(|&v| Complex64::new(v - my, 0.0)).collect();
    fft::forward(&mut fx);
    fft::forward(&mut fy);
    // c[s] = sum_i x[i] y[i + s] = IFFT(conj(X) . Y)
    let mut prod: Vec<Complex64> = fx.iter().zip(&fy).map(|(a, b)| a.conj() * b).collect();
    fft::inverse(&mut prod);
    let mut best = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    for (s, v) in prod.iter().enumerate().take(n) {
        if v.re > best_val {
            best_val = v.re;
            best = s;
        }
    }
    Ok(best)
}

/// Rotate a waveform left by `shift` samples (undo the link delay found by
/// [`align`]).
pub fn apply_shift(wave: &SampledWaveform, shift: usize) -> SampledWaveform {
    let n = wave.len();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        samples.push(wave.samples[(i + shift) % n]);
    }
    SampledWaveform { samples, sample_rate_hz: wave.sample_rate_hz, t0_s: wave.t0_s }
}

/// Extract the `sample_index`-th sample (1-based) of every bit.
pub fn undersample(
    aligned: &SampledWaveform,
    labels: &[u8],
    samples_per_bit: usize,
    sample_index: usize,
) -> Result<UndersampledTrace> {
    if samples_per_bit == 0 || aligned.len() % samples_per_bit != 0 {
        return Err(Error::param("trace length must be a whole number of bits"));
    }
    let bits = aligned.len() / samples_per_bit;
    if labels.len() != bits {
        return Err(Error::param(format!("expected {bits} labels, got {}", labels.len())));
    }
    if sample_index < 1 || sample_index > samples_per_bit {
        return Err(Error::param(format!(
            "sample_index {sample_index} outside 1..={samples_per_bit}"
        )));
    }
    let values = (0..bits)
        .map(|b| aligned.samples[b * samples_per_bit + sample_index - 1])
        .collect();
    Ok(UndersampledTrace { values, sample_index, labels: labels.to_vec() })
}

/// Separation loss L = E[0] - E[1]: the gap between the inner tails of the
/// low- and high-level distributions. E[0] averages the low-labeled values
/// above I0 + 1.28 sigma0, E[1] the high-labeled values below
/// I1 - 1.28 sigma1; an empty tail falls back to the single extreme value.
pub fn separation_loss(trace: &UndersampledTrace) -> Result<SeparationReport> {
    let (lows, highs) = split_by_label(&trace.values, &trace.labels)?;
    let (i0, sigma0) = mean_std(&lows);
    let (i1, sigma1) = mean_std(&highs);

    let low_cut = i0 + TAIL_SIGMA_CUT * sigma0;
    let low_tail: Vec<f64> = lows.iter().copied().filter(|&v| v > low_cut).collect();
    let (e0, n_low) = if low_tail.is_empty() {
        (lows.iter().copied().fold(f64::NEG_INFINITY, f64::max), 0)
    } else {
        (low_tail.iter().sum::<f64>() / low_tail.len() as f64, low_tail.len())
    };

    let high_cut = i1 - TAIL_SIGMA_CUT * sigma1;
    let high_tail: Vec<f64> = highs.iter().copied().filter(|&v| v < high_cut).collect();
    let (e1, n_high) = if high_tail.is_empty() {
        (highs.iter().copied().fold(f64::INFINITY, f64::min), 0)
    } else {
        (high_tail.iter().sum::<f64>() / high_tail.len() as f64, high_tail.len())
    };

    Ok(SeparationReport {
        loss: e0 - e1,
        e0,
        e1,
        tail_fraction_low: n_low as f64 / lows.len() as f64,
        tail_fraction_high: n_high as f64 / highs.len() as f64,
    })
}

/// Number of label mismatches when digitizing `values` at `threshold`
/// (value > threshold reads as 1).
pub fn count_errors(values: &[f64], labels: &[u8], threshold: f64) -> usize {
    values
        .iter()
        .zip(labels)
        .filter(|(&v, &b)| u8::from(v > threshold) != b)
        .count()
}

/// Counted BER between the digitized input and output traces.
///
/// `trace_in` supplies the ground truth (its per-bit mean against the
/// mid-swing threshold digitizes a clean reference exactly). For every
/// intra-bit sample index and each of 10 equally spaced thresholds between
/// the minimum and maximum of that undersampled trace, the output is
/// digitized and mismatches are counted; the minimum wins, ties broken by
/// the lowest sample index and then the lowest threshold.
pub fn ber_count(
    trace_in: &SampledWaveform,
    trace_out: &SampledWaveform,
    samples_per_bit: usize,
) -> Result<BerCount> {
    if trace_in.len() != trace_out.len() {
        return Err(Error::param("aligned traces must have equal length"));
    }
    if trace_in.is_empty() {
        return Err(Error::degenerate("zero-length traces"));
    }
    if samples_per_bit == 0 || trace_in.len() % samples_per_bit != 0 {
        return Err(Error::param("trace length must be a whole number of bits"));
    }
    let labels = digitize_reference(trace_in, samples_per_bit)?;
    ber_count_labeled(trace_out, &labels, samples_per_bit)
}

/// [`ber_count`] against explicit ground-truth labels.
pub fn ber_count_labeled(
    trace_out: &SampledWaveform,
    labels: &[u8],
    samples_per_bit: usize,
) -> Result<BerCount> {
    if trace_out.is_empty() {
        return Err(Error::degenerate("zero-length traces"));
    }
    let bits = trace_out.len() / samples_per_bit;
    if bits == 0 || labels.len() != bits {
        return Err(Error::param("label count must match the bit count"));
    }
    let mut best: Option<BerCount> = None;
    for sample_index in 1..=samples_per_bit {
        let values: Vec<f64> = (0..bits)
            .map(|b| trace_out.samples[b * samples_per_bit + sample_index - 1])
            .collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for level in 0..10 {
            let threshold = lo + (hi - lo) * level as f64 / 9.0;
            let errors = count_errors(&values, labels, threshold);
            let candidate = BerCount {
                ber: errors as f64 / bits as f64,
                errors,
                bits,
                best_threshold: threshold,
                best_sample: sample_index,
            };
            if best.as_ref().map_or(true, |b| errors < b.errors) {
                best = Some(candidate);
            }
        }
    }
    Ok(best.expect("non-empty threshold grid"))
}

/// Digitize a clean reference trace into per-bit labels using its per-bit
/// mean against the global mid-swing.
pub fn digitize_reference(trace: &SampledWaveform, samples_per_bit: usize) -> Result<Vec<u8>> {
    let bits = trace.len() / samples_per_bit;
    if bits == 0 || trace.len() % samples_per_bit != 0 {
        return Err(Error::param("trace length must be a whole number of bits"));
    }
    let lo = trace.samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = trace.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    Ok((0..bits)
        .map(|b| {
            let slice = &trace.samples[b * samples_per_bit..(b + 1) * samples_per_bit];
            let mean = slice.iter().sum::<f64>() / samples_per_bit as f64;
            u8::from(mean > mid)
        })
        .collect())
}

/// Gaussian-noise BER model:
/// BER = 1/4 [ erfc((I1 - I_D) / (sigma1 sqrt(2))) + erfc((I_D - I0) / (sigma0 sqrt(2))) ].
pub fn ber_model(stats: &LevelStats) -> f64 {
    let sqrt2 = std::f64::consts::SQRT_2;
    let a = (stats.i1 - stats.i_d) / (stats.sigma1 * sqrt2);
    let b = (stats.i_d - stats.i0) / (stats.sigma0 * sqrt2);
    0.25 * (erfc(a) + erfc(b))
}

/// Threshold minimizing [`ber_model`], by golden-section search on
/// [I0, I1] (the model is unimodal there).
pub fn optimal_threshold(stats: &LevelStats) -> f64 {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (stats.i0, stats.i1);
    let eval = |x: f64| ber_model(&stats.with_threshold(x));
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = eval(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn wave(samples: Vec<f64>) -> SampledWaveform {
        SampledWaveform::new(samples, 40e9).unwrap()
    }

    #[test]
    fn align_recovers_injected_shift() {
        let mut rng = stream(3, Domain::Acquisition, 0);
        let x: Vec<f64> = (0..4096).map(|_| rng.random::<f64>()).collect();
        let input = wave(x.clone());
        for shift in [0usize, 17, 1000, 4095] {
            let delayed: Vec<f64> = (0..x.len()).map(|i| x[(i + x.len() - shift) % x.len()]).collect();
            let output = wave(delayed);
            let got = align(&input, &output).unwrap();
            assert_eq!(got, shift);
            let back = apply_shift(&output, got);
            assert_eq!(back.samples, input.samples);
        }
    }

    #[test]
    fn align_rejects_flat_traces() {
        let input = wave(vec![1.0; 64]);
        let output = wave((0..64).map(|i| i as f64).collect());
        assert!(align(&input, &output).is_err());
    }

    #[test]
    fn undersample_indexing() {
        // Sample value encodes (bit, phase): v = 100 b + p.
        let spb = 4;
        let bits = 16;
        let samples: Vec<f64> = (0..bits * spb).map(|i| (100 * (i / spb) + i % spb) as f64).collect();
        let labels = vec![0u8; bits];
        let aligned = wave(samples);
        for idx in 1..=spb {
            let trace = undersample(&aligned, &labels, spb, idx).unwrap();
            assert_eq!(trace.values.len(), bits);
            for (b, &v) in trace.values.iter().enumerate() {
                assert_eq!(v, (100 * b + idx - 1) as f64);
            }
        }
        assert!(undersample(&aligned, &labels, spb, 0).is_err());
        assert!(undersample(&aligned, &labels, spb, 5).is_err());
    }

    #[test]
    fn undersample_constant_trace() {
        let aligned = wave(vec![2.5; 1024 * 4]);
        let labels = vec![1u8; 1024];
        let trace = undersample(&aligned, &labels, 4, 2).unwrap();
        assert_eq!(trace.values.len(), 1024);
        assert!(trace.values.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn separation_of_clean_levels() {
        // Perfectly separated deltas with tiny jitter: L ~ -1.
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..2000 {
            let jitter = 1e-6 * (i % 7) as f64;
            if i % 2 == 0 {
                values.push(0.0 + jitter);
                labels.push(0);
            } else {
                values.push(1.0 + jitter);
                labels.push(1);
            }
        }
        let trace = UndersampledTrace { values, sample_index: 3, labels };
        let rep = separation_loss(&trace).unwrap();
        assert!((rep.loss + 1.0).abs() < 1e-3, "loss {}", rep.loss);
    }

    #[test]
    fn separation_of_overlapping_levels() {
        // Distributions whose inner tails meet at the midpoint: the two tail
        // estimates coincide and L ~ 0. For a Gaussian the tail mean sits at
        // ~1.754 sigma, so sigma = 0.5 / 1.754 puts both tails at 0.5.
        let sigma = 0.5 / 1.7535;
        let mut rng = stream(5, Domain::Acquisition, 0);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20000 {
            let g: f64 = StandardNormal.sample(&mut rng);
            if i % 2 == 0 {
                values.push(sigma * g);
                labels.push(0);
            } else {
                values.push(1.0 + sigma * g);
                labels.push(1);
            }
        }
        let trace = UndersampledTrace { values, sample_index: 3, labels };
        let rep = separation_loss(&trace).unwrap();
        assert!(rep.loss.abs() < 0.05, "loss {}", rep.loss);
    }

    /// Oracle: mean of a standard normal tail beyond z, by Simpson quadrature
    /// over [z, z + 12] with 20k panels.
    fn truncated_normal_tail_mean(z: f64) -> f64 {
        let pdf = |x: f64| (-0.5 * x * x).exp() / (std::f64::consts::TAU).sqrt();
        let n = 20_000;
        let h = 12.0 / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let a = z + i as f64 * h;
            let m = a + 0.5 * h;
            let b = a + h;
            num += h / 6.0 * (a * pdf(a) + 4.0 * m * pdf(m) + b * pdf(b));
            den += h / 6.0 * (pdf(a) + 4.0 * pdf(m) + pdf(b));
        }
        num / den
    }

    #[test]
    fn separation_matches_truncated_gaussian_oracle() {
        let sigma = 0.1;
        let n = 100_000;
        let mut rng = stream(11, Domain::Acquisition, 0);
        let mut values = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let g: f64 = StandardNormal.sample(&mut rng);
            values.push(g * sigma);
            labels.push(0u8);
            let g: f64 = StandardNormal.sample(&mut rng);
            values.push(1.0 + g * sigma);
            labels.push(1u8);
        }
        let trace = UndersampledTrace { values, sample_index: 3, labels };
        let rep = separation_loss(&trace).unwrap();

        let tail = truncated_normal_tail_mean(TAIL_SIGMA_CUT);
        let e0_expected = sigma * tail;
        let e1_expected = 1.0 - sigma * tail;
        assert!(
            (rep.e0 / e0_expected - 1.0).abs() < 0.02,
            "E0 {} vs oracle {e0_expected}",
            rep.e0
        );
        assert!(
            (rep.e1 / e1_expected - 1.0).abs() < 0.02,
            "E1 {} vs oracle {e1_expected}",
            rep.e1
        );
        // Tail occupancy near the Gaussian 10%.
        assert!((rep.tail_fraction_low - 0.1).abs() < 0.01);
        assert!((rep.tail_fraction_high - 0.1).abs() < 0.01);
    }

    #[test]
    fn separation_requires_both_classes() {
        let trace = UndersampledTrace {
            values: vec![0.0, 0.1, 0.2],
            sample_index: 1,
            labels: vec![0, 0, 0],
        };
        assert!(separation_loss(&trace).is_err());
    }

    #[test]
    fn separation_tail_fallback_on_degenerate_spread() {
        // Zero-variance classes have empty tails; fall back to the extremes.
        let trace = UndersampledTrace {
            values: vec![0.0, 0.0, 1.0, 1.0],
            sample_index: 1,
            labels: vec![0, 0, 1, 1],
        };
        let rep = separation_loss(&trace).unwrap();
        assert_eq!(rep.e0, 0.0);
        assert_eq!(rep.e1, 1.0);
        assert_eq!(rep.loss, -1.0);
        assert_eq!(rep.tail_fraction_low, 0.0);
    }

    fn nrz_trace(bits: &[u8], spb: usize) -> SampledWaveform {
        let mut samples = Vec::with_capacity(bits.len() * spb);
        for &b in bits {
            samples.extend(std::iter::repeat(f64::from(b)).take(spb));
        }
        wave(samples)
    }

    #[test]
    fn clean_copy_counts_zero_errors() {
        let bits: Vec<u8> = (0..512).map(|i| ((i * 7 + i / 3) % 2) as u8).collect();
        let trace = nrz_trace(&bits, 4);
        let out = ber_count(&trace, &trace.clone(), 4).unwrap();
        assert_eq!(out.errors, 0);
        assert_eq!(out.ber, 0.0);
        assert_eq!(out.best_sample, 1);
    }

    #[test]
    fn logical_not_errors_at_interior_thresholds() {
        let bits: Vec<u8> = (0..256).map(|i| (i % 2) as u8).collect();
        let inverted: Vec<u8> = bits.iter().map(|b| 1 - b).collect();
        let trace_out = nrz_trace(&inverted, 4);
        // Any interior threshold misreads every bit.
        let values: Vec<f64> = (0..256).map(|b| trace_out.samples[b * 4]).collect();
        for thr in [0.2, 0.5, 0.8] {
            assert_eq!(count_errors(&values, &bits, thr), 256);
        }
        // The grid minimum saturates at the all-0/all-1 extremes (~50%).
        let out = ber_count_labeled(&trace_out, &bits, 4).unwrap();
        assert!((out.ber - 0.5).abs() < 0.01, "ber {}", out.ber);
    }

    #[test]
    fn threshold_grid_is_scale_invariant() {
        // Affine rescaling of the trace leaves the counted BER unchanged.
        let bits: Vec<u8> = (0..512).map(|i| ((i / 5 + i) % 2) as u8).collect();
        let mut rng = stream(9, Domain::Acquisition, 0);
        let noisy: Vec<f64> = bits
            .iter()
            .flat_map(|&b| {
                let base = f64::from(b);
                (0..4).map(move |_| base).collect::<Vec<_>>()
            })
            .map(|v| {
                let g: f64 = StandardNormal.sample(&mut rng);
                v + 0.3 * g
            })
            .collect();
        let out1 = ber_count_labeled(&wave(noisy.clone()), &bits, 4).unwrap();
        let rescaled: Vec<f64> = noisy.iter().map(|v| 42.0 + 7.5 * v).collect();
        let out2 = ber_count_labeled(&wave(rescaled), &bits, 4).unwrap();
        assert_eq!(out1.errors, out2.errors);
        assert_eq!(out1.best_sample, out2.best_sample);
    }

    #[test]
    fn ber_model_identities() {
        // Q = 3 with symmetric noise and a midway threshold.
        let stats = LevelStats { i0: 0.0, i1: 6.0, sigma0: 1.0, sigma1: 1.0, i_d: 3.0 };
        let ber = ber_model(&stats);
        assert!((ber - 1.3499e-3).abs() < 1e-6, "ber {ber}");

        // Threshold sitting on I0 makes the second term erfc(0)/4 = 0.25.
        let degenerate = stats.with_threshold(0.0);
        let ber = ber_model(&degenerate);
        assert!(ber >= 0.25 && (ber - 0.25) < 1e-3, "ber {ber}");
    }

    #[test]
    fn ber_model_monotone_in_eye_opening() {
        let mut last = f64::INFINITY;
        for swing in [2.0, 3.0, 4.0, 5.0, 6.0] {
            let stats = LevelStats {
                i0: 0.0,
                i1: swing,
                sigma0: 1.0,
                sigma1: 1.0,
                i_d: swing / 2.0,
            };
            let ber = ber_model(&stats);
            assert!(ber < last);
            last = ber;
        }
    }

    #[test]
    fn optimal_threshold_matches_grid_search() {
        let stats = LevelStats { i0: 0.0, i1: 1.0, sigma0: 0.05, sigma1: 0.15, i_d: 0.5 };
        let opt = optimal_threshold(&stats);
        // Fine grid oracle.
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=2000 {
            let x = i as f64 / 2000.0;
            let b = ber_model(&stats.with_threshold(x));
            if b < best.0 {
                best = (b, x);
            }
        }
        assert!((opt - best.1).abs() <= 1.0 / 2000.0 + 1e-9, "opt {opt} vs grid {}", best.1);
        // Unequal sigmas pull the optimum toward the cleaner level.
        assert!(opt < 0.5);
    }

    #[test]
    fn counted_ber_matches_erfc_model() {
        // Synthetic two-level Gaussian traces: the counted minimum over the
        // 10-threshold grid matches the model minimum over the same grid
        // within 3 Monte-Carlo standard errors.
        let n_bits = 200_000;
        let (i0, i1, s0, s1) = (0.0, 1.0, 0.13, 0.16);
        let mut rng = stream(21, Domain::Acquisition, 0);
        let mut labels = Vec::with_capacity(n_bits);
        let mut values = Vec::with_capacity(n_bits);
        for _ in 0..n_bits {
            let bit = u8::from(rng.random::<bool>());
            labels.push(bit);
            let g: f64 = StandardNormal.sample(&mut rng);
            values.push(if bit == 1 { i1 + s1 * g } else { i0 + s0 * g });
        }
        let samples: Vec<f64> = values.iter().flat_map(|&v| [v, v, v, v]).collect();
        let out = ber_count_labeled(&wave(samples), &labels, 4).unwrap();

        // Model prediction over the same threshold grid (min/max of the trace).
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let stats = LevelStats { i0, i1, sigma0: s0, sigma1: s1, i_d: 0.5 };
        let predicted = (0..10)
            .map(|level| {
                let thr = lo + (hi - lo) * level as f64 / 9.0;
                ber_model(&stats.with_threshold(thr))
            })
            .fold(f64::INFINITY, f64::min);
        let se = (predicted * (1.0 - predicted) / n_bits as f64).sqrt();
        assert!(
            (out.ber - predicted).abs() <= 3.0 * se,
            "counted {} vs model {predicted} (3se = {})",
            out.ber,
            3.0 * se
        );
    }
}
