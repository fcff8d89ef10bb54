//! Scenario runner: end-to-end link simulation, training, BER-vs-PRX scans,
//! gain reports and the 40 Gbps reach / SNR-penalty study.
//!
//! Every Monte-Carlo cell derives its RNG seed from the physical cell
//! coordinates (mode, length, PRX, acquisition index), so sweeps are
//! reproducible, order-independent and resumable to the byte.

pub mod io;

use crate::config::{Config, LinkMode, OptimizerKind};
use crate::device::{self, DeviceState};
use crate::error::{Error, Result};
use crate::eye;
use crate::fiber::{self, FiberParams};
use crate::metrics::{self, BerCount};
use crate::modulator;
use crate::prbs::BitSequence;
use crate::receiver::{self, ReceiverParams};
use crate::rng;
use crate::trainer::{self, AdamConfig, SwarmConfig, TrainingRecord};
use crate::wave::{ComplexEnvelope, SampledWaveform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Intra-bit sample index used for every training-loss evaluation (close to
/// the bit center, away from the transients).
pub const TRAINING_SAMPLE_INDEX: usize = 3;

/// Histogram sample index (matches the eye-diagram analysis).
pub const HISTOGRAM_SAMPLE_INDEX: usize = 2;

/// Pre-FEC threshold of the 10 Gbps gain analysis.
pub const PRE_FEC_BER_10G: f64 = 2e-3;

/// Extrapolation limit beyond the last measured PRX, dB.
pub const EXTRAPOLATION_LIMIT_DB: f64 = 3.0;

/// One point of a BER-vs-PRX curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ScanPoint {
    pub prx_dbm: f64,
    pub ber_mean: f64,
    pub ber_std: f64,
    pub n_acquisitions: usize,
    /// True when no errors were counted and the mean reports the
    /// 1/(N x bits) measurement floor.
    pub floored: bool,
}

/// BER-vs-PRX curve with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BerScanResult {
    pub mode: LinkMode,
    pub length_km: f64,
    pub points: Vec<ScanPoint>,
    pub metadata: ScanMetadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub scenario_hash: String,
    pub provenance: String,
    pub n_acquisitions: usize,
    pub bits_per_acquisition: usize,
    pub trained_currents_ma: Option<Vec<f64>>,
    pub trained_phases_rad: Option<Vec<f64>>,
    pub excess_loss_db: Option<f64>,
}

/// Outcome of training the device for one span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedDevice {
    pub length_km: f64,
    /// Trained positions: currents (mA) or phases (rad) for channels 2..N.
    pub position: Vec<f64>,
    /// Whether `position` holds phases rather than currents.
    pub phase_space: bool,
    pub record: TrainingRecord,
    /// Loss of the untrained (all-zero) configuration under the same seed
    /// policy, for the non-improving flag.
    pub baseline_loss: f64,
    pub improved: bool,
    pub excess_loss_db: f64,
    pub train_prx_dbm: f64,
}

impl TrainedDevice {
    /// Materialize the trained device from the template.
    pub fn device(&self, template: &DeviceState) -> DeviceState {
        build_device(template, &self.position, self.phase_space)
    }
}

/// Dispersion-length report, carrying the beta2-vs-D diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersionReport {
    pub t0_s: f64,
    pub ld_from_beta2_km: f64,
    pub ld_from_d_km: Option<f64>,
    pub consistency_pct: Option<f64>,
    pub inconsistent: bool,
}

/// Shared state of one simulated link: payload, transmitter output and the
/// receiver bookkeeping.
pub struct LinkSimulator {
    config: Config,
    bits: BitSequence,
    tx_field: ComplexEnvelope,
    receiver: ReceiverParams,
    scope_spb: usize,
}

fn build_device(template: &DeviceState, position: &[f64], phase_space: bool) -> DeviceState {
    let mut full = Vec::with_capacity(template.n_taps);
    full.push(0.0);
    full.extend_from_slice(position);
    if phase_space {
        template.clone().with_phases(&full)
    } else {
        template.clone().with_currents(&full)
    }
}

/// Stable per-cell seed from the physical sweep coordinates.
fn cell_seed(master: u64, tag: &str, length_km: f64, prx_dbm: f64, acq: usize) -> u64 {
    let key = format!("{tag}|{length_km:.6}|{prx_dbm:.6}|{acq}");
    rng::fnv1a64(key.as_bytes()) ^ master.rotate_left(17)
}

impl LinkSimulator {
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        let bits = BitSequence::prbs(
            config.signal.prbs_order,
            config.signal.prbs_seed,
            config.signal.bitrate_hz,
        )?;
        let tx_field = modulator::modulate(&bits, &config.signal.modulator_params(), config.signal.grid_rate_hz)?;
        let receiver = config.receiver.params();
        let scope_spb = crate::wave::samples_per_bit(receiver.scope_rate_hz, config.signal.bitrate_hz)?;
        Ok(Self { config, bits, tx_field, receiver, scope_spb })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn bits(&self) -> &BitSequence {
        &self.bits
    }

    pub fn tx_field(&self) -> &ComplexEnvelope {
        &self.tx_field
    }

    pub fn receiver_params(&self) -> &ReceiverParams {
        &self.receiver
    }

    pub fn scope_samples_per_bit(&self) -> usize {
        self.scope_spb
    }

    pub fn fiber_params(&self, length_km: f64) -> FiberParams {
        self.config.fiber.params(length_km * 1e3)
    }

    /// Transmitter output propagated through `length_km` of fiber.
    pub fn propagated(&self, length_km: f64) -> Result<ComplexEnvelope> {
        if length_km == 0.0 {
            return Ok(self.tx_field.clone());
        }
        fiber::propagate(&self.tx_field, &self.fiber_params(length_km))
    }

    /// Field at the receiver for a mode/length/device combination.
    pub fn received_field(
        &self,
        mode: LinkMode,
        length_km: f64,
        device: Option<&DeviceState>,
    ) -> Result<ComplexEnvelope> {
        let length = if mode == LinkMode::Btb { 0.0 } else { length_km };
        let propagated = self.propagated(length)?;
        match (mode, device) {
            (LinkMode::FiberPlusNn, Some(dev)) => device::apply(&propagated, dev),
            (LinkMode::FiberPlusNn, None) => {
                Err(Error::Config("fiber_plus_nn mode needs a trained device".into()))
            }
            _ => Ok(propagated),
        }
    }

    /// Clean NRZ reference at the scope rate, tiled over `periods`.
    pub fn reference_trace(&self, periods: usize) -> SampledWaveform {
        let samples = self.bits.nrz_drive(self.scope_spb, periods);
        SampledWaveform { samples, sample_rate_hz: self.receiver.scope_rate_hz, t0_s: 0.0 }
    }

    /// Tile a one-period field over `periods` repetitions.
    pub fn tiled(&self, field: &ComplexEnvelope, periods: usize) -> ComplexEnvelope {
        if periods <= 1 {
            return field.clone();
        }
        let mut samples = Vec::with_capacity(field.len() * periods);
        for _ in 0..periods {
            samples.extend_from_slice(&field.samples);
        }
        ComplexEnvelope { samples, sample_rate_hz: field.sample_rate_hz }
    }

    /// One acquisition: detect, align against the reference, count BER.
    pub fn measure(
        &self,
        field_tiled: &ComplexEnvelope,
        prx_dbm: f64,
        reference: &SampledWaveform,
        labels: &[u8],
        seed: u64,
    ) -> Result<Measurement> {
        let detection = receiver::detect(
            field_tiled,
            &self.receiver,
            prx_dbm,
            self.config.signal.bitrate_hz,
            seed,
        )?;
        let shift = metrics::align(reference, &detection.waveform)?;
        let aligned = metrics::apply_shift(&detection.waveform, shift);
        let ber = metrics::ber_count_labeled(&aligned, labels, self.scope_spb)?;
        Ok(Measurement {
            ber,
            aligned,
            shift,
            offset_grid_samples: detection.offset_grid_samples,
            overflow_warning: detection.overflow_warning,
        })
    }

    /// L_D report at the bit-period pulse width, with the beta2-vs-D flag.
    pub fn dispersion_report(&self) -> DispersionReport {
        let t0 = 1.0 / self.config.signal.bitrate_hz;
        let params = self.fiber_params(0.0);
        let ld_beta2 = fiber::dispersion_length(t0, &params).map(|m| m / 1e3).unwrap_or(f64::INFINITY);
        let ld_d = params.dispersion_d_ps_nm_km.map(|d| {
            let derived = FiberParams::from_dispersion_d(0.0, d, params.lambda_nm, 0.0);
            fiber::dispersion_length(t0, &derived).map(|m| m / 1e3).unwrap_or(f64::INFINITY)
        });
        DispersionReport {
            t0_s: t0,
            ld_from_beta2_km: ld_beta2,
            ld_from_d_km: ld_d,
            consistency_pct: params.dispersion_consistency_pct(),
            inconsistent: params.dispersion_inconsistent(),
        }
    }
}

/// One acquisition outcome.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub ber: BerCount,
    pub aligned: SampledWaveform,
    pub shift: usize,
    pub offset_grid_samples: usize,
    pub overflow_warning: bool,
}

/// Train the device for one span at the configured operating point.
///
/// The loss is the separation loss evaluated at the 3rd intra-bit sample on
/// one PRBS period; every evaluation draws a fresh noise realization and a
/// fresh trigger offset from its own seed.
pub fn train_for_length(sim: &LinkSimulator, length_km: f64) -> Result<TrainedDevice> {
    train_for_length_seeded(sim, length_km, None)
}

/// [`train_for_length`] with an optional warm-start candidate injected into
/// the initial swarm (the solution of the previous span in a length sweep).
pub fn train_for_length_seeded(
    sim: &LinkSimulator,
    length_km: f64,
    warm_start: Option<&[f64]>,
) -> Result<TrainedDevice> {
    let cfg = sim.config();
    let propagated = sim.propagated(length_km)?;
    let template = cfg.device.state();
    let phase_space = cfg.trainer.phase_space;
    let train_prx = receiver::prx_dbm_for_snr(
        cfg.trainer.train_snr_db,
        cfg.signal.extinction_ratio_db,
        &sim.receiver,
    );
    let reference = sim.reference_trace(1);
    let labels = sim.bits().bits.clone();

    let dims = template.n_taps.saturating_sub(1);
    let bounds: Vec<[f64; 2]> = if phase_space {
        vec![[0.0, std::f64::consts::TAU]; dims]
    } else {
        vec![template.current_bounds_ma; dims]
    };

    let evaluate = |position: &[f64], seed: u64| -> Result<f64> {
        let dev = build_device(&template, position, phase_space);
        let out = device::apply(&propagated, &dev)?;
        let meas = sim.measure(&out, train_prx, &reference, &labels, seed)?;
        let trace =
            metrics::undersample(&meas.aligned, &labels, sim.scope_spb, TRAINING_SAMPLE_INDEX)?;
        Ok(metrics::separation_loss(&trace)?.loss)
    };

    let train_seed = rng::fnv1a64(format!("train|{length_km:.6}").as_bytes())
        ^ cfg.trainer.master_seed.rotate_left(11);

    let mut record = match cfg.trainer.optimizer {
        OptimizerKind::Pso => {
            let mut swarm = SwarmConfig::new(bounds, train_seed);
            swarm.n_particles = cfg.trainer.n_particles;
            swarm.n_iterations = cfg.trainer.n_iterations;
            swarm.inertia = cfg.trainer.inertia;
            swarm.cognitive = cfg.trainer.cognitive;
            swarm.social = cfg.trainer.social;
            swarm.velocity_clamp_frac = cfg.trainer.velocity_clamp_frac;
            if let Some(seed_pos) = warm_start {
                swarm.initial_candidates.push(seed_pos.to_vec());
            }
            trainer::train_pso(&evaluate, &swarm)?
        }
        OptimizerKind::Adam => {
            let mut adam = AdamConfig::new(bounds, train_seed);
            adam.n_iterations = cfg.trainer.n_iterations;
            adam.fd_step = cfg.trainer.fd_step_ma;
            adam.start = warm_start.map(|s| s.to_vec());
            trainer::train_adam(&evaluate, &adam)?
        }
    };

    // Reference loss of the untrained (all-zero) configuration.
    let baseline_loss = evaluate(&vec![0.0; dims], train_seed ^ 0x5555_aaaa_5555_aaaa)?;

    let trained = build_device(&template, &record.best_position, phase_space);
    record.final_phases = trained.phases()?;
    let excess_loss = device::excess_loss_db(&trained, &propagated)?;

    Ok(TrainedDevice {
        length_km,
        position: record.best_position.clone(),
        phase_space,
        improved: record.best_loss < baseline_loss,
        baseline_loss,
        record,
        excess_loss_db: excess_loss,
        train_prx_dbm: train_prx,
    })
}

/// Train across a length sweep in ascending order, warm-starting each span
/// with the previous solution so one solution branch is tracked as the
/// accumulated dispersion grows. Results come back in the input order.
pub fn train_across_lengths(sim: &LinkSimulator, lengths_km: &[f64]) -> Result<Vec<TrainedDevice>> {
    let mut order: Vec<usize> = (0..lengths_km.len()).collect();
    order.sort_by(|&a, &b| lengths_km[a].partial_cmp(&lengths_km[b]).unwrap());
    let mut trained: Vec<Option<TrainedDevice>> = vec![None; lengths_km.len()];
    let mut prev: Option<Vec<f64>> = None;
    for &i in &order {
        let t = train_for_length_seeded(sim, lengths_km[i], prev.as_deref())?;
        prev = Some(t.position.clone());
        trained[i] = Some(t);
    }
    Ok(trained.into_iter().map(|t| t.expect("all lengths trained")).collect())
}

/// Trained-phase trend across a length sweep (one row per channel 2..N).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseTrend {
    pub lengths_km: Vec<f64>,
    /// `phases[c][i]` is the channel (c+2) phase at `lengths_km[i]`, rad.
    pub phases: Vec<Vec<f64>>,
    /// Every channel is non-decreasing within the dip tolerance and ends at
    /// or above its starting phase.
    pub non_decreasing: bool,
    /// The largest trained phase at the longest span, rad.
    pub max_final_phase_rad: f64,
}

impl PhaseTrend {
    /// Trend flag: phases grow with length and head toward a full turn.
    pub fn flag(&self, target_final_rad: f64) -> bool {
        self.non_decreasing && self.max_final_phase_rad >= target_final_rad
    }
}

/// Evaluate the trained-phase trend; `dip_tolerance_rad` forgives small
/// noise-induced dips between adjacent lengths.
pub fn phase_trend(trained: &[TrainedDevice], dip_tolerance_rad: f64) -> Result<PhaseTrend> {
    if trained.len() < 2 {
        return Err(Error::param("need at least two trained lengths"));
    }
    let n_taps = trained[0].record.final_phases.len();
    let mut idx: Vec<usize> = (0..trained.len()).collect();
    idx.sort_by(|&a, &b| trained[a].length_km.partial_cmp(&trained[b].length_km).unwrap());
    let lengths_km: Vec<f64> = idx.iter().map(|&i| trained[i].length_km).collect();

    let mut phases = Vec::new();
    let mut non_decreasing = true;
    let mut max_final: f64 = 0.0;
    for channel in 1..n_taps {
        let row: Vec<f64> = idx.iter().map(|&i| trained[i].record.final_phases[channel]).collect();
        for w in row.windows(2) {
            if w[1] < w[0] - dip_tolerance_rad {
                non_decreasing = false;
            }
        }
        if row[row.len() - 1] < row[0] - dip_tolerance_rad {
            non_decreasing = false;
        }
        max_final = max_final.max(row[row.len() - 1]);
        phases.push(row);
    }
    Ok(PhaseTrend { lengths_km, phases, non_decreasing, max_final_phase_rad: max_final })
}

/// Sweep BER over the PRX grid for one curve. `skip` cells are assumed done
/// (resume); `on_point` is invoked after each newly computed cell.
pub fn scan_ber(
    sim: &LinkSimulator,
    mode: LinkMode,
    length_km: f64,
    device: Option<&DeviceState>,
    skip: usize,
    mut on_point: impl FnMut(&ScanPoint) -> Result<()>,
) -> Result<Vec<ScanPoint>> {
    let cfg = sim.config();
    let periods = cfg.scenario.periods_per_acquisition;
    let n_acq = cfg.scenario.n_acquisitions;
    let field = sim.received_field(mode, length_km, device)?;
    let field_tiled = sim.tiled(&field, periods);
    let reference = sim.reference_trace(periods);
    let labels = sim.bits().tiled_labels(periods);
    let bits_per_acq = labels.len();
    let master = cfg.scenario.master_seed;
    let tag = format!("scan|{}", mode.tag());

    let mut points = Vec::new();
    for &prx in cfg.scenario.prx_dbm_grid.iter().skip(skip) {
        let bers: Vec<f64> = (0..n_acq)
            .into_par_iter()
            .map(|acq| {
                let seed = cell_seed(master, &tag, length_km, prx, acq);
                sim.measure(&field_tiled, prx, &reference, &labels, seed).map(|m| m.ber.ber)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean_raw = bers.iter().sum::<f64>() / n_acq as f64;
        let floored = mean_raw == 0.0;
        let mean = if floored { 1.0 / (n_acq as f64 * bits_per_acq as f64) } else { mean_raw };
        let var = bers.iter().map(|&b| (b - mean_raw) * (b - mean_raw)).sum::<f64>() / n_acq as f64;
        let point = ScanPoint {
            prx_dbm: prx,
            ber_mean: mean,
            ber_std: var.sqrt(),
            n_acquisitions: n_acq,
            floored,
        };
        on_point(&point)?;
        points.push(point);
    }
    Ok(points)
}

/// How a pre-FEC crossing was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossingKind {
    /// Threshold bracketed by two measured points.
    Interpolated,
    /// Log-linear extrapolation from the curve edge, within the 3 dB limit.
    Extrapolated,
    /// Extrapolation hit the 3 dB limit: the value is a bound, not a fit.
    Capped,
}

/// PRX at which a curve crosses a BER threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Crossing {
    pub prx_dbm: f64,
    pub kind: CrossingKind,
    /// Multiple brackets found: the curve is not monotone near threshold.
    pub monotonicity_warning: bool,
}

/// Locate the PRX where the BER curve crosses `threshold`, interpolating
/// linearly in (PRX, log10 BER). When the threshold is not bracketed the
/// curve edge is extrapolated from its last two points, limited to 3 dB
/// beyond the measurement; past that the value saturates and is flagged.
pub fn crossing_prx(points: &[ScanPoint], threshold: f64) -> Result<Crossing> {
    if points.len() < 2 {
        return Err(Error::param("need at least two scan points"));
    }
    let log_thr = threshold.log10();
    let logs: Vec<(f64, f64)> = points.iter().map(|p| (p.prx_dbm, p.ber_mean.log10())).collect();

    let mut brackets = Vec::new();
    for w in logs.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if (y0 - log_thr) * (y1 - log_thr) <= 0.0 && y0 != y1 {
            let prx = x0 + (x1 - x0) * (log_thr - y0) / (y1 - y0);
            brackets.push(prx);
        }
    }
    if let Some(&prx) = brackets.last() {
        return Ok(Crossing {
            prx_dbm: prx,
            kind: CrossingKind::Interpolated,
            monotonicity_warning: brackets.len() > 1,
        });
    }

    // Not bracketed: extrapolate from the nearest curve edge.
    let (x0, y0) = logs[logs.len() - 2];
    let (x1, y1) = logs[logs.len() - 1];
    let all_above = logs.iter().all(|&(_, y)| y > log_thr);
    if all_above {
        // Curve never gets down to the threshold: continue the high-PRX tail.
        let slope = (y1 - y0) / (x1 - x0);
        if slope < 0.0 {
            let prx = x1 + (log_thr - y1) / slope;
            if prx <= x1 + EXTRAPOLATION_LIMIT_DB {
                return Ok(Crossing {
                    prx_dbm: prx,
                    kind: CrossingKind::Extrapolated,
                    monotonicity_warning: false,
                });
            }
        }
        return Ok(Crossing {
            prx_dbm: x1 + EXTRAPOLATION_LIMIT_DB,
            kind: CrossingKind::Capped,
            monotonicity_warning: slope >= 0.0,
        });
    }
    // Entirely below threshold: continue the low-PRX head backwards.
    let (x0, y0) = logs[0];
    let (x1, y1) = logs[1];
    let slope = (y1 - y0) / (x1 - x0);
    if slope < 0.0 {
        let prx = x0 + (log_thr - y0) / slope;
        if prx >= x0 - EXTRAPOLATION_LIMIT_DB {
            return Ok(Crossing { prx_dbm: prx, kind: CrossingKind::Extrapolated, monotonicity_warning: false });
        }
    }
    Ok(Crossing {
        prx_dbm: x0 - EXTRAPOLATION_LIMIT_DB,
        kind: CrossingKind::Capped,
        monotonicity_warning: slope >= 0.0,
    })
}

/// Gain of the equalized link over the unequalized one at the pre-FEC
/// threshold: PRX(without) - PRX(with) - EL. Positive once the equalization
/// benefit beats the device's excess loss.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainReport {
    pub gain_db: f64,
    pub threshold_ber: f64,
    pub el_db: f64,
    pub with_nn: Crossing,
    pub without_nn: Crossing,
    pub warning: bool,
}

pub fn gain_report(
    with_nn: &BerScanResult,
    without_nn: &BerScanResult,
    el_db: f64,
    threshold_ber: f64,
) -> Result<GainReport> {
    let with_cross = crossing_prx(&with_nn.points, threshold_ber)?;
    let without_cross = crossing_prx(&without_nn.points, threshold_ber)?;
    Ok(GainReport {
        gain_db: without_cross.prx_dbm - with_cross.prx_dbm - el_db,
        threshold_ber,
        el_db,
        with_nn: with_cross,
        without_nn: without_cross,
        warning: with_cross.monotonicity_warning
            || without_cross.monotonicity_warning
            || with_cross.kind == CrossingKind::Capped
            || without_cross.kind == CrossingKind::Capped,
    })
}

/// Run the configured scenario: train where the mode requires it, sweep the
/// PRX grid for every fiber length, and persist curves plus metadata under
/// `out_dir/<scenario-hash>/`. With `resume`, completed PRX cells are loaded
/// from disk and only the remainder is computed; resumed output is
/// byte-identical to an uninterrupted run.
pub fn run_scenario(config: &Config, out_dir: &Path, resume: bool) -> Result<Vec<BerScanResult>> {
    let sim = LinkSimulator::new(config.clone())?;
    let scenario_dir = out_dir.join(config.scenario_hash());
    std::fs::create_dir_all(&scenario_dir)?;

    let mode = config.scenario.mode;
    let lengths: Vec<f64> =
        if mode == LinkMode::Btb { vec![0.0] } else { config.scenario.fiber_lengths_km.clone() };

    // Train the whole sweep first: ascending lengths, each warm-started with
    // the previous solution (a resumed span reuses its persisted outcome).
    let mut trained_by_length: Vec<Option<TrainedDevice>> = vec![None; lengths.len()];
    if mode == LinkMode::FiberPlusNn {
        let mut order: Vec<usize> = (0..lengths.len()).collect();
        order.sort_by(|&a, &b| lengths[a].partial_cmp(&lengths[b]).unwrap());
        let mut prev: Option<Vec<f64>> = None;
        for &i in &order {
            let length_km = lengths[i];
            let trained_path = scenario_dir.join(io::trained_device_filename(length_km));
            let t = if resume && trained_path.exists() {
                io::load_trained_device(&trained_path)?
            } else {
                let t = train_for_length_seeded(&sim, length_km, prev.as_deref())?;
                io::write_training_log(
                    &scenario_dir.join(io::training_log_filename(length_km)),
                    &t.record,
                )?;
                io::write_trained_device(&trained_path, &t)?;
                t
            };
            prev = Some(t.position.clone());
            trained_by_length[i] = Some(t);
        }
    }

    let mut results = Vec::new();
    let mut trained_devices: Vec<TrainedDevice> = Vec::new();

    for (li, &length_km) in lengths.iter().enumerate() {
        let trained = trained_by_length[li].take();
        let device = trained.as_ref().map(|t| t.device(&config.device.state()));
        let csv_path = scenario_dir.join(io::scan_csv_filename(mode, length_km));
        let existing = if resume { io::read_scan_csv(&csv_path, &config.scenario.prx_dbm_grid)? } else { Vec::new() };
        let skip = existing.len();
        if skip == 0 {
            io::start_scan_csv(&csv_path)?;
        }

        let mut writer = io::ScanCsvAppender::new(&csv_path)?;
        let fresh = scan_ber(&sim, mode, length_km, device.as_ref(), skip, |p| writer.append(p))?;
        drop(writer);

        let mut points = existing;
        points.extend(fresh);

        let metadata = ScanMetadata {
            scenario_hash: config.scenario_hash(),
            provenance: config.provenance(),
            n_acquisitions: config.scenario.n_acquisitions,
            bits_per_acquisition: sim.bits().len() * config.scenario.periods_per_acquisition,
            trained_currents_ma: trained.as_ref().and_then(|t| {
                if t.phase_space {
                    None
                } else {
                    Some(t.position.clone())
                }
            }),
            trained_phases_rad: trained.as_ref().map(|t| t.record.final_phases.clone()),
            excess_loss_db: trained.as_ref().map(|t| t.excess_loss_db),
        };
        if let Some(t) = trained {
            trained_devices.push(t);
        }
        results.push(BerScanResult { mode, length_km, points, metadata });
    }

    io::write_scenario_metadata(
        &scenario_dir.join("metadata.json"),
        config,
        &results,
        &trained_devices,
        &sim.dispersion_report(),
    )?;
    Ok(results)
}

/// Export eye and histogram CSVs for one mode/length at a given PRX.
pub fn export_eye(
    config: &Config,
    out_dir: &Path,
    mode: LinkMode,
    length_km: f64,
    prx_dbm: f64,
) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    let sim = LinkSimulator::new(config.clone())?;
    let trained = if mode == LinkMode::FiberPlusNn {
        Some(train_for_length(&sim, length_km)?)
    } else {
        None
    };
    let device = trained.as_ref().map(|t| t.device(&config.device.state()));
    let field = sim.received_field(mode, length_km, device.as_ref())?;
    let periods = config.scenario.periods_per_acquisition;
    let tiled = sim.tiled(&field, periods);
    let reference = sim.reference_trace(periods);
    let labels = sim.bits().tiled_labels(periods);
    let seed = cell_seed(config.scenario.master_seed, "eye", length_km, prx_dbm, 0);
    let meas = sim.measure(&tiled, prx_dbm, &reference, &labels, seed)?;

    std::fs::create_dir_all(out_dir)?;
    let tag = format!("{}_{:.0}km", mode.tag(), length_km);
    let eye_path = out_dir.join(format!("eye_{tag}.csv"));
    let hist_path = out_dir.join(format!("histogram_{tag}.csv"));
    eye::write_eye_csv(&eye_path, &meas.aligned, sim.scope_samples_per_bit())?;
    let trace = metrics::undersample(
        &meas.aligned,
        &labels,
        sim.scope_samples_per_bit(),
        HISTOGRAM_SAMPLE_INDEX,
    )?;
    let hist = eye::level_histogram(&trace, 50)?;
    eye::write_histogram_csv(&hist_path, &hist)?;
    Ok((eye_path, hist_path))
}

/// One cell of the 40 Gbps study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyCell {
    pub length_km: f64,
    /// BER at the fixed study SNR.
    pub ber_at_fixed_snr: f64,
    pub floored: bool,
    /// SNR (dB) where the BER-vs-SNR curve crosses the pre-FEC threshold;
    /// `None` when not interpolable within the SNR grid.
    pub snr_at_threshold_db: Option<f64>,
    /// SNR penalty vs back-to-back at the pre-FEC threshold.
    pub penalty_db: Option<f64>,
    /// Training made no improvement over the zero configuration.
    pub non_improving: bool,
}

/// Per-variant study outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyVariant {
    /// "no_device" or the delay granularity tag.
    pub variant: String,
    pub delay_ps: Option<f64>,
    pub cells: Vec<StudyCell>,
    /// Link reach at the pre-FEC threshold from the BER-vs-length curve
    /// (interpolated in length), when the curve crosses it.
    pub reach_km: Option<f64>,
}

/// Full 40 Gbps reach and SNR-penalty study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyResult {
    pub variants: Vec<StudyVariant>,
    pub fixed_snr_db: f64,
    pub pre_fec_ber: f64,
    pub btb_snr_at_threshold_db: f64,
    pub provenance: String,
}

fn ber_at_snr_grid(
    sim: &LinkSimulator,
    variant: &str,
    field: &ComplexEnvelope,
    length_km: f64,
    snr_grid: &[f64],
) -> Result<Vec<(f64, f64, bool)>> {
    let cfg = sim.config();
    let n_acq = cfg.scenario.n_acquisitions;
    let reference = sim.reference_trace(1);
    let labels = sim.bits().bits.clone();
    let bits_per_acq = labels.len();
    let master = cfg.scenario.master_seed;

    let mut out = Vec::with_capacity(snr_grid.len());
    for &snr in snr_grid {
        let prx = receiver::prx_dbm_for_snr(snr, cfg.signal.extinction_ratio_db, &sim.receiver);
        let tag = format!("study|{variant}");
        let bers: Vec<f64> = (0..n_acq)
            .into_par_iter()
            .map(|acq| {
                let seed = cell_seed(master, &tag, length_km, snr, acq);
                sim.measure(field, prx, &reference, &labels, seed).map(|m| m.ber.ber)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean_raw = bers.iter().sum::<f64>() / n_acq as f64;
        let floored = mean_raw == 0.0;
        let mean = if floored { 1.0 / (n_acq as f64 * bits_per_acq as f64) } else { mean_raw };
        out.push((snr, mean, floored));
    }
    Ok(out)
}

/// Interpolate the SNR at which the BER-vs-SNR curve crosses `threshold`
/// (linear in (SNR, log10 BER)); `None` when the curve never gets below it.
fn snr_at_threshold(curve: &[(f64, f64, bool)], threshold: f64) -> Option<f64> {
    let log_thr = threshold.log10();
    let mut crossing = None;
    for w in curve.windows(2) {
        let (x0, y0) = (w[0].0, w[0].1.log10());
        let (x1, y1) = (w[1].0, w[1].1.log10());
        if (y0 - log_thr) * (y1 - log_thr) <= 0.0 && y0 != y1 {
            crossing = Some(x0 + (x1 - x0) * (log_thr - y0) / (y1 - y0));
            if y0 >= log_thr && y1 <= log_thr {
                // Prefer the first downward crossing.
                return crossing;
            }
        }
    }
    crossing
}

/// Interpolated reach: the length where BER-vs-length (at the fixed SNR)
/// crosses the threshold going up.
fn reach_from_curve(cells: &[StudyCell], threshold: f64) -> Option<f64> {
    let log_thr = threshold.log10();
    let mut reach = None;
    for w in cells.windows(2) {
        let (x0, y0) = (w[0].length_km, w[0].ber_at_fixed_snr.log10());
        let (x1, y1) = (w[1].length_km, w[1].ber_at_fixed_snr.log10());
        if y0 <= log_thr && y1 > log_thr && y0 != y1 {
            reach = Some(x0 + (x1 - x0) * (log_thr - y0) / (y1 - y0));
            break;
        }
    }
    match reach {
        Some(r) => Some(r),
        // Below threshold over the whole grid: reach is at least the last length.
        None if cells.last().map(|c| c.ber_at_fixed_snr <= threshold).unwrap_or(false) => {
            cells.last().map(|c| c.length_km)
        }
        None => None,
    }
}

/// The 40 Gbps study: BER vs length at the fixed SNR plus the SNR penalty at
/// the pre-FEC threshold, for the no-device baseline and each delay variant.
pub fn reach_and_penalty_study(config: &Config) -> Result<StudyResult> {
    let study = config.study.clone();
    let mut snr_grid = study.snr_db_grid.clone();
    snr_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if !snr_grid.iter().any(|&s| (s - study.fixed_snr_db).abs() < 1e-9) {
        snr_grid.push(study.fixed_snr_db);
        snr_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }

    // Back-to-back reference: no device, zero length.
    let base_sim = LinkSimulator::new(config.clone())?;
    let btb_field = base_sim.received_field(LinkMode::FiberOnly, 0.0, None)?;
    let btb_curve = ber_at_snr_grid(&base_sim, "btb", &btb_field, 0.0, &snr_grid)?;
    let btb_snr = snr_at_threshold(&btb_curve, study.pre_fec_ber).ok_or_else(|| {
        Error::Config("back-to-back never reaches the pre-FEC threshold on the SNR grid".into())
    })?;

    let mut variants = Vec::new();

    // No-device baseline across lengths.
    {
        let mut cells = Vec::new();
        for &length_km in &config.scenario.fiber_lengths_km {
            let field = base_sim.received_field(LinkMode::FiberOnly, length_km, None)?;
            let curve = ber_at_snr_grid(&base_sim, "no_device", &field, length_km, &snr_grid)?;
            cells.push(study_cell(length_km, &curve, &study, btb_snr, false)?);
        }
        let reach = reach_from_curve(&cells, study.pre_fec_ber);
        variants.push(StudyVariant { variant: "no_device".into(), delay_ps: None, cells, reach_km: reach });
    }

    // Device variants.
    for &delay_ps in &study.delay_variants_ps {
        let mut cfg = config.clone();
        cfg.device.delta_t_ps = delay_ps;
        let sim = LinkSimulator::new(cfg.clone())?;
        let variant = format!("delay_{}ps", delay_ps.to_string().replace('.', "p"));
        let trained_all = train_across_lengths(&sim, &cfg.scenario.fiber_lengths_km)?;
        let mut cells = Vec::new();
        for (trained, &length_km) in trained_all.iter().zip(&cfg.scenario.fiber_lengths_km) {
            let device = trained.device(&cfg.device.state());
            let field = sim.received_field(LinkMode::FiberPlusNn, length_km, Some(&device))?;
            let curve = ber_at_snr_grid(&sim, &variant, &field, length_km, &snr_grid)?;
            cells.push(study_cell(length_km, &curve, &study, btb_snr, !trained.improved)?);
        }
        let reach = reach_from_curve(&cells, study.pre_fec_ber);
        variants.push(StudyVariant {
            variant,
            delay_ps: Some(delay_ps),
            cells,
            reach_km: reach,
        });
    }

    Ok(StudyResult {
        variants,
        fixed_snr_db: study.fixed_snr_db,
        pre_fec_ber: study.pre_fec_ber,
        btb_snr_at_threshold_db: btb_snr,
        provenance: config.provenance(),
    })
}

fn study_cell(
    length_km: f64,
    curve: &[(f64, f64, bool)],
    study: &crate::config::StudyConfig,
    btb_snr: f64,
    non_improving: bool,
) -> Result<StudyCell> {
    let fixed = curve
        .iter()
        .find(|(snr, _, _)| (snr - study.fixed_snr_db).abs() < 1e-9)
        .ok_or_else(|| Error::Config("fixed SNR missing from the study grid".into()))?;
    let snr_cross = snr_at_threshold(curve, study.pre_fec_ber);
    Ok(StudyCell {
        length_km,
        ber_at_fixed_snr: fixed.1,
        floored: fixed.2,
        snr_at_threshold_db: snr_cross,
        penalty_db: snr_cross.map(|s| s - btb_snr),
        non_improving,
    })
}
