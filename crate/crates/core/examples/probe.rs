// Scratch probe for pipeline behavior during development.

use linkeq_core::config::{Config, LinkMode};
use linkeq_core::experiment::{self, LinkSimulator};
use linkeq_core::eye::class0_band_fraction;
use linkeq_core::metrics::{self, LevelStats};
use linkeq_core::receiver;
use rayon::prelude::*;

fn quick_ber(sim: &LinkSimulator, field: &linkeq_core::wave::ComplexEnvelope, prx: f64, n: usize, tag: &str) -> f64 {
    let reference = sim.reference_trace(1);
    let labels = sim.bits().bits.clone();
    let total: usize = (0..n)
        .into_par_iter()
        .map(|acq| {
            let seed = linkeq_core::rng::fnv1a64(format!("{tag}|{prx}|{acq}").as_bytes());
            sim.measure(field, prx, &reference, &labels, seed).unwrap().ber.errors
        })
        .sum();
    let bits = labels.len() * n;
    (total as f64 / bits as f64).max(1.0 / bits as f64)
}

fn main() {
    let t0 = std::time::Instant::now();
    let mut cfg = Config::default();
    cfg.trainer.n_particles = 20;
    cfg.trainer.n_iterations = 100;
    let sim = LinkSimulator::new(cfg.clone()).unwrap();

    println!("== training point ==");
    let prx_train = receiver::prx_dbm_for_snr(11.2, 13.9, sim.receiver_params());
    println!("train PRX = {prx_train:.2} dBm");

    println!("\n== phase trend across lengths (continuation) ==");
    let lengths = [25.0, 50.0, 75.0, 100.0, 125.0];
    let all = experiment::train_across_lengths(&sim, &lengths).unwrap();
    let trend = experiment::phase_trend(&all, 0.35).unwrap();
    println!("trend: non_decreasing={} max_final={:.2} rad", trend.non_decreasing, trend.max_final_phase_rad);
    for (c, row) in trend.phases.iter().enumerate() {
        println!("  ch{}: {:?}", c + 2, row.iter().map(|p| (p * 100.0).round() / 100.0).collect::<Vec<_>>());
    }
    for (trained, &length) in all.iter().zip(&lengths) {
        let t = std::time::Instant::now();
        println!(
            "L={length:>5} km: loss {:+.4} (baseline {:+.4}) currents {:?} phases {:?} EL {:.2} dB  [{:?}]",
            trained.record.best_loss,
            trained.baseline_loss,
            trained
                .position
                .iter()
                .map(|c| (c * 100.0).round() / 100.0)
                .collect::<Vec<_>>(),
            trained
                .record
                .final_phases
                .iter()
                .map(|p| (p * 100.0).round() / 100.0)
                .collect::<Vec<_>>(),
            trained.excess_loss_db,
            t.elapsed()
        );

        if length == 125.0 {
            let device = trained.device(&cfg.device.state());
            let with_field = sim.received_field(LinkMode::FiberPlusNn, length, Some(&device)).unwrap();
            let without_field = sim.received_field(LinkMode::FiberOnly, length, None).unwrap();
            println!("  BER vs PRX (N=100):");
            for prx in [-24.0, -20.0, -18.0, -16.0, -12.0, -8.0, 0.0] {
                let bw = quick_ber(&sim, &with_field, prx, 100, "w");
                let bo = quick_ber(&sim, &without_field, prx, 100, "o");
                println!("    prx {prx:>6.1} dBm: with {bw:.3e}  without {bo:.3e}");
            }
            // Histogram band check at 0 dBm.
            let reference = sim.reference_trace(1);
            let labels = sim.bits().bits.clone();
            for (tag, field) in [("with", &with_field), ("without", &without_field)] {
                let meas = sim.measure(field, 0.0, &reference, &labels, 99).unwrap();
                let trace = metrics::undersample(&meas.aligned, &labels, 4, 2).unwrap();
                let band = class0_band_fraction(&trace, 0.3, 0.4).unwrap();
                let stats = LevelStats::from_labeled(&trace.values, &trace.labels).unwrap();
                let snr = receiver::snr_at_receiver(&stats).unwrap_or(-1.0);
                println!("  {tag}: band[0.3,0.4] class0 = {band:.4}, measured SNR {snr:.1} dB");
            }
            // Measured SNR at the training point (BTB).
            let btb = sim.received_field(LinkMode::Btb, 0.0, None).unwrap();
            let meas = sim.measure(&btb, prx_train, &reference, &labels, 7).unwrap();
            let trace = metrics::undersample(&meas.aligned, &labels, 4, 3).unwrap();
            let stats = LevelStats::from_labeled(&trace.values, &trace.labels).unwrap();
            println!(
                "  BTB at train point: measured SNR {:.1} dB, BER {:.2e}",
                receiver::snr_at_receiver(&stats).unwrap_or(-1.0),
                quick_ber(&sim, &btb, prx_train, 100, "btb")
            );
        }
    }
    println!("total {:?}", t0.elapsed());
}
