//! End-to-end simulation of an intensity-modulated / direct-detection fiber
//! link equalized by a 4-channel time-delayed complex perceptron.
//!
//! The pipeline mirrors the physical testbed:
//!
//! * [`prbs`] / [`modulator`] - PRBS payload and the band-limited chirp-free
//!   NRZ transmitter on a dense 320 GSa/s grid;
//! * [`fiber`] - linear dispersive propagation solved in one Fourier step;
//! * [`device`] - the perceptron: split, per-channel delay + attenuation,
//!   tunable phases, coherent recombination;
//! * [`receiver`] - square-law detection with the fitted noise model, scope
//!   band-limiting, 8-bit quantization and asynchronous sampling;
//! * [`metrics`] / [`eye`] - alignment, undersampling, separation loss,
//!   counted BER, the erfc BER model, eye/histogram exports;
//! * [`trainer`] - PSO (and Adam) optimization of the channel currents;
//! * [`experiment`] - scenario runner: training, BER-vs-PRX scans, gain
//!   reports and the 40 Gbps reach/penalty study.

pub mod bessel;
pub mod config;
pub mod device;
pub mod error;
pub mod experiment;
pub mod eye;
pub mod fft;
pub mod fiber;
pub mod metrics;
pub mod modulator;
pub mod prbs;
pub mod receiver;
pub mod rng;
pub mod trainer;
pub mod wave;

pub use config::Config;
pub use error::{Error, Result};
