//! Declarative scenario configuration (TOML), with the nominal link as the
//! default for every key.

use crate::device::DeviceState;
use crate::error::{Error, Result};
use crate::fiber::FiberParams;
use crate::modulator::ModulatorParams;
use crate::receiver::ReceiverParams;
use crate::wave::dbm_to_watts;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    pub prbs_order: u32,
    pub prbs_seed: u32,
    pub bitrate_hz: f64,
    pub grid_rate_hz: f64,
    pub extinction_ratio_db: f64,
    pub modulator_bw_hz: f64,
    pub avg_power_dbm: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            prbs_order: 10,
            prbs_seed: 1,
            bitrate_hz: 10e9,
            grid_rate_hz: 320e9,
            extinction_ratio_db: 13.9,
            modulator_bw_hz: 30e9,
            avg_power_dbm: 0.0,
        }
    }
}

impl SignalConfig {
    pub fn modulator_params(&self) -> ModulatorParams {
        ModulatorParams {
            analog_bandwidth_hz: self.modulator_bw_hz,
            extinction_ratio_db: self.extinction_ratio_db,
            chirp: 0.0,
            avg_power_w: dbm_to_watts(self.avg_power_dbm),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FiberConfig {
    pub beta2_ps2_per_m: f64,
    pub alpha_db_per_km: f64,
    pub dispersion_d_ps_nm_km: Option<f64>,
    pub lambda_nm: f64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        Self {
            beta2_ps2_per_m: -0.021,
            alpha_db_per_km: 0.2,
            dispersion_d_ps_nm_km: Some(17.2),
            lambda_nm: 1550.0,
        }
    }
}

impl FiberConfig {
    pub fn params(&self, length_m: f64) -> FiberParams {
        FiberParams {
            length_m,
            beta2_ps2_per_m: self.beta2_ps2_per_m,
            alpha_db_per_km: self.alpha_db_per_km,
            dispersion_d_ps_nm_km: self.dispersion_d_ps_nm_km,
            lambda_nm: self.lambda_nm,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub n_taps: usize,
    pub delta_t_ps: f64,
    pub attenuation_db: Vec<f64>,
    pub phase_offsets_rad: Vec<f64>,
    pub gamma_rad_per_ma2: f64,
    pub current_bounds_ma: [f64; 2],
    pub insertion_loss_db: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            n_taps: 4,
            delta_t_ps: 50.0,
            attenuation_db: vec![0.0, 2.1, 4.3, 6.4],
            phase_offsets_rad: vec![0.0; 4],
            gamma_rad_per_ma2: 0.01,
            current_bounds_ma: [0.0, 30.0],
            insertion_loss_db: 8.2,
        }
    }
}

impl DeviceConfig {
    pub fn state(&self) -> DeviceState {
        DeviceState {
            n_taps: self.n_taps,
            delta_t_s: self.delta_t_ps * 1e-12,
            attenuation_db: self.attenuation_db.clone(),
            phase_offsets_rad: self.phase_offsets_rad.clone(),
            currents_ma: vec![0.0; self.n_taps],
            gamma_rad_per_ma2: self.gamma_rad_per_ma2,
            current_bounds_ma: self.current_bounds_ma,
            insertion_loss_db: self.insertion_loss_db,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub noise_m_mv: f64,
    pub noise_q_mv2: f64,
    pub scope_bw_ghz: f64,
    pub scope_rate_gsa: f64,
    pub adc_bits: u32,
    pub full_scale_mv: f64,
    pub responsivity_mv_per_mw: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            noise_m_mv: 0.0189,
            noise_q_mv2: 0.2263,
            scope_bw_ghz: 16.0,
            scope_rate_gsa: 40.0,
            adc_bits: 8,
            full_scale_mv: 100.0,
            responsivity_mv_per_mw: 50.0,
        }
    }
}

impl ReceiverConfig {
    pub fn params(&self) -> ReceiverParams {
        ReceiverParams {
            noise_m_mv: self.noise_m_mv,
            noise_q_mv2: self.noise_q_mv2,
            scope_bw_hz: self.scope_bw_ghz * 1e9,
            scope_rate_hz: self.scope_rate_gsa * 1e9,
            adc_bits: self.adc_bits,
            full_scale_mv: self.full_scale_mv,
            responsivity_mv_per_mw: self.responsivity_mv_per_mw,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Pso,
    Adam,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub optimizer: OptimizerKind,
    pub n_particles: usize,
    pub n_iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub velocity_clamp_frac: f64,
    /// Finite-difference step for the Adam alternative, mA.
    pub fd_step_ma: f64,
    /// Operating point during training, as the analytic receiver SNR.
    pub train_snr_db: f64,
    /// Optimize heater currents, or phases directly (the 40 Gbps studies).
    pub phase_space: bool,
    pub master_seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Pso,
            n_particles: 20,
            n_iterations: 100,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            velocity_clamp_frac: 0.2,
            fd_step_ma: 0.5,
            train_snr_db: 11.2,
            phase_space: false,
            master_seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum LinkMode {
    /// Transmitter straight into the receiver: no fiber, no device.
    Btb,
    /// Fiber span, no device.
    FiberOnly,
    /// Fiber span followed by the trained device.
    FiberPlusNn,
}

impl LinkMode {
    pub fn tag(&self) -> &'static str {
        match self {
            LinkMode::Btb => "btb",
            LinkMode::FiberOnly => "fiber_only",
            LinkMode::FiberPlusNn => "fiber_plus_nn",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: LinkMode,
    pub fiber_lengths_km: Vec<f64>,
    pub prx_dbm_grid: Vec<f64>,
    /// Monte-Carlo acquisitions per PRX cell (N).
    pub n_acquisitions: usize,
    /// PRBS periods per acquisition; 1 for simulation-grade runs, 10 for the
    /// experimental emulation (50 x ~10^4 bits).
    pub periods_per_acquisition: usize,
    pub master_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: LinkMode::FiberPlusNn,
            fiber_lengths_km: vec![25.0, 50.0, 75.0, 100.0, 125.0],
            prx_dbm_grid: (0..13).map(|i| -24.0 + 2.0 * i as f64).collect(),
            n_acquisitions: 1000,
            periods_per_acquisition: 1,
            master_seed: 42,
        }
    }
}

/// 40 Gbps reach / SNR-penalty study settings.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// SNR grid swept per length to locate the pre-FEC crossing.
    pub snr_db_grid: Vec<f64>,
    /// Operating point of the BER-vs-length curve.
    pub fixed_snr_db: f64,
    /// Pre-FEC threshold for reach and penalty.
    pub pre_fec_ber: f64,
    /// Device delay granularities compared against the no-device baseline.
    pub delay_variants_ps: Vec<f64>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            snr_db_grid: (0..13).map(|i| 8.0 + i as f64).collect(),
            fixed_snr_db: 12.0,
            pre_fec_ber: 2.26e-4,
            delay_variants_ps: vec![12.5, 18.75],
        }
    }
}

/// Full simulator configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub signal: SignalConfig,
    pub fiber: FiberConfig,
    pub device: DeviceConfig,
    pub receiver: ReceiverConfig,
    pub trainer: TrainerConfig,
    pub scenario: ScenarioConfig,
    pub study: StudyConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// 40 Gbps study preset: 8 grid samples per bit, 28 GHz scope at
    /// 160 GSa/s, phase-space training at the fixed 12 dB operating point.
    pub fn forty_gbps() -> Self {
        let mut cfg = Config::default();
        cfg.signal.bitrate_hz = 40e9;
        cfg.receiver.scope_bw_ghz = 28.0;
        cfg.receiver.scope_rate_gsa = 160.0;
        cfg.device.delta_t_ps = 18.75;
        cfg.trainer.phase_space = true;
        cfg.trainer.train_snr_db = 12.0;
        cfg.scenario.fiber_lengths_km = (0..13).map(|i| 2.0 * i as f64).collect();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.signal.modulator_params().validate()?;
        self.receiver.params().validate()?;
        self.device.state().validate()?;
        self.fiber.params(0.0).validate()?;
        if self.scenario.n_acquisitions == 0 || self.scenario.periods_per_acquisition == 0 {
            return Err(Error::Config("acquisition counts must be positive".into()));
        }
        if self.scenario.prx_dbm_grid.is_empty() {
            return Err(Error::Config("prx_dbm_grid must be non-empty".into()));
        }
        Ok(())
    }

    /// Stable hash of the full configuration; scenario outputs live in a
    /// directory named by it.
    pub fn scenario_hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    /// Provenance line embedded in scenario metadata.
    pub fn provenance(&self) -> String {
        format!(
            "{} {} scenario={} seed={}",
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION"),
            self.scenario_hash(),
            self.scenario.master_seed
        )
    }
}
