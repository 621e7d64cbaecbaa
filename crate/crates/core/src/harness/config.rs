//! Experiment configuration, read from TOML.
//!
//! Angles are given in degrees and powers in dBm; everything is converted to
//! radians and watts on the way in.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, TapParams};
use crate::correction::ProjectionSolver;
use crate::error::{Error, Result};
use crate::radar::{ChirpConfig, ReceiverKind};
use crate::scenario::{DropConfig, EnvironmentConfig};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub n_drops: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// RSU field of view used to pick the ego vehicle, degrees.
    pub fov_deg: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { n_drops: 1000, master_seed: 1, output_dir: PathBuf::from("out"), fov_deg: 120.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Receiver {
    Reference,
    Simplified,
}

impl From<Receiver> for ReceiverKind {
    fn from(r: Receiver) -> Self {
        match r {
            Receiver::Reference => ReceiverKind::Reference,
            Receiver::Simplified => ReceiverKind::Simplified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarSection {
    pub start_ghz: f64,
    pub bandwidth_ghz: f64,
    pub t_p_us: f64,
    pub samples: usize,
    pub n_chirps: usize,
    pub tx_power_dbm: f64,
    pub max_clock_offset_mhz: f64,
    /// Per-sample SNR of the incoherent echo sum at one RSU element.
    pub snr_db: f64,
    pub receiver: Receiver,
    /// Height of the RSU radar array relative to the comm array, metres.
    pub rsu_array_offset_m: f64,
}

impl Default for RadarSection {
    fn default() -> Self {
        RadarSection {
            start_ghz: 76.0,
            bandwidth_ghz: 1.0,
            t_p_us: 500.0,
            samples: 1024,
            n_chirps: 128,
            tx_power_dbm: 30.0,
            max_clock_offset_mhz: 3.0,
            snr_db: 10.0,
            receiver: Receiver::Simplified,
            rsu_array_offset_m: -0.1,
        }
    }
}

impl RadarSection {
    /// Chirp parameters with the noise power left at zero; it is set per drop
    /// from `snr_db`.
    pub fn chirp(&self) -> ChirpConfig {
        ChirpConfig {
            start_hz: self.start_ghz * 1e9,
            bandwidth_hz: self.bandwidth_ghz * 1e9,
            chirp_s: self.t_p_us * 1e-6,
            samples: self.samples,
            sample_interval_s: 0.0,
            n_chirps: self.n_chirps,
            tx_power_w: dbm_to_watts(self.tx_power_dbm),
            max_clock_offset_hz: self.max_clock_offset_mhz * 1e6,
            noise_power: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommSection {
    pub carrier_ghz: f64,
    pub n_rsu: usize,
    pub n_v: usize,
    pub subcarriers: usize,
    pub taps: usize,
    pub bandwidth_ghz: f64,
    pub tx_power_dbm: f64,
    pub roll_off: f64,
    pub phase_bits: u32,
    pub noise_figure_db: f64,
}

impl Default for CommSection {
    fn default() -> Self {
        CommSection {
            carrier_ghz: 73.0,
            n_rsu: 128,
            n_v: 16,
            subcarriers: 2048,
            taps: 512,
            bandwidth_ghz: 1.0,
            tx_power_dbm: 30.0,
            roll_off: 0.4,
            phase_bits: 2,
            noise_figure_db: 0.0,
        }
    }
}

impl CommSection {
    pub fn tap_params(&self) -> TapParams {
        TapParams { n_taps: self.taps, t_c: 1.0 / (self.bandwidth_ghz * 1e9), roll_off: self.roll_off }
    }

    pub fn rsu_geometry(&self) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(self.n_rsu, self.carrier_ghz * 1e9)
    }

    pub fn vehicle_geometry(&self) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(self.n_v, self.carrier_ghz * 1e9)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    /// Stream counts; the first one fills the per-drop CSV columns.
    pub l: Vec<usize>,
    /// Array sizes swept by the congruence experiment.
    pub n: Vec<usize>,
}

impl Default for MetricSection {
    fn default() -> Self {
        MetricSection { l: vec![1, 2, 4], n: vec![32, 64, 128] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategySection {
    /// Radar-assisted window sizes; empty means every size from 1 to `N_RSU`.
    pub m: Vec<usize>,
    pub pos_error_m: f64,
    /// Coherence times in OFDM blocks (`inf` allowed); empty means
    /// `[inf, 4 N_RSU N_V]`.
    pub t_coh: Vec<f64>,
    /// Use the corrected radar covariance to locate the spectrum peak.
    pub use_correction: bool,
    /// Observe beam-pair gains through noise during training.
    pub measurement_noise: bool,
}

impl Default for StrategySection {
    fn default() -> Self {
        StrategySection { m: Vec::new(), pos_error_m: 10.0, t_coh: Vec::new(), use_correction: true, measurement_noise: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectionSection {
    pub solver: ProjectionSolver,
}

impl Default for CorrectionSection {
    fn default() -> Self {
        CorrectionSection { solver: ProjectionSolver::Dykstra }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CongruenceSection {
    pub enabled: bool,
    pub n_drops: usize,
    pub n_v: usize,
}

impl Default for CongruenceSection {
    fn default() -> Self {
        CongruenceSection { enabled: false, n_drops: 100, n_v: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub scenario: DropConfig,
    pub environment: EnvironmentConfig,
    pub radar: RadarSection,
    pub comm: CommSection,
    pub metric: MetricSection,
    pub strategy: StrategySection,
    pub correction: CorrectionSection,
    pub congruence: CongruenceSection,
}

impl ExperimentConfig {
    /// Scaled-down setting for quick runs: `N_RSU = 32`, `N_V = 8`, 100 drops.
    pub fn desk() -> Self {
        let mut cfg = ExperimentConfig::default();
        cfg.run.n_drops = 100;
        cfg.comm.n_rsu = 32;
        cfg.comm.n_v = 8;
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn m_values(&self) -> Vec<usize> {
        if self.strategy.m.is_empty() {
            (1..=self.comm.n_rsu).collect()
        } else {
            self.strategy.m.clone()
        }
    }

    pub fn t_coh_values(&self) -> Vec<f64> {
        if self.strategy.t_coh.is_empty() {
            vec![f64::INFINITY, (4 * self.comm.n_rsu * self.comm.n_v) as f64]
        } else {
            self.strategy.t_coh.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        self.scenario.validate()?;
        self.environment.validate()?;
        self.radar.chirp().validate()?;
        if self.run.n_drops == 0 {
            return bad("run.n_drops must be at least 1".into());
        }
        if !(self.run.fov_deg > 0.0 && self.run.fov_deg <= 180.0) {
            return bad(format!("run.fov_deg = {} outside (0, 180]", self.run.fov_deg));
        }
        let c = &self.comm;
        if c.n_rsu == 0 || c.n_v == 0 || c.taps == 0 || c.subcarriers < c.taps {
            return bad("comm: array sizes must be positive and taps <= subcarriers".into());
        }
        if !(c.bandwidth_ghz > 0.0 && c.carrier_ghz > 0.0) || !(0.0..=1.0).contains(&c.roll_off) {
            return bad("comm: bandwidth and carrier must be positive, roll_off in [0, 1]".into());
        }
        if c.phase_bits == 0 || c.phase_bits > 30 {
            return bad("comm.phase_bits must be in 1..=30".into());
        }
        if (self.environment.comm_carrier_hz - c.carrier_ghz * 1e9).abs() > 1.0
            || (self.environment.radar_carrier_hz - self.radar.start_ghz * 1e9).abs() > 1.0
        {
            return bad("environment carriers must match comm.carrier_ghz and radar.start_ghz".into());
        }
        if self.metric.l.is_empty() || self.metric.l.iter().any(|&l| l == 0 || l > c.n_rsu) {
            return bad(format!("metric.l entries must be in 1..={}", c.n_rsu));
        }
        if self.metric.n.contains(&0) {
            return bad("metric.n entries must be positive".into());
        }
        if self.strategy.m.iter().any(|&m| m == 0 || m > c.n_rsu) {
            return bad(format!("strategy.m entries must be in 1..={}", c.n_rsu));
        }
        if !(self.strategy.pos_error_m >= 0.0) {
            return bad("strategy.pos_error_m must be non-negative".into());
        }
        if self.strategy.t_coh.iter().any(|t| !(*t > 0.0)) {
            return bad("strategy.t_coh entries must be positive".into());
        }
        if self.congruence.enabled && (self.congruence.n_drops == 0 || self.congruence.n_v == 0) {
            return bad("congruence: n_drops and n_v must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_keys_parse() {
        let cfg = ExperimentConfig::from_toml("radar.t_p_us = 250\ncomm.n_rsu = 16\nrun.n_drops = 3\n").unwrap();
        assert_eq!(cfg.radar.t_p_us, 250.0);
        assert_eq!(cfg.comm.n_rsu, 16);
        assert_eq!(cfg.run.n_drops, 3);
        assert_eq!(cfg.comm.n_v, 16);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ExperimentConfig::from_toml("radar.tp = 1"), Err(Error::Parse(_))));
    }

    #[test]
    fn defaults_follow_reference_setting() {
        let cfg = ExperimentConfig::default();
        let chirp = cfg.radar.chirp();
        assert_eq!(chirp.chirp_rate(), 2e12);
        assert!((chirp.tx_power_w - 1.0).abs() < 1e-12);
        assert_eq!(cfg.t_coh_values(), vec![f64::INFINITY, 8192.0]);
        assert_eq!(cfg.m_values().len(), 128);
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::desk();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn infinite_coherence_is_accepted() {
        let cfg = ExperimentConfig::from_toml("strategy.t_coh = [inf, 1024.0]").unwrap();
        assert!(cfg.strategy.t_coh[0].is_infinite());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml("run.n_drops = 0").is_err());
        assert!(ExperimentConfig::from_toml("comm.subcarriers = 8\ncomm.taps = 16").is_err());
        assert!(ExperimentConfig::from_toml("strategy.m = [0]").is_err());
        assert!(ExperimentConfig::from_toml("comm.carrier_ghz = 60").is_err());
    }
}
