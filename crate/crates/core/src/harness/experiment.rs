//! Monte Carlo rate experiment: one ego vehicle per drop, every strategy at
//! every sweep point.

use rayon::prelude::*;

use crate::beamtrain::{
    achievable_rate, build_codebook, exhaustive_from_table, location_assisted, radar_assisted, subcarrier_noise,
    BeamGainTable, Codebook, LocationInput, RateParams, TrainingOutcome,
};
use crate::channel::{build_taps, tap_covariance, taps_to_freq, ChannelFreq};
use crate::correction::correct_covariance_with;
use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::radar::{noise_for_snr, streamed_covariance, targets_from_paths, MixerOffsets};
use crate::rng::{derive_seed, rng_from};
use crate::scenario::{
    generate_drop, mount_points, rsu_mount, select_ego, synthesize_all, Band, MountKind, PathSet, Point,
    COMM_HEIGHT,
};
use crate::spectra::{compute_aps, compute_aps_clamped, rpe, similarity};

use super::config::{dbm_to_watts, ExperimentConfig};

const TAG_DROP: u64 = 0xD5;
pub(super) const TAG_EGO: u64 = 0xE6;
pub(super) const TAG_COMM: u64 = 0xC1;
const TAG_RADAR_PATHS: u64 = 0xA1;
pub(super) const TAG_RADAR_RX: u64 = 0xA2;
const TAG_LOCATION: u64 = 0x10;
const TAG_SOUNDING: u64 = 0x50;

/// Fraction of drops that may fail before the whole run is rejected.
pub const MAX_ABORTED_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Exhaustive,
    Location,
    Radar,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Exhaustive => "exhaustive",
            Strategy::Location => "location",
            Strategy::Radar => "radar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exhaustive" => Some(Strategy::Exhaustive),
            "location" => Some(Strategy::Location),
            "radar" => Some(Strategy::Radar),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub drop_id: usize,
    pub strategy: Strategy,
    pub n_beams: usize,
    pub t_coh: f64,
    pub rate_bps: f64,
    pub similarity: f64,
    pub rpe: f64,
    pub los: bool,
    pub seed: u64,
}

/// What a single drop contributes besides its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DropDiagnostics {
    pub drop_id: usize,
    pub projection_iterations: usize,
    pub projection_converged: bool,
    pub corrected_min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: Vec<ResultRow>,
    pub diagnostics: Vec<DropDiagnostics>,
    pub aborted: Vec<(usize, Error)>,
}

/// Every stochastic input of a drop is derived from the master seed and the
/// drop index, so drops can run in any order.
pub fn drop_seed(master_seed: u64, drop_id: usize) -> u64 {
    derive_seed(master_seed, TAG_DROP, drop_id as u64)
}

/// Geometry and channels shared by every strategy of one drop.
pub struct DropState {
    pub seed: u64,
    pub los: bool,
    pub channels: Vec<ChannelFreq>,
    pub comm_covariance: CovarianceMatrix,
    pub radar_raw: CovarianceMatrix,
    pub radar_corrected: CovarianceMatrix,
    pub projection_iterations: usize,
    pub projection_converged: bool,
    pub ego_position: Point,
    pub ego_length: f64,
}

pub fn prepare_drop(cfg: &ExperimentConfig, drop_id: usize) -> Result<DropState> {
    let seed = drop_seed(cfg.run.master_seed, drop_id);
    let mut drop = generate_drop(&cfg.scenario, seed)?;
    let ego = select_ego(&cfg.scenario, &drop, cfg.run.fov_deg.to_radians(), derive_seed(seed, TAG_EGO, 0))?;
    drop.ego_index = Some(ego);
    let ego_vehicle = drop.vehicles[ego].clone();

    let rsu_comm = rsu_mount(&cfg.scenario, 0.0);
    let rsu_radar = rsu_mount(&cfg.scenario, cfg.radar.rsu_array_offset_m);
    let comm_mounts = mount_points(&ego_vehicle, MountKind::CommArray);
    let radar_mounts = mount_points(&ego_vehicle, MountKind::RadarTx);

    let comm_paths = synthesize_all(&drop, &cfg.environment, &rsu_comm, &comm_mounts, Band::Comm, derive_seed(seed, TAG_COMM, 0));
    let los = comm_paths.iter().any(|p| p.los);
    // timing is locked to the earliest arrival over all arrays
    let sync = comm_paths.iter().filter_map(PathSet::min_delay).reduce(f64::min).unwrap_or(0.0);
    let tap_params = cfg.comm.tap_params();
    let (g_v, g_r) = (cfg.comm.vehicle_geometry(), cfg.comm.rsu_geometry());
    let mut channels = Vec::with_capacity(comm_paths.len());
    let mut comm_sum = crate::linalg::CMatrix::zeros(cfg.comm.n_rsu, cfg.comm.n_rsu);
    for p in &comm_paths {
        let taps = build_taps(&p.advanced_by(sync), &g_v, &g_r, &tap_params)?;
        comm_sum += tap_covariance(&taps)?.matrix();
        channels.push(taps_to_freq(&taps, cfg.comm.subcarriers)?);
    }
    comm_sum /= num_complex::Complex64::new(comm_paths.len() as f64, 0.0);
    let comm_covariance = CovarianceMatrix::new(comm_sum, 0.0)?.with_flags(true, false);

    let radar_paths =
        synthesize_all(&drop, &cfg.environment, &rsu_radar, &radar_mounts, Band::Radar, derive_seed(seed, TAG_RADAR_PATHS, 0));
    let targets = targets_from_paths(&radar_paths);
    let mut chirp = cfg.radar.chirp();
    chirp.noise_power = noise_for_snr(&chirp, &targets, cfg.radar.snr_db);
    let mut rx_rng = rng_from(derive_seed(seed, TAG_RADAR_RX, 0));
    let offsets = MixerOffsets::draw(&chirp, &mut rx_rng);
    let radar_raw =
        streamed_covariance(&chirp, &targets, cfg.comm.n_rsu, cfg.radar.receiver.into(), &offsets, &mut rx_rng)?;
    let gamma = crate::radar::bias_gamma(chirp.start_hz, chirp.bandwidth_hz);
    let correction = correct_covariance_with(&radar_raw, chirp.noise_power, gamma, cfg.correction.solver)?;

    Ok(DropState {
        seed,
        los,
        channels,
        comm_covariance,
        radar_raw,
        radar_corrected: correction.covariance,
        projection_iterations: correction.projection.iterations,
        projection_converged: correction.projection.converged,
        ego_position: Point::new(ego_vehicle.center.x, ego_vehicle.center.y, COMM_HEIGHT),
        ego_length: ego_vehicle.length(),
    })
}

pub struct Codebooks {
    pub rsu: Codebook,
    pub vehicle: Codebook,
}

impl Codebooks {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Codebooks {
            rsu: build_codebook(cfg.comm.n_rsu, cfg.comm.phase_bits)?,
            vehicle: build_codebook(cfg.comm.n_v, cfg.comm.phase_bits)?,
        })
    }
}

pub fn rate_params(cfg: &ExperimentConfig, t_coh: f64) -> RateParams {
    RateParams {
        bandwidth_hz: cfg.comm.bandwidth_ghz * 1e9,
        n_subcarriers: cfg.comm.subcarriers,
        tx_power_w: dbm_to_watts(cfg.comm.tx_power_dbm),
        noise_power: subcarrier_noise(cfg.comm.bandwidth_ghz * 1e9, cfg.comm.subcarriers, cfg.comm.noise_figure_db),
        t_coh,
    }
}

/// All rows and diagnostics of one drop.
pub fn simulate_drop(
    cfg: &ExperimentConfig,
    books: &Codebooks,
    drop_id: usize,
) -> Result<(Vec<ResultRow>, DropDiagnostics)> {
    let state = prepare_drop(cfg, drop_id)?;
    let l = cfg.metric.l[0];
    let radar_for_metrics = if cfg.strategy.use_correction { &state.radar_corrected } else { &state.radar_raw };
    let d_radar = compute_aps_clamped(radar_for_metrics, cfg.comm.n_rsu)?;
    let d_comm = compute_aps(&state.comm_covariance, cfg.comm.n_rsu)?;
    let s = similarity(&d_radar, &d_comm, l)?;
    let r = rpe(radar_for_metrics, &state.comm_covariance, l)?;

    let true_table = BeamGainTable::new(&state.channels, &books.rsu, &books.vehicle)?;
    let table = if cfg.strategy.measurement_noise {
        let p = rate_params(cfg, f64::INFINITY);
        let noise = p.noise_power * p.n_subcarriers as f64 / p.tx_power_w;
        true_table.measured(noise, &mut rng_from(derive_seed(state.seed, TAG_SOUNDING, 0)))
    } else {
        true_table
    };
    let rsu = rsu_mount(&cfg.scenario, 0.0);

    let mut outcomes: Vec<(Strategy, TrainingOutcome)> = Vec::new();
    outcomes.push((Strategy::Exhaustive, exhaustive_from_table(&state.channels, &books.rsu, &books.vehicle, &table)?));
    let loc_input = LocationInput {
        rsu: &rsu,
        vehicle_position: state.ego_position,
        vehicle_length: state.ego_length,
        error_radius: cfg.strategy.pos_error_m,
    };
    let mut loc_rng = rng_from(derive_seed(state.seed, TAG_LOCATION, 0));
    outcomes.push((
        Strategy::Location,
        location_assisted(&state.channels, &books.rsu, &books.vehicle, &table, &loc_input, &mut loc_rng)?,
    ));
    for m in cfg.m_values() {
        outcomes.push((
            Strategy::Radar,
            radar_assisted(&state.channels, &books.rsu, &books.vehicle, &table, radar_for_metrics, m)?,
        ));
    }

    let mut rows = Vec::new();
    for t_coh in cfg.t_coh_values() {
        let params = rate_params(cfg, t_coh);
        for (strategy, outcome) in &outcomes {
            rows.push(ResultRow {
                drop_id,
                strategy: *strategy,
                n_beams: outcome.t_train / books.vehicle.size(),
                t_coh,
                rate_bps: achievable_rate(outcome, &params).bps,
                similarity: s,
                rpe: r,
                los: state.los,
                seed: state.seed,
            });
        }
    }
    let diagnostics = DropDiagnostics {
        drop_id,
        projection_iterations: state.projection_iterations,
        projection_converged: state.projection_converged,
        corrected_min_eigenvalue: state.radar_corrected.min_eigenvalue(),
    };
    Ok((rows, diagnostics))
}

/// Run every drop in parallel; rows come back ordered by drop.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let books = Codebooks::new(cfg)?;
    let results: Vec<(usize, Result<(Vec<ResultRow>, DropDiagnostics)>)> =
        (0..cfg.run.n_drops).into_par_iter().map(|id| (id, simulate_drop(cfg, &books, id))).collect();
    let mut report = RunReport { rows: Vec::new(), diagnostics: Vec::new(), aborted: Vec::new() };
    for (id, res) in results {
        match res {
            Ok((rows, diag)) => {
                report.rows.extend(rows);
                report.diagnostics.push(diag);
            }
            Err(e) => {
                log::warn!("drop {id} aborted: {e}");
                report.aborted.push((id, e));
            }
        }
    }
    let total = cfg.run.n_drops;
    if report.aborted.len() as f64 > MAX_ABORTED_FRACTION * total as f64 {
        return Err(Error::TooManyAborted { aborted: report.aborted.len(), total });
    }
    Ok(report)
}
