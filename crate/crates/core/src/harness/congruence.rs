//! Radar/comm spectrum congruence with and without the bias correction.
//!
//! The radar is placed on the strongest comm array of the ego vehicle and
//! sees exactly the comm path geometry; there is no receiver noise, so the
//! only differences left are the FMCW effects.

use rayon::prelude::*;

use crate::channel::{build_taps, tap_covariance, ArrayGeometry};
use crate::correction::correct_covariance_with;
use crate::error::{Error, Result};
use crate::radar::{bias_gamma, streamed_covariance, targets_from_paths, MixerOffsets};
use crate::rng::{derive_seed, rng_from};
use crate::scenario::{generate_drop, mount_points, rsu_mount, select_ego, synthesize_all, Band, MountKind, PathSet};
use crate::spectra::{compute_aps, compute_aps_clamped, rpe, similarity};

use super::config::ExperimentConfig;
use super::experiment::{drop_seed, MAX_ABORTED_FRACTION, TAG_COMM, TAG_EGO, TAG_RADAR_RX};

#[derive(Debug, Clone, PartialEq)]
pub struct CongruenceRow {
    pub drop_id: usize,
    pub n: usize,
    pub l: usize,
    pub s_raw: f64,
    pub s_corrected: f64,
    pub rpe_raw: f64,
    pub rpe_corrected: f64,
    pub los: bool,
    pub seed: u64,
}

fn strongest_array(paths: Vec<PathSet>) -> Result<PathSet> {
    paths
        .into_iter()
        .filter(|p| !p.is_empty())
        .max_by(|a, b| a.total_power().total_cmp(&b.total_power()))
        .ok_or_else(|| Error::UndefinedMetric("every comm array is blocked".into()))
}

pub fn congruence_drop(cfg: &ExperimentConfig, drop_id: usize) -> Result<Vec<CongruenceRow>> {
    let seed = drop_seed(cfg.run.master_seed, drop_id);
    let mut drop = generate_drop(&cfg.scenario, seed)?;
    drop.ego_index =
        Some(select_ego(&cfg.scenario, &drop, cfg.run.fov_deg.to_radians(), derive_seed(seed, TAG_EGO, 0))?);
    let ego = drop.ego().expect("ego just set").clone();
    let rsu = rsu_mount(&cfg.scenario, 0.0);
    let mounts = mount_points(&ego, MountKind::CommArray);
    let paths = strongest_array(synthesize_all(&drop, &cfg.environment, &rsu, &mounts, Band::Comm, derive_seed(seed, TAG_COMM, 0)))?;
    let sync = paths.min_delay().unwrap_or(0.0);
    let targets = targets_from_paths(std::slice::from_ref(&paths));

    let mut chirp = cfg.radar.chirp();
    chirp.n_chirps = 1;
    chirp.noise_power = 0.0;
    let gamma = bias_gamma(chirp.start_hz, chirp.bandwidth_hz);
    let vehicle = ArrayGeometry::half_wavelength(cfg.congruence.n_v, cfg.comm.carrier_ghz * 1e9);

    let mut rows = Vec::new();
    for &n in &cfg.metric.n {
        let rsu_geom = ArrayGeometry::half_wavelength(n, cfg.comm.carrier_ghz * 1e9);
        let taps = build_taps(&paths.advanced_by(sync), &vehicle, &rsu_geom, &cfg.comm.tap_params())?;
        let comm = tap_covariance(&taps)?;
        let mut rng = rng_from(derive_seed(seed, TAG_RADAR_RX, n as u64));
        let offsets = MixerOffsets::draw(&chirp, &mut rng);
        let raw = streamed_covariance(&chirp, &targets, n, cfg.radar.receiver.into(), &offsets, &mut rng)?;
        let corrected = correct_covariance_with(&raw, 0.0, gamma, cfg.correction.solver)?.covariance;
        let d_comm = compute_aps(&comm, n)?;
        let d_raw = compute_aps_clamped(&raw, n)?;
        let d_corr = compute_aps_clamped(&corrected, n)?;
        for &l in cfg.metric.l.iter().filter(|&&l| l <= n) {
            rows.push(CongruenceRow {
                drop_id,
                n,
                l,
                s_raw: similarity(&d_raw, &d_comm, l)?,
                s_corrected: similarity(&d_corr, &d_comm, l)?,
                rpe_raw: rpe(&raw, &comm, l)?,
                rpe_corrected: rpe(&corrected, &comm, l)?,
                los: paths.los,
                seed,
            });
        }
    }
    Ok(rows)
}

/// Congruence rows for `congruence.n_drops` drops, ordered by drop.
pub fn run_congruence(cfg: &ExperimentConfig) -> Result<Vec<CongruenceRow>> {
    cfg.validate()?;
    let total = cfg.congruence.n_drops;
    let results: Vec<(usize, Result<Vec<CongruenceRow>>)> =
        (0..total).into_par_iter().map(|id| (id, congruence_drop(cfg, id))).collect();
    let mut rows = Vec::new();
    let mut aborted = 0;
    for (id, res) in results {
        match res {
            Ok(r) => rows.extend(r),
            Err(e) => {
                log::warn!("congruence drop {id} aborted: {e}");
                aborted += 1;
            }
        }
    }
    if aborted as f64 > MAX_ABORTED_FRACTION * total as f64 {
        return Err(Error::TooManyAborted { aborted, total });
    }
    Ok(rows)
}

/// Mean of a column over the rows with the given `n` and `l`.
pub fn mean_by(rows: &[CongruenceRow], n: usize, l: usize, f: impl Fn(&CongruenceRow) -> f64) -> Option<f64> {
    let v: Vec<f64> = rows.iter().filter(|r| r.n == n && r.l == l).map(f).collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}
