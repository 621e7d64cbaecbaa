//! Quantized DFT codebooks, the three beam-training strategies and the
//! achievable rate left after training.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::ChannelFreq;
use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cis, CMatrix};
use crate::scenario::{MountPoint, Point};
use crate::spectra::{compute_aps_clamped, sin_grid};

pub const BOLTZMANN: f64 = 1.380649e-23;
pub const REFERENCE_TEMPERATURE: f64 = 290.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    /// One unit-norm beam per column.
    pub beams: CMatrix,
    pub phase_bits: u32,
}

impl Codebook {
    pub fn size(&self) -> usize {
        self.beams.ncols()
    }

    pub fn n_elements(&self) -> usize {
        self.beams.nrows()
    }

    pub fn sin_grid(&self) -> Vec<f64> {
        sin_grid(self.size())
    }
}

/// Steering vectors on the `arcsin((2n − N − 1)/N)` grid with every phase
/// rounded to the nearest of `2^bits` uniform levels.
pub fn build_codebook(n: usize, phase_bits: u32) -> Result<Codebook> {
    if n == 0 || phase_bits == 0 || phase_bits > 30 {
        return Err(Error::InvalidConfig(format!("codebook of size {n} with {phase_bits} phase bits")));
    }
    let levels = 1u64 << phase_bits;
    let step = std::f64::consts::TAU / levels as f64;
    let scale = 1.0 / (n as f64).sqrt();
    let grid = sin_grid(n);
    let beams = CMatrix::from_fn(n, n, |m, col| {
        let phase = (std::f64::consts::PI * grid[col] * m as f64).rem_euclid(std::f64::consts::TAU);
        let q = ((phase / step).round() as u64) % levels;
        cis(q as f64 * step) * scale
    });
    Ok(Codebook { beams, phase_bits })
}

/// Subcarrier-averaged beamformed gains `mean_k |w* H_a[k] f|²` for every
/// vehicle-beam/RSU-beam pair and every vehicle array.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamGainTable {
    /// Per array, `N_V x N_RSU`.
    pub mean_gain: Vec<DMatrix<f64>>,
}

impl BeamGainTable {
    pub fn new(channels: &[ChannelFreq], cb_rsu: &Codebook, cb_veh: &Codebook) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Contract("no vehicle arrays".into()));
        }
        let w_h = cb_veh.beams.adjoint();
        let mut mean_gain = Vec::with_capacity(channels.len());
        for ch in channels {
            check_shapes(ch, cb_rsu, cb_veh)?;
            let mut acc = DMatrix::<f64>::zeros(cb_veh.size(), cb_rsu.size());
            for h in &ch.subcarriers {
                let g = &w_h * (h * &cb_rsu.beams);
                acc.zip_apply(&g, |a, z| *a += z.norm_sqr());
            }
            acc /= ch.n_subcarriers() as f64;
            mean_gain.push(acc);
        }
        Ok(BeamGainTable { mean_gain })
    }

    /// Copy whose entries are what a noisy sounding would report: each pair's
    /// amplitude is observed through additive complex Gaussian noise.
    pub fn measured<R: Rng + ?Sized>(&self, noise_power: f64, rng: &mut R) -> Self {
        let s = (noise_power / 2.0).sqrt();
        let mean_gain = self
            .mean_gain
            .iter()
            .map(|m| {
                m.map(|g| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    (Complex64::new(g.sqrt(), 0.0) + Complex64::new(re * s, im * s)).norm_sqr()
                })
            })
            .collect();
        BeamGainTable { mean_gain }
    }

    pub fn n_arrays(&self) -> usize {
        self.mean_gain.len()
    }
}

fn check_shapes(ch: &ChannelFreq, cb_rsu: &Codebook, cb_veh: &Codebook) -> Result<()> {
    if ch.n_subcarriers() == 0 || ch.rsu_elements() != cb_rsu.n_elements() || ch.vehicle_elements() != cb_veh.n_elements()
    {
        return Err(Error::Contract(format!(
            "channel {}x{} does not fit codebooks {}/{}",
            ch.vehicle_elements(),
            ch.rsu_elements(),
            cb_veh.n_elements(),
            cb_rsu.n_elements()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub rsu_beam: usize,
    /// Chosen combiner per vehicle array.
    pub vehicle_beams: Vec<usize>,
    /// OFDM blocks spent on training.
    pub t_train: usize,
    /// `|w_a* H_a[k] f|²` per array and subcarrier.
    pub gains: Vec<Vec<f64>>,
}

/// Among `candidates`, the RSU beam with the best array-averaged best-pair
/// gain; each array then takes its best combiner for that beam. Candidates
/// are scanned in ascending order so ties go to the lower index.
pub fn select_beams(table: &BeamGainTable, candidates: &[usize]) -> Result<(usize, Vec<usize>)> {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(usize, f64)> = None;
    for &b in &sorted {
        let score = table
            .mean_gain
            .iter()
            .map(|m| m.column(b).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / table.n_arrays() as f64;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((b, score));
        }
    }
    let (rsu_beam, _) = best.ok_or(Error::NoCandidate)?;
    let vehicle_beams = table
        .mean_gain
        .iter()
        .map(|m| {
            let col = m.column(rsu_beam);
            (0..col.len()).fold(0, |acc, v| if col[v] > col[acc] { v } else { acc })
        })
        .collect();
    Ok((rsu_beam, vehicle_beams))
}

/// Per-subcarrier gains of a fixed beam choice.
pub fn beam_gains(
    channels: &[ChannelFreq],
    cb_rsu: &Codebook,
    cb_veh: &Codebook,
    rsu_beam: usize,
    vehicle_beams: &[usize],
) -> Result<Vec<Vec<f64>>> {
    if vehicle_beams.len() != channels.len() {
        return Err(Error::Contract("one combiner per array required".into()));
    }
    let f = cb_rsu.beams.column(rsu_beam);
    channels
        .iter()
        .zip(vehicle_beams)
        .map(|(ch, &v)| {
            check_shapes(ch, cb_rsu, cb_veh)?;
            let w = cb_veh.beams.column(v);
            Ok(ch.subcarriers.iter().map(|h| w.dotc(&(h * f)).norm_sqr()).collect())
        })
        .collect()
}

/// Train the given RSU beams against every vehicle beam.
pub fn train_subset(
    channels: &[ChannelFreq],
    cb_rsu: &Codebook,
    cb_veh: &Codebook,
    table: &BeamGainTable,
    candidates: &[usize],
) -> Result<TrainingOutcome> {
    if candidates.iter().any(|&b| b >= cb_rsu.size()) {
        return Err(Error::Contract("RSU beam index outside the codebook".into()));
    }
    let (rsu_beam, vehicle_beams) = select_beams(table, candidates)?;
    let gains = beam_gains(channels, cb_rsu, cb_veh, rsu_beam, &vehicle_beams)?;
    let mut distinct = candidates.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    Ok(TrainingOutcome { rsu_beam, vehicle_beams, t_train: distinct.len() * cb_veh.size(), gains })
}

/// Every RSU beam against every vehicle beam; all vehicle arrays listen at
/// once so the cost is `N_RSU · N_V` blocks.
pub fn exhaustive_search(channels: &[ChannelFreq], cb_rsu: &Codebook, cb_veh: &Codebook) -> Result<TrainingOutcome> {
    let table = BeamGainTable::new(channels, cb_rsu, cb_veh)?;
    exhaustive_from_table(channels, cb_rsu, cb_veh, &table)
}

pub fn exhaustive_from_table(
    channels: &[ChannelFreq],
    cb_rsu: &Codebook,
    cb_veh: &Codebook,
    table: &BeamGainTable,
) -> Result<TrainingOutcome> {
    let all: Vec<usize> = (0..cb_rsu.size()).collect();
    train_subset(channels, cb_rsu, cb_veh, table, &all)
}

/// 1-based beam numbers `n` with
/// `sin(φ̂ − Δφ) + 1 ≤ 2n/N ≤ sin(φ̂ + Δφ) + 1 + 2/N`.
pub fn location_subset(phi_hat: f64, delta_phi: f64, n_rsu: usize) -> Vec<usize> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let lo = (phi_hat - delta_phi).clamp(-half_pi, half_pi).sin() + 1.0;
    let hi = (phi_hat + delta_phi).clamp(-half_pi, half_pi).sin() + 1.0 + 2.0 / n_rsu as f64;
    (1..=n_rsu)
        .filter(|&n| {
            let x = 2.0 * n as f64 / n_rsu as f64;
            lo <= x && x <= hi
        })
        .collect()
}

/// Uniform draw from a disc of the given radius in the horizontal plane.
pub fn disc_offset<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random::<f64>() * std::f64::consts::TAU;
    Point::new(r * a.cos(), r * a.sin(), 0.0)
}

/// Direction estimate and half-width from a reported vehicle position.
pub fn location_cone(rsu: &MountPoint, reported: &Point, error_radius: f64, vehicle_length: f64) -> (f64, f64) {
    let d = reported - rsu.position;
    let range = d.norm();
    if range < 1e-9 {
        return (0.0, std::f64::consts::FRAC_PI_2);
    }
    let phi_hat = rsu.ula_angle(&(d / range));
    let delta = ((error_radius + vehicle_length / 2.0) / range).atan().min(std::f64::consts::FRAC_PI_2);
    (phi_hat, delta)
}

pub struct LocationInput<'a> {
    pub rsu: &'a MountPoint,
    pub vehicle_position: Point,
    pub vehicle_length: f64,
    pub error_radius: f64,
}

/// Train the RSU beams inside the angular window implied by a noisy
/// position report.
pub fn location_assisted<R: Rng + ?Sized>(
    channels: &[ChannelFreq],
    cb_rsu: &Codebook,
    cb_veh: &Codebook,
    table: &BeamGainTable,
    input: &LocationInput<'_>,
    rng: &mut R,
) -> Result<TrainingOutcome> {
    let reported = input.vehicle_position + disc_offset(input.error_radius, rng);
    let (phi_hat, delta) = location_cone(input.rsu, &reported, input.error_radius, input.vehicle_length);
    let subset: Vec<usize> = location_subset(phi_hat, delta, cb_rsu.size()).iter().map(|n| n - 1).collect();
    train_subset(channels, cb_rsu, cb_veh, table, &subset)
}

/// Grid index of the radar spectrum peak on the RSU codebook grid.
pub fn radar_peak(radar: &CovarianceMatrix, n_rsu: usize) -> Result<usize> {
    Ok(compute_aps_clamped(radar, n_rsu)?.peak_index())
}

/// The `m` grid beams closest to `center`, nearer first, lower index first
/// on equal distance.
pub fn beams_around(center: usize, m: usize, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by_key(|&i| (i.abs_diff(center), i));
    idx.truncate(m);
    idx
}

/// Train the `m` RSU beams nearest the radar spectrum peak.
pub fn radar_assisted(
    channels: &[ChannelFreq],
    cb_rsu: &Codebook,
    cb_veh: &Codebook,
    table: &BeamGainTable,
    radar: &CovarianceMatrix,
    m: usize,
) -> Result<TrainingOutcome> {
    if m == 0 {
        return Err(Error::Contract("radar-assisted training needs at least one beam".into()));
    }
    let peak = radar_peak(radar, cb_rsu.size())?;
    train_subset(channels, cb_rsu, cb_veh, table, &beams_around(peak, m, cb_rsu.size()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    pub bandwidth_hz: f64,
    pub n_subcarriers: usize,
    pub tx_power_w: f64,
    pub noise_power: f64,
    /// Coherence time in OFDM blocks; `f64::INFINITY` for a static channel.
    pub t_coh: f64,
}

/// Thermal noise in one subcarrier of width `B_c / K`.
pub fn subcarrier_noise(bandwidth_hz: f64, n_subcarriers: usize, noise_figure_db: f64) -> f64 {
    BOLTZMANN * REFERENCE_TEMPERATURE * bandwidth_hz / n_subcarriers as f64 * 10f64.powf(noise_figure_db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub bps: f64,
    /// Training consumed more than the coherence time.
    pub overhead_exceeded: bool,
}

/// `(B_c/K)(1 − T_train/T_coh) Σ_k log₂(1 + P/(σ² K) Σ_a |w_a* H_a[k] f|²)`.
pub fn achievable_rate(outcome: &TrainingOutcome, p: &RateParams) -> Rate {
    let t_train = outcome.t_train as f64;
    if t_train > p.t_coh {
        log::warn!("training ({t_train} blocks) exceeds the coherence time ({})", p.t_coh);
        return Rate { bps: 0.0, overhead_exceeded: true };
    }
    let k = p.n_subcarriers as f64;
    let snr = p.tx_power_w / (p.noise_power * k);
    let n_k = outcome.gains.first().map_or(0, |g| g.len());
    let sum: f64 = (0..n_k)
        .map(|i| {
            let g: f64 = outcome.gains.iter().map(|a| a[i]).sum();
            (1.0 + snr * g).log2()
        })
        .sum();
    let fraction = if p.t_coh.is_infinite() { 1.0 } else { 1.0 - t_train / p.t_coh };
    Rate { bps: p.bandwidth_hz / k * fraction * sum, overhead_exceeded: false }
}
