//! Passive FMCW reception at the RSU array.
//!
//! Two receivers are modelled. The reference receiver mixes each echo with
//! the transmitted chirp and sees constant beat tones. The simplified
//! receiver has no access to the waveform and mixes with a free-running tone
//! at `f_r + Δf` with a per-chirp phase `ε`; its samples carry a common,
//! time-varying phase that cancels in the spatial covariance.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cis_cycles, hermitize, CMatrix};
use crate::scenario::PathSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChirpConfig {
    /// Chirp start frequency `f_r`, Hz.
    pub start_hz: f64,
    /// Swept bandwidth `B_r`, Hz.
    pub bandwidth_hz: f64,
    /// Chirp duration `T_p`, seconds.
    pub chirp_s: f64,
    /// Samples per chirp `I`.
    pub samples: usize,
    /// Sampling interval `T_r`; zero means `T_p / I`.
    pub sample_interval_s: f64,
    pub n_chirps: usize,
    /// Transmit power `P_r`, watts.
    pub tx_power_w: f64,
    /// Upper bound of the clock offset `Δf`, Hz.
    pub max_clock_offset_hz: f64,
    /// Complex white noise power per sample.
    pub noise_power: f64,
}

impl Default for ChirpConfig {
    fn default() -> Self {
        ChirpConfig {
            start_hz: 76e9,
            bandwidth_hz: 1e9,
            chirp_s: 500e-6,
            samples: 1024,
            sample_interval_s: 0.0,
            n_chirps: 128,
            tx_power_w: 1.0,
            max_clock_offset_hz: 3e6,
            noise_power: 0.0,
        }
    }
}

impl ChirpConfig {
    /// Chirp rate `β = B_r / T_p`.
    pub fn chirp_rate(&self) -> f64 {
        self.bandwidth_hz / self.chirp_s
    }

    pub fn sample_interval(&self) -> f64 {
        if self.sample_interval_s > 0.0 {
            self.sample_interval_s
        } else {
            self.chirp_s / self.samples as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.start_hz, self.bandwidth_hz, self.chirp_s, self.tx_power_w];
        if pos.iter().any(|v| !(*v > 0.0)) || self.samples == 0 || self.n_chirps == 0 {
            return Err(Error::InvalidConfig("radar: frequencies, durations, power and counts must be positive".into()));
        }
        if !(self.max_clock_offset_hz >= 0.0) || !(self.noise_power >= 0.0) || !(self.sample_interval_s >= 0.0) {
            return Err(Error::InvalidConfig("radar: offsets and noise must be non-negative".into()));
        }
        if self.samples as f64 * self.sample_interval() > self.chirp_s * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig("radar: I * T_r exceeds the chirp duration".into()));
        }
        Ok(())
    }
}

/// One echo: a radar/reflector pair seen at the RSU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterTarget {
    pub alpha: Complex64,
    /// Propagation delay to the reference element, seconds.
    pub delay: f64,
    /// Arrival angle at the RSU array, radians from broadside.
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverKind {
    Reference,
    Simplified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarReturn {
    /// One `N_r x I` sample matrix per chirp.
    pub chirps: Vec<CMatrix>,
    pub kind: ReceiverKind,
    pub noise_power: f64,
}

/// Clock offset (fixed per run) and mixer phases (one per chirp) of the
/// simplified receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct MixerOffsets {
    pub freq_offset: f64,
    pub phases: Vec<f64>,
}

impl MixerOffsets {
    pub fn none(n_chirps: usize) -> Self {
        MixerOffsets { freq_offset: 0.0, phases: vec![0.0; n_chirps] }
    }

    pub fn draw<R: Rng + ?Sized>(cfg: &ChirpConfig, rng: &mut R) -> Self {
        let freq_offset = rng.random::<f64>() * cfg.max_clock_offset_hz;
        let phases = (0..cfg.n_chirps).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        MixerOffsets { freq_offset, phases }
    }
}

/// Extra delay of element `n` (1-based) of a half-wavelength ULA at `f_r`.
pub fn element_delay(angle: f64, n: usize, start_hz: f64) -> f64 {
    angle.sin() * (n as f64 - 1.0) / (2.0 * start_hz)
}

/// Multiplicative stretch of `sin θ` seen by an FMCW angle estimate.
pub fn bias_gamma(start_hz: f64, bandwidth_hz: f64) -> f64 {
    1.0 + bandwidth_hz / (2.0 * start_hz)
}

fn check_window(cfg: &ChirpConfig, targets: &[EmitterTarget], n_r: usize) -> Result<()> {
    for t in targets {
        let worst = t.delay + element_delay(t.angle, n_r, cfg.start_hz).abs();
        if !(t.delay >= 0.0) || worst >= cfg.chirp_s {
            return Err(Error::ChirpWindow { delay: worst, chirp: cfg.chirp_s });
        }
    }
    Ok(())
}

fn add_noise<R: Rng + ?Sized>(y: &mut CMatrix, power: f64, rng: &mut R) {
    if power <= 0.0 {
        return;
    }
    let s = (power / 2.0).sqrt();
    for z in y.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *z += Complex64::new(re * s, im * s);
    }
}

/// Cycles of the per-target phase that depend on the element and sample
/// index: `f_r τ_n - β τ_n² / 2 + β τ_n i T_r`.
#[inline]
fn echo_cycles(cfg: &ChirpConfig, tau_n: f64, i: usize) -> f64 {
    let beta = cfg.chirp_rate();
    cfg.start_hz * tau_n - beta * tau_n * tau_n / 2.0 + beta * tau_n * i as f64 * cfg.sample_interval()
}

/// Noiseless reference-receiver samples of one chirp.
fn reference_samples(cfg: &ChirpConfig, targets: &[EmitterTarget], n_r: usize) -> CMatrix {
    let amp = cfg.tx_power_w.sqrt();
    let mut y = CMatrix::zeros(n_r, cfg.samples);
    for t in targets {
        for n in 1..=n_r {
            let tau_n = t.delay + element_delay(t.angle, n, cfg.start_hz);
            for i in 1..=cfg.samples {
                y[(n - 1, i - 1)] += t.alpha * amp * cis_cycles(echo_cycles(cfg, tau_n, i));
            }
        }
    }
    y
}

/// `[Y]_{n,i} = √P_r α exp(j2π(f_r τ_n − β τ_n²/2 + β τ_n i T_r))`, summed over
/// targets, plus complex white noise, for every chirp.
pub fn reference_rx<R: Rng + ?Sized>(
    cfg: &ChirpConfig,
    targets: &[EmitterTarget],
    n_r: usize,
    rng: &mut R,
) -> Result<RadarReturn> {
    cfg.validate()?;
    check_window(cfg, targets, n_r)?;
    let clean = reference_samples(cfg, targets, n_r);
    let chirps = (0..cfg.n_chirps)
        .map(|_| {
            let mut y = clean.clone();
            add_noise(&mut y, cfg.noise_power, rng);
            y
        })
        .collect();
    Ok(RadarReturn { chirps, kind: ReceiverKind::Reference, noise_power: cfg.noise_power })
}

/// Samples after mixing with `exp(j(2π(f_r + Δf)t + ε))`:
/// `√P_r α exp(j2π(f_r τ_n + Δf i T_r − β τ_n²/2 − β i² T_r²/2 + β τ_n i T_r + ε))`.
/// Every sample is evaluated in full, per chirp.
pub fn simplified_rx<R: Rng + ?Sized>(
    cfg: &ChirpConfig,
    targets: &[EmitterTarget],
    n_r: usize,
    offsets: &MixerOffsets,
    rng: &mut R,
) -> Result<RadarReturn> {
    cfg.validate()?;
    check_window(cfg, targets, n_r)?;
    check_offsets(cfg, offsets)?;
    let amp = cfg.tx_power_w.sqrt();
    let beta = cfg.chirp_rate();
    let t_r = cfg.sample_interval();
    let mut chirps = Vec::with_capacity(cfg.n_chirps);
    for &eps in &offsets.phases {
        let mut y = CMatrix::zeros(n_r, cfg.samples);
        for t in targets {
            for n in 1..=n_r {
                let tau_n = t.delay + element_delay(t.angle, n, cfg.start_hz);
                for i in 1..=cfg.samples {
                    let ti = i as f64 * t_r;
                    let cycles = cfg.start_hz * tau_n + offsets.freq_offset * ti - beta * tau_n * tau_n / 2.0
                        - beta * ti * ti / 2.0
                        + beta * tau_n * ti
                        + eps / std::f64::consts::TAU;
                    y[(n - 1, i - 1)] += t.alpha * amp * cis_cycles(cycles);
                }
            }
        }
        add_noise(&mut y, cfg.noise_power, rng);
        chirps.push(y);
    }
    Ok(RadarReturn { chirps, kind: ReceiverKind::Simplified, noise_power: cfg.noise_power })
}

fn check_offsets(cfg: &ChirpConfig, offsets: &MixerOffsets) -> Result<()> {
    if offsets.phases.len() != cfg.n_chirps {
        return Err(Error::Contract(format!(
            "{} mixer phases for {} chirps",
            offsets.phases.len(),
            cfg.n_chirps
        )));
    }
    if !(0.0..=cfg.max_clock_offset_hz).contains(&offsets.freq_offset) {
        return Err(Error::Contract(format!("clock offset {} outside [0, f_max]", offsets.freq_offset)));
    }
    if offsets.phases.iter().any(|e| !(0.0..std::f64::consts::TAU).contains(e)) {
        return Err(Error::Contract("mixer phase outside [0, 2π)".into()));
    }
    Ok(())
}

/// Per-chirp sample covariance `Y Y* / I`, averaged over chirps.
pub fn radar_covariance(ret: &RadarReturn) -> Result<CovarianceMatrix> {
    let first = ret.chirps.first().ok_or_else(|| Error::Contract("radar return has no chirps".into()))?;
    let (n_r, samples) = first.shape();
    let mut acc = CMatrix::zeros(n_r, n_r);
    for y in &ret.chirps {
        acc.gemm(Complex64::new(1.0, 0.0), y, &y.adjoint(), Complex64::new(1.0, 0.0));
    }
    acc /= Complex64::new((samples * ret.chirps.len()) as f64, 0.0);
    hermitize(&mut acc);
    Ok(CovarianceMatrix::new(acc, ret.noise_power)?.with_flags(true, false))
}

/// Same estimate as `radar_covariance(simplified_rx(..))` or
/// `radar_covariance(reference_rx(..))` without materialising every chirp.
///
/// The target-dependent part of the samples is identical across chirps, so
/// it is evaluated once; the simplified receiver's common factor
/// `exp(j2π(Δf i T_r − β i² T_r²/2) + jε)` is then applied per chirp.
pub fn streamed_covariance<R: Rng + ?Sized>(
    cfg: &ChirpConfig,
    targets: &[EmitterTarget],
    n_r: usize,
    kind: ReceiverKind,
    offsets: &MixerOffsets,
    rng: &mut R,
) -> Result<CovarianceMatrix> {
    cfg.validate()?;
    check_window(cfg, targets, n_r)?;
    if kind == ReceiverKind::Simplified {
        check_offsets(cfg, offsets)?;
    }
    let clean = reference_samples(cfg, targets, n_r);
    let beta = cfg.chirp_rate();
    let t_r = cfg.sample_interval();
    let common: Vec<Complex64> = (1..=cfg.samples)
        .map(|i| {
            let ti = i as f64 * t_r;
            cis_cycles(offsets.freq_offset * ti - beta * ti * ti / 2.0)
        })
        .collect();
    let mut acc = CMatrix::zeros(n_r, n_r);
    let mut y = CMatrix::zeros(n_r, cfg.samples);
    for c in 0..cfg.n_chirps {
        y.copy_from(&clean);
        if kind == ReceiverKind::Simplified {
            let e = Complex64::from_polar(1.0, offsets.phases[c]);
            for (i, col) in y.column_iter_mut().enumerate() {
                let f = common[i] * e;
                for z in col {
                    *z *= f;
                }
            }
        }
        add_noise(&mut y, cfg.noise_power, rng);
        acc.gemm(Complex64::new(1.0, 0.0), &y, &y.adjoint(), Complex64::new(1.0, 0.0));
    }
    acc /= Complex64::new((cfg.samples * cfg.n_chirps) as f64, 0.0);
    hermitize(&mut acc);
    Ok(CovarianceMatrix::new(acc, cfg.noise_power)?.with_flags(true, false))
}

/// Each ray of each radar's path set becomes one echo.
pub fn targets_from_paths(paths: &[PathSet]) -> Vec<EmitterTarget> {
    paths
        .iter()
        .flat_map(|p| p.rays())
        .map(|r| EmitterTarget { alpha: r.gain, delay: r.delay, angle: r.rsu_angle })
        .collect()
}

/// Noise power giving the requested per-sample SNR against the incoherent
/// sum of all echoes.
pub fn noise_for_snr(cfg: &ChirpConfig, targets: &[EmitterTarget], snr_db: f64) -> f64 {
    let signal: f64 = targets.iter().map(|t| cfg.tx_power_w * t.alpha.norm_sqr()).sum();
    signal / 10f64.powf(snr_db / 10.0)
}

/// Matrix of `[R]_{q,p}` evaluated term by term from the single-target
/// closed form, for unit `P_r |α|²`.
pub fn single_target_covariance_closed_form(cfg: &ChirpConfig, target: &EmitterTarget, n_r: usize) -> CMatrix {
    let beta = cfg.chirp_rate();
    let t_r = cfg.sample_interval();
    DMatrix::from_fn(n_r, n_r, |q, p| {
        let tq = element_delay(target.angle, q + 1, cfg.start_hz);
        let tp = element_delay(target.angle, p + 1, cfg.start_hz);
        let d = tq - tp;
        let mut s = Complex64::new(0.0, 0.0);
        for i in 1..=cfg.samples {
            s += cis_cycles(
                cfg.start_hz * d - beta / 2.0 * (2.0 * target.delay + tq + tp) * d + beta * i as f64 * t_r * d,
            );
        }
        s / cfg.samples as f64
    })
}
