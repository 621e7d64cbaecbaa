//! Wideband geometric MIMO channel: array responses, raised-cosine tap
//! synthesis, the tap-to-subcarrier transform and the subcarrier-averaged
//! RSU spatial covariance.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cis, dump_matrix, hermitize, CMatrix, CVector};
use crate::scenario::PathSet;

/// Uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub n_elements: usize,
    /// Inter-element spacing in wavelengths.
    pub spacing: f64,
    pub carrier_hz: f64,
}

impl ArrayGeometry {
    pub fn half_wavelength(n_elements: usize, carrier_hz: f64) -> Self {
        ArrayGeometry { n_elements, spacing: 0.5, carrier_hz }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_elements == 0 || !(self.spacing > 0.0) || !(self.carrier_hz > 0.0) {
            return Err(Error::InvalidConfig(format!("bad array geometry {self:?}")));
        }
        Ok(())
    }
}

/// Element `n` is `exp(j 2π Δ n sin(angle))`.
pub fn array_response(geom: &ArrayGeometry, angle: f64) -> CVector {
    let step = 2.0 * PI * geom.spacing * angle.sin();
    CVector::from_fn(geom.n_elements, |n, _| cis(step * n as f64))
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Raised-cosine pulse with unit peak.
pub fn pulse(tau: f64, t_c: f64, roll_off: f64) -> f64 {
    let x = tau / t_c;
    if roll_off == 0.0 {
        return sinc(x);
    }
    let denom = 1.0 - (2.0 * roll_off * x).powi(2);
    if denom.abs() < 1e-10 {
        // limit at |tau| = t_c / (2 roll_off)
        return PI / 4.0 * sinc(1.0 / (2.0 * roll_off));
    }
    sinc(x) * (PI * roll_off * x).cos() / denom
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapParams {
    pub n_taps: usize,
    /// Signalling interval in seconds (1 / bandwidth).
    pub t_c: f64,
    pub roll_off: f64,
}

/// Delay-domain channel `H[d]`, each `N_V x N_RSU`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTaps {
    pub taps: Vec<CMatrix>,
    pub t_c: f64,
    pub roll_off: f64,
}

/// Subcarrier-domain channel `H[k]`, each `N_V x N_RSU`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFreq {
    pub subcarriers: Vec<CMatrix>,
}

impl ChannelFreq {
    pub fn n_subcarriers(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn vehicle_elements(&self) -> usize {
        self.subcarriers.first().map_or(0, |h| h.nrows())
    }

    pub fn rsu_elements(&self) -> usize {
        self.subcarriers.first().map_or(0, |h| h.ncols())
    }

    /// Text dump, one subcarrier block after another.
    pub fn dump(&self) -> String {
        let mut out = format!("{}\n", self.subcarriers.len());
        for h in &self.subcarriers {
            out.push_str(&dump_matrix(h));
        }
        out
    }
}

/// Evaluate the clustered delay-tap model for every tap in the window.
pub fn build_taps(
    paths: &PathSet,
    vehicle: &ArrayGeometry,
    rsu: &ArrayGeometry,
    params: &TapParams,
) -> Result<ChannelTaps> {
    if params.n_taps == 0 || !(params.t_c > 0.0) {
        return Err(Error::InvalidConfig(format!("bad tap parameters {params:?}")));
    }
    let window = params.n_taps as f64 * params.t_c;
    let mut taps = vec![CMatrix::zeros(vehicle.n_elements, rsu.n_elements); params.n_taps];
    for ray in paths.rays() {
        if !(ray.delay >= 0.0) || ray.delay >= window {
            return Err(Error::TapWindow { delay: ray.delay, taps: params.n_taps });
        }
        let a_v = array_response(vehicle, ray.vehicle_angle);
        let a_r = array_response(rsu, ray.rsu_angle);
        let outer = &a_v * a_r.adjoint();
        for (d, tap) in taps.iter_mut().enumerate() {
            let p = pulse(d as f64 * params.t_c - ray.delay, params.t_c, params.roll_off);
            if p != 0.0 {
                tap.zip_apply(&outer, |h, o| *h += ray.gain * p * o);
            }
        }
    }
    Ok(ChannelTaps { taps, t_c: params.t_c, roll_off: params.roll_off })
}

/// `H[k] = Σ_d H[d] exp(-j 2π k d / K)`, evaluated with an FFT per entry.
pub fn taps_to_freq(taps: &ChannelTaps, n_subcarriers: usize) -> Result<ChannelFreq> {
    let d = taps.taps.len();
    if d == 0 || d > n_subcarriers {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= taps ({d}) <= subcarriers ({n_subcarriers})"
        )));
    }
    let (rows, cols) = taps.taps[0].shape();
    let fft = FftPlanner::new().plan_fft_forward(n_subcarriers);
    let mut out = vec![CMatrix::zeros(rows, cols); n_subcarriers];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_subcarriers];
    for r in 0..rows {
        for c in 0..cols {
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for (slot, tap) in buf.iter_mut().zip(&taps.taps) {
                *slot = tap[(r, c)];
            }
            fft.process(&mut buf);
            for (h, z) in out.iter_mut().zip(&buf) {
                h[(r, c)] = *z;
            }
        }
    }
    Ok(ChannelFreq { subcarriers: out })
}

/// Inverse of [`taps_to_freq`] when the tap count equals the subcarrier count.
pub fn freq_to_taps(freq: &ChannelFreq, t_c: f64, roll_off: f64) -> ChannelTaps {
    let k = freq.subcarriers.len();
    let (rows, cols) = freq.subcarriers[0].shape();
    let ifft = FftPlanner::new().plan_fft_inverse(k);
    let mut taps = vec![CMatrix::zeros(rows, cols); k];
    let mut buf = vec![Complex64::new(0.0, 0.0); k];
    let scale = 1.0 / k as f64;
    for r in 0..rows {
        for c in 0..cols {
            for (slot, h) in buf.iter_mut().zip(&freq.subcarriers) {
                *slot = h[(r, c)];
            }
            ifft.process(&mut buf);
            for (t, z) in taps.iter_mut().zip(&buf) {
                t[(r, c)] = z * scale;
            }
        }
    }
    ChannelTaps { taps, t_c, roll_off }
}

/// `(1/K) Σ_k H[k]* H[k] / N_V`.
pub fn comm_covariance(freq: &ChannelFreq) -> Result<CovarianceMatrix> {
    let k = freq.n_subcarriers();
    if k == 0 {
        return Err(Error::Contract("channel has no subcarriers".into()));
    }
    let n_v = freq.vehicle_elements();
    let n = freq.rsu_elements();
    // stack subcarriers so the sum becomes a single Gram product
    let mut stacked = CMatrix::zeros(k * n_v, n);
    for (i, h) in freq.subcarriers.iter().enumerate() {
        stacked.view_mut((i * n_v, 0), (n_v, n)).copy_from(h);
    }
    let mut r = stacked.ad_mul(&stacked) / Complex64::new((k * n_v) as f64, 0.0);
    hermitize(&mut r);
    Ok(CovarianceMatrix::new(r, 0.0)?.with_flags(true, false))
}

/// `Σ_d H[d]* H[d] / N_V`: the same matrix as [`comm_covariance`] of the
/// `K`-point transform (Parseval), without going through the subcarriers.
pub fn tap_covariance(taps: &ChannelTaps) -> Result<CovarianceMatrix> {
    let first = taps.taps.first().ok_or_else(|| Error::Contract("channel has no taps".into()))?;
    let (n_v, n) = first.shape();
    let mut stacked = CMatrix::zeros(taps.taps.len() * n_v, n);
    for (i, h) in taps.taps.iter().enumerate() {
        stacked.view_mut((i * n_v, 0), (n_v, n)).copy_from(h);
    }
    let mut r = stacked.ad_mul(&stacked) / Complex64::new(n_v as f64, 0.0);
    hermitize(&mut r);
    Ok(CovarianceMatrix::new(r, 0.0)?.with_flags(true, false))
}

/// Covariance of a single subcarrier, used to check the averaging identity.
pub fn subcarrier_covariance(h: &CMatrix) -> CMatrix {
    h.ad_mul(h) / Complex64::new(h.nrows() as f64, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use crate::scenario::{Cluster, PathSet, Ray};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_ray(delay: f64, rsu_angle: f64, vehicle_angle: f64, gain: Complex64) -> PathSet {
        PathSet {
            clusters: vec![Cluster {
                delay,
                rsu_angle,
                vehicle_angle,
                rays: vec![Ray { rel_delay: 0.0, rsu_shift: 0.0, vehicle_shift: 0.0, gain }],
            }],
            los: true,
        }
    }

    fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn response_at_broadside_is_all_ones() {
        let g = ArrayGeometry::half_wavelength(8, 73e9);
        let a = array_response(&g, 0.0);
        assert!(a.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn response_endfire_two_elements() {
        let g = ArrayGeometry::half_wavelength(2, 73e9);
        let a = array_response(&g, PI / 2.0);
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn response_matches_direct_formula() {
        let g = ArrayGeometry { n_elements: 64, spacing: 0.5, carrier_hz: 73e9 };
        let angle = 0.7311;
        let a = array_response(&g, angle);
        for n in 0..64 {
            let direct = (Complex64::new(0.0, 2.0 * PI * 0.5 * n as f64 * angle.sin())).exp();
            assert!((a[n] - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn pulse_peak_and_nyquist_zeros() {
        assert_eq!(pulse(0.0, 1e-9, 0.4), 1.0);
        for m in [-3i32, -2, -1, 1, 2, 3, 7] {
            assert!(pulse(m as f64 * 1e-9, 1e-9, 0.4).abs() < 1e-15, "m={m}");
        }
    }

    #[test]
    fn pulse_singular_point_matches_limit() {
        let t_c = 1e-9;
        let beta = 0.4;
        let tau = t_c / (2.0 * beta);
        let expected = PI / 4.0 * sinc(1.0 / (2.0 * beta));
        assert!((pulse(tau, t_c, beta) - expected).abs() < 1e-12);
        // L'Hôpital oracle: approach the singularity numerically
        for eps in [1e-6, -1e-6] {
            let near = pulse(tau * (1.0 + eps), t_c, beta);
            assert!((near - expected).abs() < 1e-5);
        }
    }

    #[test]
    fn on_sample_broadside_ray_fills_one_tap() {
        let g_v = ArrayGeometry::half_wavelength(3, 73e9);
        let g_r = ArrayGeometry::half_wavelength(4, 73e9);
        let alpha = Complex64::new(0.3, -0.2);
        let params = TapParams { n_taps: 8, t_c: 1e-9, roll_off: 0.4 };
        let taps = build_taps(&single_ray(3e-9, 0.0, 0.0, alpha), &g_v, &g_r, &params).unwrap();
        for (d, tap) in taps.taps.iter().enumerate() {
            for z in tap.iter() {
                if d == 3 {
                    assert!((z - alpha).norm() < 1e-15);
                } else {
                    assert!(z.norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn empty_paths_give_zero_taps() {
        let g = ArrayGeometry::half_wavelength(2, 73e9);
        let params = TapParams { n_taps: 4, t_c: 1e-9, roll_off: 0.4 };
        let taps = build_taps(&PathSet::blocked(), &g, &g, &params).unwrap();
        assert!(taps.taps.iter().all(|t| t.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn taps_are_linear_in_rays() {
        let g_v = ArrayGeometry::half_wavelength(4, 73e9);
        let g_r = ArrayGeometry::half_wavelength(6, 73e9);
        let params = TapParams { n_taps: 16, t_c: 1e-9, roll_off: 0.4 };
        let a = single_ray(2.3e-9, 0.2, -0.4, Complex64::new(1.0, 0.5));
        let b = single_ray(7.9e-9, -0.6, 0.1, Complex64::new(-0.2, 0.7));
        let both = PathSet { clusters: [a.clusters.clone(), b.clusters.clone()].concat(), los: true };
        let ta = build_taps(&a, &g_v, &g_r, &params).unwrap();
        let tb = build_taps(&b, &g_v, &g_r, &params).unwrap();
        let tab = build_taps(&both, &g_v, &g_r, &params).unwrap();
        for d in 0..16 {
            assert!(frobenius(&(&ta.taps[d] + &tb.taps[d] - &tab.taps[d])) < 1e-13);
        }
    }

    #[test]
    fn delay_outside_window_is_rejected() {
        let g = ArrayGeometry::half_wavelength(2, 73e9);
        let params = TapParams { n_taps: 4, t_c: 1e-9, roll_off: 0.4 };
        let err = build_taps(&single_ray(4e-9, 0.0, 0.0, Complex64::new(1.0, 0.0)), &g, &g, &params);
        assert!(matches!(err, Err(Error::TapWindow { .. })));
    }

    #[test]
    fn dc_tap_is_flat_across_subcarriers() {
        let a = CMatrix::from_fn(2, 3, |r, c| Complex64::new(r as f64 + 1.0, c as f64));
        let mut taps = vec![CMatrix::zeros(2, 3); 4];
        taps[0] = a.clone();
        let f = taps_to_freq(&ChannelTaps { taps, t_c: 1e-9, roll_off: 0.4 }, 16).unwrap();
        assert!(f.subcarriers.iter().all(|h| frobenius(&(h - &a)) < 1e-12));
    }

    #[test]
    fn unit_delay_tap_follows_shift_theorem() {
        let a = CMatrix::from_fn(2, 2, |r, c| Complex64::new(r as f64 - c as f64, 1.0));
        let mut taps = vec![CMatrix::zeros(2, 2); 3];
        taps[1] = a.clone();
        let k = 12;
        let f = taps_to_freq(&ChannelTaps { taps, t_c: 1e-9, roll_off: 0.4 }, k).unwrap();
        for (i, h) in f.subcarriers.iter().enumerate() {
            let expected = &a * cis(-2.0 * PI * i as f64 / k as f64);
            assert!(frobenius(&(h - expected)) < 1e-12);
        }
    }

    #[test]
    fn fft_matches_direct_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (k, d) = (32, 8);
        let taps: Vec<CMatrix> = (0..d).map(|_| rand_matrix(&mut rng, 3, 5)).collect();
        let f = taps_to_freq(&ChannelTaps { taps: taps.clone(), t_c: 1e-9, roll_off: 0.4 }, k).unwrap();
        for kk in 0..k {
            let mut direct = CMatrix::zeros(3, 5);
            for (dd, t) in taps.iter().enumerate() {
                direct += t * cis(-2.0 * PI * (kk * dd) as f64 / k as f64);
            }
            assert!(frobenius(&(&f.subcarriers[kk] - &direct)) <= 1e-10 * frobenius(&direct));
        }
    }

    #[test]
    fn inverse_transform_recovers_taps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let taps: Vec<CMatrix> = (0..16).map(|_| rand_matrix(&mut rng, 2, 3)).collect();
        let ct = ChannelTaps { taps, t_c: 1e-9, roll_off: 0.4 };
        let back = freq_to_taps(&taps_to_freq(&ct, 16).unwrap(), 1e-9, 0.4);
        for (a, b) in ct.taps.iter().zip(&back.taps) {
            assert!(frobenius(&(a - b)) <= 1e-10 * frobenius(a));
        }
    }

    #[test]
    fn too_many_taps_for_subcarriers() {
        let ct = ChannelTaps { taps: vec![CMatrix::zeros(1, 1); 5], t_c: 1e-9, roll_off: 0.4 };
        assert!(taps_to_freq(&ct, 4).is_err());
    }

    #[test]
    fn rank_one_channel_gives_steering_covariance() {
        let g_v = ArrayGeometry::half_wavelength(4, 73e9);
        let g_r = ArrayGeometry::half_wavelength(6, 73e9);
        let a_v = array_response(&g_v, 0.3);
        let a_r = array_response(&g_r, -0.5);
        let h = &a_v * a_r.adjoint();
        let r = comm_covariance(&ChannelFreq { subcarriers: vec![h] }).unwrap();
        let expected = &a_r * a_r.adjoint();
        assert!(frobenius(&(r.matrix() - expected)) < 1e-12);
    }

    #[test]
    fn zero_channel_zero_covariance() {
        let r = comm_covariance(&ChannelFreq { subcarriers: vec![CMatrix::zeros(2, 3); 4] }).unwrap();
        assert_eq!(frobenius(r.matrix()), 0.0);
    }

    #[test]
    fn covariance_is_psd_and_average_of_subcarriers() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let subcarriers: Vec<CMatrix> = (0..6).map(|_| rand_matrix(&mut rng, 3, 5)).collect();
        let freq = ChannelFreq { subcarriers: subcarriers.clone() };
        let r = comm_covariance(&freq).unwrap();
        assert!(r.min_eigenvalue() >= -1e-9 * r.trace());
        let mut mean = CMatrix::zeros(5, 5);
        for h in &subcarriers {
            mean += subcarrier_covariance(h);
        }
        mean /= Complex64::new(6.0, 0.0);
        assert!(frobenius(&(r.matrix() - mean)) < 1e-13);
    }

    #[test]
    fn tap_domain_covariance_matches_subcarrier_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let taps = ChannelTaps { taps: (0..5).map(|_| rand_matrix(&mut rng, 3, 7)).collect(), t_c: 1e-9, roll_off: 0.4 };
        let from_freq = comm_covariance(&taps_to_freq(&taps, 16).unwrap()).unwrap();
        let from_taps = tap_covariance(&taps).unwrap();
        assert!(frobenius(&(from_freq.matrix() - from_taps.matrix())) <= 1e-12 * from_freq.frobenius());
    }

    #[test]
    fn covariance_ignores_vehicle_side_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let subcarriers: Vec<CMatrix> = (0..4).map(|_| rand_matrix(&mut rng, 4, 6)).collect();
        let q = rand_matrix(&mut rng, 4, 4).qr().q();
        let rotated = ChannelFreq { subcarriers: subcarriers.iter().map(|h| &q * h).collect() };
        let r0 = comm_covariance(&ChannelFreq { subcarriers }).unwrap();
        let r1 = comm_covariance(&rotated).unwrap();
        assert!(frobenius(&(r0.matrix() - r1.matrix())) <= 1e-10 * r0.frobenius());
    }
}
