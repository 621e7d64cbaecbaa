//! Angular power spectra and congruence metrics between covariances.

use num_complex::Complex64;

use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cis_cycles, CMatrix, CVector, HermitianEigen};

const NEGATIVE_TOL: f64 = 1e-12;

/// `sin` of the beam directions `(2n − G − 1)/G`, `n = 1..G`.
pub fn sin_grid(n_grid: usize) -> Vec<f64> {
    (1..=n_grid).map(|n| (2.0 * n as f64 - n_grid as f64 - 1.0) / n_grid as f64).collect()
}

/// Unit-norm half-wavelength steering vector of length `n` at direction `s = sin θ`.
pub fn steering_column(n: usize, s: f64) -> CVector {
    let scale = 1.0 / (n as f64).sqrt();
    CVector::from_fn(n, |m, _| cis_cycles(s * m as f64 / 2.0) * scale)
}

/// Steering columns for every grid direction, one per column.
pub fn grid_matrix(n: usize, n_grid: usize) -> CMatrix {
    let grid = sin_grid(n_grid);
    let mut f = CMatrix::zeros(n, n_grid);
    for (i, s) in grid.iter().enumerate() {
        f.set_column(i, &steering_column(n, *s));
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub d: Vec<f64>,
    pub sin_grid: Vec<f64>,
}

impl PowerSpectrum {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn peak_index(&self) -> usize {
        top_indices(&self.d, 1)[0]
    }

    pub fn peak_sin(&self) -> f64 {
        self.sin_grid[self.peak_index()]
    }

    pub fn total(&self) -> f64 {
        self.d.iter().sum()
    }
}

/// `f_i* R f_i` for every grid direction, before any clamping.
///
/// The quadratic form only depends on the sums of the diagonals of `R`, so it
/// is evaluated as a short trigonometric sum per direction.
pub fn raw_aps(r: &CMatrix, n_grid: usize) -> Vec<f64> {
    let n = r.nrows();
    // c[n-1+l] = sum over q of R[q, q+l]
    let mut c = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
    for q in 0..n {
        for p in 0..n {
            c[n - 1 + p - q] += r[(q, p)];
        }
    }
    sin_grid(n_grid)
        .iter()
        .map(|s| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, ck) in c.iter().enumerate() {
                let lag = k as f64 - (n as f64 - 1.0);
                acc += ck * cis_cycles(s * lag / 2.0);
            }
            acc.re / n as f64
        })
        .collect()
}

/// `d = diag(F* R F)`; rejects matrices whose spectrum dips below zero by more
/// than round-off.
pub fn compute_aps(r: &CovarianceMatrix, n_grid: usize) -> Result<PowerSpectrum> {
    if n_grid < r.dim() {
        return Err(Error::Contract(format!("grid of {n_grid} beams for {} elements", r.dim())));
    }
    let d = raw_aps(r.matrix(), n_grid);
    let floor = -NEGATIVE_TOL * r.trace().abs().max(f64::MIN_POSITIVE);
    if let Some(bad) = d.iter().find(|v| **v < floor) {
        return Err(Error::Contract(format!("negative spectrum value {bad:e}; matrix is not PSD")));
    }
    Ok(PowerSpectrum { d: d.into_iter().map(|v| v.max(0.0)).collect(), sin_grid: sin_grid(n_grid) })
}

/// Spectrum of a Hermitian matrix that need not be PSD, negative values
/// clamped to zero.
pub fn compute_aps_clamped(r: &CovarianceMatrix, n_grid: usize) -> Result<PowerSpectrum> {
    if n_grid < r.dim() {
        return Err(Error::Contract(format!("grid of {n_grid} beams for {} elements", r.dim())));
    }
    let d = raw_aps(r.matrix(), n_grid);
    Ok(PowerSpectrum { d: d.into_iter().map(|v| v.max(0.0)).collect(), sin_grid: sin_grid(n_grid) })
}

/// Indices of the `l` largest values, ties to the lower index.
pub fn top_indices(d: &[f64], l: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
    idx.truncate(l);
    idx
}

fn check_l(l: usize, n: usize) -> Result<()> {
    if l == 0 || l > n {
        return Err(Error::Contract(format!("L = {l} outside 1..={n}")));
    }
    Ok(())
}

/// Fraction of the power of `d2` in its own top-`L` directions that is
/// captured by the top-`L` directions of `d1`.
pub fn similarity(d1: &PowerSpectrum, d2: &PowerSpectrum, l: usize) -> Result<f64> {
    if d1.sin_grid != d2.sin_grid {
        return Err(Error::Contract("spectra on different grids".into()));
    }
    check_l(l, d1.len())?;
    let den: f64 = top_indices(&d2.d, l).iter().map(|&i| d2.d[i]).sum();
    if !(den > 0.0) {
        return Err(Error::UndefinedMetric("second spectrum is zero".into()));
    }
    let num: f64 = top_indices(&d1.d, l).iter().map(|&i| d2.d[i]).sum();
    Ok(num / den)
}

fn quad_trace(r: &CMatrix, f: &CMatrix) -> f64 {
    (f.adjoint() * r * f).trace().re
}

fn gather(n: usize, n_grid: usize, idx: &[usize]) -> CMatrix {
    let grid = sin_grid(n_grid);
    let mut f = CMatrix::zeros(n, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        f.set_column(c, &steering_column(n, grid[i]));
    }
    f
}

/// `tr(F₁* R₂ F₁) / tr(F₂* R₂ F₂)` with `F₁`, `F₂` the grid beams of the `L`
/// strongest spectrum entries of `R₁`, `R₂`.
pub fn similarity_trace_form(
    r1: &CovarianceMatrix,
    r2: &CovarianceMatrix,
    l: usize,
    n_grid: usize,
) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(Error::Contract("covariances of different size".into()));
    }
    check_l(l, n_grid)?;
    let i1 = top_indices(&compute_aps(r1, n_grid)?.d, l);
    let i2 = top_indices(&compute_aps(r2, n_grid)?.d, l);
    let n = r1.dim();
    let den = quad_trace(r2.matrix(), &gather(n, n_grid, &i2));
    if !(den > 0.0) {
        return Err(Error::UndefinedMetric("second covariance has no power on the grid".into()));
    }
    Ok(quad_trace(r2.matrix(), &gather(n, n_grid, &i1)) / den)
}

/// Relative power efficiency: `tr(U₁* R₂ U₁) / tr(U₂* R₂ U₂)` with `U` the
/// dominant `L`-dimensional eigenspaces.
pub fn rpe(r1: &CovarianceMatrix, r2: &CovarianceMatrix, l: usize) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(Error::Contract("covariances of different size".into()));
    }
    check_l(l, r1.dim())?;
    let u1 = HermitianEigen::new(r1.matrix()).vectors.columns(0, l).into_owned();
    let u2 = HermitianEigen::new(r2.matrix()).vectors.columns(0, l).into_owned();
    let den = quad_trace(r2.matrix(), &u2);
    if !(den > 0.0) {
        return Err(Error::UndefinedMetric("second covariance is zero".into()));
    }
    Ok(quad_trace(r2.matrix(), &u1) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;

    fn cov(m: CMatrix) -> CovarianceMatrix {
        CovarianceMatrix::new(m, 0.0).unwrap()
    }

    fn random_psd(n: usize, rank: usize, seed: u64) -> CMatrix {
        let mut rng = rng_from(seed);
        let a = CMatrix::from_fn(n, rank, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let mut m = &a * a.adjoint();
        crate::linalg::hermitize(&mut m);
        m
    }

    fn ps(d: &[f64]) -> PowerSpectrum {
        PowerSpectrum { d: d.to_vec(), sin_grid: sin_grid(d.len()) }
    }

    #[test]
    fn grid_is_uniform_in_sine() {
        assert_eq!(sin_grid(4), vec![-0.75, -0.25, 0.25, 0.75]);
    }

    #[test]
    fn identity_gives_flat_spectrum() {
        let d = compute_aps(&cov(CMatrix::identity(8, 8)), 32).unwrap().d;
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn matched_beam_peaks_at_n() {
        let n = 16;
        let s = sin_grid(n)[11];
        let a = steering_column(n, s) * Complex64::new((n as f64).sqrt(), 0.0);
        let aps = compute_aps(&cov(&a * a.adjoint()), n).unwrap();
        assert_eq!(aps.peak_index(), 11);
        assert!((aps.d[11] - n as f64).abs() < 1e-11);
    }

    #[test]
    fn aps_matches_quadratic_forms() {
        let r = random_psd(10, 4, 3);
        let d = compute_aps(&cov(r.clone()), 24).unwrap().d;
        let f = grid_matrix(10, 24);
        let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 0..24 {
            let col = f.column(i);
            let direct = (col.adjoint() * &r * col)[(0, 0)].re;
            assert!((d[i] - direct).abs() <= 1e-12 * scale * 10.0, "{} {}", d[i], direct);
        }
    }

    #[test]
    fn negative_spectrum_rejected_strict_only() {
        let a = steering_column(4, 0.25);
        let m = CMatrix::identity(4, 4) * Complex64::new(0.1, 0.0) - &a * a.adjoint();
        assert!(compute_aps(&cov(m.clone()), 4).is_err());
        assert!(compute_aps_clamped(&cov(m), 4).unwrap().d.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn similarity_examples() {
        let a = ps(&[4.0, 3.0, 2.0, 1.0]);
        let b = ps(&[1.0, 2.0, 3.0, 4.0]);
        assert!((similarity(&b, &a, 2).unwrap() - 3.0 / 7.0).abs() < 1e-15);
        assert_eq!(similarity(&a, &a, 2).unwrap(), 1.0);
        assert!((similarity(&b, &a, 4).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(similarity(&a, &ps(&[0.0; 4]), 1), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn similarity_is_asymmetric() {
        let a = ps(&[5.0, 4.0, 0.0, 0.0]);
        let b = ps(&[1.0, 0.0, 9.0, 0.0]);
        assert_ne!(similarity(&a, &b, 1).unwrap(), similarity(&b, &a, 1).unwrap());
    }

    #[test]
    fn ties_go_to_lower_index() {
        assert_eq!(top_indices(&[1.0, 2.0, 2.0, 0.5], 2), vec![1, 2]);
        assert_eq!(top_indices(&[1.0, 1.0, 1.0], 1), vec![0]);
    }

    #[test]
    fn trace_form_matches_spectrum_form() {
        for seed in 0..5 {
            let r1 = cov(random_psd(16, 3, seed));
            let r2 = cov(random_psd(16, 5, seed + 100));
            let a = similarity(&compute_aps(&r1, 16).unwrap(), &compute_aps(&r2, 16).unwrap(), 3).unwrap();
            let b = similarity_trace_form(&r1, &r2, 3, 16).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rpe_identity_and_annihilation() {
        let r = cov(random_psd(8, 8, 9));
        assert!((rpe(&r, &r, 2).unwrap() - 1.0).abs() < 1e-12);
        let e = |k: usize| {
            let mut m = CMatrix::zeros(4, 4);
            m[(k, k)] = Complex64::new(1.0, 0.0);
            m
        };
        assert!(rpe(&cov(e(0)), &cov(e(1)), 1).unwrap().abs() < 1e-15);
    }

    #[test]
    fn rpe_matches_projector_formula() {
        let r1 = random_psd(8, 8, 1);
        let r2 = random_psd(8, 8, 2);
        // tr(U₁* R₂ U₁) = tr(P₁ R₂) with P₁ the projector onto the top-2 eigenspace
        let e1 = HermitianEigen::new(&r1);
        let e2 = HermitianEigen::new(&r2);
        let proj = |e: &HermitianEigen| {
            let u = e.vectors.columns(0, 2);
            &u * u.adjoint()
        };
        let expected = (proj(&e1) * &r2).trace().re / (e2.values[0] + e2.values[1]);
        let got = rpe(&cov(r1), &cov(r2), 2).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }
}
