//! Hermitian spatial covariance container shared by the channel, radar and
//! correction stages.

use crate::error::{Error, Result};
use crate::linalg::{frobenius, hermitian_defect, min_eigenvalue, toeplitz_defect, trace_re, CMatrix};

/// Relative Hermitian tolerance accepted at construction.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// `min eig >= -PSD_TOL * trace` counts as positive semi-definite.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    matrix: CMatrix,
    /// Per-element white-noise power known to sit on the diagonal.
    pub noise_floor: f64,
    pub psd: bool,
    pub toeplitz: bool,
}

impl CovarianceMatrix {
    /// Wrap a matrix after checking that it is square and Hermitian.
    /// Flags start cleared; use [`CovarianceMatrix::with_flags`] or
    /// [`CovarianceMatrix::refresh_flags`] to set them.
    pub fn new(matrix: CMatrix, noise_floor: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Contract(format!(
                "covariance must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("covariance has non-finite entries".into()));
        }
        let scale = frobenius(&matrix).max(f64::MIN_POSITIVE);
        let defect = hermitian_defect(&matrix);
        if defect > HERMITIAN_TOL * scale {
            return Err(Error::Contract(format!(
                "covariance is not Hermitian (defect {defect:e}, norm {scale:e})"
            )));
        }
        Ok(CovarianceMatrix { matrix, noise_floor, psd: false, toeplitz: false })
    }

    pub fn with_flags(mut self, psd: bool, toeplitz: bool) -> Self {
        self.psd = psd;
        self.toeplitz = toeplitz;
        self
    }

    /// Recompute both flags from the entries (costs one eigen-decomposition).
    pub fn refresh_flags(&mut self) {
        let scale = frobenius(&self.matrix).max(f64::MIN_POSITIVE);
        self.toeplitz = toeplitz_defect(&self.matrix) <= 1e-12 * scale;
        self.psd = min_eigenvalue(&self.matrix) >= -PSD_TOL * self.trace().abs().max(f64::MIN_POSITIVE);
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.matrix)
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    pub fn scaled(&self, c: f64) -> Self {
        CovarianceMatrix {
            matrix: &self.matrix * num_complex::Complex64::new(c, 0.0),
            noise_floor: self.noise_floor * c,
            psd: self.psd && c >= 0.0,
            toeplitz: self.toeplitz,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = Complex64::new(0.0, 1.0);
        assert!(matches!(CovarianceMatrix::new(m, 0.0), Err(Error::Contract(_))));
    }

    #[test]
    fn rejects_non_square() {
        assert!(CovarianceMatrix::new(CMatrix::zeros(2, 3), 0.0).is_err());
    }

    #[test]
    fn flags_refresh() {
        let mut c = CovarianceMatrix::new(CMatrix::identity(3, 3), 0.0).unwrap();
        assert!(!c.psd && !c.toeplitz);
        c.refresh_flags();
        assert!(c.psd && c.toeplitz);
        let mut neg = CovarianceMatrix::new(-CMatrix::identity(3, 3), 0.0).unwrap();
        neg.refresh_flags();
        assert!(!neg.psd);
    }
}
