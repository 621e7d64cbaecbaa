//! Covariance-level correction of the FMCW angle stretch.
//!
//! The raw radar covariance is cleaned of its noise floor, projected onto the
//! Toeplitz Hermitian PSD cone, and its first column is resampled at lags
//! `n / γ` before being expanded back into a Toeplitz matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::linalg::{frobenius, hermitian_defect, CMatrix, CVector, HermitianEigen};

pub const PROJECTION_TOL: f64 = 1e-10;
pub const PROJECTION_MAX_ITER: usize = 10_000;

/// First column of a Hermitian Toeplitz matrix, indexed by lag.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceVector {
    r: CVector,
}

impl CovarianceVector {
    pub fn new(r: CVector) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::Contract("empty covariance vector".into()));
        }
        let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        if r[0].im.abs() > 1e-12 * scale || r[0].re < -1e-12 * scale {
            return Err(Error::Contract(format!("lag-0 entry {} must be real and non-negative", r[0])));
        }
        let mut r = r;
        r[0] = Complex64::new(r[0].re.max(0.0), 0.0);
        Ok(CovarianceVector { r })
    }

    pub fn first_column(cov: &CovarianceMatrix) -> Result<Self> {
        Self::new(cov.matrix().column(0).into_owned())
    }

    pub fn as_vector(&self) -> &CVector {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Iteration used to reach the Toeplitz-PSD projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionSolver {
    /// Dykstra's alternating projections between the Toeplitz subspace and
    /// the PSD cone.
    #[default]
    Dykstra,
    /// Projected gradient on the dual with Nesterov momentum and gradient
    /// restarts. Same fixed point, far fewer eigen-decompositions on large
    /// low-rank inputs.
    AcceleratedDual,
}

/// Outcome of the alternating projections.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub covariance: CovarianceMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Frobenius distance between the last two iterates, on the unit-norm scale.
    pub residual: f64,
}

/// Nearest Hermitian Toeplitz matrix: each diagonal replaced by its mean.
pub fn project_toeplitz(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let mut r = CVector::zeros(n);
    for lag in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for q in 0..n - lag {
            acc += m[(q + lag, q)] + m[(q, q + lag)].conj();
        }
        r[lag] = acc / (2.0 * (n - lag) as f64);
    }
    r[0] = Complex64::new(r[0].re, 0.0);
    toeplitz_matrix(&r)
}

/// Nearest PSD matrix: negative eigenvalues set to zero.
pub fn project_psd(m: &CMatrix) -> CMatrix {
    let eig = HermitianEigen::new(m);
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda <= 0.0 {
            break;
        }
        let v = eig.vectors.column(k);
        out.ger(Complex64::new(lambda, 0.0), &v, &v.conjugate(), Complex64::new(1.0, 0.0));
    }
    crate::linalg::hermitize(&mut out);
    out
}

fn toeplitz_matrix(r: &CVector) -> CMatrix {
    let n = r.len();
    CMatrix::from_fn(n, n, |q, p| if q >= p { r[q - p] } else { r[p - q].conj() })
}

/// Frobenius-nearest Toeplitz Hermitian PSD matrix to `R − σ² I`, by
/// Dykstra's alternating projections on a unit-norm copy.
pub fn toeplitz_psd_project(r: &CovarianceMatrix, noise_power: f64) -> Result<Projection> {
    project_with(r, noise_power, ProjectionSolver::Dykstra, PROJECTION_TOL, PROJECTION_MAX_ITER)
}

pub fn project_with(
    r: &CovarianceMatrix,
    noise_power: f64,
    solver: ProjectionSolver,
    tol: f64,
    max_iter: usize,
) -> Result<Projection> {
    let n = r.dim();
    let mut a = r.matrix().clone();
    let scale_in = frobenius(&a).max(f64::MIN_POSITIVE);
    if hermitian_defect(&a) > 1e-12 * scale_in {
        return Err(Error::Contract("projection input is not Hermitian".into()));
    }
    for i in 0..n {
        a[(i, i)] -= Complex64::new(noise_power, 0.0);
    }
    let scale = frobenius(&a);
    if scale == 0.0 {
        let covariance = CovarianceMatrix::new(a, 0.0)?.with_flags(true, true);
        return Ok(Projection { covariance, iterations: 0, converged: true, residual: 0.0 });
    }
    a /= Complex64::new(scale, 0.0);

    let (mut x, iterations, residual) = match solver {
        ProjectionSolver::Dykstra => dykstra(a, tol, max_iter),
        ProjectionSolver::AcceleratedDual => accelerated_dual(&a, tol, max_iter),
    };
    let converged = residual <= tol;
    if !converged {
        log::warn!("Toeplitz-PSD projection stopped after {iterations} iterations, residual {residual:e}");
    }
    // The Toeplitz iterate can sit just outside the cone when the stopping
    // rule fires; loading the diagonal keeps it Toeplitz and makes it PSD.
    let lambda_min = HermitianEigen::new(&x).min_value();
    if lambda_min < 0.0 {
        for i in 0..n {
            x[(i, i)] -= Complex64::new(lambda_min, 0.0);
        }
    }
    x *= Complex64::new(scale, 0.0);
    let covariance = CovarianceMatrix::new(x, 0.0)?.with_flags(true, true);
    Ok(Projection { covariance, iterations, converged, residual })
}

fn dykstra(a: CMatrix, tol: f64, max_iter: usize) -> (CMatrix, usize, f64) {
    let n = a.nrows();
    let mut x = a;
    let mut p = CMatrix::zeros(n, n);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let xp = &x + &p;
        let y = project_psd(&xp);
        p = xp - &y;
        let next = project_toeplitz(&y);
        residual = frobenius(&(&next - &x));
        x = next;
        if residual <= tol {
            break;
        }
    }
    (x, iterations, residual)
}

/// Minimises `½‖P_T(A + Z)‖²` over PSD `Z`; the primal iterate is
/// `X = P_T(A + Z)`.
fn accelerated_dual(a: &CMatrix, tol: f64, max_iter: usize) -> (CMatrix, usize, f64) {
    let n = a.nrows();
    let mut z = CMatrix::zeros(n, n);
    let mut w = z.clone();
    let mut t = 1.0_f64;
    let mut x = project_toeplitz(a);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let grad = project_toeplitz(&(a + &w));
        let z_next = project_psd(&(&w - &grad));
        let step = &z_next - &z;
        let uphill: f64 = grad.iter().zip(step.iter()).map(|(g, d)| (g.conj() * d).re).sum();
        let momentum = if uphill > 0.0 {
            t = 1.0;
            0.0
        } else {
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let m = (t - 1.0) / t_next;
            t = t_next;
            m
        };
        w = &z_next + step * Complex64::new(momentum, 0.0);
        z = z_next;
        let next = project_toeplitz(&(a + &z));
        residual = frobenius(&(&next - &x));
        x = next;
        if residual <= tol {
            break;
        }
    }
    (x, iterations, residual)
}

/// Output starts at `φ[0]`; each step is moved into `(−π, π]` by whole turns.
pub fn unwrap_phase(phi: &[f64]) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    let mut out = Vec::with_capacity(phi.len());
    for (k, &v) in phi.iter().enumerate() {
        if k == 0 {
            out.push(v);
            continue;
        }
        let d = v - phi[k - 1];
        let step = d - tau * ((d - std::f64::consts::PI) / tau).ceil();
        out.push(out[k - 1] + step);
    }
    out
}

/// Natural cubic spline through `(k, y[k])`, `k = 0..len`.
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(y: &[f64]) -> Self {
        let n = y.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // interior equations m[k-1] + 4 m[k] + m[k+1] = 6 (y[k-1] - 2 y[k] + y[k+1])
            let k = n - 2;
            let mut diag = vec![4.0; k];
            let mut rhs: Vec<f64> = (1..n - 1).map(|i| 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1])).collect();
            for i in 1..k {
                let w = 1.0 / diag[i - 1];
                diag[i] -= w;
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - m[i + 2]) / diag[i];
            }
        }
        NaturalSpline { y: y.to_vec(), m }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        if n == 1 {
            return self.y[0];
        }
        let i = (x.floor().max(0.0) as usize).min(n - 2);
        let t = x - i as f64;
        let s = 1.0 - t;
        let (y0, y1, m0, m1) = (self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
        s * y0 + t * y1 + ((s * s * s - s) * m0 + (t * t * t - t) * m1) / 6.0
    }
}

/// Covariance vector sampled at lags `n / γ`, magnitude and unwrapped phase
/// interpolated separately.
pub fn resample_cov_vector(r: &CovarianceVector, gamma: f64) -> Result<CovarianceVector> {
    if !(gamma >= 1.0) {
        return Err(Error::Extrapolation(gamma));
    }
    let v = r.as_vector();
    let mag: Vec<f64> = v.iter().map(|z| z.norm()).collect();
    let phase = unwrap_phase(&v.iter().map(|z| z.arg()).collect::<Vec<_>>());
    let mag_s = NaturalSpline::new(&mag);
    let phase_s = NaturalSpline::new(&phase);
    let out = CVector::from_fn(v.len(), |n, _| {
        let x = n as f64 / gamma;
        Complex64::from_polar(mag_s.eval(x).max(0.0), phase_s.eval(x))
    });
    let mut out = out;
    out[0] = Complex64::new(mag_s.eval(0.0).max(0.0), 0.0);
    CovarianceVector::new(out)
}

pub fn toeplitz_complete(r: &CovarianceVector) -> CovarianceMatrix {
    let m = toeplitz_matrix(r.as_vector());
    CovarianceMatrix::new(m, 0.0).expect("Toeplitz expansion is Hermitian").with_flags(false, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub covariance: CovarianceMatrix,
    pub projection: Projection,
}

/// Project, resample the first column at `n / γ`, and expand.
pub fn correct_covariance(r_raw: &CovarianceMatrix, noise_power: f64, gamma: f64) -> Result<CovarianceMatrix> {
    Ok(correct_covariance_report(r_raw, noise_power, gamma)?.covariance)
}

pub fn correct_covariance_report(r_raw: &CovarianceMatrix, noise_power: f64, gamma: f64) -> Result<Correction> {
    correct_covariance_with(r_raw, noise_power, gamma, ProjectionSolver::Dykstra)
}

pub fn correct_covariance_with(
    r_raw: &CovarianceMatrix,
    noise_power: f64,
    gamma: f64,
    solver: ProjectionSolver,
) -> Result<Correction> {
    let projection = project_with(r_raw, noise_power, solver, PROJECTION_TOL, PROJECTION_MAX_ITER)?;
    let first = CovarianceVector::first_column(&projection.covariance)?;
    let covariance = toeplitz_complete(&resample_cov_vector(&first, gamma)?);
    Ok(Correction { covariance, projection })
}
