//! Radar-assisted beam alignment at a road-side unit.
//!
//! The RSU passively listens to the FMCW radars mounted on passing vehicles,
//! forms a spatial covariance from the echoes, corrects it towards the
//! communication band and uses it to shortlist beams for training.

pub mod beamtrain;
pub mod channel;
pub mod correction;
pub mod covariance;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod radar;
pub mod rng;
pub mod scenario;
pub mod spectra;

pub use covariance::CovarianceMatrix;
pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
