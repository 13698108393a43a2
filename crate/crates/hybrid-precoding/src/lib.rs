//! Hybrid precoder design for wideband MIMO-OFDM transmitters built from
//! distributed phased subarrays.
//!
//! The transmitter splits its precoder into a shared analog phase-shifter
//! matrix (one RF chain per subarray, block-diagonal structure) and one
//! digital baseband matrix per OFDM subcarrier. This crate covers the whole
//! design chain:
//!
//! * [`channel`] — geometric cluster/ray channel realizations per subarray
//!   and subcarrier, plus an imperfect-CSI corruption model;
//! * [`target`] — per-subcarrier optimal fully-digital precoders from the
//!   channel SVD and water-filling power allocation;
//! * [`admm`] — the sphere-constrained least-squares baseband solve via
//!   scaled ADMM in the real domain, with a closed-form oracle;
//! * [`rf`] — closed-form analog phase updates and B-bit phase quantization;
//! * [`altmin`] — the outer alternating loop producing a [`altmin::HybridPrecoder`];
//! * [`evaluation`] — spectral-efficiency computation and seeded Monte Carlo
//!   experiment sweeps;
//! * [`config`] — the flat key-value experiment configuration format.

pub mod admm;
pub mod altmin;
pub mod channel;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod plot;
pub mod rf;
pub mod seeding;
pub mod target;

pub use error::{Error, Result};

use nalgebra::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

/// Dense complex matrix used throughout (column-major).
pub type CMat = nalgebra::DMatrix<Complex<f64>>;
/// Dense complex vector.
pub type CVec = nalgebra::DVector<Complex<f64>>;
/// Dense real vector.
pub type RVec = nalgebra::DVector<f64>;
/// Dense real matrix.
pub type RMat = nalgebra::DMatrix<f64>;

/// One draw from the unit-variance circularly-symmetric complex Gaussian.
pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex<f64> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. unit-variance circular Gaussian entries.
pub fn random_complex_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| standard_complex(rng))
}
