//! Randomized-Kaczmarz computation of linear massive-MIMO detectors and
//! precoders, without channel statistics.
//!
//! The crate provides:
//!
//! * [`numerics`] — dense complex linear algebra (Gram, Cholesky solve,
//!   Jacobi Hermitian eigensolver, norms);
//! * [`channel`] — seeded correlated Rayleigh channel generation, noisy
//!   channel estimates and uplink observations;
//! * [`kaczmarz`] — the row-action solvers: weighted row sampling, the basic
//!   randomized iteration, the consistent uplink/downlink variants, and the
//!   factorized detector/precoder maps built from parallel unit-input runs;
//! * [`gains`] — per-iteration convergence-gain analytics (average projection
//!   operator, suboptimal/optimal row distributions, closed forms, decay
//!   envelope and tail bound);
//! * [`baselines`] — exact linear transceivers plus the two flawed row-action
//!   variants used as comparison points;
//! * [`rates`] — ergodic spectral-efficiency bounds and the Monte-Carlo
//!   experiment driver.
//!
//! All numerical code is generic over the scalar type via [`scalar::Scalar`]
//! (`f32` or `f64`); the aliases below pin the `f64` instantiation used by
//! the experiment CLI.

pub mod baselines;
pub mod channel;
pub mod gains;
pub mod kaczmarz;
pub mod numerics;
pub mod rates;
pub mod scalar;

use thiserror::Error;

/// `f64` matrix used by the CLI and experiments.
pub type Mat = numerics::ComplexMatrix<f64>;
/// `f64` vector used by the CLI and experiments.
pub type Vec64 = numerics::ComplexVector<f64>;
/// `f64` complex scalar.
pub type C64 = num_complex::Complex<f64>;

/// Any error produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
    #[error(transparent)]
    Kaczmarz(#[from] kaczmarz::KaczmarzError),
    #[error(transparent)]
    Gains(#[from] gains::GainsError),
    #[error(transparent)]
    Baselines(#[from] baselines::BaselineError),
    #[error(transparent)]
    Rates(#[from] rates::RateError),
}
