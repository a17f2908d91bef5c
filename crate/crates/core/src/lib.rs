//! Expected randomized-benchmarking (RB) sequence fidelity under Gaussian
//! time-correlated noise.
//!
//! The sequence fidelity after `N` twirled free-evolution intervals is
//! `P0 = 1/2 + Z/2`, where `Z` is the noise average of the product of
//! per-interval depolarizing factors `(1 + 2 cos θ_n)/3`. For Gaussian noise
//! this average is a spin-one Ising partition sum over `{-1, 0, 1}^N`
//! configurations, coupled through the covariance matrix of the accumulated
//! error phases.
//!
//! The crate provides:
//!
//! - [`noise`]: Gaussian noise models (mean phase, covariance matrix),
//!   including construction from piecewise power spectral densities via the
//!   Wiener-Khinchin filter integral.
//! - [`partition`]: four independent evaluators for `Z` (closed forms,
//!   brute-force Ising sum, high-temperature determinant expansion, Monte
//!   Carlo) plus a Gauss-Hermite quadrature oracle for quasistatic noise.
//! - [`twirl`]: the twirled free-evolution superoperator and its Haar-random
//!   sampling verification.
//! - [`qudit`]: the d-state generalization, with site variables running over
//!   the SU(d) adjoint-representation weights.
//! - [`fitting`]: the exponential-fit pathology study for power-law decay and
//!   the short-sequence linear estimator of the gate error rate.

pub mod error;
pub mod fitting;
pub mod noise;
pub mod partition;
pub mod quad;
pub mod qudit;
pub mod twirl;

pub use error::Error;
pub use fitting::{FitReport, FitScenario, Weighting};
pub use noise::{NoiseDiagnostics, NoiseModel, PsdSpec};
pub use partition::{ExpansionIntermediates, ExpansionOrder, Method, PartitionResult};
pub use qudit::{QuditNoiseModel, WeightSystem};
pub use twirl::TwirledMap;

pub type Result<T> = std::result::Result<T, Error>;
