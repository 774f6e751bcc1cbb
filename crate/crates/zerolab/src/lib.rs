//! Numerical laboratory for zero-count statistics of stationary Gaussian
//! processes.
//!
//! The crate is organized around a pipeline:
//!
//! * [`spectral`] — symmetric spectral measures, their covariance functions,
//!   analytic continuations and summability diagnostics;
//! * [`sampler`] — finite spectral synthesis of process paths, strip fields,
//!   lattice averaging and the m-dependent split of discrete densities;
//! * [`zeros`] — sign-change scans, winding-number disk counts and Jensen
//!   sandwich estimates;
//! * [`gaussalg`] — Gaussian linear algebra: joint covariances on the strip,
//!   Schur conditioning, diagonal-dominance bounds, permanents and
//!   fractional moments;
//! * [`experiments`] — Monte Carlo studies of zero-count concentration with
//!   deterministic, reproducible persistence.

pub mod error;
pub mod experiments;
pub mod gaussalg;
pub mod quad;
pub mod sampler;
pub mod special;
pub mod spectral;
pub mod zeros;

pub use error::{Error, Result};
