//! Modeling toolkit for registers of spectrally distinguishable solid-state
//! emitters sharing one diffraction-limited spot.
//!
//! The crate covers four pipelines:
//!
//! * [`crosstalk`]: probability that a resonant readout laser aimed at one
//!   emitter projects the spin of an off-resonant neighbour, plus the
//!   calibration and safe-detuning inversions of that expression.
//! * [`spin`]: density-matrix simulation of Ramsey and Rabi sequences with
//!   the laser-induced projection channel, for a single qubit or a cluster.
//! * [`fitting`]: Levenberg-Marquardt fits of PLE spectra (sum of
//!   Lorentzians) and resonant-scan images (Gaussian PSF).
//! * [`ensemble`] and [`yield_mc`]: kernel density models of the
//!   inhomogeneous ZPL distribution and Monte Carlo register-yield estimates.

pub mod crosstalk;
pub mod ensemble;
pub mod error;
pub mod fitting;
pub mod rng;
pub mod spin;
pub mod units;
pub mod yield_mc;

pub use error::{Error, Result};
