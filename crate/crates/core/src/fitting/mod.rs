//! Nonlinear least-squares fits of excitation spectra and scan images.

pub mod lm;
mod lorentzian;
mod psf;

pub use lorentzian::*;
pub use psf::*;
