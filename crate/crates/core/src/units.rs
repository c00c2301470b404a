//! Unit conventions and shared defaults.
//!
//! Optical frequencies and laser detunings cross every public interface in
//! GHz. Inside the crosstalk expression all rates (Rabi frequency, detuning,
//! decay rate) are angular MHz, i.e. rad/µs, and optical pulse durations are
//! µs. Spin sequences use MHz (cyclic) for microwave detunings and ns for
//! times. The GHz to rad/µs factor lives here and nowhere else.

use std::f64::consts::PI;

/// 1 GHz expressed in rad/µs.
pub const GHZ_TO_ANGULAR_MHZ: f64 = 2.0 * PI * 1.0e3;

/// Convert an optical frequency or detuning in GHz to rad/µs.
#[inline]
pub fn ghz_to_angular_mhz(ghz: f64) -> f64 {
    ghz * GHZ_TO_ANGULAR_MHZ
}

#[inline]
pub fn angular_mhz_to_ghz(angular: f64) -> f64 {
    angular / GHZ_TO_ANGULAR_MHZ
}

/// Phase (rad) accumulated at a cyclic frequency in MHz over a time in ns.
#[inline]
pub fn phase_mhz_ns(freq_mhz: f64, time_ns: f64) -> f64 {
    2.0 * PI * freq_mhz * time_ns * 1.0e-3
}

/// Excited-state decay rate used when a preset needs a number: 1/(12 ns), in µs⁻¹.
///
/// This is a typical NV excited-state lifetime, not a measured value; every
/// preset lets the caller override it.
pub const DEFAULT_DECAY_RATE: f64 = 1.0 / 0.012;

/// Assumed multi-shot readout pulse length in µs. The true pulse generator
/// setting is not known; outputs that use it list it as an assumption.
pub const DEFAULT_MSR_DURATION_US: f64 = 0.6;

/// Detuning (GHz) at which multi-shot readout crosstalk equals
/// [`MSR_ANCHOR_CROSSTALK`]; used to calibrate the MSR Rabi frequency.
pub const MSR_ANCHOR_DETUNING_GHZ: f64 = 16.0;
pub const MSR_ANCHOR_CROSSTALK: f64 = 0.01;

/// Single-shot readout pulse length (µs); SSR drives with Ω = γ.
pub const SSR_DURATION_US: f64 = 3.7;

/// Precession time (ns) of the Ramsey fringe maximum used for crosstalk mapping.
pub const FRINGE_MAXIMUM_TAU_NS: f64 = 386.0;

/// Default Gaussian dephasing time T₂* (ns) for Ramsey envelopes.
pub const DEFAULT_T2_STAR_NS: f64 = 2000.0;

/// Approximate NV⁻ zero-phonon line (GHz), used to center surrogate distributions.
pub const NV_ZPL_GHZ: f64 = 470_400.0;
