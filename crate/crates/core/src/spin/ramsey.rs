use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::state::{contrast, Axis, QubitState, ReadoutModel};
use crate::crosstalk::CrosstalkBreakdown;
use crate::units::DEFAULT_T2_STAR_NS;
use crate::{Error, Result};

/// Spin parameters of a Ramsey experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyConfig {
    /// Microwave detuning, MHz.
    pub detuning_mhz: f64,
    /// Gaussian dephasing time; `None` disables the envelope.
    pub t2_star_ns: Option<f64>,
    #[serde(default)]
    pub readout: ReadoutModel,
    /// Constant Z phase (rad) applied with the laser channel. Off by default;
    /// the AC-Stark shift is coherent and assumed compensated.
    #[serde(default)]
    pub ac_stark_phase: f64,
}

impl RamseyConfig {
    pub fn new(detuning_mhz: f64) -> Self {
        Self {
            detuning_mhz,
            t2_star_ns: Some(DEFAULT_T2_STAR_NS),
            readout: ReadoutModel::default(),
            ac_stark_phase: 0.0,
        }
    }
}

/// Contrast curve of a sequence swept over τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub tau_ns: Vec<f64>,
    pub contrast: Vec<f64>,
    /// Fluorescence with the final gate at its nominal angle (π/2 for Ramsey).
    pub f_pi2: Vec<f64>,
    /// Fluorescence with the final gate advanced by π (3π/2 for Ramsey).
    pub f_3pi2: Vec<f64>,
    /// |1⟩ population at readout for the nominal final gate.
    pub population_1: Vec<f64>,
}

impl SequenceResult {
    fn with_capacity(n: usize) -> Self {
        Self {
            tau_ns: Vec::with_capacity(n),
            contrast: Vec::with_capacity(n),
            f_pi2: Vec::with_capacity(n),
            f_3pi2: Vec::with_capacity(n),
            population_1: Vec::with_capacity(n),
        }
    }

    pub(crate) fn push(&mut self, tau: f64, f_pi2: f64, f_3pi2: f64, population_1: f64) {
        self.tau_ns.push(tau);
        self.f_pi2.push(f_pi2);
        self.f_3pi2.push(f_3pi2);
        self.contrast.push(contrast(f_pi2, f_3pi2));
        self.population_1.push(population_1);
    }

    pub fn len(&self) -> usize {
        self.tau_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_ns.is_empty()
    }

    /// CSV with columns `tau_ns,contrast,f_pi2,f_3pi2`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau_ns", "contrast", "f_pi2", "f_3pi2"])?;
        for i in 0..self.len() {
            w.write_record(&[
                self.tau_ns[i].to_string(),
                self.contrast[i].to_string(),
                self.f_pi2[i].to_string(),
                self.f_3pi2[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn validate_tau_grid(tau_grid: &[f64]) -> Result<()> {
    if tau_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::domain("τ values must be finite and >= 0"));
    }
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("τ grid must be strictly ascending"));
    }
    Ok(())
}

/// State after π/2 – precess(τ) – final rotation, with the laser channel
/// applied once at the middle of the precession window.
pub fn ramsey_state(
    config: &RamseyConfig,
    tau_ns: f64,
    breakdown: Option<&CrosstalkBreakdown>,
    final_angle: f64,
) -> QubitState {
    let half = 0.5 * tau_ns;
    let mut s =
        QubitState::ground().apply_rotation(Axis::X, FRAC_PI_2).free_precession(config.detuning_mhz, half, None);
    if let Some(b) = breakdown {
        s = s.apply_crosstalk_channel(b);
        if config.ac_stark_phase != 0.0 {
            s = s.phase_and_scale(config.ac_stark_phase, 1.0);
        }
    }
    s = s.free_precession(config.detuning_mhz, tau_ns - half, None);
    // Gaussian dephasing over the whole window; it does not factor over halves.
    s = s.free_precession(0.0, tau_ns, config.t2_star_ns);
    s.apply_rotation(Axis::X, final_angle)
}

/// Ramsey fringes with an optional laser-induced projection during the
/// precession window, read out with both a π/2 and a 3π/2 final pulse.
pub fn ramsey_with_crosstalk(
    config: &RamseyConfig,
    tau_grid: &[f64],
    breakdown: Option<&CrosstalkBreakdown>,
) -> Result<SequenceResult> {
    validate_tau_grid(tau_grid)?;
    let mut out = SequenceResult::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let s1 = ramsey_state(config, tau, breakdown, FRAC_PI_2);
        let s3 = ramsey_state(config, tau, breakdown, FRAC_PI_2 + PI);
        out.push(tau, config.readout.fluorescence(&s1), config.readout.fluorescence(&s3), s1.population_1());
    }
    Ok(out)
}

/// Least-squares scale factor s minimizing Σ (C − s·C_ref)²: the fringe
/// amplitude of `result` relative to `reference`.
pub fn fringe_amplitude_ratio(result: &SequenceResult, reference: &SequenceResult) -> Result<f64> {
    if result.len() != reference.len() || result.tau_ns != reference.tau_ns {
        return Err(Error::domain("fringe curves must share the same τ grid"));
    }
    let num: f64 = result.contrast.iter().zip(&reference.contrast).map(|(c, r)| c * r).sum();
    let den: f64 = reference.contrast.iter().map(|r| r * r).sum();
    if den == 0.0 {
        return Err(Error::Degenerate("reference fringe has zero amplitude".into()));
    }
    Ok(num / den)
}

/// Crosstalk probability implied by a contrast measured at a fringe
/// maximum: 1 − C/C_ref, clamped to [0, 1].
pub fn estimate_crosstalk_from_contrast(contrast_at_tau: f64, reference_contrast_at_tau: f64) -> Result<f64> {
    if reference_contrast_at_tau == 0.0 {
        return Err(Error::Degenerate("reference contrast is zero".into()));
    }
    Ok((1.0 - contrast_at_tau / reference_contrast_at_tau).clamp(0.0, 1.0))
}

/// Microwave detuning (MHz) that puts the first Ramsey fringe maximum at `tau_ns`.
pub fn detuning_for_fringe_maximum(tau_ns: f64) -> f64 {
    1.0e3 / tau_ns
}
