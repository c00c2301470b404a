use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::crosstalk::CrosstalkBreakdown;
use crate::units::phase_mhz_ns;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Qubit in the {|m_s=0⟩, |m_s=1⟩} subspace.
///
/// Besides the density matrix the state keeps a running total of population
/// that decayed into m_s = −1. That population is booked into |0⟩, which is
/// how it shows up in fluorescence; `leaked` only records how much of it
/// there is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    rho: Matrix2<Complex64>,
    leaked: f64,
}

impl QubitState {
    /// |0⟩⟨0|
    pub fn ground() -> Self {
        Self { rho: Matrix2::new(ONE, ZERO, ZERO, ZERO), leaked: 0.0 }
    }

    /// |1⟩⟨1|
    pub fn excited() -> Self {
        Self { rho: Matrix2::new(ZERO, ZERO, ZERO, ONE), leaked: 0.0 }
    }

    /// (|0⟩ + e^{−iθ}|1⟩)/√2
    pub fn equal_superposition(theta: f64) -> Self {
        let c = Complex64::from_polar(0.5, theta);
        Self { rho: Matrix2::new(Complex64::new(0.5, 0.0), c, c.conj(), Complex64::new(0.5, 0.0)), leaked: 0.0 }
    }

    pub fn from_density(rho: Matrix2<Complex64>) -> Result<Self> {
        let s = Self { rho, leaked: 0.0 };
        s.check(1e-12)?;
        Ok(s)
    }

    pub fn rho(&self) -> &Matrix2<Complex64> {
        &self.rho
    }

    pub fn population_0(&self) -> f64 {
        self.rho[(0, 0)].re
    }

    pub fn population_1(&self) -> f64 {
        self.rho[(1, 1)].re
    }

    /// ⟨0|ρ|1⟩
    pub fn coherence(&self) -> Complex64 {
        self.rho[(0, 1)]
    }

    /// Cumulative population that decayed into m_s = −1.
    pub fn leaked(&self) -> f64 {
        self.leaked
    }

    /// Check Hermiticity, unit trace and positivity within `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        let r = &self.rho;
        let herm = (r - r.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > tol {
            return Err(Error::domain(format!("density matrix not Hermitian (deviation {herm:e})")));
        }
        let tr = r.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::domain(format!("density matrix trace is {tr}")));
        }
        // 2x2 Hermitian: eigenvalues (t ± sqrt((a−d)² + 4|b|²))/2
        let (a, d) = (r[(0, 0)].re, r[(1, 1)].re);
        let disc = ((a - d).powi(2) + 4.0 * r[(0, 1)].norm_sqr()).sqrt();
        let min_eig = 0.5 * (a + d - disc);
        if min_eig < -tol {
            return Err(Error::domain(format!("density matrix has eigenvalue {min_eig:e}")));
        }
        Ok(())
    }

    /// ρ → UρU† with U = exp(−i·angle/2·σ_axis).
    pub fn apply_rotation(&self, axis: Axis, angle: f64) -> Self {
        let (c, s) = ((0.5 * angle).cos(), (0.5 * angle).sin());
        let cc = Complex64::new(c, 0.0);
        let u = match axis {
            Axis::X => Matrix2::new(cc, Complex64::new(0.0, -s), Complex64::new(0.0, -s), cc),
            Axis::Y => Matrix2::new(cc, Complex64::new(-s, 0.0), Complex64::new(s, 0.0), cc),
            Axis::Z => Matrix2::new(Complex64::new(c, -s), ZERO, ZERO, Complex64::new(c, s)),
        };
        let rho = u * self.rho * u.adjoint();
        Self { rho: hermitize(rho), leaked: self.leaked }
    }

    /// Free evolution at microwave detuning `detuning_mhz` for `tau_ns`,
    /// with an optional Gaussian dephasing envelope exp(−(τ/T₂*)²).
    pub fn free_precession(&self, detuning_mhz: f64, tau_ns: f64, t2_star_ns: Option<f64>) -> Self {
        let envelope = match t2_star_ns {
            Some(t2) if t2 > 0.0 => (-(tau_ns / t2).powi(2)).exp(),
            _ => 1.0,
        };
        self.phase_and_scale(phase_mhz_ns(detuning_mhz, tau_ns), envelope)
    }

    /// Multiply the coherence by `scale·e^{iφ}`.
    pub(crate) fn phase_and_scale(&self, phase: f64, scale: f64) -> Self {
        let mut rho = self.rho;
        let c = rho[(0, 1)] * Complex64::from_polar(scale, phase);
        rho[(0, 1)] = c;
        rho[(1, 0)] = c.conj();
        Self { rho, leaked: self.leaked }
    }

    /// Laser-induced projection: ρ → (1−Γ)ρ + Σ_j p_j |j⟩⟨j|.
    ///
    /// Decays into m_s = −1 are added to |0⟩ and to the leaked total.
    pub fn apply_crosstalk_channel(&self, breakdown: &CrosstalkBreakdown) -> Self {
        let gamma = breakdown.total;
        let [p_minus, p_zero, p_plus] = breakdown.landing_probabilities();
        let keep = 1.0 - gamma;
        let mut rho = self.rho.map(|z| z * keep);
        rho[(0, 0)] += Complex64::new(p_zero + p_minus, 0.0);
        rho[(1, 1)] += Complex64::new(p_plus, 0.0);
        Self { rho, leaked: (self.leaked * keep + p_minus).min(1.0) }
    }
}

fn hermitize(rho: Matrix2<Complex64>) -> Matrix2<Complex64> {
    let mut out = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    out[(0, 0)].im = 0.0;
    out[(1, 1)].im = 0.0;
    out
}

/// State-dependent fluorescence F = bright·p₀ + dark·p₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub bright: f64,
    pub dark: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self { bright: 1.0, dark: 0.7 }
    }
}

impl ReadoutModel {
    pub fn fluorescence(&self, state: &QubitState) -> f64 {
        self.bright * state.population_0() + self.dark * state.population_1()
    }
}

/// C = (F₃π/₂ − Fπ/₂) / (F₃π/₂ + Fπ/₂); zero when both vanish.
pub fn contrast(f_pi2: f64, f_3pi2: f64) -> f64 {
    let sum = f_3pi2 + f_pi2;
    if sum == 0.0 {
        0.0
    } else {
        (f_3pi2 - f_pi2) / sum
    }
}
