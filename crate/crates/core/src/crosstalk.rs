//! Off-resonant excitation and decay of spectator emitters.
//!
//! A laser at ω_L applied for a time T to read out one emitter also drives
//! every other emitter's optical transitions off resonance. For a transition
//! with Rabi frequency Ω, detuning Δ and decay rate γ into a given ground
//! level, the probability of at least one excitation-and-decay event is
//!
//! ```text
//! Γ = 1 − exp(−γ Ω² T / (2 (Ω² + Δ²)))
//! ```
//!
//! Ω and Δ belong to the ground(i) ↔ excited(k) transition, γ to the k → j
//! decay branch. Rates are angular MHz (rad/µs), T is in µs, and optical
//! frequencies are GHz at the interface (see [`crate::units`]).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::units::{angular_mhz_to_ghz, ghz_to_angular_mhz};
use crate::{Error, Result};

/// Ground spin projection m_s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(into = "i8")]
pub enum GroundSpin {
    Minus,
    Zero,
    Plus,
}

impl GroundSpin {
    pub const ALL: [GroundSpin; 3] = [GroundSpin::Minus, GroundSpin::Zero, GroundSpin::Plus];

    pub fn value(self) -> i8 {
        match self {
            GroundSpin::Minus => -1,
            GroundSpin::Zero => 0,
            GroundSpin::Plus => 1,
        }
    }
}

impl TryFrom<i8> for GroundSpin {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(GroundSpin::Minus),
            0 => Ok(GroundSpin::Zero),
            1 => Ok(GroundSpin::Plus),
            other => Err(format!("ground spin label must be -1, 0 or 1, got {other}")),
        }
    }
}

// Accepts integers and their string forms; map keys arrive as strings
// when the enclosing struct is flattened.
impl<'de> Deserialize<'de> for GroundSpin {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = GroundSpin;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("ground spin -1, 0 or 1")
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<GroundSpin, E> {
                i8::try_from(v).map_err(E::custom).and_then(|v| GroundSpin::try_from(v).map_err(E::custom))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<GroundSpin, E> {
                self.visit_i64(i64::try_from(v).map_err(E::custom)?)
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<GroundSpin, E> {
                let n: i64 = v.trim().parse().map_err(E::custom)?;
                self.visit_i64(n)
            }
        }
        d.deserialize_any(V)
    }
}

impl From<GroundSpin> for i8 {
    fn from(s: GroundSpin) -> i8 {
        s.value()
    }
}

impl fmt::Display for GroundSpin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Excited-state orbital label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExcitedState {
    E1,
    E2,
    Ex,
    Ey,
    A1,
    A2,
}

impl fmt::Display for ExcitedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One optical transition of an emitter together with the decay branches
/// of its excited state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalTransition {
    #[serde(rename = "ground")]
    pub ground_initial: GroundSpin,
    pub excited: ExcitedState,
    /// GHz.
    #[serde(rename = "frequency_ghz")]
    pub frequency: f64,
    /// Optical Rabi frequency, rad/µs.
    #[serde(rename = "rabi_mhz")]
    pub rabi: f64,
    /// Decay rate (rad/µs) from the excited state into each ground level.
    #[serde(rename = "branching_mhz")]
    pub branching: BTreeMap<GroundSpin, f64>,
}

impl OpticalTransition {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(Error::domain(format!("transition frequency must be positive, got {}", self.frequency)));
        }
        if !(self.rabi.is_finite() && self.rabi >= 0.0) {
            return Err(Error::domain(format!("Rabi frequency must be >= 0, got {}", self.rabi)));
        }
        if self.branching.values().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::domain("branching rates must be finite and >= 0"));
        }
        if !self.branching.values().any(|g| *g > 0.0) {
            return Err(Error::domain("at least one branching rate must be positive"));
        }
        Ok(())
    }

    pub fn total_decay_rate(&self) -> f64 {
        self.branching.values().sum()
    }
}

/// Readout laser parameters seen by a spectator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutPulse {
    pub laser_frequency_ghz: f64,
    pub duration_us: f64,
}

impl ReadoutPulse {
    pub fn new(laser_frequency_ghz: f64, duration_us: f64) -> Result<Self> {
        if !(duration_us.is_finite() && duration_us >= 0.0) {
            return Err(Error::domain(format!("pulse duration must be >= 0, got {duration_us}")));
        }
        if !laser_frequency_ghz.is_finite() {
            return Err(Error::domain("laser frequency must be finite"));
        }
        Ok(Self { laser_frequency_ghz, duration_us })
    }
}

/// Optical model of one emitter: its label and transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterOpticalModel {
    pub label: String,
    pub transitions: Vec<OpticalTransition>,
}

impl EmitterOpticalModel {
    pub fn new(label: impl Into<String>, transitions: Vec<OpticalTransition>) -> Result<Self> {
        let model = Self { label: label.into(), transitions };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.transitions.is_empty() {
            return Err(Error::domain(format!("emitter `{}` has no transitions", self.label)));
        }
        let mut seen = BTreeSet::new();
        for t in &self.transitions {
            t.validate()?;
            if !seen.insert((t.ground_initial, t.excited)) {
                return Err(Error::domain(format!(
                    "emitter `{}` lists transition {} -> {} twice",
                    self.label, t.ground_initial, t.excited
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Frequency a resonant readout of this emitter is tuned to: its
    /// spin-conserving m_s = 0 → E_x line if present, else the first m_s = 0
    /// line, else the first listed transition.
    pub fn readout_frequency(&self) -> f64 {
        let zero = || self.transitions.iter().filter(|t| t.ground_initial == GroundSpin::Zero);
        zero()
            .find(|t| t.excited == ExcitedState::Ex)
            .or_else(|| zero().next())
            .unwrap_or(&self.transitions[0])
            .frequency
    }

    /// Single m_s = 0 → E_x transition decaying back into m_s = 0 only.
    pub fn single_line(label: impl Into<String>, frequency_ghz: f64, rabi: f64, gamma: f64) -> Result<Self> {
        Self::new(
            label,
            vec![OpticalTransition {
                ground_initial: GroundSpin::Zero,
                excited: ExcitedState::Ex,
                frequency: frequency_ghz,
                rabi,
                branching: BTreeMap::from([(GroundSpin::Zero, gamma)]),
            }],
        )
    }
}

/// Identifies one ground(i) → excited(k) → ground(j) pathway.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathKey {
    pub initial: GroundSpin,
    pub excited: ExcitedState,
    #[serde(rename = "final")]
    pub final_: GroundSpin,
}

impl fmt::Display for PathKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.initial, self.excited, self.final_)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathCrosstalk {
    #[serde(flatten)]
    pub key: PathKey,
    pub probability: f64,
}

/// Per-pathway projection probabilities and their total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkBreakdown {
    /// Sorted by pathway key.
    pub per_transition: Vec<PathCrosstalk>,
    /// Unclamped sum of `per_transition`.
    pub raw_sum: f64,
    /// `raw_sum` clamped to [0, 1].
    pub total: f64,
    pub dominant: Option<PathKey>,
}

impl CrosstalkBreakdown {
    pub fn from_paths(mut paths: Vec<PathCrosstalk>) -> Self {
        paths.sort_by_key(|p| p.key);
        let raw_sum: f64 = paths.iter().map(|p| p.probability).sum();
        let mut dominant: Option<&PathCrosstalk> = None;
        for p in &paths {
            if dominant.is_none_or(|d| p.probability > d.probability) {
                dominant = Some(p);
            }
        }
        let dominant = dominant.map(|p| p.key);
        Self { per_transition: paths, raw_sum, total: raw_sum.clamp(0.0, 1.0), dominant }
    }

    /// A breakdown with a single pathway carrying probability `gamma`.
    pub fn single(key: PathKey, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::domain(format!("crosstalk probability must lie in [0, 1], got {gamma}")));
        }
        Ok(Self::from_paths(vec![PathCrosstalk { key, probability: gamma }]))
    }

    /// The common case: m_s = 0 → E_x → m_s = 0.
    pub fn spin_conserving(gamma: f64) -> Result<Self> {
        Self::single(PathKey { initial: GroundSpin::Zero, excited: ExcitedState::Ex, final_: GroundSpin::Zero }, gamma)
    }

    pub fn none() -> Self {
        Self::from_paths(Vec::new())
    }

    /// Probability of landing in each ground level, indexed like
    /// [`GroundSpin::ALL`], rescaled so the entries sum to `total`.
    pub fn landing_probabilities(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for p in &self.per_transition {
            let idx = match p.key.final_ {
                GroundSpin::Minus => 0,
                GroundSpin::Zero => 1,
                GroundSpin::Plus => 2,
            };
            out[idx] += p.probability;
        }
        if self.raw_sum > 0.0 {
            let scale = self.total / self.raw_sum;
            out.iter_mut().for_each(|v| *v *= scale);
        }
        out
    }
}

fn check_non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and >= 0, got {v}")))
    }
}

/// Probability of an off-resonant excitation followed by decay through one
/// branch. `omega`, `delta` and `gamma` in rad/µs, `duration` in µs.
pub fn transition_crosstalk(omega: f64, delta: f64, gamma: f64, duration: f64) -> Result<f64> {
    check_non_negative("omega", omega)?;
    check_non_negative("gamma", gamma)?;
    check_non_negative("duration", duration)?;
    if delta.is_nan() {
        return Err(Error::domain("delta is NaN"));
    }
    Ok(crosstalk_unchecked(omega, delta, gamma, duration))
}

/// Same as [`transition_crosstalk`] without argument checks.
#[inline]
pub(crate) fn crosstalk_unchecked(omega: f64, delta: f64, gamma: f64, duration: f64) -> f64 {
    if omega == 0.0 {
        return 0.0;
    }
    // Ω²/(Ω²+Δ²) written so that large Δ/Ω underflows to 0 instead of inf/inf.
    let ratio = delta / omega;
    let lorentz = 1.0 / (1.0 + ratio * ratio);
    let exponent = 0.5 * gamma * duration * lorentz;
    (-(-exponent).exp_m1()).clamp(0.0, 1.0)
}

/// Validate a ground-state population map: entries in [0, 1], sum 1 within 1e-9.
pub fn validate_populations(populations: &BTreeMap<GroundSpin, f64>) -> Result<()> {
    if populations.values().any(|p| !(p.is_finite() && (0.0..=1.0).contains(p))) {
        return Err(Error::domain("populations must lie in [0, 1]"));
    }
    let sum: f64 = populations.values().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("populations must sum to 1, got {sum}")));
    }
    Ok(())
}

/// All population in m_s = 0.
pub fn ground_zero_populations() -> BTreeMap<GroundSpin, f64> {
    BTreeMap::from([(GroundSpin::Zero, 1.0)])
}

/// Crosstalk on one emitter from a readout pulse, resolved per pathway.
///
/// Each pathway probability is weighted by the population of its initial
/// ground level; unpopulated levels contribute no pathways.
pub fn emitter_crosstalk(
    model: &EmitterOpticalModel,
    pulse: &ReadoutPulse,
    populations: &BTreeMap<GroundSpin, f64>,
) -> Result<CrosstalkBreakdown> {
    validate_populations(populations)?;
    check_non_negative("duration", pulse.duration_us)?;
    let mut paths = Vec::new();
    for t in &model.transitions {
        let pop = populations.get(&t.ground_initial).copied().unwrap_or(0.0);
        if pop <= 0.0 {
            continue;
        }
        let delta = ghz_to_angular_mhz(pulse.laser_frequency_ghz - t.frequency);
        for (&final_, &gamma) in &t.branching {
            paths.push(PathCrosstalk {
                key: PathKey { initial: t.ground_initial, excited: t.excited, final_ },
                probability: pop * transition_crosstalk(t.rabi, delta, gamma, pulse.duration_us)?,
            });
        }
    }
    Ok(CrosstalkBreakdown::from_paths(paths))
}

/// Smallest |Δ| (GHz) for which the crosstalk does not exceed `gamma_target`.
///
/// Returns 0 when the target is already met on resonance.
pub fn min_safe_detuning(omega: f64, gamma: f64, duration: f64, gamma_target: f64) -> Result<f64> {
    check_non_negative("omega", omega)?;
    check_non_negative("gamma", gamma)?;
    check_non_negative("duration", duration)?;
    if !(gamma_target > 0.0 && gamma_target < 1.0) {
        return Err(Error::domain(format!("gamma_target must lie in (0, 1), got {gamma_target}")));
    }
    let on_resonance = crosstalk_unchecked(omega, 0.0, gamma, duration);
    if gamma_target >= on_resonance {
        return Ok(0.0);
    }
    let f = |d: f64| crosstalk_unchecked(omega, d, gamma, duration);

    // Δ² = Ω² (γT / 2L − 1), L = −ln(1 − Γ_target)
    let l = -(-gamma_target).ln_1p();
    let mut delta = omega * (0.5 * gamma * duration / l - 1.0).sqrt();
    if delta.is_finite() && delta > 0.0 {
        // rounding can leave Γ(Δ) a few ulps above the target
        for _ in 0..64 {
            if f(delta) <= gamma_target {
                break;
            }
            delta = delta.next_up();
        }
    }
    if !(delta.is_finite() && f(delta) <= gamma_target && f(0.999 * delta) > gamma_target) {
        delta = bisect_detuning(&f, omega, gamma_target);
    }
    let mut ghz = angular_mhz_to_ghz(delta);
    while f(ghz_to_angular_mhz(ghz)) > gamma_target {
        ghz = ghz.next_up();
    }
    Ok(ghz)
}

fn bisect_detuning(f: &dyn Fn(f64) -> f64, omega: f64, target: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = omega.max(f64::MIN_POSITIVE);
    while f(hi) > target {
        lo = hi;
        hi *= 2.0;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return hi;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Optical Rabi frequency (rad/µs) that reproduces crosstalk `gamma_ref`
/// at detuning `delta_ref` (GHz), for decay rate `gamma` and pulse `duration`.
pub fn calibrate_rabi(delta_ref: f64, gamma_ref: f64, gamma: f64, duration: f64) -> Result<f64> {
    check_non_negative("gamma", gamma)?;
    check_non_negative("duration", duration)?;
    if !delta_ref.is_finite() {
        return Err(Error::domain("delta_ref must be finite"));
    }
    if !(gamma_ref > 0.0 && gamma_ref < 1.0) {
        return Err(Error::domain(format!("gamma_ref must lie in (0, 1), got {gamma_ref}")));
    }
    if delta_ref == 0.0 {
        return Err(Error::Degenerate("on resonance the crosstalk does not depend on the Rabi frequency".into()));
    }
    let l = -(-gamma_ref).ln_1p();
    let denom = gamma * duration - 2.0 * l;
    if denom <= 0.0 {
        return Err(Error::Unsolvable(format!(
            "γT = {} cannot reach crosstalk {gamma_ref} (needs γT > {})",
            gamma * duration,
            2.0 * l
        )));
    }
    let delta = ghz_to_angular_mhz(delta_ref).abs();
    Ok(delta * (2.0 * l / denom).sqrt())
}
