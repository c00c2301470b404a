//! Monte Carlo register yield: how often N emitters drawn from a ZPL
//! distribution can each be read out with crosstalk below a threshold.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crosstalk::{
    calibrate_rabi, crosstalk_unchecked, emitter_crosstalk, ground_zero_populations, min_safe_detuning,
    EmitterOpticalModel, ReadoutPulse,
};
use crate::ensemble::KernelDensityModel;
use crate::rng::substream;
use crate::units::{
    ghz_to_angular_mhz, DEFAULT_DECAY_RATE, DEFAULT_MSR_DURATION_US, MSR_ANCHOR_CROSSTALK, MSR_ANCHOR_DETUNING_GHZ,
    SSR_DURATION_US,
};
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    Msr,
    Ssr,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibratedTag {
    Calibrated,
}

/// Rabi frequency in rad/µs, or `"calibrated"` to solve for the value that
/// puts the crosstalk at the multi-shot anchor (1% at 16 GHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RabiSetting {
    Value(f64),
    Calibrated(CalibratedTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutPreset {
    pub name: PresetName,
    pub omega: RabiSetting,
    /// Excited-state decay rate, µs⁻¹.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub duration_us: f64,
}

fn default_gamma() -> f64 {
    DEFAULT_DECAY_RATE
}

impl ReadoutPreset {
    /// Multi-shot readout: Ω calibrated against the 16 GHz / 1% anchor.
    pub fn msr() -> Self {
        Self {
            name: PresetName::Msr,
            omega: RabiSetting::Calibrated(CalibratedTag::Calibrated),
            gamma: DEFAULT_DECAY_RATE,
            duration_us: DEFAULT_MSR_DURATION_US,
        }
    }

    /// Single-shot readout: Ω = γ, T = 3.7 µs.
    pub fn ssr() -> Self {
        Self {
            name: PresetName::Ssr,
            omega: RabiSetting::Value(DEFAULT_DECAY_RATE),
            gamma: DEFAULT_DECAY_RATE,
            duration_us: SSR_DURATION_US,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "msr" => Ok(Self::msr()),
            "ssr" => Ok(Self::ssr()),
            other => Err(Error::Config(format!("unknown preset `{other}` (expected msr or ssr)"))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.resolve()?;
        Ok(p)
    }

    pub fn resolve(&self) -> Result<ResolvedPreset> {
        if !(self.duration_us.is_finite() && self.duration_us > 0.0) {
            return Err(Error::Config(format!("preset duration must be > 0, got {}", self.duration_us)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Config(format!("preset gamma must be > 0, got {}", self.gamma)));
        }
        let (omega, calibrated) = match self.omega {
            RabiSetting::Value(w) => {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::Config(format!("preset omega must be >= 0, got {w}")));
                }
                (w, false)
            }
            RabiSetting::Calibrated(_) => {
                (calibrate_rabi(MSR_ANCHOR_DETUNING_GHZ, MSR_ANCHOR_CROSSTALK, self.gamma, self.duration_us)?, true)
            }
        };
        Ok(ResolvedPreset { name: self.name, omega, gamma: self.gamma, duration_us: self.duration_us, calibrated })
    }
}

/// A preset with a concrete Rabi frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPreset {
    pub name: PresetName,
    /// rad/µs
    pub omega: f64,
    /// µs⁻¹
    pub gamma: f64,
    pub duration_us: f64,
    /// Whether `omega` came from the anchor calibration.
    pub calibrated: bool,
}

impl ResolvedPreset {
    pub fn crosstalk(&self, detuning_ghz: f64) -> f64 {
        crosstalk_unchecked(self.omega, ghz_to_angular_mhz(detuning_ghz), self.gamma, self.duration_us)
    }

    pub fn min_safe_detuning(&self, threshold: f64) -> Result<f64> {
        min_safe_detuning(self.omega, self.gamma, self.duration_us, threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViabilityMode {
    /// Every emitter, addressed in turn, keeps every other emitter below threshold.
    #[default]
    WorstCase,
    /// Some readout order exists in which each addressed emitter keeps the
    /// not-yet-read emitters below threshold.
    Ordered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viability {
    pub viable: bool,
    /// The smallest threshold at which the cluster would be viable in the
    /// chosen mode. In worst-case mode this is the largest pairwise crosstalk.
    pub worst_crosstalk: f64,
}

fn check_threshold(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("crosstalk threshold must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Largest pairwise crosstalk for a uniform preset: Γ falls with |Δ|, so
/// it is attained at the closest pair.
fn critical_uniform(freqs: &mut [f64], preset: &ResolvedPreset) -> f64 {
    if freqs.len() < 2 {
        return 0.0;
    }
    freqs.sort_by(f64::total_cmp);
    let gap = freqs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    preset.crosstalk(gap)
}

/// Crosstalk matrix `m[a][b]`: probability that reading `a` projects `b`.
fn pairwise_matrix(freqs: &[f64], preset: &ResolvedPreset) -> Vec<Vec<f64>> {
    freqs
        .iter()
        .enumerate()
        .map(|(a, fa)| {
            freqs.iter().enumerate().map(|(b, fb)| if a == b { 0.0 } else { preset.crosstalk(fa - fb) }).collect()
        })
        .collect()
}

fn worst_entry(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().copied().fold(0.0, f64::max)
}

/// Whether some order reads every emitter while keeping each one below
/// `threshold` until it has itself been read.
fn order_exists(m: &[Vec<f64>], threshold: f64) -> bool {
    let n = m.len();
    // b must be read before a whenever reading a would disturb b
    let mut indegree = vec![0usize; n];
    for (a, row) in m.iter().enumerate() {
        for (b, &g) in row.iter().enumerate() {
            if a != b && g > threshold {
                indegree[a] += 1;
            }
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut done = 0;
    while let Some(b) = ready.pop() {
        done += 1;
        for a in 0..n {
            if a != b && m[a][b] > threshold {
                indegree[a] -= 1;
                if indegree[a] == 0 {
                    ready.push(a);
                }
            }
        }
    }
    done == n
}

/// Smallest threshold at which a readout order exists.
fn ordered_critical(m: &[Vec<f64>]) -> f64 {
    let mut levels: Vec<f64> = m.iter().flatten().copied().collect();
    levels.push(0.0);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    // feasibility is monotone in the threshold
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if order_exists(m, levels[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    levels[lo]
}

fn critical_for(m: &[Vec<f64>], mode: ViabilityMode) -> f64 {
    match mode {
        ViabilityMode::WorstCase => worst_entry(m),
        ViabilityMode::Ordered => ordered_critical(m),
    }
}

/// Viability of a cluster of single-line emitters under one preset.
pub fn cluster_viability(frequencies_ghz: &[f64], preset: &ReadoutPreset, threshold: f64) -> Result<Viability> {
    cluster_viability_mode(frequencies_ghz, &preset.resolve()?, threshold, ViabilityMode::WorstCase)
}

pub fn cluster_viability_mode(
    frequencies_ghz: &[f64],
    preset: &ResolvedPreset,
    threshold: f64,
    mode: ViabilityMode,
) -> Result<Viability> {
    if frequencies_ghz.is_empty() {
        return Err(Error::domain("cluster needs at least one emitter"));
    }
    if frequencies_ghz.iter().any(|f| !f.is_finite()) {
        return Err(Error::domain("frequencies must be finite"));
    }
    check_threshold(threshold)?;
    let worst = match mode {
        ViabilityMode::WorstCase => critical_uniform(&mut frequencies_ghz.to_vec(), preset),
        ViabilityMode::Ordered => ordered_critical(&pairwise_matrix(frequencies_ghz, preset)),
    };
    Ok(Viability { viable: worst <= threshold, worst_crosstalk: worst })
}

/// Viability from full optical models: reading emitter `a` uses a pulse of
/// `duration_us` at `a`'s readout line, and each other emitter, taken to be
/// in m_s = 0, is projected with its total multi-path crosstalk.
pub fn cluster_viability_models(
    models: &[EmitterOpticalModel],
    duration_us: f64,
    threshold: f64,
    mode: ViabilityMode,
) -> Result<Viability> {
    if models.is_empty() {
        return Err(Error::domain("cluster needs at least one emitter"));
    }
    check_threshold(threshold)?;
    let pops = ground_zero_populations();
    let mut m = vec![vec![0.0; models.len()]; models.len()];
    for (a, addressed) in models.iter().enumerate() {
        let pulse = ReadoutPulse::new(addressed.readout_frequency(), duration_us)?;
        for (b, spectator) in models.iter().enumerate() {
            if a != b {
                m[a][b] = emitter_crosstalk(spectator, &pulse, &pops)?.total;
            }
        }
    }
    let worst = critical_for(&m, mode);
    Ok(Viability { viable: worst <= threshold, worst_crosstalk: worst })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldEstimate {
    pub n_emitters: usize,
    pub gamma_threshold: f64,
    pub trials: u64,
    pub successes: u64,
    #[serde(rename = "yield")]
    pub yield_: f64,
    pub ci95: (f64, f64),
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // at s = 0 or s = n the bound equals p analytically; keep rounding from excluding it
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

impl YieldEstimate {
    fn new(n_emitters: usize, gamma_threshold: f64, trials: u64, successes: u64) -> Self {
        Self {
            n_emitters,
            gamma_threshold,
            trials,
            successes,
            yield_: successes as f64 / trials as f64,
            ci95: wilson_interval(successes, trials),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: ViabilityMode,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < MIN_TRIALS {
            return Err(Error::Config(format!("trials must be at least {MIN_TRIALS}, got {}", self.trials)));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::Config("n values must be non-empty and each >= 1".into()));
        }
        if self.thresholds.is_empty() {
            return Err(Error::Config("at least one threshold is required".into()));
        }
        for &t in &self.thresholds {
            check_threshold(t)?;
        }
        Ok(())
    }
}

/// One row per (n, threshold), in the order of `n_values` then `thresholds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldTable {
    pub preset: ResolvedPreset,
    pub config: SweepConfig,
    pub rows: Vec<YieldEstimate>,
}

impl YieldTable {
    pub fn get(&self, n: usize, threshold: f64) -> Option<&YieldEstimate> {
        self.rows.iter().find(|r| r.n_emitters == n && r.gamma_threshold == threshold)
    }

    /// CSV `n,threshold,trials,successes,yield,ci_lo,ci_hi`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "threshold", "trials", "successes", "yield", "ci_lo", "ci_hi"])?;
        for r in &self.rows {
            w.write_record(&[
                r.n_emitters.to_string(),
                r.gamma_threshold.to_string(),
                r.trials.to_string(),
                r.successes.to_string(),
                r.yield_.to_string(),
                r.ci95.0.to_string(),
                r.ci95.1.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Yield for every (n, threshold) pair with common random numbers.
///
/// Trial `t` draws `max(n_values)` frequencies from substream `(seed, t)`;
/// the n-emitter cluster is the first n of them, and each cluster is judged
/// against every threshold. Yields are therefore exactly non-increasing in n
/// and non-decreasing in threshold. Success counts are integers summed
/// across threads, so the table does not depend on the thread count.
pub fn yield_sweep(model: &KernelDensityModel, preset: &ReadoutPreset, config: &SweepConfig) -> Result<YieldTable> {
    config.validate()?;
    let resolved = preset.resolve()?;
    let sampler = model.sampler()?;
    let max_n = *config.n_values.iter().max().expect("validated non-empty");
    let (nn, nt) = (config.n_values.len(), config.thresholds.len());

    let counts = (0..config.trials as u64)
        .into_par_iter()
        .fold(
            || vec![0u64; nn * nt],
            |mut acc, t| {
                let mut rng = substream(config.seed, t);
                let mut freqs = vec![0.0; max_n];
                sampler.fill(&mut rng, &mut freqs);
                for (i, &n) in config.n_values.iter().enumerate() {
                    let critical = match config.mode {
                        ViabilityMode::WorstCase => critical_uniform(&mut freqs[..n].to_vec(), &resolved),
                        ViabilityMode::Ordered => ordered_critical(&pairwise_matrix(&freqs[..n], &resolved)),
                    };
                    for (j, &thr) in config.thresholds.iter().enumerate() {
                        if critical <= thr {
                            acc[i * nt + j] += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(|| vec![0u64; nn * nt], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());

    let trials = config.trials as u64;
    let rows = config
        .n_values
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| {
            let counts = &counts;
            config
                .thresholds
                .iter()
                .enumerate()
                .map(move |(j, &thr)| YieldEstimate::new(n, thr, trials, counts[i * nt + j]))
        })
        .collect();
    Ok(YieldTable { preset: resolved, config: config.clone(), rows })
}

/// Yield for one cluster size and threshold, worst-case criterion.
pub fn estimate_yield(
    model: &KernelDensityModel,
    n: usize,
    preset: &ReadoutPreset,
    gamma_threshold: f64,
    trials: usize,
    seed: u64,
) -> Result<YieldEstimate> {
    let config = SweepConfig {
        n_values: vec![n],
        thresholds: vec![gamma_threshold],
        trials,
        seed,
        mode: ViabilityMode::WorstCase,
    };
    Ok(yield_sweep(model, preset, &config)?.rows[0])
}
