use std::collections::BTreeMap;
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::dataset::ZplDataset;
use crate::rng::substream;
use crate::{Error, Result};

/// Explicit bandwidth in GHz, or `"auto"` for Silverman's rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl Bandwidth {
    pub const AUTO: Bandwidth = Bandwidth::Auto(AutoTag::Auto);
}

/// How much each sample contributes to the density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleWeighting {
    /// Every transition counts once.
    #[default]
    PerTransition,
    /// Every site counts once, split evenly over its transitions.
    PerSite,
}

/// Gaussian kernel density estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDensityModel {
    pub bandwidth_ghz: f64,
    pub samples_ghz: Vec<f64>,
    /// Normalized weights; `None` means uniform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

impl KernelDensityModel {
    pub fn new(samples_ghz: Vec<f64>, bandwidth_ghz: f64) -> Result<Self> {
        let m = Self { bandwidth_ghz, samples_ghz, weights: None };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_ghz.is_finite() && self.bandwidth_ghz > 0.0) {
            return Err(Error::domain(format!("bandwidth must be positive, got {}", self.bandwidth_ghz)));
        }
        if self.samples_ghz.is_empty() {
            return Err(Error::Empty("density model has no samples".into()));
        }
        if self.samples_ghz.iter().any(|s| !s.is_finite()) {
            return Err(Error::domain("samples must be finite"));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.samples_ghz.len() || w.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::domain("weights must be non-negative, one per sample"));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!("weights must sum to 1, got {total}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.samples_ghz.len() as f64,
        }
    }

    fn weighted(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples_ghz.iter().enumerate().map(|(i, &s)| (s, self.weight(i)))
    }

    /// Probability density per GHz.
    pub fn density(&self, freq_ghz: f64) -> f64 {
        let h = self.bandwidth_ghz;
        self.weighted()
            .map(|(s, w)| {
                let z = (freq_ghz - s) / h;
                w * (-0.5 * z * z).exp()
            })
            .sum::<f64>()
            / (h * SQRT_2PI)
    }

    pub fn cdf(&self, freq_ghz: f64) -> f64 {
        let h = self.bandwidth_ghz;
        self.weighted().map(|(s, w)| w * 0.5 * erfc(-(freq_ghz - s) / (h * std::f64::consts::SQRT_2))).sum()
    }

    pub fn mean(&self) -> f64 {
        self.weighted().map(|(s, w)| w * s).sum()
    }

    /// Variance of the mixture: spread of the samples plus the kernel's h².
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.weighted().map(|(s, w)| w * (s - m).powi(2)).sum::<f64>() + self.bandwidth_ghz.powi(2)
    }

    /// Integration range: data span padded by eight bandwidths on each side.
    pub fn support(&self) -> (f64, f64) {
        let lo = self.samples_ghz.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.samples_ghz.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - 8.0 * self.bandwidth_ghz, hi + 8.0 * self.bandwidth_ghz)
    }

    /// Composite Simpson integral of the density over [`support`](Self::support).
    pub fn integral(&self) -> f64 {
        let (lo, hi) = self.support();
        // step of h/8 resolves the kernel well below 1e-6 error
        let mut n = (((hi - lo) / (self.bandwidth_ghz / 8.0)).ceil() as usize).max(16);
        n += n % 2;
        let dx = (hi - lo) / n as f64;
        let mut acc = self.density(lo) + self.density(hi);
        for i in 1..n {
            let c = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += c * self.density(lo + i as f64 * dx);
        }
        acc * dx / 3.0
    }

    pub fn shifted(&self, offset_ghz: f64) -> Self {
        Self {
            bandwidth_ghz: self.bandwidth_ghz,
            samples_ghz: self.samples_ghz.iter().map(|s| s + offset_ghz).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Density on an even grid of `points` frequencies from `lo` to `hi`.
    pub fn density_curve(&self, lo: f64, hi: f64, points: usize) -> Result<Vec<(f64, f64)>> {
        if points < 2 || hi.is_nan() || lo.is_nan() || hi <= lo {
            return Err(Error::domain("density grid needs hi > lo and at least 2 points"));
        }
        Ok((0..points)
            .map(|i| {
                let f = lo + (hi - lo) * i as f64 / (points - 1) as f64;
                (f, self.density(f))
            })
            .collect())
    }

    /// A reusable sampler; see [`sample`].
    pub fn sampler(&self) -> Result<KdeSampler<'_>> {
        self.validate()?;
        let index = match &self.weights {
            Some(w) => Some(WeightedIndex::new(w).map_err(|e| Error::domain(e.to_string()))?),
            None => None,
        };
        Ok(KdeSampler { model: self, index })
    }
}

/// CSV `frequency_ghz,density_per_ghz`.
pub fn write_density_csv<W: Write>(curve: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frequency_ghz", "density_per_ghz"])?;
    for (f, d) in curve {
        w.write_record(&[f.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Draws from a [`KernelDensityModel`]: pick a sample (by weight), add
/// Gaussian noise of one bandwidth.
pub struct KdeSampler<'a> {
    model: &'a KernelDensityModel,
    index: Option<WeightedIndex<f64>>,
}

impl KdeSampler<'_> {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let i = match &self.index {
            Some(idx) => idx.sample(rng),
            None => rng.random_range(0..self.model.samples_ghz.len()),
        };
        let z: f64 = rng.sample(StandardNormal);
        self.model.samples_ghz[i] + self.model.bandwidth_ghz * z
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out {
            *v = self.draw(rng);
        }
    }
}

/// Silverman's rule of thumb, 1.06 σ̂ n^(−1/5).
pub fn silverman_bandwidth(samples: &[f64], effective_n: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::domain("automatic bandwidth needs at least 2 samples"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(Error::Degenerate("all samples identical; automatic bandwidth is zero".into()));
    }
    Ok(1.06 * sd * effective_n.powf(-0.2))
}

/// Gaussian KDE of a dataset.
///
/// With [`SampleWeighting::PerSite`] each site carries equal total weight and
/// Silverman's rule uses the number of sites as the sample size.
pub fn kde_fit(data: &ZplDataset, bandwidth: Bandwidth, weighting: SampleWeighting) -> Result<KernelDensityModel> {
    data.validate()?;
    let (weights, effective_n) = match weighting {
        SampleWeighting::PerTransition => (None, data.len() as f64),
        SampleWeighting::PerSite => {
            let ids = data
                .site_ids
                .as_ref()
                .ok_or_else(|| Error::Config("per-site weighting needs site_id column".into()))?;
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for id in ids {
                *counts.entry(id.as_str()).or_default() += 1;
            }
            let sites = counts.len() as f64;
            let w = ids.iter().map(|id| 1.0 / (sites * counts[id.as_str()] as f64)).collect();
            (Some(w), sites)
        }
    };
    let h = match bandwidth {
        Bandwidth::Fixed(h) => {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::domain(format!("bandwidth must be positive, got {h}")));
            }
            h
        }
        Bandwidth::Auto(_) => silverman_bandwidth(&data.frequencies_ghz, effective_n)?,
    };
    let m = KernelDensityModel { bandwidth_ghz: h, samples_ghz: data.frequencies_ghz.clone(), weights };
    m.validate()?;
    Ok(m)
}

/// `n` independent draws, reproducible from `seed`.
pub fn sample(model: &KernelDensityModel, seed: u64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let s = model.sampler()?;
    let mut rng = substream(seed, 0);
    Ok((0..n).map(|_| s.draw(&mut rng)).collect())
}

/// Two-sided Kolmogorov–Smirnov statistic of `draws` against `cdf`.
pub fn ks_statistic(draws: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = draws.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at significance `alpha` for `n` draws.
pub fn ks_critical_value(alpha: f64, n: usize) -> f64 {
    (-0.5 * (0.5 * alpha).ln()).sqrt() / (n as f64).sqrt()
}
