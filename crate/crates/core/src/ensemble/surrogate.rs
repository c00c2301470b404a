use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::dataset::ZplDataset;
use crate::rng::substream;
use crate::units::NV_ZPL_GHZ;
use crate::{Error, Result};

/// Gaussian stand-in for a measured ZPL distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianSurrogate {
    pub name: &'static str,
    pub center_ghz: f64,
    pub sigma_ghz: f64,
    pub count: usize,
}

/// Surrogate for a polycrystalline-diamond ensemble: σ = 294 GHz, 87 emitters.
pub const PCD_SURROGATE: GaussianSurrogate =
    GaussianSurrogate { name: "pcd-surrogate", center_ghz: NV_ZPL_GHZ, sigma_ghz: 294.0, count: 87 };

/// Surrogate for a single-crystal ensemble: σ = 60 GHz, 406 transitions.
pub const SCD_SURROGATE: GaussianSurrogate =
    GaussianSurrogate { name: "scd-surrogate", center_ghz: NV_ZPL_GHZ, sigma_ghz: 60.0, count: 406 };

impl GaussianSurrogate {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "pcd" | "pcd-surrogate" => Ok(PCD_SURROGATE),
            "scd" | "scd-surrogate" => Ok(SCD_SURROGATE),
            other => Err(Error::Config(format!("unknown surrogate `{other}` (expected pcd or scd)"))),
        }
    }

    /// Draws `count` frequencies from the Gaussian.
    pub fn generate(&self, seed: u64) -> Result<ZplDataset> {
        let normal = Normal::new(self.center_ghz, self.sigma_ghz).map_err(|e| Error::domain(e.to_string()))?;
        let mut rng = substream(seed, 0);
        ZplDataset::new((0..self.count).map(|_| normal.sample(&mut rng)).collect(), None)
    }
}
