use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use specreg::ensemble::{
    kde_fit, load_zpl_dataset, summary_stats, Bandwidth, GaussianSurrogate, KernelDensityModel, SampleWeighting,
    ZplDataset,
};
use specreg::yield_mc::ReadoutPreset;

use crate::error::{CliError, CliResult};

/// A command's JSON config file, split into the command record and the
/// global seed.
pub struct ConfigFile<T> {
    pub value: T,
    pub seed: Option<u64>,
    dir: Option<PathBuf>,
}

impl<T: DeserializeOwned + Default> ConfigFile<T> {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self { value: T::default(), seed: None, dir: None });
        };
        let text = read_input(path)?;
        let mut raw: Value =
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let seed =
            match raw.as_object_mut().and_then(|m| m.remove("seed")) {
                None => None,
                Some(v) => Some(v.as_u64().ok_or_else(|| {
                    CliError::input(format!("{}: seed must be a non-negative integer", path.display()))
                })?),
            };
        let value = serde_json::from_value(raw).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Ok(Self { value, seed, dir: path.parent().map(Path::to_path_buf) })
    }
}

impl<T> ConfigFile<T> {
    /// Resolves a path read from the config file against the file's directory.
    pub fn rebase(&self, path: &mut Option<PathBuf>) {
        if let (Some(dir), Some(p)) = (&self.dir, path.as_mut()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}

pub fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

pub fn require_path(path: &Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    let p = path.clone().ok_or_else(|| CliError::input(format!("missing {what} (flag or config field)")))?;
    if !p.is_file() {
        return Err(CliError::input(format!("{what} `{}` does not exist", p.display())));
    }
    Ok(p)
}

/// Parses a lowercase/kebab-case enum through its serde representation.
pub fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.into())).map_err(|e| e.to_string())
}

pub fn parse_bandwidth(s: &str) -> Result<Bandwidth, String> {
    if s == "auto" {
        return Ok(Bandwidth::AUTO);
    }
    s.parse::<f64>().map(Bandwidth::Fixed).map_err(|_| format!("expected a bandwidth in GHz or `auto`, got `{s}`"))
}

/// `n` points from `lo` to `hi`, exactly mirror-symmetric when `lo == -hi`.
pub fn grid(lo: f64, hi: f64, n: usize) -> CliResult<Vec<f64>> {
    if n < 2 || !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CliError::input(format!("grid needs lo < hi and at least 2 points, got [{lo}, {hi}] × {n}")));
    }
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let last = (n - 1) as f64;
    Ok((0..n).map(|i| mid + half * ((2 * i) as f64 - last) / last).collect())
}

/// A readout preset by name (`msr`, `ssr`) or as a full record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PresetSpec {
    Name(String),
    Custom(ReadoutPreset),
}

impl Default for PresetSpec {
    fn default() -> Self {
        PresetSpec::Name("msr".into())
    }
}

impl PresetSpec {
    /// A flag value is a preset name or a path to a preset JSON file.
    pub fn from_flag(s: &str) -> CliResult<Self> {
        if s.ends_with(".json") || Path::new(s).is_file() {
            let text = read_input(Path::new(s))?;
            Ok(PresetSpec::Custom(ReadoutPreset::from_json(&text).map_err(|e| CliError::input(format!("{s}: {e}")))?))
        } else {
            Ok(PresetSpec::Name(s.into()))
        }
    }

    pub fn preset(&self) -> CliResult<ReadoutPreset> {
        Ok(match self {
            PresetSpec::Name(n) => ReadoutPreset::by_name(n)?,
            PresetSpec::Custom(p) => *p,
        })
    }
}

/// Where a ZPL distribution comes from. At most one field may be set; none
/// means the single-crystal surrogate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub dataset: Option<PathBuf>,
    pub kde: Option<PathBuf>,
    pub surrogate: Option<String>,
}

impl Source {
    pub fn is_set(&self) -> bool {
        self.dataset.is_some() || self.kde.is_some() || self.surrogate.is_some()
    }
}

pub struct Distribution {
    pub model: KernelDensityModel,
    pub dataset: Option<ZplDataset>,
    /// Provenance record for output metadata.
    pub description: Value,
}

pub fn load_distribution(
    source: &Source,
    bandwidth: Bandwidth,
    weighting: SampleWeighting,
    seed: u64,
) -> CliResult<Distribution> {
    let set = [source.dataset.is_some(), source.kde.is_some(), source.surrogate.is_some()];
    if set.iter().filter(|s| **s).count() > 1 {
        return Err(CliError::input("give only one of dataset, kde, surrogate"));
    }
    let fit = |data: ZplDataset, mut description: Value| -> CliResult<Distribution> {
        let model = kde_fit(&data, bandwidth, weighting)?;
        description["summary"] = serde_json::to_value(summary_stats(&data)?).expect("plain record");
        description["bandwidth_ghz"] = json!(model.bandwidth_ghz);
        Ok(Distribution { model, dataset: Some(data), description })
    };
    if let Some(path) = &source.kde {
        let path = require_path(&Some(path.clone()), "kde file")?;
        let model = KernelDensityModel::from_json(&read_input(&path)?)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let description = json!({"kind": "kde", "path": path, "bandwidth_ghz": model.bandwidth_ghz, "samples": model.samples_ghz.len()});
        return Ok(Distribution { model, dataset: None, description });
    }
    if let Some(path) = &source.dataset {
        let path = require_path(&Some(path.clone()), "dataset")?;
        let data = load_zpl_dataset(read_input(&path)?.as_bytes())
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        return fit(data, json!({"kind": "dataset", "path": path}));
    }
    let surrogate = GaussianSurrogate::by_name(source.surrogate.as_deref().unwrap_or("scd"))?;
    fit(surrogate.generate(seed)?, json!({"kind": "surrogate", "surrogate": surrogate}))
}
