use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use specreg::ensemble::{Bandwidth, SampleWeighting};
use specreg::yield_mc::{yield_sweep, SweepConfig, ViabilityMode};

use super::{set, Context};
use crate::config::{load_distribution, parse_bandwidth, parse_enum, ConfigFile, PresetSpec, Source};
use crate::error::CliResult;
use crate::output::Output;

/// Probability that N emitters drawn from a ZPL distribution form a
/// register whose readout crosstalk stays below each threshold.
#[derive(Debug, Args)]
pub struct YieldArgs {
    /// Preset name (msr, ssr) or path to a preset JSON file.
    #[arg(long)]
    preset: Option<String>,
    /// ZPL dataset CSV (`frequency_ghz[,site_id]`).
    #[arg(long, group = "source")]
    dataset: Option<PathBuf>,
    /// Kernel density model JSON.
    #[arg(long, group = "source")]
    kde: Option<PathBuf>,
    /// Built-in Gaussian surrogate: scd or pcd.
    #[arg(long, group = "source")]
    surrogate: Option<String>,
    /// Kernel bandwidth in GHz, or `auto`.
    #[arg(long, value_parser = parse_bandwidth)]
    bandwidth: Option<Bandwidth>,
    /// per-transition or per-site
    #[arg(long, value_parser = parse_enum::<SampleWeighting>)]
    weighting: Option<SampleWeighting>,
    /// Register sizes, comma separated.
    #[arg(long = "n", value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    /// worst-case or ordered
    #[arg(long, value_parser = parse_enum::<ViabilityMode>)]
    mode: Option<ViabilityMode>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YieldCmdConfig {
    pub preset: PresetSpec,
    pub dataset: Option<PathBuf>,
    pub kde: Option<PathBuf>,
    pub surrogate: Option<String>,
    pub bandwidth: Bandwidth,
    pub weighting: SampleWeighting,
    pub n_values: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub trials: usize,
    pub mode: ViabilityMode,
}

impl Default for YieldCmdConfig {
    fn default() -> Self {
        Self {
            preset: PresetSpec::default(),
            dataset: None,
            kde: None,
            surrogate: None,
            bandwidth: Bandwidth::AUTO,
            weighting: SampleWeighting::default(),
            n_values: (1..=10).collect(),
            thresholds: vec![1e-3, 1e-2],
            trials: 10_000,
            mode: ViabilityMode::default(),
        }
    }
}

pub fn run(ctx: &Context, args: YieldArgs) -> CliResult<Output> {
    let mut file = ConfigFile::<YieldCmdConfig>::load(ctx.config.as_deref())?;
    let seed = ctx.seed(file.seed);
    let mut cfg = std::mem::take(&mut file.value);
    file.rebase(&mut cfg.dataset);
    file.rebase(&mut cfg.kde);
    if let Some(p) = &args.preset {
        cfg.preset = PresetSpec::from_flag(p)?;
    }
    let flags = Source { dataset: args.dataset, kde: args.kde, surrogate: args.surrogate };
    if flags.is_set() {
        (cfg.dataset, cfg.kde, cfg.surrogate) = (flags.dataset, flags.kde, flags.surrogate);
    }
    set(&mut cfg.bandwidth, args.bandwidth);
    set(&mut cfg.weighting, args.weighting);
    set(&mut cfg.n_values, args.n_values);
    set(&mut cfg.thresholds, args.thresholds);
    set(&mut cfg.trials, args.trials);
    set(&mut cfg.mode, args.mode);

    let preset = cfg.preset.preset()?;
    let source = Source { dataset: cfg.dataset.clone(), kde: cfg.kde.clone(), surrogate: cfg.surrogate.clone() };
    let dist = load_distribution(&source, cfg.bandwidth, cfg.weighting, seed)?;
    let sweep = SweepConfig {
        n_values: cfg.n_values.clone(),
        thresholds: cfg.thresholds.clone(),
        trials: cfg.trials,
        seed,
        mode: cfg.mode,
    };
    let table = yield_sweep(&dist.model, &preset, &sweep)?;
    for row in &table.rows {
        ctx.log(format!("n={} threshold={} yield={}", row.n_emitters, row.gamma_threshold, row.yield_));
    }

    let mut out = Output::new(ctx.out_dir.clone(), "yield", seed, &cfg)?;
    out.annotate("preset", table.preset)?;
    out.annotate("distribution", &dist.description)?;
    out.csv("yield.csv", |buf| table.write_csv(buf))?;
    out.json("yield.json", &table)?;
    Ok(out)
}
