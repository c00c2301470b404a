use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use specreg::ensemble::{
    ks_critical_value, ks_statistic, sample, write_density_csv, Bandwidth, SampleWeighting, ZplDataset,
};

use super::{set, Context};
use crate::config::{load_distribution, parse_bandwidth, parse_enum, ConfigFile, Source};
use crate::error::{CliError, CliResult};
use crate::output::Output;

const KS_ALPHA: f64 = 0.01;

/// Fits a kernel density model to a ZPL distribution, exports it with its
/// density curve, and draws seeded samples from it.
#[derive(Debug, Args)]
pub struct SampleArgs {
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
    /// Number of frequencies to draw.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    density_points: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub dataset: Option<PathBuf>,
    pub kde: Option<PathBuf>,
    pub surrogate: Option<String>,
    pub bandwidth: Bandwidth,
    pub weighting: SampleWeighting,
    pub count: usize,
    pub density_points: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            kde: None,
            surrogate: None,
            bandwidth: Bandwidth::AUTO,
            weighting: SampleWeighting::default(),
            count: 10_000,
            density_points: 512,
        }
    }
}

pub fn run(ctx: &Context, args: SampleArgs) -> CliResult<Output> {
    let mut file = ConfigFile::<SampleConfig>::load(ctx.config.as_deref())?;
    let seed = ctx.seed(file.seed);
    let mut cfg = std::mem::take(&mut file.value);
    file.rebase(&mut cfg.dataset);
    file.rebase(&mut cfg.kde);
    let flags = Source { dataset: args.dataset, kde: args.kde, surrogate: args.surrogate };
    if flags.is_set() {
        (cfg.dataset, cfg.kde, cfg.surrogate) = (flags.dataset, flags.kde, flags.surrogate);
    }
    set(&mut cfg.bandwidth, args.bandwidth);
    set(&mut cfg.weighting, args.weighting);
    set(&mut cfg.count, args.count);
    set(&mut cfg.density_points, args.density_points);
    if cfg.count == 0 {
        return Err(CliError::input("count must be at least 1"));
    }

    let source = Source { dataset: cfg.dataset.clone(), kde: cfg.kde.clone(), surrogate: cfg.surrogate.clone() };
    let dist = load_distribution(&source, cfg.bandwidth, cfg.weighting, seed)?;
    let model = &dist.model;
    let draws = sample(model, seed, cfg.count)?;
    let (lo, hi) = model.support();
    let curve = model.density_curve(lo, hi, cfg.density_points)?;
    let ks = ks_statistic(&draws, |x| model.cdf(x));
    let critical = ks_critical_value(KS_ALPHA, draws.len());
    ctx.log(format!("bandwidth {} GHz, KS {ks} (critical {critical} at {KS_ALPHA})", model.bandwidth_ghz));

    let mut out = Output::new(ctx.out_dir.clone(), "sample-dist", seed, &cfg)?;
    out.annotate("distribution", &dist.description)?;
    out.annotate("sample_check", serde_json::json!({"ks_statistic": ks, "ks_critical": critical, "alpha": KS_ALPHA}))?;
    out.json("kde.json", model)?;
    if let Some(data) = &dist.dataset {
        out.csv("dataset.csv", |buf| data.write_csv(buf))?;
    }
    let samples = ZplDataset::new(draws, None)?;
    out.csv("samples.csv", |buf| samples.write_csv(buf))?;
    out.csv("density.csv", |buf| write_density_csv(&curve, buf))?;
    Ok(out)
}
