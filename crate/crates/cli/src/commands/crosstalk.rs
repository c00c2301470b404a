use clap::Args;
use serde::{Deserialize, Serialize};
use specreg::units::ghz_to_angular_mhz;

use super::{set, Context};
use crate::config::{grid, ConfigFile, PresetSpec};
use crate::error::{CliError, CliResult};
use crate::output::Output;

/// Crosstalk probability against laser detuning for one readout preset.
#[derive(Debug, Args)]
pub struct CrosstalkArgs {
    /// Preset name (msr, ssr) or path to a preset JSON file.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    detuning_min_ghz: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    detuning_max_ghz: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Explicit detunings; replaces the min/max/points grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    detunings_ghz: Option<Vec<f64>>,
    /// Crosstalk level whose safe detuning is reported in the metadata.
    #[arg(long)]
    safe_threshold: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrosstalkConfig {
    pub preset: PresetSpec,
    pub detuning_min_ghz: f64,
    pub detuning_max_ghz: f64,
    pub points: usize,
    pub detunings_ghz: Option<Vec<f64>>,
    pub safe_threshold: f64,
}

impl Default for CrosstalkConfig {
    fn default() -> Self {
        Self {
            preset: PresetSpec::default(),
            detuning_min_ghz: -40.0,
            detuning_max_ghz: 40.0,
            points: 801,
            detunings_ghz: None,
            safe_threshold: 0.01,
        }
    }
}

pub fn run(ctx: &Context, args: CrosstalkArgs) -> CliResult<Output> {
    let mut file = ConfigFile::<CrosstalkConfig>::load(ctx.config.as_deref())?;
    let seed = ctx.seed(file.seed);
    let mut cfg = std::mem::take(&mut file.value);
    if let Some(p) = &args.preset {
        cfg.preset = PresetSpec::from_flag(p)?;
    }
    set(&mut cfg.detuning_min_ghz, args.detuning_min_ghz);
    set(&mut cfg.detuning_max_ghz, args.detuning_max_ghz);
    set(&mut cfg.points, args.points);
    set(&mut cfg.safe_threshold, args.safe_threshold);
    if args.detunings_ghz.is_some() {
        cfg.detunings_ghz = args.detunings_ghz;
    }

    let preset = cfg.preset.preset()?.resolve()?;
    let detunings = match &cfg.detunings_ghz {
        Some(d) if d.is_empty() => return Err(CliError::input("detunings_ghz is empty")),
        Some(d) => d.clone(),
        None => grid(cfg.detuning_min_ghz, cfg.detuning_max_ghz, cfg.points)?,
    };
    let mut gammas = Vec::with_capacity(detunings.len());
    for &d in &detunings {
        gammas.push(specreg::crosstalk::transition_crosstalk(
            preset.omega,
            ghz_to_angular_mhz(d),
            preset.gamma,
            preset.duration_us,
        )?);
    }
    let safe = preset.min_safe_detuning(cfg.safe_threshold)?;
    ctx.log(format!("omega = {} rad/us, safe detuning at {} = {safe} GHz", preset.omega, cfg.safe_threshold));

    let mut out = Output::new(ctx.out_dir.clone(), "crosstalk", seed, &cfg)?;
    out.annotate("preset", preset)?;
    out.annotate("min_safe_detuning_ghz", safe)?;
    out.csv("crosstalk.csv", |buf| {
        use std::io::Write;
        writeln!(buf, "detuning_ghz,gamma")?;
        for (d, g) in detunings.iter().zip(&gammas) {
            writeln!(buf, "{d},{g}")?;
        }
        Ok(())
    })?;
    Ok(out)
}
