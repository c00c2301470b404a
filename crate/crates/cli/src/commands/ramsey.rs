use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use specreg::crosstalk::{emitter_crosstalk, ground_zero_populations, EmitterOpticalModel, ReadoutPulse};
use specreg::spin::{
    detuning_for_fringe_maximum, fringe_amplitude_ratio, ramsey_with_crosstalk, RamseyConfig, ReadoutModel,
};
use specreg::units::{DEFAULT_T2_STAR_NS, FRINGE_MAXIMUM_TAU_NS, NV_ZPL_GHZ};

use super::{set, Context};
use crate::config::{grid, read_input, require_path, ConfigFile, PresetSpec};
use crate::error::{CliError, CliResult};
use crate::output::Output;

/// Ramsey fringes with a readout laser fired during the precession window,
/// one file per laser detuning plus the laser-free reference.
#[derive(Debug, Args)]
pub struct RamseyArgs {
    /// Preset name (msr, ssr) or path to a preset JSON file.
    #[arg(long)]
    preset: Option<String>,
    /// Laser detunings from the emitter's readout line.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    detunings_ghz: Option<Vec<f64>>,
    /// Emitter model JSON; defaults to a single line driven with the preset's Rabi frequency.
    #[arg(long)]
    emitter: Option<PathBuf>,
    #[arg(long)]
    tau_max_ns: Option<f64>,
    #[arg(long)]
    tau_points: Option<usize>,
    /// Microwave detuning; defaults to a fringe maximum at 386 ns.
    #[arg(long, allow_hyphen_values = true)]
    microwave_detuning_mhz: Option<f64>,
    #[arg(long, conflicts_with = "no_dephasing")]
    t2_star_ns: Option<f64>,
    #[arg(long)]
    no_dephasing: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamseyCmdConfig {
    pub preset: PresetSpec,
    pub detunings_ghz: Vec<f64>,
    pub emitter: Option<PathBuf>,
    pub tau_min_ns: f64,
    pub tau_max_ns: f64,
    pub tau_points: usize,
    /// Explicit τ grid; replaces the min/max/points grid.
    pub tau_grid_ns: Option<Vec<f64>>,
    pub microwave_detuning_mhz: f64,
    pub t2_star_ns: Option<f64>,
    pub readout: ReadoutModel,
}

impl Default for RamseyCmdConfig {
    fn default() -> Self {
        Self {
            preset: PresetSpec::default(),
            detunings_ghz: vec![0.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            emitter: None,
            tau_min_ns: 0.0,
            tau_max_ns: 2000.0,
            tau_points: 401,
            tau_grid_ns: None,
            microwave_detuning_mhz: detuning_for_fringe_maximum(FRINGE_MAXIMUM_TAU_NS),
            t2_star_ns: Some(DEFAULT_T2_STAR_NS),
            readout: ReadoutModel::default(),
        }
    }
}

pub fn run(ctx: &Context, args: RamseyArgs) -> CliResult<Output> {
    let mut file = ConfigFile::<RamseyCmdConfig>::load(ctx.config.as_deref())?;
    let seed = ctx.seed(file.seed);
    let mut cfg = std::mem::take(&mut file.value);
    file.rebase(&mut cfg.emitter);
    if let Some(p) = &args.preset {
        cfg.preset = PresetSpec::from_flag(p)?;
    }
    set(&mut cfg.detunings_ghz, args.detunings_ghz);
    if args.emitter.is_some() {
        cfg.emitter = args.emitter;
    }
    set(&mut cfg.tau_max_ns, args.tau_max_ns);
    set(&mut cfg.tau_points, args.tau_points);
    if args.tau_max_ns.is_some() || args.tau_points.is_some() {
        cfg.tau_grid_ns = None;
    }
    set(&mut cfg.microwave_detuning_mhz, args.microwave_detuning_mhz);
    if args.no_dephasing {
        cfg.t2_star_ns = None;
    } else if args.t2_star_ns.is_some() {
        cfg.t2_star_ns = args.t2_star_ns;
    }

    let preset = cfg.preset.preset()?.resolve()?;
    let emitter = match &cfg.emitter {
        Some(_) => {
            let path = require_path(&cfg.emitter, "emitter file")?;
            EmitterOpticalModel::from_json(&read_input(&path)?)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        }
        None => EmitterOpticalModel::single_line("emitter", NV_ZPL_GHZ, preset.omega, preset.gamma)?,
    };
    if cfg.detunings_ghz.is_empty() {
        return Err(CliError::input("detunings_ghz is empty"));
    }
    let mut sorted = cfg.detunings_ghz.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::input("detunings_ghz contains duplicates"));
    }
    let taus = match &cfg.tau_grid_ns {
        Some(t) => t.clone(),
        None => grid(cfg.tau_min_ns, cfg.tau_max_ns, cfg.tau_points)?,
    };
    let spin = RamseyConfig {
        detuning_mhz: cfg.microwave_detuning_mhz,
        t2_star_ns: cfg.t2_star_ns,
        readout: cfg.readout,
        ac_stark_phase: 0.0,
    };

    let reference = ramsey_with_crosstalk(&spin, &taus, None)?;
    let mut runs = Vec::new();
    for &d in &cfg.detunings_ghz {
        let pulse = ReadoutPulse::new(emitter.readout_frequency() + d, preset.duration_us)?;
        let breakdown = emitter_crosstalk(&emitter, &pulse, &ground_zero_populations())?;
        let result = ramsey_with_crosstalk(&spin, &taus, Some(&breakdown))?;
        let ratio = fringe_amplitude_ratio(&result, &reference)?;
        ctx.log(format!("detuning {d} GHz: crosstalk {}, fringe ratio {ratio}", breakdown.total));
        runs.push((d, breakdown.total, ratio, result));
    }

    let mut out = Output::new(ctx.out_dir.clone(), "ramsey", seed, &cfg)?;
    out.annotate("preset", preset)?;
    out.annotate("emitter", &emitter)?;
    out.csv("ramsey_reference.csv", |buf| reference.write_csv(buf))?;
    for (d, _, _, result) in &runs {
        out.csv(&format!("ramsey_detuning_{d}ghz.csv"), |buf| result.write_csv(buf))?;
    }
    out.csv("ramsey_summary.csv", |buf| {
        writeln!(buf, "detuning_ghz,gamma,amplitude_ratio")?;
        for (d, g, r, _) in &runs {
            writeln!(buf, "{d},{g},{r}")?;
        }
        Ok(())
    })?;
    Ok(out)
}
