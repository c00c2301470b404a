use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use specreg::fitting::{
    fit_gaussian_psf, fit_lorentzian_sum, GaussianSpot, LorentzianPeak, PsfImage, Spectrum, Weighting,
};

use super::{set, Context};
use crate::config::{parse_enum, read_input, require_path, ConfigFile};
use crate::error::{CliError, CliResult};
use crate::output::Output;

/// Fits a PLE spectrum with a baseline plus a sum of Lorentzians.
#[derive(Debug, Args)]
pub struct FitPleArgs {
    /// Spectrum CSV with header `frequency_ghz,counts`.
    input: Option<PathBuf>,
    #[arg(long)]
    n_peaks: Option<usize>,
    /// uniform or poisson
    #[arg(long, value_parser = parse_enum::<Weighting>)]
    weighting: Option<Weighting>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitPleConfig {
    pub input: Option<PathBuf>,
    pub n_peaks: Option<usize>,
    pub weighting: Weighting,
    /// Starting peaks; found automatically when absent.
    pub init: Option<Vec<LorentzianPeak>>,
}

pub fn run_ple(ctx: &Context, args: FitPleArgs) -> CliResult<Output> {
    let mut file = ConfigFile::<FitPleConfig>::load(ctx.config.as_deref())?;
    let seed = ctx.seed(file.seed);
    let mut cfg = std::mem::take(&mut file.value);
    file.rebase(&mut cfg.input);
    if args.input.is_some() {
        cfg.input = args.input;
    }
    if args.n_peaks.is_some() {
        cfg.n_peaks = args.n_peaks;
    }
    set(&mut cfg.weighting, args.weighting);

    let path = require_path(&cfg.input, "spectrum file")?;
    let n_peaks = cfg
        .n_peaks
        .or(cfg.init.as_ref().map(Vec::len))
        .ok_or_else(|| CliError::input("missing n_peaks (flag --n-peaks or config field)"))?;
    let spectrum = Spectrum::read_csv(read_input(&path)?.as_bytes())
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let fit = fit_lorentzian_sum(&spectrum, n_peaks, cfg.init.as_deref(), cfg.weighting)?;
    for p in &fit.peaks {
        ctx.log(format!(
            "peak at {} ± {} GHz, fwhm {}, amplitude {}{}",
            p.peak.center,
            p.center_error,
            p.peak.fwhm,
            p.peak.amplitude,
            if p.suspect { " (suspect)" } else { "" }
        ));
    }

    let mut out = Output::new(ctx.out_dir.clone(), "fit-ple", seed, &cfg)?;
    out.json("fit_ple.json", &fit)?;
    out.csv("fit_ple_residuals.csv", |buf| fit.write_residual_csv(&spectrum, buf))?;
    Ok(out)
}

/// Localizes an emitter by fitting a 2D Gaussian to a confocal scan.
#[derive(Debug, Args)]
pub struct LocalizeArgs {
    /// Image text file: `pixel_size_nm=..,origin_x_nm=..,origin_y_nm=..` then rows of counts.
    input: Option<PathBuf>,
    /// uniform or poisson
    #[arg(long, value_parser = parse_enum::<Weighting>)]
    weighting: Option<Weighting>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeConfig {
    pub input: Option<PathBuf>,
    pub weighting: Weighting,
    pub init: Option<GaussianSpot>,
}

pub fn run_localize(ctx: &Context, args: LocalizeArgs) -> CliResult<Output> {
    let mut file = ConfigFile::<LocalizeConfig>::load(ctx.config.as_deref())?;
    let seed = ctx.seed(file.seed);
    let mut cfg = std::mem::take(&mut file.value);
    file.rebase(&mut cfg.input);
    if args.input.is_some() {
        cfg.input = args.input;
    }
    set(&mut cfg.weighting, args.weighting);

    let path = require_path(&cfg.input, "image file")?;
    let image = PsfImage::read_text(read_input(&path)?.as_bytes())
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let result = fit_gaussian_psf(&image, cfg.init, cfg.weighting)?;
    ctx.log(format!(
        "center ({}, {}) nm, precision {} nm",
        result.center_nm.0, result.center_nm.1, result.precision_nm
    ));

    let mut out = Output::new(ctx.out_dir.clone(), "localize", seed, &cfg)?;
    out.json("localize.json", &result)?;
    out.csv("localize_residuals.csv", |buf| result.write_residual_csv(&image, buf))?;
    Ok(out)
}
