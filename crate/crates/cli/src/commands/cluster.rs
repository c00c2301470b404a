use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use specreg::spin::{
    crosstalk_source_count, fringe_amplitude_ratio, run_cluster_sequence, Cluster, ClusterSequenceSpec,
};

use super::Context;
use crate::config::{read_input, require_path, ConfigFile};
use crate::error::{CliError, CliResult};
use crate::output::{file_stem, Output};

/// Runs a multi-emitter timeline and compares every emitter's fringe with
/// the same timeline minus its laser pulses.
#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Cluster JSON: emitters with optical model and spin parameters.
    #[arg(long)]
    cluster: Option<PathBuf>,
    /// Sequence JSON: τ grid and per-emitter event timelines.
    #[arg(long)]
    sequence: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterCmdConfig {
    pub cluster: Option<PathBuf>,
    pub sequence: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct EmitterReport {
    /// Least-squares fringe scale relative to the laser-free run.
    amplitude_ratio: Option<f64>,
    degradation: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ClusterReport {
    crosstalk_sources: usize,
    emitters: BTreeMap<String, EmitterReport>,
}

pub fn run(ctx: &Context, args: ClusterArgs) -> CliResult<Output> {
    let mut file = ConfigFile::<ClusterCmdConfig>::load(ctx.config.as_deref())?;
    let seed = ctx.seed(file.seed);
    let mut cfg = std::mem::take(&mut file.value);
    file.rebase(&mut cfg.cluster);
    file.rebase(&mut cfg.sequence);
    if args.cluster.is_some() {
        cfg.cluster = args.cluster;
    }
    if args.sequence.is_some() {
        cfg.sequence = args.sequence;
    }
    let cluster_path = require_path(&cfg.cluster, "cluster file")?;
    let sequence_path = require_path(&cfg.sequence, "sequence file")?;
    let cluster = Cluster::from_json(&read_input(&cluster_path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", cluster_path.display())))?;
    let spec = ClusterSequenceSpec::from_json(&read_input(&sequence_path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", sequence_path.display())))?;

    let run = run_cluster_sequence(&cluster, &spec)?;
    let reference = run_cluster_sequence(&cluster, &spec.without_crosstalk())?;
    let mut emitters = BTreeMap::new();
    for (label, result) in &run.results {
        // a flat reference (e.g. a driven emitter at a node) has no fringe to compare
        let ratio = fringe_amplitude_ratio(result, &reference.results[label]).ok();
        ctx.log(format!("{label}: fringe ratio {ratio:?}"));
        emitters.insert(label.clone(), EmitterReport { amplitude_ratio: ratio, degradation: ratio.map(|r| 1.0 - r) });
    }
    let report = ClusterReport { crosstalk_sources: crosstalk_source_count(&spec), emitters };

    let mut out = Output::new(ctx.out_dir.clone(), "cluster", seed, &cfg)?;
    for (label, result) in &run.results {
        let stem = file_stem(label);
        out.csv(&format!("cluster_{stem}.csv"), |buf| result.write_csv(buf))?;
        out.csv(&format!("cluster_{stem}_reference.csv"), |buf| reference.results[label].write_csv(buf))?;
    }
    out.json("cluster_report.json", &report)?;
    Ok(out)
}
