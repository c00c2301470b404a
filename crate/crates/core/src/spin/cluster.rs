//! Multi-emitter gate sequences with readout-induced crosstalk.
//!
//! Each emitter follows its own timeline of gate events. A resonant readout
//! (or an explicit crosstalk laser) aimed at one emitter applies the
//! projection channel to every other emitter in the cluster, with the
//! probability computed from that emitter's optical transitions. The channel
//! is applied as a point event at the pulse midpoint. Because it scales the
//! coherence uniformly in phase it commutes with free precession, so only its
//! order relative to rotations matters.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ramsey::{validate_tau_grid, SequenceResult};
use super::state::{Axis, QubitState, ReadoutModel};
use crate::crosstalk::{
    emitter_crosstalk, ground_zero_populations, CrosstalkBreakdown, EmitterOpticalModel, ReadoutPulse,
};
use crate::units::{phase_mhz_ns, DEFAULT_MSR_DURATION_US, DEFAULT_T2_STAR_NS};
use crate::{Error, Result};

/// A time that may scale with the swept sequence parameter τ:
/// either a plain number of ns or `{"ns": a, "tau": b}` meaning a + b·τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeExpr {
    Fixed(f64),
    Linear {
        #[serde(default)]
        ns: f64,
        #[serde(default)]
        tau: f64,
    },
}

impl TimeExpr {
    pub fn tau(scale: f64) -> Self {
        TimeExpr::Linear { ns: 0.0, tau: scale }
    }

    pub fn at(&self, tau_ns: f64) -> f64 {
        match *self {
            TimeExpr::Fixed(ns) => ns,
            TimeExpr::Linear { ns, tau } => ns + tau * tau_ns,
        }
    }
}

impl From<f64> for TimeExpr {
    fn from(ns: f64) -> Self {
        TimeExpr::Fixed(ns)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GateEvent {
    /// Microwave rotation. Give either `angle_rad` (instantaneous pulse) or
    /// `rabi_mhz` with `duration_ns` (driven for that long).
    Rotation {
        t_ns: TimeExpr,
        axis: Axis,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle_rad: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rabi_mhz: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration_ns: Option<TimeExpr>,
    },
    Precess {
        t_ns: TimeExpr,
        duration_ns: TimeExpr,
    },
    /// Laser tuned to `target`'s readout line (unless a frequency is given)
    /// starting at `t_ns`; projects every other emitter at its midpoint.
    Laser {
        t_ns: TimeExpr,
        target: String,
        duration_us: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        laser_frequency_ghz: Option<f64>,
    },
    /// Measurement of the timeline's emitter, with `t_ns` the pulse centre.
    /// A resonant readout also projects every other emitter at that time.
    Readout {
        t_ns: TimeExpr,
        #[serde(default)]
        resonant: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration_us: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        laser_frequency_ghz: Option<f64>,
    },
}

impl GateEvent {
    fn is_crosstalk_source(&self) -> bool {
        matches!(self, GateEvent::Laser { .. } | GateEvent::Readout { resonant: true, .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinParams {
    #[serde(default)]
    pub detuning_mhz: f64,
    #[serde(default = "default_t2")]
    pub t2_star_ns: Option<f64>,
    #[serde(default)]
    pub readout: ReadoutModel,
}

fn default_t2() -> Option<f64> {
    Some(DEFAULT_T2_STAR_NS)
}

impl Default for SpinParams {
    fn default() -> Self {
        Self { detuning_mhz: 0.0, t2_star_ns: default_t2(), readout: ReadoutModel::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEmitter {
    #[serde(flatten)]
    pub model: EmitterOpticalModel,
    #[serde(default)]
    pub spin: SpinParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub emitters: Vec<ClusterEmitter>,
}

impl Cluster {
    pub fn new(emitters: Vec<ClusterEmitter>) -> Result<Self> {
        let c = Self { emitters };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let mut labels = BTreeSet::new();
        for e in &self.emitters {
            e.model.validate()?;
            if !labels.insert(e.model.label.as_str()) {
                return Err(Error::domain(format!("duplicate emitter label `{}`", e.model.label)));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn get(&self, label: &str) -> Result<&ClusterEmitter> {
        self.emitters.iter().find(|e| e.model.label == label).ok_or_else(|| Error::UnknownEmitter(label.to_string()))
    }
}

/// Per-emitter timelines swept over a common τ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSequenceSpec {
    pub tau_grid_ns: Vec<f64>,
    pub timelines: BTreeMap<String, Vec<GateEvent>>,
}

impl ClusterSequenceSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Same sequence with every laser interval removed and every resonant
    /// readout turned into a passive one.
    pub fn without_crosstalk(&self) -> Self {
        let timelines = self
            .timelines
            .iter()
            .map(|(k, events)| {
                let kept = events
                    .iter()
                    .filter(|e| !matches!(e, GateEvent::Laser { .. }))
                    .map(|e| match e {
                        GateEvent::Readout { t_ns, duration_us, laser_frequency_ghz, .. } => GateEvent::Readout {
                            t_ns: *t_ns,
                            resonant: false,
                            duration_us: *duration_us,
                            laser_frequency_ghz: *laser_frequency_ghz,
                        },
                        other => other.clone(),
                    })
                    .collect();
                (k.clone(), kept)
            })
            .collect();
        Self { tau_grid_ns: self.tau_grid_ns.clone(), timelines }
    }

    /// Rabi drive on `driven` for τ, then a Ramsey sequence of length τ on
    /// each spectator, with a resonant readout of `driven` at the middle of
    /// the spectators' precession window.
    pub fn interleaved_rabi_ramsey(
        driven: &str,
        spectators: &[&str],
        rabi_mhz: f64,
        tau_grid_ns: Vec<f64>,
        readout_duration_us: f64,
    ) -> Self {
        let mut timelines = BTreeMap::new();
        timelines.insert(
            driven.to_string(),
            vec![
                GateEvent::Rotation {
                    t_ns: 0.0.into(),
                    axis: Axis::X,
                    angle_rad: None,
                    rabi_mhz: Some(rabi_mhz),
                    duration_ns: Some(TimeExpr::tau(1.0)),
                },
                GateEvent::Readout {
                    t_ns: TimeExpr::tau(1.5),
                    resonant: true,
                    duration_us: Some(readout_duration_us),
                    laser_frequency_ghz: None,
                },
            ],
        );
        for s in spectators {
            timelines.insert(
                s.to_string(),
                vec![
                    GateEvent::Rotation {
                        t_ns: TimeExpr::tau(1.0),
                        axis: Axis::X,
                        angle_rad: Some(0.5 * PI),
                        rabi_mhz: None,
                        duration_ns: None,
                    },
                    GateEvent::Precess { t_ns: TimeExpr::tau(1.0), duration_ns: TimeExpr::tau(1.0) },
                    GateEvent::Rotation {
                        t_ns: TimeExpr::tau(2.0),
                        axis: Axis::X,
                        angle_rad: Some(0.5 * PI),
                        rabi_mhz: None,
                        duration_ns: None,
                    },
                    GateEvent::Readout {
                        t_ns: TimeExpr::tau(2.0),
                        resonant: false,
                        duration_us: None,
                        laser_frequency_ghz: None,
                    },
                ],
            );
        }
        Self { tau_grid_ns, timelines }
    }
}

/// Sequence results per emitter label, for every emitter that has a timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRun {
    pub results: BTreeMap<String, SequenceResult>,
}

#[derive(Debug, Clone)]
enum OpKind {
    Rotate(Axis, f64),
    Precess(f64),
    Channel(CrosstalkBreakdown),
    Readout,
}

#[derive(Debug, Clone)]
struct Op {
    time: f64,
    // gates before channels before readouts at equal times
    rank: u8,
    kind: OpKind,
}

struct LaserShot {
    midpoint_ns: f64,
    target: String,
    pulse: ReadoutPulse,
}

fn concrete_ops(events: &[GateEvent], tau: f64, label: &str) -> Result<Vec<Op>> {
    let mut ops = Vec::new();
    let mut intervals = Vec::new();
    for e in events {
        match e {
            GateEvent::Rotation { t_ns, axis, angle_rad, rabi_mhz, duration_ns } => {
                let t = t_ns.at(tau);
                let (angle, dur) = match (angle_rad, rabi_mhz, duration_ns) {
                    (Some(a), None, None) => (*a, 0.0),
                    (None, Some(f), Some(d)) => {
                        let d = d.at(tau);
                        (phase_mhz_ns(*f, d), d)
                    }
                    _ => {
                        return Err(Error::Config(format!(
                            "rotation on `{label}` needs either angle_rad or rabi_mhz with duration_ns"
                        )))
                    }
                };
                intervals.push((t, t + dur));
                ops.push(Op { time: t, rank: 0, kind: OpKind::Rotate(*axis, angle) });
            }
            GateEvent::Precess { t_ns, duration_ns } => {
                let (t, d) = (t_ns.at(tau), duration_ns.at(tau));
                if d < 0.0 {
                    return Err(Error::Config(format!("negative precession on `{label}`")));
                }
                intervals.push((t, t + d));
                ops.push(Op { time: t, rank: 0, kind: OpKind::Precess(d) });
            }
            GateEvent::Readout { t_ns, .. } => {
                ops.push(Op { time: t_ns.at(tau), rank: 2, kind: OpKind::Readout });
            }
            GateEvent::Laser { .. } => {}
        }
    }
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in intervals.windows(2) {
        if w[1].0 < w[0].1 - 1e-9 {
            return Err(Error::Config(format!(
                "overlapping gates on `{label}` at τ = {tau} ns ({} ns < {} ns)",
                w[1].0, w[0].1
            )));
        }
    }
    Ok(ops)
}

fn laser_shots(cluster: &Cluster, spec: &ClusterSequenceSpec, tau: f64) -> Result<Vec<LaserShot>> {
    let mut shots = Vec::new();
    for (owner, events) in &spec.timelines {
        for e in events {
            let (midpoint, target, duration, freq) = match e {
                GateEvent::Laser { t_ns, target, duration_us, laser_frequency_ghz } => {
                    (t_ns.at(tau) + 500.0 * duration_us, target.as_str(), *duration_us, *laser_frequency_ghz)
                }
                GateEvent::Readout { t_ns, resonant: true, duration_us, laser_frequency_ghz } => {
                    (t_ns.at(tau), owner.as_str(), duration_us.unwrap_or(DEFAULT_MSR_DURATION_US), *laser_frequency_ghz)
                }
                _ => continue,
            };
            let target_model = &cluster.get(target)?.model;
            let freq = freq.unwrap_or_else(|| target_model.readout_frequency());
            shots.push(LaserShot {
                midpoint_ns: midpoint,
                target: target.to_string(),
                pulse: ReadoutPulse::new(freq, duration)?,
            });
        }
    }
    Ok(shots)
}

fn simulate(ops: &[Op], spin: &SpinParams, bump_index: Option<usize>) -> QubitState {
    let mut s = QubitState::ground();
    for (i, op) in ops.iter().enumerate() {
        match &op.kind {
            OpKind::Rotate(axis, angle) => {
                let extra = if Some(i) == bump_index { PI } else { 0.0 };
                s = s.apply_rotation(*axis, angle + extra);
            }
            OpKind::Precess(d) => s = s.free_precession(spin.detuning_mhz, *d, spin.t2_star_ns),
            OpKind::Channel(b) => s = s.apply_crosstalk_channel(b),
            OpKind::Readout => return s,
        }
    }
    s
}

/// Simulate every emitter's timeline over the τ grid.
///
/// For each τ the sequence is run twice per emitter: once as written and
/// once with the last rotation before the readout advanced by π (the
/// π/2 → 3π/2 substitution for a Ramsey). The pair gives the contrast.
pub fn run_cluster_sequence(cluster: &Cluster, spec: &ClusterSequenceSpec) -> Result<ClusterRun> {
    cluster.validate()?;
    validate_tau_grid(&spec.tau_grid_ns)?;
    for label in spec.timelines.keys() {
        cluster.get(label)?;
    }

    let mut results: BTreeMap<String, SequenceResult> = spec
        .timelines
        .keys()
        .map(|k| {
            (
                k.clone(),
                SequenceResult {
                    tau_ns: Vec::new(),
                    contrast: Vec::new(),
                    f_pi2: Vec::new(),
                    f_3pi2: Vec::new(),
                    population_1: Vec::new(),
                },
            )
        })
        .collect();

    let pops = ground_zero_populations();
    for &tau in &spec.tau_grid_ns {
        let shots = laser_shots(cluster, spec, tau)?;
        for (label, events) in &spec.timelines {
            let emitter = cluster.get(label)?;
            let mut ops = concrete_ops(events, tau, label)?;
            for shot in shots.iter().filter(|s| s.target != *label) {
                let b = emitter_crosstalk(&emitter.model, &shot.pulse, &pops)?;
                ops.push(Op { time: shot.midpoint_ns, rank: 1, kind: OpKind::Channel(b) });
            }
            ops.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.rank.cmp(&b.rank)));

            let readout_at = ops.iter().position(|o| matches!(o.kind, OpKind::Readout)).unwrap_or(ops.len());
            let last_rotation = ops[..readout_at].iter().rposition(|o| matches!(o.kind, OpKind::Rotate(..)));

            let nominal = simulate(&ops, &emitter.spin, None);
            let shifted = simulate(&ops, &emitter.spin, last_rotation);
            let readout = &emitter.spin.readout;
            results.get_mut(label).expect("label present").push(
                tau,
                readout.fluorescence(&nominal),
                readout.fluorescence(&shifted),
                nominal.population_1(),
            );
        }
    }
    Ok(ClusterRun { results })
}

/// Spin parameters for `config`-style Ramsey runs inside a cluster.
pub fn spin_params(detuning_mhz: f64, t2_star_ns: Option<f64>, readout: ReadoutModel) -> SpinParams {
    SpinParams { detuning_mhz, t2_star_ns, readout }
}

/// Laser events present in a sequence, for reporting.
pub fn crosstalk_source_count(spec: &ClusterSequenceSpec) -> usize {
    spec.timelines.values().flatten().filter(|e| e.is_crosstalk_source()).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crosstalk::min_safe_detuning;
    use crate::spin::ramsey::fringe_amplitude_ratio;
    use crate::units::DEFAULT_DECAY_RATE;

    const F0: f64 = 470_400.0;

    fn emitter(label: &str, offset_ghz: f64, rabi: f64, detuning_mhz: f64) -> ClusterEmitter {
        ClusterEmitter {
            model: EmitterOpticalModel::single_line(label, F0 + offset_ghz, rabi, DEFAULT_DECAY_RATE).unwrap(),
            spin: SpinParams { detuning_mhz, ..SpinParams::default() },
        }
    }

    fn taus() -> Vec<f64> {
        (1..=60).map(|i| i as f64 * 10.0).collect()
    }

    #[test]
    fn rabi_curve_matches_unitary_composition() {
        let rabi_mhz = 4.0;
        let cluster = Cluster::new(vec![emitter("C", 0.0, 2000.0, 0.0), emitter("A", 40.0, 2000.0, 2.6)]).unwrap();
        let spec = ClusterSequenceSpec::interleaved_rabi_ramsey("C", &["A"], rabi_mhz, taus(), 0.6);
        let run = run_cluster_sequence(&cluster, &spec).unwrap();
        let c = &run.results["C"];
        for (tau, p1) in c.tau_ns.iter().zip(&c.population_1) {
            // brute force: many small X rotations
            let steps = 64;
            let mut s = QubitState::ground();
            for _ in 0..steps {
                s = s.apply_rotation(Axis::X, phase_mhz_ns(rabi_mhz, tau / steps as f64));
            }
            assert!((p1 - s.population_1()).abs() < 1e-12);
            let closed = (phase_mhz_ns(rabi_mhz, *tau) / 2.0).sin().powi(2);
            assert!((p1 - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn removing_crosstalk_equals_single_emitter_runs() {
        let cluster = Cluster::new(vec![
            emitter("C", 0.0, 2000.0, 0.0),
            emitter("A", 2.0, 2000.0, 2.6),
            emitter("B", -3.0, 2000.0, 1.9),
        ])
        .unwrap();
        let spec = ClusterSequenceSpec::interleaved_rabi_ramsey("C", &["A", "B"], 3.0, taus(), 0.6);
        let clean = run_cluster_sequence(&cluster, &spec.without_crosstalk()).unwrap();
        for e in &cluster.emitters {
            let label = &e.model.label;
            let alone = Cluster::new(vec![e.clone()]).unwrap();
            let single = ClusterSequenceSpec {
                tau_grid_ns: spec.tau_grid_ns.clone(),
                timelines: BTreeMap::from([(label.clone(), spec.without_crosstalk().timelines[label].clone())]),
            };
            let r = run_cluster_sequence(&alone, &single).unwrap();
            for (a, b) in r.results[label].contrast.iter().zip(&clean.results[label].contrast) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // and with crosstalk the close spectators lose contrast
        let dirty = run_cluster_sequence(&cluster, &spec).unwrap();
        let ratio = fringe_amplitude_ratio(&dirty.results["A"], &clean.results["A"]).unwrap();
        assert!(ratio < 0.9, "{ratio}");
    }

    #[test]
    fn safe_spectators_lose_at_most_one_percent() {
        let (rabi, t) = (2016.0785, 0.6);
        let safe = min_safe_detuning(rabi, DEFAULT_DECAY_RATE, t, 0.01).unwrap();
        let cluster = Cluster::new(vec![
            emitter("C", 0.0, rabi, 0.0),
            emitter("A", safe, rabi, 2.59),
            emitter("B", -safe * 1.5, rabi, 1.7),
        ])
        .unwrap();
        let spec = ClusterSequenceSpec::interleaved_rabi_ramsey("C", &["A", "B"], 3.0, taus(), t);
        let run = run_cluster_sequence(&cluster, &spec).unwrap();
        let reference = run_cluster_sequence(&cluster, &spec.without_crosstalk()).unwrap();
        for s in ["A", "B"] {
            let ratio = fringe_amplitude_ratio(&run.results[s], &reference.results[s]).unwrap();
            assert!(1.0 - ratio <= 0.01 + 1e-12, "{s}: {ratio}");
            assert!(1.0 - ratio > 0.0);
        }
    }

    #[test]
    fn resonant_spectator_is_flat() {
        let cluster = Cluster::new(vec![emitter("C", 0.0, 2000.0, 0.0), emitter("A", 0.0, 2000.0, 2.6)]).unwrap();
        let spec = ClusterSequenceSpec::interleaved_rabi_ramsey("C", &["A"], 3.0, taus(), 0.6);
        let run = run_cluster_sequence(&cluster, &spec).unwrap();
        let a = &run.results["A"];
        assert!(a.contrast.iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn unknown_emitter_rejected() {
        let cluster = Cluster::new(vec![emitter("C", 0.0, 2000.0, 0.0)]).unwrap();
        let spec = ClusterSequenceSpec::interleaved_rabi_ramsey("C", &["Z"], 3.0, taus(), 0.6);
        assert!(matches!(run_cluster_sequence(&cluster, &spec), Err(Error::UnknownEmitter(l)) if l == "Z"));

        let mut spec = ClusterSequenceSpec::interleaved_rabi_ramsey("C", &[], 3.0, taus(), 0.6);
        spec.timelines.get_mut("C").unwrap().push(GateEvent::Laser {
            t_ns: 0.0.into(),
            target: "nope".into(),
            duration_us: 0.1,
            laser_frequency_ghz: None,
        });
        assert!(matches!(run_cluster_sequence(&cluster, &spec), Err(Error::UnknownEmitter(_))));
    }

    #[test]
    fn overlapping_gates_rejected() {
        let cluster = Cluster::new(vec![emitter("A", 0.0, 2000.0, 1.0)]).unwrap();
        let spec = ClusterSequenceSpec {
            tau_grid_ns: vec![100.0],
            timelines: BTreeMap::from([(
                "A".to_string(),
                vec![
                    GateEvent::Precess { t_ns: 0.0.into(), duration_ns: TimeExpr::tau(1.0) },
                    GateEvent::Rotation {
                        t_ns: 50.0.into(),
                        axis: Axis::X,
                        angle_rad: Some(1.0),
                        rabi_mhz: None,
                        duration_ns: None,
                    },
                ],
            )]),
        };
        assert!(matches!(run_cluster_sequence(&cluster, &spec), Err(Error::Config(_))));
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert!(Cluster::new(vec![emitter("A", 0.0, 1.0, 0.0), emitter("A", 1.0, 1.0, 0.0)]).is_err());
    }

    #[test]
    fn sequence_json_schema() {
        let text = r#"{
          "tau_grid_ns": [0, 100, 200],
          "timelines": {
            "A": [
              {"t_ns": 0, "kind": "rotation", "axis": "x", "angle_rad": 1.5707963267948966},
              {"t_ns": 0, "kind": "precess", "duration_ns": {"tau": 1}},
              {"t_ns": {"tau": 0.5}, "kind": "laser", "target": "C", "duration_us": 0.6},
              {"t_ns": {"tau": 1}, "kind": "rotation", "axis": "x", "angle_rad": 1.5707963267948966},
              {"t_ns": {"ns": 10, "tau": 1}, "kind": "readout"}
            ],
            "C": [{"t_ns": 0, "kind": "rotation", "axis": "x", "rabi_mhz": 5, "duration_ns": {"tau": 1}}]
          }
        }"#;
        let spec = ClusterSequenceSpec::from_json(text).unwrap();
        assert_eq!(crosstalk_source_count(&spec), 1);
        let back: ClusterSequenceSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let cluster = Cluster::from_json(&format!(
            r#"{{"emitters": [
                {{"label": "A", "transitions": [{{"ground": 0, "excited": "Ex", "frequency_ghz": {a},
                   "rabi_mhz": 2000, "branching_mhz": {{"0": 83.3}}}}], "spin": {{"detuning_mhz": 2.5}}}},
                {{"label": "C", "transitions": [{{"ground": 0, "excited": "Ex", "frequency_ghz": {c},
                   "rabi_mhz": 2000, "branching_mhz": {{"0": 83.3}}}}]}}
            ]}}"#,
            a = F0 + 30.0,
            c = F0
        ))
        .unwrap();
        let run = run_cluster_sequence(&cluster, &spec).unwrap();
        assert_eq!(run.results["A"].len(), 3);
        assert!(run.results["A"].contrast[0] > 0.0);
    }
}
