use serde::Deserialize;
use specreg::crosstalk::transition_crosstalk;
use specreg::ensemble::KernelDensityModel;
use specreg::units::ghz_to_angular_mhz;
use specreg::yield_mc::*;

const F0: f64 = 470_400.0;

fn sweep(
    model: &KernelDensityModel,
    preset: &ReadoutPreset,
    n_values: Vec<usize>,
    thresholds: Vec<f64>,
    trials: usize,
    seed: u64,
) -> YieldTable {
    yield_sweep(model, preset, &SweepConfig { n_values, thresholds, trials, seed, mode: ViabilityMode::WorstCase })
        .unwrap()
}

/// Exact yield for a weighted discrete distribution by enumerating every
/// n-tuple and checking every ordered pair directly.
fn enumerate_yield(atoms: &[(f64, f64)], n: usize, r: &ResolvedPreset, threshold: f64) -> f64 {
    let k = atoms.len();
    let mut total = 0.0;
    for code in 0..k.pow(n as u32) {
        let (mut c, mut p, mut f) = (code, 1.0, Vec::new());
        for _ in 0..n {
            let (freq, w) = atoms[c % k];
            p *= w;
            f.push(freq);
            c /= k;
        }
        let ok = (0..n).all(|a| {
            (0..n).all(|b| {
                a == b
                    || transition_crosstalk(r.omega, ghz_to_angular_mhz(f[a] - f[b]), r.gamma, r.duration_us).unwrap()
                        <= threshold
            })
        });
        if ok {
            total += p;
        }
    }
    total
}

fn atom_model(atoms: &[(f64, f64)]) -> KernelDensityModel {
    KernelDensityModel {
        bandwidth_ghz: 1e-9,
        samples_ghz: atoms.iter().map(|a| a.0).collect(),
        weights: Some(atoms.iter().map(|a| a.1).collect()),
    }
}

#[test]
fn three_atom_distribution_matches_enumeration() {
    let preset = ReadoutPreset::msr();
    let r = preset.resolve().unwrap();
    let safe = r.min_safe_detuning(0.01).unwrap();
    // atoms 0 and 2 are too close to each other; atom 1 is safe from both
    let atoms = [(F0, 0.5), (F0 + 3.0 * safe, 0.3), (F0 + 0.5 * safe, 0.2)];
    let trials = 100_000;
    let table = sweep(&atom_model(&atoms), &preset, vec![1, 2, 3, 4], vec![0.01], trials, 42);
    for row in &table.rows {
        let exact = enumerate_yield(&atoms, row.n_emitters, &r, 0.01);
        let se = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!((row.yield_ - exact).abs() <= 3.0 * se + 1e-12, "n={} mc={} exact={exact}", row.n_emitters, row.yield_);
    }
}

#[test]
fn two_point_distribution() {
    let preset = ReadoutPreset::ssr();
    let r = preset.resolve().unwrap();
    let d = 2.0 * r.min_safe_detuning(0.01).unwrap();
    let atoms = [(F0, 0.5), (F0 + d, 0.5)];
    let trials = 20_000;
    let table = sweep(&atom_model(&atoms), &preset, vec![1, 2, 3], vec![0.01], trials, 8);
    // by hand: n=1 always, n=2 needs distinct atoms, n=3 always collides
    for (row, exact) in table.rows.iter().zip([1.0, 0.5, 0.0]) {
        let se = (exact * (1.0f64 - exact) / trials as f64).sqrt();
        assert!((row.yield_ - exact).abs() <= 3.0 * se, "{row:?}");
    }
}

fn scd_model() -> KernelDensityModel {
    KernelDensityModel::from_json(include_str!("data/scd_surrogate_kde.json")).unwrap()
}

#[test]
fn table_monotone_exactly() {
    let thresholds = vec![1e-4, 1e-3, 1e-2, 0.1, 1.0];
    for preset in [ReadoutPreset::msr(), ReadoutPreset::ssr()] {
        let t = sweep(&scd_model(), &preset, vec![1, 2, 3, 5, 9], thresholds.clone(), 5_000, 3);
        for (i, row) in t.rows.iter().enumerate() {
            assert!(row.successes <= row.trials);
            assert!(row.ci95.0 <= row.yield_ && row.yield_ <= row.ci95.1);
            if row.n_emitters == 1 || row.gamma_threshold >= 1.0 {
                assert_eq!(row.yield_, 1.0);
            }
            let j = i % thresholds.len();
            if j > 0 {
                assert!(row.successes >= t.rows[i - 1].successes);
            }
            if i >= thresholds.len() {
                assert!(row.successes <= t.rows[i - thresholds.len()].successes);
            }
        }
    }
}

#[test]
fn ssr_dominates_msr_cellwise() {
    let thresholds = vec![1e-3, 1e-2, 5e-2];
    let (msr, ssr) = (ReadoutPreset::msr(), ReadoutPreset::ssr());
    for &thr in &thresholds {
        assert!(
            ssr.resolve().unwrap().min_safe_detuning(thr).unwrap()
                < msr.resolve().unwrap().min_safe_detuning(thr).unwrap()
        );
    }
    let a = sweep(&scd_model(), &msr, vec![2, 3, 6], thresholds.clone(), 20_000, 5);
    let b = sweep(&scd_model(), &ssr, vec![2, 3, 6], thresholds, 20_000, 5);
    for (m, s) in a.rows.iter().zip(&b.rows) {
        assert!(s.successes >= m.successes, "{m:?} vs {s:?}");
    }
}

#[test]
fn deterministic_across_thread_counts() {
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| sweep(&scd_model(), &ReadoutPreset::msr(), vec![2, 3, 4], vec![0.01, 0.05], 30_000, 99))
    };
    let one = run(1);
    let json = serde_json::to_string(&one).unwrap();
    for t in [2, 3, 8] {
        assert_eq!(serde_json::to_string(&run(t)).unwrap(), json);
    }
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    one.write_csv(&mut csv_a).unwrap();
    run(4).write_csv(&mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
    assert!(String::from_utf8(csv_a).unwrap().starts_with("n,threshold,trials,successes,yield,ci_lo,ci_hi\n"));
}

#[test]
fn single_estimate_agrees_with_sweep_prefix() {
    let m = scd_model();
    let p = ReadoutPreset::msr();
    let e = estimate_yield(&m, 3, &p, 0.01, 2_000, 17).unwrap();
    let t = sweep(&m, &p, vec![3, 6], vec![0.01], 2_000, 17);
    assert_eq!(e, t.rows[0]);
}

#[derive(Deserialize)]
struct GoldenRow {
    surrogate: String,
    preset: String,
    n: usize,
    threshold: f64,
    trials: u64,
    successes: u64,
}

#[test]
fn golden_surrogate_yields_moderate_trials() {
    // full 10⁶-trial comparison lives in the acceptance suite
    let rows: Vec<GoldenRow> = serde_json::from_str(include_str!("data/yield_golden.json")).unwrap();
    let pcd = KernelDensityModel::from_json(include_str!("data/pcd_surrogate_kde.json")).unwrap();
    for g in rows {
        let model = if g.surrogate == "scd" { scd_model() } else { pcd.clone() };
        let trials = 100_000;
        let e = estimate_yield(&model, g.n, &ReadoutPreset::by_name(&g.preset).unwrap(), g.threshold, trials, 2024)
            .unwrap();
        let p_ref = g.successes as f64 / g.trials as f64;
        let se = (p_ref * (1.0 - p_ref) / trials as f64 + p_ref * (1.0 - p_ref) / g.trials as f64).sqrt();
        assert!((e.yield_ - p_ref).abs() < 3.0 * se, "{} {} n={}: {} vs {p_ref}", g.surrogate, g.preset, g.n, e.yield_);
    }
}

#[test]
fn ordered_mode_never_stricter() {
    let m = scd_model();
    let p = ReadoutPreset::msr();
    let cfg = |mode| SweepConfig { n_values: vec![2, 4], thresholds: vec![0.01], trials: 2_000, seed: 4, mode };
    let w = yield_sweep(&m, &p, &cfg(ViabilityMode::WorstCase)).unwrap();
    let o = yield_sweep(&m, &p, &cfg(ViabilityMode::Ordered)).unwrap();
    for (a, b) in w.rows.iter().zip(&o.rows) {
        assert!(b.successes >= a.successes);
    }
}
