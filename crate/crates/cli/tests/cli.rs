use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use specreg::fitting::{lorentzian_sum, GaussianSpot, LorentzianPeak, PsfImage, Spectrum};
use specreg::units::{DEFAULT_DECAY_RATE, DEFAULT_MSR_DURATION_US};
use tempfile::TempDir;

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn specreg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specreg"))
        .args(args)
        .env("SPECREG_OUT_DIR", dir)
        .env_remove("RAYON_NUM_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = specreg(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Rows of a metadata-headed CSV, keyed by column name.
fn read_csv(path: &Path) -> (Value, BTreeMap<String, Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let meta: Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let mut cols: BTreeMap<String, Vec<f64>> = header.iter().map(|h| (h.clone(), Vec::new())).collect();
    for line in lines {
        for (h, v) in header.iter().zip(line.split(',')) {
            cols.get_mut(h).unwrap().push(v.parse().unwrap());
        }
    }
    (meta, cols)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn crosstalk_curve_is_calibrated_and_symmetric() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["crosstalk", "--detuning-min-ghz", "-40", "--detuning-max-ghz", "40", "--points", "81"]);
    let (meta, cols) = read_csv(&tmp.path().join("crosstalk.csv"));
    assert!((meta["preset"]["omega"].as_f64().unwrap() - 2_016.078_544_384_445).abs() < 1e-6);
    assert_eq!(meta["seed"], 20_190_305);
    let (d, g) = (&cols["detuning_ghz"], &cols["gamma"]);
    let at16 = d.iter().position(|x| *x == 16.0).unwrap();
    assert!((g[at16] - 0.01).abs() < 1e-12);
    for i in 0..d.len() {
        assert_eq!(d[i], -d[d.len() - 1 - i]);
        assert!((g[i] - g[d.len() - 1 - i]).abs() < 1e-12);
    }

    ok(tmp.path(), &["crosstalk", "--detunings-ghz", "0,5,10"]);
    let (_, cols) = read_csv(&tmp.path().join("crosstalk.csv"));
    let on_resonance = -(-0.5 * DEFAULT_DECAY_RATE * DEFAULT_MSR_DURATION_US).exp_m1();
    assert!((cols["gamma"][0] - on_resonance).abs() < 1e-15);
}

#[test]
fn ramsey_fringes_match_closed_form_and_crosstalk_curve() {
    let tmp = TempDir::new().unwrap();
    let detunings = "0,4,8,16,30";
    ok(tmp.path(), &["ramsey", "--detunings-ghz", detunings, "--tau-max-ns", "1500", "--tau-points", "151"]);
    let (meta, reference) = read_csv(&tmp.path().join("ramsey_reference.csv"));
    let f_mw = meta["config"]["microwave_detuning_mhz"].as_f64().unwrap();
    let t2 = meta["config"]["t2_star_ns"].as_f64().unwrap();
    // bright 1, dark 0.7: C = 0.3·E / 1.7 with E the dephased fringe
    for (tau, c) in reference["tau_ns"].iter().zip(&reference["contrast"]) {
        let e = (-(tau / t2).powi(2)).exp() * (2.0 * std::f64::consts::PI * f_mw * tau * 1e-3).cos();
        assert!((c - 0.3 * e / 1.7).abs() < 1e-9, "τ={tau}: {c}");
    }
    let (_, flat) = read_csv(&tmp.path().join("ramsey_detuning_0ghz.csv"));
    assert!(flat["contrast"].iter().all(|c| c.abs() < 1e-9));

    ok(tmp.path(), &["crosstalk", "--detunings-ghz", detunings]);
    let (_, curve) = read_csv(&tmp.path().join("crosstalk.csv"));
    let (_, summary) = read_csv(&tmp.path().join("ramsey_summary.csv"));
    for (ratio, gamma) in summary["amplitude_ratio"].iter().zip(&curve["gamma"]) {
        assert!((ratio - (1.0 - gamma)).abs() < 1e-6);
    }
}

#[test]
fn cluster_example_stays_within_one_percent() {
    let tmp = TempDir::new().unwrap();
    let config = repo_file("configs/cluster-run.json");
    ok(tmp.path(), &["--config", config.to_str().unwrap(), "cluster"]);
    let report = read_json(&tmp.path().join("cluster_report.json"));
    for s in ["A", "B"] {
        let d = report["emitters"][s]["degradation"].as_f64().unwrap();
        assert!((0.0..=0.01 + 1e-12).contains(&d), "{s}: {d}");
    }
    assert!(tmp.path().join("cluster_A.csv").exists());
}

#[test]
fn cluster_without_lasers_reproduces_reference_and_resonant_spectator_goes_flat() {
    let tmp = TempDir::new().unwrap();
    let mut seq = read_json(&repo_file("configs/sequence.json"));
    let c = seq["timelines"]["C"].as_array_mut().unwrap();
    c[1]["resonant"] = Value::Bool(false);
    let seq_path = tmp.path().join("quiet.json");
    fs::write(&seq_path, seq.to_string()).unwrap();
    let cluster = repo_file("configs/cluster.json");
    ok(tmp.path(), &["cluster", "--cluster", cluster.to_str().unwrap(), "--sequence", seq_path.to_str().unwrap()]);
    let report = read_json(&tmp.path().join("cluster_report.json"));
    assert_eq!(report["crosstalk_sources"], 0);
    for s in ["A", "B", "C"] {
        assert_eq!(report["emitters"][s]["degradation"].as_f64().unwrap(), 0.0);
        let a = fs::read_to_string(tmp.path().join(format!("cluster_{s}.csv"))).unwrap();
        let b = fs::read_to_string(tmp.path().join(format!("cluster_{s}_reference.csv"))).unwrap();
        assert_eq!(a, b);
    }

    // move spectator A onto the driven line
    let mut cl = read_json(&cluster);
    cl["emitters"][1]["transitions"][0]["frequency_ghz"] = cl["emitters"][0]["transitions"][0]["frequency_ghz"].clone();
    let cl_path = tmp.path().join("coincident.json");
    fs::write(&cl_path, cl.to_string()).unwrap();
    let seq = repo_file("configs/sequence.json");
    ok(tmp.path(), &["cluster", "--cluster", cl_path.to_str().unwrap(), "--sequence", seq.to_str().unwrap()]);
    let (_, a) = read_csv(&tmp.path().join("cluster_A.csv"));
    assert!(a["contrast"].iter().all(|c| c.abs() < 1e-9));
}

fn seven_peak_file(dir: &Path) -> (PathBuf, Vec<LorentzianPeak>) {
    let peaks: Vec<LorentzianPeak> = (0..7)
        .map(|k| LorentzianPeak { center: 470_400.5 + 0.45 * k as f64, fwhm: 0.1, amplitude: 400.0 + 10.0 * k as f64 })
        .collect();
    let freq: Vec<f64> = (0..200).map(|i| 470_400.0 + 0.02 * i as f64).collect();
    let counts = freq.iter().map(|f| lorentzian_sum(*f, 10.0, &peaks)).collect();
    let path = dir.join("ple.csv");
    Spectrum::new(freq, counts).unwrap().write_csv(fs::File::create(&path).unwrap()).unwrap();
    (path, peaks)
}

#[test]
fn fit_ple_reports_seven_peaks() {
    let tmp = TempDir::new().unwrap();
    let (input, truth) = seven_peak_file(tmp.path());
    ok(tmp.path(), &["fit-ple", input.to_str().unwrap(), "--n-peaks", "7"]);
    let report = read_json(&tmp.path().join("fit_ple.json"));
    let peaks = report["peaks"].as_array().unwrap();
    assert_eq!(peaks.len(), 7);
    for (p, t) in peaks.iter().zip(&truth) {
        assert!((p["center"].as_f64().unwrap() - t.center).abs() < 1e-6);
    }
    assert_eq!(report["metadata"]["command"], "fit-ple");
    let (_, resid) = read_csv(&tmp.path().join("fit_ple_residuals.csv"));
    assert_eq!(resid["residual"].len(), 200);
}

#[test]
fn malformed_csv_exits_2_with_line_number() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.csv");
    fs::write(&path, "frequency_ghz,counts\n1.0,5\n1.1,6\n1.2,oops\n").unwrap();
    let out = specreg(tmp.path(), &["fit-ple", path.to_str().unwrap(), "--n-peaks", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let out = specreg(tmp.path(), &["fit-ple", "missing.csv", "--n-peaks", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn localize_noiseless_spot_has_tiny_errors() {
    let tmp = TempDir::new().unwrap();
    let spot = GaussianSpot { amplitude: 500.0, center_nm: (283.0, 301.0), sigma_nm: (150.0, 150.0), offset: 2.0 };
    let counts = (0..15)
        .flat_map(|r| (0..15).map(move |c| (r, c)))
        .map(|(r, c)| spot.value(40.0 * c as f64, 40.0 * r as f64))
        .collect();
    let image = PsfImage::new(40.0, (0.0, 0.0), 15, 15, counts).unwrap();
    let path = tmp.path().join("scan.txt");
    image.write_text(fs::File::create(&path).unwrap()).unwrap();
    ok(tmp.path(), &["localize", path.to_str().unwrap()]);
    let r = read_json(&tmp.path().join("localize.json"));
    assert!((r["center_nm"][0].as_f64().unwrap() - 283.0).abs() < 1e-6);
    assert!(r["std_error_center_nm"][0].as_f64().unwrap() < 1e-6);
    assert!(r["std_error_center_nm"][1].as_f64().unwrap() < 1e-6);
}

#[test]
fn yield_rows_and_reruns() {
    let tmp = TempDir::new().unwrap();
    let args = ["yield", "--n", "1,2,4", "--thresholds", "0.001,0.01", "--trials", "2000"];
    ok(tmp.path(), &args);
    let first = fs::read(tmp.path().join("yield.csv")).unwrap();
    let first_json = fs::read(tmp.path().join("yield.json")).unwrap();
    let (meta, cols) = read_csv(&tmp.path().join("yield.csv"));
    assert_eq!(meta["config"]["trials"], 2000);
    assert_eq!(meta["distribution"]["kind"], "surrogate");
    assert_eq!(&cols["yield"][..2], &[1.0, 1.0]);

    ok(tmp.path(), &args);
    assert_eq!(fs::read(tmp.path().join("yield.csv")).unwrap(), first);
    assert_eq!(fs::read(tmp.path().join("yield.json")).unwrap(), first_json);

    let out = Command::new(env!("CARGO_BIN_EXE_specreg"))
        .args(args)
        .env("SPECREG_OUT_DIR", tmp.path())
        .env("RAYON_NUM_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(tmp.path().join("yield.csv")).unwrap(), first);
}

#[test]
fn yield_matches_frozen_oracle_cell() {
    #[derive(serde::Deserialize)]
    struct Row {
        surrogate: String,
        preset: String,
        n: usize,
        threshold: f64,
        trials: u64,
        successes: u64,
    }
    let golden: Vec<Row> =
        serde_json::from_str(&fs::read_to_string(repo_file("crates/core/tests/data/yield_golden.json")).unwrap())
            .unwrap();
    let cell =
        golden.iter().find(|r| r.surrogate == "scd" && r.preset == "msr" && r.n == 3 && r.threshold == 0.01).unwrap();
    let tmp = TempDir::new().unwrap();
    let kde = repo_file("crates/core/tests/data/scd_surrogate_kde.json");
    ok(
        tmp.path(),
        &[
            "yield",
            "--kde",
            kde.to_str().unwrap(),
            "--preset",
            "msr",
            "--n",
            "3",
            "--thresholds",
            "0.01",
            "--trials",
            "200000",
        ],
    );
    let (_, cols) = read_csv(&tmp.path().join("yield.csv"));
    let p_ref = cell.successes as f64 / cell.trials as f64;
    let p = cols["yield"][0];
    let se = (p * (1.0 - p) / 2e5 + p_ref * (1.0 - p_ref) / cell.trials as f64).sqrt();
    assert!((p - p_ref).abs() < 4.0 * se, "{p} vs {p_ref}");
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(&cfg, r#"{"surrogate": "pcd", "n_values": [1, 2], "thresholds": [0.01], "trials": 500, "seed": 11}"#)
        .unwrap();
    ok(tmp.path(), &["--config", cfg.to_str().unwrap(), "yield", "--trials", "300"]);
    let (meta, _) = read_csv(&tmp.path().join("yield.csv"));
    assert_eq!(meta["config"]["trials"], 300);
    assert_eq!(meta["config"]["surrogate"], "pcd");
    assert_eq!(meta["seed"], 11);
    ok(tmp.path(), &["--config", cfg.to_str().unwrap(), "--seed", "12", "yield"]);
    let (meta, _) = read_csv(&tmp.path().join("yield.csv"));
    assert_eq!(meta["seed"], 12);

    fs::write(&cfg, r#"{"trails": 500}"#).unwrap();
    let out = specreg(tmp.path(), &["--config", cfg.to_str().unwrap(), "yield"]);
    assert_eq!(out.status.code(), Some(2));
    let out = specreg(tmp.path(), &["yield", "--trials", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_dist_exports_loadable_model() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("zpl.csv");
    let rows: String = (0..50).map(|i| format!("{},s{}\n", 470_400.0 + 3.0 * i as f64, i / 2)).collect();
    fs::write(&data, format!("# measured\nfrequency_ghz,site_id\n{rows}")).unwrap();
    let args = ["sample-dist", "--dataset", data.to_str().unwrap(), "--weighting", "per-site", "--count", "500"];
    ok(tmp.path(), &args);
    let model =
        specreg::ensemble::KernelDensityModel::from_json(&fs::read_to_string(tmp.path().join("kde.json")).unwrap())
            .unwrap();
    assert_eq!(model.samples_ghz.len(), 50);
    let draws = specreg::ensemble::load_zpl_dataset(fs::File::open(tmp.path().join("samples.csv")).unwrap()).unwrap();
    assert_eq!(draws.len(), 500);
    let (_, density) = read_csv(&tmp.path().join("density.csv"));
    assert_eq!(density["density_per_ghz"].len(), 512);
    let before = fs::read(tmp.path().join("samples.csv")).unwrap();
    ok(tmp.path(), &args);
    assert_eq!(fs::read(tmp.path().join("samples.csv")).unwrap(), before);
}
