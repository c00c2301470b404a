use rand_distr::{Distribution, Normal};
use specreg::ensemble::*;
use specreg::rng::substream;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn large_file_round_trip() {
    let d = SCD_SURROGATE.generate(1).unwrap();
    assert_eq!(d.len(), 406);
    let mut buf = Vec::new();
    d.write_csv(&mut buf).unwrap();
    let back = load_zpl_dataset(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 406);
    assert_eq!(back, d);
}

#[test]
fn kde_spread_tracks_source_gaussian() {
    let sigma = 60.0;
    let normal = Normal::new(470_400.0, sigma).unwrap();
    let mut rng = substream(5, 0);
    let data = ZplDataset::new((0..10_000).map(|_| normal.sample(&mut rng)).collect(), None).unwrap();
    let m = kde_fit(&data, Bandwidth::AUTO, SampleWeighting::PerTransition).unwrap();
    assert!((m.variance().sqrt() / sigma - 1.0).abs() < 0.03);
}

#[test]
fn sampler_moments_match_model() {
    let m = kde_fit(&PCD_SURROGATE.generate(2).unwrap(), Bandwidth::AUTO, SampleWeighting::PerTransition).unwrap();
    let n = 100_000;
    let draws = sample(&m, 77, n).unwrap();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let (mu, s2) = (m.mean(), m.variance());
    assert!((mean - mu).abs() < 3.0 * (s2 / n as f64).sqrt());
    // standard error of the sample variance, Gaussian-mixture kurtosis ~ 3
    let se_var = s2 * (2.0 / (n - 1) as f64).sqrt() * 1.5;
    assert!((var - s2).abs() < 3.0 * se_var, "{var} vs {s2}");
}

#[test]
fn sampler_passes_ks() {
    let m = kde_fit(&SCD_SURROGATE.generate(3).unwrap(), Bandwidth::AUTO, SampleWeighting::PerTransition).unwrap();
    let draws = sample(&m, 12, 100_000).unwrap();
    let d = ks_statistic(&draws, |x| m.cdf(x));
    assert!(d < ks_critical_value(0.01, draws.len()), "{d}");
    assert!((m.integral() - 1.0).abs() < 1e-6);
}

#[test]
fn per_site_sampler_passes_ks() {
    let base = SCD_SURROGATE.generate(4).unwrap();
    let ids = (0..base.len()).map(|i| format!("s{}", i / 3 + (i % 7 == 0) as usize)).collect();
    let d = ZplDataset::new(base.frequencies_ghz, Some(ids)).unwrap();
    let m = kde_fit(&d, Bandwidth::AUTO, SampleWeighting::PerSite).unwrap();
    let draws = sample(&m, 13, 100_000).unwrap();
    assert!(ks_statistic(&draws, |x| m.cdf(x)) < ks_critical_value(0.01, draws.len()));
    assert!((m.integral() - 1.0).abs() < 1e-6);
}

#[test]
fn surrogate_sigma_recovery_rate() {
    // (n−1)s²/σ² ~ χ²(n−1): the chance that s lands within 15% of σ
    let n = PCD_SURROGATE.count;
    let chi = ChiSquared::new((n - 1) as f64).unwrap();
    let k = (n - 1) as f64;
    let p = chi.cdf(k * 1.15f64.powi(2)) - chi.cdf(k * 0.85f64.powi(2));
    assert!(p > 0.94, "{p}");

    let reps = 2000;
    let hits = (0..reps)
        .filter(|&seed| {
            let s = summary_stats(&PCD_SURROGATE.generate(seed).unwrap()).unwrap();
            (s.std_ghz / PCD_SURROGATE.sigma_ghz - 1.0).abs() < 0.15
        })
        .count();
    let rate = hits as f64 / reps as f64;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    assert!((rate - p).abs() < 3.0 * se, "{rate} vs {p}");
}
