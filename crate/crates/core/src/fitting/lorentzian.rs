use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lm::{self, LmOptions, Problem};
use crate::{Error, Result};

/// Photoluminescence-excitation scan: counts against laser frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequency_ghz: Vec<f64>,
    pub counts: Vec<f64>,
}

impl Spectrum {
    pub fn new(frequency_ghz: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        let s = Self { frequency_ghz, counts };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequency_ghz.len() != self.counts.len() {
            return Err(Error::domain("frequency and count columns differ in length"));
        }
        if self.len() < 8 {
            return Err(Error::domain(format!("spectrum needs at least 8 points, got {}", self.len())));
        }
        if self.frequency_ghz.iter().any(|f| !f.is_finite()) || self.frequency_ghz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("frequencies must be finite and strictly ascending"));
        }
        if self.counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::domain("counts must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frequency_ghz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequency_ghz.is_empty()
    }

    /// Reads CSV with header `frequency_ghz,counts`.
    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(source);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "frequency_ghz" || &headers[1] != "counts" {
            return Err(Error::Parse { line: 1, message: "expected header `frequency_ghz,counts`".into() });
        }
        let (mut f, mut c) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let field = |i: usize, name: &str| -> Result<f64> {
                rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("invalid {name} `{}`", rec.get(i).unwrap_or("")),
                })
            };
            f.push(field(0, "frequency")?);
            c.push(field(1, "count")?);
        }
        if f.is_empty() {
            return Err(Error::Empty("spectrum file has no rows".into()));
        }
        Self::new(f, c)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frequency_ghz", "counts"])?;
        for (f, c) in self.frequency_ghz.iter().zip(&self.counts) {
            w.write_record(&[f.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    fn median_spacing(&self) -> f64 {
        let mut d: Vec<f64> = self.frequency_ghz.windows(2).map(|w| w[1] - w[0]).collect();
        median(&mut d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianPeak {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
}

impl LorentzianPeak {
    pub fn value(&self, freq: f64) -> f64 {
        let h = 0.5 * self.fwhm;
        let d = freq - self.center;
        self.amplitude * h * h / (d * d + h * h)
    }
}

/// Baseline plus a sum of Lorentzians.
pub fn lorentzian_sum(freq: f64, baseline: f64, peaks: &[LorentzianPeak]) -> f64 {
    baseline + peaks.iter().map(|p| p.value(freq)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Weight 1/max(count, 1) per point.
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPeak {
    #[serde(flatten)]
    pub peak: LorentzianPeak,
    pub center_error: f64,
    pub fwhm_error: f64,
    pub amplitude_error: f64,
    /// Amplitude not significantly above zero, or the peak sits outside the
    /// scanned range: likely a surplus peak.
    pub suspect: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub peaks: Vec<FittedPeak>,
    pub baseline: f64,
    pub baseline_error: f64,
    pub residual_rms: f64,
    /// Parameter order: baseline, then (amplitude, center, fwhm) per peak in
    /// the sorted order of `peaks`.
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl LorentzianFit {
    pub fn model_peaks(&self) -> Vec<LorentzianPeak> {
        self.peaks.iter().map(|p| p.peak).collect()
    }

    pub fn evaluate(&self, freq: f64) -> f64 {
        lorentzian_sum(freq, self.baseline, &self.model_peaks())
    }

    /// CSV `frequency_ghz,counts,model,residual`.
    pub fn write_residual_csv<W: Write>(&self, spectrum: &Spectrum, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frequency_ghz", "counts", "model", "residual"])?;
        for (f, c) in spectrum.frequency_ghz.iter().zip(&spectrum.counts) {
            let m = self.evaluate(*f);
            w.write_record(&[f.to_string(), c.to_string(), m.to_string(), (c - m).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median baseline and a MAD-based noise scale.
fn baseline_and_noise(counts: &[f64]) -> (f64, f64) {
    let mut c = counts.to_vec();
    let base = median(&mut c);
    let mut dev: Vec<f64> = counts.iter().map(|x| (x - base).abs()).collect();
    (base, 1.4826 * median(&mut dev))
}

/// Seeds for the fitter: the `n_peaks` highest local maxima that rise more
/// than three noise-floor units above the median baseline.
///
/// Maxima inside the half-maximum shoulder of a higher accepted maximum are
/// discarded, so noise ripple on one peak does not produce several seeds.
/// Equal heights go to the lower frequency first. Seeds are returned in
/// ascending center order.
pub fn initialize_peaks(spectrum: &Spectrum, n_peaks: usize) -> Result<Vec<LorentzianPeak>> {
    spectrum.validate()?;
    if n_peaks == 0 {
        return Err(Error::domain("n_peaks must be at least 1"));
    }
    let y = &spectrum.counts;
    let n = y.len();
    let (base, noise) = baseline_and_noise(y);
    let threshold = base + 3.0 * noise;

    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || y[i] > y[i - 1];
            let right = i + 1 == n || y[i] >= y[i + 1];
            left && right && y[i] > threshold
        })
        .collect();
    candidates.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));

    let mut accepted: Vec<(usize, usize, usize)> = Vec::new();
    for i in candidates {
        if accepted.iter().any(|&(_, lo, hi)| (lo..=hi).contains(&i)) {
            continue;
        }
        let half = base + 0.5 * (y[i] - base);
        let mut lo = i;
        while lo > 0 && y[lo - 1] > half {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < n && y[hi + 1] > half {
            hi += 1;
        }
        accepted.push((i, lo, hi));
        if accepted.len() == n_peaks {
            break;
        }
    }
    if accepted.len() < n_peaks {
        return Err(Error::InsufficientPeaks { found: accepted.len(), requested: n_peaks });
    }

    let width = 2.0 * spectrum.median_spacing();
    let mut peaks: Vec<LorentzianPeak> = accepted
        .into_iter()
        .map(|(i, _, _)| LorentzianPeak { center: spectrum.frequency_ghz[i], fwhm: width, amplitude: y[i] - base })
        .collect();
    peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
    Ok(peaks)
}

struct LorentzianProblem<'a> {
    // frequencies relative to `origin`, for conditioning
    x: Vec<f64>,
    y: &'a [f64],
    sqrt_w: Vec<f64>,
    n_peaks: usize,
}

impl Problem for LorentzianProblem<'_> {
    fn n_params(&self) -> usize {
        1 + 3 * self.n_peaks
    }

    fn n_residuals(&self) -> usize {
        self.x.len()
    }

    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.x.len(),
            self.x.iter().enumerate().map(|(i, &x)| {
                let mut f = p[0];
                for k in 0..self.n_peaks {
                    let (a, c, w) = (p[1 + 3 * k], p[2 + 3 * k], p[3 + 3 * k]);
                    let h = 0.5 * w;
                    let d = x - c;
                    f += a * h * h / (d * d + h * h);
                }
                self.sqrt_w[i] * (f - self.y[i])
            }),
        )
    }

    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.x.len(), self.n_params());
        for (i, &x) in self.x.iter().enumerate() {
            let sw = self.sqrt_w[i];
            j[(i, 0)] = sw;
            for k in 0..self.n_peaks {
                let (a, c, w) = (p[1 + 3 * k], p[2 + 3 * k], p[3 + 3 * k]);
                let h = 0.5 * w;
                let d = x - c;
                let den = d * d + h * h;
                let den2 = den * den;
                j[(i, 1 + 3 * k)] = sw * h * h / den;
                j[(i, 2 + 3 * k)] = sw * a * h * h * 2.0 * d / den2;
                j[(i, 3 + 3 * k)] = sw * a * h * d * d / den2;
            }
        }
        j
    }
}

/// Least-squares fit of `baseline + Σ Lorentzian` with `n_peaks` peaks.
///
/// Without `init` the seeds come from [`initialize_peaks`]. Peaks are
/// returned sorted by center with the covariance permuted to match.
pub fn fit_lorentzian_sum(
    spectrum: &Spectrum,
    n_peaks: usize,
    init: Option<&[LorentzianPeak]>,
    weighting: Weighting,
) -> Result<LorentzianFit> {
    fit_lorentzian_sum_with(spectrum, n_peaks, init, weighting, &LmOptions::default())
}

pub fn fit_lorentzian_sum_with(
    spectrum: &Spectrum,
    n_peaks: usize,
    init: Option<&[LorentzianPeak]>,
    weighting: Weighting,
    options: &LmOptions,
) -> Result<LorentzianFit> {
    spectrum.validate()?;
    if n_peaks == 0 {
        return Err(Error::domain("n_peaks must be at least 1"));
    }
    if spectrum.len() < 3 * n_peaks + 1 {
        return Err(Error::domain(format!(
            "{} points cannot constrain {} peaks (need {})",
            spectrum.len(),
            n_peaks,
            3 * n_peaks + 1
        )));
    }
    let seeds = match init {
        Some(p) => {
            if p.len() != n_peaks {
                return Err(Error::domain(format!("{} initial peaks given for n_peaks = {n_peaks}", p.len())));
            }
            if p.iter().any(|q| !(q.fwhm > 0.0 && q.center.is_finite() && q.amplitude.is_finite())) {
                return Err(Error::domain("initial peaks need finite centers/amplitudes and fwhm > 0"));
            }
            let mut p = p.to_vec();
            p.sort_by(|a, b| a.center.total_cmp(&b.center));
            p
        }
        None => initialize_peaks(spectrum, n_peaks)?,
    };
    if seeds.windows(2).any(|w| w[1].center == w[0].center) {
        return Err(Error::Degenerate("two initial peak centers coincide".into()));
    }

    let origin = spectrum.frequency_ghz[0];
    let problem = LorentzianProblem {
        x: spectrum.frequency_ghz.iter().map(|f| f - origin).collect(),
        y: &spectrum.counts,
        sqrt_w: match weighting {
            Weighting::Uniform => vec![1.0; spectrum.len()],
            Weighting::Poisson => spectrum.counts.iter().map(|c| 1.0 / c.max(1.0).sqrt()).collect(),
        },
        n_peaks,
    };
    let (base, _) = baseline_and_noise(&spectrum.counts);
    let mut p0 = vec![base];
    for s in &seeds {
        p0.extend([s.amplitude, s.center - origin, s.fwhm]);
    }

    let sol = lm::solve(&problem, DVector::from_vec(p0), options).map_err(|e| match e {
        Error::NonConvergence { iterations, cost, mut best } => {
            for k in 0..n_peaks {
                best[2 + 3 * k] += origin;
                best[3 + 3 * k] = best[3 + 3 * k].abs();
            }
            Error::NonConvergence { iterations, cost, best }
        }
        other => other,
    })?;

    let p = &sol.params;
    let mut order: Vec<usize> = (0..n_peaks).collect();
    order.sort_by(|&a, &b| p[2 + 3 * a].total_cmp(&p[2 + 3 * b]));
    // parameter permutation: baseline stays first
    let mut perm = vec![0];
    for &k in &order {
        perm.extend([1 + 3 * k, 2 + 3 * k, 3 + 3 * k]);
    }
    let cov = &sol.covariance;
    let covariance: Vec<Vec<f64>> = perm.iter().map(|&r| perm.iter().map(|&c| cov[(r, c)]).collect()).collect();
    let se = |i: usize| cov[(i, i)].max(0.0).sqrt();

    let (f_lo, f_hi) = (spectrum.frequency_ghz[0], *spectrum.frequency_ghz.last().unwrap());
    let peaks: Vec<FittedPeak> = order
        .iter()
        .map(|&k| {
            let peak =
                LorentzianPeak { center: p[2 + 3 * k] + origin, fwhm: p[3 + 3 * k].abs(), amplitude: p[1 + 3 * k] };
            let amplitude_error = se(1 + 3 * k);
            let significant = peak.amplitude > 0.0 && peak.amplitude > 3.0 * amplitude_error;
            let suspect = !significant || peak.center < f_lo || peak.center > f_hi;
            FittedPeak { peak, center_error: se(2 + 3 * k), fwhm_error: se(3 + 3 * k), amplitude_error, suspect }
        })
        .collect();

    let fit_baseline = p[0];
    let model = |f: f64| lorentzian_sum(f, fit_baseline, &peaks.iter().map(|q| q.peak).collect::<Vec<_>>());
    let residual_rms =
        (spectrum.frequency_ghz.iter().zip(&spectrum.counts).map(|(f, c)| (c - model(*f)).powi(2)).sum::<f64>()
            / spectrum.len() as f64)
            .sqrt();

    Ok(LorentzianFit {
        peaks,
        baseline: fit_baseline,
        baseline_error: se(0),
        residual_rms,
        covariance,
        iterations: sol.iterations,
    })
}
