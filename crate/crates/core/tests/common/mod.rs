//! Synthetic data generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use specreg::fitting::{lorentzian_sum, GaussianSpot, LorentzianPeak, PsfImage, Spectrum};
use specreg::rng::substream;

pub const SEVEN_PEAK_FWHM: f64 = 0.1;
pub const SEVEN_PEAK_BASELINE: f64 = 10.0;

fn poisson<R: Rng>(rng: &mut R, mean: f64) -> f64 {
    if mean <= 0.0 {
        0.0
    } else {
        Poisson::new(mean).unwrap().sample(rng)
    }
}

/// Amplitude giving A/sqrt(A + b) = snr on baseline b.
pub fn amplitude_for_snr(snr: f64, baseline: f64) -> f64 {
    let s2 = snr * snr;
    0.5 * (s2 + (s2 * s2 + 4.0 * s2 * baseline).sqrt())
}

/// Seven peaks spaced 4 FWHM apart around 470400 GHz, sampled at FWHM/5.
pub fn seven_peaks() -> (Vec<f64>, Vec<LorentzianPeak>) {
    let w = SEVEN_PEAK_FWHM;
    let a = amplitude_for_snr(20.0, SEVEN_PEAK_BASELINE);
    let f0 = 470_400.0;
    let peaks: Vec<LorentzianPeak> = (0..7)
        .map(|k| LorentzianPeak { center: f0 + 0.5 + 4.0 * w * k as f64 + 0.013 * k as f64, fwhm: w, amplitude: a })
        .collect();
    let n = ((1.0 + 4.0 * w * 6.0 + 0.1) / (w / 5.0)).round() as usize;
    let freq = (0..n).map(|i| f0 + i as f64 * w / 5.0).collect();
    (freq, peaks)
}

pub fn noisy_spectrum(freq: &[f64], baseline: f64, peaks: &[LorentzianPeak], seed: u64, stream: u64) -> Spectrum {
    let mut rng = substream(seed, stream);
    let counts = freq.iter().map(|f| poisson(&mut rng, lorentzian_sum(*f, baseline, peaks))).collect();
    Spectrum::new(freq.to_vec(), counts).unwrap()
}

pub fn clean_spectrum(freq: &[f64], baseline: f64, peaks: &[LorentzianPeak]) -> Spectrum {
    Spectrum::new(freq.to_vec(), freq.iter().map(|f| lorentzian_sum(*f, baseline, peaks)).collect()).unwrap()
}

pub const PSF_SIGMA_NM: f64 = 150.0;
pub const PSF_PIXEL_NM: f64 = 40.0;
pub const PSF_SIZE: usize = 15;

/// Expected counts per pixel for a spot holding `photons` in total. The
/// 15×15 window spans about ±2σ around the spot.
pub fn spot_for_photons(photons: f64, center: (f64, f64)) -> GaussianSpot {
    let s = PSF_SIGMA_NM;
    GaussianSpot {
        amplitude: photons * PSF_PIXEL_NM * PSF_PIXEL_NM / (2.0 * std::f64::consts::PI * s * s),
        center_nm: center,
        sigma_nm: (s, s),
        offset: 0.0,
    }
}

pub fn psf_image(spot: &GaussianSpot, noisy: Option<(u64, u64)>) -> PsfImage {
    let mut rng = noisy.map(|(seed, stream)| substream(seed, stream));
    let mut counts = Vec::with_capacity(PSF_SIZE * PSF_SIZE);
    for r in 0..PSF_SIZE {
        for c in 0..PSF_SIZE {
            let mean = spot.value(c as f64 * PSF_PIXEL_NM, r as f64 * PSF_PIXEL_NM);
            counts.push(match rng.as_mut() {
                Some(rng) => poisson(rng, mean),
                None => mean,
            });
        }
    }
    PsfImage::new(PSF_PIXEL_NM, (0.0, 0.0), PSF_SIZE, PSF_SIZE, counts).unwrap()
}

pub fn image_center() -> (f64, f64) {
    let mid = (PSF_SIZE - 1) as f64 * PSF_PIXEL_NM / 2.0;
    (mid + 7.3, mid - 4.1)
}

pub fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
