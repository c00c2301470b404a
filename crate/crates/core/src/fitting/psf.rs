use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lm::{self, LmOptions, Problem};
use super::Weighting;
use crate::{Error, Result};

/// A resonant-scan image. Pixel (row r, column c) is centred at
/// `origin + (c, r) · pixel_size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsfImage {
    pub pixel_size_nm: f64,
    pub origin_nm: (f64, f64),
    pub rows: usize,
    pub cols: usize,
    /// Row-major counts.
    pub counts: Vec<f64>,
}

impl PsfImage {
    pub fn new(pixel_size_nm: f64, origin_nm: (f64, f64), rows: usize, cols: usize, counts: Vec<f64>) -> Result<Self> {
        let img = Self { pixel_size_nm, origin_nm, rows, cols, counts };
        img.validate()?;
        Ok(img)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_size_nm.is_finite() && self.pixel_size_nm > 0.0) {
            return Err(Error::domain("pixel size must be positive"));
        }
        if !(self.origin_nm.0.is_finite() && self.origin_nm.1.is_finite()) {
            return Err(Error::domain("origin must be finite"));
        }
        if self.rows < 5 || self.cols < 5 {
            return Err(Error::domain(format!("image must be at least 5×5, got {}×{}", self.rows, self.cols)));
        }
        if self.counts.len() != self.rows * self.cols {
            return Err(Error::domain("count grid is not rectangular"));
        }
        if self.counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::domain("counts must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.counts[row * self.cols + col]
    }

    /// Position (x, y) in nm of a pixel centre.
    pub fn position(&self, row: usize, col: usize) -> (f64, f64) {
        (self.origin_nm.0 + col as f64 * self.pixel_size_nm, self.origin_nm.1 + row as f64 * self.pixel_size_nm)
    }

    pub fn total_counts(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Reads the text format: a header line
    /// `pixel_size_nm=<f>,origin_x_nm=<f>,origin_y_nm=<f>` then comma-separated rows.
    pub fn read_text<R: Read>(source: R) -> Result<Self> {
        let mut lines = BufReader::new(source).lines();
        let header = match lines.next() {
            Some(l) => l?,
            None => return Err(Error::Empty("image file is empty".into())),
        };
        let (mut pixel, mut ox, mut oy) = (None, None, None);
        for part in header.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: 1, message: format!("expected key=value, got `{part}`") })?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse { line: 1, message: format!("invalid number for `{}`", k.trim()) })?;
            match k.trim() {
                "pixel_size_nm" => pixel = Some(v),
                "origin_x_nm" => ox = Some(v),
                "origin_y_nm" => oy = Some(v),
                other => return Err(Error::Parse { line: 1, message: format!("unknown key `{other}`") }),
            }
        }
        let (Some(pixel), Some(ox), Some(oy)) = (pixel, ox, oy) else {
            return Err(Error::Parse {
                line: 1,
                message: "header needs pixel_size_nm, origin_x_nm and origin_y_nm".into(),
            });
        };

        let mut counts = Vec::new();
        let (mut rows, mut cols) = (0, 0);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i as u64 + 2;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse { line: lineno, message: format!("invalid count `{}`", s.trim()) })
                })
                .collect::<Result<_>>()?;
            if rows == 0 {
                cols = row.len();
            } else if row.len() != cols {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {cols} columns, got {}", row.len()),
                });
            }
            counts.extend(row);
            rows += 1;
        }
        if rows == 0 {
            return Err(Error::Empty("image has no rows".into()));
        }
        Self::new(pixel, (ox, oy), rows, cols, counts)
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "pixel_size_nm={},origin_x_nm={},origin_y_nm={}",
            self.pixel_size_nm, self.origin_nm.0, self.origin_nm.1
        )?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.at(r, c).to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Axis-aligned Gaussian spot on a constant background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpot {
    pub amplitude: f64,
    pub center_nm: (f64, f64),
    pub sigma_nm: (f64, f64),
    pub offset: f64,
}

impl GaussianSpot {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center_nm.0;
        let dy = y - self.center_nm.1;
        self.amplitude
            * (-(dx * dx / (2.0 * self.sigma_nm.0 * self.sigma_nm.0)
                + dy * dy / (2.0 * self.sigma_nm.1 * self.sigma_nm.1)))
                .exp()
            + self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub center_nm: (f64, f64),
    pub sigma_psf_nm: (f64, f64),
    pub amplitude: f64,
    pub offset: f64,
    pub std_error_center_nm: (f64, f64),
    /// sqrt((ex² + ey²)/2)
    pub precision_nm: f64,
    pub residual_rms: f64,
    /// Parameter order: amplitude, x0, y0, sx, sy, offset.
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl LocalizationResult {
    pub fn spot(&self) -> GaussianSpot {
        GaussianSpot {
            amplitude: self.amplitude,
            center_nm: self.center_nm,
            sigma_nm: self.sigma_psf_nm,
            offset: self.offset,
        }
    }

    /// CSV `x_nm,y_nm,counts,model,residual`, one row per pixel.
    pub fn write_residual_csv<W: Write>(&self, image: &PsfImage, out: W) -> Result<()> {
        let spot = self.spot();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_nm", "y_nm", "counts", "model", "residual"])?;
        for r in 0..image.rows {
            for c in 0..image.cols {
                let (x, y) = image.position(r, c);
                let m = spot.value(x, y);
                let v = image.at(r, c);
                w.write_record(&[x.to_string(), y.to_string(), v.to_string(), m.to_string(), (v - m).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

struct PsfProblem<'a> {
    // pixel positions relative to the image origin
    xy: Vec<(f64, f64)>,
    z: &'a [f64],
    sqrt_w: Vec<f64>,
}

impl Problem for PsfProblem<'_> {
    fn n_params(&self) -> usize {
        6
    }

    fn n_residuals(&self) -> usize {
        self.z.len()
    }

    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        let spot = GaussianSpot { amplitude: p[0], center_nm: (p[1], p[2]), sigma_nm: (p[3], p[4]), offset: p[5] };
        DVector::from_iterator(
            self.z.len(),
            self.xy.iter().zip(self.z).zip(&self.sqrt_w).map(|((&(x, y), z), w)| w * (spot.value(x, y) - z)),
        )
    }

    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let (a, x0, y0, sx, sy) = (p[0], p[1], p[2], p[3], p[4]);
        let mut j = DMatrix::zeros(self.z.len(), 6);
        for (i, &(x, y)) in self.xy.iter().enumerate() {
            let dx = x - x0;
            let dy = y - y0;
            let w = self.sqrt_w[i];
            let g = w * (-(dx * dx / (2.0 * sx * sx) + dy * dy / (2.0 * sy * sy))).exp();
            j[(i, 0)] = g;
            j[(i, 1)] = a * g * dx / (sx * sx);
            j[(i, 2)] = a * g * dy / (sy * sy);
            j[(i, 3)] = a * g * dx * dx / (sx * sx * sx);
            j[(i, 4)] = a * g * dy * dy / (sy * sy * sy);
            j[(i, 5)] = w;
        }
        j
    }
}

/// Moment-based starting point: offset at the minimum, centroid and second
/// moments of the background-subtracted image.
pub fn initial_spot(image: &PsfImage) -> Result<GaussianSpot> {
    image.validate()?;
    let lo = image.counts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = image.counts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= 0.0 {
        return Err(Error::Empty("image is all zero".into()));
    }
    let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for r in 0..image.rows {
        for c in 0..image.cols {
            let w = image.at(r, c) - lo;
            let (x, y) = image.position(r, c);
            s += w;
            sx += w * x;
            sy += w * y;
        }
    }
    if s <= 0.0 {
        return Err(Error::Degenerate("image is flat".into()));
    }
    let (cx, cy) = (sx / s, sy / s);
    let (mut vx, mut vy) = (0.0, 0.0);
    for r in 0..image.rows {
        for c in 0..image.cols {
            let w = image.at(r, c) - lo;
            let (x, y) = image.position(r, c);
            vx += w * (x - cx).powi(2);
            vy += w * (y - cy).powi(2);
        }
    }
    let floor = 0.5 * image.pixel_size_nm;
    Ok(GaussianSpot {
        amplitude: hi - lo,
        center_nm: (cx, cy),
        sigma_nm: ((vx / s).sqrt().max(floor), (vy / s).sqrt().max(floor)),
        offset: lo,
    })
}

/// Fits a Gaussian spot and reports the localization precision from the
/// parameter covariance.
pub fn fit_gaussian_psf(
    image: &PsfImage,
    init: Option<GaussianSpot>,
    weighting: Weighting,
) -> Result<LocalizationResult> {
    fit_gaussian_psf_with(image, init, weighting, &LmOptions::default())
}

pub fn fit_gaussian_psf_with(
    image: &PsfImage,
    init: Option<GaussianSpot>,
    weighting: Weighting,
    options: &LmOptions,
) -> Result<LocalizationResult> {
    image.validate()?;
    if image.counts.iter().all(|c| *c == 0.0) {
        return Err(Error::Empty("image is all zero".into()));
    }
    let seed = match init {
        Some(s) => s,
        None => initial_spot(image)?,
    };
    if !(seed.sigma_nm.0 > 0.0 && seed.sigma_nm.1 > 0.0) {
        return Err(Error::domain("initial PSF widths must be positive"));
    }
    let (ox, oy) = image.origin_nm;
    let mut xy = Vec::with_capacity(image.counts.len());
    for r in 0..image.rows {
        for c in 0..image.cols {
            xy.push((c as f64 * image.pixel_size_nm, r as f64 * image.pixel_size_nm));
        }
    }
    let sqrt_w = match weighting {
        Weighting::Uniform => vec![1.0; image.counts.len()],
        Weighting::Poisson => image.counts.iter().map(|c| 1.0 / c.max(1.0).sqrt()).collect(),
    };
    let problem = PsfProblem { xy, z: &image.counts, sqrt_w };
    let p0 = DVector::from_vec(vec![
        seed.amplitude,
        seed.center_nm.0 - ox,
        seed.center_nm.1 - oy,
        seed.sigma_nm.0,
        seed.sigma_nm.1,
        seed.offset,
    ]);
    let sol = lm::solve(&problem, p0, options).map_err(|e| match e {
        Error::NonConvergence { iterations, cost, mut best } => {
            best[1] += ox;
            best[2] += oy;
            Error::NonConvergence { iterations, cost, best }
        }
        other => other,
    })?;
    let p = &sol.params;
    let cov = &sol.covariance;
    let se = |i: usize| cov[(i, i)].max(0.0).sqrt();
    let (ex, ey) = (se(1), se(2));
    Ok(LocalizationResult {
        center_nm: (p[1] + ox, p[2] + oy),
        sigma_psf_nm: (p[3].abs(), p[4].abs()),
        amplitude: p[0],
        offset: p[5],
        std_error_center_nm: (ex, ey),
        precision_nm: (0.5 * (ex * ex + ey * ey)).sqrt(),
        residual_rms: {
            let spot = GaussianSpot {
                amplitude: p[0],
                center_nm: (p[1] + ox, p[2] + oy),
                sigma_nm: (p[3], p[4]),
                offset: p[5],
            };
            let ss: f64 = (0..image.rows)
                .flat_map(|r| (0..image.cols).map(move |c| (r, c)))
                .map(|(r, c)| {
                    let (x, y) = image.position(r, c);
                    (image.at(r, c) - spot.value(x, y)).powi(2)
                })
                .sum();
            (ss / image.counts.len() as f64).sqrt()
        },
        covariance: (0..6).map(|r| (0..6).map(|c| cov[(r, c)]).collect()).collect(),
        iterations: sol.iterations,
    })
}
