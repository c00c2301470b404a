use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Measured ZPL frequencies, optionally tagged with the site they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZplDataset {
    pub frequencies_ghz: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_ids: Option<Vec<String>>,
}

impl ZplDataset {
    pub fn new(frequencies_ghz: Vec<f64>, site_ids: Option<Vec<String>>) -> Result<Self> {
        let d = Self { frequencies_ghz, site_ids };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies_ghz.is_empty() {
            return Err(Error::Empty("dataset has no frequencies".into()));
        }
        if self.frequencies_ghz.iter().any(|f| !f.is_finite()) {
            return Err(Error::domain("frequencies must be finite"));
        }
        if let Some(ids) = &self.site_ids {
            if ids.len() != self.frequencies_ghz.len() {
                return Err(Error::domain("site_ids and frequencies differ in length"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frequencies_ghz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies_ghz.is_empty()
    }

    pub fn shifted(&self, offset_ghz: f64) -> Self {
        Self {
            frequencies_ghz: self.frequencies_ghz.iter().map(|f| f + offset_ghz).collect(),
            site_ids: self.site_ids.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match &self.site_ids {
            Some(ids) => {
                w.write_record(["frequency_ghz", "site_id"])?;
                for (f, s) in self.frequencies_ghz.iter().zip(ids) {
                    w.write_record([f.to_string().as_str(), s])?;
                }
            }
            None => {
                w.write_record(["frequency_ghz"])?;
                for f in &self.frequencies_ghz {
                    w.write_record([f.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads CSV with header `frequency_ghz` or `frequency_ghz,site_id`.
/// Lines starting with `#` are skipped.
pub fn load_zpl_dataset<R: Read>(source: R) -> Result<ZplDataset> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).flexible(true).from_reader(source);
    let headers = rdr.headers()?.clone();
    let with_sites = match headers.iter().collect::<Vec<_>>().as_slice() {
        ["frequency_ghz"] => false,
        ["frequency_ghz", "site_id"] => true,
        [] => return Err(Error::Empty("dataset file is empty".into())),
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected header `frequency_ghz` or `frequency_ghz,site_id`".into(),
            })
        }
    };
    let mut freqs = Vec::new();
    let mut sites = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let expected = if with_sites { 2 } else { 1 };
        if rec.len() != expected {
            return Err(Error::Parse { line, message: format!("expected {expected} fields, got {}", rec.len()) });
        }
        let f: f64 = rec[0]
            .parse()
            .ok()
            .filter(|f: &f64| f.is_finite())
            .ok_or_else(|| Error::Parse { line, message: format!("invalid frequency `{}`", &rec[0]) })?;
        freqs.push(f);
        if with_sites {
            sites.push(rec[1].to_string());
        }
    }
    if freqs.is_empty() {
        return Err(Error::Empty("dataset has no rows".into()));
    }
    ZplDataset::new(freqs, with_sites.then_some(sites))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean_ghz: f64,
    /// Unbiased (n − 1) standard deviation; 0 for a single sample.
    pub std_ghz: f64,
    pub count: usize,
}

pub fn summary_stats(data: &ZplDataset) -> Result<SummaryStats> {
    data.validate()?;
    let n = data.len();
    let mean = data.frequencies_ghz.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (data.frequencies_ghz.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(SummaryStats { mean_ghz: mean, std_ghz: std, count: n })
}
