use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use specreg::crosstalk as xt;
use specreg::ensemble::{self, Bandwidth, KernelDensityModel, SampleWeighting, ZplDataset};
use specreg::fitting::{self, PsfImage, Spectrum, Weighting};
use specreg::spin;
use specreg::yield_mc::{self, ReadoutPreset, SweepConfig, ViabilityMode};

fn to_py(e: specreg::Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} `{s}`")))
}

/// Crosstalk probability of one transition. Rates in rad/µs, duration in µs.
#[pyfunction]
fn transition_crosstalk(omega: f64, delta: f64, gamma: f64, duration: f64) -> PyResult<f64> {
    xt::transition_crosstalk(omega, delta, gamma, duration).map_err(to_py)
}

/// Smallest detuning (GHz) keeping the crosstalk at or below `gamma_target`.
#[pyfunction]
fn min_safe_detuning(omega: f64, gamma: f64, duration: f64, gamma_target: f64) -> PyResult<f64> {
    xt::min_safe_detuning(omega, gamma, duration, gamma_target).map_err(to_py)
}

/// Rabi frequency (rad/µs) giving crosstalk `gamma_ref` at `delta_ref` GHz.
#[pyfunction]
fn calibrate_rabi(delta_ref: f64, gamma_ref: f64, gamma: f64, duration: f64) -> PyResult<f64> {
    xt::calibrate_rabi(delta_ref, gamma_ref, gamma, duration).map_err(to_py)
}

#[pyfunction]
fn ghz_to_angular_mhz(ghz: f64) -> f64 {
    specreg::units::ghz_to_angular_mhz(ghz)
}

/// Optical level structure of one emitter.
#[pyclass(name = "Emitter", frozen)]
struct PyEmitter {
    inner: xt::EmitterOpticalModel,
}

#[pymethods]
impl PyEmitter {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: xt::EmitterOpticalModel::from_json(text).map_err(to_py)? })
    }

    /// One spin-conserving line at `frequency_ghz`.
    #[staticmethod]
    #[pyo3(signature = (label, frequency_ghz, rabi, gamma = specreg::units::DEFAULT_DECAY_RATE))]
    fn single_line(label: &str, frequency_ghz: f64, rabi: f64, gamma: f64) -> PyResult<Self> {
        Ok(Self { inner: xt::EmitterOpticalModel::single_line(label, frequency_ghz, rabi, gamma).map_err(to_py)? })
    }

    #[getter]
    fn label(&self) -> &str {
        &self.inner.label
    }

    #[getter]
    fn readout_frequency(&self) -> f64 {
        self.inner.readout_frequency()
    }

    /// Total crosstalk from a pulse at `laser_frequency_ghz`, starting in m_s = 0.
    fn crosstalk(&self, laser_frequency_ghz: f64, duration_us: f64) -> PyResult<f64> {
        let pulse = xt::ReadoutPulse::new(laser_frequency_ghz, duration_us).map_err(to_py)?;
        Ok(xt::emitter_crosstalk(&self.inner, &pulse, &xt::ground_zero_populations()).map_err(to_py)?.total)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }
}

fn sequence_dict<'py>(py: Python<'py>, r: &spin::SequenceResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("tau_ns", r.tau_ns.clone())?;
    d.set_item("contrast", r.contrast.clone())?;
    d.set_item("f_pi2", r.f_pi2.clone())?;
    d.set_item("f_3pi2", r.f_3pi2.clone())?;
    Ok(d)
}

/// Ramsey fringes with an optional spin-conserving projection of probability
/// `crosstalk` in the middle of each precession window.
#[pyfunction]
#[pyo3(signature = (detuning_mhz, tau_grid_ns, crosstalk = None, t2_star_ns = Some(specreg::units::DEFAULT_T2_STAR_NS)))]
fn ramsey<'py>(
    py: Python<'py>,
    detuning_mhz: f64,
    tau_grid_ns: Vec<f64>,
    crosstalk: Option<f64>,
    t2_star_ns: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let config = spin::RamseyConfig { t2_star_ns, ..spin::RamseyConfig::new(detuning_mhz) };
    let breakdown = crosstalk.map(xt::CrosstalkBreakdown::spin_conserving).transpose().map_err(to_py)?;
    let r = spin::ramsey_with_crosstalk(&config, &tau_grid_ns, breakdown.as_ref()).map_err(to_py)?;
    sequence_dict(py, &r)
}

#[pyfunction]
fn estimate_crosstalk_from_contrast(contrast: f64, reference_contrast: f64) -> PyResult<f64> {
    spin::estimate_crosstalk_from_contrast(contrast, reference_contrast).map_err(to_py)
}

/// Runs a cluster timeline given as JSON documents; returns results per label.
#[pyfunction]
fn run_cluster<'py>(py: Python<'py>, cluster_json: &str, sequence_json: &str) -> PyResult<Bound<'py, PyDict>> {
    let cluster = spin::Cluster::from_json(cluster_json).map_err(to_py)?;
    let spec = spin::ClusterSequenceSpec::from_json(sequence_json).map_err(to_py)?;
    let run = py.detach(|| spin::run_cluster_sequence(&cluster, &spec)).map_err(to_py)?;
    let out = PyDict::new(py);
    for (label, r) in &run.results {
        out.set_item(label, sequence_dict(py, r)?)?;
    }
    Ok(out)
}

/// Result of a Lorentzian-sum fit.
#[pyclass(name = "LorentzianFit", frozen)]
struct PyLorentzianFit {
    inner: fitting::LorentzianFit,
}

#[pymethods]
impl PyLorentzianFit {
    /// (center GHz, fwhm GHz, amplitude) per peak, ascending in center.
    #[getter]
    fn peaks(&self) -> Vec<(f64, f64, f64)> {
        self.inner.peaks.iter().map(|p| (p.peak.center, p.peak.fwhm, p.peak.amplitude)).collect()
    }

    #[getter]
    fn center_errors(&self) -> Vec<f64> {
        self.inner.peaks.iter().map(|p| p.center_error).collect()
    }

    #[getter]
    fn suspect(&self) -> Vec<bool> {
        self.inner.peaks.iter().map(|p| p.suspect).collect()
    }

    #[getter]
    fn baseline(&self) -> f64 {
        self.inner.baseline
    }

    #[getter]
    fn residual_rms(&self) -> f64 {
        self.inner.residual_rms
    }

    #[getter]
    fn covariance(&self) -> Vec<Vec<f64>> {
        self.inner.covariance.clone()
    }

    fn evaluate(&self, frequency_ghz: f64) -> f64 {
        self.inner.evaluate(frequency_ghz)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }
}

#[pyfunction]
#[pyo3(signature = (frequency_ghz, counts, n_peaks, weighting = "uniform"))]
fn fit_lorentzian_sum(
    frequency_ghz: Vec<f64>,
    counts: Vec<f64>,
    n_peaks: usize,
    weighting: &str,
) -> PyResult<PyLorentzianFit> {
    let spectrum = Spectrum::new(frequency_ghz, counts).map_err(to_py)?;
    let weighting: Weighting = parse("weighting", weighting)?;
    let inner = fitting::fit_lorentzian_sum(&spectrum, n_peaks, None, weighting).map_err(to_py)?;
    Ok(PyLorentzianFit { inner })
}

#[pyclass(name = "Localization", frozen)]
struct PyLocalization {
    inner: fitting::LocalizationResult,
}

#[pymethods]
impl PyLocalization {
    #[getter]
    fn center_nm(&self) -> (f64, f64) {
        self.inner.center_nm
    }

    #[getter]
    fn std_error_center_nm(&self) -> (f64, f64) {
        self.inner.std_error_center_nm
    }

    #[getter]
    fn precision_nm(&self) -> f64 {
        self.inner.precision_nm
    }

    #[getter]
    fn sigma_psf_nm(&self) -> (f64, f64) {
        self.inner.sigma_psf_nm
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }
}

/// Fits a 2D Gaussian to a scan given as a list of rows of counts.
#[pyfunction]
#[pyo3(signature = (rows, pixel_size_nm, origin_nm = (0.0, 0.0), weighting = "uniform"))]
fn fit_gaussian_psf(
    rows: Vec<Vec<f64>>,
    pixel_size_nm: f64,
    origin_nm: (f64, f64),
    weighting: &str,
) -> PyResult<PyLocalization> {
    let (n_rows, n_cols) = (rows.len(), rows.first().map_or(0, Vec::len));
    if rows.iter().any(|r| r.len() != n_cols) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    let image = PsfImage::new(pixel_size_nm, origin_nm, n_rows, n_cols, rows.concat()).map_err(to_py)?;
    let weighting: Weighting = parse("weighting", weighting)?;
    let inner = fitting::fit_gaussian_psf(&image, None, weighting).map_err(to_py)?;
    Ok(PyLocalization { inner })
}

/// Gaussian kernel density estimate of a ZPL distribution.
#[pyclass(name = "KernelDensity", frozen)]
struct PyKernelDensity {
    inner: KernelDensityModel,
}

#[pymethods]
impl PyKernelDensity {
    /// `bandwidth_ghz=None` picks Silverman's rule; `site_ids` enables per-site weighting.
    #[staticmethod]
    #[pyo3(signature = (frequencies_ghz, bandwidth_ghz = None, site_ids = None))]
    fn fit(frequencies_ghz: Vec<f64>, bandwidth_ghz: Option<f64>, site_ids: Option<Vec<String>>) -> PyResult<Self> {
        let weighting = if site_ids.is_some() { SampleWeighting::PerSite } else { SampleWeighting::PerTransition };
        let data = ZplDataset::new(frequencies_ghz, site_ids).map_err(to_py)?;
        let bandwidth = bandwidth_ghz.map_or(Bandwidth::AUTO, Bandwidth::Fixed);
        Ok(Self { inner: ensemble::kde_fit(&data, bandwidth, weighting).map_err(to_py)? })
    }

    /// Draws the built-in Gaussian surrogate (`scd` or `pcd`) and fits it.
    #[staticmethod]
    #[pyo3(signature = (name, seed = specreg::rng::DEFAULT_SEED))]
    fn surrogate(name: &str, seed: u64) -> PyResult<Self> {
        let data = ensemble::GaussianSurrogate::by_name(name).and_then(|s| s.generate(seed)).map_err(to_py)?;
        Ok(Self { inner: ensemble::kde_fit(&data, Bandwidth::AUTO, SampleWeighting::PerTransition).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: KernelDensityModel::from_json(text).map_err(to_py)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[getter]
    fn bandwidth_ghz(&self) -> f64 {
        self.inner.bandwidth_ghz
    }

    fn density(&self, frequency_ghz: f64) -> f64 {
        self.inner.density(frequency_ghz)
    }

    fn cdf(&self, frequency_ghz: f64) -> f64 {
        self.inner.cdf(frequency_ghz)
    }

    fn sample(&self, seed: u64, n: usize) -> PyResult<Vec<f64>> {
        ensemble::sample(&self.inner, seed, n).map_err(to_py)
    }
}

/// Readout laser settings used for viability and yield.
#[pyclass(name = "ReadoutPreset", frozen)]
struct PyReadoutPreset {
    inner: ReadoutPreset,
    resolved: yield_mc::ResolvedPreset,
}

impl PyReadoutPreset {
    fn wrap(inner: ReadoutPreset) -> PyResult<Self> {
        let resolved = inner.resolve().map_err(to_py)?;
        Ok(Self { inner, resolved })
    }
}

#[pymethods]
impl PyReadoutPreset {
    #[staticmethod]
    fn msr() -> PyResult<Self> {
        Self::wrap(ReadoutPreset::msr())
    }

    #[staticmethod]
    fn ssr() -> PyResult<Self> {
        Self::wrap(ReadoutPreset::ssr())
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::wrap(ReadoutPreset::from_json(text).map_err(to_py)?)
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.resolved.omega
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.resolved.gamma
    }

    #[getter]
    fn duration_us(&self) -> f64 {
        self.resolved.duration_us
    }

    fn crosstalk(&self, detuning_ghz: f64) -> f64 {
        self.resolved.crosstalk(detuning_ghz)
    }

    fn min_safe_detuning(&self, threshold: f64) -> PyResult<f64> {
        self.resolved.min_safe_detuning(threshold).map_err(to_py)
    }
}

/// (viable, worst pairwise crosstalk) for a set of ZPL frequencies.
#[pyfunction]
fn cluster_viability(frequencies_ghz: Vec<f64>, preset: &PyReadoutPreset, threshold: f64) -> PyResult<(bool, f64)> {
    let v = yield_mc::cluster_viability(&frequencies_ghz, &preset.inner, threshold).map_err(to_py)?;
    Ok((v.viable, v.worst_crosstalk))
}

fn estimate_dict<'py>(py: Python<'py>, e: &yield_mc::YieldEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n", e.n_emitters)?;
    d.set_item("threshold", e.gamma_threshold)?;
    d.set_item("trials", e.trials)?;
    d.set_item("successes", e.successes)?;
    d.set_item("yield", e.yield_)?;
    d.set_item("ci95", e.ci95)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (model, n, preset, threshold, trials, seed = specreg::rng::DEFAULT_SEED))]
fn estimate_yield<'py>(
    py: Python<'py>,
    model: &PyKernelDensity,
    n: usize,
    preset: &PyReadoutPreset,
    threshold: f64,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let e = py
        .detach(|| yield_mc::estimate_yield(&model.inner, n, &preset.inner, threshold, trials, seed))
        .map_err(to_py)?;
    estimate_dict(py, &e)
}

/// One dict per (n, threshold), ordered by n then threshold.
#[pyfunction]
#[pyo3(signature = (model, preset, n_values, thresholds, trials, seed = specreg::rng::DEFAULT_SEED, mode = "worst-case"))]
#[allow(clippy::too_many_arguments)]
fn yield_sweep<'py>(
    py: Python<'py>,
    model: &PyKernelDensity,
    preset: &PyReadoutPreset,
    n_values: Vec<usize>,
    thresholds: Vec<f64>,
    trials: usize,
    seed: u64,
    mode: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mode: ViabilityMode = parse("mode", mode)?;
    let config = SweepConfig { n_values, thresholds, trials, seed, mode };
    let table = py.detach(|| yield_mc::yield_sweep(&model.inner, &preset.inner, &config)).map_err(to_py)?;
    table.rows.iter().map(|e| estimate_dict(py, e)).collect()
}

/// Summary of a frequency list: mean, standard deviation, count.
#[pyfunction]
fn summary_stats(frequencies_ghz: Vec<f64>) -> PyResult<BTreeMap<&'static str, f64>> {
    let data = ZplDataset::new(frequencies_ghz, None).map_err(to_py)?;
    let s = ensemble::summary_stats(&data).map_err(to_py)?;
    Ok(BTreeMap::from([("mean_ghz", s.mean_ghz), ("std_ghz", s.std_ghz), ("count", s.count as f64)]))
}

#[pymodule]
#[pyo3(name = "specreg")]
fn specreg_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("DEFAULT_SEED", specreg::rng::DEFAULT_SEED)?;
    m.add("DEFAULT_DECAY_RATE", specreg::units::DEFAULT_DECAY_RATE)?;
    m.add("NV_ZPL_GHZ", specreg::units::NV_ZPL_GHZ)?;
    m.add_class::<PyEmitter>()?;
    m.add_class::<PyLorentzianFit>()?;
    m.add_class::<PyLocalization>()?;
    m.add_class::<PyKernelDensity>()?;
    m.add_class::<PyReadoutPreset>()?;
    m.add_function(wrap_pyfunction!(transition_crosstalk, m)?)?;
    m.add_function(wrap_pyfunction!(min_safe_detuning, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_rabi, m)?)?;
    m.add_function(wrap_pyfunction!(ghz_to_angular_mhz, m)?)?;
    m.add_function(wrap_pyfunction!(ramsey, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_crosstalk_from_contrast, m)?)?;
    m.add_function(wrap_pyfunction!(run_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lorentzian_sum, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gaussian_psf, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_viability, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_yield, m)?)?;
    m.add_function(wrap_pyfunction!(yield_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(summary_stats, m)?)?;
    Ok(())
}
