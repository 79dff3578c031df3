//! Python bindings: waveforms, pitch tracking, the shifters, metrics, the augmentation
//! pipeline and the toy training schedule.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use pitchforge::augment::{self, Manifest};
use pitchforge::fixtures::{self, FixtureKind};
use pitchforge::metrics::{self, AcceptancePolicy};
use pitchforge::pitch::{self, PitchTrack};
use pitchforge::shift::{self, ShiftMethod, ShiftRequest};
use pitchforge::spectral::AnalysisConfig;
use pitchforge::trainsched::{self, TrainingPlan};
use pitchforge::{Semitones, Waveform};

create_exception!(pitchforge_py, PitchforgeError, PyException);

fn err(e: pitchforge::Error) -> PyErr {
    PitchforgeError::new_err(e.to_string())
}

/// Converts any serializable value into plain Python objects via JSON.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn method(name: &str) -> PyResult<ShiftMethod> {
    name.parse().map_err(PyValueError::new_err)
}

/// Mono audio with samples in [-1, 1].
#[pyclass(name = "Waveform", module = "pitchforge_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyWaveform {
    inner: Waveform,
}

#[pymethods]
impl PyWaveform {
    #[new]
    fn new(samples: Vec<f64>, sample_rate: u32) -> PyResult<Self> {
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(PyValueError::new_err("samples must be finite"));
        }
        Ok(Self {
            inner: Waveform::new(samples, sample_rate),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        pitchforge::load_wav(path).map(|inner| Self { inner }).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        pitchforge::save_wav(path, &self.inner).map_err(err)
    }

    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.inner.samples.clone()
    }

    #[getter]
    fn sample_rate(&self) -> u32 {
        self.inner.sample_rate
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Waveform({} samples @ {} Hz)", self.inner.len(), self.inner.sample_rate)
    }
}

/// Frame-wise f0 in Hz with voicing flags.
#[pyclass(name = "PitchTrack", module = "pitchforge_py", frozen, skip_from_py_object)]
pub struct PyPitchTrack {
    inner: PitchTrack,
}

#[pymethods]
impl PyPitchTrack {
    #[getter]
    fn f0(&self) -> Vec<f64> {
        self.inner.f0.clone()
    }

    #[getter]
    fn voiced(&self) -> Vec<bool> {
        self.inner.voiced.clone()
    }

    fn geometric_mean_f0(&self) -> PyResult<f64> {
        self.inner.geometric_mean_f0().map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.n_frames()
    }
}

#[pyfunction]
#[pyo3(signature = (kind, f0, seconds = 1.0, sample_rate = 22050))]
fn fixture(kind: &str, f0: f64, seconds: f64, sample_rate: u32) -> PyResult<PyWaveform> {
    let kind: FixtureKind = kind.parse().map_err(PyValueError::new_err)?;
    if !(f0 > 0.0 && seconds > 0.0) {
        return Err(PyValueError::new_err("f0 and seconds must be positive"));
    }
    Ok(PyWaveform {
        inner: fixtures::generate(kind, f0, seconds, sample_rate),
    })
}

#[pyfunction]
fn hz_to_st(f0: f64, ref_f0: f64) -> PyResult<f64> {
    pitch::hz_to_st(f0, ref_f0).map(|s| s.0).map_err(err)
}

#[pyfunction]
fn st_to_ratio(alpha: f64) -> f64 {
    pitch::st_to_ratio(Semitones(alpha))
}

#[pyfunction]
fn track_pitch(w: PyRef<'_, PyWaveform>) -> PyResult<PyPitchTrack> {
    pitch::track_pitch(&w.inner, &AnalysisConfig::default())
        .map(|inner| PyPitchTrack { inner })
        .map_err(err)
}

/// Pitch-shifts `w` by `alpha` semitones with `src_spectral`, `source_filter` or `td_psola`.
#[pyfunction]
#[pyo3(signature = (w, alpha, method = "source_filter"))]
fn shift_waveform(py: Python<'_>, w: PyRef<'_, PyWaveform>, alpha: f64, method: &str) -> PyResult<PyWaveform> {
    let req = ShiftRequest {
        alpha: Semitones(alpha),
        method: self::method(method)?,
    };
    let input = w.inner.clone();
    py.detach(|| shift::shift(&input, &req, &AnalysisConfig::default()))
        .map(|inner| PyWaveform { inner })
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, order = metrics::DEFAULT_MCD_ORDER))]
fn mcd(a: PyRef<'_, PyWaveform>, b: PyRef<'_, PyWaveform>, order: usize) -> PyResult<f64> {
    metrics::mcd(&a.inner, &b.inner, &AnalysisConfig::default(), order).map_err(err)
}

#[pyfunction]
fn envelope_mcd(a: PyRef<'_, PyWaveform>, b: PyRef<'_, PyWaveform>) -> PyResult<f64> {
    metrics::envelope_mcd(&a.inner, &b.inner, &AnalysisConfig::default()).map_err(err)
}

#[pyfunction]
fn delta_mean_pitch(orig: PyRef<'_, PyWaveform>, shifted: PyRef<'_, PyWaveform>) -> PyResult<f64> {
    metrics::delta_mean_pitch(&orig.inner, &shifted.inner, &AnalysisConfig::default())
        .map(|s| s.0)
        .map_err(err)
}

/// Returns the evaluation report as a dict. `policy` is a dict of policy overrides.
#[pyfunction]
#[pyo3(signature = (orig, shifted, alpha, policy = None))]
fn evaluate_shift<'py>(
    py: Python<'py>,
    orig: PyRef<'_, PyWaveform>,
    shifted: PyRef<'_, PyWaveform>,
    alpha: f64,
    policy: Option<Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let policy: AcceptancePolicy = match policy {
        Some(p) => from_py(py, &p)?,
        None => AcceptancePolicy::default(),
    };
    policy.validate().map_err(err)?;
    let report = metrics::evaluate_shift(
        &orig.inner,
        &shifted.inner,
        Semitones(alpha),
        &policy,
        &AnalysisConfig::default(),
    )
    .map_err(err)?;
    to_py(py, &report)
}

/// Augments the manifest at `manifest_path` into `out_dir`.
///
/// Writes `aug.jsonl` and `report.jsonl` there and returns the list of candidate reports.
#[pyfunction]
#[pyo3(signature = (manifest_path, alphas, out_dir, method = "source_filter", policy = None, jobs = 1))]
fn build_augmented<'py>(
    py: Python<'py>,
    manifest_path: PathBuf,
    alphas: Vec<f64>,
    out_dir: PathBuf,
    method: &str,
    policy: Option<Bound<'py, PyAny>>,
    jobs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let policy: AcceptancePolicy = match policy {
        Some(p) => from_py(py, &p)?,
        None => AcceptancePolicy::default(),
    };
    let method = self::method(method)?;
    let alphas: Vec<Semitones> = alphas.into_iter().map(Semitones).collect();
    let report = py.detach(|| -> pitchforge::Result<_> {
        let m = Manifest::load(&manifest_path)?;
        let report_path = out_dir.join(augment::REPORT_FILE);
        match augment::build_augmented(&m, &alphas, method, &policy, &out_dir, jobs) {
            Ok(o) => {
                augment::write_report(&report_path, &o.report)?;
                o.manifest.save(out_dir.join("aug.jsonl"))?;
                Ok(o.report)
            }
            Err(pitchforge::Error::EmptyResult(report)) => {
                augment::write_report(&report_path, &report)?;
                Err(pitchforge::Error::EmptyResult(report))
            }
            Err(e) => Err(e),
        }
    });
    to_py(py, &report.map_err(err)?)
}

/// Runs the alternating schedule on the built-in three-pitch toy task and returns the
/// epoch logs as dicts.
#[pyfunction]
#[pyo3(signature = (epochs, seed = 0, dim = 16, n_mels = 8))]
fn toy_schedule<'py>(py: Python<'py>, epochs: usize, seed: u64, dim: usize, n_mels: usize) -> PyResult<Bound<'py, PyAny>> {
    let (d_orig, d_aug) = trainsched::toy_task(n_mels, seed);
    let plan = TrainingPlan {
        epochs,
        d_orig,
        d_aug,
        batch_size: 1,
        seed,
    };
    let mut model = trainsched::toy_model(dim, n_mels, seed).map_err(err)?;
    let logs = trainsched::run_training(&mut model, &plan).map_err(err)?;
    to_py(py, &logs)
}

#[pyfunction]
fn length_regulate(h: Vec<Vec<f64>>, durations: Vec<usize>) -> Vec<Vec<f64>> {
    trainsched::length_regulate(&h, &durations)
}

#[pymodule]
fn pitchforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds every class and function to `m`. Also used to embed the module without importing it.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PitchforgeError", m.py().get_type::<PitchforgeError>())?;
    m.add_class::<PyWaveform>()?;
    m.add_class::<PyPitchTrack>()?;
    m.add_function(wrap_pyfunction!(fixture, m)?)?;
    m.add_function(wrap_pyfunction!(hz_to_st, m)?)?;
    m.add_function(wrap_pyfunction!(st_to_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(track_pitch, m)?)?;
    m.add_function(wrap_pyfunction!(shift_waveform, m)?)?;
    m.add_function(wrap_pyfunction!(mcd, m)?)?;
    m.add_function(wrap_pyfunction!(envelope_mcd, m)?)?;
    m.add_function(wrap_pyfunction!(delta_mean_pitch, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_shift, m)?)?;
    m.add_function(wrap_pyfunction!(build_augmented, m)?)?;
    m.add_function(wrap_pyfunction!(toy_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(length_regulate, m)?)?;
    Ok(())
}
