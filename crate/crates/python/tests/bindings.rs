use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn module(py: Python<'_>) -> Bound<'_, PyModule> {
    let m = PyModule::new(py, "pitchforge_py").unwrap();
    pitchforge_py::register(&m).unwrap();
    m
}

#[test]
fn shift_and_evaluate_through_python() {
    Python::initialize();
    Python::attach(|py| {
        let m = module(py);
        let w = m.getattr("fixture").unwrap().call1(("vowel", 200.0)).unwrap();
        assert_eq!(w.len().unwrap(), 22050);
        let s = m.getattr("shift_waveform").unwrap().call1((&w, 2.0)).unwrap();
        let report = m.getattr("evaluate_shift").unwrap().call1((&w, &s, 2.0)).unwrap();
        let report = report.cast::<PyDict>().unwrap();
        assert!(report.get_item("accepted").unwrap().unwrap().extract::<bool>().unwrap());
        let st: f64 = m.getattr("hz_to_st").unwrap().call1((400.0, 200.0)).unwrap().extract().unwrap();
        assert!((st - 12.0).abs() < 1e-12);
    });
}

#[test]
fn errors_raise_the_module_exception() {
    Python::initialize();
    Python::attach(|py| {
        let m = module(py);
        let silent = m.getattr("Waveform").unwrap().call1((vec![0.0f64; 4096], 22050u32)).unwrap();
        let track = m.getattr("track_pitch").unwrap().call1((&silent,)).unwrap();
        let e = track.call_method0("geometric_mean_f0").unwrap_err();
        let exc = m.getattr("PitchforgeError").unwrap();
        assert!(e.get_type(py).is(&exc));
        let bad = m.getattr("shift_waveform").unwrap().call1((&silent, 1.0, "nope")).unwrap_err();
        assert!(bad.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}

#[test]
fn toy_schedule_logs_alternate() {
    Python::initialize();
    Python::attach(|py| {
        let m = module(py);
        let logs = m.getattr("toy_schedule").unwrap().call1((4,)).unwrap();
        let logs = logs.cast::<PyList>().unwrap();
        let kinds: Vec<String> = logs
            .iter()
            .map(|l| l.get_item("dataset").unwrap().extract().unwrap())
            .collect();
        assert_eq!(kinds, ["orig", "aug", "orig", "aug"]);
    });
}
