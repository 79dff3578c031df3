use super::stft::StftPlan;
use super::{AnalysisConfig, Phases, Spectrogram};
use crate::audio_io::Waveform;
use crate::error::{Error, Result};

pub const DEFAULT_GL_ITERATIONS: usize = 60;

/// Output of [`griffin_lim_traced`].
#[derive(Debug, Clone)]
pub struct GriffinLimTrace {
    pub waveform: Waveform,
    /// Consistency error after each iteration.
    pub errors: Vec<f64>,
}

/// Frobenius distance between two one-sided magnitude spectrograms, measured over the
/// full two-sided spectrum (interior bins count twice, DC and Nyquist once).
///
/// Griffin-Lim is an alternating projection in exactly this norm, which is what makes
/// its consistency error non-increasing.
pub fn consistency_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for (fa, fb) in a.iter().zip(b) {
        let last = fa.len().saturating_sub(1);
        for (k, (x, y)) in fa.iter().zip(fb).enumerate() {
            let weight = if k == 0 || k == last { 1.0 } else { 2.0 };
            acc += weight * (x - y).powi(2);
        }
    }
    acc.sqrt()
}

pub fn griffin_lim(spec: &Spectrogram, iterations: usize, cfg: &AnalysisConfig) -> Result<Waveform> {
    Ok(griffin_lim_traced(spec, iterations, cfg)?.waveform)
}

/// Phase reconstruction from zero initial phase, recording the consistency error
/// `|| |stft(x_i)| - spec ||` after every iteration.
pub fn griffin_lim_traced(
    spec: &Spectrogram,
    iterations: usize,
    cfg: &AnalysisConfig,
) -> Result<GriffinLimTrace> {
    let zeros = vec![vec![0.0; cfg.n_bins()]; spec.n_frames()];
    griffin_lim_from(spec, &zeros, iterations, cfg)
}

/// Griffin-Lim started from caller-supplied phases instead of zero phase.
///
/// With the exact phases of a consistent spectrogram the first iterate already is the
/// original signal, and later iterations leave it in place.
pub fn griffin_lim_from(
    spec: &Spectrogram,
    init_phases: &Phases,
    iterations: usize,
    cfg: &AnalysisConfig,
) -> Result<GriffinLimTrace> {
    if iterations == 0 {
        return Err(Error::InvalidConfig("griffin_lim needs at least one iteration".into()));
    }
    spec.check_bins(cfg)?;
    if init_phases.len() != spec.n_frames() {
        return Err(Error::ShapeMismatch(format!(
            "{} phase frames for {} magnitude frames",
            init_phases.len(),
            spec.n_frames()
        )));
    }
    let plan = StftPlan::new(cfg);
    let mut phases = init_phases.clone();
    let mut errors = Vec::with_capacity(iterations);
    let mut samples = Vec::new();
    for _ in 0..iterations {
        samples = plan.synthesize(&spec.mags, &phases)?;
        if samples.is_empty() {
            errors.push(0.0);
            continue;
        }
        let (mags, next) = plan.analyze(&samples)?;
        errors.push(consistency_error(&mags, &spec.mags));
        phases = next;
    }
    Ok(GriffinLimTrace {
        waveform: Waveform::new(samples, spec.sample_rate),
        errors,
    })
}
