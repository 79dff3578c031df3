//! Pitch shifters.
//!
//! - [`src_shift_spectrogram`] rescales the frequency axis of every frame by
//!   `2^(alpha/12)`: sampling-rate conversion carried out in the frequency domain.
//!   Frame count, and therefore duration, is unchanged.
//! - [`source_filter_shift`] splits each frame into a cepstral envelope (filter) and
//!   the residual excitation (source), shifts only the excitation, and recombines it
//!   with the original envelope before Griffin-Lim resynthesis. Timbre is preserved.
//! - [`td_psola_shift`] is the time-domain pitch-synchronous overlap-add baseline.
//!
//! The spectral shift is applied to the linear spectrogram before mel projection,
//! because mel bins are not uniformly spaced and warping them directly would distort
//! the frequency ratio.

mod psola;
mod vocoder;

use serde::{Deserialize, Serialize};

use crate::audio_io::Waveform;
use crate::error::{Error, Result};
use crate::pitch::{track_pitch, Semitones};
use crate::spectral::{
    cepstral_envelope, griffin_lim_from, mel_project, stft, AnalysisConfig, MelSpectrogram,
    Phases, Spectrogram, DEFAULT_GL_ITERATIONS, DEFAULT_LIFTER_ORDER,
};

pub use psola::td_psola_shift;
pub use vocoder::{GriffinLimVocoder, VocoderAdapter};

/// Hard safety bound on `|alpha|`.
pub const MAX_ABS_ALPHA_ST: f64 = 12.0;

/// Envelope values are floored here before dividing them out of a spectrum.
pub const EXCITATION_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMethod {
    /// Whole-spectrum frequency scaling; moves the envelope with the harmonics.
    SrcSpectral,
    /// Excitation scaled under the original envelope.
    SourceFilter,
    TdPsola,
}

impl ShiftMethod {
    pub const ALL: [ShiftMethod; 3] = [Self::SrcSpectral, Self::SourceFilter, Self::TdPsola];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SrcSpectral => "src_spectral",
            Self::SourceFilter => "source_filter",
            Self::TdPsola => "td_psola",
        }
    }
}

impl std::fmt::Display for ShiftMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ShiftMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown shift method `{s}` (src_spectral|source_filter|td_psola)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRequest {
    pub alpha: Semitones,
    pub method: ShiftMethod,
}

pub(crate) fn check_alpha(alpha: Semitones) -> Result<()> {
    if alpha.0.is_finite() && alpha.0.abs() <= MAX_ABS_ALPHA_ST {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha.0))
    }
}

/// Linear interpolation of `frame` at fractional bin `pos`; zero beyond the last bin.
fn sample_at(frame: &[f64], pos: f64) -> f64 {
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match (frame.get(i), frame.get(i + 1)) {
        (Some(&a), Some(&b)) => a + (b - a) * frac,
        (Some(&a), None) if frac == 0.0 => a,
        _ => 0.0,
    }
}

/// Rescales the frequency axis of every frame by `r = 2^(alpha/12)`:
/// `out[k] = in(k / r)` with linear interpolation.
pub fn src_shift_spectrogram(spec: &Spectrogram, alpha: Semitones) -> Result<Spectrogram> {
    check_alpha(alpha)?;
    let r = alpha.ratio();
    let mags = spec
        .mags
        .iter()
        .map(|frame| {
            (0..frame.len())
                .map(|k| sample_at(frame, k as f64 / r))
                .collect()
        })
        .collect();
    Ok(spec.with_mags(mags))
}

fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::PI;
    x - 2.0 * PI * ((x + PI) / (2.0 * PI)).floor()
}

/// Phase-vocoder estimate of the phases of a frequency-scaled spectrogram.
///
/// Each output bin `k` reads the instantaneous frequency of source bin `round(k / r)`
/// (from frame-to-frame phase advance), scales it by `r` and accumulates it over
/// frames. At `alpha = 0` this returns the input phases up to multiples of 2*pi.
/// Used as the Griffin-Lim starting point by the spectral shifters.
pub fn shift_phases(phases: &Phases, alpha: Semitones, cfg: &AnalysisConfig) -> Result<Phases> {
    check_alpha(alpha)?;
    let r = alpha.ratio();
    let n_bins = cfg.n_bins();
    let hop = cfg.hop as f64;
    let bin_rad = 2.0 * std::f64::consts::PI / cfg.fft_size as f64;
    let source: Vec<Option<usize>> = (0..n_bins)
        .map(|k| {
            let j = (k as f64 / r).round() as usize;
            (j < n_bins).then_some(j)
        })
        .collect();
    let mut out: Phases = Vec::with_capacity(phases.len());
    for (t, frame) in phases.iter().enumerate() {
        if frame.len() != n_bins {
            return Err(Error::ShapeMismatch(format!(
                "phase frame {t} has {} bins, expected {n_bins}",
                frame.len()
            )));
        }
        let next: Vec<f64> = match out.last() {
            None => source.iter().map(|j| j.map_or(0.0, |j| frame[j])).collect(),
            Some(prev) => source
                .iter()
                .zip(prev)
                .map(|(j, &acc)| match j {
                    Some(j) => {
                        let expected = bin_rad * *j as f64 * hop;
                        let advance = expected + wrap_phase(frame[*j] - phases[t - 1][*j] - expected);
                        wrap_phase(acc + r * advance)
                    }
                    None => 0.0,
                })
                .collect(),
        };
        out.push(next);
    }
    Ok(out)
}

/// Parameters of the source-filter shifter.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceFilterShifter {
    pub lifter_order: usize,
    pub gl_iterations: usize,
}

impl Default for SourceFilterShifter {
    fn default() -> Self {
        Self {
            lifter_order: DEFAULT_LIFTER_ORDER,
            gl_iterations: DEFAULT_GL_ITERATIONS,
        }
    }
}

impl SourceFilterShifter {
    /// Shifted excitation under the original envelope, as a magnitude spectrogram.
    pub fn shifted_spectrogram(&self, spec: &Spectrogram, alpha: Semitones) -> Result<Spectrogram> {
        let envelope = cepstral_envelope(spec, self.lifter_order)?;
        let excitation = spec.with_mags(
            spec.mags
                .iter()
                .zip(&envelope.mags)
                .map(|(s, e)| s.iter().zip(e).map(|(s, e)| s / e.max(EXCITATION_FLOOR)).collect())
                .collect(),
        );
        let shifted = src_shift_spectrogram(&excitation, alpha)?;
        Ok(spec.with_mags(
            shifted
                .mags
                .iter()
                .zip(&envelope.mags)
                .map(|(x, e)| x.iter().zip(e).map(|(x, e)| x * e).collect())
                .collect(),
        ))
    }

    pub fn shift(&self, w: &Waveform, alpha: Semitones, cfg: &AnalysisConfig) -> Result<Waveform> {
        check_alpha(alpha)?;
        let (spec, phases) = stft(w, cfg)?;
        let shifted = self.shifted_spectrogram(&spec, alpha)?;
        let init = shift_phases(&phases, alpha, cfg)?;
        Ok(griffin_lim_from(&shifted, &init, self.gl_iterations, cfg)?
            .waveform
            .resized(w.len()))
    }
}

/// Timbre-preserving shift; output has the same length as the input.
pub fn source_filter_shift(w: &Waveform, alpha: Semitones, cfg: &AnalysisConfig) -> Result<Waveform> {
    SourceFilterShifter::default().shift(w, alpha, cfg)
}

/// Non-timbre-preserving spectral shift: the whole spectrum, envelope included, is
/// rescaled before Griffin-Lim resynthesis.
pub fn src_spectral_shift(w: &Waveform, alpha: Semitones, cfg: &AnalysisConfig) -> Result<Waveform> {
    check_alpha(alpha)?;
    let (spec, phases) = stft(w, cfg)?;
    let shifted = src_shift_spectrogram(&spec, alpha)?;
    let init = shift_phases(&phases, alpha, cfg)?;
    Ok(griffin_lim_from(&shifted, &init, DEFAULT_GL_ITERATIONS, cfg)?
        .waveform
        .resized(w.len()))
}

/// Vocoder inputs for a two-path (source/filter) neural vocoder: the filter path gets
/// the original mel spectrogram, the source path the frequency-shifted one.
pub fn make_vocgan_ps_inputs(
    w: &Waveform,
    alpha: Semitones,
    cfg: &AnalysisConfig,
) -> Result<(MelSpectrogram, MelSpectrogram)> {
    let (spec, _) = stft(w, cfg)?;
    let filter_input = mel_project(&spec, cfg)?;
    let source_input = mel_project(&src_shift_spectrogram(&spec, alpha)?, cfg)?;
    Ok((source_input, filter_input))
}

pub fn shift(w: &Waveform, req: &ShiftRequest, cfg: &AnalysisConfig) -> Result<Waveform> {
    match req.method {
        ShiftMethod::SrcSpectral => src_spectral_shift(w, req.alpha, cfg),
        ShiftMethod::SourceFilter => source_filter_shift(w, req.alpha, cfg),
        ShiftMethod::TdPsola => {
            check_alpha(req.alpha)?;
            let track = track_pitch(w, cfg)?;
            td_psola_shift(w, req.alpha, &track)
        }
    }
}
