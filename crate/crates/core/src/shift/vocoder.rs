use crate::audio_io::Waveform;
use crate::error::{Error, Result};
use crate::spectral::{
    cepstral_envelope, griffin_lim, AnalysisConfig, MelFilterbank, MelSpectrogram, Spectrogram,
    DEFAULT_GL_ITERATIONS, DEFAULT_LIFTER_ORDER,
};

use super::EXCITATION_FLOOR;

/// A waveform generator fed separately on its source (pitch) and filter (timbre) paths.
///
/// A neural two-path vocoder plugs in here. Implementations should return roughly
/// `n_frames * hop` samples (within one window).
pub trait VocoderAdapter {
    fn synthesize(&self, source_input: &MelSpectrogram, filter_input: &MelSpectrogram) -> Result<Waveform>;
}

/// Deterministic stand-in for a neural vocoder: approximate mel inversion, excitation
/// of the source path recombined with the envelope of the filter path, then Griffin-Lim.
#[derive(Debug, Clone)]
pub struct GriffinLimVocoder {
    pub cfg: AnalysisConfig,
    pub lifter_order: usize,
    pub iterations: usize,
}

impl GriffinLimVocoder {
    pub fn new(cfg: AnalysisConfig) -> Self {
        Self {
            cfg,
            lifter_order: DEFAULT_LIFTER_ORDER,
            iterations: DEFAULT_GL_ITERATIONS,
        }
    }
}

impl VocoderAdapter for GriffinLimVocoder {
    fn synthesize(&self, source_input: &MelSpectrogram, filter_input: &MelSpectrogram) -> Result<Waveform> {
        if source_input.n_frames() != filter_input.n_frames() {
            return Err(Error::FrameCountMismatch {
                a: source_input.n_frames(),
                b: filter_input.n_frames(),
            });
        }
        for m in [source_input, filter_input] {
            if m.n_mels != self.cfg.n_mels || m.mels.iter().any(|f| f.len() != self.cfg.n_mels) {
                return Err(Error::ShapeMismatch(format!(
                    "mel input must have {} channels",
                    self.cfg.n_mels
                )));
            }
        }
        let fb = MelFilterbank::new(&self.cfg);
        let to_linear = |m: &MelSpectrogram| Spectrogram {
            mags: m.mels.iter().map(|f| fb.invert(f)).collect(),
            frame_hop: self.cfg.hop,
            sample_rate: m.sample_rate,
        };
        let source = to_linear(source_input);
        let filter = to_linear(filter_input);
        let source_env = cepstral_envelope(&source, self.lifter_order)?;
        let filter_env = cepstral_envelope(&filter, self.lifter_order)?;
        let mags = source
            .mags
            .iter()
            .zip(&source_env.mags)
            .zip(&filter_env.mags)
            .map(|((s, se), fe)| {
                s.iter()
                    .zip(se)
                    .zip(fe)
                    .map(|((s, se), fe)| s / se.max(EXCITATION_FLOOR) * fe)
                    .collect()
            })
            .collect();
        griffin_lim(&source.with_mags(mags), self.iterations, &self.cfg)
    }
}
