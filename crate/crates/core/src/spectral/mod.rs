//! Short-time spectral analysis shared by the shifters and the metrics.
//!
//! Magnitude (not power, not log) is the canonical domain of [`Spectrogram`];
//! logarithms are taken only inside envelope and cepstral-distance computations.
//! Frames are not center-padded: frame `t` covers samples `[t * hop, t * hop + window)`.

mod envelope;
mod file;
mod griffin_lim;
mod mel;
mod stft;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use envelope::{cepstral_envelope, DEFAULT_LIFTER_ORDER};
pub use file::{read_melspec, write_melspec, MelSpecFile, MELSPEC_MAGIC};
pub use griffin_lim::{
    consistency_error, griffin_lim, griffin_lim_from, griffin_lim_traced, GriffinLimTrace, DEFAULT_GL_ITERATIONS,
};
pub use mel::{hz_to_mel, mel_project, mel_to_hz, MelFilterbank};
pub use stft::{istft, stft, Phases, StftPlan};

/// Frame/FFT/mel parameters for every analysis in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub fft_size: usize,
    pub hop: usize,
    /// Hann window length in samples.
    pub window: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub sample_rate: u32,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            fft_size: 1024,
            hop: 256,
            window: 1024,
            n_mels: 80,
            fmin: 0.0,
            fmax: 8000.0,
            sample_rate: 22050,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.hop == 0 || self.window != 4 * self.hop {
            return bad(format!(
                "window ({}) must be exactly 4 hops ({})",
                self.window, self.hop
            ));
        }
        if self.window > self.fft_size {
            return bad(format!(
                "window ({}) exceeds fft_size ({})",
                self.window, self.fft_size
            ));
        }
        if self.fft_size < 4 || !self.fft_size.is_multiple_of(2) {
            return bad(format!("fft_size ({}) must be even and >= 4", self.fft_size));
        }
        if self.n_mels == 0 {
            return bad("n_mels must be positive".into());
        }
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax) {
            return bad(format!("need 0 <= fmin < fmax, got {}..{}", self.fmin, self.fmax));
        }
        if self.fmax > self.sample_rate as f64 / 2.0 {
            return bad(format!(
                "fmax {} above Nyquist {}",
                self.fmax,
                self.sample_rate as f64 / 2.0
            ));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of analysis frames for a signal of `len` samples (0 if shorter than a window).
    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.window {
            0
        } else {
            1 + (len - self.window) / self.hop
        }
    }

    /// Centre frequency in Hz of linear bin `k`.
    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.fft_size as f64
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len < self.window {
            Err(Error::SignalTooShort {
                len,
                window: self.window,
            })
        } else {
            Ok(())
        }
    }
}

/// Frame-major linear-frequency magnitude spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// `[n_frames][n_bins]` magnitudes.
    pub mags: Vec<Vec<f64>>,
    pub frame_hop: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.mags.len()
    }

    pub fn n_bins(&self) -> usize {
        self.mags.first().map_or(0, Vec::len)
    }

    pub fn zeros(n_frames: usize, n_bins: usize, frame_hop: usize, sample_rate: u32) -> Self {
        Self {
            mags: vec![vec![0.0; n_bins]; n_frames],
            frame_hop,
            sample_rate,
        }
    }

    /// Same metadata, new magnitudes.
    pub fn with_mags(&self, mags: Vec<Vec<f64>>) -> Self {
        Self {
            mags,
            frame_hop: self.frame_hop,
            sample_rate: self.sample_rate,
        }
    }

    pub(crate) fn check_bins(&self, cfg: &AnalysisConfig) -> Result<()> {
        if self.mags.iter().any(|f| f.len() != cfg.n_bins()) {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram rows must have {} bins",
                cfg.n_bins()
            )));
        }
        Ok(())
    }
}

/// Frame-major mel-projected magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    /// `[n_frames][n_mels]`.
    pub mels: Vec<Vec<f64>>,
    pub n_mels: usize,
    pub frame_hop: usize,
    pub sample_rate: u32,
}

impl MelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.mels.len()
    }

    pub fn to_file(&self) -> MelSpecFile {
        MelSpecFile {
            rows: self.mels.clone(),
            n_cols: self.n_mels,
            sample_rate: self.sample_rate,
            hop: self.frame_hop,
        }
    }
}
