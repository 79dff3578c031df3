//! Pitch shifting and pitch augmentation for speech synthesis data.
//!
//! The crate is organized bottom-up:
//!
//! - [`audio_io`]: mono 16-bit PCM WAV reading and writing.
//! - [`spectral`]: STFT/ISTFT, mel projection, Griffin-Lim and cepstral envelopes.
//! - [`pitch`]: autocorrelation pitch tracking, semitone arithmetic, pitch marks and
//!   character-level pitch aggregation.
//! - [`shift`]: the three pitch shifters (spectral resampling, source-filter
//!   recombination, TD-PSOLA) and the vocoder adapter seam.
//! - [`metrics`]: MCD, change in mean pitch, envelope distortion and the acceptance filter.
//! - [`augment`]: manifests and the batch augmentation pipeline.
//! - [`trainsched`]: the alternating original/augmented epoch scheduler and a toy model.
//! - [`fixtures`]: deterministic synthetic test signals.

pub mod audio_io;
pub mod augment;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod pitch;
pub mod shift;
pub mod spectral;
pub mod trainsched;

pub use audio_io::{load_wav, save_wav, Waveform};
pub use error::{Error, Result};
pub use pitch::{PitchStats, PitchTrack, Semitones};
pub use spectral::{AnalysisConfig, MelSpectrogram, Spectrogram};
