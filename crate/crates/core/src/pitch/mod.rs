//! Pitch estimation and semitone arithmetic.
//!
//! Pitch offsets are carried in semitones relative to a reference frequency:
//! `st = 12 * log2(f0 / ref_f0)`.

pub(crate) mod marks;
mod tracker;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use marks::{pitch_marks, UNVOICED_MARK_SPACING_SECS};
pub use tracker::{track_pitch, track_pitch_with, TrackerConfig};

/// Speaker-average fundamental frequency of the reference corpus, in Hz.
pub const REFERENCE_F0_HZ: f64 = 248.0;

/// Standard deviation (ST) of mean-referred pitch in the reference corpus.
/// Documentation constant only.
pub const REFERENCE_ST_STD: f64 = 4.11;

/// A signed pitch offset in semitones.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Semitones(pub f64);

impl Semitones {
    pub const ZERO: Semitones = Semitones(0.0);

    pub fn value(self) -> f64 {
        self.0
    }

    /// Frequency ratio `2^(st / 12)`.
    pub fn ratio(self) -> f64 {
        st_to_ratio(self)
    }
}

impl fmt::Display for Semitones {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+} ST", self.0)
    }
}

impl std::ops::Add for Semitones {
    type Output = Semitones;
    fn add(self, rhs: Semitones) -> Semitones {
        Semitones(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Semitones {
    type Output = Semitones;
    fn sub(self, rhs: Semitones) -> Semitones {
        Semitones(self.0 - rhs.0)
    }
}

impl std::ops::Neg for Semitones {
    type Output = Semitones;
    fn neg(self) -> Semitones {
        Semitones(-self.0)
    }
}

pub fn hz_to_st(f0: f64, ref_f0: f64) -> Result<Semitones> {
    if !(f0 > 0.0) {
        return Err(Error::NonPositiveFrequency(f0));
    }
    if !(ref_f0 > 0.0) {
        return Err(Error::NonPositiveFrequency(ref_f0));
    }
    Ok(Semitones(12.0 * (f0 / ref_f0).log2()))
}

pub fn st_to_hz(st: Semitones, ref_f0: f64) -> Result<f64> {
    if !(ref_f0 > 0.0) {
        return Err(Error::NonPositiveFrequency(ref_f0));
    }
    Ok(ref_f0 * st_to_ratio(st))
}

pub fn st_to_ratio(alpha: Semitones) -> f64 {
    (alpha.0 / 12.0).exp2()
}

/// Per-frame f0 estimates aligned with the STFT frames of the same config.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    /// Hz, 0 where unvoiced.
    pub f0: Vec<f64>,
    pub voiced: Vec<bool>,
    pub frame_hop: usize,
    /// Analysis frame length in samples.
    pub frame_len: usize,
    pub sample_rate: u32,
}

impl PitchTrack {
    pub fn n_frames(&self) -> usize {
        self.f0.len()
    }

    pub fn voiced_f0(&self) -> impl Iterator<Item = f64> + '_ {
        self.f0
            .iter()
            .zip(&self.voiced)
            .filter(|(_, &v)| v)
            .map(|(&f, _)| f)
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced.iter().filter(|&&v| v).count()
    }

    /// Geometric mean of voiced f0.
    pub fn geometric_mean_f0(&self) -> Result<f64> {
        geometric_mean(self.voiced_f0())
    }

    /// Time in seconds of the centre of frame `t`.
    pub fn frame_time(&self, t: usize) -> f64 {
        (t * self.frame_hop + self.frame_len / 2) as f64 / self.sample_rate as f64
    }

    /// CSV with header `frame,time_sec,f0_hz,voiced`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "frame,time_sec,f0_hz,voiced")?;
        for (t, (&f, &v)) in self.f0.iter().zip(&self.voiced).enumerate() {
            writeln!(out, "{t},{:.6},{:.4},{}", self.frame_time(t), f, u8::from(v))?;
        }
        Ok(())
    }
}

pub(crate) fn geometric_mean(values: impl Iterator<Item = f64>) -> Result<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), f| (s + f.ln(), n + 1));
    if n == 0 {
        return Err(Error::NoVoicedFrames);
    }
    Ok((sum / n as f64).exp())
}

/// Pitch distribution summary; `st_*` are measured against `mean_f0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchStats {
    /// Geometric mean of voiced f0 in Hz.
    pub mean_f0: f64,
    pub st_mean: f64,
    pub st_std: f64,
    pub voiced_frames: usize,
}

pub fn pitch_stats<'a>(tracks: impl IntoIterator<Item = &'a PitchTrack>) -> Result<PitchStats> {
    let f0: Vec<f64> = tracks.into_iter().flat_map(|t| t.voiced_f0()).collect();
    let mean_f0 = geometric_mean(f0.iter().copied())?;
    let st: Vec<f64> = f0
        .iter()
        .map(|&f| hz_to_st(f, mean_f0).map(Semitones::value))
        .collect::<Result<_>>()?;
    let n = st.len() as f64;
    let st_mean = st.iter().sum::<f64>() / n;
    let st_std = (st.iter().map(|s| (s - st_mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(PitchStats {
        mean_f0,
        st_mean,
        st_std,
        voiced_frames: st.len(),
    })
}

/// Mean voiced-frame pitch of each character in semitones against `ref_f0`.
///
/// `durations[i]` is the number of frames of character `i`. Characters with no voiced
/// frame come back as `None`.
pub fn char_level_pitch(
    track: &PitchTrack,
    durations: &[usize],
    ref_f0: f64,
) -> Result<Vec<Option<Semitones>>> {
    let total: usize = durations.iter().sum();
    if total != track.n_frames() {
        return Err(Error::DurationMismatch {
            expected: track.n_frames(),
            got: total,
        });
    }
    let mut start = 0;
    let mut out = Vec::with_capacity(durations.len());
    for &d in durations {
        let span = start..start + d;
        start += d;
        let mut sum = 0.0;
        let mut count = 0usize;
        for t in span {
            if track.voiced[t] {
                sum += hz_to_st(track.f0[t], ref_f0)?.0;
                count += 1;
            }
        }
        out.push((count > 0).then(|| Semitones(sum / count as f64)));
    }
    Ok(out)
}
