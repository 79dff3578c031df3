use std::f64::consts::PI;

use super::check_alpha;
use crate::audio_io::Waveform;
use crate::error::{Error, Result};
use crate::pitch::marks::period_at;
use crate::pitch::{pitch_marks, PitchTrack, Semitones};

/// Half-width, in samples, of the Lanczos interpolation kernel.
const LANCZOS_TAPS: isize = 8;

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-12 {
        1.0
    } else {
        (PI * z).sin() / (PI * z)
    }
}

/// Band-limited value of `x` at fractional position `pos` (zero outside the signal).
/// Exact at integer positions.
fn interpolate(x: &[f64], pos: f64) -> f64 {
    let base = pos.floor() as isize;
    let frac = pos - base as f64;
    if frac.abs() < 1e-9 {
        return usize::try_from(base).ok().and_then(|i| x.get(i)).copied().unwrap_or(0.0);
    }
    let a = LANCZOS_TAPS as f64;
    let mut acc = 0.0;
    for k in base - LANCZOS_TAPS + 1..=base + LANCZOS_TAPS {
        if let Some(&v) = usize::try_from(k).ok().and_then(|i| x.get(i)) {
            let z = pos - k as f64;
            acc += v * sinc(z) * sinc(z / a);
        }
    }
    acc
}

/// Sub-sample position of the local maximum at `m` by parabolic fit.
fn refine_peak(x: &[f64], m: usize) -> f64 {
    if m == 0 || m + 1 >= x.len() {
        return m as f64;
    }
    let (a, b, c) = (x[m - 1], x[m], x[m + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return m as f64;
    }
    m as f64 + (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

/// Adds the Hann-windowed segment of `x` centred on `analysis` into the output centred
/// on `synthesis`; both may be fractional. The window has half-width `half`.
fn overlap_add(x: &[f64], acc: &mut [f64], wsum: &mut [f64], analysis: f64, synthesis: f64, half: f64) {
    let half = half.max(1.0);
    let lo = (synthesis - half).floor().max(0.0) as usize;
    let hi = ((synthesis + half).ceil() as usize).min(acc.len().saturating_sub(1));
    for n in lo..=hi {
        let d = n as f64 - synthesis;
        if d.abs() >= half {
            continue;
        }
        let src = analysis + d;
        if src < 0.0 || src > (x.len() - 1) as f64 {
            continue;
        }
        let w = 0.5 * (1.0 + (PI * d / half).cos());
        acc[n] += w * interpolate(x, src);
        wsum[n] += w;
    }
}

/// Time-domain pitch-synchronous overlap-add pitch shift.
///
/// Voiced pitch marks (refined to sub-sample precision) are re-spaced by `period / r`
/// with `r = 2^(alpha/12)`; each synthesis mark takes the nearest analysis segment, two
/// local periods long and Hann windowed, placed with band-limited interpolation.
/// Unvoiced marks keep their positions, so unvoiced regions pass through unchanged. The
/// overlap-add is normalized by the summed window and the output has the input's length.
pub fn td_psola_shift(w: &Waveform, alpha: Semitones, track: &PitchTrack) -> Result<Waveform> {
    check_alpha(alpha)?;
    if track.sample_rate != w.sample_rate {
        return Err(Error::TrackMismatch(format!(
            "track at {} Hz, signal at {} Hz",
            track.sample_rate, w.sample_rate
        )));
    }
    let expected = if w.len() < track.frame_len {
        0
    } else {
        1 + (w.len() - track.frame_len) / track.frame_hop
    };
    if track.n_frames() != expected || track.voiced.len() != track.f0.len() {
        return Err(Error::TrackMismatch(format!(
            "track has {} frames, signal of {} samples needs {expected}",
            track.n_frames(),
            w.len()
        )));
    }

    let x = &w.samples;
    let marks = pitch_marks(w, track);
    if marks.is_empty() {
        return Ok(w.clone());
    }
    let voiced: Vec<bool> = marks.iter().map(|&m| period_at(track, m).is_some()).collect();
    let r = alpha.ratio();
    let mut acc = vec![0.0; x.len()];
    let mut wsum = vec![0.0; x.len()];

    let mut i = 0;
    while i < marks.len() {
        if !voiced[i] {
            let prev = if i > 0 { marks[i] - marks[i - 1] } else { 0 };
            let next = marks.get(i + 1).map_or(0, |&n| n - marks[i]);
            let m = marks[i] as f64;
            overlap_add(x, &mut acc, &mut wsum, m, m, prev.max(next) as f64);
            i += 1;
            continue;
        }
        let start = i;
        while i < marks.len() && voiced[i] {
            i += 1;
        }
        let run: Vec<f64> = marks[start..i].iter().map(|&m| refine_peak(x, m)).collect();
        // local period of each analysis mark from the spacing to its neighbours
        let periods: Vec<f64> = (0..run.len())
            .map(|k| {
                let before = k.checked_sub(1).map(|p| run[k] - run[p]);
                let after = run.get(k + 1).map(|n| n - run[k]);
                match (before, after) {
                    (Some(a), Some(b)) => 0.5 * (a + b),
                    (Some(a), None) | (None, Some(a)) => a,
                    (None, None) => period_at(track, marks[start + k]).unwrap_or(1.0),
                }
            })
            .collect();
        let last = run[run.len() - 1];
        let mut t = run[0];
        let mut nearest = 0;
        while t <= last + 1e-9 {
            while nearest + 1 < run.len() && (run[nearest + 1] - t).abs() <= (run[nearest] - t).abs() {
                nearest += 1;
            }
            let period = periods[nearest];
            overlap_add(x, &mut acc, &mut wsum, run[nearest], t, period);
            let spacing = run.get(nearest + 1).map_or(period, |n| n - run[nearest]);
            t += spacing / r;
        }
    }

    let samples = x
        .iter()
        .zip(acc.iter().zip(&wsum))
        .map(|(&orig, (&a, &s))| if s > 1e-6 { a / s } else { orig })
        .collect();
    Ok(Waveform::new(samples, w.sample_rate))
}
