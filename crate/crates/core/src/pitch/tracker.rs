use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::PitchTrack;
use crate::audio_io::Waveform;
use crate::error::Result;
use crate::spectral::AnalysisConfig;

/// Autocorrelation tracker parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub fmin: f64,
    pub fmax: f64,
    /// Minimum normalized autocorrelation peak for a voiced frame.
    pub voicing_threshold: f64,
    /// Minimum frame RMS for a voiced frame.
    pub rms_threshold: f64,
    /// A peak qualifies as the period if it reaches this fraction of the best peak;
    /// the shortest qualifying lag wins, which avoids picking period multiples.
    pub octave_tolerance: f64,
    /// Cutoff of the low-pass applied before autocorrelation, Hz; 0 disables it.
    /// Broadband pulses otherwise give autocorrelation peaks only a sample or two
    /// wide, and a non-integer period then loses the single-period peak.
    pub lowpass_hz: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            fmin: 50.0,
            fmax: 600.0,
            voicing_threshold: 0.45,
            rms_threshold: 1e-4,
            octave_tolerance: 0.9,
            lowpass_hz: 1500.0,
        }
    }
}

/// Half-length of the low-pass FIR, in taps.
const LOWPASS_HALF_TAPS: usize = 64;

/// Zero-phase Blackman-windowed-sinc low-pass; samples beyond the ends count as zero.
fn lowpass(x: &[f64], cutoff_hz: f64, sample_rate: f64) -> Vec<f64> {
    use std::f64::consts::PI;
    let fc = cutoff_hz / sample_rate;
    let k = LOWPASS_HALF_TAPS as isize;
    let mut taps: Vec<f64> = (-k..=k)
        .map(|i| {
            let ideal = if i == 0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * i as f64).sin() / (PI * i as f64)
            };
            let phase = PI * (i + k) as f64 / k as f64;
            ideal * (0.42 - 0.5 * phase.cos() + 0.08 * (2.0 * phase).cos())
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    (0..x.len() as isize)
        .map(|n| {
            taps.iter()
                .zip(-k..=k)
                .filter_map(|(h, i)| usize::try_from(n + i).ok().and_then(|j| x.get(j)).map(|v| h * v))
                .sum()
        })
        .collect()
}

pub fn track_pitch(w: &Waveform, cfg: &AnalysisConfig) -> Result<PitchTrack> {
    track_pitch_with(w, cfg, &TrackerConfig::default())
}

/// Normalized-autocorrelation pitch tracker with parabolic peak refinement.
///
/// Frames match the STFT frames of `cfg` (no centre padding, rectangular window).
pub fn track_pitch_with(
    w: &Waveform,
    cfg: &AnalysisConfig,
    tcfg: &TrackerConfig,
) -> Result<PitchTrack> {
    cfg.check_len(w.len())?;
    let sr = w.sample_rate as f64;
    let frame_len = cfg.window;
    let n_frames = cfg.n_frames(w.len());
    let lag_min = ((sr / tcfg.fmax).floor() as usize).max(2);
    let lag_max = ((sr / tcfg.fmin).ceil() as usize).min(frame_len - 2);

    let fft_len = (2 * frame_len).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    let mut prefix = vec![0.0; frame_len + 1];

    let filtered;
    let analysed: &[f64] = if tcfg.lowpass_hz > 0.0 && tcfg.lowpass_hz < sr / 2.0 {
        filtered = lowpass(&w.samples, tcfg.lowpass_hz, sr);
        &filtered
    } else {
        &w.samples
    };

    let mut f0 = vec![0.0; n_frames];
    let mut voiced = vec![false; n_frames];
    for t in 0..n_frames {
        let span = t * cfg.hop..t * cfg.hop + frame_len;
        let raw = &w.samples[span.clone()];
        let rms = (raw.iter().map(|x| x * x).sum::<f64>() / frame_len as f64).sqrt();
        if rms < tcfg.rms_threshold {
            continue;
        }
        let frame = &analysed[span];
        let mean = frame.iter().sum::<f64>() / frame_len as f64;

        buf.fill(Complex::new(0.0, 0.0));
        for (b, &x) in buf.iter_mut().zip(frame) {
            b.re = x - mean;
        }
        for i in 0..frame_len {
            prefix[i + 1] = prefix[i] + buf[i].re * buf[i].re;
        }
        fwd.process(&mut buf);
        for b in buf.iter_mut() {
            *b = Complex::new(b.norm_sqr(), 0.0);
        }
        inv.process(&mut buf);

        // r(lag) = sum x[n] x[n+lag] / sqrt(E[0..N-lag] * E[lag..N])
        let r = |lag: usize| -> f64 {
            let head = prefix[frame_len - lag];
            let tail = prefix[frame_len] - prefix[lag];
            let denom = (head * tail).sqrt();
            if denom <= 0.0 {
                0.0
            } else {
                buf[lag].re / fft_len as f64 / denom
            }
        };
        let acf: Vec<f64> = (lag_min - 1..=lag_max + 1).map(r).collect();
        let at = |lag: usize| acf[lag + 1 - lag_min];

        let peaks: Vec<usize> = (lag_min..=lag_max)
            .filter(|&l| at(l) > at(l - 1) && at(l) >= at(l + 1))
            .collect();
        let Some(best) = peaks.iter().map(|&l| at(l)).reduce(f64::max) else {
            continue;
        };
        let lag = peaks
            .into_iter()
            .find(|&l| at(l) >= tcfg.octave_tolerance * best)
            .expect("best peak qualifies");

        let (a, b, c) = (at(lag - 1), at(lag), at(lag + 1));
        let curvature = a - 2.0 * b + c;
        let delta = if curvature < 0.0 {
            (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let peak = b - 0.25 * (a - c) * delta;
        let freq = sr / (lag as f64 + delta);
        if peak >= tcfg.voicing_threshold && (tcfg.fmin..=tcfg.fmax).contains(&freq) {
            f0[t] = freq;
            voiced[t] = true;
        }
    }
    Ok(PitchTrack {
        f0,
        voiced,
        frame_hop: cfg.hop,
        frame_len,
        sample_rate: w.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::pitch::hz_to_st;

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn sine_200_all_voiced() {
        let cfg = AnalysisConfig::default();
        let w = fixtures::sine(200.0, 1.0, 22050);
        let track = track_pitch(&w, &cfg).unwrap();
        assert_eq!(track.n_frames(), 83);
        assert!(track.voiced.iter().all(|&v| v));
        for &f in &track.f0 {
            assert!((f - 200.0).abs() <= 1.0, "{f}");
        }
    }

    #[test]
    fn silence_unvoiced() {
        let cfg = AnalysisConfig::default();
        let w = Waveform::new(vec![0.0; 22050], 22050);
        let track = track_pitch(&w, &cfg).unwrap();
        assert!(track.voiced.iter().all(|&v| !v));
        assert!(track.f0.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn pulse_train_200() {
        let cfg = AnalysisConfig::default();
        let w = fixtures::pulse_train(200.0, 1.0, 22050);
        let track = track_pitch(&w, &cfg).unwrap();
        assert!(track.voiced.iter().all(|&v| v));
        for &f in &track.f0 {
            assert!((f - 200.0).abs() <= 2.0, "{f}");
        }
    }

    #[test]
    fn sine_sweep_of_frequencies_within_tenth_semitone() {
        let cfg = AnalysisConfig::default();
        for f in [80.0, 97.0, 123.0, 150.0, 211.0, 248.0, 333.0, 440.0, 500.0] {
            let w = fixtures::sine(f, 0.5, 22050);
            let track = track_pitch(&w, &cfg).unwrap();
            let errs: Vec<f64> = track
                .voiced_f0()
                .map(|e| hz_to_st(e, f).unwrap().0.abs())
                .collect();
            assert_eq!(errs.len(), track.n_frames(), "{f} Hz not fully voiced");
            assert!(median(errs) <= 0.1, "{f} Hz");
        }
    }

    #[test]
    fn vowel_fixtures_track_their_f0() {
        let cfg = AnalysisConfig::default();
        for f in [150.0, 200.0, 250.0] {
            let w = fixtures::vowel(f, 1.0, 22050);
            let track = track_pitch(&w, &cfg).unwrap();
            assert!(track.voiced.iter().all(|&v| v));
            let m = track.geometric_mean_f0().unwrap();
            assert!(hz_to_st(m, f).unwrap().0.abs() < 0.05, "{f}: {m}");
        }
    }

    #[test]
    fn lowpass_passes_low_and_stops_high() {
        let sr = 22050.0;
        let gain = |f: f64| {
            let x: Vec<f64> = (0..4000).map(|n| (2.0 * std::f64::consts::PI * f * n as f64 / sr).sin()).collect();
            let y = lowpass(&x, 1500.0, sr);
            let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
            rms(&y[500..3500]) / rms(&x[500..3500])
        };
        assert!((gain(300.0) - 1.0).abs() < 1e-3);
        assert!(gain(4000.0) < 1e-3);
    }

    #[test]
    fn pulse_trains_with_fractional_periods() {
        // 280.6 Hz has a period of 78.58 samples; without low-passing the
        // two-period peak wins and the track drops an octave
        let cfg = AnalysisConfig::default();
        for f in [280.6, 315.0, 187.3] {
            let w = fixtures::pulse_train(f, 0.5, 22050);
            let track = track_pitch(&w, &cfg).unwrap();
            assert_eq!(track.voiced_count(), track.n_frames());
            let m = median(track.voiced_f0().collect());
            assert!(hz_to_st(m, f).unwrap().0.abs() < 0.1, "{f}: {m}");
        }
    }

    #[test]
    fn too_short() {
        let cfg = AnalysisConfig::default();
        assert!(track_pitch(&Waveform::new(vec![0.0; 10], 22050), &cfg).is_err());
    }
}
