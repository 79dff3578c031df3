use super::PitchTrack;
use crate::audio_io::Waveform;

pub const UNVOICED_MARK_SPACING_SECS: f64 = 0.005;

/// Maps a sample index to the analysis frame whose centre is nearest.
pub(crate) fn frame_of(track: &PitchTrack, n: usize) -> usize {
    let centre0 = (track.frame_len / 2) as f64;
    let t = ((n as f64 - centre0) / track.frame_hop as f64).round();
    (t.max(0.0) as usize).min(track.n_frames().saturating_sub(1))
}

/// Period in samples at sample `n`, if that sample falls in a voiced frame.
pub(crate) fn period_at(track: &PitchTrack, n: usize) -> Option<f64> {
    if track.n_frames() == 0 {
        return None;
    }
    let t = frame_of(track, n);
    track.voiced[t].then(|| track.sample_rate as f64 / track.f0[t])
}

/// Pitch marks: one per period at waveform maxima in voiced regions, every 5 ms elsewhere.
///
/// In voiced regions each mark is the largest sample within `[0.8, 1.2]` periods of the
/// previous mark. The result is strictly increasing.
pub fn pitch_marks(w: &Waveform, track: &PitchTrack) -> Vec<usize> {
    let len = w.len();
    let step = ((UNVOICED_MARK_SPACING_SECS * w.sample_rate as f64).round() as usize).max(1);
    let mut marks: Vec<usize> = Vec::new();

    let mut region_start = 0;
    while region_start < len {
        let voiced = period_at(track, region_start).is_some();
        let mut region_end = region_start + 1;
        while region_end < len && period_at(track, region_end).is_some() == voiced {
            region_end += 1;
        }
        let last = marks.last().copied();

        if voiced {
            let first_lo = last.map_or(region_start, |l| region_start.max(l + 1));
            if first_lo < region_end {
                let period = period_at(track, first_lo).unwrap_or(step as f64);
                let hi = (first_lo + period.round() as usize).min(region_end);
                let mut mark = argmax(&w.samples, first_lo, hi);
                marks.push(mark);
                loop {
                    let period = period_at(track, mark).unwrap_or(step as f64);
                    let lo = mark + ((0.8 * period).ceil() as usize).max(1);
                    let full_hi = mark + (1.2 * period).floor() as usize + 1;
                    let hi = full_hi.min(region_end);
                    if lo >= hi {
                        break;
                    }
                    mark = argmax(&w.samples, lo, hi);
                    // a maximum on a truncated window edge is not a period peak
                    if hi < full_hi && mark == hi - 1 {
                        break;
                    }
                    marks.push(mark);
                }
            }
        } else {
            let mut next = last.map_or(region_start, |l| (l + step).max(region_start));
            while next < region_end {
                marks.push(next);
                next += step;
            }
        }
        region_start = region_end;
    }
    marks
}

/// Index of the largest value in `x[lo..hi]`; the first one on ties.
fn argmax(x: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for i in lo + 1..hi {
        if x[i] > x[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::pitch::track_pitch;
    use crate::spectral::AnalysisConfig;
    use proptest::prelude::*;

    #[test]
    fn pulse_train_marks_on_pulses() {
        let cfg = AnalysisConfig::default();
        let w = fixtures::pulse_train(200.0, 1.0, 22050);
        let track = track_pitch(&w, &cfg).unwrap();
        let marks = pitch_marks(&w, &track);
        for pair in marks.windows(2) {
            let d = pair[1] - pair[0];
            assert!(d == 110 || d == 111, "spacing {d}");
        }
        // each mark lands on a pulse at a multiple of 110.25 samples
        for &m in &marks {
            let k = (m as f64 / 110.25).round();
            assert!((m as f64 - k * 110.25).abs() <= 0.5, "mark {m}");
        }
    }

    #[test]
    fn silence_gets_uniform_marks() {
        let cfg = AnalysisConfig::default();
        let w = Waveform::new(vec![0.0; 4000], 22050);
        let track = track_pitch(&w, &cfg).unwrap();
        let marks = pitch_marks(&w, &track);
        let expected: Vec<usize> = (0..4000).step_by(110).collect();
        assert_eq!(marks, expected);
    }

    #[test]
    fn empty_signal_no_marks() {
        let track = PitchTrack {
            f0: vec![],
            voiced: vec![],
            frame_hop: 256,
            frame_len: 1024,
            sample_rate: 22050,
        };
        assert!(pitch_marks(&Waveform::new(vec![], 22050), &track).is_empty());
    }

    #[test]
    fn voiced_spacing_within_twenty_percent() {
        let cfg = AnalysisConfig::default();
        for f in [120.0, 200.0, 310.0] {
            let w = fixtures::vowel(f, 0.6, 22050);
            let track = track_pitch(&w, &cfg).unwrap();
            let marks = pitch_marks(&w, &track);
            let period = 22050.0 / f;
            for pair in marks.windows(2) {
                let d = (pair[1] - pair[0]) as f64;
                assert!((d - period).abs() < 0.2 * period, "{f} Hz spacing {d}");
            }
        }
    }

    #[test]
    fn mixed_voicing_transitions() {
        let cfg = AnalysisConfig::default();
        let mut samples = vec![0.0; 6000];
        samples.extend(fixtures::pulse_train(180.0, 0.4, 22050).samples);
        samples.extend(vec![0.0; 6000]);
        let w = Waveform::new(samples, 22050);
        let track = track_pitch(&w, &cfg).unwrap();
        let marks = pitch_marks(&w, &track);
        assert!(marks.windows(2).all(|p| p[0] < p[1]));
        assert!(marks.iter().any(|&m| m < 4000));
        assert!(marks.iter().any(|&m| m > 13000));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn marks_strictly_increasing(
            seed in any::<u64>(),
            len in 1024usize..5000,
            voiced_mask in prop::collection::vec(any::<bool>(), 16),
            f in 60.0f64..550.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n_frames = 1 + (len - 1024) / 256;
            let voiced: Vec<bool> = (0..n_frames).map(|t| voiced_mask[t % 16]).collect();
            let track = PitchTrack {
                f0: voiced.iter().map(|&v| if v { f } else { 0.0 }).collect(),
                voiced,
                frame_hop: 256,
                frame_len: 1024,
                sample_rate: 22050,
            };
            let marks = pitch_marks(&Waveform::new(samples, 22050), &track);
            prop_assert!(marks.windows(2).all(|p| p[0] < p[1]));
            prop_assert!(marks.iter().all(|&m| m < len));
        }
    }
}
