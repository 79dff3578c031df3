//! Objective evaluation of pitch-shifted speech and the augmented-sample acceptance filter.
//!
//! Mel-cepstra are the orthonormal DCT-II of natural-log mel magnitudes; `c0` is dropped
//! so the distances ignore overall gain. Signals are compared frame by frame without
//! time warping, which is valid because every shifter preserves the frame count.

use serde::{Deserialize, Serialize};

use crate::audio_io::Waveform;
use crate::error::{Error, Result};
use crate::pitch::{geometric_mean, hz_to_st, track_pitch, Semitones};
use crate::spectral::{
    cepstral_envelope, stft, AnalysisConfig, MelFilterbank, Spectrogram, DEFAULT_LIFTER_ORDER,
};

pub const DEFAULT_MCD_ORDER: usize = 13;

/// `10 / ln 10`: converts natural-log cepstral distance to dB.
const DB_PER_NEPER: f64 = 10.0 / std::f64::consts::LN_10;

const LOG_FLOOR: f64 = 1e-10;

/// Cepstral-scaled DCT-II coefficients `1..=order` of `x`:
/// `c_k = (1/N) * sum_n x_n cos(pi k (n + 1/2) / N)`.
///
/// With this scaling a log spectrum expands as `c_0 + 2 * sum_k c_k cos(..)`, so the
/// MCD formula below is the RMS log-spectral distance in dB (c0 excluded).
fn dct_ii(x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (1..=order)
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| v * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos())
                .sum();
            s / n
        })
        .collect()
}

/// Mel-cepstra (`c1..=c_order`) for each frame of a linear magnitude spectrogram.
pub fn mel_cepstra(spec: &Spectrogram, cfg: &AnalysisConfig, order: usize) -> Vec<Vec<f64>> {
    let fb = MelFilterbank::new(cfg);
    spec.mags
        .iter()
        .map(|frame| {
            let logmel: Vec<f64> = fb.apply(frame).iter().map(|m| m.max(LOG_FLOOR).ln()).collect();
            dct_ii(&logmel, order)
        })
        .collect()
}

/// Mean over frames of `(10 / ln 10) * sqrt(2 * sum_i (c_i - c'_i)^2)`.
pub fn mcd_from_cepstra(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::FrameCountMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(ca, cb)| {
            let sq: f64 = ca.iter().zip(cb).map(|(x, y)| (x - y).powi(2)).sum();
            DB_PER_NEPER * (2.0 * sq).sqrt()
        })
        .sum();
    Ok(total / a.len() as f64)
}

fn aligned_spectra(a: &Waveform, b: &Waveform, cfg: &AnalysisConfig) -> Result<(Spectrogram, Spectrogram)> {
    if a.sample_rate != b.sample_rate {
        return Err(Error::SampleRateMismatch {
            a: a.sample_rate,
            b: b.sample_rate,
        });
    }
    let (na, nb) = (cfg.n_frames(a.len()), cfg.n_frames(b.len()));
    if na != nb {
        return Err(Error::FrameCountMismatch { a: na, b: nb });
    }
    Ok((stft(a, cfg)?.0, stft(b, cfg)?.0))
}

/// Mel-cepstral distortion in dB between two frame-aligned signals.
pub fn mcd(a: &Waveform, b: &Waveform, cfg: &AnalysisConfig, order: usize) -> Result<f64> {
    let (sa, sb) = aligned_spectra(a, b, cfg)?;
    mcd_from_cepstra(&mel_cepstra(&sa, cfg, order), &mel_cepstra(&sb, cfg, order))
}

/// MCD computed on cepstral envelopes instead of raw spectra, so harmonic positions do
/// not contribute; only timbre differences do.
pub fn envelope_mcd(a: &Waveform, b: &Waveform, cfg: &AnalysisConfig) -> Result<f64> {
    let (sa, sb) = aligned_spectra(a, b, cfg)?;
    let ea = cepstral_envelope(&sa, DEFAULT_LIFTER_ORDER)?;
    let eb = cepstral_envelope(&sb, DEFAULT_LIFTER_ORDER)?;
    mcd_from_cepstra(
        &mel_cepstra(&ea, cfg, DEFAULT_MCD_ORDER),
        &mel_cepstra(&eb, cfg, DEFAULT_MCD_ORDER),
    )
}

/// Change in average pitch: `12 * log2(geomean_f0(shifted) / geomean_f0(orig))`.
pub fn delta_mean_pitch(orig: &Waveform, shifted: &Waveform, cfg: &AnalysisConfig) -> Result<Semitones> {
    let fo = geometric_mean(track_pitch(orig, cfg)?.voiced_f0())?;
    let fs = geometric_mean(track_pitch(shifted, cfg)?.voiced_f0())?;
    hz_to_st(fs, fo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    /// Every constraint is checked for every sample.
    #[default]
    PerSample,
    /// Only the alpha range is enforced; measured metrics are reported but not gated.
    RangeOnly,
}

/// Thresholds an augmented sample must meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcceptancePolicy {
    pub max_alpha_error_st: f64,
    pub max_envelope_mcd_db: f64,
    /// Samples are accepted only for `|alpha| <= max_abs_alpha_st`.
    pub max_abs_alpha_st: f64,
    /// Upper bound on an external pronunciation score (e.g. syllable error rate),
    /// used by the alpha* exploration.
    pub max_external_score: f64,
    /// Minimum listening-quality score for alpha*. Recorded for reference; no
    /// quality predictor is implemented.
    pub min_quality_score: f64,
    pub mode: PolicyMode,
}

impl Default for AcceptancePolicy {
    fn default() -> Self {
        Self {
            max_alpha_error_st: 0.5,
            max_envelope_mcd_db: 1.5,
            max_abs_alpha_st: 3.0,
            max_external_score: 0.07,
            min_quality_score: 3.0,
            mode: PolicyMode::PerSample,
        }
    }
}

impl AcceptancePolicy {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [
            self.max_alpha_error_st,
            self.max_envelope_mcd_db,
            self.max_abs_alpha_st,
            self.max_external_score,
            self.min_quality_score,
        ]
        .iter()
        .all(|&v| v > 0.0 && v.is_finite());
        if all_positive {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("policy thresholds must be positive: {self:?}")))
        }
    }

    /// Names of the violated constraints, in a fixed order.
    pub fn violations(&self, alpha: Semitones, delta_p_st: f64, envelope_mcd_db: f64) -> Vec<String> {
        let mut reasons = Vec::new();
        if self.mode == PolicyMode::PerSample {
            if (delta_p_st - alpha.0).abs() > self.max_alpha_error_st {
                reasons.push(REASON_ALPHA_ERROR.to_string());
            }
            if envelope_mcd_db > self.max_envelope_mcd_db {
                reasons.push(REASON_ENVELOPE_MCD.to_string());
            }
        }
        if alpha.0.abs() > self.max_abs_alpha_st {
            reasons.push(REASON_ALPHA_RANGE.to_string());
        }
        reasons
    }
}

pub const REASON_ALPHA_ERROR: &str = "alpha_error";
pub const REASON_ENVELOPE_MCD: &str = "envelope_mcd";
pub const REASON_ALPHA_RANGE: &str = "alpha_range";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mcd_db: f64,
    pub delta_p_st: f64,
    pub envelope_mcd_db: f64,
    pub accepted: bool,
    pub reasons: Vec<String>,
}

pub fn evaluate_shift(
    orig: &Waveform,
    shifted: &Waveform,
    alpha: Semitones,
    policy: &AcceptancePolicy,
    cfg: &AnalysisConfig,
) -> Result<EvalReport> {
    let mcd_db = mcd(orig, shifted, cfg, DEFAULT_MCD_ORDER)?;
    let envelope_mcd_db = envelope_mcd(orig, shifted, cfg)?;
    let delta_p_st = delta_mean_pitch(orig, shifted, cfg)?.0;
    let reasons = policy.violations(alpha, delta_p_st, envelope_mcd_db);
    Ok(EvalReport {
        mcd_db,
        delta_p_st,
        envelope_mcd_db,
        accepted: reasons.is_empty(),
        reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn noise(seed: u64, len: usize) -> Waveform {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..len).map(|_| rng.random_range(-0.5..0.5)).collect(), 22050)
    }

    #[test]
    fn hand_computed_single_coefficient() {
        let zeros = vec![vec![0.0; 13]; 2];
        let mut shifted = zeros.clone();
        for f in &mut shifted {
            f[0] = 0.1;
        }
        // (10 / ln 10) * sqrt(2 * 0.1^2) = 0.614188...
        let expected = 10.0 / 10f64.ln() * (2.0f64 * 0.01).sqrt();
        let got = mcd_from_cepstra(&zeros, &shifted).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got}");
        assert!((got - 0.61419).abs() < 1e-4, "{got}");
    }

    #[test]
    fn dct_matches_direct_sum() {
        let x: Vec<f64> = (0..80).map(|i| ((i * 37) % 11) as f64 * 0.1 - 0.3).collect();
        let c = dct_ii(&x, 13);
        // k = 1 by hand
        let n = 80.0;
        let mut s = 0.0;
        for (i, v) in x.iter().enumerate() {
            s += v * (std::f64::consts::PI * (i as f64 + 0.5) / n).cos();
        }
        assert!((c[0] - s / n).abs() < 1e-12);
        // a log-mel cosine of amplitude 2a at quefrency 3 yields c3 = a
        let a = 0.25;
        let wave: Vec<f64> = (0..80)
            .map(|i| 2.0 * a * (std::f64::consts::PI * 3.0 * (i as f64 + 0.5) / n).cos())
            .collect();
        let c = dct_ii(&wave, 13);
        assert!((c[2] - a).abs() < 1e-12);
        assert!(c.iter().enumerate().filter(|(k, _)| *k != 2).all(|(_, v)| v.abs() < 1e-12));
        // constant input has no c1..c13 content
        assert!(dct_ii(&[3.0; 80], 13).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn identity_and_errors() {
        let cfg = AnalysisConfig::default();
        let w = fixtures::vowel(200.0, 0.5, 22050);
        assert_eq!(mcd(&w, &w, &cfg, 13).unwrap(), 0.0);
        assert_eq!(envelope_mcd(&w, &w, &cfg).unwrap(), 0.0);
        assert_eq!(delta_mean_pitch(&w, &w, &cfg).unwrap().0, 0.0);

        let short = Waveform::new(w.samples[..5000].to_vec(), 22050);
        assert!(matches!(mcd(&w, &short, &cfg, 13), Err(Error::FrameCountMismatch { .. })));
        let other_rate = Waveform::new(w.samples.clone(), 16000);
        assert!(matches!(mcd(&w, &other_rate, &cfg, 13), Err(Error::SampleRateMismatch { .. })));
        let silence = Waveform::new(vec![0.0; w.len()], 22050);
        assert!(matches!(delta_mean_pitch(&w, &silence, &cfg), Err(Error::NoVoicedFrames)));
    }

    #[test]
    fn octave_pair_is_twelve_semitones() {
        let cfg = AnalysisConfig::default();
        let a = fixtures::vowel(200.0, 1.0, 22050);
        let b = fixtures::vowel(400.0, 1.0, 22050);
        let d = delta_mean_pitch(&a, &b, &cfg).unwrap().0;
        assert!((d - 12.0).abs() <= 0.2, "{d}");
    }

    #[test]
    fn policy_decisions() {
        let p = AcceptancePolicy::default();
        assert!(p.violations(Semitones(3.0), 3.1, 1.0).is_empty());
        assert_eq!(p.violations(Semitones(4.0), 4.0, 0.1), vec!["alpha_range"]);
        assert_eq!(p.violations(Semitones(3.0), 0.0, 0.1), vec!["alpha_error"]);
        assert_eq!(
            p.violations(Semitones(-4.0), 0.0, 9.0),
            vec!["alpha_error", "envelope_mcd", "alpha_range"]
        );
        let range_only = AcceptancePolicy {
            mode: PolicyMode::RangeOnly,
            ..p.clone()
        };
        assert!(range_only.violations(Semitones(3.0), 0.0, 9.0).is_empty());
        assert!(AcceptancePolicy {
            max_envelope_mcd_db: 0.0,
            ..p
        }
        .validate()
        .is_err());
    }

    #[test]
    fn unshifted_copy_rejected_for_nonzero_alpha() {
        let cfg = AnalysisConfig::default();
        let w = fixtures::vowel(200.0, 0.5, 22050);
        let r = evaluate_shift(&w, &w, Semitones(3.0), &AcceptancePolicy::default(), &cfg).unwrap();
        assert!(!r.accepted);
        assert_eq!(r.reasons, vec!["alpha_error"]);
        assert_eq!(r.delta_p_st, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn mcd_is_a_pseudometric(s1 in any::<u64>(), s2 in any::<u64>()) {
            let cfg = AnalysisConfig::default();
            let a = noise(s1, 3000);
            let b = noise(s2, 3000);
            let ab = mcd(&a, &b, &cfg, 13).unwrap();
            let ba = mcd(&b, &a, &cfg, 13).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(mcd(&a, &a, &cfg, 13).unwrap(), 0.0);
        }

        #[test]
        fn delta_pitch_antisymmetric(f1 in 90.0f64..400.0, f2 in 90.0f64..400.0) {
            let cfg = AnalysisConfig::default();
            let a = fixtures::sine(f1, 0.2, 22050);
            let b = fixtures::sine(f2, 0.2, 22050);
            let ab = delta_mean_pitch(&a, &b, &cfg).unwrap().0;
            let ba = delta_mean_pitch(&b, &a, &cfg).unwrap().0;
            prop_assert!((ab + ba).abs() <= 1e-9);
        }
    }
}
