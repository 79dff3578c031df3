//! Deterministic synthetic signals for tests, demos and the acceptance suite.
//!
//! All harmonic fixtures use zero-phase (cosine) partials, so every period starts with
//! a clear waveform maximum. The vowel also carries a low-level aspiration component
//! (seeded noise through the same resonances) that fills the gaps between harmonics the
//! way breath noise does in real voiced speech; without it, log-spectral envelope
//! estimates of a perfectly periodic signal depend strongly on f0.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::audio_io::Waveform;

/// First resonance of the vowel fixture, Hz.
pub const VOWEL_F1_HZ: f64 = 700.0;
/// Second resonance of the vowel fixture, Hz.
pub const VOWEL_F2_HZ: f64 = 1220.0;
const VOWEL_B1_HZ: f64 = 110.0;
const VOWEL_B2_HZ: f64 = 120.0;
/// Harmonics-to-noise ratio of the vowel fixture, dB.
pub const VOWEL_HNR_DB: f64 = 20.0;
const ASPIRATION_SEED: u64 = 0x76_6f77_656c;

/// Fraction of the sample rate below which harmonics are generated.
const HARMONIC_CEILING: f64 = 0.45;
const PEAK: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    Sine,
    PulseTrain,
    Vowel,
}

impl std::str::FromStr for FixtureKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sine" => Ok(Self::Sine),
            "pulse_train" => Ok(Self::PulseTrain),
            "vowel" => Ok(Self::Vowel),
            other => Err(format!("unknown fixture kind `{other}`")),
        }
    }
}

pub fn generate(kind: FixtureKind, f0: f64, seconds: f64, sample_rate: u32) -> Waveform {
    match kind {
        FixtureKind::Sine => sine(f0, seconds, sample_rate),
        FixtureKind::PulseTrain => pulse_train(f0, seconds, sample_rate),
        FixtureKind::Vowel => vowel(f0, seconds, sample_rate),
    }
}

fn n_samples(seconds: f64, sample_rate: u32) -> usize {
    (seconds * sample_rate as f64).round() as usize
}

/// Sine of amplitude 0.5.
pub fn sine(f0: f64, seconds: f64, sample_rate: u32) -> Waveform {
    let sr = sample_rate as f64;
    let samples = (0..n_samples(seconds, sample_rate))
        .map(|n| 0.5 * (2.0 * PI * f0 * n as f64 / sr).sin())
        .collect();
    Waveform::new(samples, sample_rate)
}

/// Band-limited pulse train: equal-amplitude cosine harmonics up to 0.45 * sample_rate.
pub fn pulse_train(f0: f64, seconds: f64, sample_rate: u32) -> Waveform {
    harmonic(f0, seconds, sample_rate, |_| 1.0)
}

/// Magnitude response of a two-pole resonator, unity at DC.
fn resonator(f: f64, centre: f64, bandwidth: f64, sr: f64) -> f64 {
    let r = (-PI * bandwidth / sr).exp();
    let theta = 2.0 * PI * centre / sr;
    let w = 2.0 * PI * f / sr;
    let gain = 1.0 - 2.0 * r * theta.cos() + r * r;
    // |1 - 2r cos(theta) z^-1 + r^2 z^-2| at z = e^{jw}
    let re = 1.0 - 2.0 * r * theta.cos() * w.cos() + r * r * (2.0 * w).cos();
    let im = 2.0 * r * theta.cos() * w.sin() - r * r * (2.0 * w).sin();
    gain / (re * re + im * im).sqrt()
}

/// The vowel fixture's spectral envelope: two cascaded resonances at
/// [`VOWEL_F1_HZ`] and [`VOWEL_F2_HZ`].
pub fn vowel_envelope(f: f64, sample_rate: u32) -> f64 {
    let sr = sample_rate as f64;
    resonator(f, VOWEL_F1_HZ, VOWEL_B1_HZ, sr) * resonator(f, VOWEL_F2_HZ, VOWEL_B2_HZ, sr)
}

/// Filters `x` in place through a two-pole resonator with unity DC gain; its
/// magnitude response is [`resonator`].
fn resonate(x: &mut [f64], centre: f64, bandwidth: f64, sr: f64) {
    let r = (-PI * bandwidth / sr).exp();
    let a1 = -2.0 * r * (2.0 * PI * centre / sr).cos();
    let a2 = r * r;
    let gain = 1.0 + a1 + a2;
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = gain * *v - a1 * y1 - a2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Harmonic source at `f0` plus aspiration noise at [`VOWEL_HNR_DB`], both shaped by
/// [`vowel_envelope`], scaled to a peak of 0.8. The noise is seeded and independent of
/// `f0`, so the fixture is deterministic.
pub fn vowel(f0: f64, seconds: f64, sample_rate: u32) -> Waveform {
    use rand::{Rng, SeedableRng};
    let sr = sample_rate as f64;
    let mut w = harmonic(f0, seconds, sample_rate, |f| vowel_envelope(f, sample_rate));
    // Run the resonators over a lead-in so the kept noise is in steady state.
    let lead_in = 2048;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(ASPIRATION_SEED);
    let mut noise: Vec<f64> = (0..w.len() + lead_in).map(|_| rng.random_range(-1.0..1.0)).collect();
    resonate(&mut noise, VOWEL_F1_HZ, VOWEL_B1_HZ, sr);
    resonate(&mut noise, VOWEL_F2_HZ, VOWEL_B2_HZ, sr);
    let noise = &noise[lead_in..];
    let noise_rms = rms(noise);
    if noise_rms > 0.0 {
        let k = rms(&w.samples) / noise_rms * 10f64.powf(-VOWEL_HNR_DB / 20.0);
        for (s, n) in w.samples.iter_mut().zip(noise) {
            *s += k * n;
        }
    }
    let peak = w.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        w.samples.iter_mut().for_each(|s| *s *= PEAK / peak);
    }
    w
}

fn harmonic(f0: f64, seconds: f64, sample_rate: u32, amp: impl Fn(f64) -> f64) -> Waveform {
    let sr = sample_rate as f64;
    let n_harm = ((HARMONIC_CEILING * sr / f0).floor() as usize).max(1);
    let partials: Vec<(f64, f64)> = (1..=n_harm)
        .map(|k| {
            let f = k as f64 * f0;
            (2.0 * PI * f / sr, amp(f))
        })
        .collect();
    let peak: f64 = partials.iter().map(|(_, a)| a).sum();
    let scale = if peak > 0.0 { PEAK / peak } else { 0.0 };
    let samples = (0..n_samples(seconds, sample_rate))
        .map(|n| {
            let n = n as f64;
            scale * partials.iter().map(|(w, a)| a * (w * n).cos()).sum::<f64>()
        })
        .collect();
    Waveform::new(samples, sample_rate)
}
