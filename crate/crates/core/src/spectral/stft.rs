use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{AnalysisConfig, Spectrogram};
use crate::audio_io::Waveform;
use crate::error::{Error, Result};

/// Per-frame, per-bin phases in radians, shaped like the matching [`Spectrogram`].
pub type Phases = Vec<Vec<f64>>;

/// Periodic Hann window.
pub(crate) fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

/// Cached FFT plans and analysis window for one [`AnalysisConfig`].
pub struct StftPlan {
    cfg: AnalysisConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftPlan {
    pub fn new(cfg: &AnalysisConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            cfg: cfg.clone(),
            window: hann(cfg.window),
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
        }
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn analyze(&self, samples: &[f64]) -> Result<(Vec<Vec<f64>>, Phases)> {
        self.cfg.check_len(samples.len())?;
        let n_frames = self.cfg.n_frames(samples.len());
        let n_bins = self.cfg.n_bins();
        let mut mags = Vec::with_capacity(n_frames);
        let mut phases = Vec::with_capacity(n_frames);
        let mut buf = vec![Complex::new(0.0, 0.0); self.cfg.fft_size];
        for t in 0..n_frames {
            let start = t * self.cfg.hop;
            buf.fill(Complex::new(0.0, 0.0));
            for (n, (&x, &w)) in samples[start..start + self.cfg.window]
                .iter()
                .zip(&self.window)
                .enumerate()
            {
                buf[n] = Complex::new(x * w, 0.0);
            }
            self.forward.process(&mut buf);
            mags.push(buf[..n_bins].iter().map(|c| c.norm()).collect());
            phases.push(buf[..n_bins].iter().map(|c| c.arg()).collect());
        }
        Ok((mags, phases))
    }

    /// Least-squares inverse: windowed overlap-add divided by the summed squared window.
    pub fn synthesize(&self, mags: &[Vec<f64>], phases: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n_bins = self.cfg.n_bins();
        if mags.len() != phases.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} magnitude frames vs {} phase frames",
                mags.len(),
                phases.len()
            )));
        }
        if mags.is_empty() {
            return Ok(Vec::new());
        }
        let n = self.cfg.fft_size;
        let hop = self.cfg.hop;
        let win_len = self.cfg.window;
        let out_len = (mags.len() - 1) * hop + win_len;
        let mut out = vec![0.0; out_len];
        let mut norm = vec![0.0; out_len];
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for (t, (m, p)) in mags.iter().zip(phases).enumerate() {
            if m.len() != n_bins || p.len() != n_bins {
                return Err(Error::ShapeMismatch(format!(
                    "frame {t} has {} magnitudes and {} phases, expected {n_bins}",
                    m.len(),
                    p.len()
                )));
            }
            for k in 0..n_bins {
                buf[k] = Complex::from_polar(m[k], p[k]);
            }
            // DC and Nyquist must be real for a real-valued frame.
            buf[0].im = 0.0;
            buf[n / 2].im = 0.0;
            for k in 1..n / 2 {
                buf[n - k] = buf[k].conj();
            }
            self.inverse.process(&mut buf);
            let start = t * hop;
            for i in 0..win_len {
                let w = self.window[i];
                out[start + i] += w * buf[i].re / n as f64;
                norm[start + i] += w * w;
            }
        }
        for (y, s) in out.iter_mut().zip(&norm) {
            *y = if *s > 1e-10 { *y / s } else { 0.0 };
        }
        Ok(out)
    }
}

pub fn stft(w: &Waveform, cfg: &AnalysisConfig) -> Result<(Spectrogram, Phases)> {
    let (mags, phases) = StftPlan::new(cfg).analyze(&w.samples)?;
    Ok((
        Spectrogram {
            mags,
            frame_hop: cfg.hop,
            sample_rate: w.sample_rate,
        },
        phases,
    ))
}

pub fn istft(spec: &Spectrogram, phases: &Phases, cfg: &AnalysisConfig) -> Result<Waveform> {
    if spec.frame_hop != cfg.hop {
        return Err(Error::ShapeMismatch(format!(
            "spectrogram hop {} differs from config hop {}",
            spec.frame_hop, cfg.hop
        )));
    }
    let samples = StftPlan::new(cfg).synthesize(&spec.mags, phases)?;
    Ok(Waveform::new(samples, spec.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn reference_dft_mag(frame: &[f64], k: usize) -> f64 {
        let n = frame.len() as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &x) in frame.iter().enumerate() {
            let ang = -2.0 * PI * k as f64 * i as f64 / n;
            re += x * ang.cos();
            im += x * ang.sin();
        }
        (re * re + im * im).sqrt()
    }

    #[test]
    fn frame_count_for_one_second() {
        let cfg = AnalysisConfig::default();
        let w = Waveform::new(vec![0.0; 22050], 22050);
        let (s, p) = stft(&w, &cfg).unwrap();
        assert_eq!(s.n_frames(), 83);
        assert_eq!(s.n_bins(), 513);
        assert_eq!(p.len(), 83);
    }

    #[test]
    fn too_short_is_error() {
        let cfg = AnalysisConfig::default();
        let w = Waveform::new(vec![0.0; 1000], 22050);
        assert!(matches!(stft(&w, &cfg), Err(Error::SignalTooShort { .. })));
    }

    #[test]
    fn dc_energy_in_bin_zero() {
        let cfg = AnalysisConfig::default();
        let w = Waveform::new(vec![1.0; 4096], 22050);
        let (s, _) = stft(&w, &cfg).unwrap();
        for frame in &s.mags {
            // Periodic Hann: DC gain is window.len()/2, and only bins 0 and 1 are non-zero.
            assert!((frame[0] - 512.0).abs() < 1e-9);
            assert!(frame[2..].iter().all(|&m| m < 1e-9));
        }
    }

    #[test]
    fn bin_centred_sine_peaks_at_its_bin() {
        let cfg = AnalysisConfig::default();
        for k in [5usize, 37, 100, 300] {
            let f = 22050.0 * k as f64 / 1024.0;
            let samples: Vec<f64> = (0..4096)
                .map(|n| (2.0 * PI * f * n as f64 / 22050.0).sin())
                .collect();
            let (s, _) = stft(&Waveform::new(samples.clone(), 22050), &cfg).unwrap();
            let win = hann(1024);
            for (t, frame) in s.mags.iter().enumerate() {
                let argmax = frame
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .unwrap()
                    .0;
                assert_eq!(argmax, k);
                let windowed: Vec<f64> = samples[t * 256..t * 256 + 1024]
                    .iter()
                    .zip(&win)
                    .map(|(x, w)| x * w)
                    .collect();
                for bin in [k - 1, k, k + 1] {
                    let r = reference_dft_mag(&windowed, bin);
                    assert!((frame[bin] - r).abs() < 1e-8 * r.max(1.0));
                }
            }
        }
    }

    #[test]
    fn zero_magnitudes_give_silence() {
        let cfg = AnalysisConfig::default();
        let plan = StftPlan::new(&cfg);
        let mags = vec![vec![0.0; 513]; 5];
        let phases = vec![vec![1.3; 513]; 5];
        let out = plan.synthesize(&mags, &phases).unwrap();
        assert_eq!(out.len(), 4 * 256 + 1024);
        assert!(out.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn single_frame_reproduces_frame_where_window_nonzero() {
        // One frame: y[n] = w[n] * x[n] * w[n] / w[n]^2 = x[n] wherever w[n] > 0.
        let cfg = AnalysisConfig::default();
        let plan = StftPlan::new(&cfg);
        let x: Vec<f64> = (0..1024).map(|n| ((n * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        let (m, p) = plan.analyze(&x).unwrap();
        let y = plan.synthesize(&m, &p).unwrap();
        assert_eq!(y.len(), 1024);
        assert_eq!(y[0], 0.0);
        let win = hann(1024);
        for n in (1..1024).filter(|&n| win[n] > 1e-3) {
            assert!((y[n] - x[n]).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn shape_mismatch() {
        let cfg = AnalysisConfig::default();
        let plan = StftPlan::new(&cfg);
        assert!(plan.synthesize(&[vec![0.0; 513]], &[]).is_err());
        assert!(plan.synthesize(&[vec![0.0; 512]], &[vec![0.0; 512]]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn round_trip_interior(seed in any::<u64>(), extra in 0usize..2000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let len = 4096 + extra;
            let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cfg = AnalysisConfig::default();
            let plan = StftPlan::new(&cfg);
            let (m, p) = plan.analyze(&x).unwrap();
            let y = plan.synthesize(&m, &p).unwrap();
            let lo = cfg.window;
            let hi = y.len() - cfg.window;
            let rms = ((lo..hi).map(|n| (y[n] - x[n]).powi(2)).sum::<f64>() / (hi - lo) as f64).sqrt();
            prop_assert!(rms <= 1e-6, "rms {}", rms);
        }
    }
}
