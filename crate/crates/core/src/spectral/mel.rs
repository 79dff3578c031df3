use super::{AnalysisConfig, MelSpectrogram, Spectrogram};
use crate::error::{Error, Result};

/// HTK mel scale.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the HTK mel scale between `fmin` and `fmax`,
/// each scaled to unit area in Hz.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `[n_mels][n_bins]`
    pub weights: Vec<Vec<f64>>,
    /// Filter edge/centre frequencies in Hz, `n_mels + 2` entries.
    pub edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &AnalysisConfig) -> Self {
        let n_bins = cfg.n_bins();
        let (mlo, mhi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax));
        let edges_hz: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let weights = edges_hz
            .windows(3)
            .map(|e| {
                let (lo, c, hi) = (e[0], e[1], e[2]);
                let area = 2.0 / (hi - lo);
                (0..n_bins)
                    .map(|k| {
                        let f = cfg.bin_hz(k);
                        let rise = (f - lo) / (c - lo);
                        let fall = (hi - f) / (hi - c);
                        rise.min(fall).max(0.0) * area
                    })
                    .collect()
            })
            .collect();
        Self { weights, edges_hz }
    }

    pub fn n_mels(&self) -> usize {
        self.weights.len()
    }

    pub fn apply(&self, frame: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(frame).map(|(w, x)| w * x).sum())
            .collect()
    }

    /// Approximate linear magnitudes from mel magnitudes.
    ///
    /// Each mel value is divided by its filter's total weight and spread back over the
    /// filter's support, weighted by the filter shape. Exact for flat spectra; bins
    /// outside every filter come back as zero.
    pub fn invert(&self, mel_frame: &[f64]) -> Vec<f64> {
        let n_bins = self.weights.first().map_or(0, Vec::len);
        let mut num = vec![0.0; n_bins];
        let mut den = vec![0.0; n_bins];
        for (row, &m) in self.weights.iter().zip(mel_frame) {
            let total: f64 = row.iter().sum();
            if total <= 0.0 {
                continue;
            }
            let level = m / total;
            for (k, &w) in row.iter().enumerate() {
                num[k] += w * level;
                den[k] += w;
            }
        }
        num.iter()
            .zip(&den)
            .map(|(n, d)| if *d > 0.0 { (n / d).max(0.0) } else { 0.0 })
            .collect()
    }
}

pub fn mel_project(spec: &Spectrogram, cfg: &AnalysisConfig) -> Result<MelSpectrogram> {
    spec.check_bins(cfg)?;
    if spec.frame_hop != cfg.hop {
        return Err(Error::ShapeMismatch(format!(
            "spectrogram hop {} differs from config hop {}",
            spec.frame_hop, cfg.hop
        )));
    }
    let fb = MelFilterbank::new(cfg);
    Ok(MelSpectrogram {
        mels: spec.mags.iter().map(|f| fb.apply(f)).collect(),
        n_mels: cfg.n_mels,
        frame_hop: spec.frame_hop,
        sample_rate: spec.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent construction: evaluates each triangle from explicit mel-domain
    /// distances instead of Hz-domain slopes.
    fn reference_row_sums(cfg: &AnalysisConfig) -> Vec<f64> {
        let mel_max = 2595.0 * (1.0f64 + cfg.fmax / 700.0).log10();
        let step = mel_max / (cfg.n_mels as f64 + 1.0);
        let to_hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
        (0..cfg.n_mels)
            .map(|m| {
                let lo = to_hz(step * m as f64);
                let c = to_hz(step * (m + 1) as f64);
                let hi = to_hz(step * (m + 2) as f64);
                let mut sum = 0.0;
                for k in 0..cfg.n_bins() {
                    let f = k as f64 * cfg.sample_rate as f64 / cfg.fft_size as f64;
                    let w = if f > lo && f <= c {
                        (f - lo) / (c - lo)
                    } else if f > c && f < hi {
                        (hi - f) / (hi - c)
                    } else {
                        0.0
                    };
                    sum += w * 2.0 / (hi - lo);
                }
                sum
            })
            .collect()
    }

    #[test]
    fn htk_scale_points() {
        assert!((hz_to_mel(0.0)).abs() < 1e-12);
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-9);
        for f in [0.0, 100.0, 1000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_spectrogram_zero_mel() {
        let cfg = AnalysisConfig::default();
        let spec = Spectrogram::zeros(3, 513, 256, 22050);
        let mel = mel_project(&spec, &cfg).unwrap();
        assert_eq!(mel.n_mels, 80);
        assert!(mel.mels.iter().flatten().all(|&m| m == 0.0));
    }

    #[test]
    fn rows_nonnegative_nonempty_and_cover_band() {
        let cfg = AnalysisConfig::default();
        let fb = MelFilterbank::new(&cfg);
        assert_eq!(fb.n_mels(), 80);
        assert!(fb.weights.iter().flatten().all(|&w| w >= 0.0));
        for row in &fb.weights {
            let support: Vec<usize> = (0..513).filter(|&k| row[k] > 0.0).collect();
            assert!(!support.is_empty());
            // contiguous support
            assert_eq!(support.last().unwrap() - support[0] + 1, support.len());
        }
        // Every bin strictly inside (fmin, fmax) has weight; bin 0 sits on the first foot.
        for k in 1..513 {
            let f = cfg.bin_hz(k);
            let total: f64 = fb.weights.iter().map(|r| r[k]).sum();
            if f < cfg.fmax {
                assert!(total > 0.0, "bin {k} ({f} Hz) uncovered");
            } else {
                assert_eq!(total, 0.0, "bin {k} ({f} Hz) above fmax");
            }
        }
    }

    #[test]
    fn white_frame_matches_reference_row_sums() {
        let cfg = AnalysisConfig::default();
        let spec = Spectrogram {
            mags: vec![vec![1.0; 513]],
            frame_hop: 256,
            sample_rate: 22050,
        };
        let mel = mel_project(&spec, &cfg).unwrap();
        let expected = reference_row_sums(&cfg);
        for (a, b) in mel.mels[0].iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12 * b.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn wrong_bin_count_rejected() {
        let cfg = AnalysisConfig::default();
        let spec = Spectrogram::zeros(2, 257, 256, 22050);
        assert!(matches!(mel_project(&spec, &cfg), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn invert_is_exact_on_flat_band() {
        let cfg = AnalysisConfig::default();
        let fb = MelFilterbank::new(&cfg);
        let lin = fb.invert(&fb.apply(&vec![2.0; 513]));
        for k in 1..372 {
            assert!((lin[k] - 2.0).abs() < 1e-9, "bin {k}: {}", lin[k]);
        }
        assert!(lin[400..].iter().all(|&v| v == 0.0));
    }
}
