use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::Spectrogram;
use crate::error::{Error, Result};

/// Keeps harmonics of voices up to roughly 275 Hz out of the envelope at 22.05 kHz.
pub const DEFAULT_LIFTER_ORDER: usize = 40;

/// Magnitudes below this are treated as this value before taking logs.
const LOG_FLOOR: f64 = 1e-10;

/// Smooth spectral envelope by cepstral liftering.
///
/// Per frame: log magnitude, real cepstrum, keep quefrencies `0..=lifter_order`
/// (and their mirror images), transform back and exponentiate.
pub fn cepstral_envelope(spec: &Spectrogram, lifter_order: usize) -> Result<Spectrogram> {
    let n_bins = spec.n_bins();
    if n_bins < 2 {
        return Err(Error::ShapeMismatch("spectrogram needs at least 2 bins".into()));
    }
    if lifter_order >= n_bins {
        return Err(Error::ShapeMismatch(format!(
            "lifter order {lifter_order} must be below bin count {n_bins}"
        )));
    }
    if spec.mags.iter().any(|f| f.len() != n_bins) {
        return Err(Error::ShapeMismatch("ragged spectrogram".into()));
    }
    let n = 2 * (n_bins - 1);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = vec![Complex::new(0.0, 0.0); n];

    let mags = spec
        .mags
        .iter()
        .map(|frame| {
            for (k, &m) in frame.iter().enumerate() {
                buf[k] = Complex::new(m.max(LOG_FLOOR).ln(), 0.0);
            }
            for k in 1..n_bins - 1 {
                buf[n - k] = buf[k];
            }
            inv.process(&mut buf);
            for (q, c) in buf.iter_mut().enumerate() {
                let keep = q <= lifter_order || q >= n - lifter_order;
                *c = if keep {
                    Complex::new(c.re / n as f64, 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            fwd.process(&mut buf);
            buf[..n_bins].iter().map(|c| c.re.exp()).collect()
        })
        .collect();
    Ok(spec.with_mags(mags))
}
