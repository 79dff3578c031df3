//! Mono 16-bit PCM WAV input and output.

use std::path::Path;

use crate::error::{Error, Result};

const PCM_SCALE: f64 = 32768.0;

/// A mono time-domain signal with amplitudes nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Pads with zeros or truncates to exactly `len` samples.
    pub fn resized(mut self, len: usize) -> Self {
        self.samples.resize(len, 0.0);
        self
    }
}

/// Reads a RIFF/WAVE file holding mono 16-bit integer PCM.
///
/// Anything else is rejected with [`Error::UnsupportedFormat`] rather than converted.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let reader = hound::WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{} channels, expected mono",
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{:?} {}-bit samples, expected 16-bit integer PCM",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / PCM_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if samples.is_empty() {
        return Err(Error::CorruptHeader("no samples in data chunk".into()));
    }
    Ok(Waveform::new(samples, spec.sample_rate))
}

/// Quantizes one amplitude to a 16-bit PCM value.
///
/// Clamps to `[-1, 1 - 1/32768]`, scales by 32768 and rounds half away from zero.
pub fn quantize_sample(x: f64) -> i16 {
    let clamped = x.clamp(-1.0, 1.0 - 1.0 / PCM_SCALE);
    (clamped * PCM_SCALE).round() as i16
}

pub fn save_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    if let Some(i) = w.samples.iter().position(|s| !s.is_finite()) {
        return Err(Error::ShapeMismatch(format!("non-finite sample at index {i}")));
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec)?;
    {
        let mut i16_writer = writer.get_i16_writer(w.samples.len() as u32);
        for &s in &w.samples {
            i16_writer.write_sample(quantize_sample(s));
        }
        i16_writer.flush()?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_raw(path: &Path, spec: hound::WavSpec, frames: &[i16]) {
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &f in frames {
            w.write_sample(f).unwrap();
        }
        w.finalize().unwrap();
    }

    fn mono16(sr: u32) -> hound::WavSpec {
        hound::WavSpec {
            channels: 1,
            sample_rate: sr,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        }
    }

    #[test]
    fn silence_loads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("silence.wav");
        write_raw(&p, mono16(22050), &vec![0; 22050]);
        let w = load_wav(&p).unwrap();
        assert_eq!(w.sample_rate, 22050);
        assert_eq!(w.samples.len(), 22050);
        assert!(w.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn half_scale_value() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("half.wav");
        write_raw(&p, mono16(22050), &[16384, -16384]);
        let w = load_wav(&p).unwrap();
        assert_eq!(w.samples, vec![0.5, -0.5]);
    }

    #[test]
    fn stereo_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stereo.wav");
        let spec = hound::WavSpec {
            channels: 2,
            ..mono16(22050)
        };
        write_raw(&p, spec, &[0, 0, 1, 1]);
        assert!(matches!(load_wav(&p), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn float_and_24_bit_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("float.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 22050,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(0.25f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_wav(&p), Err(Error::UnsupportedFormat(_))));

        let p = dir.path().join("24.wav");
        let spec = hound::WavSpec {
            bits_per_sample: 24,
            ..mono16(22050)
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(1000i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_wav(&p), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn garbage_header_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.wav");
        std::fs::write(&p, b"RIFX\x00\x00\x00\x00not a wave file at all").unwrap();
        assert!(matches!(load_wav(&p), Err(Error::CorruptHeader(_))));
    }

    #[test]
    fn missing_file_is_io_failure() {
        assert!(matches!(
            load_wav("/nonexistent/definitely/missing.wav"),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn quantization_clamps_and_rounds() {
        assert_eq!(quantize_sample(2.0), 32767);
        assert_eq!(quantize_sample(-2.0), -32768);
        assert_eq!(quantize_sample(0.0), 0);
        // 0.5 LSB rounds away from zero
        assert_eq!(quantize_sample(0.5 / 32768.0), 1);
        assert_eq!(quantize_sample(-0.5 / 32768.0), -1);
    }

    #[test]
    fn zeros_save_as_zero_pcm() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.wav");
        save_wav(&p, &Waveform::new(vec![0.0; 100], 22050)).unwrap();
        let r = hound::WavReader::open(&p).unwrap();
        assert!(r.into_samples::<i16>().all(|s| s.unwrap() == 0));
    }

    #[test]
    fn non_finite_rejected_on_save() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nan.wav");
        assert!(save_wav(&p, &Waveform::new(vec![0.0, f64::NAN], 22050)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_within_one_lsb(samples in prop::collection::vec(-1.0f64..1.0, 1..512)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("rt.wav");
            let w = Waveform::new(samples, 22050);
            save_wav(&p, &w).unwrap();
            let back = load_wav(&p).unwrap();
            prop_assert_eq!(back.sample_rate, 22050);
            prop_assert_eq!(back.samples.len(), w.samples.len());
            for (a, b) in w.samples.iter().zip(&back.samples) {
                prop_assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }
    }
}
