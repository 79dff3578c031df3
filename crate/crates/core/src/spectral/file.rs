//! `MELSPEC1` interchange format: 8-byte magic, then little-endian `u32` n_frames,
//! n_cols, sample_rate, hop, then `n_frames * n_cols` little-endian `f32`, frame-major.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MELSPEC_MAGIC: &[u8; 8] = b"MELSPEC1";

#[derive(Debug, Clone, PartialEq)]
pub struct MelSpecFile {
    pub rows: Vec<Vec<f64>>,
    pub n_cols: usize,
    pub sample_rate: u32,
    pub hop: usize,
}

impl MelSpecFile {
    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        if self.rows.iter().any(|r| r.len() != self.n_cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        out.write_all(MELSPEC_MAGIC)?;
        for v in [
            self.rows.len() as u32,
            self.n_cols as u32,
            self.sample_rate,
            self.hop as u32,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        let mut payload = Vec::with_capacity(self.rows.len() * self.n_cols * 4);
        for x in self.rows.iter().flatten() {
            payload.extend_from_slice(&(*x as f32).to_le_bytes());
        }
        out.write_all(&payload)?;
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() < 24 || &bytes[..8] != MELSPEC_MAGIC {
            return Err(Error::MalformedSpectrogram("missing MELSPEC1 header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap());
        let (n_frames, n_cols, sample_rate, hop) =
            (word(0) as usize, word(1) as usize, word(2), word(3) as usize);
        let body = &bytes[24..];
        if body.len() != n_frames * n_cols * 4 {
            return Err(Error::MalformedSpectrogram(format!(
                "payload is {} bytes, header promises {}x{} floats",
                body.len(),
                n_frames,
                n_cols
            )));
        }
        let values: Vec<f64> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let rows = if n_cols == 0 {
            vec![Vec::new(); n_frames]
        } else {
            values.chunks(n_cols).map(<[f64]>::to_vec).collect()
        };
        Ok(Self {
            rows,
            n_cols,
            sample_rate,
            hop,
        })
    }
}

pub fn write_melspec(path: impl AsRef<Path>, file: &MelSpecFile) -> Result<()> {
    let mut buf = Vec::new();
    file.write_to(&mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_melspec(path: impl AsRef<Path>) -> Result<MelSpecFile> {
    MelSpecFile::read_from(std::fs::File::open(path)?)
}
