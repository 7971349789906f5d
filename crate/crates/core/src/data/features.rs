//! Frame-feature matrices and their on-disk format.
//!
//! File layout (little-endian): `b"VFRM"`, `u32` version (1), `u32` frame
//! count, `u32` feature dimension, then `frames * dim` `f32` values in
//! row-major order.

use std::fs;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: [u8; 4] = *b"VFRM";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Number of frames kept per video after sampling.
pub const NUM_FRAMES: usize = 28;

#[derive(Clone, Debug, PartialEq)]
pub struct VideoFeatures {
    pub video_id: String,
    frames: usize,
    dim: usize,
    data: Vec<f64>,
}

impl VideoFeatures {
    pub fn new(video_id: impl Into<String>, frames: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 || dim == 0 {
            return Err(Error::Empty("video features"));
        }
        if data.len() != frames * dim {
            return Err(Error::shape("video features", &[frames, dim], &[data.len()]));
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "video features",
                index,
            });
        }
        Ok(VideoFeatures {
            video_id: video_id.into(),
            frames,
            dim,
            data,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(&FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.frames as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for &x in &self.data {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(video_id: impl Into<String>, bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            let mut found = [0u8; 4];
            let n = bytes.len().min(4);
            found[..n].copy_from_slice(&bytes[..n]);
            if found != FEATURE_MAGIC {
                return Err(Error::BadMagic {
                    what: "feature file",
                    expected: FEATURE_MAGIC,
                    found,
                });
            }
            return Err(Error::Truncated {
                what: "feature file header",
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("length checked");
        if magic != FEATURE_MAGIC {
            return Err(Error::BadMagic {
                what: "feature file",
                expected: FEATURE_MAGIC,
                found: magic,
            });
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("length checked"));
        let version = word(4);
        if version != FEATURE_VERSION {
            return Err(Error::Version {
                what: "feature file",
                version,
            });
        }
        let (frames, dim) = (word(8) as usize, word(12) as usize);
        let expected = HEADER_LEN + 4 * frames * dim;
        if bytes.len() < expected {
            return Err(Error::Truncated {
                what: "feature file payload",
                expected,
                found: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(Error::Malformed {
                what: "feature file",
                detail: format!("{} trailing bytes", bytes.len() - expected),
            });
        }
        let data: Vec<f64> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
            .collect();
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "feature file",
                index,
            });
        }
        VideoFeatures::new(video_id, frames, dim, data)
    }
}

/// Reads a feature file; the video id is the file stem.
pub fn read_features(path: &Path) -> Result<VideoFeatures> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    VideoFeatures::from_bytes(id, &bytes)
}

pub fn write_features(vf: &VideoFeatures, path: &Path) -> Result<()> {
    fs::write(path, vf.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Exactly `frames` rows; rows at or beyond `valid_count` are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFeatures {
    pub matrix: Tensor,
    pub valid_count: usize,
}

impl SampledFeatures {
    pub fn frames(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    /// Mean over the non-padded rows.
    pub fn valid_mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for i in 0..self.valid_count {
            out.iter_mut().zip(self.row(i)).for_each(|(o, v)| *o += v);
        }
        let inv = 1.0 / self.valid_count as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        out
    }

    /// Reorders rows as `new[i] = old[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> SampledFeatures {
        let d = self.dim();
        let mut data = Vec::with_capacity(self.matrix.len());
        for &p in perm {
            data.extend_from_slice(self.row(p));
        }
        SampledFeatures {
            matrix: Tensor::matrix(perm.len(), d, data).expect("same shape"),
            valid_count: self.valid_count,
        }
    }
}

/// Equally spaced sampling to [`NUM_FRAMES`] rows.
pub fn sample_frames(vf: &VideoFeatures) -> Result<SampledFeatures> {
    sample_frames_to(vf, NUM_FRAMES)
}

/// Selects rows `floor(i * m' / target)` when there are enough frames,
/// otherwise copies all rows and zero-pads.
pub fn sample_frames_to(vf: &VideoFeatures, target: usize) -> Result<SampledFeatures> {
    if vf.frames == 0 || target == 0 {
        return Err(Error::Empty("sample_frames"));
    }
    let d = vf.dim;
    let mut data = vec![0.0; target * d];
    let valid = vf.frames.min(target);
    for i in 0..valid {
        let src = if vf.frames >= target {
            i * vf.frames / target
        } else {
            i
        };
        data[i * d..(i + 1) * d].copy_from_slice(vf.row(src));
    }
    Ok(SampledFeatures {
        matrix: Tensor::matrix(target, d, data)?,
        valid_count: valid,
    })
}

/// Selected source-row indices for a video of `frames` rows.
pub fn sampled_indices(frames: usize, target: usize) -> Vec<usize> {
    if frames >= target {
        (0..target).map(|i| i * frames / target).collect()
    } else {
        (0..frames).collect()
    }
}
