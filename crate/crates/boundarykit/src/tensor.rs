//! BWTF binary tensor files.
//!
//! Little-endian layout:
//!
//! | offset        | size        | content                     |
//! |---------------|-------------|-----------------------------|
//! | 0             | 4           | magic `BWTF`                |
//! | 4             | 4           | format version, `u32` = 1   |
//! | 8             | 1           | rank `r`, `u8`              |
//! | 9             | 4·r         | dims, `u32` each, outermost first |
//! | 9 + 4·r       | 4·Π dims    | values, `f32`, row-major    |
//!
//! Feature maps are rank 3 (`C×H×W`); a rank-2 tensor reads as a single
//! channel. Displacement fields are `2×H×W` with `dx` in channel 0 and
//! `dy` in channel 1.

use std::path::Path;

use boundarykit_core::{DisplacementField, FeatureMap};

use crate::error::{Error, Result};
use crate::fsutil;

pub const MAGIC: &[u8; 4] = b"BWTF";
pub const VERSION: u32 = 1;

const HEADER_FIXED: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<u32>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.len() > usize::from(u8::MAX) {
            return Err(Error::Data(format!("tensor rank must be 1..=255, got {}", dims.len())));
        }
        let expected = element_count(&dims).ok_or_else(|| Error::Data(format!("tensor dims {dims:?} overflow")))?;
        if expected != data.len() {
            return Err(Error::Data(format!("tensor dims {dims:?} need {expected} values, got {}", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_FIXED + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses a BWTF byte stream; `path` only labels errors.
    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let err = |offset: usize, msg: String| Error::format(path, offset as u64, msg);
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            let found = &bytes[..bytes.len().min(4)];
            return Err(err(0, format!("bad magic {:?}, expected \"BWTF\"", String::from_utf8_lossy(found))));
        }
        if bytes.len() < HEADER_FIXED {
            return Err(err(bytes.len(), "header truncated".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(err(4, format!("unsupported version {version}, expected {VERSION}")));
        }
        let rank = usize::from(bytes[8]);
        if rank == 0 {
            return Err(err(8, "rank must be at least 1".into()));
        }
        let dims_end = HEADER_FIXED + 4 * rank;
        if bytes.len() < dims_end {
            return Err(err(bytes.len(), format!("dimension list truncated, need {rank} dims")));
        }
        let dims: Vec<u32> = bytes[HEADER_FIXED..dims_end]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let count = element_count(&dims)
            .filter(|n| n.checked_mul(4).is_some())
            .ok_or_else(|| err(HEADER_FIXED, format!("dims {dims:?} overflow")))?;
        let payload = &bytes[dims_end..];
        if payload.len() < 4 * count {
            return Err(err(
                bytes.len(),
                format!("payload truncated: {} of {} bytes present", payload.len(), 4 * count),
            ));
        }
        if payload.len() > 4 * count {
            return Err(err(dims_end + 4 * count, "trailing bytes after payload".into()));
        }
        let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Ok(Self { dims, data })
    }

    pub fn to_feature_map(&self, path: &Path) -> Result<FeatureMap> {
        let (c, h, w) = match *self.dims.as_slice() {
            [h, w] => (1, h, w),
            [c, h, w] => (c, h, w),
            _ => {
                return Err(Error::format(
                    path,
                    8,
                    format!("feature maps need rank 2 or 3, got rank {}", self.dims.len()),
                ))
            }
        };
        FeatureMap::new(c as usize, h as usize, w as usize, self.data.clone())
            .map_err(|e| Error::format(path, HEADER_FIXED as u64, e.to_string()))
    }

    pub fn to_displacement_field(&self, path: &Path) -> Result<DisplacementField> {
        match *self.dims.as_slice() {
            [2, _, _] => {}
            _ => {
                return Err(Error::format(
                    path,
                    8,
                    format!("displacement fields need dims [2, H, W], got {:?}", self.dims),
                ))
            }
        }
        let map = self.to_feature_map(path)?;
        DisplacementField::from_feature_map(&map).map_err(|e| Error::format(path, HEADER_FIXED as u64, e.to_string()))
    }
}

fn element_count(dims: &[u32]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
}

impl From<&FeatureMap> for Tensor {
    fn from(map: &FeatureMap) -> Self {
        Self { dims: vec![map.channels() as u32, map.height() as u32, map.width() as u32], data: map.data().to_vec() }
    }
}

impl From<&DisplacementField> for Tensor {
    fn from(field: &DisplacementField) -> Self {
        Tensor::from(&field.to_feature_map())
    }
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    Tensor::decode(&fsutil::read(path)?, path)
}

pub fn write_tensor(tensor: &Tensor, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &tensor.encode())
}

pub fn read_feature_map(path: &Path) -> Result<FeatureMap> {
    read_tensor(path)?.to_feature_map(path)
}

pub fn read_displacement_field(path: &Path) -> Result<DisplacementField> {
    read_tensor(path)?.to_displacement_field(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.bwtf")
    }

    #[test]
    fn header_layout_is_fixed() {
        let t = Tensor::new(vec![1, 2], vec![1.0, -2.5]).unwrap();
        let b = t.encode();
        assert_eq!(&b[..4], b"BWTF");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(b[8], 2);
        assert_eq!(&b[9..17], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&b[17..21], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 25);
        assert_eq!(Tensor::decode(&b, p()).unwrap(), t);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let vals: Vec<f32> = (0..60).map(|i| (i as f32).sin() * 1e-3 + i as f32).collect();
        let map = FeatureMap::new(3, 4, 5, vals).unwrap();
        let back = Tensor::decode(&Tensor::from(&map).encode(), p()).unwrap().to_feature_map(p()).unwrap();
        assert_eq!(back, map);
        let bits: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits, map.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let mut b = Tensor::new(vec![1], vec![0.0]).unwrap().encode();
        b[..4].copy_from_slice(b"XXXX");
        match Tensor::decode(&b, p()) {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncation_and_trailing_bytes_are_rejected() {
        let b = Tensor::new(vec![2, 2], vec![1.0; 4]).unwrap().encode();
        assert!(matches!(Tensor::decode(&b[..b.len() - 1], p()), Err(Error::Format { .. })));
        assert!(matches!(Tensor::decode(&b[..12], p()), Err(Error::Format { offset: 12, .. })));
        let mut long = b.clone();
        long.push(0);
        assert!(matches!(Tensor::decode(&long, p()), Err(Error::Format { offset: 33, .. })));
        let mut v2 = b;
        v2[4] = 2;
        assert!(matches!(Tensor::decode(&v2, p()), Err(Error::Format { offset: 4, .. })));
    }

    #[test]
    fn displacement_layout_is_dx_then_dy() {
        let t = Tensor::new(vec![2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = t.to_displacement_field(p()).unwrap();
        assert_eq!(d.dx(), &[1.0, 2.0]);
        assert_eq!(d.dy(), &[3.0, 4.0]);
        let wrong = Tensor::new(vec![3, 1, 2], vec![0.0; 6]).unwrap();
        assert!(matches!(wrong.to_displacement_field(p()), Err(Error::Format { .. })));
    }

    #[test]
    fn rank_mismatch_for_feature_maps() {
        let t = Tensor::new(vec![1, 1, 1, 1], vec![0.0]).unwrap();
        assert!(matches!(t.to_feature_map(p()), Err(Error::Format { offset: 8, .. })));
    }
}
