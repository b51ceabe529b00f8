//! Reader for the IDX binary format (unsigned-byte images and labels).

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| Error::Format {
            offset: self.pos,
            message: format!("file ends inside the {what}"),
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes(chunk.try_into().expect("four bytes")))
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8]> {
        let have = self.bytes.len() - self.pos;
        if have < len {
            return Err(Error::Format {
                offset: self.bytes.len(),
                message: format!("expected {len} data bytes, found {have}"),
            });
        }
        if have > len {
            return Err(Error::Format {
                offset: self.pos + len,
                message: format!("{} unexpected trailing bytes", have - len),
            });
        }
        let out = &self.bytes[self.pos..];
        self.pos += len;
        Ok(out)
    }
}

fn header(r: &mut Reader, magic: u32) -> Result<Vec<usize>> {
    let found = r.u32("magic number")?;
    if found != magic {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic 0x{found:08x}, expected 0x{magic:08x}"),
        });
    }
    let ndim = (magic & 0xff) as usize;
    (0..ndim)
        .map(|d| r.u32(&format!("dimension {d}")).map(|v| v as usize))
        .collect()
}

/// Parses an IDX image file: returns one row per image, pixels scaled by 1/255.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Matrix> {
    let mut r = Reader { bytes, pos: 0 };
    let dims = header(&mut r, IMAGES_MAGIC)?;
    let count = dims[0];
    let dim = dims[1].checked_mul(dims[2]);
    let len = dim.and_then(|d| d.checked_mul(count)).ok_or_else(|| Error::Format {
        offset: 4,
        message: "declared dimensions overflow".into(),
    })?;
    let data = r.payload(len)?;
    let dim = dim.expect("checked above");
    Matrix::from_vec(count, dim, data.iter().map(|&p| p as f64 / 255.0).collect())
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let mut r = Reader { bytes, pos: 0 };
    let dims = header(&mut r, LABELS_MAGIC)?;
    Ok(r.payload(dims[0])?.iter().map(|&b| b as usize).collect())
}

/// Loads a matching pair of IDX image and label files.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<(Matrix, Vec<usize>)> {
    let x = parse_idx_images(&std::fs::read(images_path)?)?;
    let y = parse_idx_labels(&std::fs::read(labels_path)?)?;
    if x.rows() != y.len() {
        return Err(Error::Format {
            offset: 4,
            message: format!("{} images but {} labels", x.rows(), y.len()),
        });
    }
    Ok((x, y))
}

/// Encodes images (`count x rows*cols` bytes) in IDX layout.
pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[Vec<u8>]) -> Vec<u8> {
    let mut out = IMAGES_MAGIC.to_be_bytes().to_vec();
    for d in [pixels.len(), rows, cols] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    pixels.iter().for_each(|p| out.extend_from_slice(p));
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = LABELS_MAGIC.to_be_bytes().to_vec();
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
