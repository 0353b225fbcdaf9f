//! IDX container reader (the format MNIST ships in), plain or gzip.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::nn::Matrix;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Images scaled to `[0, 1]` with one label per image.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxSamples {
    pub inputs: Matrix<f32>,
    pub labels: Vec<usize>,
    /// `[rows, cols]` of each image.
    pub image_shape: [usize; 2],
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Io {
                path: self.path.to_path_buf(),
                offset: Some(self.bytes.len() as u64),
                source: std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    format!("truncated: needed {n} bytes at offset {}", self.pos),
                ),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let found = self.u32()?;
        if found != expected {
            return Err(Error::Format {
                path: self.path.to_path_buf(),
                msg: format!("bad IDX magic {found:#010x}, expected {expected:#010x}"),
            });
        }
        Ok(())
    }
}

/// Decode an (uncompressed) IDX image file. `path` is only used in errors.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(Matrix<f32>, [usize; 2])> {
    let mut r = Reader { bytes, pos: 0, path };
    r.magic(IMAGES_MAGIC)?;
    let count = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let pixels = r.take(count * rows * cols)?;
    let data = pixels.iter().map(|&p| p as f32 / 255.0).collect();
    Ok((Matrix::new(count, rows * cols, data)?, [rows, cols]))
}

/// Decode an (uncompressed) IDX label file.
pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    let mut r = Reader { bytes, pos: 0, path };
    r.magic(LABELS_MAGIC)?;
    let count = r.u32()? as usize;
    Ok(r.take(count)?.iter().map(|&l| l as usize).collect())
}

/// Read an image file and its label file; either may be gzip-compressed.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<IdxSamples> {
    let (inputs, image_shape) = parse_idx_images(&read_file(images_path)?, images_path)?;
    let labels = parse_idx_labels(&read_file(labels_path)?, labels_path)?;
    if inputs.rows != labels.len() {
        return Err(Error::Consistency {
            path: labels_path.to_path_buf(),
            msg: format!(
                "{} labels for {} images in {}",
                labels.len(),
                inputs.rows,
                images_path.display()
            ),
        });
    }
    Ok(IdxSamples {
        inputs,
        labels,
        image_shape,
    })
}

/// Serialize raw 8-bit images (`count * rows * cols` bytes) as IDX.
pub fn encode_idx_images(pixels: &[u8], rows: usize, cols: usize) -> Vec<u8> {
    let count = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
