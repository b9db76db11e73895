use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// A labelled image set parsed from a pair of IDX files. Pixels are stored
/// row-flattened, scaled to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct IdxImageSet {
    pixels: DMatrix<f64>,
    labels: Vec<usize>,
    rows: usize,
    cols: usize,
}

impl IdxImageSet {
    pub fn new(pixels: DMatrix<f64>, labels: Vec<usize>, rows: usize, cols: usize) -> Result<Self> {
        if pixels.nrows() != labels.len() {
            return Err(Error::dims(pixels.nrows(), labels.len()));
        }
        if rows == 0 || cols == 0 || pixels.ncols() != rows * cols {
            return Err(Error::Config("image geometry inconsistent".into()));
        }
        Ok(Self {
            pixels,
            labels,
            rows,
            cols,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `N x (rows * cols)` matrix of pixels in `[0, 1]`.
    pub fn pixels(&self) -> &DMatrix<f64> {
        &self.pixels
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_distinct_labels(&self) -> usize {
        let mut seen = vec![false; 256];
        let mut count = 0;
        for &l in &self.labels {
            if !seen[l] {
                seen[l] = true;
                count += 1;
            }
        }
        count
    }
}

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Format(format!(
            "truncated header while reading {what}: need {end} bytes, have {}",
            bytes.len()
        )));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parses a big-endian IDX3 image payload (magic, N, rows, cols, raw bytes).
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Vec<u8>, usize, usize, usize)> {
    let magic = read_u32_be(bytes, 0, "image magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "bad image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}"
        )));
    }
    let n = read_u32_be(bytes, 4, "image count")? as usize;
    let rows = read_u32_be(bytes, 8, "row count")? as usize;
    let cols = read_u32_be(bytes, 12, "column count")? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!("degenerate image size {rows}x{cols}")));
    }
    let expected = 16 + n * rows * cols;
    if bytes.len() < expected {
        return Err(Error::Format(format!(
            "truncated image payload: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    Ok((bytes[16..expected].to_vec(), n, rows, cols))
}

/// Parses a big-endian IDX1 label payload (magic, N, raw bytes).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32_be(bytes, 0, "label magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "bad label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}"
        )));
    }
    let n = read_u32_be(bytes, 4, "label count")? as usize;
    let expected = 8 + n;
    if bytes.len() < expected {
        return Err(Error::Format(format!(
            "truncated label payload: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    Ok(bytes[8..expected].to_vec())
}

/// Loads an image/label IDX pair; pixel bytes are divided by 255.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<IdxImageSet> {
    let (raw, n, rows, cols) = parse_idx_images(&std::fs::read(images_path)?)?;
    let raw_labels = parse_idx_labels(&std::fs::read(labels_path)?)?;
    if raw_labels.len() != n {
        return Err(Error::Format(format!(
            "image/label count mismatch: {n} images vs {} labels",
            raw_labels.len()
        )));
    }
    let dim = rows * cols;
    let pixels = DMatrix::from_fn(n, dim, |i, j| raw[i * dim + j] as f64 / 255.0);
    let labels = raw_labels.into_iter().map(|l| l as usize).collect();
    IdxImageSet::new(pixels, labels, rows, cols)
}
