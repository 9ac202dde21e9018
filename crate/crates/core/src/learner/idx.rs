//! Reader for the big-endian IDX files MNIST ships in.

use std::path::Path;

use super::dataset::Dataset;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 2051;
pub const LABELS_MAGIC: u32 = 2049;
const MNIST_CLASSES: usize = 10;

struct Header<'a> {
    dims: Vec<usize>,
    body: &'a [u8],
}

fn parse_header<'a>(bytes: &'a [u8], magic: u32, ndims: usize, path: &Path) -> Result<Header<'a>> {
    let fmt = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let header_len = 4 * (1 + ndims);
    if bytes.len() < header_len {
        return Err(fmt(format!(
            "file is {} bytes, shorter than the {header_len}-byte header",
            bytes.len()
        )));
    }
    let word = |k: usize| u32::from_be_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap());
    let found = word(0);
    if found != magic {
        return Err(fmt(format!("magic number {found}, expected {magic}")));
    }
    let dims: Vec<usize> = (1..=ndims).map(|k| word(k) as usize).collect();
    let expected: usize = dims.iter().product();
    let body = &bytes[header_len..];
    if body.len() < expected {
        return Err(fmt(format!(
            "header declares {expected} data bytes but only {} are present",
            body.len()
        )));
    }
    Ok(Header {
        dims,
        body: &body[..expected],
    })
}

/// Parses already-loaded image and label files. Paths are used for error
/// messages only.
pub fn parse_idx_pair(
    images: &[u8],
    images_path: &Path,
    labels: &[u8],
    labels_path: &Path,
) -> Result<Dataset> {
    let img = parse_header(images, IMAGES_MAGIC, 3, images_path)?;
    let lab = parse_header(labels, LABELS_MAGIC, 1, labels_path)?;
    let (count, rows, cols) = (img.dims[0], img.dims[1], img.dims[2]);
    if count != lab.dims[0] {
        return Err(Error::Consistency(format!(
            "{} declares {count} images but {} declares {} labels",
            images_path.display(),
            labels_path.display(),
            lab.dims[0]
        )));
    }
    if let Some(bad) = lab.body.iter().find(|&&b| b as usize >= MNIST_CLASSES) {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            reason: format!("label {bad} outside 0..{MNIST_CLASSES}"),
        });
    }
    let features = img.body.iter().map(|&b| b as f32 / 255.0).collect();
    let labels = lab.body.iter().map(|&b| b as usize).collect();
    Dataset::new(features, labels, rows * cols, MNIST_CLASSES)
}

/// Loads an IDX image file (magic 2051) and its label file (magic 2049).
/// Pixel bytes are scaled into [0, 1].
pub fn load_idx_dataset(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    parse_idx_pair(&images, images_path, &labels, labels_path)
}

#[cfg(test)]
pub(crate) fn encode_idx(magic: u32, dims: &[u32], body: &[u8]) -> Vec<u8> {
    let mut out = magic.to_be_bytes().to_vec();
    for d in dims {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(body);
    out
}
