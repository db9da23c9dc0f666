//! MNIST IDX reader (big-endian headers, unsigned byte payloads).

use std::fs;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fixedpoint::QFormat;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

struct Header {
    count: usize,
    dims: Vec<usize>,
    payload_offset: usize,
}

fn read_header(path: &Path, bytes: &[u8], magic: u32, ndims: usize) -> Result<Header> {
    let header_len = 4 + 4 * ndims;
    let truncated = |have: usize| Error::Truncated {
        path: path.to_owned(),
        detail: format!("{have} header bytes, need {header_len}"),
    };
    if bytes.len() < 4 {
        return Err(truncated(bytes.len()));
    }
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let found = word(0);
    if found != magic {
        return Err(Error::BadMagic {
            path: path.to_owned(),
            expected: magic,
            found,
        });
    }
    if bytes.len() < header_len {
        return Err(truncated(bytes.len()));
    }
    let count = word(1) as usize;
    let dims: Vec<usize> = (2..=ndims).map(|i| word(i) as usize).collect();
    let per_item = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let needed = per_item
        .and_then(|p| p.checked_mul(count))
        .and_then(|p| p.checked_add(header_len));
    match needed {
        Some(n) if n <= bytes.len() => Ok(Header {
            count,
            dims,
            payload_offset: header_len,
        }),
        _ => Err(Error::Truncated {
            path: path.to_owned(),
            detail: format!(
                "{} items of {:?} do not fit in {} bytes",
                count,
                dims,
                bytes.len()
            ),
        }),
    }
}

/// Loads an image/label file pair. Pixels `0..=255` become unsigned Q0.8
/// raw values unchanged. `limit == 0` keeps every sample.
pub fn load_idx(images: &Path, labels: &Path, limit: usize) -> Result<Dataset> {
    let image_bytes = fs::read(images)?;
    let label_bytes = fs::read(labels)?;
    let ih = read_header(images, &image_bytes, IMAGE_MAGIC, 3)?;
    let lh = read_header(labels, &label_bytes, LABEL_MAGIC, 1)?;
    if ih.count != lh.count {
        return Err(Error::CountMismatch {
            images: ih.count,
            labels: lh.count,
        });
    }
    let dim = ih.dims[0] * ih.dims[1];
    if dim == 0 {
        return Err(Error::Truncated {
            path: images.to_owned(),
            detail: "zero-sized images".into(),
        });
    }
    let n = if limit == 0 {
        ih.count
    } else {
        limit.min(ih.count)
    };
    let pixels = &image_bytes[ih.payload_offset..ih.payload_offset + n * dim];
    let label_slice = label_bytes[lh.payload_offset..lh.payload_offset + n].to_vec();
    let num_classes = label_slice
        .iter()
        .map(|&l| usize::from(l) + 1)
        .max()
        .unwrap_or(0)
        .max(10);
    Dataset::new(
        format!("idx:{}", images.display()),
        QFormat::INPUT,
        dim,
        num_classes,
        pixels.iter().map(|&p| u16::from(p)).collect(),
        label_slice,
    )
}

/// Serialises images and labels in IDX layout; used to build fixtures.
pub fn encode_idx(rows: usize, cols: usize, pixels: &[u8], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    assert_eq!(pixels.len(), rows * cols * labels.len());
    let mut img = Vec::with_capacity(16 + pixels.len());
    img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    img.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}
