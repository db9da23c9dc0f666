//! Labelled datasets in the unsigned input Q-format.

mod idx;
mod synth;

pub use idx::{encode_idx, load_idx, IMAGE_MAGIC, LABEL_MAGIC};
pub use synth::{synth_dataset, SynthKind};

use crate::error::{Error, Result};
use crate::fixedpoint::QFormat;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    source: String,
    format: QFormat,
    dim: usize,
    num_classes: usize,
    /// Row-major `len x dim` raw inputs.
    inputs: Vec<u16>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(
        source: impl Into<String>,
        format: QFormat,
        dim: usize,
        num_classes: usize,
        inputs: Vec<u16>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if format.is_signed() {
            return Err(Error::InvalidFormat(format!(
                "dataset inputs must be unsigned, got {format}"
            )));
        }
        if dim == 0 || inputs.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * labels.len(),
                found: inputs.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| usize::from(l) >= num_classes) {
            return Err(Error::Precondition(format!(
                "label {bad} is not below the class count {num_classes}"
            )));
        }
        let max = format.max_raw();
        if inputs.iter().any(|&x| i32::from(x) > max) {
            return Err(Error::InvalidFormat(format!(
                "input value exceeds {format}"
            )));
        }
        Ok(Dataset {
            source: source.into(),
            format,
            dim,
            num_classes,
            inputs,
            labels,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn format(&self) -> QFormat {
        self.format
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[u16] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        usize::from(self.labels[i])
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u16], usize)> + '_ {
        self.inputs
            .chunks_exact(self.dim)
            .zip(self.labels.iter().map(|&l| usize::from(l)))
    }

    /// Samples `range`, order preserved.
    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        let end = end.min(self.len());
        let start = start.min(end);
        Dataset {
            source: self.source.clone(),
            format: self.format,
            dim: self.dim,
            num_classes: self.num_classes,
            inputs: self.inputs[start * self.dim..end * self.dim].to_vec(),
            labels: self.labels[start..end].to_vec(),
        }
    }

    /// First `n` samples and the rest.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        (self.slice(0, n), self.slice(n, self.len()))
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[usize::from(l)] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks() {
        let f = QFormat::INPUT;
        assert!(Dataset::new("t", f, 2, 2, vec![0, 1, 2, 3], vec![0, 1]).is_ok());
        assert!(Dataset::new("t", f, 2, 2, vec![0, 1, 2], vec![0, 1]).is_err());
        assert!(Dataset::new("t", f, 2, 2, vec![0, 1, 2, 3], vec![0, 2]).is_err());
        assert!(Dataset::new("t", f, 1, 2, vec![256], vec![0]).is_err());
        assert!(Dataset::new("t", QFormat::WEIGHT_8, 1, 2, vec![1], vec![0]).is_err());
    }

    #[test]
    fn slicing_preserves_order() {
        let d = Dataset::new(
            "t",
            QFormat::INPUT,
            1,
            3,
            vec![10, 11, 12, 13],
            vec![0, 1, 2, 0],
        )
        .unwrap();
        let (a, b) = d.split_at(3);
        assert_eq!(a.len(), 3);
        assert_eq!(b.input(0), &[13]);
        assert_eq!(a.label(2), 2);
        assert_eq!(d.class_counts(), vec![2, 1, 1]);
        assert_eq!(d.slice(5, 9).len(), 0);
    }
}
