//! Dataset carrier, on-disk formats and the synthetic domain-shift generator.

mod csv;
mod format;
mod synth;

pub use self::csv::{load_csv, parse_csv, save_csv, write_csv};
pub use self::format::{decode_matrix, encode_matrix, load_matrix, save_matrix, MATRIX_MAGIC};
pub use self::synth::{synth_domains, SynthConfig, SynthDomains};

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

/// An `M x D` sample matrix with optional integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    data: Array2<f32>,
    labels: Option<Vec<usize>>,
}

impl FeatureSet {
    /// Validates shape, finiteness and label length.
    pub fn new(data: Array2<f32>, labels: Option<Vec<usize>>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::EmptyDataset);
        }
        for ((row, col), v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
        if let Some(l) = &labels {
            if l.len() != data.nrows() {
                return Err(Error::Shape {
                    context: "label count",
                    expected: data.nrows(),
                    found: l.len(),
                });
            }
        }
        Ok(FeatureSet { data, labels })
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f32> {
        &self.data
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Labels, or [`Error::Unlabelled`].
    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels.as_deref().ok_or(Error::Unlabelled)
    }

    pub fn without_labels(&self) -> FeatureSet {
        FeatureSet {
            data: self.data.clone(),
            labels: None,
        }
    }

    /// Checks every label is below `num_classes`.
    pub fn check_labels(&self, num_classes: usize) -> Result<()> {
        if let Some(l) = &self.labels {
            if let Some((row, &label)) = l.iter().enumerate().find(|(_, &y)| y >= num_classes) {
                return Err(Error::LabelOutOfRange {
                    row,
                    label,
                    classes: num_classes,
                });
            }
        }
        Ok(())
    }

    /// Widened copy of the data for double-precision compute.
    pub fn to_f64(&self) -> Array2<f64> {
        self.data.mapv(f64::from)
    }

    /// Rows at `indices`, in that order, with labels carried along.
    pub fn select(&self, indices: &[usize]) -> FeatureSet {
        let data = self.data.select(Axis(0), indices);
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        FeatureSet { data, labels }
    }

    /// Same rows with `labels` replacing whatever was attached.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<FeatureSet> {
        FeatureSet::new(self.data.clone(), Some(labels))
    }
}
