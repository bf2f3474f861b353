//! Synthetic two-class datasets, partitioning and evaluation metrics.

mod generate;
mod metrics;
mod split;

pub use generate::{generate, party_shift, spectral_features, GeneratorConfig};
pub use metrics::{metrics, Confusion, Metrics};
pub use split::{partition, shard_sizes, PartitionMode, Shard};

use std::io::{Read, Write};

use ndarray::Array2;
use thiserror::Error;

use crate::model::{Batch, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("feature dimension must be at least 8, got {0}")]
    InvalidDim(usize),
    #[error("invalid data configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot split {samples} samples across {parties} parties")]
    TooFewSamples { samples: usize, parties: usize },
    #[error("empty input")]
    EmptyBatch,
    #[error("{0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("label {0} is not binary")]
    NonBinaryLabel(usize),
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for DataError {
    fn from(e: csv::Error) -> Self {
        DataError::Csv(e.to_string())
    }
}

/// Feature rows with binary labels, tagged with their generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub seed: u64,
    pub heterogeneity: f64,
    pub party: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// One-hot batch over the selected rows.
    pub fn batch(&self, rows: &[usize]) -> Result<Batch, ModelError> {
        let inputs = self.features.select(ndarray::Axis(0), rows);
        let labels: Vec<usize> = rows.iter().map(|&r| self.labels[r]).collect();
        Batch::from_labels(inputs, &labels, 2)
    }

    pub fn labels_at(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&r| self.labels[r]).collect()
    }

    /// One row per sample: `f0, .., f{dim-1}, label`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DataError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.dim()).map(|d| format!("f{d}")).collect();
        header.push("label".into());
        out.write_record(&header)?;
        for (row, label) in self.features.rows().into_iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(label.to_string());
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| DataError::Csv(e.to_string()))
    }

    /// Inverse of [`Dataset::write_csv`]; generator tags are left at zero.
    pub fn read_csv<R: Read>(r: R) -> Result<Dataset, DataError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut dim = None;
        for rec in rdr.records() {
            let rec = rec?;
            let d = rec.len().checked_sub(1).filter(|&d| d > 0).ok_or_else(|| DataError::Csv("row without features".into()))?;
            if *dim.get_or_insert(d) != d {
                return Err(DataError::Csv(format!("ragged row with {d} features")));
            }
            for f in rec.iter().take(d) {
                values.push(f.parse::<f64>().map_err(|e| DataError::Csv(e.to_string()))?);
            }
            let label: usize = rec[d].parse().map_err(|_| DataError::Csv(format!("bad label {:?}", &rec[d])))?;
            if label > 1 {
                return Err(DataError::NonBinaryLabel(label));
            }
            labels.push(label);
        }
        let dim = dim.unwrap_or(0);
        let features = Array2::from_shape_vec((labels.len(), dim), values).map_err(|e| DataError::Csv(e.to_string()))?;
        Ok(Dataset {
            features,
            labels,
            seed: 0,
            heterogeneity: 0.0,
            party: 0,
        })
    }
}
