use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use super::CliError;
use crate::federation::RoundRecord;

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| CliError::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

/// One line of metrics.csv; `round` is a round number or `p<j>` for party `j`'s
/// personalized model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub round: String,
    pub global_loss: f64,
    pub val_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub messages: usize,
    pub bytes: usize,
    pub latency_ms: f64,
}

impl From<&RoundRecord> for MetricsRow {
    fn from(r: &RoundRecord) -> Self {
        Self {
            round: r.round.to_string(),
            global_loss: r.global_loss,
            val_accuracy: r.val_accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            messages: r.messages,
            bytes: r.bytes,
            latency_ms: r.latency_ms,
        }
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<(), CliError> {
    write_atomic(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        for r in rows {
            csv.serialize(r)?;
        }
        csv.flush()
    })
}
