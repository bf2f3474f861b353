use serde::Serialize;

use super::DataError;

/// Binary classification scores with class 1 as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    /// Set when a zero denominator forced a score to 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_predictions(predictions: &[usize], labels: &[usize]) -> Result<Self, DataError> {
        if predictions.is_empty() {
            return Err(DataError::EmptyBatch);
        }
        if predictions.len() != labels.len() {
            return Err(DataError::LengthMismatch(predictions.len(), labels.len()));
        }
        let mut c = Confusion::default();
        for (&p, &l) in predictions.iter().zip(labels) {
            match (p, l) {
                (1, 1) => c.tp += 1,
                (1, 0) => c.fp += 1,
                (0, 1) => c.fn_ += 1,
                (0, 0) => c.tn += 1,
                _ => return Err(DataError::NonBinaryLabel(p.max(l))),
            }
        }
        Ok(c)
    }

    pub fn metrics(&self) -> Metrics {
        let mut degenerate = false;
        let mut ratio = |num: usize, den: usize| {
            if den == 0 {
                degenerate = true;
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let accuracy = ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            degenerate = true;
            0.0
        };
        Metrics {
            precision,
            recall,
            accuracy,
            f1,
            degenerate,
        }
    }
}

pub fn metrics(predictions: &[usize], labels: &[usize]) -> Result<Metrics, DataError> {
    Ok(Confusion::from_predictions(predictions, labels)?.metrics())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 1, 0];
        let m = metrics(&y, &y).unwrap();
        assert_eq!((m.precision, m.recall, m.accuracy, m.f1), (1.0, 1.0, 1.0, 1.0));
        assert!(!m.degenerate);
    }

    #[test]
    fn worked_confusion() {
        // TP=3, FP=1, FN=2, TN=4.
        let pred = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0];
        let lab = [1, 1, 1, 0, 1, 1, 0, 0, 0, 0];
        let m = metrics(&pred, &lab).unwrap();
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.6).abs() < 1e-12);
        assert!((m.accuracy - 0.7).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn degenerate_and_errors() {
        let m = metrics(&[0, 0], &[0, 0]).unwrap();
        assert_eq!(m.precision, 0.0);
        assert!(m.degenerate);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(metrics(&[], &[]), Err(DataError::EmptyBatch));
        assert_eq!(metrics(&[0], &[0, 1]), Err(DataError::LengthMismatch(1, 2)));
        assert_eq!(metrics(&[2], &[0]), Err(DataError::NonBinaryLabel(2)));
    }

    proptest! {
        #[test]
        fn f1_is_the_harmonic_mean(pairs in proptest::collection::vec((0usize..2, 0usize..2), 1..60)) {
            let (p, l): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let m = metrics(&p, &l).unwrap();
            if m.precision + m.recall > 0.0 {
                let h = 2.0 * m.precision * m.recall / (m.precision + m.recall);
                prop_assert!((m.f1 - h).abs() < 1e-12);
            }
            prop_assert!((0.0..=1.0).contains(&m.accuracy));
        }
    }
}
