use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Top-1 and class-wise accuracy. Classes absent from the data have `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub top1: f64,
    pub per_class: Vec<Option<f64>>,
    pub support: Vec<usize>,
    pub coverage: Option<f64>,
}

impl MetricsReport {
    pub fn from_predictions(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Shape {
                context: "predictions vs labels",
                expected: truth.len(),
                found: pred.len(),
            });
        }
        if truth.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut support = vec![0usize; num_classes];
        let mut hits = vec![0usize; num_classes];
        for (&p, &t) in pred.iter().zip(truth) {
            if t >= num_classes {
                return Err(Error::OutOfRange {
                    what: "label outside the class range",
                    value: t as f64,
                });
            }
            support[t] += 1;
            hits[t] += usize::from(p == t);
        }
        let per_class = support
            .iter()
            .zip(&hits)
            .map(|(&s, &h)| (s > 0).then(|| h as f64 / s as f64))
            .collect();
        Ok(MetricsReport {
            top1: hits.iter().sum::<usize>() as f64 / truth.len() as f64,
            per_class,
            support,
            coverage: None,
        })
    }

    pub fn with_coverage(mut self, coverage: f64) -> Self {
        self.coverage = Some(coverage);
        self
    }

    /// `name=value` lines with six decimals.
    pub fn to_text(&self) -> String {
        let mut out = format!("top1={:.6}\n", self.top1);
        for (n, acc) in self.per_class.iter().enumerate() {
            match acc {
                Some(a) => writeln!(out, "class_{n}={a:.6}"),
                None => writeln!(out, "class_{n}=n/a"),
            }
            .expect("write to String");
        }
        if let Some(c) = self.coverage {
            writeln!(out, "coverage={c:.6}").expect("write to String");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        let r = MetricsReport::from_predictions(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(r.top1, 0.75);
        assert_eq!(r.per_class, vec![Some(1.0), Some(2.0 / 3.0)]);
        assert_eq!(r.to_text(), "top1=0.750000\nclass_0=1.000000\nclass_1=0.666667\n");
    }

    #[test]
    fn absent_class_is_na() {
        let r = MetricsReport::from_predictions(&[0, 2], &[0, 2], 3).unwrap();
        assert_eq!(r.per_class[1], None);
        assert!(r.to_text().contains("class_1=n/a\n"));
    }

    #[test]
    fn weighted_mean_identity() {
        let truth = [0, 0, 0, 1, 2, 2, 1, 0, 2];
        let pred = [0, 1, 0, 1, 0, 2, 2, 0, 2];
        let r = MetricsReport::from_predictions(&pred, &truth, 3).unwrap();
        let m = truth.len() as f64;
        let weighted: f64 = r
            .per_class
            .iter()
            .zip(&r.support)
            .map(|(a, &s)| a.unwrap_or(0.0) * s as f64 / m)
            .sum();
        assert!((weighted - r.top1).abs() < 1e-9);
    }
}
