use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub iterations: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            epsilon: 0.05,
            iterations: 3,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config("sinkhorn epsilon must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("sinkhorn needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// Entropic transport plan between `B` samples and `P` prototypes.
///
/// Starts from `exp(scores / epsilon)` and alternates column scaling (each
/// column to `1/P`) with row scaling (each row to `1/B`). The row step comes
/// last, so row marginals are exact and column marginals converge.
pub fn sinkhorn_plan(scores: ArrayView2<'_, f64>, cfg: &SinkhornConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let (b, p) = scores.dim();
    if b == 0 || p == 0 {
        return Err(Error::EmptyDataset);
    }
    if let Some(((row, col), _)) = scores.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { row, col });
    }
    let underflow = || Error::SinkhornUnderflow {
        epsilon: cfg.epsilon,
    };

    // The global shift cancels in the normalizations and keeps exp() <= 1.
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut q = scores.mapv(|s| ((s - max) / cfg.epsilon).exp());
    let total = q.sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(underflow());
    }
    q /= total;

    let (row_mass, col_mass) = (1.0 / b as f64, 1.0 / p as f64);
    for _ in 0..cfg.iterations {
        for mut col in q.columns_mut() {
            let s = col.sum();
            if !(s > 0.0 && s.is_finite()) {
                return Err(underflow());
            }
            col.mapv_inplace(|v| v * (col_mass / s));
        }
        for mut row in q.rows_mut() {
            let s = row.sum();
            if !(s > 0.0 && s.is_finite()) {
                return Err(underflow());
            }
            row.mapv_inplace(|v| v * (row_mass / s));
        }
    }
    Ok(q)
}

/// Transport plan rescaled so every row is a distribution over prototypes.
pub fn sinkhorn_codes(scores: ArrayView2<'_, f64>, cfg: &SinkhornConfig) -> Result<Array2<f64>> {
    let mut q = sinkhorn_plan(scores, cfg)?;
    let sums = q.sum_axis(Axis(1));
    for (mut row, s) in q.rows_mut().into_iter().zip(sums) {
        row.mapv_inplace(|v| v / s);
    }
    Ok(q)
}
