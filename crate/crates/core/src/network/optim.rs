use std::f64::consts::PI;

use super::round_f32;
use crate::error::{Error, Result};

/// `lr_min + (lr0 - lr_min) * (1 + cos(pi t / T)) / 2` for `0 <= t <= T`.
pub fn cosine_lr(t: usize, total: usize, lr0: f64, lr_min: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::OutOfRange {
            what: "cosine schedule length must be >= 1",
            value: 0.0,
        });
    }
    if t > total {
        return Err(Error::OutOfRange {
            what: "cosine schedule step beyond total",
            value: t as f64,
        });
    }
    if t == total {
        return Ok(lr_min);
    }
    let cos = (PI * t as f64 / total as f64).cos();
    Ok(lr_min + 0.5 * (lr0 - lr_min) * (1.0 + cos))
}

/// Momentum SGD: `v <- mu v + g; p <- p - lr v`.
///
/// Velocity buffers are allocated on the first step and matched to parameter
/// groups by position, so callers must pass groups in a stable order.
#[derive(Debug, Clone, Default)]
pub struct Sgd {
    momentum: f64,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(momentum: f64) -> Self {
        Sgd {
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>, lr: f64) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient group count");
        if self.velocity.is_empty() {
            self.velocity = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        }
        assert_eq!(self.velocity.len(), params.len(), "parameter groups changed");
        for ((p, g), v) in params.into_iter().zip(grads).zip(self.velocity.iter_mut()) {
            for ((pi, gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = self.momentum * *vi + gi;
                if lr != 0.0 {
                    *pi = round_f32(*pi - lr * *vi);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        assert_eq!(cosine_lr(0, 10, 0.1, 0.001).unwrap(), 0.1);
        assert_eq!(cosine_lr(10, 10, 0.1, 0.001).unwrap(), 0.001);
        let mid = cosine_lr(5, 10, 0.1, 0.001).unwrap();
        assert!((mid - 0.0505).abs() < 1e-15);
        assert!(cosine_lr(11, 10, 0.1, 0.0).is_err());
        assert!(cosine_lr(0, 0, 0.1, 0.0).is_err());
    }

    #[test]
    fn schedule_non_increasing() {
        let lrs: Vec<f64> = (0..=97).map(|t| cosine_lr(t, 97, 0.3, 0.01).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_momentum_is_plain_sgd() {
        let mut p = vec![0.5, -1.25, 3.0];
        let g = vec![0.1, 0.2, -0.3];
        let expected: Vec<f64> = p.iter().zip(&g).map(|(p, g)| round_f32(p - 0.05 * g)).collect();
        let mut sgd = Sgd::new(0.0);
        sgd.step(vec![&mut p], vec![&g], 0.05);
        assert_eq!(p, expected);
    }

    #[test]
    fn momentum_accumulates() {
        let mut p = vec![0.0];
        let mut sgd = Sgd::new(0.5);
        sgd.step(vec![&mut p], vec![&[1.0]], 1.0);
        sgd.step(vec![&mut p], vec![&[1.0]], 1.0);
        assert_eq!(p, vec![-2.5]);
    }
}
