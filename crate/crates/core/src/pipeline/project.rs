//! Two-component PCA by power iteration, used for plotting feature spaces.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

const POWER_ITERS: usize = 1000;
const POWER_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `M x 2` coordinates of the centered data.
    pub coords: Array2<f64>,
    /// Principal directions as rows.
    pub components: Array2<f64>,
    /// Eigenvalues of the sample covariance for each component.
    pub variances: [f64; 2],
    pub mean: Array1<f64>,
}

/// Sample covariance with the `M - 1` normalization.
pub fn covariance(x: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let m = x.nrows();
    if m < 2 {
        return Err(Error::EmptyDataset);
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (m as f64 - 1.0);
    Ok((mean, cov))
}

pub fn pca2(x: ArrayView2<'_, f64>) -> Result<Projection> {
    let d = x.ncols();
    let (mean, cov) = covariance(x)?;
    let scale = cov.diag().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut components = Array2::<f64>::zeros((2, d));
    let mut variances = [0.0; 2];
    for c in 0..2 {
        if c >= d {
            log::warn!("data has {d} column(s); component {c} set to zero");
            break;
        }
        // Deterministic start that is not orthogonal to any axis.
        let mut v = Array1::from_shape_fn(d, |i| 1.0 + i as f64 / d as f64);
        orthogonalize(&mut v, &components, c);
        let mut lambda = 0.0;
        let mut degenerate = v.dot(&v).sqrt() == 0.0;
        if !degenerate {
            v /= v.dot(&v).sqrt();
            for _ in 0..POWER_ITERS {
                let mut w = cov.dot(&v);
                orthogonalize(&mut w, &components, c);
                let norm = w.dot(&w).sqrt();
                if norm <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                    degenerate = true;
                    break;
                }
                w /= norm;
                let delta = (&w - &v).mapv(f64::abs).sum();
                v = w;
                lambda = v.dot(&cov.dot(&v));
                if delta < POWER_TOL {
                    break;
                }
            }
        }
        if degenerate {
            log::warn!("rank-deficient data; component {c} set to zero");
            break;
        }
        // Sign convention: largest-magnitude coordinate positive.
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, &a)| if a.abs() > bv { (i, a.abs()) } else { (bi, bv) });
        if v[imax] < 0.0 {
            v.mapv_inplace(|a| -a);
        }
        components.row_mut(c).assign(&v);
        variances[c] = lambda;
    }
    let coords = (&x - &mean).dot(&components.t());
    Ok(Projection {
        coords,
        components,
        variances,
        mean,
    })
}

fn orthogonalize(v: &mut Array1<f64>, basis: &Array2<f64>, count: usize) {
    for b in basis.rows().into_iter().take(count) {
        let p = v.dot(&b);
        v.scaled_add(-p, &b);
    }
}

/// `x,y,label` rows; the label column is empty for unlabelled data.
pub fn projection_csv(coords: &Array2<f64>, labels: Option<&[usize]>) -> String {
    let mut out = String::from("x,y,label\n");
    for (i, row) in coords.rows().into_iter().enumerate() {
        let label = labels.map(|l| l[i].to_string()).unwrap_or_default();
        out.push_str(&format!("{:.6},{:.6},{label}\n", row[0], row[1]));
    }
    out
}
