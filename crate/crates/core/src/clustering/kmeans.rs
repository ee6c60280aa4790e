use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iter: 300,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after the initial assignment and after every Lloyd iteration.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    /// Member count per cluster.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

pub fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid and its squared distance; ties go to the lower index.
fn nearest(x: ArrayView1<'_, f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign_all(x: &ArrayView2<'_, f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    x.rows().into_iter().map(|row| nearest(row, centroids)).unzip()
}

fn plus_plus_init(x: &ArrayView2<'_, f64>, k: usize, rng: &mut impl Rng) -> Array2<f64> {
    let m = x.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..m));
    let mut d2: Vec<f64> = x.rows().into_iter().map(|r| sq_dist(r, x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` beyond the final partial sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            (0..m).find(|i| !chosen.contains(i)).expect("k <= m")
        };
        chosen.push(next);
        for (i, row) in x.rows().into_iter().enumerate() {
            let d = sq_dist(row, x.row(next));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    x.select(ndarray::Axis(0), &chosen)
}

/// k-means++ seeding followed by Lloyd iterations.
///
/// A cluster that empties is re-seeded at the point farthest from its own
/// centroid, which then moves to the empty cluster.
pub fn kmeans_fit(x: ArrayView2<'_, f64>, k: usize, cfg: &KMeansConfig) -> Result<ClusterModel> {
    let (m, dim) = x.dim();
    if k < 1 {
        return Err(Error::Config("k-means needs k >= 1".into()));
    }
    if k > m {
        return Err(Error::Config(format!("k-means with k = {k} > {m} samples")));
    }
    if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { row, col });
    }

    let mut rng = rng::stream(cfg.seed, 3);
    let mut centroids = plus_plus_init(&x, k, &mut rng);
    let (mut assignments, mut dists) = assign_all(&x, &centroids);
    let mut history = vec![dists.iter().sum::<f64>()];

    for _ in 0..cfg.max_iter {
        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            let mut s = sums.row_mut(a);
            s += &x.row(i);
        }
        let mut next = centroids.clone();
        for j in 0..k {
            if counts[j] > 0 {
                let mean = sums.row(j).mapv(|v| v / counts[j] as f64);
                next.row_mut(j).assign(&mean);
            }
        }

        if counts.contains(&0) {
            for (i, &a) in assignments.iter().enumerate() {
                dists[i] = sq_dist(x.row(i), next.row(a));
            }
            for j in 0..k {
                if counts[j] > 0 {
                    continue;
                }
                let mut far = 0;
                for i in 1..m {
                    if dists[i] > dists[far] {
                        far = i;
                    }
                }
                counts[assignments[far]] -= 1;
                next.row_mut(j).assign(&x.row(far));
                assignments[far] = j;
                counts[j] = 1;
                dists[far] = 0.0;
            }
        }

        let movement = centroids
            .rows()
            .into_iter()
            .zip(next.rows())
            .map(|(a, b)| sq_dist(a, b))
            .fold(0.0, f64::max)
            .sqrt();
        centroids = next;
        (assignments, dists) = assign_all(&x, &centroids);
        history.push(dists.iter().sum());
        if movement < cfg.tol {
            break;
        }
    }

    Ok(ClusterModel {
        centroids,
        assignments,
        inertia: *history.last().expect("non-empty"),
        inertia_history: history,
    })
}

pub fn kmeans_assign(model: &ClusterModel, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    if x.ncols() != model.centroids.ncols() {
        return Err(Error::Shape {
            context: "k-means features",
            expected: model.centroids.ncols(),
            found: x.ncols(),
        });
    }
    Ok(assign_all(&x, &model.centroids).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn k_equals_m_has_zero_inertia() {
        let x = array![[0.0, 1.0], [2.0, 3.0], [5.0, -1.0], [0.5, 0.5], [9.0, 9.0]];
        let model = kmeans_fit(x.view(), 5, &KMeansConfig::default()).unwrap();
        assert_eq!(model.inertia, 0.0);
        let mut seen = model.assignments.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn four_points_two_clusters() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        for seed in 0..10 {
            let cfg = KMeansConfig {
                seed,
                ..Default::default()
            };
            let model = kmeans_fit(x.view(), 2, &cfg).unwrap();
            assert!((model.inertia - 1.0).abs() < 1e-9, "seed {seed}");
            let mut c: Vec<(f64, f64)> = model
                .centroids
                .rows()
                .into_iter()
                .map(|r| (r[0], r[1]))
                .collect();
            c.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(c, vec![(0.0, 0.5), (10.0, 0.5)]);
        }
    }

    #[test]
    fn assign_tie_rule_and_exact_hit() {
        let model = ClusterModel {
            centroids: array![[0.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [4.0, 4.0]],
            assignments: vec![],
            inertia: 0.0,
            inertia_history: vec![],
        };
        let got = kmeans_assign(&model, array![[0.0, -5.0], [4.0, 4.0]].view()).unwrap();
        // (0,-5) is equidistant from centroids 1 and 2 but closer to 0.
        assert_eq!(got, vec![0, 3]);
        let tie = ClusterModel {
            centroids: array![[9.0, 9.0], [-1.0, 0.0], [1.0, 0.0]],
            ..model
        };
        assert_eq!(kmeans_assign(&tie, array![[0.0, 0.0]].view()).unwrap(), vec![1]);
        assert!(kmeans_assign(&tie, array![[0.0]].view()).is_err());
    }

    #[test]
    fn invalid_k() {
        let x = array![[0.0], [1.0]];
        assert!(kmeans_fit(x.view(), 0, &KMeansConfig::default()).is_err());
        assert!(kmeans_fit(x.view(), 3, &KMeansConfig::default()).is_err());
    }

    #[test]
    fn duplicate_points_do_not_break_seeding() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [2.0, 2.0]];
        let model = kmeans_fit(x.view(), 3, &KMeansConfig::default()).unwrap();
        assert_eq!(model.inertia, 0.0);
        assert_eq!(model.k(), 3);
    }
}
