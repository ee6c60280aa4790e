//! Cluster-level pseudo-labels.
//!
//! Each sample gets the source model's argmax label. Each k-means cluster gets
//! the majority of its members' labels, and its purity is the share of members
//! that agree with that majority. Per class, the purity threshold is the
//! nearest-rank `Q`-quantile over the clusters carrying that label; a cluster is
//! retained when its purity is at least its class threshold, and all of its
//! members are retained with the cluster label.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::network::Classifier;

/// Cluster label of an empty cluster. Such clusters are never retained.
pub const NO_LABEL: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePseudoLabels {
    pub labels: Vec<usize>,
    /// Maximum softmax probability per sample.
    pub confidences: Vec<f64>,
}

impl SamplePseudoLabels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPseudoLabels {
    pub cluster_label: Vec<usize>,
    pub purity: Vec<f64>,
    pub size: Vec<usize>,
    /// Members agreeing with the cluster label; `purity = votes / size`.
    pub votes: Vec<usize>,
}

impl ClusterPseudoLabels {
    pub fn compute(assignments: &[usize], labels: &[usize], k: usize, num_classes: usize) -> Self {
        let cluster_label = cluster_majority(assignments, labels, k, num_classes);
        let (votes, size) = vote_counts(assignments, labels, &cluster_label, k);
        let purity = votes
            .iter()
            .zip(&size)
            .map(|(&v, &m)| if m == 0 { 0.0 } else { v as f64 / m as f64 })
            .collect();
        ClusterPseudoLabels {
            cluster_label,
            purity,
            size,
            votes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedSubset {
    pub indices: Vec<usize>,
    pub labels: Vec<usize>,
    /// Per-class purity thresholds; a single confidence threshold for
    /// [`confidence_refine`].
    pub thresholds: Vec<f64>,
    pub retained_clusters: Vec<usize>,
}

impl RefinedSubset {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Argmax label (ties to the lowest class) and its probability per target row.
pub fn source_pseudo_labels(
    source: &Classifier,
    target: ArrayView2<'_, f64>,
) -> Result<SamplePseudoLabels> {
    let probs = source.predict_proba(target)?;
    let (labels, confidences) = probs
        .rows()
        .into_iter()
        .map(|r| crate::network::argmax_row(r.iter().copied()))
        .unzip();
    Ok(SamplePseudoLabels {
        labels,
        confidences,
    })
}

/// Most frequent label per cluster, ties to the lowest class, [`NO_LABEL`] when empty.
pub fn cluster_majority(
    assignments: &[usize],
    labels: &[usize],
    k: usize,
    num_classes: usize,
) -> Vec<usize> {
    let mut hist = vec![0usize; k * num_classes];
    for (&a, &y) in assignments.iter().zip(labels) {
        hist[a * num_classes + y] += 1;
    }
    hist.chunks(num_classes)
        .map(|h| {
            let mut best = (NO_LABEL, 0);
            for (class, &count) in h.iter().enumerate() {
                if count > best.1 {
                    best = (class, count);
                }
            }
            best.0
        })
        .collect()
}

fn vote_counts(
    assignments: &[usize],
    labels: &[usize],
    cluster_labels: &[usize],
    k: usize,
) -> (Vec<usize>, Vec<usize>) {
    let mut votes = vec![0; k];
    let mut size = vec![0; k];
    for (&a, &y) in assignments.iter().zip(labels) {
        size[a] += 1;
        if y == cluster_labels[a] {
            votes[a] += 1;
        }
    }
    (votes, size)
}

/// Share of each cluster's members whose label equals the cluster label; 0 for empty clusters.
pub fn cluster_purity(
    assignments: &[usize],
    labels: &[usize],
    cluster_labels: &[usize],
    k: usize,
) -> Vec<f64> {
    let (votes, size) = vote_counts(assignments, labels, cluster_labels, k);
    votes
        .iter()
        .zip(&size)
        .map(|(&v, &m)| if m == 0 { 0.0 } else { v as f64 / m as f64 })
        .collect()
}

/// 1-based nearest rank `ceil(q * count)`, guarded against `q * count`
/// landing a rounding error above an integer.
pub fn nearest_rank(q: f64, count: usize) -> usize {
    let r = (q * count as f64 - 1e-9).ceil();
    (r.max(1.0) as usize).min(count)
}

/// Nearest-rank `q`-quantile of purities per class; `+inf` for classes with no cluster.
pub fn per_class_threshold(
    cluster_labels: &[usize],
    purities: &[f64],
    num_classes: usize,
    q: f64,
) -> Result<Vec<f64>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::OutOfRange {
            what: "purity percentile must lie in (0, 1)",
            value: q,
        });
    }
    let mut per_class: Vec<Vec<f64>> = vec![Vec::new(); num_classes];
    for (&label, &s) in cluster_labels.iter().zip(purities) {
        if label != NO_LABEL {
            per_class[label].push(s);
        }
    }
    Ok(per_class
        .into_iter()
        .enumerate()
        .map(|(class, mut s)| {
            if s.is_empty() {
                log::warn!("class {class} owns no cluster; nothing retained for it");
                return f64::INFINITY;
            }
            s.sort_by(f64::total_cmp);
            s[nearest_rank(q, s.len()) - 1]
        })
        .collect())
}

/// Keeps clusters with purity at least their class threshold; members inherit
/// the cluster label.
pub fn refine(
    assignments: &[usize],
    cluster_labels: &[usize],
    purities: &[f64],
    thresholds: &[f64],
) -> Result<RefinedSubset> {
    let keep: Vec<bool> = cluster_labels
        .iter()
        .zip(purities)
        .map(|(&label, &s)| label != NO_LABEL && s >= thresholds[label])
        .collect();
    let retained_clusters: Vec<usize> = (0..keep.len()).filter(|&j| keep[j]).collect();
    let (indices, labels) = assignments
        .iter()
        .enumerate()
        .filter(|(_, &a)| keep[a])
        .map(|(i, &a)| (i, cluster_labels[a]))
        .unzip::<_, _, Vec<_>, Vec<_>>();
    if indices.is_empty() {
        return Err(Error::EmptyRefinement);
    }
    Ok(RefinedSubset {
        indices,
        labels,
        thresholds: thresholds.to_vec(),
        retained_clusters,
    })
}

/// Baseline: samples whose confidence is at least `threshold`, with their own labels.
pub fn confidence_refine(pseudo: &SamplePseudoLabels, threshold: f64) -> Result<RefinedSubset> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::OutOfRange {
            what: "confidence threshold must lie in [0, 1]",
            value: threshold,
        });
    }
    let (indices, labels) = pseudo
        .confidences
        .iter()
        .zip(&pseudo.labels)
        .enumerate()
        .filter(|(_, (&c, _))| c >= threshold)
        .map(|(i, (_, &y))| (i, y))
        .unzip::<_, _, Vec<_>, Vec<_>>();
    if indices.is_empty() {
        return Err(Error::EmptyRefinement);
    }
    Ok(RefinedSubset {
        indices,
        labels,
        thresholds: vec![threshold],
        retained_clusters: Vec::new(),
    })
}

/// Baseline at a fixed budget: the `count` most confident samples (ties to the
/// lower index), returned in index order.
pub fn confidence_top(pseudo: &SamplePseudoLabels, count: usize) -> Result<RefinedSubset> {
    if count == 0 {
        return Err(Error::EmptyRefinement);
    }
    let mut order: Vec<usize> = (0..pseudo.len()).collect();
    order.sort_by(|&a, &b| {
        pseudo.confidences[b]
            .total_cmp(&pseudo.confidences[a])
            .then(a.cmp(&b))
    });
    let mut indices: Vec<usize> = order.into_iter().take(count).collect();
    indices.sort_unstable();
    let cutoff = indices
        .iter()
        .map(|&i| pseudo.confidences[i])
        .fold(f64::INFINITY, f64::min);
    Ok(RefinedSubset {
        labels: indices.iter().map(|&i| pseudo.labels[i]).collect(),
        indices,
        thresholds: vec![cutoff],
        retained_clusters: Vec::new(),
    })
}

/// Fraction of retained labels matching `truth`, and retained share of all samples.
pub fn subset_accuracy(subset: &RefinedSubset, truth: &[usize]) -> Result<(f64, f64)> {
    if subset.is_empty() || truth.is_empty() {
        return Err(Error::EmptyRefinement);
    }
    let correct = subset
        .indices
        .iter()
        .zip(&subset.labels)
        .filter(|(&i, &y)| truth[i] == y)
        .count();
    Ok((
        correct as f64 / subset.len() as f64,
        subset.len() as f64 / truth.len() as f64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Layer, Mlp, SoftmaxHead};
    use ndarray::array;

    #[test]
    fn majority_and_purity() {
        let a = [0, 0, 0, 1, 1, 2, 2, 2, 2];
        let y = [1, 1, 2, 1, 2, 2, 2, 2, 5];
        let cl = cluster_majority(&a, &y, 4, 6);
        assert_eq!(cl, vec![1, 1, 2, NO_LABEL]);
        let s = cluster_purity(&a, &y, &cl, 4);
        assert_eq!(s, vec![2.0 / 3.0, 0.5, 0.75, 0.0]);
        let unanimous = cluster_purity(&[0, 0], &[3, 3], &[3], 1);
        assert_eq!(unanimous, vec![1.0]);
    }

    #[test]
    fn nearest_rank_examples() {
        let labels = vec![0; 5];
        let s = [1.0, 0.2, 0.8, 0.4, 0.6];
        assert_eq!(per_class_threshold(&labels, &s, 1, 0.8).unwrap(), vec![0.8]);
        assert_eq!(per_class_threshold(&[0], &[0.37], 1, 0.9).unwrap(), vec![0.37]);
        assert_eq!(per_class_threshold(&[0], &[0.37], 1, 0.01).unwrap(), vec![0.37]);
        // 0.7 * 10 evaluates to 7.000000000000001 in binary floating point.
        assert_eq!(nearest_rank(0.7, 10), 7);
        assert_eq!(nearest_rank(0.9, 1), 1);
        assert_eq!(nearest_rank(0.01, 3), 1);
    }

    #[test]
    fn empty_class_gets_infinite_threshold() {
        let t = per_class_threshold(&[0, NO_LABEL], &[0.5, 0.0], 3, 0.5).unwrap();
        assert_eq!(t[0], 0.5);
        assert!(t[1].is_infinite() && t[2].is_infinite());
        assert!(per_class_threshold(&[0], &[0.5], 1, 1.0).is_err());
    }

    #[test]
    fn refine_keeps_only_pure_cluster() {
        let cl = [0, 0];
        let s = [0.5, 1.0];
        let t = per_class_threshold(&cl, &s, 1, 0.9).unwrap();
        assert_eq!(t, vec![1.0]);
        let a = [0, 1, 1, 0, 1];
        let r = refine(&a, &cl, &s, &t).unwrap();
        assert_eq!(r.retained_clusters, vec![1]);
        assert_eq!(r.indices, vec![1, 2, 4]);
        assert_eq!(r.labels, vec![0, 0, 0]);
    }

    #[test]
    fn refine_uses_cluster_label() {
        let a = [0, 0, 0];
        let y = [4, 4, 1];
        let cp = ClusterPseudoLabels::compute(&a, &y, 1, 5);
        let t = per_class_threshold(&cp.cluster_label, &cp.purity, 5, 0.5).unwrap();
        let r = refine(&a, &cp.cluster_label, &cp.purity, &t).unwrap();
        assert_eq!(r.indices, vec![0, 1, 2]);
        assert_eq!(r.labels, vec![4, 4, 4]);
    }

    #[test]
    fn refine_all_unanimous_keeps_everything() {
        let a = [0, 1, 2, 1, 0];
        let y = [3, 1, 0, 1, 3];
        let cp = ClusterPseudoLabels::compute(&a, &y, 3, 4);
        let t = per_class_threshold(&cp.cluster_label, &cp.purity, 4, 0.9).unwrap();
        let r = refine(&a, &cp.cluster_label, &cp.purity, &t).unwrap();
        assert_eq!(r.indices, vec![0, 1, 2, 3, 4]);
        assert_eq!(r.labels, y.to_vec());
    }

    #[test]
    fn refine_empty_is_fatal() {
        let r = refine(&[0], &[0], &[0.5], &[f64::INFINITY]);
        assert!(matches!(r, Err(Error::EmptyRefinement)));
    }

    fn pseudo(conf: &[f64]) -> SamplePseudoLabels {
        SamplePseudoLabels {
            labels: (0..conf.len()).map(|i| i % 2).collect(),
            confidences: conf.to_vec(),
        }
    }

    #[test]
    fn confidence_filter() {
        let p = pseudo(&[0.3, 0.7, 0.9]);
        assert_eq!(confidence_refine(&p, 0.0).unwrap().indices, vec![0, 1, 2]);
        assert_eq!(confidence_refine(&p, 0.7).unwrap().indices, vec![1, 2]);
        assert!(matches!(
            confidence_refine(&p, 1.0),
            Err(Error::EmptyRefinement)
        ));
        let top = confidence_top(&p, 2).unwrap();
        assert_eq!(top.indices, vec![1, 2]);
        assert_eq!(top.labels, vec![1, 0]);
    }

    #[test]
    fn accuracy_and_coverage() {
        let subset = RefinedSubset {
            indices: vec![0, 2, 3],
            labels: vec![1, 0, 2],
            thresholds: vec![],
            retained_clusters: vec![],
        };
        let (acc, cov) = subset_accuracy(&subset, &[1, 9, 0, 0]).unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cov, 0.75);
        let all = RefinedSubset {
            indices: vec![0, 1],
            labels: vec![5, 6],
            ..subset
        };
        assert_eq!(subset_accuracy(&all, &[5, 6]).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn source_labels_from_fixed_logits() {
        // Identity extractor on 2-D inputs; head weight maps x to logits.
        let extractor = Mlp::from_layers(vec![Layer {
            weight: array![[1.0, 0.0], [0.0, 1.0]],
            bias: array![0.0, 0.0],
        }])
        .unwrap();
        let mut weight = ndarray::Array2::zeros((7, 2));
        weight[[0, 0]] = 1.0;
        let head = SoftmaxHead {
            layer: Layer {
                weight,
                bias: ndarray::Array1::zeros(7),
            },
        };
        let model = Classifier { extractor, head };
        let p = source_pseudo_labels(&model, array![[5.0, 0.0], [0.0, 3.0]].view()).unwrap();
        assert_eq!(p.labels, vec![0, 0]);
        let e5 = 5f64.exp();
        assert!((p.confidences[0] - e5 / (e5 + 6.0)).abs() < 1e-12);
        assert!((p.confidences[1] - 1.0 / 7.0).abs() < 1e-12);
    }
}
