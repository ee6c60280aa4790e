use ndarray::Array2;
use proptest::prelude::*;

use clup::clustering::{sinkhorn_codes, SinkhornConfig};
use clup::features::{decode_matrix, encode_matrix, parse_csv, write_csv, FeatureSet};
use clup::pseudo_label::{
    cluster_majority, cluster_purity, confidence_refine, per_class_threshold, refine, ClusterPseudoLabels,
    SamplePseudoLabels, NO_LABEL,
};

fn instance() -> impl Strategy<Value = (usize, usize, Vec<usize>, Vec<usize>)> {
    (1usize..20, 1usize..6, 1usize..300).prop_flat_map(|(k, n, m)| {
        (
            Just(k),
            Just(n),
            prop::collection::vec(0..k, m),
            prop::collection::vec(0..n, m),
        )
    })
}

proptest! {
    #[test]
    fn purity_bounds((k, n, a, y) in instance()) {
        let cl = cluster_majority(&a, &y, k, n);
        let s = cluster_purity(&a, &y, &cl, k);
        for j in 0..k {
            if cl[j] == NO_LABEL {
                prop_assert!(!a.contains(&j));
            } else {
                prop_assert!(s[j] >= 1.0 / n as f64 - 1e-12 && s[j] <= 1.0);
            }
        }
    }

    #[test]
    fn coverage_non_increasing_in_q((k, n, a, y) in instance()) {
        let c = ClusterPseudoLabels::compute(&a, &y, k, n);
        let mut last = usize::MAX;
        for q in [0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 0.99] {
            let tau = per_class_threshold(&c.cluster_label, &c.purity, n, q).unwrap();
            let kept = refine(&a, &c.cluster_label, &c.purity, &tau).unwrap();
            prop_assert!(kept.len() <= last);
            last = kept.len();
        }
    }

    #[test]
    fn confidence_subset_shrinks(conf in prop::collection::vec(0.0f64..=1.0, 1..200)) {
        let pseudo = SamplePseudoLabels { labels: vec![0; conf.len()], confidences: conf };
        let mut last = usize::MAX;
        for t in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
            let len = confidence_refine(&pseudo, t).map(|s| s.len()).unwrap_or(0);
            prop_assert!(len <= last);
            last = len;
        }
    }

    #[test]
    fn relabelling_permutes_outputs((k, n, a, y) in instance(), shift in 0usize..6) {
        let perm: Vec<usize> = (0..n).map(|c| (c + shift) % n).collect();
        let y2: Vec<usize> = y.iter().map(|&c| perm[c]).collect();
        let c1 = ClusterPseudoLabels::compute(&a, &y, k, n);
        let c2 = ClusterPseudoLabels::compute(&a, &y2, k, n);
        prop_assert_eq!(&c1.purity, &c2.purity);
        for j in 0..k {
            // Ties may break to a different class after relabelling.
            if c1.cluster_label[j] != NO_LABEL && c1.votes[j] * 2 > c1.size[j] {
                prop_assert_eq!(perm[c1.cluster_label[j]], c2.cluster_label[j]);
            }
        }
    }

    #[test]
    fn codes_are_row_stochastic(
        scores in prop::collection::vec(-1.0f64..1.0, 24),
        eps in 0.05f64..1.0,
    ) {
        let s = Array2::from_shape_vec((6, 4), scores).unwrap();
        let q = sinkhorn_codes(s.view(), &SinkhornConfig { epsilon: eps, iterations: 3 }).unwrap();
        for row in q.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn matrix_round_trip(
        rows in 1usize..8,
        cols in 1usize..5,
        seed in any::<u64>(),
        labelled in any::<bool>(),
    ) {
        let mut state = seed;
        let data = Array2::from_shape_fn((rows, cols), |_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            f32::from_bits(((state >> 41) as u32) | 0x3f80_0000) - 1.5
        });
        let labels = labelled.then(|| (0..rows).map(|i| i % 4).collect());
        let set = FeatureSet::new(data, labels).unwrap();
        let bytes = encode_matrix(&set);
        let back = decode_matrix(&bytes).unwrap();
        prop_assert_eq!(&back, &set);
        prop_assert_eq!(encode_matrix(&back), bytes);
        prop_assert_eq!(parse_csv(&write_csv(&set), labelled).unwrap(), set);
    }
}
