//! In-memory pipeline stages. The file-based commands wrap these.

use ndarray::Array2;

use super::config::PipelineConfig;
use super::metrics::MetricsReport;
use crate::clustering::{kmeans_fit, ClusterModel};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::network::{train_classifier, Classifier, Mlp};
use crate::pseudo_label::{
    per_class_threshold, refine, source_pseudo_labels, subset_accuracy, ClusterPseudoLabels,
    RefinedSubset, SamplePseudoLabels, NO_LABEL,
};
use crate::rng;
use crate::ssl::{normalize_rows, ssl_train, PrototypeBank};

#[derive(Debug, Clone)]
pub struct SourceOutcome {
    pub model: Classifier,
    pub losses: Vec<f64>,
    pub train_top1: f64,
    /// `None` when `val_fraction` leaves no validation rows.
    pub val_top1: Option<f64>,
}

/// Splits off a validation share, then trains the source classifier.
pub fn train_source(cfg: &PipelineConfig, source: &FeatureSet) -> Result<SourceOutcome> {
    let labels = source.require_labels()?;
    source.check_labels(cfg.num_classes())?;
    if source.cols() != cfg.synth.input_dim {
        return Err(Error::Shape {
            context: "source columns",
            expected: cfg.synth.input_dim,
            found: source.cols(),
        });
    }
    let m = source.rows();
    let n_val = (cfg.val_fraction * m as f64).floor() as usize;
    let order = rng::permutation(&mut rng::stream(cfg.split_seed(), 0), m);
    let mut val: Vec<usize> = order[..n_val].to_vec();
    let mut train: Vec<usize> = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let train_set = source.select(&train);
    let mut model = Classifier::new(&cfg.extractor_dims(), cfg.num_classes(), cfg.source_init_seed())?;
    let losses = train_classifier(&mut model, &train_set, &cfg.source_train, false)?;
    let acc = |idx: &[usize]| -> Result<f64> {
        let sub = source.select(idx);
        let pred = model.predict(sub.to_f64().view())?;
        let hits = pred.iter().zip(idx).filter(|(&p, &i)| p == labels[i]).count();
        Ok(hits as f64 / idx.len() as f64)
    };
    let train_top1 = acc(&train)?;
    let val_top1 = if val.is_empty() { None } else { Some(acc(&val)?) };
    Ok(SourceOutcome {
        model,
        losses,
        train_top1,
        val_top1,
    })
}

/// Stage 1 up to (but not including) the purity threshold.
#[derive(Debug, Clone)]
pub struct ClusterStage {
    pub pseudo: SamplePseudoLabels,
    pub clusters: ClusterModel,
    pub cluster_labels: ClusterPseudoLabels,
    pub num_classes: usize,
}

impl ClusterStage {
    /// Pseudo-labels target rows with the source model and over-clusters the
    /// source-model features of the target set.
    pub fn run(cfg: &PipelineConfig, source: &Classifier, target: &FeatureSet) -> Result<Self> {
        let x = target.to_f64();
        let pseudo = source_pseudo_labels(source, x.view())?;
        let mut feats = source.features(x.view())?;
        if cfg.kmeans_normalize {
            feats = normalize_rows(&feats)?.0;
        }
        let clusters = kmeans_fit(feats.view(), cfg.clusters, &cfg.kmeans)?;
        let cluster_labels = ClusterPseudoLabels::compute(
            &clusters.assignments,
            &pseudo.labels,
            clusters.k(),
            cfg.num_classes(),
        );
        Ok(ClusterStage {
            pseudo,
            clusters,
            cluster_labels,
            num_classes: cfg.num_classes(),
        })
    }

    pub fn thresholds(&self, q: f64) -> Result<Vec<f64>> {
        per_class_threshold(
            &self.cluster_labels.cluster_label,
            &self.cluster_labels.purity,
            self.num_classes,
            q,
        )
    }

    pub fn refine(&self, q: f64) -> Result<RefinedSubset> {
        let tau = self.thresholds(q)?;
        refine(
            &self.clusters.assignments,
            &self.cluster_labels.cluster_label,
            &self.cluster_labels.purity,
            &tau,
        )
    }

    /// Per-class thresholds, cluster counts and coverage as `name=value` lines.
    pub fn report(&self, q: f64, subset: &RefinedSubset, truth: Option<&[usize]>) -> Result<String> {
        let cl = &self.cluster_labels.cluster_label;
        let mut owned = vec![0usize; self.num_classes];
        let mut kept = vec![0usize; self.num_classes];
        for &l in cl.iter().filter(|&&l| l != NO_LABEL) {
            owned[l] += 1;
        }
        for &j in &subset.retained_clusters {
            kept[cl[j]] += 1;
        }
        let m = self.pseudo.len();
        let mut out = String::new();
        let mut line = |s: String| out.push_str(&(s + "\n"));
        line(format!("q={q:.6}"));
        line(format!("clusters={}", self.clusters.k()));
        line(format!("inertia={:.6}", self.clusters.inertia));
        for n in 0..self.num_classes {
            let tau = subset.thresholds[n];
            let tau = if tau.is_finite() { format!("{tau:.6}") } else { "inf".into() };
            line(format!("class_{n}_tau={tau}"));
            line(format!("class_{n}_clusters={}", owned[n]));
            line(format!("class_{n}_retained={}", kept[n]));
        }
        line(format!("retained_clusters={}", subset.retained_clusters.len()));
        line(format!("retained_samples={}", subset.len()));
        line(format!("coverage={:.6}", subset.len() as f64 / m as f64));
        if let Some(t) = truth {
            let (acc, _) = subset_accuracy(subset, t)?;
            line(format!("subset_accuracy={acc:.6}"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct SslOutcome {
    pub extractor: Mlp,
    pub bank: PrototypeBank,
    pub losses: Vec<f64>,
}

/// Stage 2: swapped-prediction pretraining of a fresh target extractor.
pub fn ssl_pretrain(cfg: &PipelineConfig, target: &FeatureSet) -> Result<SslOutcome> {
    let mut extractor = Mlp::new(&cfg.extractor_dims(), cfg.ssl_init_seed())?;
    let mut bank = PrototypeBank::new(cfg.prototypes, cfg.feature_dim, cfg.bank_seed())?;
    let target = target.without_labels();
    let losses = ssl_train(&mut extractor, &mut bank, &target, &cfg.ssl)?;
    Ok(SslOutcome {
        extractor,
        bank,
        losses,
    })
}

/// Stage 3: a fresh head on `extractor`, trained on the refined subset.
pub fn train_target(
    cfg: &PipelineConfig,
    extractor: Mlp,
    target: &FeatureSet,
    subset: &RefinedSubset,
) -> Result<(Classifier, Vec<f64>)> {
    if subset.is_empty() {
        return Err(Error::EmptyRefinement);
    }
    if let Some(&bad) = subset.indices.iter().find(|&&i| i >= target.rows()) {
        return Err(Error::OutOfRange {
            what: "subset index beyond the target set",
            value: bad as f64,
        });
    }
    let train = target.select(&subset.indices).with_labels(subset.labels.clone())?;
    let mut model = Classifier::with_extractor(extractor, cfg.num_classes(), cfg.target_head_seed());
    let losses = train_classifier(&mut model, &train, &cfg.target_train, cfg.freeze_extractor)?;
    Ok((model, losses))
}

pub fn evaluate(model: &Classifier, data: &FeatureSet) -> Result<MetricsReport> {
    let truth = data.require_labels()?;
    let pred = model.predict(data.to_f64().view())?;
    MetricsReport::from_predictions(&pred, truth, model.num_classes())
}

/// Subset file: one f32 column of target row indices plus the labels block.
pub fn subset_to_features(subset: &RefinedSubset) -> Result<FeatureSet> {
    if let Some(&i) = subset.indices.iter().find(|&&i| i >= 1 << 24) {
        return Err(Error::OutOfRange {
            what: "row index not exactly representable as f32",
            value: i as f64,
        });
    }
    let col = Array2::from_shape_fn((subset.len(), 1), |(r, _)| subset.indices[r] as f32);
    FeatureSet::new(col, Some(subset.labels.clone()))
}

pub fn subset_from_features(set: &FeatureSet) -> Result<RefinedSubset> {
    if set.cols() != 1 {
        return Err(Error::Shape {
            context: "subset file columns",
            expected: 1,
            found: set.cols(),
        });
    }
    let labels = set.require_labels()?.to_vec();
    let indices = set
        .data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::OutOfRange {
                    what: "subset index is not a non-negative integer",
                    value: f64::from(v),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RefinedSubset {
        indices,
        labels,
        thresholds: Vec::new(),
        retained_clusters: Vec::new(),
    })
}
