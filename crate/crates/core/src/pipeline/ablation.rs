//! Component comparison on a labelled synthetic benchmark: source zero-shot,
//! confidence vs purity refinement, and the adapted target models.

use super::config::PipelineConfig;
use super::stages::{evaluate, ssl_pretrain, train_source, train_target, ClusterStage};
use crate::error::Result;
use crate::features::synth_domains;
use crate::pseudo_label::{confidence_top, subset_accuracy};

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPoint {
    pub value: f64,
    pub coverage: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRun {
    pub seed: u64,
    pub source_val_top1: Option<f64>,
    /// Source classifier applied to the target set as is.
    pub zero_shot: f64,
    /// Self-supervised extractor trained on the purity subset at `purity_q`.
    pub clup: f64,
    /// Self-supervised extractor trained on the most confident samples,
    /// as many as the purity subset at `purity_q` retains.
    pub ssl_confidence: f64,
    /// Purity refinement at each of `sweep_values`.
    pub purity: Vec<SubsetPoint>,
    /// Confidence refinement matched in size to each purity point.
    pub confidence: Vec<SubsetPoint>,
}

pub fn ablation(cfg: &PipelineConfig) -> Result<AblationRun> {
    let domains = synth_domains(&cfg.synth)?;
    let target = &domains.target;
    let truth = target.require_labels()?;
    let source = train_source(cfg, &domains.source)?;
    let zero_shot = evaluate(&source.model, target)?.top1;
    let stage = ClusterStage::run(cfg, &source.model, target)?;

    let mut purity = Vec::new();
    let mut confidence = Vec::new();
    for &q in &cfg.sweep_values {
        let p = stage.refine(q)?;
        let c = confidence_top(&stage.pseudo, p.len())?;
        for (subset, out) in [(&p, &mut purity), (&c, &mut confidence)] {
            let (accuracy, coverage) = subset_accuracy(subset, truth)?;
            out.push(SubsetPoint {
                value: q,
                coverage,
                accuracy,
            });
        }
    }

    let ssl = ssl_pretrain(cfg, target)?;
    let p = stage.refine(cfg.purity_q)?;
    let c = confidence_top(&stage.pseudo, p.len())?;
    let (clup_model, _) = train_target(cfg, ssl.extractor.clone(), target, &p)?;
    let (conf_model, _) = train_target(cfg, ssl.extractor, target, &c)?;
    Ok(AblationRun {
        seed: cfg.seed,
        source_val_top1: source.val_top1,
        zero_shot,
        clup: evaluate(&clup_model, target)?.top1,
        ssl_confidence: evaluate(&conf_model, target)?.top1,
        purity,
        confidence,
    })
}
