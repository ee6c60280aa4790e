use std::thread;

use super::config::PipelineConfig;
use super::stages::{evaluate, train_target, ClusterStage};
use crate::error::Result;
use crate::features::FeatureSet;
use crate::network::Mlp;
use crate::pseudo_label::{confidence_refine, subset_accuracy, RefinedSubset};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Confidence,
    Purity,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Confidence => "confidence",
            Method::Purity => "purity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    pub value: f64,
    pub coverage: f64,
    pub subset_accuracy: Option<f64>,
    pub top1: Option<f64>,
}

/// Trains one target model per method and value. Runs are independent, so
/// each value gets its own thread; row order is confidence then purity per
/// method, values in the given order.
pub fn run_sweep(
    cfg: &PipelineConfig,
    stage: &ClusterStage,
    extractor: &Mlp,
    target: &FeatureSet,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(Method, f64)> = [Method::Confidence, Method::Purity]
        .into_iter()
        .flat_map(|m| values.iter().map(move |&v| (m, v)))
        .collect();
    let results: Vec<Result<SweepRow>> = thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(method, value)| s.spawn(move || sweep_one(cfg, stage, extractor, target, method, value)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}

fn sweep_one(
    cfg: &PipelineConfig,
    stage: &ClusterStage,
    extractor: &Mlp,
    target: &FeatureSet,
    method: Method,
    value: f64,
) -> Result<SweepRow> {
    let subset: RefinedSubset = match method {
        Method::Confidence => confidence_refine(&stage.pseudo, value)?,
        Method::Purity => stage.refine(value)?,
    };
    let coverage = subset.len() as f64 / target.rows() as f64;
    let subset_accuracy = match target.labels() {
        Some(t) => Some(subset_accuracy(&subset, t)?.0),
        None => None,
    };
    let (model, _) = train_target(cfg, extractor.clone(), target, &subset)?;
    let top1 = match target.labels() {
        Some(_) => Some(evaluate(&model, target)?.top1),
        None => None,
    };
    Ok(SweepRow {
        method,
        value,
        coverage,
        subset_accuracy,
        top1,
    })
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
    let mut out = String::from("method,value,coverage,subset_accuracy,top1\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{},{}\n",
            r.method.name(),
            r.value,
            r.coverage,
            opt(r.subset_accuracy),
            opt(r.top1)
        ));
    }
    out
}
