//! Stage 1: over-cluster the target features of the source model and keep
//! the purest clusters of every class.

use clup::features::synth_domains;
use clup::pipeline::{train_source, ClusterStage, PipelineConfig};
use clup::pseudo_label::{confidence_top, subset_accuracy};

fn main() -> clup::Result<()> {
    let cfg = PipelineConfig::benchmark();
    let d = synth_domains(&cfg.synth)?;
    let truth = d.target.require_labels()?;
    let source = train_source(&cfg, &d.source)?;
    let stage = ClusterStage::run(&cfg, &source.model, &d.target)?;

    let subset = stage.refine(cfg.purity_q)?;
    print!("{}", stage.report(cfg.purity_q, &subset, Some(truth))?);

    let (all, _) = subset_accuracy(&confidence_top(&stage.pseudo, stage.pseudo.len())?, truth)?;
    let (conf, _) = subset_accuracy(&confidence_top(&stage.pseudo, subset.len())?, truth)?;
    println!("every sample: {all:.4}; same count by confidence: {conf:.4}");
    Ok(())
}
