//! Confidence vs purity refinement over the default thresholds, each followed
//! by target training.

use clup::features::synth_domains;
use clup::pipeline::{run_sweep, ssl_pretrain, sweep_csv, train_source, ClusterStage, PipelineConfig};

fn main() -> clup::Result<()> {
    let cfg = PipelineConfig::benchmark();
    let d = synth_domains(&cfg.synth)?;
    let source = train_source(&cfg, &d.source)?;
    let stage = ClusterStage::run(&cfg, &source.model, &d.target)?;
    let ssl = ssl_pretrain(&cfg, &d.target)?;
    let rows = run_sweep(&cfg, &stage, &ssl.extractor, &d.target, &cfg.sweep_values)?;
    print!("{}", sweep_csv(&rows));
    Ok(())
}
