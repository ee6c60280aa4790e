//! Trains the source classifier and checks how it transfers to the target.

use clup::features::synth_domains;
use clup::network::{decode_model, encode_model, ModelFile};
use clup::pipeline::{evaluate, train_source, PipelineConfig};

fn main() -> clup::Result<()> {
    let cfg = PipelineConfig::benchmark();
    let d = synth_domains(&cfg.synth)?;
    let src = train_source(&cfg, &d.source)?;
    println!("first/last epoch loss {:.4} / {:.4}", src.losses[0], src.losses[src.losses.len() - 1]);
    println!("train {:.4}  val {:.4}", src.train_top1, src.val_top1.unwrap_or(f64::NAN));
    print!("on the target domain:\n{}", evaluate(&src.model, &d.target)?.to_text());

    let file = decode_model(&encode_model(&ModelFile::from_classifier(&src.model)))?;
    assert_eq!(file.into_classifier()?, src.model);
    Ok(())
}
