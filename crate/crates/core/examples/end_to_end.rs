//! Every stage through the file-based commands, as the `clup` binary runs
//! them, into a scratch directory.

use clup::pipeline::{
    cmd_make_synth, cmd_pseudo_label, cmd_ssl_pretrain, cmd_train_source, cmd_train_target,
    Artifacts, PipelineConfig,
};

fn main() -> clup::Result<()> {
    let cfg = PipelineConfig::benchmark();
    let out = Artifacts::new(std::env::temp_dir().join("clup-end-to-end"))?;
    cmd_make_synth(&cfg, &out)?;
    let src = cmd_train_source(&cfg, &out)?;
    println!("source val top-1 {:.4}", src.val_top1.unwrap_or(f64::NAN));
    let (subset, _) = cmd_pseudo_label(&cfg, &out)?;
    println!("refined subset: {} samples", subset.len());
    let losses = cmd_ssl_pretrain(&cfg, &out)?;
    println!("ssl loss {:.4} -> {:.4}", losses[0], losses[losses.len() - 1]);
    if let Some(m) = cmd_train_target(&cfg, &out)? {
        print!("{}", m.to_text());
    }
    println!("artifacts in {}", out.dir().display());
    Ok(())
}
