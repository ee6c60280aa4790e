//! Stage 2: swapped-prototype pretraining on the unlabelled target set.

use clup::features::synth_domains;
use clup::pipeline::{ssl_pretrain, PipelineConfig};

fn main() -> clup::Result<()> {
    let mut cfg = PipelineConfig::benchmark();
    cfg.ssl.epochs = 30;
    let d = synth_domains(&cfg.synth)?;
    let out = ssl_pretrain(&cfg, &d.target)?;
    for (e, loss) in out.losses.iter().enumerate().step_by(5) {
        println!("epoch {:>3}  loss {loss:.4}", e + 1);
    }
    println!("{} prototypes of dim {}", out.bank.len(), out.bank.dim());
    Ok(())
}
