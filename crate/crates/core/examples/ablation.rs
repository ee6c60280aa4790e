//! Compares source zero-shot, SSL + confidence and full CluP over a few seeds.
//!
//! ```text
//! cargo run --release --example ablation -- [CONFIG] [SEEDS] [FIRST_SEED]
//! ```

use clup::pipeline::{ablation, PipelineConfig};

fn main() -> clup::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(path) if path != "-" => PipelineConfig::from_file(path)?,
        _ => PipelineConfig::benchmark(),
    };
    let seeds: u64 = args.next().map_or(5, |s| s.parse().expect("seed count"));
    let first: u64 = args.next().map_or(1, |s| s.parse().expect("first seed"));
    let mut sums = [0.0; 3];
    for seed in first..first + seeds {
        let run = ablation(&cfg.clone().with_seed(seed))?;
        println!(
            "seed {seed}: val {:.3}  zero-shot {:.3}  ssl+conf {:.3}  clup {:.3}",
            run.source_val_top1.unwrap_or(f64::NAN),
            run.zero_shot,
            run.ssl_confidence,
            run.clup
        );
        for (p, c) in run.purity.iter().zip(&run.confidence) {
            println!(
                "  q {:.1}  coverage {:.3}  purity acc {:.4}  confidence acc {:.4}",
                p.value, p.coverage, p.accuracy, c.accuracy
            );
        }
        sums[0] += run.zero_shot;
        sums[1] += run.ssl_confidence;
        sums[2] += run.clup;
    }
    let n = seeds as f64;
    println!(
        "mean: zero-shot {:.4}  ssl+conf {:.4}  clup {:.4}",
        sums[0] / n,
        sums[1] / n,
        sums[2] / n
    );
    Ok(())
}
