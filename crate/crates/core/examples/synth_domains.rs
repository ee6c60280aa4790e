//! Generates the default source/target pair and round-trips it through the
//! binary and CSV formats.

use clup::features::{decode_matrix, encode_matrix, parse_csv, synth_domains, write_csv};
use clup::pipeline::PipelineConfig;

fn main() -> clup::Result<()> {
    let cfg = PipelineConfig::benchmark();
    let d = synth_domains(&cfg.synth)?;
    println!("source {} x {}, target {} x {}", d.source.rows(), d.source.cols(), d.target.rows(), d.target.cols());
    for n in 0..cfg.num_classes() {
        let shift = (&d.target_means.row(n) - &d.source_means.row(n)).mapv(|v| v * v).sum().sqrt();
        println!("class {n}: mean moved by {shift:.2}");
    }

    let bytes = encode_matrix(&d.target);
    assert_eq!(decode_matrix(&bytes)?, d.target);
    let csv = write_csv(&d.target);
    assert_eq!(parse_csv(&csv, true)?, d.target);
    println!("binary {} bytes, csv {} bytes, both round-trip", bytes.len(), csv.len());
    Ok(())
}
