//! 2D PCA of the target set, raw and through the source extractor. Writes
//! two CSV files for plotting.

use clup::features::synth_domains;
use clup::pipeline::{pca2, projection_csv, train_source, PipelineConfig};

fn main() -> clup::Result<()> {
    let cfg = PipelineConfig::benchmark();
    let d = synth_domains(&cfg.synth)?;
    let source = train_source(&cfg, &d.source)?;
    let x = d.target.to_f64();
    let dir = std::env::temp_dir();
    for (name, data) in [("raw", x.clone()), ("source_features", source.model.features(x.view())?)] {
        let p = pca2(data.view())?;
        let path = dir.join(format!("clup-projection-{name}.csv"));
        std::fs::write(&path, projection_csv(&p.coords, d.target.labels())).map_err(|e| clup::Error::io(&path, e))?;
        println!("{name}: variances {:.3} {:.3} -> {}", p.variances[0], p.variances[1], path.display());
    }
    Ok(())
}
