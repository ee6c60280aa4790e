//! File-based subcommands. Every artifact lives under one output directory
//! with a fixed name, so stages can be rerun independently.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::PipelineConfig;
use super::metrics::MetricsReport;
use super::project::{pca2, projection_csv};
use super::stages::{
    evaluate, ssl_pretrain, subset_from_features, subset_to_features, train_source, train_target,
    ClusterStage, SourceOutcome,
};
use super::sweep::{run_sweep, sweep_csv, SweepRow};
use crate::error::{Error, Result};
use crate::features::{load_matrix, save_matrix, synth_domains, FeatureSet};
use crate::network::{
    load_classifier, load_extractor_bank, load_model, save_classifier, save_extractor_bank,
    save_model, ModelFile, FLAG_BANK, FLAG_HEAD,
};
use crate::pseudo_label::RefinedSubset;

#[derive(Debug, Clone)]
pub struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Artifacts { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn source(&self) -> PathBuf {
        self.dir.join("source.clup")
    }
    pub fn target(&self) -> PathBuf {
        self.dir.join("target.clup")
    }
    pub fn source_model(&self) -> PathBuf {
        self.dir.join("source_model.cmdl")
    }
    pub fn subset(&self) -> PathBuf {
        self.dir.join("subset.clup")
    }
    pub fn purity_report(&self) -> PathBuf {
        self.dir.join("purity_report.txt")
    }
    pub fn clusters(&self) -> PathBuf {
        self.dir.join("clusters.cmdl")
    }
    pub fn extractor(&self) -> PathBuf {
        self.dir.join("extractor.cmdl")
    }
    pub fn ssl_loss(&self) -> PathBuf {
        self.dir.join("ssl_loss.csv")
    }
    pub fn target_model(&self) -> PathBuf {
        self.dir.join("target_model.cmdl")
    }
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.txt")
    }
    pub fn sweep(&self) -> PathBuf {
        self.dir.join("sweep.csv")
    }
    pub fn projection(&self) -> PathBuf {
        self.dir.join("projection.csv")
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn timed<T>(stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    log::info!("{stage} finished in {:.2?}", start.elapsed());
    out
}

pub fn cmd_make_synth(cfg: &PipelineConfig, out: &Artifacts) -> Result<()> {
    timed("make-synth", || {
        let d = synth_domains(&cfg.synth)?;
        save_matrix(&d.source, out.source())?;
        save_matrix(&d.target, out.target())
    })
}

pub fn cmd_train_source(cfg: &PipelineConfig, out: &Artifacts) -> Result<SourceOutcome> {
    timed("train-source", || {
        let source = load_matrix(out.source())?;
        let outcome = train_source(cfg, &source)?;
        save_classifier(&outcome.model, out.source_model())?;
        Ok(outcome)
    })
}

/// Returns the refined subset and the purity report text.
pub fn cmd_pseudo_label(cfg: &PipelineConfig, out: &Artifacts) -> Result<(RefinedSubset, String)> {
    timed("pseudo-label", || {
        let model = load_classifier(out.source_model())?;
        let target = load_matrix(out.target())?;
        let stage = ClusterStage::run(cfg, &model, &target)?;
        let subset = stage.refine(cfg.purity_q)?;
        let report = stage.report(cfg.purity_q, &subset, target.labels())?;
        save_matrix(&subset_to_features(&subset)?, out.subset())?;
        save_model(&ModelFile::from_centroids(&stage.clusters.centroids), out.clusters())?;
        write_text(&out.purity_report(), &report)?;
        Ok((subset, report))
    })
}

/// Returns the per-epoch loss log.
pub fn cmd_ssl_pretrain(cfg: &PipelineConfig, out: &Artifacts) -> Result<Vec<f64>> {
    timed("ssl-pretrain", || {
        let target = load_matrix(out.target())?;
        let ssl = ssl_pretrain(cfg, &target)?;
        save_extractor_bank(&ssl.extractor, ssl.bank.prototypes(), out.extractor())?;
        let mut csv = String::from("epoch,loss\n");
        for (e, l) in ssl.losses.iter().enumerate() {
            csv.push_str(&format!("{},{l:.6}\n", e + 1));
        }
        write_text(&out.ssl_loss(), &csv)?;
        Ok(ssl.losses)
    })
}

/// Metrics on the full target set when it carries ground truth.
pub fn cmd_train_target(cfg: &PipelineConfig, out: &Artifacts) -> Result<Option<MetricsReport>> {
    timed("train-target", || {
        let (extractor, _) = load_extractor_bank(out.extractor())?;
        let target = load_matrix(out.target())?;
        let subset = subset_from_features(&load_matrix(out.subset())?)?;
        let (model, _) = train_target(cfg, extractor, &target, &subset)?;
        save_classifier(&model, out.target_model())?;
        if target.labels().is_none() {
            return Ok(None);
        }
        let report = evaluate(&model, &target)?.with_coverage(subset.len() as f64 / target.rows() as f64);
        write_text(&out.metrics(), &report.to_text())?;
        Ok(Some(report))
    })
}

pub fn cmd_eval(model: &Path, data: &Path) -> Result<MetricsReport> {
    let model = load_classifier(model)?;
    let data = load_matrix(data)?;
    evaluate(&model, &data)
}

pub fn cmd_sweep(cfg: &PipelineConfig, out: &Artifacts, values: &[f64]) -> Result<Vec<SweepRow>> {
    timed("sweep", || {
        let model = load_classifier(out.source_model())?;
        let (extractor, _) = load_extractor_bank(out.extractor())?;
        let target = load_matrix(out.target())?;
        let stage = ClusterStage::run(cfg, &model, &target)?;
        let rows = run_sweep(cfg, &stage, &extractor, &target, values)?;
        write_text(&out.sweep(), &sweep_csv(&rows))?;
        Ok(rows)
    })
}

/// Projects raw rows, or the features of `model` (classifier or extractor
/// checkpoint), to two dimensions and writes `dest`.
pub fn cmd_project(data: &Path, model: Option<&Path>, dest: &Path) -> Result<()> {
    let data: FeatureSet = load_matrix(data)?;
    let x = data.to_f64();
    let feats = match model {
        None => x,
        Some(path) => {
            let file = load_model(path)?;
            match file.flags {
                FLAG_HEAD => file.into_classifier()?.features(x.view())?,
                FLAG_BANK => file.into_extractor_bank()?.0.forward(x.view())?,
                _ => {
                    return Err(Error::Config(
                        "projection needs a classifier or extractor checkpoint".into(),
                    ))
                }
            }
        }
    };
    let p = pca2(feats.view())?;
    write_text(dest, &projection_csv(&p.coords, data.labels()))
}
