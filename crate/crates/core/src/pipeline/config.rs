//! Flat `key = value` configuration with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::clustering::{KMeansConfig, SinkhornConfig};
use crate::error::{Error, Result};
use crate::features::SynthConfig;
use crate::network::TrainConfig;
use crate::rng::derive;
use crate::ssl::{AugmentationSpec, SslConfig};

/// Shipped default benchmark.
pub const BENCHMARK_CONFIG: &str = include_str!("../../configs/benchmark.conf");

/// `(key, default, description)`; a `None` default marks a required key.
pub const KEYS: &[(&str, Option<&str>, &str)] = &[
    ("seed", None, "master seed; every stage derives its own stream from it"),
    ("num_classes", None, "number of classes N"),
    ("input_dim", None, "raw input dimension D"),
    ("source_counts", None, "samples per class in the source domain, comma separated"),
    ("target_counts", None, "samples per class in the target domain, comma separated"),
    ("shift_rotation", None, "rotation angle (radians) applied to each coordinate pair"),
    ("shift_translation", None, "norm of the per-class target offset"),
    ("noise_sigma", None, "within-class standard deviation"),
    ("hidden_dim", Some("64"), "hidden width of every extractor"),
    ("feature_dim", Some("32"), "feature dimension Z"),
    ("clusters", Some("70"), "k-means cluster count K"),
    ("min_cluster_ratio", Some("10"), "require clusters >= ratio * num_classes"),
    ("purity_q", Some("0.8"), "per-class purity percentile Q in (0, 1)"),
    ("kmeans_max_iter", Some("300"), "Lloyd iteration cap"),
    ("kmeans_tol", Some("1e-6"), "stop when no centroid moves farther than this"),
    ("kmeans_normalize", Some("false"), "L2-normalize features before clustering"),
    ("val_fraction", Some("0.2"), "share of the source set held out for validation"),
    ("source_epochs", Some("50"), "source training epochs"),
    ("source_batch_size", Some("64"), "source mini-batch size"),
    ("source_lr0", Some("0.05"), "source initial learning rate"),
    ("source_lr_min", Some("0.0"), "source final learning rate"),
    ("source_momentum", Some("0.9"), "source SGD momentum"),
    ("ssl_epochs", Some("100"), "self-supervised pretraining epochs"),
    ("ssl_batch_size", Some("64"), "self-supervised batch size"),
    ("ssl_lr0", Some("0.05"), "self-supervised initial learning rate"),
    ("ssl_lr_min", Some("0.0"), "self-supervised final learning rate"),
    ("ssl_momentum", Some("0.9"), "self-supervised SGD momentum"),
    ("ssl_temperature", Some("0.1"), "softmax temperature over prototype scores"),
    ("ssl_prototypes", Some("0"), "prototype count; 0 means 4 * num_classes"),
    ("sinkhorn_epsilon", Some("0.05"), "entropic regularization of the code assignment"),
    ("sinkhorn_iterations", Some("3"), "Sinkhorn-Knopp iterations per batch"),
    ("aug_views", Some("2"), "views per sample (>= 2)"),
    ("aug_noise_sigma", Some("0.3"), "Gaussian noise added to each view"),
    ("aug_dropout", Some("0.1"), "probability of zeroing a coordinate"),
    ("aug_scale_lo", Some("0.9"), "lower bound of the per-sample scale"),
    ("aug_scale_hi", Some("1.1"), "upper bound of the per-sample scale"),
    ("target_epochs", Some("50"), "target training epochs"),
    ("target_batch_size", Some("64"), "target mini-batch size"),
    ("target_lr0", Some("0.01"), "target initial learning rate"),
    ("target_lr_min", Some("0.0"), "target final learning rate"),
    ("target_momentum", Some("0.9"), "target SGD momentum"),
    ("freeze_extractor", Some("false"), "train only the new head in the target stage"),
    ("sweep_values", Some("0.5, 0.6, 0.7, 0.8, 0.9"), "thresholds / percentiles for `sweep`"),
];

/// Help text listing every key, its default and meaning.
pub fn keys_help() -> String {
    let mut out = String::from("Configuration keys (`key = value`, `#` starts a comment):\n");
    for (key, default, help) in KEYS {
        let d = default.map_or_else(|| "required".to_string(), |d| format!("default {d}"));
        writeln!(out, "  {key:<22} {help} [{d}]").expect("write to String");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub hidden_dim: usize,
    pub feature_dim: usize,
    pub clusters: usize,
    pub purity_q: f64,
    pub kmeans: KMeansConfig,
    pub kmeans_normalize: bool,
    pub val_fraction: f64,
    pub source_train: TrainConfig,
    pub ssl: SslConfig,
    pub prototypes: usize,
    pub target_train: TrainConfig,
    pub freeze_extractor: bool,
    pub sweep_values: Vec<f64>,
}

struct Values(BTreeMap<String, (usize, String)>);

impl Values {
    fn raw(&self, key: &str) -> Result<(usize, &str)> {
        if let Some((line, v)) = self.0.get(key) {
            return Ok((*line, v.as_str()));
        }
        match KEYS.iter().find(|(k, _, _)| *k == key) {
            Some((_, Some(default), _)) => Ok((0, default)),
            _ => Err(Error::MissingKey(key.to_string())),
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (line, v) = self.raw(key)?;
        v.parse().map_err(|_| Error::Config(bad_value(key, v, line)))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let (line, v) = self.raw(key)?;
        v.split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::Config(bad_value(key, v, line))))
            .collect()
    }
}

fn bad_value(key: &str, v: &str, line: usize) -> String {
    if line == 0 {
        format!("invalid value `{v}` for `{key}`")
    } else {
        format!("line {line}: invalid value `{v}` for `{key}`")
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                msg: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            if !KEYS.iter().any(|(k, _, _)| *k == key) {
                return Err(Error::Config(format!("line {}: unknown key `{key}`", n + 1)));
            }
            if map.insert(key.to_string(), (n + 1, value.trim().to_string())).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
        }
        Self::from_values(&Values(map))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The shipped benchmark configuration.
    pub fn benchmark() -> Self {
        Self::parse(BENCHMARK_CONFIG).expect("shipped config is valid")
    }

    fn from_values(v: &Values) -> Result<Self> {
        let seed: u64 = v.get("seed")?;
        let num_classes: usize = v.get("num_classes")?;
        let prototypes: usize = v.get("ssl_prototypes")?;
        let cfg = PipelineConfig {
            seed,
            synth: SynthConfig {
                num_classes,
                input_dim: v.get("input_dim")?,
                source_counts: v.list("source_counts")?,
                target_counts: v.list("target_counts")?,
                shift_rotation: v.get("shift_rotation")?,
                shift_translation: v.get("shift_translation")?,
                noise_sigma: v.get("noise_sigma")?,
                seed: 0,
            },
            hidden_dim: v.get("hidden_dim")?,
            feature_dim: v.get("feature_dim")?,
            clusters: v.get("clusters")?,
            purity_q: v.get("purity_q")?,
            kmeans: KMeansConfig {
                max_iter: v.get("kmeans_max_iter")?,
                tol: v.get("kmeans_tol")?,
                seed: 0,
            },
            kmeans_normalize: v.get("kmeans_normalize")?,
            val_fraction: v.get("val_fraction")?,
            source_train: TrainConfig {
                epochs: v.get("source_epochs")?,
                batch_size: v.get("source_batch_size")?,
                lr0: v.get("source_lr0")?,
                lr_min: v.get("source_lr_min")?,
                momentum: v.get("source_momentum")?,
                seed: 0,
            },
            ssl: SslConfig {
                epochs: v.get("ssl_epochs")?,
                batch_size: v.get("ssl_batch_size")?,
                temperature: v.get("ssl_temperature")?,
                sinkhorn: SinkhornConfig {
                    epsilon: v.get("sinkhorn_epsilon")?,
                    iterations: v.get("sinkhorn_iterations")?,
                },
                lr0: v.get("ssl_lr0")?,
                lr_min: v.get("ssl_lr_min")?,
                momentum: v.get("ssl_momentum")?,
                augment: AugmentationSpec {
                    num_views: v.get("aug_views")?,
                    noise_sigma: v.get("aug_noise_sigma")?,
                    dropout_prob: v.get("aug_dropout")?,
                    scale_lo: v.get("aug_scale_lo")?,
                    scale_hi: v.get("aug_scale_hi")?,
                },
                seed: 0,
            },
            prototypes: if prototypes == 0 { 4 * num_classes } else { prototypes },
            target_train: TrainConfig {
                epochs: v.get("target_epochs")?,
                batch_size: v.get("target_batch_size")?,
                lr0: v.get("target_lr0")?,
                lr_min: v.get("target_lr_min")?,
                momentum: v.get("target_momentum")?,
                seed: 0,
            },
            freeze_extractor: v.get("freeze_extractor")?,
            sweep_values: v.list("sweep_values")?,
        }
        .with_seed(seed);
        let ratio: usize = v.get("min_cluster_ratio")?;
        cfg.validate(ratio)?;
        Ok(cfg)
    }

    /// Re-derives every stage seed from a new master seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.synth.seed = derive(seed, 1);
        self.source_train.seed = derive(seed, 3);
        self.kmeans.seed = derive(seed, 5);
        self.ssl.seed = derive(seed, 8);
        self.target_train.seed = derive(seed, 10);
        self
    }

    pub fn num_classes(&self) -> usize {
        self.synth.num_classes
    }

    /// Layer sizes `[D, hidden, Z]` shared by source and target extractors.
    pub fn extractor_dims(&self) -> [usize; 3] {
        [self.synth.input_dim, self.hidden_dim, self.feature_dim]
    }

    pub fn source_init_seed(&self) -> u64 {
        derive(self.seed, 2)
    }

    pub fn split_seed(&self) -> u64 {
        derive(self.seed, 4)
    }

    pub fn ssl_init_seed(&self) -> u64 {
        derive(self.seed, 6)
    }

    pub fn bank_seed(&self) -> u64 {
        derive(self.seed, 7)
    }

    pub fn target_head_seed(&self) -> u64 {
        derive(self.seed, 9)
    }

    fn validate(&self, ratio: usize) -> Result<()> {
        self.synth.validate()?;
        let n = self.num_classes();
        if self.hidden_dim == 0 || self.feature_dim == 0 {
            return Err(Error::Config("layer widths must be >= 1".into()));
        }
        if self.clusters < n {
            return Err(Error::Config(format!(
                "clusters = {} must be >= num_classes = {n}",
                self.clusters
            )));
        }
        if self.clusters < ratio * n {
            return Err(Error::Config(format!(
                "clusters = {} below the over-clustering floor {ratio} * {n}",
                self.clusters
            )));
        }
        if !(self.purity_q > 0.0 && self.purity_q < 1.0) {
            return Err(Error::Config("purity_q must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config("val_fraction must lie in [0, 1)".into()));
        }
        if self.kmeans.max_iter == 0 || !(self.kmeans.tol >= 0.0) {
            return Err(Error::Config("k-means needs max_iter >= 1 and tol >= 0".into()));
        }
        self.source_train.validate()?;
        self.target_train.validate()?;
        self.ssl.validate()?;
        if self.sweep_values.is_empty() {
            return Err(Error::Config("sweep_values must not be empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_parses() {
        let cfg = PipelineConfig::benchmark();
        assert_eq!(cfg.num_classes(), 7);
        assert_eq!(cfg.synth.input_dim, 16);
        assert_eq!(cfg.feature_dim, 32);
        assert_eq!(cfg.clusters, 70);
        assert_eq!(cfg.purity_q, 0.8);
        assert_eq!(cfg.prototypes, 28);
        assert_eq!(cfg.sweep_values, vec![0.5, 0.6, 0.7, 0.8, 0.9]);
    }

    #[test]
    fn missing_key_is_named() {
        let text = BENCHMARK_CONFIG.replace("noise_sigma", "# noise_sigma");
        match PipelineConfig::parse(&text) {
            Err(Error::MissingKey(k)) => assert_eq!(k, "noise_sigma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let unknown = format!("{BENCHMARK_CONFIG}\nclustres = 70\n");
        assert!(matches!(PipelineConfig::parse(&unknown), Err(Error::Config(_))));
        let dup = format!("{BENCHMARK_CONFIG}\nclusters = 80\n");
        assert!(matches!(PipelineConfig::parse(&dup), Err(Error::Config(_))));
    }

    #[test]
    fn over_clustering_floor() {
        let text = BENCHMARK_CONFIG.replace("clusters = 70", "clusters = 20");
        assert!(PipelineConfig::parse(&text).is_err());
        let text = format!("{}\nmin_cluster_ratio = 1\n", text);
        assert_eq!(PipelineConfig::parse(&text).unwrap().clusters, 20);
    }

    #[test]
    fn seed_override_rederives() {
        let a = PipelineConfig::benchmark();
        let b = a.clone().with_seed(99);
        assert_ne!(a.synth.seed, b.synth.seed);
        assert_eq!(b, a.with_seed(99));
    }

    #[test]
    fn help_lists_every_key() {
        let help = keys_help();
        for (k, _, _) in KEYS {
            assert!(help.contains(k));
        }
    }
}
