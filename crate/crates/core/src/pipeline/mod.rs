//! The three-stage adaptation pipeline, its configuration and subcommands.

mod ablation;
mod commands;
mod config;
mod metrics;
mod project;
mod stages;
mod sweep;

pub use ablation::{ablation, AblationRun, SubsetPoint};
pub use commands::{
    cmd_eval, cmd_make_synth, cmd_project, cmd_pseudo_label, cmd_ssl_pretrain, cmd_sweep,
    cmd_train_source, cmd_train_target, Artifacts,
};
pub use config::{keys_help, PipelineConfig, BENCHMARK_CONFIG, KEYS};
pub use metrics::MetricsReport;
pub use project::{covariance, pca2, projection_csv, Projection};
pub use stages::{
    evaluate, ssl_pretrain, subset_from_features, subset_to_features, train_source, train_target,
    ClusterStage, SourceOutcome, SslOutcome,
};
pub use sweep::{run_sweep, sweep_csv, Method, SweepRow};
