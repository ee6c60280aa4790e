use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use clup::pipeline::{self, keys_help, Artifacts, PipelineConfig};
use clup::Error;

const FILES_HELP: &str = "\
Files under --out:
  source.clup, target.clup   CLUP matrices (f32 rows, optional u32 labels)
  source_model.cmdl          source extractor + softmax head
  subset.clup                refined subset: one f32 column of target row
                             indices, labels block = cluster pseudo-labels
  purity_report.txt          per-class thresholds, retained clusters, coverage
  clusters.cmdl              k-means centroids
  extractor.cmdl             self-supervised extractor + prototype bank
  ssl_loss.csv               epoch,loss
  target_model.cmdl          adapted target classifier
  metrics.txt                top1, class_<n>, coverage
  sweep.csv                  method,value,coverage,subset_accuracy,top1
  projection.csv             x,y,label

Exit codes: 0 ok, 2 config or usage, 3 numeric failure, 4 empty refinement.
";

#[derive(Parser)]
#[command(name = "clup", version, about = "Source-free domain adaptation with cluster-level pseudo-labels")]
#[command(after_help = after_help())]
struct Cli {
    /// Config file; the built-in benchmark when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "clup-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the source and target domains.
    MakeSynth,
    /// Train the source classifier on the labelled source domain.
    TrainSource,
    /// Cluster the target set and keep the purest clusters per class.
    PseudoLabel,
    /// Self-supervised pretraining of the target extractor.
    SslPretrain,
    /// Train a classifier on the refined subset.
    TrainTarget,
    /// Accuracy of a classifier checkpoint on a labelled matrix.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Confidence vs purity refinement over a list of thresholds.
    Sweep {
        /// Comma separated; defaults to `sweep_values` from the config.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
    },
    /// Two-component PCA of raw rows or of model features.
    Project {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn after_help() -> String {
    format!("{}\n{FILES_HELP}", keys_help())
}

fn load_config(cli: &Cli) -> clup::Result<PipelineConfig> {
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::benchmark(),
    };
    Ok(match cli.seed {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    })
}

fn run(cli: &Cli) -> clup::Result<()> {
    let out = || Artifacts::new(&cli.out);
    match &cli.command {
        Command::MakeSynth => pipeline::cmd_make_synth(&load_config(cli)?, &out()?),
        Command::TrainSource => {
            let r = pipeline::cmd_train_source(&load_config(cli)?, &out()?)?;
            println!("train_top1={:.6}", r.train_top1);
            match r.val_top1 {
                Some(v) => println!("val_top1={v:.6}"),
                None => println!("val_top1=n/a"),
            }
            Ok(())
        }
        Command::PseudoLabel => {
            let (_, report) = pipeline::cmd_pseudo_label(&load_config(cli)?, &out()?)?;
            print!("{report}");
            Ok(())
        }
        Command::SslPretrain => {
            let losses = pipeline::cmd_ssl_pretrain(&load_config(cli)?, &out()?)?;
            if let Some(l) = losses.last() {
                println!("final_loss={l:.6}");
            }
            Ok(())
        }
        Command::TrainTarget => {
            if let Some(m) = pipeline::cmd_train_target(&load_config(cli)?, &out()?)? {
                print!("{}", m.to_text());
            }
            Ok(())
        }
        Command::Eval { model, data } => {
            print!("{}", pipeline::cmd_eval(model, data)?.to_text());
            Ok(())
        }
        Command::Sweep { thresholds } => {
            let cfg = load_config(cli)?;
            let values = thresholds.clone().unwrap_or_else(|| cfg.sweep_values.clone());
            if values.is_empty() {
                return Err(Error::Config("empty threshold list".into()));
            }
            let rows = pipeline::cmd_sweep(&cfg, &out()?, &values)?;
            print!("{}", pipeline::sweep_csv(&rows));
            Ok(())
        }
        Command::Project { data, model } => {
            let out = out()?;
            pipeline::cmd_project(data, model.as_deref(), &out.projection())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
