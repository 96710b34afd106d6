//! Command-line driver for the flowlens pipeline.
//!
//! Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage or
//! configuration errors.

pub mod config;
pub mod pipeline;

use clap::{Args, Parser, Subcommand};
use config::PipelineConfig;
use flowlens::models::ModelKind;
use flowlens::{Error, Result};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "flowlens", version, about = "Network-flow anomaly detection with explainable tree ensembles")]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Root seed; overrides FLOWLENS_SEED and the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GenerateArgs {
    /// Number of 5-second windows.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub rate: Option<String>,
    /// easy or hard.
    #[arg(long)]
    pub difficulty: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic flow CSV and its anomaly-interval sidecar.
    Generate {
        #[command(flatten)]
        gen: GenerateArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Defaults to <out> with an .intervals.csv extension.
        #[arg(long)]
        intervals: Option<PathBuf>,
    },
    /// Window a flow CSV into the labeled 19-feature dataset.
    Featurize {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        intervals: Option<PathBuf>,
        /// Window length in seconds.
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        stride: Option<String>,
        #[arg(long)]
        min_packets: Option<String>,
        /// Train, validation and test sizes, e.g. 700,300,300.
        #[arg(long)]
        splits: Option<String>,
    },
    /// Fit one model on the train split and save it.
    Train {
        /// dt, rf, logreg, ada, gb, svm, nb, knn or majority.
        #[arg(long)]
        model: String,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out_model: Option<PathBuf>,
    },
    /// Score saved models and print the comparison table.
    Evaluate {
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        models: Vec<PathBuf>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// hm or boot.
        #[arg(long)]
        ci: Option<String>,
        /// Also write the table and ROC files here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Tree SHAP explanations of a saved tree model.
    Explain {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Dataset row indices to decompose.
        #[arg(long)]
        instances: Option<String>,
        /// Dependence-plot features.
        #[arg(long)]
        feature: Option<String>,
        #[arg(long)]
        color_feature: Option<String>,
        #[arg(long)]
        thresholds: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Comparison table, ROC curves and explanations in one directory.
    Report {
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        models: Vec<PathBuf>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        ci: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Every stage with one seed.
    All {
        #[command(flatten)]
        gen: GenerateArgs,
        #[arg(long)]
        ci: Option<String>,
        /// Model kinds to train, comma separated.
        #[arg(long)]
        kinds: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn set_opt(cfg: &mut PipelineConfig, key: &str, value: &Option<String>) -> Result<()> {
    match value {
        Some(v) => cfg.set(key, v),
        None => Ok(()),
    }
}

fn apply_generate(cfg: &mut PipelineConfig, gen: &GenerateArgs) -> Result<()> {
    set_opt(cfg, "n_windows", &gen.n)?;
    set_opt(cfg, "anomaly_rate", &gen.rate)?;
    set_opt(cfg, "difficulty", &gen.difficulty)
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| Error::Config(format!("missing --{name} (or the matching config key)")))
}

/// Configuration with precedence flags > FLOWLENS_SEED > file > defaults.
/// Subcommand flags are applied by the caller.
pub fn base_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute<W: Write>(cli: Cli, out: &mut W) -> Result<()> {
    let mut cfg = base_config(&cli)?;
    let say = |out: &mut W, line: String| writeln!(out, "{line}").map_err(|e| Error::Io {
        path: "<stdout>".into(),
        source: e,
    });
    match cli.command {
        Command::Generate { gen, out: flows, intervals } => {
            apply_generate(&mut cfg, &gen)?;
            let flows = required(flows, &cfg.flows_path, "out")?;
            let intervals = intervals
                .or_else(|| cfg.intervals_path.clone())
                .unwrap_or_else(|| pipeline::intervals_sidecar(&flows));
            let s = pipeline::generate(&cfg, &flows, &intervals)?;
            say(
                out,
                format!(
                    "wrote {} records in {} windows ({:.3} anomalous) to {} and {}",
                    s.n_records,
                    s.n_windows,
                    s.anomalous_fraction,
                    flows.display(),
                    intervals.display()
                ),
            )?;
        }
        Command::Featurize {
            input,
            out: dataset,
            intervals,
            window,
            stride,
            min_packets,
            splits,
        } => {
            // A stride equal to the window keeps following it.
            let tied = cfg.window.stride_seconds == cfg.window.window_seconds;
            set_opt(&mut cfg, "window_seconds", &window)?;
            if tied {
                cfg.window.stride_seconds = cfg.window.window_seconds;
            }
            set_opt(&mut cfg, "stride_seconds", &stride)?;
            set_opt(&mut cfg, "min_packets", &min_packets)?;
            if let Some(s) = &splits {
                let parts: Vec<&str> = s.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(Error::Config(format!("--splits expects train,val,test; got `{s}`")));
                }
                for (key, v) in ["split_train", "split_val", "split_test"].iter().zip(parts) {
                    cfg.set(key, v)?;
                }
            }
            let flows = required(input, &cfg.flows_path, "in")?;
            let dataset = required(dataset, &cfg.dataset_path, "out")?;
            let intervals = intervals
                .or_else(|| cfg.intervals_path.clone())
                .unwrap_or_else(|| pipeline::intervals_sidecar(&flows));
            let data = pipeline::featurize(&cfg, &flows, &intervals, &dataset)?;
            say(
                out,
                format!("wrote {} windows ({} anomalous) to {}", data.len(), data.positives(), dataset.display()),
            )?;
        }
        Command::Train { model, input, out_model } => {
            let kind: ModelKind = model.parse()?;
            let dataset = required(input, &cfg.dataset_path, "in")?;
            let path = required(out_model, &cfg.model_path, "out-model")?;
            pipeline::train(&cfg, kind, &dataset, &path)?;
            say(out, format!("saved {} to {}", kind.display_name(), path.display()))?;
        }
        Command::Evaluate {
            models,
            input,
            ci,
            out_dir,
        } => {
            set_opt(&mut cfg, "ci", &ci)?;
            let models = if models.is_empty() { cfg.model_paths.clone() } else { models };
            let dataset = required(input, &cfg.dataset_path, "in")?;
            let eval = pipeline::evaluate(&cfg, &models, &dataset)?;
            if let Some(dir) = out_dir.or_else(|| cfg.out_dir.clone()) {
                pipeline::write_evaluation(&eval, &dir)?;
            }
            pipeline::print_table(&eval, &mut *out).map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })?;
        }
        Command::Explain {
            model,
            input,
            instances,
            feature,
            color_feature,
            thresholds,
            out_dir,
        } => {
            set_opt(&mut cfg, "instances", &instances)?;
            set_opt(&mut cfg, "dependence_features", &feature)?;
            set_opt(&mut cfg, "color_feature", &color_feature)?;
            set_opt(&mut cfg, "thresholds", &thresholds)?;
            let model_path = required(model, &cfg.model_path, "model")?;
            let dataset = required(input, &cfg.dataset_path, "in")?;
            let dir = required(out_dir, &cfg.out_dir, "out-dir")?;
            let archive = pipeline::load_archive(&model_path)?;
            let data = pipeline::load_dataset(&dataset)?;
            if archive.feature_schema != data.feature_names() {
                return Err(Error::Format {
                    path: model_path.display().to_string(),
                    message: "model feature schema does not match the dataset columns".into(),
                });
            }
            let res = pipeline::explain(&cfg, &archive.trained(), &data, &dir)?;
            say(out, format!("top features over {} rows:", res.rows.len()))?;
            for line in res.importance.summary(5) {
                say(out, format!("  {line}"))?;
            }
        }
        Command::Report {
            models,
            input,
            ci,
            out_dir,
        } => {
            set_opt(&mut cfg, "ci", &ci)?;
            let models = if models.is_empty() { cfg.model_paths.clone() } else { models };
            let dataset = required(input, &cfg.dataset_path, "in")?;
            let dir = required(out_dir, &cfg.out_dir, "out-dir")?;
            let eval = pipeline::evaluate(&cfg, &models, &dataset)?;
            let data = pipeline::load_dataset(&dataset)?;
            pipeline::report(&cfg, &eval, &data, &dir)?;
            say(out, format!("report written to {}", dir.display()))?;
        }
        Command::All { gen, ci, kinds, out_dir } => {
            apply_generate(&mut cfg, &gen)?;
            set_opt(&mut cfg, "ci", &ci)?;
            set_opt(&mut cfg, "models", &kinds)?;
            let dir = required(out_dir, &cfg.out_dir, "out-dir")?;
            let res = pipeline::run_all(&cfg, &dir)?;
            pipeline::print_table(&res.evaluation, &mut *out).map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })?;
            if let Some(x) = &res.explained {
                say(out, format!("top feature: {}", x.importance.top()))?;
            }
            say(out, format!("outputs in {}", Path::new(&dir).display()))?;
        }
    }
    Ok(())
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownFeature { .. } => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name) and runs the subcommand,
/// writing results to `out` and diagnostics to stderr.
pub fn run_with<I, T, W>(args: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("flowlens: error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            exit_code(&e)
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock())
}
