//! Flat `key = value` pipeline configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Command-line flags
//! override the file; `FLOWLENS_SEED` overrides the file's seed but not the
//! `--seed` flag.

use flowlens::dataset::{Difficulty, RegimeMix, SplitCounts};
use flowlens::eval::CiMethod;
use flowlens::features::WindowConfig;
use flowlens::models::{FeatureSubsample, Hyperparams, ModelKind};
use flowlens::{Error, Result};
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const SEED_ENV: &str = "FLOWLENS_SEED";

/// Features plotted as dependence series when none are requested.
pub const DEFAULT_DEPENDENCE_FEATURES: [&str; 6] = [
    "packet_count_5s",
    "inter_arrival_time",
    "spectral_entropy",
    "frequency_band_energy",
    "packet_size",
    "src_port",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub n_windows: usize,
    pub anomaly_rate: f64,
    pub difficulty: Difficulty,
    pub regime_mix: RegimeMix,
    pub window: WindowConfig,
    pub splits: SplitCounts,
    pub ci_method: CiMethod,
    pub ci_level: f64,
    pub cv_folds: usize,
    pub models: Vec<ModelKind>,
    pub hyperparams: Hyperparams,
    pub explain_model: ModelKind,
    /// Dataset row indices to decompose as waterfalls; empty picks the first
    /// three validation rows.
    pub instances: Vec<usize>,
    pub dependence_features: Vec<String>,
    pub color_feature: Option<String>,
    /// User thresholds; 0.5 is always added.
    pub thresholds: Vec<f64>,
    pub flows_path: Option<PathBuf>,
    /// Defaults to the flows path with an `.intervals.csv` extension.
    pub intervals_path: Option<PathBuf>,
    pub dataset_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub model_paths: Vec<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_windows: 1300,
            anomaly_rate: 0.10,
            difficulty: Difficulty::Easy,
            regime_mix: RegimeMix::default(),
            window: WindowConfig::default(),
            splits: SplitCounts::default(),
            ci_method: CiMethod::HanleyMcneil,
            ci_level: 0.95,
            cv_folds: 5,
            models: ModelKind::TABLE.to_vec(),
            hyperparams: Hyperparams::default(),
            explain_model: ModelKind::Rf,
            instances: Vec::new(),
            dependence_features: DEFAULT_DEPENDENCE_FEATURES.iter().map(|s| s.to_string()).collect(),
            color_feature: None,
            thresholds: vec![0.74, 0.99],
            flows_path: None,
            intervals_path: None,
            dataset_path: None,
            model_path: None,
            model_paths: Vec::new(),
            out_dir: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_optional_depth(key: &str, value: &str) -> Result<Option<usize>> {
    match value {
        "none" | "unlimited" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

/// All recognised keys, for error messages.
pub const KEYS: &[&str] = &[
    "seed",
    "n_windows",
    "anomaly_rate",
    "difficulty",
    "regime_flood",
    "regime_beacon",
    "regime_exfiltration",
    "window_seconds",
    "stride_seconds",
    "min_packets",
    "split_train",
    "split_val",
    "split_test",
    "ci",
    "ci_level",
    "cv_folds",
    "models",
    "explain_model",
    "instances",
    "dependence_features",
    "color_feature",
    "thresholds",
    "n_trees",
    "bootstrap",
    "feature_subsample",
    "max_depth",
    "min_samples_split",
    "min_samples_leaf",
    "gb_stages",
    "learning_rate",
    "gb_max_depth",
    "ada_rounds",
    "k_neighbors",
    "l2",
    "logreg_max_iter",
    "svm_iterations",
    "flows_path",
    "intervals_path",
    "dataset_path",
    "model_path",
    "model_paths",
    "out_dir",
];

impl PipelineConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let h = &mut self.hyperparams;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "n_windows" => self.n_windows = parse(key, value)?,
            "anomaly_rate" => self.anomaly_rate = parse(key, value)?,
            "difficulty" => self.difficulty = value.parse()?,
            "regime_flood" => self.regime_mix.flood = parse(key, value)?,
            "regime_beacon" => self.regime_mix.beacon = parse(key, value)?,
            "regime_exfiltration" => self.regime_mix.exfiltration = parse(key, value)?,
            "window_seconds" => self.window.window_seconds = parse(key, value)?,
            "stride_seconds" => self.window.stride_seconds = parse(key, value)?,
            "min_packets" => self.window.min_packets = parse(key, value)?,
            "split_train" => self.splits.train = parse(key, value)?,
            "split_val" => self.splits.val = parse(key, value)?,
            "split_test" => self.splits.test = parse(key, value)?,
            "ci" => self.ci_method = value.parse()?,
            "ci_level" => self.ci_level = parse(key, value)?,
            "cv_folds" => self.cv_folds = parse(key, value)?,
            "models" => self.models = value.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?,
            "explain_model" => self.explain_model = value.parse()?,
            "instances" => self.instances = parse_list(key, value)?,
            "dependence_features" => {
                self.dependence_features = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            }
            "color_feature" => self.color_feature = (value != "auto").then(|| value.to_string()),
            "thresholds" => self.thresholds = parse_list(key, value)?,
            "n_trees" => h.n_trees = parse(key, value)?,
            "bootstrap" => h.bootstrap = parse(key, value)?,
            "feature_subsample" => {
                h.feature_subsample = match value {
                    "all" => FeatureSubsample::All,
                    "sqrt_d" | "sqrt" => FeatureSubsample::SqrtD,
                    _ => return Err(Error::Config(format!("`{key}`: expected all or sqrt_d, got `{value}`"))),
                }
            }
            "max_depth" => h.max_depth = parse_optional_depth(key, value)?,
            "min_samples_split" => h.min_samples_split = parse(key, value)?,
            "min_samples_leaf" => h.min_samples_leaf = parse(key, value)?,
            "gb_stages" => h.gb_stages = parse(key, value)?,
            "learning_rate" => h.learning_rate = parse(key, value)?,
            "gb_max_depth" => h.gb_max_depth = parse(key, value)?,
            "ada_rounds" => h.ada_rounds = parse(key, value)?,
            "k_neighbors" => h.k_neighbors = parse(key, value)?,
            "l2" => h.l2 = parse(key, value)?,
            "logreg_max_iter" => h.logreg_max_iter = parse(key, value)?,
            "svm_iterations" => h.svm_iterations = parse(key, value)?,
            "flows_path" => self.flows_path = path_value(value),
            "intervals_path" => self.intervals_path = path_value(value),
            "dataset_path" => self.dataset_path = path_value(value),
            "model_path" => self.model_path = path_value(value),
            "model_paths" => {
                self.model_paths = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect()
            }
            "out_dir" => self.out_dir = path_value(value),
            _ => {
                return Err(Error::Config(format!(
                    "unknown config key `{key}`; valid keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies every setting in `text`. `origin` names the source in errors.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{origin}:{}: expected `key = value`, got `{line}`", i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("{origin}:{}: {}", i + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    /// Seed from the environment, if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}: cannot parse `{v}` as a 64-bit seed")))?;
        }
        Ok(())
    }

    /// Renders every key in the file format; loading the output reproduces
    /// this configuration.
    pub fn to_text(&self) -> String {
        let h = &self.hyperparams;
        let join = |v: &[String]| v.join(",");
        let lines = [
            ("seed", self.seed.to_string()),
            ("n_windows", self.n_windows.to_string()),
            ("anomaly_rate", self.anomaly_rate.to_string()),
            ("difficulty", self.difficulty.to_string()),
            ("regime_flood", self.regime_mix.flood.to_string()),
            ("regime_beacon", self.regime_mix.beacon.to_string()),
            ("regime_exfiltration", self.regime_mix.exfiltration.to_string()),
            ("window_seconds", self.window.window_seconds.to_string()),
            ("stride_seconds", self.window.stride_seconds.to_string()),
            ("min_packets", self.window.min_packets.to_string()),
            ("split_train", self.splits.train.to_string()),
            ("split_val", self.splits.val.to_string()),
            ("split_test", self.splits.test.to_string()),
            ("ci", self.ci_method.to_string()),
            ("ci_level", self.ci_level.to_string()),
            ("cv_folds", self.cv_folds.to_string()),
            ("models", join(&self.models.iter().map(|m| m.to_string()).collect::<Vec<_>>())),
            ("explain_model", self.explain_model.to_string()),
            ("instances", join(&self.instances.iter().map(|i| i.to_string()).collect::<Vec<_>>())),
            ("dependence_features", join(&self.dependence_features)),
            ("color_feature", self.color_feature.clone().unwrap_or_else(|| "auto".into())),
            ("thresholds", join(&self.thresholds.iter().map(|t| t.to_string()).collect::<Vec<_>>())),
            ("n_trees", h.n_trees.to_string()),
            ("bootstrap", h.bootstrap.to_string()),
            (
                "feature_subsample",
                match h.feature_subsample {
                    FeatureSubsample::All => "all".into(),
                    FeatureSubsample::SqrtD => "sqrt_d".into(),
                },
            ),
            ("max_depth", h.max_depth.map_or("none".into(), |d| d.to_string())),
            ("min_samples_split", h.min_samples_split.to_string()),
            ("min_samples_leaf", h.min_samples_leaf.to_string()),
            ("gb_stages", h.gb_stages.to_string()),
            ("learning_rate", h.learning_rate.to_string()),
            ("gb_max_depth", h.gb_max_depth.to_string()),
            ("ada_rounds", h.ada_rounds.to_string()),
            ("k_neighbors", h.k_neighbors.to_string()),
            ("l2", h.l2.to_string()),
            ("logreg_max_iter", h.logreg_max_iter.to_string()),
            ("svm_iterations", h.svm_iterations.to_string()),
            ("flows_path", show_path(&self.flows_path)),
            ("intervals_path", show_path(&self.intervals_path)),
            ("dataset_path", show_path(&self.dataset_path)),
            ("model_path", show_path(&self.model_path)),
            (
                "model_paths",
                join(&self.model_paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()),
            ),
            ("out_dir", show_path(&self.out_dir)),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn path_value(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn strip_prefix(e: &Error) -> String {
    let s = e.to_string();
    s.strip_prefix("configuration error: ").map(str::to_string).unwrap_or(s)
}
