//! Pipeline stages. Each stage reads its inputs from disk, validates them,
//! and writes its outputs; `run_all` chains them under one seed.

use crate::config::PipelineConfig;
use flowlens::archive::{load_model, save_model, ModelArchive};
use flowlens::dataset::{
    generate_flows, load_flows_csv, load_intervals_csv, save_flows_csv, save_intervals_csv, split_train_val_test,
    LabeledDataset, SplitTag, SyntheticConfig,
};
use flowlens::eval::{cross_validate, evaluate_all, evaluate_models, EvalOptions, Evaluation};
use flowlens::explain::{
    dependence_data, explain_rows, global_importance, waterfall, GlobalImportance, ShapExplanation, TreeEnsemble,
};
use flowlens::features::{featurize_stream, schema};
use flowlens::models::{fit_model, Model, ModelKind, TrainedModel};
use flowlens::seed::{derive_seed, STREAM_SPLITS};
use flowlens::{Error, Result};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_JSON: &str = "comparison.json";
pub const IMPORTANCE_CSV: &str = "importance.csv";
pub const EXPLANATIONS_JSON: &str = "explanations.json";
pub const CV_SUMMARY_JSON: &str = "cv_summary.json";

/// `flows.csv` -> `flows.intervals.csv`.
pub fn intervals_sidecar(flows: &Path) -> PathBuf {
    flows.with_extension("intervals.csv")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| io_err(path, e))?;
    write_file(path, buf)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(io_err(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, format!("{what} not found")),
        ))
    }
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    require_file(path, "dataset")?;
    LabeledDataset::load_csv(path, Some(&schema().to_vec()))
}

pub fn load_archive(path: &Path) -> Result<ModelArchive> {
    require_file(path, "model file")?;
    load_model(path)
}

fn check_schema(archive: &ModelArchive, data: &LabeledDataset, path: &Path) -> Result<()> {
    if archive.feature_schema != data.feature_names() {
        return Err(Error::Format {
            path: path.display().to_string(),
            message: "model feature schema does not match the dataset columns".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSummary {
    pub n_records: usize,
    pub n_windows: usize,
    pub anomalous_fraction: f64,
}

/// Writes the flow CSV and its labeled-interval sidecar.
pub fn generate(cfg: &PipelineConfig, flows_out: &Path, intervals_out: &Path) -> Result<GenerateSummary> {
    let gen = generate_flows(&SyntheticConfig {
        n_flows: cfg.n_windows,
        anomaly_rate: cfg.anomaly_rate,
        regime_mix: cfg.regime_mix,
        difficulty: cfg.difficulty,
        seed: cfg.seed,
    })?;
    save_flows_csv(flows_out, &gen.flows)?;
    save_intervals_csv(intervals_out, &gen.intervals())?;
    Ok(GenerateSummary {
        n_records: gen.flows.len(),
        n_windows: gen.window_labels.len(),
        anomalous_fraction: gen.anomalous_window_fraction(),
    })
}

/// Windows and labels a flow CSV and assigns stratified splits.
pub fn featurize(cfg: &PipelineConfig, flows: &Path, intervals: &Path, out: &Path) -> Result<LabeledDataset> {
    cfg.window.validate()?;
    require_file(flows, "flow file")?;
    require_file(intervals, "interval file")?;
    let records = load_flows_csv(flows)?;
    let labeled = load_intervals_csv(intervals)?;
    let data = featurize_stream(&records, &cfg.window, &labeled)?;
    let data = split_train_val_test(&data, cfg.splits, derive_seed(cfg.seed, STREAM_SPLITS))?;
    data.save_csv(out)?;
    Ok(data)
}

/// Fits one model on the train split and saves its archive.
pub fn train(cfg: &PipelineConfig, kind: ModelKind, dataset: &Path, out: &Path) -> Result<TrainedModel> {
    let data = load_dataset(dataset)?;
    let (x, y) = data.split(SplitTag::Train);
    if y.is_empty() {
        return Err(Error::Size(format!("{}: the train split is empty", dataset.display())));
    }
    let model = fit_model(kind, &cfg.hyperparams, x.view(), &y, cfg.seed)?;
    save_model(&model, data.feature_names(), out)?;
    Ok(model)
}

fn eval_options(cfg: &PipelineConfig) -> EvalOptions {
    EvalOptions {
        ci_method: cfg.ci_method,
        level: cfg.ci_level,
        seed: cfg.seed,
    }
}

/// Scores saved models on every split.
pub fn evaluate(cfg: &PipelineConfig, models: &[PathBuf], dataset: &Path) -> Result<Evaluation> {
    if models.is_empty() {
        return Err(Error::Config("no model files given".into()));
    }
    // Check every path before loading the dataset so a missing model is
    // reported by name.
    for p in models {
        require_file(p, "model file")?;
    }
    let data = load_dataset(dataset)?;
    let mut trained = Vec::with_capacity(models.len());
    for p in models {
        let archive = load_archive(p)?;
        check_schema(&archive, &data, p)?;
        trained.push(archive.trained());
    }
    evaluate_models(trained, &data, &eval_options(cfg))
}

/// Comparison table (CSV and JSON) and one ROC file per model and split.
pub fn write_evaluation(eval: &Evaluation, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    let p = dir.join(COMPARISON_CSV);
    write_with(&p, |w| eval.table.write_csv(w))?;
    written.push(p);
    let p = dir.join(COMPARISON_JSON);
    write_file(&p, eval.table.to_json() + "\n")?;
    written.push(p);
    for (model, scores) in eval.models.iter().zip(&eval.scores) {
        for s in scores {
            if let Some(roc) = &s.roc {
                let p = dir.join(format!("roc_{}_{}.csv", model.kind, s.split));
                write_with(&p, |w| roc.write_csv(w))?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

/// Everything `explain` produces for one model.
#[derive(Debug, Clone)]
pub struct ExplainOutput {
    pub importance: GlobalImportance,
    /// Rows used for the global products.
    pub rows: Vec<usize>,
    pub instances: Vec<usize>,
    pub explanations: Vec<ShapExplanation>,
}

fn explained_rows(data: &LabeledDataset) -> Vec<usize> {
    let val = data.indices_of(SplitTag::Val);
    if val.is_empty() {
        (0..data.len()).collect()
    } else {
        val
    }
}

fn resolve_instances(cfg: &PipelineConfig, data: &LabeledDataset, rows: &[usize]) -> Result<Vec<usize>> {
    let instances = if cfg.instances.is_empty() {
        rows.iter().copied().take(3).collect()
    } else {
        cfg.instances.clone()
    };
    if let Some(&bad) = instances.iter().find(|&&i| i >= data.len()) {
        return Err(Error::Config(format!(
            "instance {bad} is out of range; the dataset has {} rows",
            data.len()
        )));
    }
    Ok(instances)
}

/// Tree SHAP over the validation rows (all rows when there is no
/// validation split) plus per-instance waterfalls and dependence series.
pub fn explain(cfg: &PipelineConfig, model: &TrainedModel, data: &LabeledDataset, dir: &Path) -> Result<ExplainOutput> {
    let names = data.feature_names().to_vec();
    for f in cfg.dependence_features.iter().chain(&cfg.color_feature) {
        data.feature_index(f)?;
    }
    let ensemble = TreeEnsemble::from_model(&model.model)?;
    let rows = explained_rows(data);
    let instances = resolve_instances(cfg, data, &rows)?;
    let (x, _) = data.select(&rows);
    let explanations = explain_rows(&ensemble, x.view())?;
    let importance = global_importance(&explanations, &names)?;

    ensure_dir(dir)?;
    write_with(&dir.join(IMPORTANCE_CSV), |w| importance.write_csv(w))?;
    for f in &cfg.dependence_features {
        let series = dependence_data(x.view(), &explanations, &names, f, cfg.color_feature.as_deref())?;
        write_with(&dir.join(format!("dependence_{f}.csv")), |w| series.write_csv(w))?;
    }

    let (xi, yi) = data.select(&instances);
    let instance_exps = explain_rows(&ensemble, xi.view())?;
    let margin_space = matches!(model.model, Model::Boosted(_));
    let mut listing = Vec::with_capacity(instances.len());
    for ((&i, e), &label) in instances.iter().zip(&instance_exps).zip(&yi) {
        listing.push(serde_json::json!({
            "instance": i,
            "label": label,
            "split": data.splits()[i].as_str(),
            "explanation": e.named(&names),
        }));
        let wf = waterfall(e, &names, &cfg.thresholds, margin_space)?;
        write_file(&dir.join(format!("waterfall_{i}.json")), wf.to_json() + "\n")?;
    }
    let doc = serde_json::json!({
        "model": model.kind.as_str(),
        "output_space": if margin_space { "margin" } else { "probability" },
        "instances": listing,
    });
    write_file(
        &dir.join(EXPLANATIONS_JSON),
        serde_json::to_string_pretty(&doc).expect("serializable explanations") + "\n",
    )?;
    Ok(ExplainOutput {
        importance,
        rows,
        instances,
        explanations: instance_exps,
    })
}

/// The configured explain model among `eval`'s models, else the first tree
/// model.
fn explain_target<'a>(cfg: &PipelineConfig, models: &'a [TrainedModel]) -> Option<&'a TrainedModel> {
    models
        .iter()
        .find(|m| m.kind == cfg.explain_model)
        .or_else(|| models.iter().find(|m| m.kind.is_tree_family()))
}

/// Evaluation files plus explanations of one tree model.
pub fn report(cfg: &PipelineConfig, eval: &Evaluation, data: &LabeledDataset, dir: &Path) -> Result<Option<ExplainOutput>> {
    write_evaluation(eval, dir)?;
    match explain_target(cfg, &eval.models) {
        Some(m) => explain(cfg, m, data, dir).map(Some),
        None => {
            log::warn!("no tree-family model among the evaluated models; skipping explanations");
            Ok(None)
        }
    }
}

/// Layout of the `all` output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct AllPaths {
    pub flows: PathBuf,
    pub intervals: PathBuf,
    pub dataset: PathBuf,
    pub models: PathBuf,
    pub report: PathBuf,
}

impl AllPaths {
    pub fn new(root: &Path) -> Self {
        let flows = root.join("flows.csv");
        Self {
            intervals: intervals_sidecar(&flows),
            flows,
            dataset: root.join("dataset.csv"),
            models: root.join("models"),
            report: root.join("report"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AllOutput {
    pub paths: AllPaths,
    pub evaluation: Evaluation,
    pub explained: Option<ExplainOutput>,
}

/// generate, featurize, train every configured model, evaluate, explain and
/// report, all under `cfg.seed`.
pub fn run_all(cfg: &PipelineConfig, root: &Path) -> Result<AllOutput> {
    let paths = AllPaths::new(root);
    ensure_dir(root)?;
    ensure_dir(&paths.models)?;
    generate(cfg, &paths.flows, &paths.intervals)?;
    let data = featurize(cfg, &paths.flows, &paths.intervals, &paths.dataset)?;
    let specs: Vec<_> = cfg.models.iter().map(|&k| (k, cfg.hyperparams)).collect();
    let evaluation = evaluate_all(&specs, &data, &eval_options(cfg))?;
    for m in &evaluation.models {
        save_model(m, data.feature_names(), &paths.models.join(format!("{}.json", m.kind)))?;
    }
    let explained = report(cfg, &evaluation, &data, &paths.report)?;
    if cfg.cv_folds >= 2 {
        let cv = cross_validate(cfg.explain_model, &cfg.hyperparams, &data, cfg.cv_folds, cfg.seed)?;
        let doc = serde_json::json!({
            "model": cfg.explain_model.as_str(),
            "k": cfg.cv_folds,
            "summary": cv,
        });
        write_file(
            &paths.report.join(CV_SUMMARY_JSON),
            serde_json::to_string_pretty(&doc).expect("serializable summary") + "\n",
        )?;
    }
    write_file(&root.join("config.txt"), cfg.to_text())?;
    Ok(AllOutput {
        paths,
        evaluation,
        explained,
    })
}

/// Human-readable comparison table for the terminal.
pub fn print_table<W: Write>(eval: &Evaluation, mut w: W) -> std::io::Result<()> {
    eval.table.write_csv(&mut w)
}
