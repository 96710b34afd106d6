//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use flowlens::dataset::{Difficulty, LabeledDataset, SplitCounts, SplitTag};
use flowlens::eval::{evaluate_all, format_metric, roc_curve, EvalOptions, Evaluation, COMPARISON_HEADER};
use flowlens::explain::{brute_force_shapley, explain_rows, global_importance, tree_shap, TreeEnsemble};
use flowlens::models::{
    fit_adaboost, fit_gradient_boosting, fit_model, fit_random_forest, fit_tree, BoostingParams, FeatureSubsample,
    ForestParams, Hyperparams, Model, ModelKind, TreeParams,
};
use flowlens::spectral::{band_energies, haar_dwt, spectral_entropy, BandEnergyProfile};
use flowlens_cli::config::PipelineConfig;
use flowlens_cli::pipeline;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

/// Reference comparison-table header, tab separated as published.
const REFERENCE_TABLE_HEADER: &str =
    "Model\tTrain_Accuracy\tVal_Accuracy\tTest_Accuracy\tTrain_AUC\tTrain_AUC_CI\tVal_AUC\tVal_AUC_CI\tTest_AUC\tTest_AUC_CI";
/// Reference Random Forest training cells and the repeated accuracy cell.
const REFERENCE_RF_TRAIN_AUC: &str = "1";
const REFERENCE_RF_TRAIN_CI: &str = "[1.000-1.000]";
const REFERENCE_ACCURACY: &str = "0.9";

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

struct Benchmark {
    data: LabeledDataset,
    eval: Evaluation,
}

fn benchmark(difficulty: Difficulty, dir: &Path) -> Benchmark {
    let cfg = PipelineConfig {
        seed: 42,
        n_windows: 1300,
        anomaly_rate: 0.10,
        difficulty,
        splits: SplitCounts::new(700, 300, 300),
        ..Default::default()
    };
    let flows = dir.join(format!("{difficulty}.csv"));
    let intervals = pipeline::intervals_sidecar(&flows);
    pipeline::generate(&cfg, &flows, &intervals).expect("generate");
    let data = pipeline::featurize(&cfg, &flows, &intervals, &dir.join(format!("{difficulty}.data.csv"))).expect("featurize");
    let specs = [(ModelKind::Rf, Hyperparams::default()), (ModelKind::Majority, Hyperparams::default())];
    let eval = evaluate_all(
        &specs,
        &data,
        &EvalOptions {
            seed: cfg.seed,
            ..Default::default()
        },
    )
    .expect("evaluate");
    Benchmark { data, eval }
}

fn random_grid_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Array2<f64>, Vec<u8>) {
    let x = Array2::from_shape_fn((n, d), |_| f64::from(rng.gen_range(0..10u8)) / 3.0);
    let y = (0..n)
        .map(|i| u8::from(x[[i, 0]] - x[[i, d - 1]] + rng.gen_range(-1.5..1.5) > 0.0))
        .collect();
    (x, y)
}

/// Tree, forest or boosted model with d ≤ 10, depth ≤ 4 and at most 20 trees.
fn random_tree_model(seed: u64) -> (Model, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..=10);
    let (x, y) = random_grid_data(&mut rng, 80, d);
    let tree = TreeParams {
        max_depth: Some(rng.gen_range(1..=4)),
        ..TreeParams::default()
    };
    let model = match seed % 3 {
        0 => Model::Tree(fit_tree(x.view(), &y, None, &tree).unwrap()),
        1 => Model::Forest(
            fit_random_forest(
                x.view(),
                &y,
                &ForestParams {
                    n_trees: rng.gen_range(1..=20),
                    bootstrap: true,
                    tree: TreeParams {
                        feature_subsample: FeatureSubsample::SqrtD,
                        ..tree
                    },
                },
                seed,
            )
            .unwrap(),
        ),
        _ => Model::Boosted(
            fit_gradient_boosting(
                x.view(),
                &y,
                &BoostingParams {
                    n_stages: rng.gen_range(1..=20),
                    learning_rate: rng.gen_range(0.05..0.5),
                    tree,
                },
            )
            .unwrap(),
        ),
    };
    (model, d)
}

fn shap_additivity(easy: &Benchmark) -> Outcome {
    let start = Instant::now();
    let (x_train, y_train) = easy.data.split(SplitTag::Train);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for kind in [ModelKind::Dt, ModelKind::Rf, ModelKind::Gb] {
        let m = fit_model(kind, &Hyperparams::default(), x_train.view(), &y_train, 42).unwrap();
        let ens = TreeEnsemble::from_model(&m.model).unwrap();
        for _ in 0..200 {
            // A dataset row, jittered half of the time.
            let row = easy.data.row(rng.gen_range(0..easy.data.len())).to_vec();
            let x: Vec<f64> = if rng.gen_bool(0.5) {
                row.iter().map(|v| v * rng.gen_range(0.8..1.2)).collect()
            } else {
                row
            };
            let e = tree_shap(&ens, &x).unwrap();
            let raw = m.model.raw_score(&x);
            worst = worst.max((e.base_value + e.phi.iter().sum::<f64>() - raw).abs());
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-9 && within(t, 10.0),
        format!("max |base + sum(phi) - raw| = {worst:.2e} over 600 instances, {:.2}s", t.as_secs_f64()),
    )
}

fn shapley_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let (model, d) = random_tree_model(seed);
        let ens = TreeEnsemble::from_model(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        for _ in 0..50 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..3.8)).collect();
            let fast = tree_shap(&ens, &x).unwrap();
            let slow = brute_force_shapley(&ens, &x).unwrap();
            for (a, b) in fast.phi.iter().zip(&slow.phi) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-9 && within(t, 60.0),
        format!("max |tree_shap - brute force| = {worst:.2e} over 50 models x 50 instances, {:.2}s", t.as_secs_f64()),
    )
}

fn pair_counting_auc(s: &[f64], y: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (&a, _) in s.iter().zip(y).filter(|(_, &l)| l == 1) {
        for (&b, _) in s.iter().zip(y).filter(|(_, &l)| l == 0) {
            pairs += 1.0;
            wins += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

fn auc_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=200);
        let mut s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        // Inject ties by copying earlier scores.
        for i in 1..n {
            if rng.gen_bool(0.3) {
                s[i] = s[rng.gen_range(0..i)];
            }
        }
        let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.4))).collect();
        y[0] = 0;
        y[n - 1] = 1;
        let area = roc_curve(&s, &y).unwrap().trapezoid_area();
        worst = worst.max((area - pair_counting_auc(&s, &y)).abs());
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-12 && within(t, 5.0),
        format!("max |trapezoid - Mann-Whitney| = {worst:.2e} over 100 sets, {:.3}s", t.as_secs_f64()),
    )
}

fn degenerate_ci(easy: &Benchmark) -> Outcome {
    let cells = easy.eval.table.rows[0].cells();
    let (auc, ci) = (&cells[4], &cells[5]);
    outcome(
        auc == REFERENCE_RF_TRAIN_AUC && ci == REFERENCE_RF_TRAIN_CI,
        format!("Random Forest Train_AUC {auc} {ci} (reference: {REFERENCE_RF_TRAIN_AUC} {REFERENCE_RF_TRAIN_CI})"),
    )
}

fn dwt_energy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut entropy_ok = true;
    for _ in 0..1000 {
        let len: usize = 2 * rng.gen_range(1..=256);
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-100.0..100.0)).collect();
        // Every level that needs no padding.
        let levels = (len.trailing_zeros() as usize).max(1);
        let d = haar_dwt(&x, levels).unwrap();
        let p = band_energies(&d);
        let ex: f64 = x.iter().map(|v| v * v).sum();
        worst = worst.max((ex - p.total).abs() / ex);
        let h = spectral_entropy(&p);
        entropy_ok &= h >= 0.0 && h <= (p.energies.len() as f64).log2() + 1e-12;
    }
    for bands in 1..=8usize {
        let uniform = spectral_entropy(&BandEnergyProfile::from_energies(vec![1.0; bands]));
        entropy_ok &= (uniform - (bands as f64).log2()).abs() <= 1e-12;
        let mut spike = vec![0.0; bands];
        spike[0] = 5.0;
        entropy_ok &= spectral_entropy(&BandEnergyProfile::from_energies(spike)) == 0.0;
    }
    outcome(
        worst <= 1e-9 && entropy_ok,
        format!("max relative energy error {worst:.2e} over 1000 signals; entropy bounds and extremes hold: {entropy_ok}"),
    )
}

fn ensemble_degeneracy(easy: &Benchmark) -> Outcome {
    let (x, y) = easy.data.split(SplitTag::Train);
    let tree = fit_tree(x.view(), &y, None, &TreeParams::default()).unwrap();
    let forest = fit_random_forest(
        x.view(),
        &y,
        &ForestParams {
            n_trees: 1,
            bootstrap: false,
            tree: TreeParams {
                feature_subsample: FeatureSubsample::All,
                ..TreeParams::default()
            },
        },
        42,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..500 {
        let row: Vec<f64> = easy
            .data
            .row(rng.gen_range(0..easy.data.len()))
            .iter()
            .map(|v| v * rng.gen_range(0.5..1.5))
            .collect();
        if forest.score(&row).to_bits() != tree.predict(&row).to_bits() {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 500 probe rows differ"))
}

fn boosting_monotonicity(easy: &Benchmark, hard: &Benchmark) -> Outcome {
    let mut worst_rise = f64::NEG_INFINITY;
    let mut worst_eps = 0.0f64;
    let mut worst_sum = 0.0f64;
    let mut rounds = 0;
    for b in [easy, hard] {
        let (x, y) = b.data.split(SplitTag::Train);
        let gb = fit_gradient_boosting(
            x.view(),
            &y,
            &BoostingParams {
                n_stages: 100,
                learning_rate: 0.1,
                ..Default::default()
            },
        )
        .unwrap();
        for w in gb.loss_trace.windows(2) {
            worst_rise = worst_rise.max(w[1] - w[0]);
        }
        let ada = fit_adaboost(x.view(), &y, 50).unwrap();
        rounds += ada.errors.len();
        worst_eps = ada.errors.iter().copied().fold(worst_eps, f64::max);
        for &(sum, _) in &ada.weight_trace {
            worst_sum = worst_sum.max((sum - 1.0).abs());
        }
    }
    outcome(
        worst_rise <= 1e-12 && worst_eps < 0.5 && worst_sum <= 1e-12,
        format!(
            "largest stage-to-stage loss change {worst_rise:.2e}; max AdaBoost error {worst_eps:.4} over {rounds} rounds; max |sum(w) - 1| {worst_sum:.1e}"
        ),
    )
}

fn synthetic_benchmark(easy: &Benchmark, hard: &Benchmark, elapsed: Duration) -> Outcome {
    let rf = |b: &Benchmark, split: usize| b.eval.table.rows[0].auc[split].expect("both classes").value;
    let majority_val = easy.eval.table.rows[1].accuracy[1].expect("non-empty split");
    let (train, val) = (rf(easy, 0), rf(easy, 1));
    let gap = rf(hard, 0) - rf(hard, 1);
    outcome(
        train == 1.0
            && val >= 0.80
            && format_metric(majority_val) == REFERENCE_ACCURACY
            && majority_val == 0.9
            && gap >= 0.15
            && within(elapsed, 60.0),
        format!(
            "easy RF train AUC {} val AUC {}; majority val accuracy {}; hard RF train {} val {} gap {:.3}; {:.2}s",
            format_metric(train),
            format_metric(val),
            format_metric(majority_val),
            format_metric(rf(hard, 0)),
            format_metric(rf(hard, 1)),
            gap,
            elapsed.as_secs_f64()
        ),
    )
}

fn explainability_ranking(easy: &Benchmark) -> Outcome {
    let rf = &easy.eval.models[0];
    let ens = TreeEnsemble::from_model(&rf.model).unwrap();
    let (x_val, _) = easy.data.split(SplitTag::Val);
    let exps = explain_rows(&ens, x_val.view()).unwrap();
    let g = global_importance(&exps, easy.data.feature_names()).unwrap();
    outcome(
        exps.len() == 300 && g.top() == "packet_count_5s",
        format!("top features over {} validation rows: {}", exps.len(), g.summary(3).join(", ")),
    )
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn report_conformance(dir: &Path) -> Outcome {
    let run = |name: &str| {
        let out = dir.join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_flowlens"))
            .args(["all", "--seed", "42", "--out-dir"])
            .arg(&out)
            .env_remove("FLOWLENS_SEED")
            .stdout(std::process::Stdio::null())
            .status()
            .expect("binary runs");
        assert!(status.success(), "flowlens all failed");
        out
    };
    let (a, b) = (run("run1"), run("run2"));
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    let identical = ta == tb && !ta.is_empty();

    let csv = String::from_utf8(ta["report/comparison.csv"].clone()).unwrap();
    let header = csv.lines().next().unwrap_or_default();
    let reference_header = REFERENCE_TABLE_HEADER.replace('\t', ",");
    let header_ok = header == reference_header && header == COMPARISON_HEADER.join(",");

    let waterfalls: Vec<&String> = ta.keys().filter(|k| k.contains("waterfall_")).collect();
    let thresholds_ok = !waterfalls.is_empty()
        && waterfalls.iter().all(|k| {
            let v: serde_json::Value = serde_json::from_slice(&ta[*k]).unwrap();
            v["thresholds"].as_array().is_some_and(|t| t.iter().any(|x| x.as_f64() == Some(0.5)))
        });
    outcome(
        identical && header_ok && thresholds_ok,
        format!(
            "header verbatim: {header_ok}; {} waterfalls carry 0.50: {thresholds_ok}; {} files byte-identical across runs: {identical}",
            waterfalls.len(),
            ta.len()
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let start = Instant::now();
    let easy = benchmark(Difficulty::Easy, dir.path());
    let hard = benchmark(Difficulty::Hard, dir.path());
    let bench_time = start.elapsed();

    let results = [
        ("1 SHAP additivity", shap_additivity(&easy)),
        ("2 Shapley oracle equivalence", shapley_oracle()),
        ("3 AUC oracle equivalence", auc_oracle()),
        ("4 Degenerate CI rendering", degenerate_ci(&easy)),
        ("5 DWT energy conservation", dwt_energy()),
        ("6 Ensemble degeneracy", ensemble_degeneracy(&easy)),
        ("7 Boosting monotonicity", boosting_monotonicity(&easy, &hard)),
        ("8 Synthetic benchmark", synthetic_benchmark(&easy, &hard, bench_time)),
        ("9 Explainability ranking", explainability_ranking(&easy)),
        ("10 Report conformance", report_conformance(dir.path())),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        println!("{} criterion {name}: {}", if r.pass { "PASS" } else { "FAIL" }, r.detail);
        failed += usize::from(!r.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
