use flowlens::explain::{
    brute_force_shapley, conditional_expectation, explain_rows, global_importance, tree_shap, waterfall, TreeEnsemble,
};
use flowlens::models::{
    fit_gradient_boosting, fit_random_forest, fit_tree, BoostingParams, FeatureSubsample, ForestParams, Model,
    TreeParams,
};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Array2<f64>, Vec<u8>) {
    // Coarse grid so thresholds collide and ties get exercised.
    let x = Array2::from_shape_fn((n, d), |_| f64::from(rng.gen_range(0..8u8)) / 2.0);
    let y = (0..n)
        .map(|i| u8::from(x[[i, 0]] + 0.5 * x[[i, d - 1]] + rng.gen_range(-1.0..1.0) > 2.5))
        .collect();
    (x, y)
}

fn random_model(seed: u64) -> (Model, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..=10);
    let (x, y) = random_data(&mut rng, 60, d);
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
                    learning_rate: 0.3,
                    tree,
                },
            )
            .unwrap(),
        ),
    };
    (model, d)
}

fn probe(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-0.5..4.5)).collect()
}

#[test]
fn matches_brute_force_on_random_models() {
    for seed in 0..30u64 {
        let (model, d) = random_model(seed);
        let ens = TreeEnsemble::from_model(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        for _ in 0..20 {
            let x = probe(&mut rng, d);
            let fast = tree_shap(&ens, &x).unwrap();
            let slow = brute_force_shapley(&ens, &x).unwrap();
            for (a, b) in fast.phi.iter().zip(&slow.phi) {
                assert!((a - b).abs() <= 1e-9, "seed {seed}: {a} vs {b}");
            }
            assert!((fast.base_value - slow.base_value).abs() <= 1e-9);
        }
    }
}

#[test]
fn empty_coalition_is_expected_value_and_full_is_prediction() {
    let (model, d) = random_model(3);
    let Model::Tree(t) = &model else { unreachable!() };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = probe(&mut rng, d);
    assert!((conditional_expectation(t, &x, 0) - t.expected_value()).abs() < 1e-12);
    assert_eq!(conditional_expectation(t, &x, (1u32 << d) - 1), t.predict(&x));
}

#[test]
fn unused_feature_gets_zero() {
    // Feature 1 is pure noise that never appears in a split of a depth-1 tree on feature 0.
    let x = Array2::from_shape_fn((20, 2), |(i, j)| if j == 0 { i as f64 } else { (i % 3) as f64 });
    let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
    let t = fit_tree(
        x.view(),
        &y,
        None,
        &TreeParams {
            max_depth: Some(1),
            ..Default::default()
        },
    )
    .unwrap();
    let model = Model::Tree(t);
    let ens = TreeEnsemble::from_model(&model).unwrap();
    for i in 0..20 {
        let e = tree_shap(&ens, &[i as f64, 1.0]).unwrap();
        assert_eq!(e.phi[1], 0.0);
    }
}

#[test]
fn symmetric_features_share_credit() {
    // y = x0 AND x1 on a balanced grid; the two features are interchangeable.
    let rows: Vec<[f64; 2]> = (0..40).map(|i| [(i % 2) as f64, ((i / 2) % 2) as f64]).collect();
    let x = Array2::from_shape_fn((40, 2), |(i, j)| rows[i][j]);
    let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] == 1.0 && r[1] == 1.0)).collect();
    let model = Model::Tree(fit_tree(x.view(), &y, None, &TreeParams::default()).unwrap());
    let ens = TreeEnsemble::from_model(&model).unwrap();
    let e = tree_shap(&ens, &[1.0, 1.0]).unwrap();
    assert!((e.phi[0] - e.phi[1]).abs() < 1e-12);
    assert!((e.phi[0] - 0.375).abs() < 1e-12, "{:?}", e.phi);
}

#[test]
fn non_tree_models_are_rejected() {
    let x = Array2::from_shape_fn((10, 2), |(i, j)| (i + j) as f64);
    let y: Vec<u8> = (0..10).map(|i| u8::from(i > 4)).collect();
    let m = flowlens::models::fit_model(
        flowlens::models::ModelKind::Logreg,
        &Default::default(),
        x.view(),
        &y,
        0,
    )
    .unwrap();
    assert!(TreeEnsemble::from_model(&m.model).is_err());
}

#[test]
fn waterfall_reaches_model_output() {
    let (model, d) = random_model(2);
    let ens = TreeEnsemble::from_model(&model).unwrap();
    let names: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let e = tree_shap(&ens, &probe(&mut rng, d)).unwrap();
    let w = waterfall(&e, &names, &[0.74, 0.5, 0.99], true).unwrap();
    assert!((w.base + w.steps_sum() - w.final_value).abs() < 1e-9);
    assert_eq!(w.thresholds, vec![0.5, 0.74, 0.99]);
    for pair in w.steps.windows(2) {
        assert!(pair[0].phi.abs() >= pair[1].phi.abs());
    }
    let json: serde_json::Value = serde_json::from_str(&w.to_json()).unwrap();
    assert_eq!(json["thresholds"][0], 0.5);
    assert_eq!(json["output_space"], "margin");
}

#[test]
fn global_ranking_is_sorted() {
    let (model, d) = random_model(1);
    let ens = TreeEnsemble::from_model(&model).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Array2::from_shape_fn((50, d), |_| rng.gen_range(0.0..4.0));
    let exps = explain_rows(&ens, x.view()).unwrap();
    let names: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
    let g = global_importance(&exps, &names).unwrap();
    for pair in g.ranking.windows(2) {
        assert!(g.mean_abs[pair[0]] >= g.mean_abs[pair[1]]);
    }
    assert_eq!(g.rank_of(g.ranking[0]), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn additivity_holds(seed in 0u64..10_000, probe_seed in any::<u64>()) {
        let (model, d) = random_model(seed);
        let ens = TreeEnsemble::from_model(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(probe_seed);
        let x = probe(&mut rng, d);
        let e = tree_shap(&ens, &x).unwrap();
        prop_assert!(e.additivity_error() <= 1e-9);
        prop_assert!((e.model_output - ens.raw_score(&x)).abs() <= 1e-12);
    }

    #[test]
    fn base_value_does_not_depend_on_instance(seed in 0u64..10_000, a in any::<u64>(), b in any::<u64>()) {
        let (model, d) = random_model(seed);
        let ens = TreeEnsemble::from_model(&model).unwrap();
        let ea = tree_shap(&ens, &probe(&mut ChaCha8Rng::seed_from_u64(a), d)).unwrap();
        let eb = tree_shap(&ens, &probe(&mut ChaCha8Rng::seed_from_u64(b), d)).unwrap();
        prop_assert!((ea.base_value - eb.base_value).abs() <= 1e-12);
    }
}
