use flowlens::eval::{
    accuracy, auc, auc_ci, format_ci, format_metric, hanley_mcneil_se, roc_curve, CiMethod, ComparisonTable,
    COMPARISON_HEADER,
};
use proptest::prelude::*;

/// P(score+ > score-) + 0.5 P(tie) by counting every pair.
fn mann_whitney(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Scores with ties drawn from a small grid, and labels with both classes.
fn scored_sample() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..200).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..12, n).prop_map(|v| v.into_iter().map(|s| f64::from(s) / 11.0).collect()),
            prop::collection::vec(0u8..2, n),
        )
            .prop_filter("both classes", |(_, y)| y.contains(&0) && y.contains(&1))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn trapezoid_equals_pair_counting((s, y) in scored_sample()) {
        let roc = roc_curve(&s, &y).unwrap();
        let oracle = mann_whitney(&s, &y);
        prop_assert!((roc.trapezoid_area() - oracle).abs() <= 1e-12);
        prop_assert!((auc(&s, &y).unwrap() - oracle).abs() <= 1e-12);
    }

    #[test]
    fn roc_is_monotone_and_anchored((s, y) in scored_sample()) {
        let roc = roc_curve(&s, &y).unwrap();
        let first = roc.points.first().unwrap();
        let last = roc.points.last().unwrap();
        prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in roc.points.windows(2) {
            prop_assert!(w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr);
            prop_assert!(w[0].threshold > w[1].threshold);
        }
    }

    #[test]
    fn monotone_transform_keeps_auc((s, y) in scored_sample()) {
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert!((auc(&s, &y).unwrap() - auc(&t, &y).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn flipping_labels_mirrors_auc((s, y) in scored_sample()) {
        let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        prop_assert!((auc(&s, &y).unwrap() + auc(&s, &flipped).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn intervals_contain_value((s, y) in scored_sample(), level in 0.5f64..0.99) {
        let e = auc_ci(&s, &y, level, CiMethod::HanleyMcneil, 1).unwrap();
        prop_assert!(0.0 <= e.ci_low && e.ci_low <= e.value && e.value <= e.ci_high && e.ci_high <= 1.0);
    }
}

#[test]
fn bootstrap_interval_is_seeded_and_contains_value() {
    let s: Vec<f64> = (0..60).map(|i| ((i * 37) % 17) as f64).collect();
    let y: Vec<u8> = (0..60).map(|i| u8::from(i % 3 == 0)).collect();
    let a = auc_ci(&s, &y, 0.95, CiMethod::Bootstrap, 11).unwrap();
    let b = auc_ci(&s, &y, 0.95, CiMethod::Bootstrap, 11).unwrap();
    assert_eq!(a, b);
    assert!(a.ci_low <= a.value && a.value <= a.ci_high);
}

#[test]
fn hanley_mcneil_against_hand_formula() {
    // A = 0.8, 10 positives, 20 negatives.
    let (a, p, n) = (0.8f64, 10.0, 20.0);
    let q1 = a / (2.0 - a);
    let q2 = 2.0 * a * a / (1.0 + a);
    let var = (a * (1.0 - a) + (p - 1.0) * (q1 - a * a) + (n - 1.0) * (q2 - a * a)) / (p * n);
    assert!((hanley_mcneil_se(a, 10, 20) - var.sqrt()).abs() < 1e-15);
}

#[test]
fn perfect_separation_renders_degenerate_interval() {
    let s = [0.1, 0.2, 0.3, 0.7, 0.8, 0.9];
    let y = [0, 0, 0, 1, 1, 1];
    let e = auc_ci(&s, &y, 0.95, CiMethod::HanleyMcneil, 0).unwrap();
    assert_eq!(format_metric(e.value), "1");
    assert_eq!(format_ci(e.ci_low, e.ci_high), "[1.000-1.000]");
}

#[test]
fn rendering_matches_table_style() {
    assert_eq!(format_metric(0.9), "0.9");
    assert_eq!(format_metric(0.547160), "0.54716");
    assert_eq!(format_metric(0.617531), "0.617531");
    assert_eq!(format_ci(0.540, 0.695), "[0.540-0.695]");
    assert_eq!(ComparisonTable::header(), COMPARISON_HEADER.join(","));
}

#[test]
fn accuracy_counts_matches() {
    assert_eq!(accuracy(&[1, 0, 1, 1], &[1, 0, 0, 1]).unwrap(), 0.75);
    assert!(accuracy(&[], &[]).is_err());
}

#[test]
fn single_class_is_an_error() {
    assert!(roc_curve(&[0.1, 0.2], &[1, 1]).is_err());
    assert!(auc(&[0.1, f64::NAN], &[0, 1]).is_err());
}
