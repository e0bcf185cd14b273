use std::collections::BTreeMap;

use ecgnet_core::metrics::AGGREGATE_COLUMNS;
use ecgnet_core::reporting::*;
use proptest::prelude::*;

/// Independent transcription of the published comparison rows, column order
/// as in `AGGREGATE_COLUMNS`.
const PUBLISHED: [(&str, [f64; 11]); 6] = [
    ("GRU+BiLSTM+LSTM", [0.0354, 0.9080, 0.4409, 0.3496, 0.4766, 0.3182, 0.6509, 0.6754, 0.7498, 0.6144, 0.5487]),
    ("GRU", [0.0348, 0.9195, 0.4598, 0.3755, 0.4611, 0.3435, 0.6632, 0.6864, 0.7466, 0.6351, 0.5537]),
    ("LSTM+BiLSTM", [0.0344, 0.9166, 0.4711, 0.3998, 0.5419, 0.3618, 0.6723, 0.6913, 0.7491, 0.6417, 0.5605]),
    ("BiLSTM", [0.0338, 0.9202, 0.4715, 0.3908, 0.5505, 0.3496, 0.6663, 0.6979, 0.7535, 0.6500, 0.5723]),
    ("LSTM", [0.0347, 0.9231, 0.4571, 0.3698, 0.5392, 0.3310, 0.6567, 0.6886, 0.7473, 0.6384, 0.5605]),
    ("CNN", [0.0340, 0.9204, 0.4721, 0.3841, 0.5630, 0.3439, 0.6635, 0.6944, 0.7543, 0.6434, 0.5664]),
];

fn observed(model: &str) -> BTreeMap<String, f64> {
    let row = PUBLISHED.iter().find(|(m, _)| *m == model).unwrap().1;
    AGGREGATE_COLUMNS.iter().zip(row).map(|(c, v)| (c.to_string(), v)).collect()
}

#[test]
fn bundled_file_matches_independent_transcription() {
    let a = PublishedAnchors::bundled();
    for (model, row) in PUBLISHED {
        for (c, v) in AGGREGATE_COLUMNS.iter().zip(row) {
            assert_eq!(a.value(model, c).unwrap(), v, "{model} {c}");
            assert!(!a.model(model).unwrap().metrics[*c].source.is_empty());
        }
    }
    let pc = &a.per_class;
    assert_eq!(pc.mean_auroc.value, 0.920);
    assert_eq!(pc.class_auroc["IVCD"].value, 0.725);
    assert_eq!(pc.class_auroc["LAO/LAE"].value, 0.807);
    assert_eq!(pc.spearman_prevalence_f1.value, 0.963);
    assert_eq!(pc.auroc_above.classes, ["CRBBB", "AMI", "CLBBB"]);
}

#[test]
fn published_rows_give_expected_leaders() {
    let c = compare_reports(&PublishedAnchors::bundled().as_scores()).unwrap();
    assert_eq!(c.models.len(), 6);
    for m in ["hamming_loss", "micro_f1", "subset_accuracy"] {
        assert_eq!(c.best[m], vec!["BiLSTM".to_string()], "{m}");
    }
    for m in ["macro_precision", "macro_auprc"] {
        assert_eq!(c.best[m], vec!["CNN".to_string()], "{m}");
    }
    // No architecture leads on every metric.
    assert!(c.wins.values().all(|&w| w < AGGREGATE_COLUMNS.len()));
}

#[test]
fn anchors_against_themselves_deviate_by_zero() {
    let a = PublishedAnchors::bundled();
    let t = regression_against_anchors(&observed("BiLSTM"), &a, "BiLSTM", &RegressionConfig::default()).unwrap();
    assert!(t.passed());
    assert!(t.rows.iter().all(|r| r.deviation == 0.0));
    let hamming = t.rows.iter().find(|r| r.metric == "hamming_loss").unwrap();
    assert_eq!(hamming.anchor, 0.0338);
}

#[test]
fn single_perturbation_fails_exactly_once() {
    let a = PublishedAnchors::bundled();
    let mut obs = observed("CNN");
    *obs.get_mut("macro_f1").unwrap() += 0.01;
    let t = regression_against_anchors(&obs, &a, "CNN", &RegressionConfig::with_tolerance(0.005)).unwrap();
    let f = t.failures();
    assert_eq!(f.len(), 1);
    assert_eq!(f[0].metric, "macro_f1");
    assert!((f[0].deviation - 0.01).abs() < 1e-12);
    // Within the default tolerance the same run passes.
    assert!(regression_against_anchors(&obs, &a, "CNN", &RegressionConfig::default()).unwrap().passed());
}

#[test]
fn unknown_model_is_input_error() {
    let a = PublishedAnchors::bundled();
    let r = regression_against_anchors(&observed("CNN"), &a, "ResNet", &RegressionConfig::default());
    assert!(matches!(r, Err(ecgnet_core::Error::Input(_))));
}

proptest! {
    #[test]
    fn comparison_is_permutation_invariant(perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let scores = PublishedAnchors::bundled().as_scores();
        let shuffled: Vec<ModelScores> = perm.iter().map(|&i| scores[i].clone()).collect();
        prop_assert_eq!(compare_reports(&scores).unwrap(), compare_reports(&shuffled).unwrap());
    }
}
