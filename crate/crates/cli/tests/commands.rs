use std::path::{Path, PathBuf};
use std::process::Command;

use ecgnet_cli::commands::{self, open_dataset};
use ecgnet_cli::exit::exit_code;
use ecgnet_cli::synth::{make_synthetic, quantize, record_path, synth_record, SynthConfig};
use ecgnet_cli::{EvalSplit, RunConfig};
use ecgnet_core::data::read_record;
use ecgnet_core::metrics::AGGREGATE_COLUMNS;
use ecgnet_core::training::TrainConfig;
use tempfile::TempDir;

fn corpus(n_records: usize) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let root = dir.path().join("data");
    let cfg = SynthConfig {
        n_records,
        ..SynthConfig::default()
    };
    make_synthetic(&root, &cfg).unwrap();
    (dir, root)
}

fn run_config(root: &Path, out: &Path, epochs: usize) -> RunConfig {
    RunConfig {
        data_root: Some(root.to_path_buf()),
        out: out.to_path_buf(),
        train: TrainConfig {
            max_epochs: epochs,
            batch_size: 8,
            ..TrainConfig::default()
        },
        ..RunConfig::default()
    }
}

#[test]
fn synthetic_records_decode_to_their_quantized_signal() {
    let (_dir, root) = corpus(20);
    let cfg = SynthConfig {
        n_records: 20,
        ..SynthConfig::default()
    };
    let data = open_dataset(&run_config(&root, &root, 1)).unwrap();
    assert_eq!(data.corpus.records.len(), 20);
    for meta in &data.corpus.records {
        let (labels, signal) = synth_record(&cfg, meta.ecg_id);
        assert_eq!(meta.labels, labels, "record {}", meta.ecg_id);
        let (_, decoded) = read_record(&root.join(record_path(meta.ecg_id))).unwrap();
        let expected: Vec<f32> = quantize(&signal).iter().map(|&r| (r as f64 / 1000.0) as f32).collect();
        assert_eq!(decoded, expected, "record {}", meta.ecg_id);
    }
    // Round-robin folds: two records per fold.
    assert_eq!((data.split.train.len(), data.split.val.len(), data.split.test.len()), (16, 2, 2));
}

#[test]
fn prepare_is_idempotent() {
    let (dir, root) = corpus(40);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = commands::prepare(&run_config(&root, &a, 1)).unwrap();
    commands::prepare(&run_config(&root, &b, 1)).unwrap();
    assert_eq!(first.report.summary.records, 40);
    assert_eq!(first.report.train_records + first.report.val_records + first.report.test_records, 40);
    for file in ["label_matrix.csv", "split_manifest.csv", "prevalence.csv", "corpus_summary.json", "standardization.json"] {
        let (x, y) = (std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap());
        assert_eq!(x, y, "{file} differs between runs");
    }
    let manifest = std::fs::read_to_string(a.join("split_manifest.csv")).unwrap();
    assert_eq!(manifest.lines().next(), Some("ecg_id,patient_id,fold,split"));
    assert_eq!(manifest.lines().count(), 41);
}

#[test]
fn train_and_evaluate_are_deterministic() {
    let (dir, root) = corpus(60);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = commands::train(&run_config(&root, &a, 2)).unwrap();
    let second = commands::train(&run_config(&root, &b, 2)).unwrap();
    assert_eq!(first.log.without_timing(), second.log.without_timing());
    assert_eq!(std::fs::read(a.join("model.ckpt")).unwrap(), std::fs::read(b.join("model.ckpt")).unwrap());
    assert_eq!(first.parameters.recurrent(), 0);
    assert_eq!(first.spec.num_classes, 3);

    let cfg = run_config(&root, &a, 2);
    let one = commands::evaluate(&cfg, None).unwrap();
    let two = commands::evaluate(&cfg, None).unwrap();
    assert_eq!(one.report, two.report);
    assert_eq!(one.report.n, 6);

    let aggregate = std::fs::read_to_string(a.join("metrics_test_aggregate.csv")).unwrap();
    let header: Vec<&str> = aggregate.lines().next().unwrap().split(',').collect();
    assert_eq!(header[0], "model");
    assert_eq!(&header[1..], AGGREGATE_COLUMNS);
    let per_class = std::fs::read_to_string(a.join("metrics_test_per_class.csv")).unwrap();
    assert_eq!(per_class.lines().count(), 1 + 3);
    assert!(a.join("provenance_evaluate_test.json").exists());
}

#[test]
fn evaluate_rejects_statistics_from_another_split() {
    let (dir, root) = corpus(30);
    let out = dir.path().join("run");
    let mut cfg = run_config(&root, &out, 1);
    commands::train(&cfg).unwrap();
    let path = out.join("standardization.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["train_fingerprint"] = serde_json::Value::String("0".repeat(64));
    std::fs::write(&path, json.to_string()).unwrap();
    cfg.split = EvalSplit::Val;
    let err = commands::evaluate(&cfg, None).unwrap_err();
    assert_eq!(exit_code(&err), 4, "{err:#}");
}

#[test]
fn cross_validation_covers_five_disjoint_groups() {
    let (dir, root) = corpus(60);
    let report = commands::cross_validate(&run_config(&root, &dir.path().join("cv"), 1)).unwrap();
    assert_eq!(report.folds.len(), 5);
    let mut seen: Vec<u8> = report.folds.iter().flat_map(|f| f.val_folds.clone()).collect();
    seen.sort_unstable();
    assert_eq!(seen, (1..=9).collect::<Vec<u8>>());
    for m in AGGREGATE_COLUMNS {
        assert!(report.aggregate.contains_key(m), "{m}");
    }
    assert!(dir.path().join("cv/cv_summary.csv").exists());
}

#[test]
fn compare_with_gating_ablation_writes_twelve_rows() {
    let (dir, root) = corpus(60);
    let out = dir.path().join("cmp");
    let cfg = RunConfig {
        ablate_gating: true,
        ..run_config(&root, &out, 1)
    };
    let result = commands::compare(&cfg).unwrap();
    assert_eq!(result.variants.len(), 12);
    assert_eq!(result.variants.iter().filter(|v| !v.gating).count(), 6);
    let table = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 2 + AGGREGATE_COLUMNS.len());
    assert_eq!(lines.count(), 12);
    assert!(out.join("CNN-nogating/model.ckpt").exists());
}

#[test]
fn compare_trains_every_architecture_above_chance() {
    let (dir, root) = corpus(200);
    let out = dir.path().join("cmp");
    let result = commands::compare(&run_config(&root, &out, 2)).unwrap();
    assert_eq!(result.variants.len(), 6);
    for v in &result.variants {
        let r = v.report.as_ref().unwrap();
        let row = r.aggregate_row();
        assert_eq!(row.len(), 11);
        assert!(row.iter().all(|x| x.is_finite()), "{}: {row:?}", v.label());
        assert!(r.macro_auroc > 0.9, "{}: macro AUROC {}", v.label(), r.macro_auroc);
    }
    assert!(out.join("comparison_ranks.csv").exists());
}

fn ecgnet(args: &[&str]) -> i32 {
    let output = Command::new(env!("CARGO_BIN_EXE_ecgnet"))
        .args(args)
        .arg("--quiet")
        .env_remove("ECGNET_DATA_ROOT")
        .output()
        .unwrap();
    output.status.code().unwrap()
}

#[test]
fn exit_codes_follow_the_documented_table() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let missing = dir.path().join("nowhere");
    assert_eq!(ecgnet(&["prepare", "--out", out]), 2);
    assert_eq!(ecgnet(&["prepare", "--out", out, "--data-root", missing.to_str().unwrap()]), 3);
    assert_eq!(ecgnet(&["train", "--no-such-flag"]), 2);
    assert_eq!(ecgnet(&["synth", "--out", out, "--classes", "0"]), 2);
    assert_eq!(ecgnet(&["gradcheck", "--out", out, "--cases", "2", "--plant-fault", "dense_1"]), 7);
    assert_eq!(ecgnet(&["gradcheck", "--out", out, "--cases", "2"]), 0);
    assert_eq!(ecgnet(&["synth", "--out", out, "--records", "20"]), 0);
    assert_eq!(ecgnet(&["evaluate", "--out", out, "--data-root", out]), 3);
}
