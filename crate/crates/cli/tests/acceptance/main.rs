//! Acceptance run: one PASS/FAIL/SKIP line per criterion, non-zero exit on
//! any FAIL. Criterion 5 needs the real corpus under `PTBXL_ROOT`.

mod oracle;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ecgnet_cli::commands::{self, Dataset};
use ecgnet_cli::synth::{make_synthetic, SynthConfig};
use ecgnet_cli::{EvalSplit, RunConfig};
use ecgnet_core::data::wfdb::{encode_format16, parse_raw_samples, write_wfdb_header, SignalSpec};
use ecgnet_core::data::{
    augment, check_patient_disjoint, fit_standardization, parse_wfdb_header, parse_wfdb_signal, partition_folds,
    split_by_fold, AugmentConfig, MemorySource, RecordMeta, WfdbHeader,
};
use ecgnet_core::gradcheck::{kernel_suite, tiny_model_check, GradCheckConfig};
use ecgnet_core::metrics::{evaluate, spearman, PredictionSet};
use ecgnet_core::model::{preset, presets};
use ecgnet_core::reporting::{regression_against_anchors, PublishedAnchors, RegressionConfig};
use ecgnet_core::training::{EarlyStopping, TrainConfig, TrainLog};
use ecgnet_core::{build, Error, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Skip(String),
}

type Outcome = Result<Verdict, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

// ---------------------------------------------------------------- 1

fn gradients() -> Outcome {
    let start = Instant::now();
    let kernels = kernel_suite(20, 2024, &GradCheckConfig::with_rtol(1e-4)).map_err(|e| e.to_string())?;
    let mut worst = 0f64;
    for k in &kernels {
        ensure!(k.cases >= 20, "{} ran only {} cases", k.kernel, k.cases);
        ensure!(k.passed(), "{}: {}/{} cases, worst {:.2e} at {}", k.kernel, k.passed_cases, k.cases, k.max_rel_error, k.worst);
        worst = worst.max(k.max_rel_error);
    }
    let model = tiny_model_check(2024, &GradCheckConfig::with_rtol(1e-3), None).map_err(|e| e.to_string())?;
    ensure!(model.passed(), "tiny model: {:?}", model.failures().iter().map(|t| &t.name).collect::<Vec<_>>());
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {}", secs(elapsed));
    Ok(Verdict::Pass(format!(
        "{} kernels x 20 cases, max rel err {:.1e} (rtol 1e-4); tiny model {} tensors, max {:.1e} (rtol 1e-3); {}",
        kernels.len(),
        worst,
        model.tensors.len(),
        model.max_rel_error(),
        secs(elapsed)
    )))
}

// ---------------------------------------------------------------- 2

fn architecture() -> Outcome {
    let model = |name: &str| build::<f32>(&preset(name).unwrap(), 0).unwrap();
    let shape = |trace: &[(String, Vec<usize>)], layer: &str| -> Vec<usize> {
        trace.iter().find(|(n, _)| n == layer).map(|(_, s)| s.clone()).unwrap_or_default()
    };
    let cnn = model("CNN");
    let trace = cnn.shape_trace(2).map_err(|e| e.to_string())?;
    for (layer, want) in [
        ("conv1d_1", vec![2, 1000, 64]),
        ("pool_1", vec![2, 500, 64]),
        ("pool_2", vec![2, 250, 128]),
        ("pool_3", vec![2, 125, 256]),
        ("gap", vec![2, 256]),
        ("output_sigmoid", vec![2, 23]),
    ] {
        ensure!(shape(&trace, layer) == want, "CNN {layer}: {:?} != {want:?}", shape(&trace, layer));
    }
    let bi = model("BiLSTM").shape_trace(1).map_err(|e| e.to_string())?;
    ensure!(shape(&bi, "bilstm_1") == [1, 125, 256], "bilstm_1 {:?}", shape(&bi, "bilstm_1"));
    ensure!(shape(&bi, "gap") == [1, 256], "BiLSTM gap {:?}", shape(&bi, "gap"));

    let counts = cnn.count_parameters();
    for (layer, want) in [
        ("conv1d_1", 11_584),
        ("conv1d_2", 82_048),
        ("conv1d_3", 164_096),
        ("dense_1", 131_584),
        ("dense_2", 131_328),
    ] {
        ensure!(counts.layer(layer) == Some(want), "CNN {layer}: {:?} != {want}", counts.layer(layer));
    }
    ensure!(counts.recurrent() == 0, "CNN has {} recurrent parameters", counts.recurrent());
    let lstm = model("LSTM").count_parameters();
    ensure!(lstm.layer("lstm_1") == Some(197_120), "lstm_1 {:?}", lstm.layer("lstm_1"));
    let stacked = model("LSTM+BiLSTM").count_parameters();
    ensure!(stacked.layer("bilstm_2") == Some(263_168), "bilstm_2 {:?}", stacked.layer("bilstm_2"));
    for (name, spec) in presets() {
        let m = build::<f32>(&spec, 1).map_err(|e| e.to_string())?;
        ensure!(m.count_parameters().recurrent() == 0 || name != "CNN", "CNN has recurrent layers");
    }
    Ok(Verdict::Pass(
        "shapes 1000x64 -> 125x256 -> 256 -> 23; conv1d_1 11,584 = 15*12*64+64 (published table prints 11,264); other layers match; CNN has 0 recurrent parameters".into(),
    ))
}

// ---------------------------------------------------------------- 3

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn metrics_case(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.random_range(1..=500);
    let k = 23;
    let coarse = rng.random_bool(0.5);
    let prevalence = rng.random_range(0.0..0.6);
    let scores: Vec<f64> = (0..n * k)
        .map(|_| if coarse { rng.random_range(0..=10) as f64 / 10.0 } else { rng.random::<f64>() })
        .collect();
    let labels: Vec<u8> = (0..n * k).map(|_| rng.random_bool(prevalence) as u8).collect();
    let names: Vec<String> = (0..k).map(|c| format!("C{c}")).collect();
    let want = oracle::expected(&scores, &labels, n, k);
    let preds = PredictionSet::new(scores, labels, names).map_err(|e| e.to_string())?;
    let got = match evaluate(&preds) {
        Ok(r) => r,
        Err(Error::UndefinedMetric(_)) if want.macro_auroc.is_none() => return Ok(()),
        Err(e) => return Err(format!("n={n}: {e}")),
    };
    for (name, g, w) in [
        ("hamming_loss", got.hamming_loss, want.hamming_loss),
        ("subset_accuracy", got.subset_accuracy, want.subset_accuracy),
        ("macro_precision", got.macro_precision, want.macro_precision),
        ("macro_recall", got.macro_recall, want.macro_recall),
        ("macro_f1", got.macro_f1, want.macro_f1),
        ("macro_balanced_accuracy", got.macro_balanced_accuracy, want.macro_balanced_accuracy),
        ("micro_precision", got.micro_precision, want.micro_precision),
        ("micro_recall", got.micro_recall, want.micro_recall),
        ("micro_f1", got.micro_f1, want.micro_f1),
        ("weighted_precision", got.weighted_precision, want.weighted_precision),
        ("weighted_recall", got.weighted_recall, want.weighted_recall),
        ("weighted_f1", got.weighted_f1, want.weighted_f1),
        ("label_accuracy", got.label_accuracy, 1.0 - want.hamming_loss),
    ] {
        ensure!(g == w, "n={n} {name}: {g} vs {w}");
    }
    for (c, row) in got.per_class.iter().enumerate() {
        ensure!([row.tp, row.fp, row.fn_, row.tn] == want.counts[c], "n={n} class {c} confusion counts");
        ensure!(row.f1 == want.class_f1[c], "n={n} class {c} F1 {} vs {}", row.f1, want.class_f1[c]);
        match (row.auroc, want.class_auroc[c]) {
            (Some(g), Some(w)) => ensure!(close(g, w, 1e-12), "n={n} class {c} AUROC {g} vs {w}"),
            (None, None) => {}
            (g, w) => return Err(format!("n={n} class {c} AUROC definedness {g:?} vs {w:?}")),
        }
    }
    let auroc = want.macro_auroc.unwrap_or(f64::NAN);
    let auprc = want.macro_auprc.unwrap_or(f64::NAN);
    ensure!(close(got.macro_auroc, auroc, 1e-12), "n={n} macro_auroc: {} vs {auroc}", got.macro_auroc);
    ensure!(close(got.macro_auprc, auprc, 1e-12), "n={n} macro_auprc: {} vs {auprc}", got.macro_auprc);
    if let Some(rho) = oracle::spearman(&want.class_f1, &want.class_prevalence) {
        let lib = spearman(&want.class_f1, &want.class_prevalence).map_err(|e| e.to_string())?;
        ensure!(close(lib.rho, rho, 1e-12), "n={n} spearman: {} vs {rho}", lib.rho);
    }
    Ok(())
}

fn metrics() -> Outcome {
    let start = Instant::now();
    let names = vec!["A".to_string()];
    let hand = PredictionSet::new(vec![0.9, 0.8, 0.3, 0.2], vec![1, 0, 1, 0], names).map_err(|e| e.to_string())?;
    let r = evaluate(&hand).map_err(|e| e.to_string())?;
    ensure!(r.macro_auroc == 0.75, "hand AUROC {}", r.macro_auroc);
    let two = vec!["A".to_string(), "B".to_string()];
    let hand = PredictionSet::new(vec![1.0, 1.0, 0.0, 1.0], vec![1, 0, 0, 1], two).map_err(|e| e.to_string())?;
    let r = evaluate(&hand).map_err(|e| e.to_string())?;
    ensure!(r.hamming_loss == 0.25 && r.subset_accuracy == 0.5, "hand Hamming {} subset {}", r.hamming_loss, r.subset_accuracy);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        metrics_case(&mut rng)?;
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {}", secs(elapsed));
    Ok(Verdict::Pass(format!(
        "1,000 random sets (N<=500, K=23) match brute force; threshold metrics and counts exact, AUROC/AUPRC/Spearman within 1e-12; {}",
        secs(elapsed)
    )))
}

// ---------------------------------------------------------------- 4

fn random_header(rng: &mut ChaCha8Rng) -> WfdbHeader {
    let n_signals = rng.random_range(1..=12);
    let signals = (0..n_signals)
        .map(|i| {
            let gain = [200.0, 1000.0, 1234.5][rng.random_range(0..3)];
            SignalSpec::format16("rec.dat", gain, &format!("L{i}"))
        })
        .collect();
    WfdbHeader {
        record_name: "rec".into(),
        n_signals,
        sampling_rate: [100.0, 500.0][rng.random_range(0..2)],
        n_samples: rng.random_range(1..=64),
        signals,
    }
}

fn wfdb() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..10_000 {
        let header = random_header(&mut rng);
        let cells = header.n_signals * header.n_samples;
        let raw: Vec<i16> = (0..cells)
            .map(|j| match j % 17 {
                0 => 32767,
                1 => -32767,
                _ => rng.random_range(-32767..=32767),
            })
            .collect();
        let parsed = parse_wfdb_header(write_wfdb_header(&header).as_bytes()).map_err(|e| format!("record {i}: {e}"))?;
        ensure!(parsed == header, "record {i}: header changed in round trip");
        let bytes = encode_format16(&raw);
        let back = parse_raw_samples(&bytes, &parsed).map_err(|e| format!("record {i}: {e}"))?;
        ensure!(back == raw, "record {i}: samples changed in round trip");
        let phys = parse_wfdb_signal(&bytes, &parsed).map_err(|e| format!("record {i}: {e}"))?;
        for (j, (&p, &r)) in phys.iter().zip(&raw).enumerate() {
            let gain = parsed.signals[j % parsed.n_signals].gain;
            ensure!(p == (r as f64 / gain) as f32, "record {i} sample {j}: {p} from {r}");
        }
        if bytes.len() > 1 {
            let cut = rng.random_range(0..bytes.len());
            let short = parse_raw_samples(&bytes[..cut], &parsed);
            ensure!(matches!(short, Err(Error::Truncation { .. })), "record {i}: cut at {cut} gave {short:?}");
        }
        let junk: Vec<u8> = (0..rng.random_range(0..120)).map(|_| rng.random_range(b' '..=b'~')).collect();
        let outcome = catch_unwind(|| parse_wfdb_header(&junk));
        ensure!(outcome.is_ok(), "header parser panicked on {:?}", String::from_utf8_lossy(&junk));
    }
    Ok(Verdict::Pass(
        "10,000 random records round-trip bit-exactly (incl. +/-32767); truncation and malformed headers give typed errors".into(),
    ))
}

// ---------------------------------------------------------------- 5

fn corpus() -> Outcome {
    let Some(root) = std::env::var_os("PTBXL_ROOT") else {
        return Ok(Verdict::Skip("PTBXL_ROOT not set; the PTB-XL corpus is not available here".into()));
    };
    let start = Instant::now();
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        data_root: Some(root.into()),
        out: out.path().to_path_buf(),
        ..RunConfig::default()
    };
    let prep = commands::prepare(&cfg).map_err(|e| format!("{e:#}"))?;
    let r = &prep.report;
    let s = &r.summary;
    ensure!(s.records == 21_799, "{} records", s.records);
    ensure!(
        (r.train_records, r.val_records, r.test_records) == (17_418, 2_183, 2_198),
        "splits {}/{}/{}",
        r.train_records,
        r.val_records,
        r.test_records
    );
    let count = |name: &str| s.classes.iter().find(|c| c.class == name).map(|c| c.count).unwrap_or(0) as f64;
    ensure!((count("NORM") - 9514.0).abs() <= 95.14, "NORM {}", count("NORM"));
    ensure!((count("PMI") - 17.0).abs() <= 0.17, "PMI {}", count("PMI"));
    ensure!((s.mean_labels_per_record - 1.39).abs() <= 0.01, "mean labels {}", s.mean_labels_per_record);
    ensure!((s.multi_label_fraction - 0.286).abs() <= 0.005, "multi-label {}", s.multi_label_fraction);
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(600), "took {}", secs(elapsed));
    Ok(Verdict::Pass(format!("21,799 records, 17,418/2,183/2,198 split, prevalences match; {}", secs(elapsed))))
}

// ---------------------------------------------------------------- 6

fn smoke_config(root: &Path, out: &Path, name: &str, max_epochs: usize) -> RunConfig {
    RunConfig {
        data_root: Some(root.to_path_buf()),
        out: out.join(format!("{name}-{max_epochs}")),
        preset: name.to_string(),
        seed: 0,
        train: TrainConfig {
            max_epochs,
            early_stop_patience: 4,
            ..TrainConfig::default()
        },
        ..RunConfig::default()
    }
}

fn smoke_run(data: &Dataset, cfg: &RunConfig) -> Result<(TrainLog, Duration), String> {
    let start = Instant::now();
    let out = commands::train_on(cfg, data, &cfg.out).map_err(|e| format!("{e:#}"))?;
    Ok((out.log, start.elapsed()))
}

fn loss_wobbles(log: &TrainLog) -> usize {
    let first: Vec<f64> = log.epochs.iter().take(5).map(|e| e.train_loss).collect();
    first.windows(2).filter(|w| w[1] > w[0]).count()
}

fn learning() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().join("data");
    make_synthetic(&root, &SynthConfig::default()).map_err(|e| format!("{e:#}"))?;
    let base = smoke_config(&root, dir.path(), "CNN", 20);
    let data = commands::open_dataset(&base).map_err(|e| format!("{e:#}"))?;

    let mut notes = Vec::new();
    for name in ["CNN", "BiLSTM"] {
        let cfg = smoke_config(&root, dir.path(), name, 20);
        let (log, took) = smoke_run(&data, &cfg)?;
        ensure!(log.epochs.len() >= 5, "{name}: only {} epochs", log.epochs.len());
        ensure!(log.best_val_macro_auroc >= 0.95, "{name}: validation macro AUROC {:.4}", log.best_val_macro_auroc);
        ensure!(took < Duration::from_secs(300), "{name}: took {}", secs(took));
        let wobbles = loss_wobbles(&log);
        ensure!(wobbles <= 1, "{name}: training loss rose {wobbles} times in the first 5 epochs");

        // The saved checkpoint is the best epoch's snapshot.
        let eval_cfg = RunConfig { split: EvalSplit::Val, ..cfg.clone() };
        let eval = commands::evaluate_on(&eval_cfg, &data, &cfg.out.join("model.ckpt"), &cfg.out)
            .map_err(|e| format!("{e:#}"))?;
        ensure!(
            (eval.report.macro_auroc - log.best_val_macro_auroc).abs() <= 1e-9,
            "{name}: checkpoint validation AUROC {} vs logged best {}",
            eval.report.macro_auroc,
            log.best_val_macro_auroc
        );

        // Same seed, same log: a full rerun for CNN, the first two epochs for BiLSTM.
        let repeat_epochs = if name == "CNN" { 20 } else { 2 };
        let (again, _) = smoke_run(&data, &smoke_config(&root, dir.path(), name, repeat_epochs))?;
        let (a, b) = (log.without_timing(), again.without_timing());
        if name == "CNN" {
            ensure!(a == b, "{name}: rerun with the same seed produced a different log");
        } else {
            ensure!(a.epochs[..2] == b.epochs[..], "{name}: rerun diverged within two epochs");
        }
        notes.push(format!(
            "{name} AUROC {:.4} at epoch {}/{} in {}",
            log.best_val_macro_auroc,
            log.best_epoch,
            log.epochs.len(),
            secs(took)
        ));
    }
    Ok(Verdict::Pass(format!("{}; reruns identical", notes.join("; "))))
}

// ---------------------------------------------------------------- 7

fn toy_records(rng: &mut ChaCha8Rng, n: u32) -> Vec<RecordMeta> {
    (0..n)
        .map(|i| RecordMeta {
            ecg_id: i,
            patient_id: rng.random_range(0..(n as u64 / 3).max(1)),
            fold: 0,
            labels: vec![1],
            filename: String::new(),
        })
        .collect()
}

fn assign_patient_folds(recs: &mut [RecordMeta], rng: &mut ChaCha8Rng) {
    let mut fold_of = std::collections::HashMap::new();
    for r in recs {
        r.fold = *fold_of.entry(r.patient_id).or_insert_with(|| rng.random_range(1..=10));
    }
}

fn protocol() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // Standardisation: poisoning every held-out signal leaves the fit unchanged.
    let mut recs = toy_records(&mut rng, 200);
    assign_patient_folds(&mut recs, &mut rng);
    let mut src = MemorySource::new(20, 2);
    for r in &recs {
        src.insert(r.ecg_id, (0..40).map(|_| rng.random_range(-2.0f32..2.0)).collect()).map_err(|e| e.to_string())?;
    }
    let split = split_by_fold(&recs).map_err(|e| e.to_string())?;
    let stats = fit_standardization(&split.train, &src).map_err(|e| e.to_string())?;
    let mut poisoned = src.clone();
    for r in split.val.iter().chain(&split.test) {
        poisoned.insert(r.ecg_id, vec![f32::NAN; 40]).map_err(|e| e.to_string())?;
    }
    let refit = fit_standardization(&split.train, &poisoned).map_err(|e| e.to_string())?;
    ensure!(refit == stats, "held-out signals changed the standardisation statistics");

    // Fold partitions: exact and patient-disjoint.
    for case in 0..200 {
        let n = rng.random_range(0..300);
        let mut recs = toy_records(&mut rng, n);
        assign_patient_folds(&mut recs, &mut rng);
        let split = split_by_fold(&recs).map_err(|e| e.to_string())?;
        let in_folds = |lo: u8, hi: u8| recs.iter().filter(|r| (lo..=hi).contains(&r.fold)).count();
        ensure!(split.train.len() == in_folds(1, 8), "case {case}: train size");
        ensure!(split.val.len() == in_folds(9, 9), "case {case}: validation size");
        ensure!(split.test.len() == in_folds(10, 10), "case {case}: test size");
        ensure!(split.train.records().iter().all(|r| r.fold <= 8), "case {case}: train folds");
        ensure!(split.val.iter().all(|r| r.fold == 9) && split.test.iter().all(|r| r.fold == 10), "case {case}: held-out folds");
        check_patient_disjoint(&[("train", split.train.records()), ("val", &split.val), ("test", &split.test)])
            .map_err(|e| format!("case {case}: {e}"))?;
        let (train, val) = partition_folds(&recs, &[1, 2, 3, 4, 5, 6, 7], &[8, 9]).map_err(|e| e.to_string())?;
        ensure!(train.len() + val.len() == in_folds(1, 9), "case {case}: regrouped sizes");
    }

    // Early stopping keeps the maximum and stops after `patience` flat epochs.
    let mut es = EarlyStopping::new(3);
    let mut stopped_at = None;
    for (i, &v) in [0.7, 0.8, 0.79, 0.78, 0.77].iter().enumerate() {
        if es.observe(i + 1, v).stop {
            stopped_at = Some(i + 1);
            break;
        }
    }
    ensure!(stopped_at == Some(5) && es.best() == Some((2, 0.8)), "scripted run: stop {stopped_at:?}, best {:?}", es.best());
    for _ in 0..500 {
        let patience = rng.random_range(1..6);
        let seq: Vec<f64> = (0..rng.random_range(1..40)).map(|_| rng.random::<f64>()).collect();
        let mut es = EarlyStopping::new(patience);
        let mut seen = Vec::new();
        for (i, &v) in seq.iter().enumerate() {
            seen.push(v);
            let stop = es.observe(i + 1, v).stop;
            let max = seen.iter().cloned().fold(f64::MIN, f64::max);
            let first_max = seen.iter().position(|&x| x == max).unwrap() + 1;
            ensure!(es.best() == Some((first_max, max)), "best {:?} vs ({first_max}, {max})", es.best());
            ensure!(stop == (seen.len() - first_max >= patience), "stop decision at epoch {}", i + 1);
            if stop {
                break;
            }
        }
    }

    // Augmentation never touches inference inputs.
    let cfg = AugmentConfig {
        probability: 1.0,
        ..AugmentConfig::default()
    };
    for _ in 0..200 {
        let x: Vec<f32> = (0..120).map(|_| rng.random_range(-5.0f32..5.0)).collect();
        let mut y = x.clone();
        augment(&mut y, &cfg, &mut rng, Mode::Infer).map_err(|e| e.to_string())?;
        ensure!(x.iter().zip(&y).all(|(a, b)| a.to_bits() == b.to_bits()), "inference input was perturbed");
    }
    Ok(Verdict::Pass(
        "held-out NaN poisoning leaves standardisation unchanged; 200 random fold partitions exact and patient-disjoint; early stopping stops at 5 with best 2 and matches 500 random sequences; inference augmentation is the identity".into(),
    ))
}

// ---------------------------------------------------------------- 8

fn anchors() -> Outcome {
    let a = PublishedAnchors::bundled();
    let value = |m: &str, k: &str| a.value(m, k).map_err(|e| e.to_string());
    ensure!(value("BiLSTM", "hamming_loss")? == 0.0338, "BiLSTM hamming_loss");
    ensure!(value("BiLSTM", "macro_auroc")? == 0.9202, "BiLSTM macro_auroc");
    ensure!(value("CNN", "macro_precision")? == 0.5630, "CNN macro_precision");
    ensure!(a.models.len() == 6, "{} anchored models", a.models.len());

    let cfg = RegressionConfig::default();
    ensure!(cfg.tolerance == 0.02, "default tolerance {}", cfg.tolerance);
    for m in &a.models {
        let observed = m.metrics.iter().map(|(k, v)| (k.clone(), v.value)).collect();
        let table = regression_against_anchors(&observed, &a, &m.model, &cfg).map_err(|e| e.to_string())?;
        ensure!(table.passed() && table.rows.iter().all(|r| r.deviation == 0.0), "{}: self-comparison deviates", m.model);
    }
    let bilstm = a.model("BiLSTM").map_err(|e| e.to_string())?;
    let mut observed: std::collections::BTreeMap<String, f64> =
        bilstm.metrics.iter().map(|(k, v)| (k.clone(), v.value)).collect();
    *observed.get_mut("macro_f1").ok_or("no macro_f1 anchor")? += 0.01;
    let tight = regression_against_anchors(&observed, &a, "BiLSTM", &RegressionConfig::with_tolerance(0.005))
        .map_err(|e| e.to_string())?;
    let failed: Vec<&str> = tight.failures().iter().map(|d| d.metric.as_str()).collect();
    ensure!(failed == ["macro_f1"], "perturbed table flagged {failed:?}");
    Ok(Verdict::Pass(
        "optional: published values bundled for 6 models, regression check flags a +0.01 shift at tolerance 0.005; full-corpus reproduction not run here".into(),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("gradient correctness", gradients),
        ("architecture shapes and parameter counts", architecture),
        ("metrics against brute-force oracles", metrics),
        ("WFDB round trip and malformed input", wfdb),
        ("PTB-XL corpus statistics", corpus),
        ("synthetic learning smoke test", learning),
        ("evaluation protocol and leakage guards", protocol),
        ("published-results regression check", anchors),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let line = match outcome {
            Ok(Verdict::Pass(d)) => format!("PASS  {d}"),
            Ok(Verdict::Skip(d)) => format!("SKIP  {d}"),
            Err(d) => {
                failed += 1;
                format!("FAIL  {d}")
            }
        };
        println!("criterion {n} [{title}]: {line}");
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
