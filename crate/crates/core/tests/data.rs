use std::sync::Arc;

use ecgnet_core::data::wfdb::{encode_format16, parse_raw_samples, ptbxl_header, write_wfdb_header};
use ecgnet_core::data::*;
use ecgnet_core::{Error, Mode};
use proptest::prelude::*;

fn valid_sample() -> impl Strategy<Value = i16> {
    prop_oneof![Just(32767i16), Just(-32767i16), Just(0i16), -32767i16..=32767]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn wfdb_round_trip_is_bit_exact(n in 1usize..12, raw in prop::collection::vec(valid_sample(), 12..=12 * 12)) {
        let n = n.min(raw.len() / 12);
        let raw = &raw[..n * 12];
        let header = ptbxl_header("rt", n, 1000.0);
        let parsed = parse_wfdb_header(write_wfdb_header(&header).as_bytes()).unwrap();
        prop_assert_eq!(&parsed, &header);
        let bytes = encode_format16(raw);
        prop_assert_eq!(parse_raw_samples(&bytes, &parsed).unwrap(), raw.to_vec());
        let mv = parse_wfdb_signal(&bytes, &parsed).unwrap();
        for (v, r) in mv.iter().zip(raw) {
            prop_assert_eq!(*v, (*r as f64 / 1000.0) as f32);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn malformed_headers_never_panic(text in "[ -~\n]{0,200}") {
        let _ = parse_wfdb_header(text.as_bytes());
    }

    #[test]
    fn truncated_or_corrupted_signals_error_cleanly(cut in 0usize..48, flip in 0usize..48, byte in any::<u8>()) {
        let header = ptbxl_header("x", 2, 1000.0);
        let mut bytes = encode_format16(&[5i16; 24]);
        bytes[flip] = byte;
        bytes.truncate(cut);
        match parse_raw_samples(&bytes, &header) {
            Err(Error::Truncation { .. }) | Err(Error::InvalidSample { .. }) => {}
            other => prop_assert!(false, "unexpected {:?}", other.map(|v| v.len())),
        }
    }

    #[test]
    fn fold_split_is_a_patient_disjoint_partition(folds in prop::collection::vec(1u8..=10, 0..200)) {
        // Patient id is derived from fold so patients never straddle folds.
        let recs: Vec<RecordMeta> = folds.iter().enumerate().map(|(i, &f)| RecordMeta {
            ecg_id: i as u32,
            patient_id: f as u64 * 1000 + (i % 7) as u64,
            fold: f,
            labels: vec![1],
            filename: String::new(),
        }).collect();
        let s = split_by_fold(&recs).unwrap();
        let mut ids: Vec<u32> = s.train.records().iter().chain(&s.val).chain(&s.test).map(|r| r.ecg_id).collect();
        ids.sort();
        prop_assert_eq!(ids, (0..recs.len() as u32).collect::<Vec<_>>());
        prop_assert!(s.train.records().iter().all(|r| r.fold <= 8));
        prop_assert!(s.val.iter().all(|r| r.fold == 9) && s.test.iter().all(|r| r.fold == 10));
    }
}

#[test]
fn invalid_sentinel_is_rejected_with_position() {
    let header = ptbxl_header("x", 2, 1000.0);
    let mut raw = [1i16; 24];
    raw[13] = i16::MIN;
    let err = parse_raw_samples(&encode_format16(&raw), &header).unwrap_err();
    assert!(matches!(err, Error::InvalidSample { frame: 1, signal: 1 }), "{err:?}");
}

fn toy_corpus(n: u32) -> (Vec<RecordMeta>, MemorySource) {
    let mut src = MemorySource::new(50, 3);
    let recs = (0..n)
        .map(|i| {
            let fold = (i % 10 + 1) as u8;
            // Validation and test records carry wildly different amplitudes.
            let amp = if fold >= 9 { 1e4 } else { 1.0 };
            src.insert(i, (0..150).map(|k| amp * ((k + i as usize) as f32 * 0.1).sin() + k as f32 % 3.0).collect())
                .unwrap();
            RecordMeta {
                ecg_id: i,
                patient_id: i as u64,
                fold,
                labels: vec![(i % 2) as u8, 1],
                filename: String::new(),
            }
        })
        .collect();
    (recs, src)
}

#[test]
fn standardization_never_sees_validation_or_test() {
    let (recs, src) = toy_corpus(60);
    let split = split_by_fold(&recs).unwrap();
    let stats = fit_standardization(&split.train, &src).unwrap();

    // Replace every held-out signal: the fitted statistics must not move.
    let mut poisoned = src.clone();
    for r in split.val.iter().chain(&split.test) {
        poisoned.insert(r.ecg_id, vec![f32::NAN; 150]).unwrap();
    }
    assert_eq!(fit_standardization(&split.train, &poisoned).unwrap(), stats);
    assert_eq!(stats.train_records(), split.train.len());
    assert_eq!(stats.train_fingerprint(), fingerprint_ids(recs.iter().filter(|r| r.fold <= 8).map(|r| r.ecg_id)));

    // Standardised training data has zero mean and unit variance per lead.
    let mut sums = [0f64; 3];
    let mut sq = [0f64; 3];
    let mut n = 0f64;
    for r in split.train.records() {
        let mut s = src.load(r).unwrap();
        stats.apply(&mut s).unwrap();
        for row in s.chunks(3) {
            for l in 0..3 {
                sums[l] += row[l] as f64;
                sq[l] += (row[l] as f64).powi(2);
            }
        }
        n += 50.0;
    }
    for l in 0..3 {
        let mean = sums[l] / n;
        assert!(mean.abs() < 1e-6, "lead {l} mean {mean}");
        assert!((sq[l] / n - mean * mean - 1.0).abs() < 1e-3);
    }
}

#[test]
fn batch_memory_high_water_mark_is_bounded() {
    let mut src = MemorySource::new(1000, 12);
    let recs: Vec<RecordMeta> = (0..1000u32)
        .map(|i| {
            src.insert(i, vec![(i % 17) as f32; 12_000]).unwrap();
            RecordMeta { ecg_id: i, patient_id: i as u64, fold: 1, labels: vec![0; 23], filename: String::new() }
        })
        .collect();
    let g = BatchGenerator::new(recs, Arc::new(src), 32)
        .unwrap()
        .shuffled(5)
        .with_mode(Mode::Train)
        .with_augment(AugmentConfig::default())
        .unwrap()
        .with_prefetch(2);
    let mut seen = 0;
    for b in g.epoch(0) {
        seen += b.unwrap().len();
    }
    assert_eq!(seen, 1000);
    let ratio = g.meter().peak() as f64 / g.batch_bytes() as f64;
    assert!(ratio < 10.0, "peak {ratio}× one batch");
    assert_eq!(g.meter().current(), 0);
}

#[test]
fn wfdb_source_reports_missing_record_id() {
    let dir = tempfile::tempdir().unwrap();
    let src: Arc<dyn SignalSource> = Arc::new(WfdbSource::ptbxl(dir.path()));
    let recs = vec![RecordMeta {
        ecg_id: 4242,
        patient_id: 1,
        fold: 1,
        labels: vec![1],
        filename: "records100/00000/04242_lr".into(),
    }];
    let g = BatchGenerator::new(recs, src, 1).unwrap();
    let err = g.epoch(0).next().unwrap().unwrap_err();
    assert!(matches!(err, Error::Record { ecg_id: 4242, .. }));
    assert!(matches!(err.root(), Error::Io { .. }));
}
