use anyhow::Result;
use ecgnet_core::data::{fit_standardization, summarize, write_label_matrix, write_prevalence_table, CorpusSummary};
use serde::Serialize;

use super::{create_dir, open_dataset, write_json};
use crate::config::RunConfig;
use crate::provenance::Provenance;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    #[serde(flatten)]
    pub summary: CorpusSummary,
    pub train_records: usize,
    pub val_records: usize,
    pub test_records: usize,
}

#[derive(Debug, Clone)]
pub struct PrepareOutput {
    pub report: CorpusReport,
    pub files: Vec<&'static str>,
}

pub const LABEL_MATRIX: &str = "label_matrix.csv";
pub const SPLIT_MANIFEST: &str = "split_manifest.csv";
pub const PREVALENCE: &str = "prevalence.csv";
pub const CORPUS_SUMMARY: &str = "corpus_summary.json";
pub const STANDARDIZATION: &str = "standardization.json";

/// `prepare`: label matrix, split manifest, training-split standardisation
/// statistics, prevalence table and corpus summary.
pub fn prepare(cfg: &RunConfig) -> Result<PrepareOutput> {
    let data = open_dataset(cfg)?;
    let out = &cfg.out;
    create_dir(out)?;
    let space = &data.corpus.label_space;

    write_label_matrix(&out.join(LABEL_MATRIX), &data.corpus.records, space)?;

    let mut w = csv::Writer::from_path(out.join(SPLIT_MANIFEST))?;
    w.write_record(["ecg_id", "patient_id", "fold", "split"])?;
    let parts = [("train", data.split.train.records()), ("val", &data.split.val[..]), ("test", &data.split.test[..])];
    for (name, recs) in parts {
        for r in recs {
            w.write_record([r.ecg_id.to_string(), r.patient_id.to_string(), r.fold.to_string(), name.to_string()])?;
        }
    }
    w.flush()?;

    let report = CorpusReport {
        summary: summarize(&data.corpus.records, space, data.corpus.excluded.len()),
        train_records: data.split.train.len(),
        val_records: data.split.val.len(),
        test_records: data.split.test.len(),
    };
    write_prevalence_table(&out.join(PREVALENCE), &report.summary)?;
    write_json(&out.join(CORPUS_SUMMARY), &report)?;

    let stats = fit_standardization(&data.split.train, data.source.as_ref())?;
    stats.save(&out.join(STANDARDIZATION))?;

    let files = vec![LABEL_MATRIX, SPLIT_MANIFEST, PREVALENCE, CORPUS_SUMMARY, STANDARDIZATION];
    let mut prov = Provenance::new("prepare", cfg).with_corpus(&data.root)?;
    prov.add_input("train_split", data.split.train.fingerprint());
    prov.write(out, &files)?;
    Ok(PrepareOutput { report, files })
}

/// Human-readable corpus summary.
pub fn format_summary(r: &CorpusReport) -> String {
    let s = &r.summary;
    let mut text = format!(
        "records: {} (excluded without diagnostic label: {})\nsplit train/val/test: {}/{}/{}\n\
         mean labels per record: {:.4}\nmulti-label fraction: {:.4}\nclass prevalence:\n",
        s.records, s.excluded, r.train_records, r.val_records, r.test_records, s.mean_labels_per_record, s.multi_label_fraction
    );
    let mut classes = s.classes.clone();
    classes.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.class.cmp(&b.class)));
    for c in classes {
        text.push_str(&format!("  {:<10} {:>6}  {:.4}\n", c.class, c.count, c.prevalence));
    }
    text
}
