//! Record index built from `ptbxl_database.csv` and `scp_statements.csv`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::labels::{map_labels, parse_scp_codes, LabelSpace, StatementTable};
use crate::error::{Error, Result};

pub const DATABASE_CSV: &str = "ptbxl_database.csv";
pub const STATEMENTS_CSV: &str = "scp_statements.csv";

/// Everything known about a record except its signal, which is loaded lazily.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub ecg_id: u32,
    pub patient_id: u64,
    pub fold: u8,
    /// Multi-hot over the corpus label space.
    pub labels: Vec<u8>,
    /// Record path relative to the data root, without extension.
    pub filename: String,
}

impl RecordMeta {
    pub fn label_count(&self) -> usize {
        self.labels.iter().map(|&v| v as usize).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub label_space: LabelSpace,
    pub records: Vec<RecordMeta>,
    /// Records dropped because no diagnostic subclass applied.
    pub excluded: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCount {
    pub class: String,
    pub count: usize,
    pub prevalence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub records: usize,
    pub excluded: usize,
    pub classes: Vec<ClassCount>,
    pub mean_labels_per_record: f64,
    pub multi_label_fraction: f64,
}

fn column(headers: &csv::StringRecord, name: &str, file: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Data(format!("{file} lacks a {name:?} column")))
}

/// Parses an id column that PTB-XL stores either as an integer or as a float such as `15709.0`.
fn parse_id(text: &str, what: &str, ecg: &str) -> Result<u64> {
    let t = text.trim();
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    match t.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) => Ok(v as u64),
        _ => Err(Error::Data(format!("record {ecg}: invalid {what} {text:?}"))),
    }
}

impl Corpus {
    /// `label_space: None` derives the space from the statement table.
    pub fn from_readers<A: std::io::Read, B: std::io::Read>(
        root: &Path,
        database: A,
        statements: B,
        label_space: Option<LabelSpace>,
    ) -> Result<Self> {
        let table = StatementTable::from_reader(statements)?;
        let label_space = match label_space {
            Some(s) => s,
            None => LabelSpace::from_statements(&table)?,
        };
        let mut rdr = csv::Reader::from_reader(database);
        let headers = rdr.headers()?.clone();
        let c_id = column(&headers, "ecg_id", DATABASE_CSV)?;
        let c_patient = column(&headers, "patient_id", DATABASE_CSV)?;
        let c_codes = column(&headers, "scp_codes", DATABASE_CSV)?;
        let c_fold = column(&headers, "strat_fold", DATABASE_CSV)?;
        let c_file = column(&headers, "filename_lr", DATABASE_CSV)?;
        let mut records = Vec::new();
        let mut excluded = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let field = |i: usize| row.get(i).unwrap_or_default();
            let ecg = field(c_id);
            let ecg_id = u32::try_from(parse_id(ecg, "ecg_id", ecg)?)
                .map_err(|_| Error::Data(format!("ecg_id {ecg} out of range")))?;
            let patient_id = parse_id(field(c_patient), "patient_id", ecg)?;
            let fold = parse_id(field(c_fold), "strat_fold", ecg)?;
            if !(1..=10).contains(&fold) {
                return Err(Error::Data(format!("record {ecg}: strat_fold {fold} outside 1..=10")));
            }
            let codes = parse_scp_codes(field(c_codes))?;
            let labels = map_labels(&codes, &table, &label_space)?;
            if labels.iter().all(|&v| v == 0) {
                excluded.push(ecg_id);
                continue;
            }
            records.push(RecordMeta {
                ecg_id,
                patient_id,
                fold: fold as u8,
                labels,
                filename: field(c_file).trim().to_string(),
            });
        }
        Ok(Corpus {
            root: root.to_path_buf(),
            label_space,
            records,
            excluded,
        })
    }

    /// Loads the record index from a PTB-XL style directory. The label
    /// space is every diagnostic subclass named in the statement table.
    pub fn load(root: &Path) -> Result<Self> {
        let db = root.join(DATABASE_CSV);
        let st = root.join(STATEMENTS_CSV);
        let db_file = std::fs::File::open(&db).map_err(|e| Error::io(&db, e))?;
        let st_file = std::fs::File::open(&st).map_err(|e| Error::io(&st, e))?;
        Self::from_readers(root, db_file, st_file, None)
    }

    pub fn summary(&self) -> CorpusSummary {
        summarize(&self.records, &self.label_space, self.excluded.len())
    }
}

pub fn summarize(records: &[RecordMeta], space: &LabelSpace, excluded: usize) -> CorpusSummary {
    let n = records.len();
    let mut counts = vec![0usize; space.len()];
    let mut total = 0usize;
    let mut multi = 0usize;
    for r in records {
        for (c, &v) in counts.iter_mut().zip(&r.labels) {
            *c += v as usize;
        }
        let k = r.label_count();
        total += k;
        multi += (k > 1) as usize;
    }
    let frac = |a: usize| if n == 0 { 0.0 } else { a as f64 / n as f64 };
    CorpusSummary {
        records: n,
        excluded,
        classes: space
            .names()
            .iter()
            .zip(counts)
            .map(|(name, count)| ClassCount {
                class: name.clone(),
                count,
                prevalence: frac(count),
            })
            .collect(),
        mean_labels_per_record: frac(total),
        multi_label_fraction: frac(multi),
    }
}

/// Label matrix CSV: `ecg_id,fold,<one column per class>`.
pub fn write_label_matrix(path: &Path, records: &[RecordMeta], space: &LabelSpace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut header = vec!["ecg_id".to_string(), "fold".to_string()];
    header.extend(space.names().iter().cloned());
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.ecg_id.to_string(), r.fold.to_string()];
        row.extend(r.labels.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-class prevalence table (class, count, prevalence), sorted by count descending.
pub fn write_prevalence_table(path: &Path, summary: &CorpusSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    w.write_record(["class", "count", "prevalence"])?;
    let mut rows = summary.classes.clone();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.class.cmp(&b.class)));
    for r in rows {
        w.write_record([r.class, r.count.to_string(), format!("{:.6}", r.prevalence)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
