//! SCP statement table, diagnostic-subclass label space and the per-record
//! code → multi-hot mapping.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 23 PTB-XL diagnostic subclasses in their stable (sorted) order.
pub const DIAGNOSTIC_SUBCLASSES: [&str; 23] = [
    "AMI", "CLBBB", "CRBBB", "ILBBB", "IMI", "IRBBB", "ISCA", "ISCI", "ISC_", "IVCD", "LAFB/LPFB", "LAO/LAE",
    "LMI", "LVH", "NORM", "NST_", "PMI", "RAO/RAE", "RVH", "SEHYP", "STTC", "WPW", "_AVB",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    names: Vec<String>,
}

impl LabelSpace {
    pub fn diagnostic_subclasses() -> Self {
        LabelSpace {
            names: DIAGNOSTIC_SUBCLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        if names.is_empty() {
            return Err(Error::Validation("label space must not be empty".into()));
        }
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Validation(format!("duplicate class {dup:?} in label space")));
        }
        Ok(LabelSpace { names })
    }

    /// Sorted distinct subclasses of the diagnostic statements in `table`.
    /// For the real statement table this is exactly the 23 subclasses.
    pub fn from_statements(table: &StatementTable) -> Result<Self> {
        let mut names: Vec<String> = table
            .statements
            .values()
            .filter(|s| s.diagnostic)
            .filter_map(|s| s.subclass.clone())
            .collect();
        names.sort();
        names.dedup();
        Self::new(names)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub diagnostic: bool,
    pub subclass: Option<String>,
}

/// SCP code → statement metadata, as read from `scp_statements.csv`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatementTable {
    pub statements: HashMap<String, Statement>,
}

fn truthy(v: &str) -> bool {
    match v.trim() {
        "" => false,
        s => s.parse::<f64>().map(|x| x != 0.0).unwrap_or(s.eq_ignore_ascii_case("true")),
    }
}

impl StatementTable {
    /// Parses the statements CSV: the first column is the code, and the
    /// `diagnostic` and `diagnostic_subclass` columns are looked up by name.
    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("statements table lacks a {name:?} column")))
        };
        let diag = col("diagnostic")?;
        let sub = col("diagnostic_subclass")?;
        let mut statements = HashMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let code = rec.get(0).unwrap_or_default().trim().to_string();
            if code.is_empty() {
                continue;
            }
            let subclass = rec.get(sub).map(str::trim).filter(|s| !s.is_empty()).map(str::to_string);
            statements.insert(
                code,
                Statement {
                    diagnostic: rec.get(diag).is_some_and(truthy),
                    subclass,
                },
            );
        }
        Ok(StatementTable { statements })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(f)
    }
}

/// Parses the `scp_codes` column, a Python-style dict such as
/// `{'NORM': 100.0, 'SR': 0.0}`.
pub fn parse_scp_codes(text: &str) -> Result<BTreeMap<String, f64>> {
    let json = text.trim().replace('\'', "\"");
    serde_json::from_str(&json).map_err(|e| Error::Data(format!("unparseable scp_codes {text:?}: {e}")))
}

/// Multi-hot label vector over `space`. Every diagnostic code counts,
/// whatever its likelihood. Unknown codes are skipped with a warning; a
/// diagnostic code whose subclass is outside `space` is a data error. An
/// all-zero result means the record should be excluded.
pub fn map_labels(
    scp_codes: &BTreeMap<String, f64>,
    table: &StatementTable,
    space: &LabelSpace,
) -> Result<Vec<u8>> {
    let mut labels = vec![0u8; space.len()];
    for code in scp_codes.keys() {
        let Some(st) = table.statements.get(code) else {
            log::warn!("unknown SCP code {code:?} skipped");
            continue;
        };
        if !st.diagnostic {
            continue;
        }
        let Some(sub) = st.subclass.as_deref() else {
            continue;
        };
        let idx = space
            .index_of(sub)
            .ok_or_else(|| Error::Data(format!("SCP code {code:?} maps to unknown subclass {sub:?}")))?;
        labels[idx] = 1;
    }
    Ok(labels)
}
