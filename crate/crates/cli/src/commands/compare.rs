use std::path::PathBuf;

use anyhow::Result;
use ecgnet_core::metrics::{MetricsReport, AGGREGATE_COLUMNS};
use ecgnet_core::model::PRESET_NAMES;
use ecgnet_core::reporting::{compare_reports, ModelScores};
use serde::Serialize;

use super::{create_dir, evaluate_on, open_dataset, train_on, write_json, Dataset};
use crate::config::RunConfig;
use crate::provenance::Provenance;

pub const COMPARISON_CSV: &str = "comparison.csv";
pub const RANKS_CSV: &str = "comparison_ranks.csv";
pub const STATUS_JSON: &str = "variants.json";

#[derive(Debug, Clone, Serialize)]
pub struct VariantOutcome {
    pub preset: String,
    pub gating: bool,
    pub dir: PathBuf,
    pub best_epoch: Option<usize>,
    pub error: Option<String>,
    #[serde(skip)]
    pub report: Option<MetricsReport>,
}

impl VariantOutcome {
    pub fn label(&self) -> String {
        if self.gating {
            self.preset.clone()
        } else {
            format!("{} (no gating)", self.preset)
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub variants: Vec<VariantOutcome>,
}

impl CompareOutput {
    pub fn failed(&self) -> Vec<&VariantOutcome> {
        self.variants.iter().filter(|v| v.error.is_some()).collect()
    }
}

/// Every preset sorted by name, each with the gate and, when ablating,
/// again without it.
fn variants(ablate: bool) -> Vec<(String, bool)> {
    let mut names: Vec<&str> = PRESET_NAMES.to_vec();
    names.sort_unstable();
    names
        .into_iter()
        .flat_map(|n| {
            let gates: &[bool] = if ablate { &[true, false] } else { &[true] };
            gates.iter().map(move |&g| (n.to_string(), g))
        })
        .collect()
}

fn run_variant(cfg: &RunConfig, data: &Dataset, preset: &str, gating: bool) -> (VariantOutcome, Option<anyhow::Error>) {
    let dir_name = if gating { preset.to_string() } else { format!("{preset}-nogating") };
    let dir = cfg.out.join(dir_name);
    let vcfg = RunConfig {
        preset: preset.to_string(),
        spec: None,
        ablate_gating: !gating,
        out: dir.clone(),
        ..cfg.clone()
    };
    let result = (|| -> Result<(usize, MetricsReport)> {
        let trained = train_on(&vcfg, data, &dir)?;
        let evaluated = evaluate_on(&vcfg, data, &trained.checkpoint, &dir)?;
        Ok((trained.log.best_epoch, evaluated.report))
    })();
    let mut outcome = VariantOutcome {
        preset: preset.to_string(),
        gating,
        dir,
        best_epoch: None,
        error: None,
        report: None,
    };
    match result {
        Ok((epoch, report)) => {
            outcome.best_epoch = Some(epoch);
            outcome.report = Some(report);
            (outcome, None)
        }
        Err(e) => {
            log::error!("{} failed: {e:#}", outcome.label());
            outcome.error = Some(format!("{e:#}"));
            (outcome, Some(e))
        }
    }
}

/// `compare`: trains and evaluates every preset under the same seed, then
/// writes the combined table. A failing variant does not stop the others;
/// the table holds whatever succeeded and the command then reports failure.
pub fn compare(cfg: &RunConfig) -> Result<CompareOutput> {
    cfg.train_config().validate()?;
    let data = open_dataset(cfg)?;
    create_dir(&cfg.out)?;
    let plan = variants(cfg.ablate_gating);
    let results: Vec<(VariantOutcome, Option<anyhow::Error>)> = if cfg.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = plan
                .iter()
                .map(|(p, g)| {
                    let data = &data;
                    s.spawn(move || run_variant(cfg, data, p, *g))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("variant worker panicked")).collect()
        })
    } else {
        plan.iter().map(|(p, g)| run_variant(cfg, &data, p, *g)).collect()
    };
    let (outcomes, errors): (Vec<VariantOutcome>, Vec<Option<anyhow::Error>>) = results.into_iter().unzip();

    let mut w = csv::Writer::from_path(cfg.out.join(COMPARISON_CSV))?;
    let mut header = vec!["model", "gating"];
    header.extend(AGGREGATE_COLUMNS);
    w.write_record(&header)?;
    for v in &outcomes {
        if let Some(r) = &v.report {
            let mut row = vec![v.preset.clone(), if v.gating { "on" } else { "off" }.to_string()];
            row.extend(r.aggregate_row().iter().map(|x| format!("{x:.6}")));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    let mut files = vec![COMPARISON_CSV, STATUS_JSON];

    let scores: Vec<ModelScores> = outcomes
        .iter()
        .filter_map(|v| v.report.as_ref().map(|r| ModelScores::from_report(&v.label(), r)))
        .collect();
    if scores.len() >= 2 {
        compare_reports(&scores)?.write_csv(&cfg.out.join(RANKS_CSV))?;
        files.push(RANKS_CSV);
    }
    write_json(&cfg.out.join(STATUS_JSON), &outcomes)?;

    let mut prov = Provenance::new("compare", cfg).with_corpus(&data.root)?;
    prov.add_input("train_split", data.split.train.fingerprint());
    for v in &outcomes {
        prov.note(&v.label(), v.error.clone().unwrap_or_else(|| "ok".into()));
    }
    prov.write(&cfg.out, &files)?;

    let total = outcomes.len();
    if let Some(first) = errors.into_iter().flatten().next() {
        let failed = outcomes.iter().filter(|v| v.error.is_some()).count();
        return Err(first.context(format!(
            "{failed} of {total} variants failed; partial results in {}",
            cfg.out.display()
        )));
    }
    Ok(CompareOutput { variants: outcomes })
}
