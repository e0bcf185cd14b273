use std::collections::BTreeSet;

use anyhow::Result;
use ecgnet_core::gradcheck::{kernel_suite, tiny_model_check, GradCheckConfig, GradCheckReport, KernelResult};
use serde::Serialize;

use super::{create_dir, write_json};
use crate::config::RunConfig;
use crate::provenance::Provenance;

pub const GRADCHECK_JSON: &str = "gradcheck.json";

/// Network layer kinds and the checks that exercise them.
pub const LAYER_COVERAGE: [(&str, &[&str]); 12] = [
    ("Conv1D", &["conv1d"]),
    ("BatchNormalization", &["batchnorm_train", "batchnorm_infer"]),
    ("ReLU", &["relu"]),
    ("MaxPooling1D", &["maxpool"]),
    ("SpatialDropout1D", &["spatial_dropout"]),
    ("LSTM", &["lstm"]),
    ("GRU", &["gru"]),
    ("BiLSTM", &["bilstm"]),
    ("GlobalAveragePooling1D", &["global_avg_pool"]),
    ("Gating", &["gating"]),
    ("Dense", &["dense", "relu", "sigmoid"]),
    ("Dropout", &["end-to-end"]),
];

/// Rounds of random shapes per kernel.
pub const DEFAULT_CASES: usize = 20;
/// Multiplier applied to a layer's weight gradient by the fault hook.
const FAULT_SCALE: f64 = 1.01;

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckOutput {
    pub kernel_rtol: f64,
    pub kernels: Vec<KernelResult>,
    pub model: GradCheckReport,
    pub planted_fault: Option<String>,
}

impl GradcheckOutput {
    pub fn passed(&self) -> bool {
        self.kernels.iter().all(KernelResult::passed) && self.model.passed()
    }

    /// Kernels and end-to-end layers with at least one failing check.
    pub fn failing_layers(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.kernels.iter().filter(|k| !k.passed()).map(|k| k.kernel.clone()).collect();
        for t in self.model.failures() {
            out.insert(t.name.split('.').next().unwrap_or(&t.name).to_string());
        }
        out
    }

    pub fn format(&self) -> String {
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let mut s = format!("kernel checks (rtol {:e}):\n", self.kernel_rtol);
        for k in &self.kernels {
            s.push_str(&format!(
                "  {:<16} {:>3}/{:<3} max rel err {:.3e}  {}\n",
                k.kernel,
                k.passed_cases,
                k.cases,
                k.max_rel_error,
                verdict(k.passed())
            ));
        }
        s.push_str(&format!("end-to-end tiny model (rtol {:e}):\n", self.model.rtol));
        for t in &self.model.tensors {
            s.push_str(&format!("  {:<24} max rel err {:.3e}  {}\n", t.name, t.max_rel_error, verdict(t.passed)));
        }
        s.push_str("layer kinds covered:\n");
        for (kind, checks) in LAYER_COVERAGE {
            s.push_str(&format!("  {kind:<24} {}\n", checks.join(", ")));
        }
        s
    }
}

/// `gradcheck`: finite-difference checks of every kernel at rtol 1e-4 and of
/// a tiny end-to-end network at rtol 1e-3. `plant_fault` names a dense layer
/// of the tiny network (`dense_1`, `output`) whose gradient is corrupted.
pub fn gradcheck(cfg: &RunConfig, cases: usize, plant_fault: Option<&str>) -> Result<GradcheckOutput> {
    let kernel_cfg = GradCheckConfig::default();
    let kernels = kernel_suite(cases, cfg.seed, &kernel_cfg)?;
    let model = tiny_model_check(cfg.seed, &GradCheckConfig::with_rtol(1e-3), plant_fault.map(|l| (l, FAULT_SCALE)))?;
    let result = GradcheckOutput {
        kernel_rtol: kernel_cfg.rtol,
        kernels,
        model,
        planted_fault: plant_fault.map(str::to_string),
    };
    create_dir(&cfg.out)?;
    write_json(&cfg.out.join(GRADCHECK_JSON), &result)?;
    let mut prov = Provenance::new("gradcheck", cfg);
    prov.note("cases_per_kernel", cases.to_string());
    if let Some(l) = plant_fault {
        prov.note("planted_fault", l);
    }
    prov.write(&cfg.out, &[GRADCHECK_JSON])?;
    Ok(result)
}
