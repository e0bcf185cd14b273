use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use ecgnet_cli::commands::{self, format_summary, DEFAULT_CASES};
use ecgnet_cli::config::DATA_ROOT_ENV;
use ecgnet_cli::exit::{check_failed, exit_code};
use ecgnet_cli::{EvalSplit, RunConfig};
use ecgnet_core::metrics::AGGREGATE_COLUMNS;

/// Hybrid CNN-RNN multi-label classification of 12-lead ECGs.
///
/// Exit codes: 0 success, 1 other failure, 2 configuration, 3 I/O,
/// 4 integrity, 5 numeric, 6 malformed data, 7 failed gradient check.
#[derive(Debug, Parser)]
#[command(name = "ecgnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// PTB-XL directory (the one holding ptbxl_database.csv).
    #[arg(long, global = true, env = DATA_ROOT_ENV)]
    data_root: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Architecture preset: CNN, LSTM, BiLSTM, GRU, LSTM+BiLSTM, GRU+BiLSTM+LSTM.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Architecture spec JSON file; overrides --preset.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// Maximum training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Disable the gating module (compare: add a gating-off row per preset).
    #[arg(long, global = true)]
    ablate_gating: bool,
    /// Run cross-validation splits or comparison variants concurrently.
    #[arg(long, global = true)]
    parallel: bool,
    /// Use a generated corpus instead of PTB-XL.
    #[arg(long, global = true)]
    synthetic: bool,
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the label matrix, split manifest, standardisation statistics and corpus summary.
    Prepare,
    /// Train one architecture and save its best checkpoint.
    Train {
        /// Five-way cross-validation over folds 1-9 instead of a single run.
        #[arg(long)]
        cross_validate: bool,
    },
    /// Evaluate a checkpoint on the validation or test split.
    Evaluate {
        /// Defaults to <out>/model.ckpt.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        split: Option<EvalSplit>,
        /// Tune per-class thresholds on the validation split first.
        #[arg(long)]
        optimize_thresholds: bool,
        /// Also report deviations from the published results.
        #[arg(long)]
        check_anchors: bool,
    },
    /// Train and evaluate all six presets and write the comparison table.
    Compare {
        #[arg(long)]
        check_anchors: bool,
    },
    /// Finite-difference gradient checks of every layer.
    Gradcheck {
        /// Random shapes per kernel.
        #[arg(long, default_value_t = DEFAULT_CASES)]
        cases: usize,
        /// Corrupt one dense layer's gradient (dense_1, output) to confirm detection.
        #[arg(long)]
        plant_fault: Option<String>,
    },
    /// Write a synthetic corpus in the PTB-XL layout to --out.
    Synth {
        #[arg(long)]
        records: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        /// White-noise standard deviation in mV.
        #[arg(long)]
        noise: Option<f64>,
    },
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &cli.data_root {
        cfg.data_root = Some(v.clone());
    }
    if let Some(v) = &cli.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &cli.preset {
        cfg.preset = v.clone();
    }
    if let Some(v) = &cli.spec {
        cfg.spec = Some(v.clone());
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = cli.epochs {
        cfg.train.max_epochs = v;
    }
    cfg.ablate_gating |= cli.ablate_gating;
    cfg.parallel |= cli.parallel;
    cfg.synthetic |= cli.synthetic;
    match &cli.command {
        Command::Evaluate { split, optimize_thresholds, check_anchors, .. } => {
            if let Some(s) = split {
                cfg.split = *s;
            }
            cfg.optimize_thresholds |= optimize_thresholds;
            cfg.check_anchors |= check_anchors;
        }
        Command::Compare { check_anchors } => cfg.check_anchors |= check_anchors,
        Command::Synth { records, classes, noise } => {
            if let Some(v) = records {
                cfg.synth.n_records = *v;
            }
            if let Some(v) = classes {
                cfg.synth.n_classes = *v;
            }
            if let Some(v) = noise {
                cfg.synth.noise = *v;
            }
            if let Some(v) = cli.seed {
                cfg.synth.seed = v;
            }
        }
        _ => {}
    }
    Ok(cfg)
}

fn metric_lines(report: &ecgnet_core::metrics::MetricsReport) -> String {
    AGGREGATE_COLUMNS
        .iter()
        .map(|m| format!("  {m:<24} {:.4}\n", report.metric(m).unwrap_or(f64::NAN)))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    match &cli.command {
        Command::Prepare => {
            let out = commands::prepare(&cfg)?;
            print!("{}", format_summary(&out.report));
            println!("wrote {} to {}", out.files.join(", "), cfg.out.display());
        }
        Command::Train { cross_validate: true } => {
            let report = commands::cross_validate(&cfg)?;
            for (m, v) in &report.aggregate {
                println!("  {m:<24} {:.4} ± {:.4}", v.mean, v.std);
            }
        }
        Command::Train { cross_validate: false } => {
            let out = commands::train(&cfg)?;
            println!(
                "{}: {} parameters ({} recurrent); best epoch {} of {} with validation macro AUROC {:.4}",
                out.spec.name,
                out.parameters.total,
                out.parameters.recurrent(),
                out.log.best_epoch,
                out.log.epochs.len(),
                out.log.best_val_macro_auroc
            );
            println!("checkpoint: {}", out.checkpoint.display());
        }
        Command::Evaluate { checkpoint, .. } => {
            let out = commands::evaluate(&cfg, checkpoint.as_deref())?;
            println!("{} split, {} records:", cfg.split.as_str(), out.report.n);
            print!("{}", metric_lines(&out.report));
        }
        Command::Compare { .. } => {
            let out = commands::compare(&cfg)?;
            for v in &out.variants {
                if let Some(r) = &v.report {
                    println!("{:<28} macro AUROC {:.4}  micro F1 {:.4}", v.label(), r.macro_auroc, r.micro_f1);
                }
            }
        }
        Command::Gradcheck { cases, plant_fault } => {
            let out = commands::gradcheck(&cfg, *cases, plant_fault.as_deref())?;
            print!("{}", out.format());
            if !out.passed() {
                let layers: Vec<String> = out.failing_layers().into_iter().collect();
                return Err(check_failed(format!("gradient check failed for {}", layers.join(", "))));
            }
            println!("all gradient checks passed");
        }
        Command::Synth { .. } => {
            let m = commands::synth(&cfg)?;
            println!(
                "wrote {} records over {} classes ({}) to {}",
                m.config.n_records,
                m.classes.len(),
                m.classes.join(", "),
                m.root.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
