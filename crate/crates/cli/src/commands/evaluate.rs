//! `evaluate`: ROC curves, areas, and false-alarm readouts from score
//! tables.
//!
//! Each table's `normal-validation` rows set the false-alarm axis and its
//! `attack` rows the detection axis; other rows are ignored (with a note).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use tracelm_core::corpus::TraceLabel;
use tracelm_core::eval::{auc, far_at_dr, roc, EvalReport};

use crate::manifest::Manifest;
use crate::report::{write_comparison, write_report, write_roc_tsv};
use crate::tables::read_score_table;

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Score table to evaluate (repeatable; more than one also produces a
    /// ranked comparison).
    #[arg(long = "table", value_name = "PATH", required = true)]
    pub tables: Vec<PathBuf>,

    /// Detection-rate targets whose lowest achievable false-alarm rates are
    /// reported (repeatable).
    #[arg(long = "dr", value_name = "RATE", default_values_t = vec![0.9, 0.99, 1.0])]
    pub dr_targets: Vec<f64>,

    /// Directory for the per-table reports and ROC data.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

fn table_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn run(args: &EvaluateArgs) -> Result<()> {
    let mut stems = BTreeSet::new();
    for path in &args.tables {
        if !stems.insert(table_stem(path)) {
            bail!(
                "two tables share the output name {:?}; rename one so reports don't \
                 overwrite each other",
                table_stem(path)
            );
        }
    }

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating output directory {}", args.out_dir.display()))?;

    let mut reports = Vec::with_capacity(args.tables.len());
    for path in &args.tables {
        let rows = read_score_table(path)?;
        let normal: Vec<f64> = rows
            .iter()
            .filter(|r| r.label == TraceLabel::NormalValidation)
            .map(|r| r.score)
            .collect();
        let attack: Vec<f64> = rows
            .iter()
            .filter(|r| r.label == TraceLabel::Attack)
            .map(|r| r.score)
            .collect();
        let ignored = rows.len() - normal.len() - attack.len();
        if ignored > 0 {
            eprintln!(
                "note: {}: ignoring {ignored} rows that are neither normal-validation \
                 nor attack",
                path.display()
            );
        }

        let curve = roc(&normal, &attack)
            .with_context(|| format!("evaluating {}", path.display()))?;
        let far_at = args
            .dr_targets
            .iter()
            .map(|&t| Ok((t, far_at_dr(&curve, t)?)))
            .collect::<Result<Vec<(f64, f64)>>>()
            .with_context(|| format!("evaluating {}", path.display()))?;
        let report = EvalReport {
            name: table_stem(path),
            auc: auc(&curve),
            far_at,
            normal_count: normal.len(),
            attack_count: attack.len(),
        };

        let report_path = args.out_dir.join(format!("{}.report", report.name));
        let roc_path = args.out_dir.join(format!("{}.roc.tsv", report.name));
        write_report(&report_path, &report)?;
        write_roc_tsv(&roc_path, &curve)?;
        println!(
            "{}: auc {:.6} ({} normal-validation, {} attack) -> {}",
            report.name,
            report.auc,
            report.normal_count,
            report.attack_count,
            report_path.display()
        );
        reports.push(report);
    }

    let mut manifest = Manifest::new("evaluate");
    for (i, path) in args.tables.iter().enumerate() {
        manifest.push(&format!("table_{}", i + 1), path.display());
    }
    for (i, t) in args.dr_targets.iter().enumerate() {
        manifest.push(&format!("dr_target_{}", i + 1), t);
    }
    manifest.push("out_dir", args.out_dir.display());

    if reports.len() > 1 {
        let cmp_path = args.out_dir.join("comparison.tsv");
        write_comparison(&cmp_path, &reports)?;
        manifest.push("comparison", cmp_path.display());
        println!("ranked {} methods -> {}", reports.len(), cmp_path.display());
    }
    manifest.write(&args.out_dir.join("evaluate.manifest"))?;
    Ok(())
}
