//! `ensemble`: fit the leaky combination rule from member score tables and
//! emit combined scores, with optional plain-averaging and majority-voting
//! outputs.
//!
//! Member `i` is described by two score tables: `--train-table` rows labeled
//! `normal-train` calibrate its centering bias (the median), and
//! `--eval-table` supplies the scores to combine. Tables are aligned by
//! trace id, so every member must cover exactly the same traces.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use tracelm_core::corpus::TraceLabel;
use tracelm_core::detect::{
    average_score, build_ensemble, ensemble_score, vote_curve, EnsembleSpec, LEAKY_SLOPE,
};

use crate::ensemble_file;
use crate::manifest::Manifest;
use crate::report::write_roc_tsv;
use crate::tables::{read_score_table, scorer, write_score_table, ScoreRow};

use super::sibling;

#[derive(Args, Debug)]
pub struct EnsembleArgs {
    /// Score table over the normal-training traces for one member
    /// (repeat once per member).
    #[arg(long = "train-table", value_name = "PATH", required = true)]
    pub train_tables: Vec<PathBuf>,

    /// Score table over the traces to combine for one member
    /// (repeat once per member, same order as --train-table).
    #[arg(long = "eval-table", value_name = "PATH", required = true)]
    pub eval_tables: Vec<PathBuf>,

    /// Leak slope of the combiner's activation.
    #[arg(long, default_value_t = LEAKY_SLOPE)]
    pub slope: f64,

    /// Where to write combined scores (the fitted spec lands at <OUT>.spec
    /// unless --out-spec overrides it).
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,

    /// Where to write the fitted ensemble specification.
    #[arg(long, value_name = "PATH")]
    pub out_spec: Option<PathBuf>,

    /// Also write the members' plain score average to this table.
    #[arg(long, value_name = "PATH")]
    pub averaging_out: Option<PathBuf>,

    /// Also write a majority-voting ROC curve to this path (needs
    /// normal-validation and attack rows in the eval tables).
    #[arg(long, value_name = "PATH")]
    pub voting_roc: Option<PathBuf>,

    /// Size of the evenly spaced quantile grid the voting curve sweeps.
    #[arg(long, default_value_t = 101)]
    pub vote_quantiles: usize,
}

/// Reads a table and sorts it by trace id, rejecting duplicate ids (the
/// per-id alignment below needs ids to be keys).
fn sorted_rows(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut rows = read_score_table(path)?;
    rows.sort_by(|a, b| a.trace_id.cmp(&b.trace_id));
    for pair in rows.windows(2) {
        if pair[0].trace_id == pair[1].trace_id {
            bail!(
                "{}: trace id {:?} appears more than once",
                path.display(),
                pair[0].trace_id
            );
        }
    }
    Ok(rows)
}

/// Asserts two id-sorted tables cover identical traces, reporting the first
/// divergence.
fn check_aligned(
    base_path: &Path,
    base: &[ScoreRow],
    other_path: &Path,
    other: &[ScoreRow],
) -> Result<()> {
    for (i, (a, b)) in base.iter().zip(other).enumerate() {
        if a.trace_id != b.trace_id {
            bail!(
                "score tables disagree on trace ids: row {} (after sorting) is {:?} in {} \
                 but {:?} in {}",
                i + 1,
                a.trace_id,
                base_path.display(),
                b.trace_id,
                other_path.display()
            );
        }
        if a.label != b.label {
            bail!(
                "score tables disagree on the label of trace {:?}: {} in {} but {} in {}",
                a.trace_id,
                a.label.as_str(),
                base_path.display(),
                b.label.as_str(),
                other_path.display()
            );
        }
    }
    if base.len() != other.len() {
        let (longer_path, longer) = if base.len() > other.len() {
            (base_path, base)
        } else {
            (other_path, other)
        };
        bail!(
            "score tables disagree on trace ids: {} covers {} traces but {} covers {}; \
             first extra id is {:?} in {}",
            base_path.display(),
            base.len(),
            other_path.display(),
            other.len(),
            longer[base.len().min(other.len())].trace_id,
            longer_path.display()
        );
    }
    Ok(())
}

/// Members must not mix score scales: every table whose sibling manifest
/// names a known scorer must agree on the scorer family (all likelihood
/// scores, or all representation distances).
fn check_families(tables: &[&PathBuf]) -> Result<Vec<String>> {
    let mut kinds = Vec::new();
    let mut families: BTreeSet<&'static str> = BTreeSet::new();
    for path in tables {
        let kind = match Manifest::read_for(path)? {
            Some(m) => m.get("scorer").unwrap_or("unknown").to_string(),
            None => "unknown".to_string(),
        };
        let family = scorer::family(&kind);
        if family != "unknown" {
            families.insert(family);
        }
        kinds.push(kind);
    }
    if families.len() > 1 {
        bail!(
            "refusing to combine score tables from different scales: found {} scorers \
             (per their manifests); center and combine one family at a time",
            families
                .iter()
                .copied()
                .collect::<Vec<_>>()
                .join(" and ")
        );
    }
    Ok(kinds)
}

fn member_name(path: &Path, index: usize) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    format!("{}:{stem}", index + 1)
}

pub fn run(args: &EnsembleArgs) -> Result<()> {
    let m = args.train_tables.len();
    if args.eval_tables.len() != m {
        bail!(
            "got {m} --train-table flags but {} --eval-table flags; each member needs one \
             of each, in the same order",
            args.eval_tables.len()
        );
    }

    let all_tables: Vec<&PathBuf> = args.train_tables.iter().chain(&args.eval_tables).collect();
    let member_kinds = check_families(&all_tables)?;

    let train_rows: Vec<Vec<ScoreRow>> = args
        .train_tables
        .iter()
        .map(|p| sorted_rows(p))
        .collect::<Result<_>>()?;
    let eval_rows: Vec<Vec<ScoreRow>> = args
        .eval_tables
        .iter()
        .map(|p| sorted_rows(p))
        .collect::<Result<_>>()?;
    for i in 1..m {
        check_aligned(
            &args.train_tables[0],
            &train_rows[0],
            &args.train_tables[i],
            &train_rows[i],
        )?;
        check_aligned(
            &args.eval_tables[0],
            &eval_rows[0],
            &args.eval_tables[i],
            &eval_rows[i],
        )?;
    }

    // Calibrate each member's bias on its normal-training scores.
    let names: Vec<String> = args
        .train_tables
        .iter()
        .enumerate()
        .map(|(i, p)| member_name(p, i))
        .collect();
    let normal_train: Vec<Vec<f64>> = train_rows
        .iter()
        .zip(&args.train_tables)
        .map(|(rows, path)| {
            let scores: Vec<f64> = rows
                .iter()
                .filter(|r| r.label == TraceLabel::NormalTrain)
                .map(|r| r.score)
                .collect();
            if scores.is_empty() {
                bail!(
                    "{}: no rows labeled normal-train; the centering bias is the median \
                     of normal-training scores",
                    path.display()
                );
            }
            Ok(scores)
        })
        .collect::<Result<_>>()?;
    let members: Vec<(&str, &[f64])> = names
        .iter()
        .map(String::as_str)
        .zip(normal_train.iter().map(Vec::as_slice))
        .collect();
    let spec: EnsembleSpec = build_ensemble(&members, args.slope)?;

    let spec_path = args
        .out_spec
        .clone()
        .unwrap_or_else(|| sibling(&args.out, "spec"));
    ensemble_file::save(&spec_path, &spec)?;

    // Combine the eval tables row by row (rows are id-aligned).
    let n = eval_rows[0].len();
    let mut combined = Vec::with_capacity(n);
    let mut averaged = Vec::with_capacity(n);
    let mut scores_at = vec![0.0f64; m];
    for j in 0..n {
        for (i, rows) in eval_rows.iter().enumerate() {
            scores_at[i] = rows[j].score;
        }
        let base = &eval_rows[0][j];
        combined.push(ScoreRow {
            trace_id: base.trace_id.clone(),
            label: base.label,
            score: ensemble_score(&spec, &scores_at)?,
        });
        averaged.push(ScoreRow {
            trace_id: base.trace_id.clone(),
            label: base.label,
            score: average_score(&scores_at)?,
        });
    }
    write_score_table(&args.out, &combined)?;

    let mut manifest = Manifest::new("ensemble");
    for (i, path) in args.train_tables.iter().enumerate() {
        manifest.push(&format!("train_table_{}", i + 1), path.display());
    }
    for (i, path) in args.eval_tables.iter().enumerate() {
        manifest.push(&format!("eval_table_{}", i + 1), path.display());
    }
    for (i, name) in names.iter().enumerate() {
        manifest.push(&format!("member_{}", i + 1), name);
        manifest.push(&format!("member_{}_scorer", i + 1), &member_kinds[i]);
    }
    manifest.push("slope", args.slope);
    manifest.push("scorer", scorer::LM_ENSEMBLE);
    manifest.push("traces", n);
    manifest.push("spec", spec_path.display());
    manifest.push("out", args.out.display());

    if let Some(avg_path) = &args.averaging_out {
        write_score_table(avg_path, &averaged)?;
        let mut avg_manifest = Manifest::new("ensemble");
        avg_manifest.push("scorer", scorer::LM_AVERAGE);
        avg_manifest.push("members", m);
        avg_manifest.push("traces", n);
        avg_manifest.push("out", avg_path.display());
        avg_manifest.write_for(avg_path)?;
        manifest.push("averaging_out", avg_path.display());
    }

    if let Some(roc_path) = &args.voting_roc {
        if args.vote_quantiles < 2 {
            bail!(
                "--vote-quantiles {} is too small; the voting sweep needs at least the \
                 two endpoint quantiles",
                args.vote_quantiles
            );
        }
        let grid: Vec<f64> = (0..args.vote_quantiles)
            .map(|i| i as f64 / (args.vote_quantiles - 1) as f64)
            .collect();
        let pick = |label: TraceLabel| -> Vec<Vec<f64>> {
            eval_rows
                .iter()
                .map(|rows| {
                    rows.iter()
                        .filter(|r| r.label == label)
                        .map(|r| r.score)
                        .collect()
                })
                .collect()
        };
        let normal = pick(TraceLabel::NormalValidation);
        let attack = pick(TraceLabel::Attack);
        let curve = vote_curve(&normal, &attack, &grid).context(
            "building the voting curve (eval tables must hold normal-validation and \
             attack rows)",
        )?;
        write_roc_tsv(roc_path, &curve)?;
        manifest.push("voting_roc", roc_path.display());
        manifest.push("vote_quantiles", args.vote_quantiles);
    }

    manifest.write_for(&args.out)?;
    println!(
        "combined {m} member{} over {n} traces -> {} (spec {})",
        if m == 1 { "" } else { "s" },
        args.out.display(),
        spec_path.display()
    );
    Ok(())
}
