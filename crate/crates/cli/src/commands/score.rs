//! `score`: per-trace average negative log-likelihood under a trained model.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use tracelm_core::lm::sequence_nll;

use crate::manifest::Manifest;
use crate::model_file;
use crate::tables::{scorer, write_score_table, ScoreRow};

use super::{encode_traces, note_oov, InputArgs};

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Trained model file.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,

    #[command(flatten)]
    pub input: InputArgs,

    /// Where to write the score table.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

pub fn run(args: &ScoreArgs) -> Result<()> {
    let model = model_file::load(&args.model)?;
    let traces = args.input.load()?;
    if traces.is_empty() {
        eprintln!("warning: input holds no traces; writing an empty score table");
    }
    let encoded = encode_traces(&traces, &model.vocab);

    let rows: Vec<ScoreRow> = encoded
        .traces
        .iter()
        .map(|trace| {
            let s = sequence_nll(&model, trace);
            ScoreRow {
                trace_id: s.source,
                label: trace.label,
                score: s.nll,
            }
        })
        .collect();
    write_score_table(&args.out, &rows)?;

    let mut manifest = Manifest::new("score");
    manifest.push("model", args.model.display());
    args.input.describe(&mut manifest);
    manifest.push("scorer", scorer::LM_NLL);
    manifest.push("traces", rows.len());
    note_oov(&mut manifest, &encoded);
    manifest.push("out", args.out.display());
    manifest.write_for(&args.out)?;

    println!(
        "scored {} traces with {} -> {}",
        rows.len(),
        scorer::LM_NLL,
        args.out.display()
    );
    Ok(())
}
