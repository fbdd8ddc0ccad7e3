//! `export-embeddings`: dump a model's call-embedding matrix as TSV for
//! external projection or plotting tools.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use tracelm_core::lm::export_embeddings;

use crate::manifest::Manifest;
use crate::model_file;

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// Trained model file.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,

    /// Where to write the embedding table.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

pub fn run(args: &ExportArgs) -> Result<()> {
    let model = model_file::load(&args.model)?;
    let rows = export_embeddings(&model);
    let dim = model.params.cells();

    let mut out = String::from("raw_id");
    for c in 0..dim {
        let _ = write!(out, "\te{c}");
    }
    out.push('\n');
    for (raw, vector) in &rows {
        let _ = write!(out, "{raw}");
        for v in vector {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    std::fs::write(&args.out, out)
        .with_context(|| format!("writing embedding table {}", args.out.display()))?;

    let mut manifest = Manifest::new("export-embeddings");
    manifest.push("model", args.model.display());
    manifest.push("calls", rows.len());
    manifest.push("dim", dim);
    manifest.push("out", args.out.display());
    manifest.write_for(&args.out)?;

    println!(
        "exported {} embedding rows of width {dim} -> {}",
        rows.len(),
        args.out.display()
    );
    Ok(())
}
