//! `synth`: generate a synthetic trace corpus in the three-directory
//! layout.
//!
//! Normal traces walk a fixed first-order transition structure (a function
//! of the vocabulary size alone) and are split into training/validation
//! sets; attack traces draw calls uniformly at random. Identical flags and
//! seed reproduce identical files.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use tracelm_core::corpus::{gen_synthetic, split_normal, SynthConfig};
use tracelm_core::seed;

use crate::dataset::write_dataset_dir;
use crate::manifest::Manifest;

/// Stream tag separating the train/validation shuffle from trace sampling.
const SPLIT_STREAM: u64 = 0x7370_6c74; // "splt"

fn d() -> SynthConfig {
    SynthConfig::default()
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output dataset directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Distinct system calls in the synthetic vocabulary (at least 4).
    #[arg(long, default_value_t = d().vocab_size)]
    pub vocab_size: u32,

    /// Normal traces to sample (split into training and validation).
    #[arg(long, default_value_t = d().n_normal)]
    pub normals: usize,

    /// Attack traces to sample.
    #[arg(long, default_value_t = d().n_attack)]
    pub attacks: usize,

    /// Shortest trace length.
    #[arg(long, default_value_t = d().len_range.0)]
    pub min_len: usize,

    /// Longest trace length.
    #[arg(long, default_value_t = d().len_range.1)]
    pub max_len: usize,

    /// Train:validation ratio for the normal traces.
    #[arg(long, default_value = "1:1", value_parser = parse_ratio)]
    pub split: (u32, u32),

    /// Seed driving trace sampling and the split shuffle.
    #[arg(long, default_value_t = d().seed)]
    pub seed: u64,

    /// Write into a non-empty directory.
    #[arg(long)]
    pub force: bool,
}

fn parse_ratio(s: &str) -> Result<(u32, u32), String> {
    let parse = |part: &str| {
        part.parse::<u32>()
            .map_err(|_| format!("bad split ratio {s:?}; expected TRAIN:VAL, e.g. 1:1"))
    };
    let Some((a, b)) = s.split_once(':') else {
        return Err(format!("bad split ratio {s:?}; expected TRAIN:VAL, e.g. 1:1"));
    };
    Ok((parse(a)?, parse(b)?))
}

pub fn run(args: &SynthArgs) -> Result<()> {
    let config = SynthConfig {
        vocab_size: args.vocab_size,
        n_normal: args.normals,
        n_attack: args.attacks,
        len_range: (args.min_len, args.max_len),
        seed: args.seed,
    };
    let (normals, attacks) = gen_synthetic(&config)?;
    let (train, validation) =
        split_normal(normals, args.split, seed::derive(args.seed, SPLIT_STREAM))
            .context("splitting the normal traces")?;

    write_dataset_dir(&args.out, &train, &validation, &attacks, args.force)?;

    let mut manifest = Manifest::new("synth");
    manifest.push("vocab_size", config.vocab_size);
    manifest.push("normals", config.n_normal);
    manifest.push("attacks", config.n_attack);
    manifest.push("min_len", config.len_range.0);
    manifest.push("max_len", config.len_range.1);
    manifest.push("split", format!("{}:{}", args.split.0, args.split.1));
    manifest.push("seed", config.seed);
    manifest.push("normal_train", train.len());
    manifest.push("normal_validation", validation.len());
    manifest.push("out", args.out.display());
    manifest.write(&args.out.join("synth.manifest"))?;

    println!(
        "wrote synthetic corpus to {}: {} normal-train, {} normal-validation, {} attack",
        args.out.display(),
        train.len(),
        validation.len(),
        attacks.len()
    );
    Ok(())
}
