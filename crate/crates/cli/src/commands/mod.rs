//! Subcommand implementations.
//!
//! Every command follows the same contract: flags plus inputs fully
//! determine the outputs, and each primary output gets a sibling manifest
//! echoing the resolved configuration.

pub mod baseline;
pub mod ensemble;
pub mod evaluate;
pub mod export;
pub mod score;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args;
use tracelm_core::corpus::{encode, EncodedTrace, RawTrace, SyscallVocab, TraceLabel};

use crate::dataset;
use crate::manifest::Manifest;

/// Where traces come from: a dataset directory in the three-directory
/// layout, or a flat file with one trace per line.
#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Dataset directory holding Training_Data_Master/,
    /// Validation_Data_Master/ and Attack_Data_Master/.
    #[arg(long, value_name = "DIR", conflicts_with = "file")]
    pub data: Option<PathBuf>,

    /// Flat trace file: one trace of whitespace-separated call ids per line.
    #[arg(long, value_name = "PATH")]
    pub file: Option<PathBuf>,

    /// Label applied to every trace loaded via --file
    /// (normal-train | normal-validation | attack | unlabeled).
    #[arg(long, value_name = "LABEL", default_value = "unlabeled", value_parser = parse_label)]
    pub label: TraceLabel,
}

fn parse_label(s: &str) -> Result<TraceLabel, String> {
    TraceLabel::parse(s).ok_or_else(|| {
        format!(
            "unknown label {s:?}; expected normal-train, normal-validation, \
             attack, or unlabeled"
        )
    })
}

impl InputArgs {
    pub fn load(&self) -> Result<Vec<RawTrace>> {
        match (&self.data, &self.file) {
            (Some(dir), None) => dataset::load_dataset_dir(dir),
            (None, Some(path)) => dataset::load_flat_file(path, self.label),
            (None, None) => bail!("no input: pass --data <DIR> or --file <PATH>"),
            (Some(_), Some(_)) => unreachable!("clap rejects --data with --file"),
        }
    }

    /// Echoes the resolved input into a manifest.
    pub fn describe(&self, manifest: &mut Manifest) {
        if let Some(dir) = &self.data {
            manifest.push("data", dir.display());
        }
        if let Some(path) = &self.file {
            manifest.push("file", path.display());
            manifest.push("label", self.label.as_str());
        }
    }
}

/// Encoding of a whole trace list, with the out-of-vocabulary tally.
pub struct Encoded {
    pub traces: Vec<EncodedTrace>,
    pub oov_calls: usize,
    pub total_calls: usize,
}

impl Encoded {
    /// Fraction of calls that fell outside the vocabulary.
    #[must_use]
    pub fn oov_rate(&self) -> f64 {
        if self.total_calls == 0 {
            0.0
        } else {
            self.oov_calls as f64 / self.total_calls as f64
        }
    }
}

pub fn encode_traces(traces: &[RawTrace], vocab: &SyscallVocab) -> Encoded {
    let mut encoded = Vec::with_capacity(traces.len());
    let mut oov_calls = 0;
    let mut total_calls = 0;
    for trace in traces {
        let (enc, oov) = encode(trace, vocab);
        oov_calls += oov;
        total_calls += trace.calls.len();
        encoded.push(enc);
    }
    Encoded {
        traces: encoded,
        oov_calls,
        total_calls,
    }
}

/// Records the out-of-vocabulary tally in a manifest and warns on stderr
/// when any call was unseen at training time.
pub fn note_oov(manifest: &mut Manifest, encoded: &Encoded) {
    manifest.push("oov_calls", encoded.oov_calls);
    manifest.push("total_calls", encoded.total_calls);
    manifest.push("oov_rate", encoded.oov_rate());
    if encoded.oov_calls > 0 {
        eprintln!(
            "note: {} of {} calls ({:.4}%) were out of vocabulary and scored as the \
             unknown token",
            encoded.oov_calls,
            encoded.total_calls,
            100.0 * encoded.oov_rate()
        );
    }
}

/// `<file>.<suffix>` next to `<file>` (the existing extension is kept).
#[must_use]
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}
