//! Trace-dataset IO.
//!
//! Two formats are supported:
//!
//! * The three-directory layout (`Training_Data_Master/`,
//!   `Validation_Data_Master/`, `Attack_Data_Master/`): one trace per file
//!   of whitespace-separated positive decimal call ids; attack traces sit
//!   one directory deeper, the directory name giving the attack type.
//! * Flat files: one trace per line, same tokenization, blank lines
//!   skipped.
//!
//! Loading is order-stable (directory entries are sorted by name), so the
//! same on-disk contents always yield the same trace order.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tracelm_core::corpus::{RawTrace, TraceLabel};

pub const TRAIN_DIR: &str = "Training_Data_Master";
pub const VALIDATION_DIR: &str = "Validation_Data_Master";
pub const ATTACK_DIR: &str = "Attack_Data_Master";

/// Per-group trace counts of a loaded dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DatasetCounts {
    pub normal_train: usize,
    pub normal_validation: usize,
    pub attack: usize,
    pub unlabeled: usize,
}

#[must_use]
pub fn count_labels(traces: &[RawTrace]) -> DatasetCounts {
    let mut counts = DatasetCounts::default();
    for t in traces {
        match t.label {
            TraceLabel::NormalTrain => counts.normal_train += 1,
            TraceLabel::NormalValidation => counts.normal_validation += 1,
            TraceLabel::Attack => counts.attack += 1,
            TraceLabel::Unlabeled => counts.unlabeled += 1,
        }
    }
    counts
}

/// Parses one trace's worth of whitespace-separated positive decimal call
/// ids. Returns `None` when the text holds no tokens. `origin` names the
/// source in errors; offsets are byte positions within `text`.
fn parse_trace(text: &str, origin: &str) -> Result<Option<Vec<u64>>> {
    let bytes = text.as_bytes();
    let mut calls = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        if bytes[pos].is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let token = &text[start..pos];
        let call: u64 = token.parse().with_context(|| {
            format!("{origin}: invalid call id {token:?} at byte {start}")
        })?;
        if call == 0 {
            bail!("{origin}: call ids are positive, got 0 at byte {start}");
        }
        calls.push(call);
    }
    Ok(if calls.is_empty() { None } else { Some(calls) })
}

/// Files of a directory, sorted by name for order stability.
fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .with_context(|| format!("listing {}", dir.display()))?;
    entries.sort();
    Ok(entries)
}

fn load_trace_file(
    path: &Path,
    root: &Path,
    label: TraceLabel,
    attack_type: Option<&str>,
) -> Result<Option<RawTrace>> {
    let content = fs::read_to_string(path)
        .with_context(|| format!("reading trace file {}", path.display()))?;
    let source = path
        .strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .into_owned();
    let Some(calls) = parse_trace(&content, &path.display().to_string())? else {
        return Ok(None);
    };
    let mut trace = RawTrace::new(calls, label, source)?;
    trace.attack_type = attack_type.map(str::to_string);
    Ok(Some(trace))
}

/// Loads a dataset in the three-directory layout. All three group
/// directories must exist (an empty attack directory is fine); traces come
/// back in group order — training, validation, attack — each sorted by
/// file name.
pub fn load_dataset_dir(root: &Path) -> Result<Vec<RawTrace>> {
    let mut traces = Vec::new();
    for (dir_name, label) in [
        (TRAIN_DIR, TraceLabel::NormalTrain),
        (VALIDATION_DIR, TraceLabel::NormalValidation),
    ] {
        let dir = root.join(dir_name);
        if !dir.is_dir() {
            bail!("dataset root {} is missing {dir_name}/", root.display());
        }
        for path in sorted_entries(&dir)? {
            if !path.is_file() {
                continue;
            }
            if let Some(trace) = load_trace_file(&path, root, label, None)? {
                traces.push(trace);
            }
        }
    }

    let attack_root = root.join(ATTACK_DIR);
    if !attack_root.is_dir() {
        bail!("dataset root {} is missing {ATTACK_DIR}/", root.display());
    }
    for group in sorted_entries(&attack_root)? {
        if !group.is_dir() {
            continue;
        }
        let attack_type = group
            .file_name()
            .expect("directory entries have names")
            .to_string_lossy()
            .into_owned();
        for path in sorted_entries(&group)? {
            if !path.is_file() {
                continue;
            }
            if let Some(trace) =
                load_trace_file(&path, root, TraceLabel::Attack, Some(&attack_type))?
            {
                traces.push(trace);
            }
        }
    }
    Ok(traces)
}

/// Loads a flat trace file: one trace per line, blank lines skipped, every
/// trace assigned the given label. Sources are `<path>:<line>`.
pub fn load_flat_file(path: &Path, label: TraceLabel) -> Result<Vec<RawTrace>> {
    let content = fs::read_to_string(path)
        .with_context(|| format!("reading trace file {}", path.display()))?;
    let mut traces = Vec::new();
    for (ix, line) in content.lines().enumerate() {
        let lineno = ix + 1;
        let origin = format!("{} line {lineno}", path.display());
        if let Some(calls) = parse_trace(line, &origin)? {
            traces.push(RawTrace::new(
                calls,
                label,
                format!("{}:{lineno}", path.display()),
            )?);
        }
    }
    Ok(traces)
}

/// Writes traces into the three-directory layout under `root`. Refuses an
/// existing non-empty directory unless `force` is set. Attack traces are
/// grouped by their attack type (directory per type, `unknown` when
/// absent). Deterministic: file names derive from positions only.
pub fn write_dataset_dir(
    root: &Path,
    train: &[RawTrace],
    validation: &[RawTrace],
    attacks: &[RawTrace],
    force: bool,
) -> Result<()> {
    if root.exists() {
        let occupied = fs::read_dir(root)
            .with_context(|| format!("inspecting {}", root.display()))?
            .next()
            .is_some();
        if occupied && !force {
            bail!(
                "output directory {} is not empty; pass --force to write anyway",
                root.display()
            );
        }
    }
    let digits = |n: usize| (n.max(1) as f64).log10() as usize + 1;

    for (dir_name, traces) in [(TRAIN_DIR, train), (VALIDATION_DIR, validation)] {
        let dir = root.join(dir_name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let width = digits(traces.len());
        for (ix, trace) in traces.iter().enumerate() {
            let name = format!("trace_{:0width$}.txt", ix + 1, width = width);
            write_trace_file(&dir.join(name), trace)?;
        }
    }

    let attack_root = root.join(ATTACK_DIR);
    fs::create_dir_all(&attack_root)
        .with_context(|| format!("creating {}", attack_root.display()))?;
    let width = digits(attacks.len());
    for (ix, trace) in attacks.iter().enumerate() {
        let group = trace.attack_type.as_deref().unwrap_or("unknown");
        let dir = attack_root.join(group);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let name = format!("{group}_{:0width$}.txt", ix + 1, width = width);
        write_trace_file(&dir.join(name), trace)?;
    }
    Ok(())
}

fn write_trace_file(path: &Path, trace: &RawTrace) -> Result<()> {
    let mut line = String::with_capacity(trace.calls.len() * 4);
    for (ix, call) in trace.calls.iter().enumerate() {
        if ix > 0 {
            line.push(' ');
        }
        line.push_str(&call.to_string());
    }
    line.push('\n');
    fs::write(path, line).with_context(|| format!("writing trace file {}", path.display()))
}
