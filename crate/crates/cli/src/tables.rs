//! Score tables: the delimited-text format pipeline stages exchange.
//!
//! A table is UTF-8 with LF endings: the fixed header line, then one row
//! per trace as `trace_id<TAB>label<TAB>score`. Scores print through
//! `f64`'s shortest-round-trip formatting, so reading a table back yields
//! bit-identical values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use tracelm_core::corpus::TraceLabel;

pub const SCORE_TABLE_HEADER: &str = "trace_id\tlabel\tscore";

/// Scorer kinds recorded in table manifests. Ensembles refuse to mix the
/// NLL family with the distance family: their scales are incomparable.
pub mod scorer {
    pub const LM_NLL: &str = "lm-nll";
    pub const LM_ENSEMBLE: &str = "lm-ensemble";
    pub const LM_AVERAGE: &str = "lm-average";
    pub const KNN_DISTANCE: &str = "knn-distance";
    pub const KNN_COUNT: &str = "knn-count";
    pub const KMC_DISTANCE: &str = "kmc-distance";

    /// Scale family of a scorer kind; kinds from different families must
    /// not be combined into one ensemble.
    pub fn family(kind: &str) -> &'static str {
        match kind {
            LM_NLL | LM_ENSEMBLE | LM_AVERAGE => "nll",
            KNN_DISTANCE | KNN_COUNT | KMC_DISTANCE => "distance",
            _ => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub trace_id: String,
    pub label: TraceLabel,
    pub score: f64,
}

pub fn write_score_table(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(SCORE_TABLE_HEADER);
    out.push('\n');
    for row in rows {
        if row.trace_id.is_empty()
            || row.trace_id.contains('\t')
            || row.trace_id.contains('\n')
        {
            bail!("trace id {:?} cannot be written to a score table", row.trace_id);
        }
        if !row.score.is_finite() {
            bail!("trace {} has a non-finite score {}", row.trace_id, row.score);
        }
        writeln!(out, "{}\t{}\t{}", row.trace_id, row.label.as_str(), row.score)
            .expect("writing to a String cannot fail");
    }
    fs::write(path, out).with_context(|| format!("writing score table {}", path.display()))
}

pub fn read_score_table(path: &Path) -> Result<Vec<ScoreRow>> {
    let content = fs::read_to_string(path)
        .with_context(|| format!("reading score table {}", path.display()))?;
    let mut lines = content.lines();
    match lines.next() {
        Some(first) if first == SCORE_TABLE_HEADER => {}
        _ => bail!(
            "{} is not a score table: expected header {:?}",
            path.display(),
            SCORE_TABLE_HEADER
        ),
    }
    let mut rows = Vec::new();
    for (ix, line) in lines.enumerate() {
        let lineno = ix + 2;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(id), Some(label), Some(score), None) = (
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
        ) else {
            bail!(
                "{} line {lineno}: expected 3 tab-separated fields",
                path.display()
            );
        };
        let label = TraceLabel::parse(label).with_context(|| {
            format!("{} line {lineno}: unknown label {label:?}", path.display())
        })?;
        let score: f64 = score.parse().with_context(|| {
            format!("{} line {lineno}: invalid score {score:?}", path.display())
        })?;
        rows.push(ScoreRow {
            trace_id: id.to_string(),
            label,
            score,
        });
    }
    Ok(rows)
}
