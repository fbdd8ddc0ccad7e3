//! Ensemble-specification persistence.
//!
//! The fitted combination rule — per-member centering biases, mixture
//! weights, and the leak slope — is stored as plain text so it can be
//! inspected and reused against fresh score tables:
//!
//! ```text
//! tracelm ensemble 1
//! slope 0.001
//! member <TAB> lm-nll:a <TAB> 0.5 <TAB> -1.25
//! member <TAB> lm-nll:b <TAB> 0.5 <TAB> -0.75
//! ```
//!
//! Member rows are tab-separated `member <name> <weight> <bias>` and their
//! order is the order scores must be supplied in.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use tracelm_core::detect::EnsembleSpec;

pub const ENSEMBLE_MAGIC: &str = "tracelm ensemble 1";

/// Serializes a spec. Weights and biases are written with `f64`'s shortest
/// round-trip formatting, so save → load is value-exact.
#[must_use]
pub fn to_string(spec: &EnsembleSpec) -> String {
    let mut out = String::new();
    out.push_str(ENSEMBLE_MAGIC);
    out.push('\n');
    out.push_str(&format!("slope {}\n", spec.slope));
    for i in 0..spec.len() {
        out.push_str(&format!(
            "member\t{}\t{}\t{}\n",
            spec.member_names[i], spec.weights[i], spec.biases[i]
        ));
    }
    out
}

/// Parses and validates a spec.
pub fn from_str(text: &str) -> Result<EnsembleSpec> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, line)) if line == ENSEMBLE_MAGIC => {}
        other => bail!(
            "not an ensemble file: expected {ENSEMBLE_MAGIC:?}, found {:?}",
            other.map(|(_, l)| l).unwrap_or("")
        ),
    }
    let slope: f64 = match lines.next() {
        Some((_, line)) => {
            let Some(v) = line.strip_prefix("slope ") else {
                bail!("ensemble file line 2: expected \"slope <value>\", found {line:?}");
            };
            v.parse()
                .with_context(|| format!("ensemble file line 2: bad slope {v:?}"))?
        }
        None => bail!("ensemble file ended before the slope line"),
    };

    let mut member_names = Vec::new();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (ix, line) in lines {
        let lineno = ix + 1;
        let mut parts = line.split('\t');
        let (Some("member"), Some(name), Some(weight), Some(bias), None) = (
            parts.next(),
            parts.next(),
            parts.next(),
            parts.next(),
            parts.next(),
        ) else {
            bail!(
                "ensemble file line {lineno}: expected \
                 \"member<TAB>name<TAB>weight<TAB>bias\", found {line:?}"
            );
        };
        member_names.push(name.to_string());
        weights.push(
            weight
                .parse()
                .with_context(|| format!("ensemble file line {lineno}: bad weight {weight:?}"))?,
        );
        biases.push(
            bias.parse()
                .with_context(|| format!("ensemble file line {lineno}: bad bias {bias:?}"))?,
        );
    }

    let spec = EnsembleSpec {
        member_names,
        weights,
        biases,
        slope,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn save(path: &Path, spec: &EnsembleSpec) -> Result<()> {
    fs::write(path, to_string(spec))
        .with_context(|| format!("writing ensemble file {}", path.display()))
}

pub fn load(path: &Path) -> Result<EnsembleSpec> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading ensemble file {}", path.display()))?;
    from_str(&text).with_context(|| format!("parsing ensemble file {}", path.display()))
}
