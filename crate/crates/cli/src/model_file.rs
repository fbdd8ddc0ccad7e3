//! Trained-model persistence.
//!
//! A model file is a short plain-text header followed by the raw weights:
//!
//! ```text
//! tracelm model 1
//! num_layers 1
//! cells 200
//! lr 0.0001
//! clip_norm 5
//! dropout_p 0.5
//! init_range 0.1
//! epochs 20
//! bptt_chunk 100
//! batch_size 32
//! seed 42
//! vocab_size 175
//! raw_ids 1 3 4 5 6 ...
//! data f32le
//! <little-endian f32 bytes, tensors in canonical order>
//! ```
//!
//! The weight payload lists every tensor in the fixed order the parameter
//! set exposes (embedding, then per layer `w_x`/`w_h`/`bias`, then the
//! projection and its bias), each in row-major order. Save followed by load
//! reproduces the weights bit for bit. The per-epoch training log is not
//! part of the file — the trainer writes it separately — so a loaded model
//! carries an empty log.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use tracelm_core::corpus::SyscallVocab;
use tracelm_core::lm::{LmConfig, LmModel, LmParams};

pub const MODEL_MAGIC: &str = "tracelm model 1";
const DATA_MARKER: &str = "data f32le";

/// Serializes a model into the header-plus-weights form.
#[must_use]
pub fn to_bytes(model: &LmModel<f32>) -> Vec<u8> {
    let c = &model.config;
    let mut header = String::new();
    header.push_str(MODEL_MAGIC);
    header.push('\n');
    for (key, value) in [
        ("num_layers", c.num_layers.to_string()),
        ("cells", c.cells.to_string()),
        ("lr", c.lr.to_string()),
        ("clip_norm", c.clip_norm.to_string()),
        ("dropout_p", c.dropout_p.to_string()),
        ("init_range", c.init_range.to_string()),
        ("epochs", c.epochs.to_string()),
        ("bptt_chunk", c.bptt_chunk.to_string()),
        ("batch_size", c.batch_size.to_string()),
        ("seed", c.seed.to_string()),
        ("vocab_size", model.vocab.size().to_string()),
    ] {
        header.push_str(key);
        header.push(' ');
        header.push_str(&value);
        header.push('\n');
    }
    header.push_str("raw_ids");
    for raw in model.vocab.raw_ids() {
        header.push(' ');
        header.push_str(&raw.to_string());
    }
    header.push('\n');
    header.push_str(DATA_MARKER);
    header.push('\n');

    let mut bytes = header.into_bytes();
    for tensor in model.params.tensors() {
        for &w in tensor.as_slice() {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
    }
    bytes
}

/// Advances `pos` past the next `\n`-terminated line and returns the line.
fn take_line<'a>(bytes: &'a [u8], pos: &mut usize, what: &str) -> Result<&'a str> {
    let rest = &bytes[*pos..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .with_context(|| format!("model file ended before {what}"))?;
    let line = std::str::from_utf8(&rest[..end])
        .with_context(|| format!("model header ({what}) is not UTF-8"))?;
    *pos += end + 1;
    Ok(line)
}

/// Reads the next header line, which must be `<key> <value>`, returning the
/// value part.
fn take_field<'a>(bytes: &'a [u8], pos: &mut usize, key: &str) -> Result<&'a str> {
    let line = take_line(bytes, pos, key)?;
    match line.strip_prefix(key) {
        Some("") => Ok(""),
        Some(rest) if rest.starts_with(' ') => Ok(&rest[1..]),
        _ => bail!("model header: expected {key:?} line, found {line:?}"),
    }
}

fn parse_field<T: core::str::FromStr>(bytes: &[u8], pos: &mut usize, key: &str) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    let value = take_field(bytes, pos, key)?;
    value
        .parse()
        .with_context(|| format!("model header: bad {key} value {value:?}"))
}

/// Parses a model from the header-plus-weights form.
pub fn from_bytes(bytes: &[u8]) -> Result<LmModel<f32>> {
    let pos = &mut 0usize;

    let magic = take_line(bytes, pos, "the format marker")?;
    if magic != MODEL_MAGIC {
        bail!("not a model file: expected {MODEL_MAGIC:?}, found {magic:?}");
    }

    let config = LmConfig {
        num_layers: parse_field(bytes, pos, "num_layers")?,
        cells: parse_field(bytes, pos, "cells")?,
        lr: parse_field(bytes, pos, "lr")?,
        clip_norm: parse_field(bytes, pos, "clip_norm")?,
        dropout_p: parse_field(bytes, pos, "dropout_p")?,
        init_range: parse_field(bytes, pos, "init_range")?,
        epochs: parse_field(bytes, pos, "epochs")?,
        bptt_chunk: parse_field(bytes, pos, "bptt_chunk")?,
        batch_size: parse_field(bytes, pos, "batch_size")?,
        seed: parse_field(bytes, pos, "seed")?,
    };
    let vocab_size: usize = parse_field(bytes, pos, "vocab_size")?;
    let raw_ids = take_field(bytes, pos, "raw_ids")?
        .split_ascii_whitespace()
        .map(|t| t.parse().with_context(|| format!("bad raw id {t:?}")))
        .collect::<Result<Vec<u64>>>()?;
    let vocab = SyscallVocab::from_raw_ids(raw_ids)?;
    if vocab.size() != vocab_size {
        bail!(
            "model header: vocab_size says {vocab_size} but the raw id list implies {}",
            vocab.size()
        );
    }

    let marker = take_line(bytes, pos, "the data marker")?;
    if marker != DATA_MARKER {
        bail!("model header: expected {DATA_MARKER:?}, found {marker:?}");
    }

    let mut params = LmParams::<f32>::zeros(config.num_layers, config.cells, vocab_size);
    let expected = params.num_params() * 4;
    let payload = &bytes[*pos..];
    if payload.len() != expected {
        bail!(
            "model weight payload is {} bytes, expected {expected} \
             ({} parameters of 4 bytes each)",
            payload.len(),
            params.num_params()
        );
    }
    let mut offset = 0usize;
    for tensor in params.tensors_mut() {
        for w in tensor.as_mut_slice() {
            *w = f32::from_le_bytes(payload[offset..offset + 4].try_into().expect("4 bytes"));
            offset += 4;
        }
    }

    Ok(LmModel {
        params,
        vocab,
        config,
        training_log: Vec::new(),
    })
}

pub fn save(path: &Path, model: &LmModel<f32>) -> Result<()> {
    fs::write(path, to_bytes(model))
        .with_context(|| format!("writing model file {}", path.display()))
}

pub fn load(path: &Path) -> Result<LmModel<f32>> {
    let bytes =
        fs::read(path).with_context(|| format!("reading model file {}", path.display()))?;
    from_bytes(&bytes).with_context(|| format!("parsing model file {}", path.display()))
}
