//! Per-trace scoring and fixed-size representations.
//!
//! The anomaly score of a trace `x1..xl` is the per-call average negative
//! log-likelihood under the model,
//!
//! ```text
//! f(x) = -(1/l) * sum_i ln P(x_i | BOS, x_1..x_{i-1})
//! ```
//!
//! in nats per call — length-normalized so short and long traces share a
//! scale, and higher means more anomalous. Scoring always runs the exact
//! forward pass with dropout off; probabilities enter the sum in `f64`.

use alloc::vec::Vec;

use num_traits::Float;

use crate::corpus::{Batch, EncodedTrace};

use super::net::{final_hidden, mean_nll};
use super::{LmModel, EVAL_CHUNK};

/// Score of one trace: its source id, per-call average NLL, and call count.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceScore {
    pub source: alloc::string::String,
    /// Average negative log-likelihood, nats per call.
    pub nll: f64,
    /// Number of scored calls `l` (the begin marker predicts, it is never
    /// predicted).
    pub len: usize,
}

/// Fixed-size representation of one trace: the top layer's hidden state
/// after the whole trace has been read.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation<F> {
    pub source: alloc::string::String,
    pub vector: Vec<F>,
}

/// Scores a single encoded trace. The result is independent of how traces
/// are batched elsewhere: the trace is run alone, and row computations
/// never mix across a batch anyway.
#[must_use]
pub fn sequence_nll<F: Float>(model: &LmModel<F>, trace: &EncodedTrace) -> SequenceScore {
    let batch = Batch::single(trace);
    let nll = mean_nll(&model.params, &batch, EVAL_CHUNK);
    SequenceScore {
        source: trace.source.clone(),
        nll,
        len: trace.indices.len() - 1,
    }
}

/// Extracts the model's representation of a trace (dimension = cells).
#[must_use]
pub fn representation<F: Float>(model: &LmModel<F>, trace: &EncodedTrace) -> Representation<F> {
    let batch = Batch::single(trace);
    let final_h = final_hidden(&model.params, &batch, EVAL_CHUNK);
    Representation {
        source: trace.source.clone(),
        vector: final_h.row(0).to_vec(),
    }
}

/// Embedding rows for every real call in the vocabulary, as
/// `(raw_call, vector)` pairs in ascending raw order. Reserved indices
/// (begin marker, unknown) are not included.
#[must_use]
pub fn export_embeddings<F: Float>(model: &LmModel<F>) -> Vec<(u64, Vec<F>)> {
    model
        .vocab
        .raw_ids()
        .iter()
        .map(|&raw| {
            let ix = model
                .vocab
                .index(raw)
                .expect("every vocabulary raw id has an index");
            (raw, model.params.embedding.row(ix as usize).to_vec())
        })
        .collect()
}
