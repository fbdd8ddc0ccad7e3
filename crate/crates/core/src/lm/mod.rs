//! LSTM language model over encoded system-call traces.
//!
//! The model reads a trace `[BOS, x1 .. xl]` left to right and emits, at
//! every position, a distribution over the next call. Training minimizes the
//! mean negative log-likelihood of the real (non-padding) calls via
//! truncated back-propagation through time with Adam and global-norm
//! gradient clipping; scoring reuses the exact forward pass to compute the
//! per-call average NLL that downstream detectors threshold.
//!
//! Weights are plain row-major tensors in the working float type `F`
//! (32-bit in production; the gradient checks instantiate `f64`). Losses and
//! scores are always accumulated in `f64` regardless of `F`.

mod net;
mod score;
mod train;

pub use net::{forward, mean_nll, nll_and_grads, nll_loss, Dropout, StepLogits};
pub use score::{export_embeddings, representation, sequence_nll, Representation, SequenceScore};
pub use train::{
    clip_gradients, global_grad_norm, train, train_step, AdamState, EpochStats,
    ADAM_BETA1, ADAM_BETA2, ADAM_EPS, EARLY_STOP_PATIENCE,
};

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::SyscallVocab;
use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::{from_f64, Tensor};

/// Chunk length used by streaming (no-gradient) evaluation. Forward results
/// are exact for any chunking — states carry across chunks bit for bit — so
/// this only bounds buffer sizes.
pub(crate) const EVAL_CHUNK: usize = 128;

/// Seed-stream tags (see [`crate::seed::derive`]).
pub(crate) const INIT_STREAM: u64 = 1;
pub(crate) const DROPOUT_STREAM: u64 = 2;
pub(crate) const VAL_BATCH_STREAM: u64 = 3;
pub(crate) const EPOCH_STREAM_BASE: u64 = 16;

/// Hyper-parameters of a model and its training run.
#[derive(Debug, Clone, PartialEq)]
pub struct LmConfig {
    /// Stacked LSTM layers: 1 or 2.
    pub num_layers: usize,
    /// LSTM cells per layer; also the embedding width.
    pub cells: usize,
    /// Adam learning rate.
    pub lr: f64,
    /// Global L2-norm threshold above which gradients are rescaled.
    pub clip_norm: f64,
    /// Dropout probability on non-recurrent connections; 0 disables.
    pub dropout_p: f64,
    /// Parameters start uniform in `[-init_range, init_range]`.
    pub init_range: f64,
    /// Maximum passes over the training set (early stopping may use fewer).
    pub epochs: usize,
    /// Gradient-truncation window for BPTT, in steps.
    pub bptt_chunk: usize,
    /// Traces per mini-batch.
    pub batch_size: usize,
    /// Master seed for initialization, dropout, and shuffling.
    pub seed: u64,
}

impl Default for LmConfig {
    /// The published training recipe: one 200-cell layer, Adam at 1e-4,
    /// clipping at norm 5, dropout 0.5, init range 0.1.
    fn default() -> Self {
        LmConfig {
            num_layers: 1,
            cells: 200,
            lr: 1e-4,
            clip_norm: 5.0,
            dropout_p: 0.5,
            init_range: 0.1,
            epochs: 20,
            bptt_chunk: 100,
            batch_size: 32,
            seed: 42,
        }
    }
}

impl LmConfig {
    /// Checks every field against its documented range.
    pub fn validate(&self) -> Result<()> {
        fn bad(msg: alloc::string::String) -> Result<()> {
            Err(Error::InvalidConfig(msg))
        }
        if !(1..=2).contains(&self.num_layers) {
            return bad(format!("num_layers must be 1 or 2, got {}", self.num_layers));
        }
        if self.cells == 0 {
            return bad(format!("cells must be positive, got {}", self.cells));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return bad(format!("lr must be a positive finite number, got {}", self.lr));
        }
        if !self.clip_norm.is_finite() || self.clip_norm <= 0.0 {
            return bad(format!(
                "clip_norm must be a positive finite number, got {}",
                self.clip_norm
            ));
        }
        if !self.dropout_p.is_finite() || !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!(
                "dropout_p must lie in [0, 1), got {}",
                self.dropout_p
            ));
        }
        if !self.init_range.is_finite() || self.init_range <= 0.0 {
            return bad(format!(
                "init_range must be a positive finite number, got {}",
                self.init_range
            ));
        }
        if self.bptt_chunk == 0 {
            return bad(format!(
                "bptt_chunk must be positive, got {}",
                self.bptt_chunk
            ));
        }
        if self.batch_size == 0 {
            return bad(format!(
                "batch_size must be positive, got {}",
                self.batch_size
            ));
        }
        Ok(())
    }
}

/// Weights of one LSTM layer. Gate blocks are packed `[i | f | g | o]`
/// along the 4d axis: input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer<F> {
    /// Input-to-gates weights, `d x 4d`.
    pub w_x: Tensor<F>,
    /// Hidden-to-gates (recurrent) weights, `d x 4d`.
    pub w_h: Tensor<F>,
    /// Gate biases, `1 x 4d`.
    pub bias: Tensor<F>,
}

/// All trainable weights of a model. The same struct doubles as the
/// gradient and Adam-moment container, since those are shaped identically.
#[derive(Debug, Clone, PartialEq)]
pub struct LmParams<F> {
    /// Call embeddings, `K x d` (row per dense index, BOS and UNK included).
    pub embedding: Tensor<F>,
    /// The stacked LSTM layers, bottom first.
    pub layers: Vec<LstmLayer<F>>,
    /// Hidden-to-logits projection, `d x K`.
    pub proj: Tensor<F>,
    /// Logit biases, `1 x K`.
    pub proj_bias: Tensor<F>,
}

impl<F: Float> LmParams<F> {
    /// Draws every weight — biases included — uniformly from
    /// `[-init_range, init_range]`, using a ChaCha stream derived from the
    /// config seed. Identical configs therefore initialize identically.
    #[must_use]
    pub fn init(config: &LmConfig, vocab_size: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, INIT_STREAM));
        let r = config.init_range;
        let d = config.cells;
        let mut fill = |t: &mut Tensor<F>| {
            for v in t.as_mut_slice() {
                let u: f64 = rng.random();
                *v = from_f64(u * 2.0 * r - r);
            }
        };
        let mut params = LmParams::zeros(config.num_layers, d, vocab_size);
        // Canonical tensor order — keep in sync with `tensors()`.
        fill(&mut params.embedding);
        for layer in &mut params.layers {
            fill(&mut layer.w_x);
            fill(&mut layer.w_h);
            fill(&mut layer.bias);
        }
        fill(&mut params.proj);
        fill(&mut params.proj_bias);
        params
    }

    /// Allocates an all-zero parameter set of the given shape.
    #[must_use]
    pub fn zeros(num_layers: usize, cells: usize, vocab_size: usize) -> Self {
        let layers = (0..num_layers)
            .map(|_| LstmLayer {
                w_x: Tensor::zeros(cells, 4 * cells),
                w_h: Tensor::zeros(cells, 4 * cells),
                bias: Tensor::zeros(1, 4 * cells),
            })
            .collect();
        LmParams {
            embedding: Tensor::zeros(vocab_size, cells),
            layers,
            proj: Tensor::zeros(cells, vocab_size),
            proj_bias: Tensor::zeros(1, vocab_size),
        }
    }

    /// A zero-filled clone of this shape (gradient / moment buffers).
    #[must_use]
    pub fn zeros_like(&self) -> Self {
        LmParams::zeros(self.num_layers(), self.cells(), self.vocab_size())
    }

    #[inline]
    #[must_use]
    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    #[inline]
    #[must_use]
    pub fn cells(&self) -> usize {
        self.embedding.cols()
    }

    #[inline]
    #[must_use]
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// All tensors in canonical order: embedding, then per layer
    /// `w_x, w_h, bias`, then projection and its bias. Initialization,
    /// optimizer state, clipping, and serialization all walk this order.
    #[must_use]
    pub fn tensors(&self) -> Vec<&Tensor<F>> {
        let mut v = Vec::with_capacity(2 + 3 * self.layers.len() + 1);
        v.push(&self.embedding);
        for layer in &self.layers {
            v.push(&layer.w_x);
            v.push(&layer.w_h);
            v.push(&layer.bias);
        }
        v.push(&self.proj);
        v.push(&self.proj_bias);
        v
    }

    /// Mutable variant of [`tensors`](Self::tensors), same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<F>> {
        let mut v: Vec<&mut Tensor<F>> = Vec::with_capacity(2 + 3 * self.layers.len() + 1);
        v.push(&mut self.embedding);
        for layer in &mut self.layers {
            v.push(&mut layer.w_x);
            v.push(&mut layer.w_h);
            v.push(&mut layer.bias);
        }
        v.push(&mut self.proj);
        v.push(&mut self.proj_bias);
        v
    }

    /// Total number of scalar parameters.
    #[must_use]
    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// A trained model: weights, the vocabulary they were trained against, the
/// configuration used, and the per-epoch loss log.
#[derive(Debug, Clone, PartialEq)]
pub struct LmModel<F> {
    pub params: LmParams<F>,
    pub vocab: SyscallVocab,
    pub config: LmConfig,
    pub training_log: Vec<EpochStats>,
}
