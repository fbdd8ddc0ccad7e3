//! Optimization: Adam, global-norm gradient clipping, and the epoch loop.

use alloc::vec::Vec;

use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{make_batches, Batch, EncodedTrace, SyscallVocab};
use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::from_f64;

use super::net::{mean_nll, nll_and_grads, Dropout};
use super::{
    LmConfig, LmModel, LmParams, DROPOUT_STREAM, EPOCH_STREAM_BASE, EVAL_CHUNK, VAL_BATCH_STREAM,
};

/// Adam moment decay rates and denominator guard.
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Epochs without validation improvement tolerated before stopping early.
pub const EARLY_STOP_PATIENCE: usize = 3;

/// One epoch of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean NLL over training targets, as seen during the epoch (with
    /// dropout active).
    pub train_nll: f64,
    /// Mean NLL over validation targets, dropout off.
    pub val_nll: f64,
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    m: LmParams<F>,
    v: LmParams<F>,
    steps: u64,
}

impl<F: Float> AdamState<F> {
    /// Fresh zeroed moments for the given parameter shape.
    #[must_use]
    pub fn new(params: &LmParams<F>) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            steps: 0,
        }
    }

    /// Updates taken so far.
    #[must_use]
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One bias-corrected Adam step:
    /// `m = b1 m + (1-b1) g`, `v = b2 v + (1-b2) g^2`,
    /// `p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)`.
    pub fn update(&mut self, params: &mut LmParams<F>, grads: &LmParams<F>, lr: f64) {
        self.steps += 1;
        let t = self.steps as i32;
        let bc1: F = from_f64(1.0 - ADAM_BETA1.powi(t));
        let bc2: F = from_f64(1.0 - ADAM_BETA2.powi(t));
        let b1: F = from_f64(ADAM_BETA1);
        let b2: F = from_f64(ADAM_BETA2);
        let one = F::one();
        let lr: F = from_f64(lr);
        let eps: F = from_f64(ADAM_EPS);

        let mut ps = params.tensors_mut();
        let mut ms = self.m.tensors_mut();
        let mut vs = self.v.tensors_mut();
        let gs = grads.tensors();
        for i in 0..gs.len() {
            let p = ps[i].as_mut_slice();
            let m = ms[i].as_mut_slice();
            let v = vs[i].as_mut_slice();
            let g = gs[i].as_slice();
            for j in 0..g.len() {
                m[j] = b1 * m[j] + (one - b1) * g[j];
                v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] = p[j] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Global L2 norm across every gradient tensor, accumulated in `f64`.
#[must_use]
pub fn global_grad_norm<F: Float>(grads: &LmParams<F>) -> f64 {
    let mut sum = 0.0f64;
    for t in grads.tensors() {
        for &g in t.as_slice() {
            let g = g.to_f64().unwrap_or(f64::NAN);
            sum += g * g;
        }
    }
    Float::sqrt(sum)
}

/// Rescales all gradients by `clip_norm / norm` when the global norm
/// exceeds `clip_norm`; otherwise leaves them untouched. Returns the
/// pre-clip norm.
pub fn clip_gradients<F: Float>(grads: &mut LmParams<F>, clip_norm: f64) -> f64 {
    let norm = global_grad_norm(grads);
    if norm > clip_norm && norm > 0.0 {
        let scale: F = from_f64(clip_norm / norm);
        for t in grads.tensors_mut() {
            t.scale(scale);
        }
    }
    norm
}

/// One optimization step on a batch: backward pass, clip, Adam update.
/// Fails with [`Error::NonFiniteLoss`] (identifying the batch) if the loss
/// is NaN or infinite, leaving the parameters untouched.
pub fn train_step<F: Float>(
    params: &mut LmParams<F>,
    adam: &mut AdamState<F>,
    batch: &Batch,
    config: &LmConfig,
    dropout: &mut Dropout<'_>,
    batch_ix: usize,
) -> Result<f64> {
    let (loss, mut grads) = nll_and_grads(params, batch, dropout, config.bptt_chunk);
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { batch: batch_ix });
    }
    clip_gradients(&mut grads, config.clip_norm);
    adam.update(params, &grads, config.lr);
    Ok(loss)
}

/// Mean validation NLL across batches, weighted by target count.
fn weighted_mean_nll<F: Float>(params: &LmParams<F>, batches: &[Batch]) -> f64 {
    let mut total = 0.0f64;
    let mut n = 0usize;
    for b in batches {
        let targets = b.num_targets();
        total += mean_nll(params, b, EVAL_CHUNK) * targets as f64;
        n += targets;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Trains a language model on encoded normal-training traces.
///
/// Each epoch regroups the training set into freshly shuffled similar-length
/// batches, takes one [`train_step`] per batch, then scores the validation
/// set with dropout off. The best-validation snapshot is kept and returned;
/// training stops early after [`EARLY_STOP_PATIENCE`] epochs without
/// improvement. With an empty validation set the training NLL stands in, so
/// snapshotting and early stopping still behave.
///
/// Every random choice (init, dropout, shuffles) derives from
/// `config.seed`, making runs bit-for-bit reproducible.
pub fn train<F: Float>(
    train_traces: &[EncodedTrace],
    val_traces: &[EncodedTrace],
    vocab: &SyscallVocab,
    config: &LmConfig,
) -> Result<LmModel<F>> {
    config.validate()?;
    if train_traces.is_empty() {
        return Err(Error::Empty("training trace set"));
    }

    let mut params: LmParams<F> = LmParams::init(config, vocab.size());
    let mut adam = AdamState::new(&params);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, DROPOUT_STREAM));
    let val_batches = make_batches(
        val_traces,
        config.batch_size,
        seed::derive(config.seed, VAL_BATCH_STREAM),
    );

    let mut best_params = params.clone();
    let mut best_val = f64::INFINITY;
    let mut stale = 0usize;
    let mut log: Vec<EpochStats> = Vec::new();

    for epoch in 1..=config.epochs {
        let batches = make_batches(
            train_traces,
            config.batch_size,
            seed::derive(config.seed, EPOCH_STREAM_BASE + epoch as u64),
        );
        let mut total = 0.0f64;
        let mut targets = 0usize;
        for (i, batch) in batches.iter().enumerate() {
            let mut dropout = if config.dropout_p > 0.0 {
                Dropout::On {
                    p: config.dropout_p,
                    rng: &mut dropout_rng,
                }
            } else {
                Dropout::Off
            };
            let loss = train_step(&mut params, &mut adam, batch, config, &mut dropout, i)?;
            total += loss * batch.num_targets() as f64;
            targets += batch.num_targets();
        }
        let train_nll = if targets == 0 {
            0.0
        } else {
            total / targets as f64
        };
        let val_nll = if val_batches.is_empty() {
            train_nll
        } else {
            weighted_mean_nll(&params, &val_batches)
        };
        log.push(EpochStats {
            epoch,
            train_nll,
            val_nll,
        });

        if val_nll < best_val {
            best_val = val_nll;
            best_params = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= EARLY_STOP_PATIENCE {
                break;
            }
        }
    }

    Ok(LmModel {
        params: best_params,
        vocab: vocab.clone(),
        config: config.clone(),
        training_log: log,
    })
}
