//! Forward and backward passes of the stacked LSTM.
//!
//! The recurrence, per layer, with gate blocks `[i | f | g | o]`:
//!
//! ```text
//! z = x_t . w_x + h_{t-1} . w_h + bias
//! i = sigmoid(z_i)   f = sigmoid(z_f)   g = tanh(z_g)   o = sigmoid(z_o)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```
//!
//! The bottom layer reads embedding rows; each layer feeds the next; the top
//! hidden state is projected to one logit row per position. Dropout (when
//! enabled) hits only non-recurrent connections — the input entering each
//! layer and the top state entering the projection — with a fresh
//! inverted-scaled mask per position; `h`/`c` carry across time untouched.
//!
//! Gradients are computed by explicit back-propagation through time. The
//! sequence is processed in chunks: the forward state always carries across
//! chunk boundaries exactly (so losses, scores, and logits never depend on
//! the chunk length), while the backward pass stops at each boundary, which
//! is what truncates BPTT.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Batch, PAD_INDEX};
use crate::tensor::{from_f64, matmul_acc, matmul_bt_acc, matmul_tn_acc, Tensor};

use super::LmParams;

/// Per-position next-call logits for a whole batch, laid out `(row, step)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLogits<F> {
    data: Vec<F>,
    rows: usize,
    steps: usize,
    k: usize,
}

impl<F: Float> StepLogits<F> {
    fn new(rows: usize, steps: usize, k: usize) -> Self {
        StepLogits {
            data: vec![F::zero(); rows * steps * k],
            rows,
            steps,
            k,
        }
    }

    #[inline]
    #[must_use]
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of positions, which equals the batch's padded length: one
    /// logit row per position, so a lone begin marker yields exactly one.
    #[inline]
    #[must_use]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    #[must_use]
    pub fn k(&self) -> usize {
        self.k
    }

    /// Logits emitted after consuming position `t` of row `b`.
    #[inline]
    #[must_use]
    pub fn at(&self, b: usize, t: usize) -> &[F] {
        let base = (b * self.steps + t) * self.k;
        &self.data[base..base + self.k]
    }

    #[inline]
    fn at_mut(&mut self, b: usize, t: usize) -> &mut [F] {
        let base = (b * self.steps + t) * self.k;
        &mut self.data[base..base + self.k]
    }
}

/// Dropout setting for a forward pass. Scoring and validation always run
/// [`Dropout::Off`]; training enables it with the run's dedicated RNG.
pub enum Dropout<'a> {
    Off,
    On { p: f64, rng: &'a mut ChaCha8Rng },
}

/// Hidden and cell state of one layer for every batch row (`B x d` each).
struct LayerState<F> {
    h: Tensor<F>,
    c: Tensor<F>,
}

fn fresh_states<F: Float>(num_layers: usize, rows: usize, cells: usize) -> Vec<LayerState<F>> {
    (0..num_layers)
        .map(|_| LayerState {
            h: Tensor::zeros(rows, cells),
            c: Tensor::zeros(rows, cells),
        })
        .collect()
}

/// Everything the backward pass needs about one (position, layer) step.
struct StepCache<F> {
    /// Input after dropout — what actually multiplied `w_x`.
    x_tilde: Tensor<F>,
    /// Dropout multiplier applied to that input (`None` when disabled).
    in_mask: Option<Tensor<F>>,
    /// Activated gates `[i | f | g | o]`, `B x 4d`.
    gates: Tensor<F>,
    /// Post-step cell state.
    c: Tensor<F>,
    /// `tanh(c)`.
    tanh_c: Tensor<F>,
    /// Post-step hidden state (before any dropout).
    h: Tensor<F>,
}

/// Cache for the projection input at one position.
struct TopCache<F> {
    h_dropped: Tensor<F>,
    mask: Option<Tensor<F>>,
}

/// Forward tape for one BPTT chunk.
struct ChunkCache<F> {
    /// Per-layer states entering the chunk.
    start_h: Vec<Tensor<F>>,
    start_c: Vec<Tensor<F>>,
    /// `steps[t_local][layer]`.
    steps: Vec<Vec<StepCache<F>>>,
    top: Vec<TopCache<F>>,
}

/// Applies inverted dropout: kept elements scale by `1/(1-p)` so expected
/// activations match the dropout-free network and evaluation needs no
/// rescaling. Returns the (possibly modified) input and the mask used.
fn apply_dropout<F: Float>(
    mut x: Tensor<F>,
    dropout: &mut Dropout<'_>,
) -> (Tensor<F>, Option<Tensor<F>>) {
    match dropout {
        Dropout::Off => (x, None),
        Dropout::On { p, rng } => {
            let p = *p;
            if p == 0.0 {
                return (x, None);
            }
            debug_assert!((0.0..1.0).contains(&p), "dropout_p must be in [0, 1)");
            let scale: F = from_f64(1.0 / (1.0 - p));
            let mut mask = Tensor::zeros(x.rows(), x.cols());
            for (m, v) in mask.as_mut_slice().iter_mut().zip(x.as_mut_slice()) {
                let u: f64 = rng.random();
                if u < p {
                    *m = F::zero();
                    *v = F::zero();
                } else {
                    *m = scale;
                    *v = *v * scale;
                }
            }
            (x, Some(mask))
        }
    }
}

#[inline]
fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Runs positions `t0..t1`, mutating `states` in place and writing logits
/// into `logits` at local offsets `0..t1-t0`. Optionally records the tape
/// for backward and captures each row's final hidden state (taken at the
/// row's last real position, before any dropout).
#[allow(clippy::too_many_arguments)]
fn forward_chunk<F: Float>(
    params: &LmParams<F>,
    batch: &Batch,
    t0: usize,
    t1: usize,
    states: &mut [LayerState<F>],
    dropout: &mut Dropout<'_>,
    mut cache: Option<&mut ChunkCache<F>>,
    logits: &mut StepLogits<F>,
    mut final_h: Option<&mut Tensor<F>>,
) {
    let rows = batch.rows();
    let d = params.cells();
    let k = params.vocab_size();
    debug_assert_eq!(logits.k, k);
    debug_assert!(logits.steps >= t1 - t0);

    for t in t0..t1 {
        // Embed position t; padded rows stay zero and are never targets.
        let mut x = Tensor::zeros(rows, d);
        for b in 0..rows {
            let ix = batch.index_at(b, t);
            if ix != PAD_INDEX {
                x.row_mut(b).copy_from_slice(params.embedding.row(ix as usize));
            }
        }

        let mut step_caches: Vec<StepCache<F>> = Vec::new();
        for (l, layer) in params.layers.iter().enumerate() {
            let (x_tilde, in_mask) = apply_dropout(x, dropout);

            let mut z = Tensor::zeros(rows, 4 * d);
            matmul_acc(&mut z, &x_tilde, &layer.w_x);
            matmul_acc(&mut z, &states[l].h, &layer.w_h);
            let bias = layer.bias.row(0);
            for b in 0..rows {
                for (zv, &bv) in z.row_mut(b).iter_mut().zip(bias) {
                    *zv = *zv + bv;
                }
            }

            // Activate gates in place and advance the cell.
            let mut c_new = Tensor::zeros(rows, d);
            let mut tanh_c = Tensor::zeros(rows, d);
            let mut h_new = Tensor::zeros(rows, d);
            for b in 0..rows {
                let zr = z.row_mut(b);
                for j in 0..d {
                    let i_g = sigmoid(zr[j]);
                    let f_g = sigmoid(zr[d + j]);
                    let g_g = zr[2 * d + j].tanh();
                    let o_g = sigmoid(zr[3 * d + j]);
                    zr[j] = i_g;
                    zr[d + j] = f_g;
                    zr[2 * d + j] = g_g;
                    zr[3 * d + j] = o_g;
                    let c = f_g * states[l].c.at(b, j) + i_g * g_g;
                    let tc = c.tanh();
                    c_new.set(b, j, c);
                    tanh_c.set(b, j, tc);
                    h_new.set(b, j, o_g * tc);
                }
            }

            states[l].h = h_new.clone();
            states[l].c = c_new.clone();
            if cache.is_some() {
                step_caches.push(StepCache {
                    x_tilde,
                    in_mask,
                    gates: z,
                    c: c_new,
                    tanh_c,
                    h: h_new.clone(),
                });
            }
            x = h_new;
        }

        // Capture final hidden states at each row's last real position.
        if let Some(fh) = final_h.as_deref_mut() {
            for b in 0..rows {
                if batch.len_of(b) == t + 1 {
                    fh.row_mut(b).copy_from_slice(states[params.num_layers() - 1].h.row(b));
                }
            }
        }

        // Project the (possibly dropped) top state to logits.
        let (h_top, top_mask) = apply_dropout(x, dropout);
        let mut lg = Tensor::zeros(rows, k);
        for b in 0..rows {
            lg.row_mut(b).copy_from_slice(params.proj_bias.row(0));
        }
        matmul_acc(&mut lg, &h_top, &params.proj);
        for b in 0..rows {
            logits.at_mut(b, t - t0).copy_from_slice(lg.row(b));
        }

        if let Some(c) = cache.as_deref_mut() {
            c.steps.push(step_caches);
            c.top.push(TopCache {
                h_dropped: h_top,
                mask: top_mask,
            });
        }
    }
}

/// Full-length forward pass. Returns one logit row per position for every
/// batch row, plus each row's final top-layer hidden state (`B x d`) — the
/// fixed-size trace representation.
pub fn forward<F: Float>(
    params: &LmParams<F>,
    batch: &Batch,
    dropout: &mut Dropout<'_>,
) -> (StepLogits<F>, Tensor<F>) {
    let rows = batch.rows();
    let mut states = fresh_states(params.num_layers(), rows, params.cells());
    let mut logits = StepLogits::new(rows, batch.max_len(), params.vocab_size());
    let mut final_h = Tensor::zeros(rows, params.cells());
    forward_chunk(
        params,
        batch,
        0,
        batch.max_len(),
        &mut states,
        dropout,
        None,
        &mut logits,
        Some(&mut final_h),
    );
    (logits, final_h)
}

/// Log-sum-exp of a logit row, accumulated in `f64` with the usual
/// max-subtraction guard.
fn logsumexp64<F: Float>(row: &[F]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for &v in row {
        let v = v.to_f64().unwrap_or(f64::NAN);
        // A NaN logit must poison the max (and thus the result), which
        // `f64::max` would silently skip.
        if v.is_nan() || v > m {
            m = v;
        }
    }
    if !m.is_finite() {
        return f64::NAN;
    }
    let mut s = 0.0f64;
    for &v in row {
        s += Float::exp(v.to_f64().unwrap_or(f64::NAN) - m);
    }
    m + Float::ln(s)
}

/// Mean negative log-likelihood of the batch's real calls under the given
/// logits: each position `t >= 1` of each row is predicted by the logits
/// emitted at `t - 1`. Padded positions are excluded; an all-padding batch
/// scores 0. Accumulation is in `f64`.
#[must_use]
pub fn nll_loss<F: Float>(logits: &StepLogits<F>, batch: &Batch) -> f64 {
    // Summed per row first, then across rows, matching `mean_nll` bit for
    // bit so full and streaming evaluation agree exactly.
    let mut total = 0.0f64;
    let mut n = 0usize;
    for b in 0..batch.rows() {
        let mut row_total = 0.0f64;
        for t in 1..batch.len_of(b) {
            let row = logits.at(b, t - 1);
            let target = batch.index_at(b, t) as usize;
            let lse = logsumexp64(row);
            row_total += lse - row[target].to_f64().unwrap_or(f64::NAN);
            n += 1;
        }
        total += row_total;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Computes the summed NLL over targets predicted inside `t0..t1` and
/// overwrites the chunk logits with `dL/dlogits` (softmax minus one-hot,
/// scaled by `inv_n`); rows without a target at `t + 1` get zero gradient.
fn loss_and_dlogits<F: Float>(
    logits: &mut StepLogits<F>,
    batch: &Batch,
    t0: usize,
    t1: usize,
    inv_n: f64,
) -> f64 {
    let mut total = 0.0f64;
    for b in 0..batch.rows() {
        for t in t0..t1 {
            let has_target = batch.is_target(b, t + 1);
            let row = logits.at_mut(b, t - t0);
            if !has_target {
                for v in row.iter_mut() {
                    *v = F::zero();
                }
                continue;
            }
            let target = batch.index_at(b, t + 1) as usize;
            let lse = logsumexp64(row);
            total += lse - row[target].to_f64().unwrap_or(f64::NAN);
            for (j, v) in row.iter_mut().enumerate() {
                let p = Float::exp(v.to_f64().unwrap_or(f64::NAN) - lse);
                let grad = if j == target { p - 1.0 } else { p };
                *v = from_f64(grad * inv_n);
            }
        }
    }
    total
}

/// Back-propagates one chunk. `dlogits` holds `dL/dlogits` for the chunk's
/// positions; gradients accumulate into `grads`. State gradients start at
/// zero at the chunk's end — nothing flows in from later chunks — which is
/// exactly the BPTT truncation.
fn backward_chunk<F: Float>(
    params: &LmParams<F>,
    batch: &Batch,
    cache: &ChunkCache<F>,
    dlogits: &StepLogits<F>,
    t0: usize,
    grads: &mut LmParams<F>,
) {
    let rows = batch.rows();
    let d = params.cells();
    let k = params.vocab_size();
    let num_layers = params.num_layers();
    let steps = cache.steps.len();

    // Gradients flowing backward through time, per layer.
    let mut dh_carry: Vec<Tensor<F>> = (0..num_layers).map(|_| Tensor::zeros(rows, d)).collect();
    let mut dc_carry: Vec<Tensor<F>> = (0..num_layers).map(|_| Tensor::zeros(rows, d)).collect();

    for t_local in (0..steps).rev() {
        let t = t0 + t_local;

        // Projection path: dproj, dproj_bias, and the gradient into the
        // (dropped) top hidden state.
        let mut dlg = Tensor::zeros(rows, k);
        for b in 0..rows {
            dlg.row_mut(b).copy_from_slice(dlogits.at(b, t_local));
        }
        let top = &cache.top[t_local];
        matmul_tn_acc(&mut grads.proj, &top.h_dropped, &dlg);
        for b in 0..rows {
            let src = dlg.row(b);
            for (g, &v) in grads.proj_bias.row_mut(0).iter_mut().zip(src) {
                *g = *g + v;
            }
        }
        let mut dh_top = Tensor::zeros(rows, d);
        matmul_bt_acc(&mut dh_top, &dlg, &params.proj);
        if let Some(mask) = &top.mask {
            for (v, &m) in dh_top.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *v = *v * m;
            }
        }

        // Descend through the layers; `incoming` is the gradient arriving at
        // this layer's hidden output from consumers at this same position.
        let mut incoming = dh_top;
        for l in (0..num_layers).rev() {
            let sc = &cache.steps[t_local][l];
            let layer = &params.layers[l];

            // Total gradient at h_t and c_t.
            let mut dh_t = incoming;
            for (v, &c) in dh_t.as_mut_slice().iter_mut().zip(dh_carry[l].as_slice()) {
                *v = *v + c;
            }
            let mut dc_t = dc_carry[l].clone();
            for b in 0..rows {
                for j in 0..d {
                    let tc = sc.tanh_c.at(b, j);
                    let o_g = sc.gates.at(b, 3 * d + j);
                    let add = dh_t.at(b, j) * o_g * (F::one() - tc * tc);
                    dc_t.set(b, j, dc_t.at(b, j) + add);
                }
            }

            // Gate pre-activation gradients, packed like the gates.
            let c_prev = |b: usize, j: usize| -> F {
                if t_local > 0 {
                    cache.steps[t_local - 1][l].c.at(b, j)
                } else {
                    cache.start_c[l].at(b, j)
                }
            };
            let mut dz = Tensor::zeros(rows, 4 * d);
            for b in 0..rows {
                for j in 0..d {
                    let i_g = sc.gates.at(b, j);
                    let f_g = sc.gates.at(b, d + j);
                    let g_g = sc.gates.at(b, 2 * d + j);
                    let o_g = sc.gates.at(b, 3 * d + j);
                    let dc = dc_t.at(b, j);
                    dz.set(b, j, dc * g_g * i_g * (F::one() - i_g));
                    dz.set(b, d + j, dc * c_prev(b, j) * f_g * (F::one() - f_g));
                    dz.set(b, 2 * d + j, dc * i_g * (F::one() - g_g * g_g));
                    let do_ = dh_t.at(b, j) * sc.tanh_c.at(b, j);
                    dz.set(b, 3 * d + j, do_ * o_g * (F::one() - o_g));
                }
            }

            // Cell gradient for the previous position.
            for b in 0..rows {
                for j in 0..d {
                    let f_g = sc.gates.at(b, d + j);
                    dc_carry[l].set(b, j, dc_t.at(b, j) * f_g);
                }
            }

            // Parameter gradients.
            matmul_tn_acc(&mut grads.layers[l].w_x, &sc.x_tilde, &dz);
            let h_prev_tensor = if t_local > 0 {
                &cache.steps[t_local - 1][l].h
            } else {
                &cache.start_h[l]
            };
            matmul_tn_acc(&mut grads.layers[l].w_h, h_prev_tensor, &dz);
            for b in 0..rows {
                let src = dz.row(b);
                for (g, &v) in grads.layers[l].bias.row_mut(0).iter_mut().zip(src) {
                    *g = *g + v;
                }
            }

            // Gradients into the inputs: recurrent (carried to t-1) and
            // downward (previous layer's h, or the embedding).
            let mut dh_prev = Tensor::zeros(rows, d);
            matmul_bt_acc(&mut dh_prev, &dz, &layer.w_h);
            dh_carry[l] = dh_prev;

            let mut dx = Tensor::zeros(rows, d);
            matmul_bt_acc(&mut dx, &dz, &layer.w_x);
            if let Some(mask) = &sc.in_mask {
                for (v, &m) in dx.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                    *v = *v * m;
                }
            }
            if l == 0 {
                for b in 0..rows {
                    let ix = batch.index_at(b, t);
                    if ix != PAD_INDEX {
                        let src = dx.row(b);
                        let dst = grads.embedding.row_mut(ix as usize);
                        for (g, &v) in dst.iter_mut().zip(src) {
                            *g = *g + v;
                        }
                    }
                }
            }
            incoming = dx;
        }
    }
}

/// Forward + backward over a whole batch with BPTT truncated to
/// `bptt_chunk` positions. Returns the mean NLL over real targets and the
/// parameter gradients of that mean. The forward state carries across
/// chunks exactly; only gradient flow is truncated at chunk boundaries.
pub fn nll_and_grads<F: Float>(
    params: &LmParams<F>,
    batch: &Batch,
    dropout: &mut Dropout<'_>,
    bptt_chunk: usize,
) -> (f64, LmParams<F>) {
    assert!(bptt_chunk >= 1, "bptt_chunk must be at least 1");
    let mut grads = params.zeros_like();
    let n_targets = batch.num_targets();
    if n_targets == 0 {
        return (0.0, grads);
    }
    let inv_n = 1.0 / n_targets as f64;
    let rows = batch.rows();
    let mut states = fresh_states(params.num_layers(), rows, params.cells());
    let mut total = 0.0f64;

    let mut t0 = 0;
    while t0 < batch.max_len() {
        let t1 = (t0 + bptt_chunk).min(batch.max_len());
        let mut cache = ChunkCache {
            start_h: states.iter().map(|s| s.h.clone()).collect(),
            start_c: states.iter().map(|s| s.c.clone()).collect(),
            steps: Vec::with_capacity(t1 - t0),
            top: Vec::with_capacity(t1 - t0),
        };
        let mut logits = StepLogits::new(rows, t1 - t0, params.vocab_size());
        forward_chunk(
            params,
            batch,
            t0,
            t1,
            &mut states,
            dropout,
            Some(&mut cache),
            &mut logits,
            None,
        );
        total += loss_and_dlogits(&mut logits, batch, t0, t1, inv_n);
        backward_chunk(params, batch, &cache, &logits, t0, &mut grads);
        t0 = t1;
    }

    (total * inv_n, grads)
}

/// Streaming mean NLL without gradients (dropout off), chunked only to
/// bound memory. Accumulation is per row and then across rows in order, so
/// the result is bit-identical for every chunk length and matches
/// [`nll_loss`] over a full forward pass exactly.
#[must_use]
pub fn mean_nll<F: Float>(params: &LmParams<F>, batch: &Batch, chunk: usize) -> f64 {
    assert!(chunk >= 1, "chunk must be at least 1");
    let n_targets = batch.num_targets();
    if n_targets == 0 {
        return 0.0;
    }
    let rows = batch.rows();
    let mut states = fresh_states(params.num_layers(), rows, params.cells());
    let mut row_totals = vec![0.0f64; rows];
    let mut t0 = 0;
    while t0 < batch.max_len() {
        let t1 = (t0 + chunk).min(batch.max_len());
        let mut logits = StepLogits::new(rows, t1 - t0, params.vocab_size());
        forward_chunk(
            params,
            batch,
            t0,
            t1,
            &mut states,
            &mut Dropout::Off,
            None,
            &mut logits,
            None,
        );
        for (b, row_total) in row_totals.iter_mut().enumerate() {
            for t in t0..t1 {
                if batch.is_target(b, t + 1) {
                    let row = logits.at(b, t - t0);
                    let target = batch.index_at(b, t + 1) as usize;
                    *row_total += logsumexp64(row) - row[target].to_f64().unwrap_or(f64::NAN);
                }
            }
        }
        t0 = t1;
    }
    row_totals.iter().sum::<f64>() / n_targets as f64
}

/// Streaming computation of each row's final top-layer hidden state.
#[must_use]
pub fn final_hidden<F: Float>(params: &LmParams<F>, batch: &Batch, chunk: usize) -> Tensor<F> {
    assert!(chunk >= 1, "chunk must be at least 1");
    let rows = batch.rows();
    let mut states = fresh_states(params.num_layers(), rows, params.cells());
    let mut final_h = Tensor::zeros(rows, params.cells());
    let mut t0 = 0;
    while t0 < batch.max_len() {
        let t1 = (t0 + chunk).min(batch.max_len());
        let mut logits = StepLogits::new(rows, t1 - t0, params.vocab_size());
        forward_chunk(
            params,
            batch,
            t0,
            t1,
            &mut states,
            &mut Dropout::Off,
            None,
            &mut logits,
            Some(&mut final_h),
        );
        t0 = t1;
    }
    final_h
}
