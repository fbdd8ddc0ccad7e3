//! A minimal flat row-major matrix and the handful of dense kernels the
//! LSTM needs. Kept deliberately small: the model below only ever multiplies
//! 2-D matrices and accumulates, so a general tensor library would be dead
//! weight in a `no_std` crate.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

/// Converts an `f64` constant into the working float type.
///
/// Panics only if `x` is not representable at all (never the case for the
/// finite configuration constants this crate feeds it).
#[inline]
pub fn from_f64<F: Float>(x: f64) -> F {
    F::from(x).expect("finite f64 constant must convert")
}

/// Dense row-major matrix of `rows x cols` elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Float> Tensor<F> {
    /// Allocates a zero-filled `rows x cols` matrix.
    #[must_use]
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    /// Wraps an existing row-major buffer. Panics if the length is off.
    #[must_use]
    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match shape");
        Tensor { rows, cols, data }
    }

    #[inline]
    #[must_use]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    #[must_use]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Total number of elements.
    #[inline]
    #[must_use]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    #[must_use]
    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    #[must_use]
    pub fn at(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.cols + c] = v;
    }

    /// The whole buffer in row-major order.
    #[inline]
    #[must_use]
    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// Sets every element to zero (reusing the allocation).
    pub fn clear(&mut self) {
        for v in &mut self.data {
            *v = F::zero();
        }
    }

    /// Multiplies every element by `s`.
    pub fn scale(&mut self, s: F) {
        for v in &mut self.data {
            *v = *v * s;
        }
    }
}

/// `out += a . b` for row-major `a: m x k`, `b: k x n`, `out: m x n`.
///
/// Loop order is i-k-j so the inner loop walks both `b` and `out` rows
/// sequentially. Each output row depends only on the matching input row,
/// which keeps per-trace results identical regardless of what else shares
/// the batch.
pub fn matmul_acc<F: Float>(out: &mut Tensor<F>, a: &Tensor<F>, b: &Tensor<F>) {
    assert_eq!(a.cols, b.rows, "inner dimensions must agree");
    assert_eq!(out.rows, a.rows, "output rows must match a");
    assert_eq!(out.cols, b.cols, "output cols must match b");
    for i in 0..a.rows {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (kk, &a_ik) in a_row.iter().enumerate() {
            if a_ik == F::zero() {
                continue;
            }
            let b_row = b.row(kk);
            for (o, &b_kj) in out_row.iter_mut().zip(b_row) {
                *o = *o + a_ik * b_kj;
            }
        }
    }
}

/// `out += a . b^T` for `a: m x k`, `b: n x k`, `out: m x n`.
pub fn matmul_bt_acc<F: Float>(out: &mut Tensor<F>, a: &Tensor<F>, b: &Tensor<F>) {
    assert_eq!(a.cols, b.cols, "inner dimensions must agree");
    assert_eq!(out.rows, a.rows, "output rows must match a");
    assert_eq!(out.cols, b.rows, "output cols must match b^T");
    for i in 0..a.rows {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = b.row(j);
            let mut acc = F::zero();
            for (&x, &y) in a_row.iter().zip(b_row) {
                acc = acc + x * y;
            }
            *o = *o + acc;
        }
    }
}

/// `out += a^T . b` for `a: m x k`, `b: m x n`, `out: k x n`.
pub fn matmul_tn_acc<F: Float>(out: &mut Tensor<F>, a: &Tensor<F>, b: &Tensor<F>) {
    assert_eq!(a.rows, b.rows, "outer dimensions must agree");
    assert_eq!(out.rows, a.cols, "output rows must match a^T");
    assert_eq!(out.cols, b.cols, "output cols must match b");
    for i in 0..a.rows {
        let a_row = a.row(i);
        let b_row = b.row(i);
        for (kk, &a_ik) in a_row.iter().enumerate() {
            if a_ik == F::zero() {
                continue;
            }
            let out_row = out.row_mut(kk);
            for (o, &b_ij) in out_row.iter_mut().zip(b_row) {
                *o = *o + a_ik * b_ij;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(rows, cols, data.to_vec())
    }

    #[test]
    fn matmul_matches_hand_product() {
        // [1 2; 3 4] . [5 6; 7 8] = [19 22; 43 50]
        let a = t(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = t(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        let mut out = Tensor::zeros(2, 2);
        matmul_acc(&mut out, &a, &b);
        assert_eq!(out.as_slice(), &[19.0, 22.0, 43.0, 50.0]);
        // Accumulation: running again doubles the result.
        matmul_acc(&mut out, &a, &b);
        assert_eq!(out.as_slice(), &[38.0, 44.0, 86.0, 100.0]);
    }

    #[test]
    fn transposed_variants_agree_with_explicit_transpose() {
        let a = t(2, 3, &[1.0, -2.0, 0.5, 3.0, 4.0, -1.0]);
        let b = t(4, 3, &[0.5, 1.0, 2.0, -1.5, 0.0, 1.0, 2.5, -2.0, 3.0, 0.0, 1.0, 4.0]);
        // a . b^T via the dedicated kernel...
        let mut via_bt = Tensor::zeros(2, 4);
        matmul_bt_acc(&mut via_bt, &a, &b);
        // ...vs. materializing b^T and using the plain kernel.
        let mut bt = Tensor::zeros(3, 4);
        for i in 0..4 {
            for j in 0..3 {
                bt.set(j, i, b.at(i, j));
            }
        }
        let mut direct = Tensor::zeros(2, 4);
        matmul_acc(&mut direct, &a, &bt);
        assert_eq!(via_bt.as_slice(), direct.as_slice());

        // Same cross-check for a^T . c.
        let c = t(2, 4, &[1.0, 0.0, -1.0, 2.0, 0.5, 3.0, 1.0, -2.0]);
        let mut via_tn = Tensor::zeros(3, 4);
        matmul_tn_acc(&mut via_tn, &a, &c);
        let mut at = Tensor::zeros(3, 2);
        for i in 0..2 {
            for j in 0..3 {
                at.set(j, i, a.at(i, j));
            }
        }
        let mut direct_tn = Tensor::zeros(3, 4);
        matmul_acc(&mut direct_tn, &at, &c);
        assert_eq!(via_tn.as_slice(), direct_tn.as_slice());
    }

    #[test]
    fn rows_are_independent_views() {
        let mut m: Tensor<f32> = Tensor::zeros(3, 2);
        m.row_mut(1).copy_from_slice(&[1.0, 2.0]);
        assert_eq!(m.row(0), &[0.0, 0.0]);
        assert_eq!(m.row(1), &[1.0, 2.0]);
        assert_eq!(m.at(1, 1), 2.0);
    }
}
