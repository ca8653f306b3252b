//! Simplex-projection normalization for slot competition.
//!
//! `sparse_softmax` is the Euclidean projection of a score vector onto the
//! probability simplex. Unlike softmax it produces exact zeros, so each
//! token ends up attached to a small number of concept slots. A plain
//! softmax is kept behind [`SlotNorm`] for ablation runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Normalization applied across concept slots for every token column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SlotNorm {
    #[default]
    Sparsemax,
    Softmax,
}

impl SlotNorm {
    pub fn apply<T: Real>(&self, z: &[T]) -> Result<Vec<T>> {
        match self {
            SlotNorm::Sparsemax => sparse_softmax(z),
            SlotNorm::Softmax => softmax(z),
        }
    }

    /// Pull an upstream gradient back through the normalization.
    /// `p` must be the output previously produced for this column.
    pub fn backward<T: Real>(&self, p: &[T], grad_out: &[T]) -> Vec<T> {
        match self {
            SlotNorm::Sparsemax => sparsemax_backward(p, grad_out),
            SlotNorm::Softmax => softmax_backward(p, grad_out),
        }
    }
}

/// Euclidean projection of `z` onto the probability simplex (sparsemax).
///
/// Solves `argmin_p ||p - z||^2` subject to `p >= 0`, `sum p = 1` by the
/// sorted-threshold rule: with `z` sorted descending, the support is the
/// longest prefix whose entries exceed the running threshold
/// `tau = (prefix_sum - 1) / prefix_len`.
pub fn sparse_softmax<T: Real>(z: &[T]) -> Result<Vec<T>> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "sparse_softmax received a non-finite input".into(),
        ));
    }
    if z.is_empty() {
        return Ok(Vec::new());
    }
    let mut sorted: Vec<T> = z.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite inputs are orderable"));

    let one = T::one();
    let mut cumulative = T::zero();
    let mut support = 0usize;
    let mut threshold = T::zero();
    for (j, &value) in sorted.iter().enumerate() {
        cumulative = cumulative + value;
        let count = T::of((j + 1) as f64);
        // value stays in the support while 1 + (j+1)*z_(j) > cumulative.
        if one + count * value > cumulative {
            support = j + 1;
            threshold = (cumulative - one) / count;
        }
    }
    debug_assert!(support >= 1);
    Ok(z.iter()
        .map(|&v| (v - threshold).max(T::zero()))
        .collect())
}

/// Jacobian-vector product of sparsemax at output `p`:
/// `dz_i = [p_i > 0] * (g_i - mean_{j in support} g_j)`.
pub fn sparsemax_backward<T: Real>(p: &[T], grad_out: &[T]) -> Vec<T> {
    let mut support_sum = T::zero();
    let mut support_len = 0usize;
    for (pi, gi) in p.iter().zip(grad_out) {
        if *pi > T::zero() {
            support_sum = support_sum + *gi;
            support_len += 1;
        }
    }
    if support_len == 0 {
        return vec![T::zero(); p.len()];
    }
    let mean = support_sum / T::of(support_len as f64);
    p.iter()
        .zip(grad_out)
        .map(|(&pi, &gi)| if pi > T::zero() { gi - mean } else { T::zero() })
        .collect()
}

/// Numerically stable softmax (ablation alternative to sparsemax).
pub fn softmax<T: Real>(z: &[T]) -> Result<Vec<T>> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("softmax received a non-finite input".into()));
    }
    if z.is_empty() {
        return Ok(Vec::new());
    }
    let max = z.iter().cloned().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().cloned().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Jacobian-vector product of softmax at output `p`.
pub fn softmax_backward<T: Real>(p: &[T], grad_out: &[T]) -> Vec<T> {
    let inner: T = p.iter().zip(grad_out).map(|(&pi, &gi)| pi * gi).sum();
    p.iter()
        .zip(grad_out)
        .map(|(&pi, &gi)| pi * (gi - inner))
        .collect()
}
