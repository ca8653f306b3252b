//! Stage-1 training losses: softmax cross-entropy plus the concept
//! consistency and distinctiveness regularizers.
//!
//! Pair sums run over ordered distinct pairs and are divided by
//! `k * (k - 1)`, with `k` clamped to the batch size. A selection of fewer
//! than two samples contributes zero by convention.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Loss weighting and the top-k sample count for the pairwise terms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_con: f64,
    pub lambda_dist: f64,
    pub lambda_com: f64,
    /// Samples per concept entering the pairwise regularizers.
    pub top_k: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_con: 0.1,
            lambda_dist: -0.01,
            lambda_com: 1.0,
            top_k: 5,
        }
    }
}

/// Mean softmax cross-entropy over a batch, with per-sample logit
/// gradients.
pub fn cross_entropy_with_grads<T: Real>(
    logits: &[Array1<T>],
    labels: &[usize],
) -> Result<(T, Vec<Array1<T>>)> {
    if logits.len() != labels.len() || logits.is_empty() {
        return Err(Error::Config("cross entropy needs equal, non-zero batch".into()));
    }
    let inv_n = T::of(1.0 / logits.len() as f64);
    let mut total = T::zero();
    let mut grads = Vec::with_capacity(logits.len());
    for (row, &label) in logits.iter().zip(labels) {
        if label >= row.len() {
            return Err(Error::InvalidInput(format!(
                "label {label} out of range for {} classes",
                row.len()
            )));
        }
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let exps: Array1<T> = row.mapv(|v| (v - max).exp());
        let total_exp: T = exps.iter().cloned().sum();
        let log_z = total_exp.ln() + max;
        total = total + (log_z - row[label]);
        let mut grad = exps / total_exp;
        grad[label] = grad[label] - T::one();
        grads.push(grad * inv_n);
    }
    Ok((total * inv_n, grads))
}

pub fn cross_entropy<T: Real>(logits: &[Array1<T>], labels: &[usize]) -> Result<T> {
    cross_entropy_with_grads(logits, labels).map(|(v, _)| v)
}

/// Per concept, the batch indices of the `k` samples with the highest
/// activation (ties broken by sample index).
pub fn top_k_by_activation<T: Real>(t_batch: &[Array1<T>], concept: usize, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..t_batch.len()).collect();
    order.sort_by(|&a, &b| {
        t_batch[b][concept]
            .partial_cmp(&t_batch[a][concept])
            .expect("finite activations")
            .then(a.cmp(&b))
    });
    order.truncate(k.min(t_batch.len()));
    order
}

/// Consistency loss (scalar) plus gradients w.r.t. each sample's feature
/// matrix. For each concept the top-k samples by activation contribute
/// squared distances over ordered pairs of their feature rows.
pub fn consistency_with_grads<T: Real>(
    u_batch: &[Array2<T>],
    t_batch: &[Array1<T>],
    k: usize,
) -> (T, Vec<Array2<T>>) {
    let mut grads: Vec<Array2<T>> = u_batch.iter().map(|u| Array2::zeros(u.raw_dim())).collect();
    let n = u_batch.len();
    if n == 0 {
        return (T::zero(), grads);
    }
    let concepts = u_batch[0].nrows();
    let dim = u_batch[0].ncols();
    let k_eff = k.min(n);
    if k_eff < 2 {
        return (T::zero(), grads);
    }
    let denom = T::of((k_eff * (k_eff - 1)) as f64);
    let inv_m = T::of(1.0 / concepts as f64);
    let mut loss = T::zero();
    for m in 0..concepts {
        let selected = top_k_by_activation(t_batch, m, k_eff);
        let mut pair_sum = T::zero();
        // Row sums for the gradient: d/du_i = 4 * (k*u_i - sum_j u_j).
        let mut row_total: Array1<T> = Array1::zeros(dim);
        for &i in &selected {
            row_total = row_total + &u_batch[i].row(m);
        }
        for (a, &i) in selected.iter().enumerate() {
            for (b, &j) in selected.iter().enumerate() {
                if a == b {
                    continue;
                }
                let mut dist = T::zero();
                for d in 0..dim {
                    let diff = u_batch[i][[m, d]] - u_batch[j][[m, d]];
                    dist = dist + diff * diff;
                }
                pair_sum = pair_sum + dist;
            }
        }
        loss = loss + pair_sum / denom;
        let coeff = T::of(4.0) * inv_m / denom;
        let k_t = T::of(k_eff as f64);
        for &i in &selected {
            for d in 0..dim {
                let g = coeff * (k_t * u_batch[i][[m, d]] - row_total[d]);
                grads[i][[m, d]] = grads[i][[m, d]] + g;
            }
        }
    }
    (loss * inv_m, grads)
}

/// Consistency loss as a pure scalar (Eq. 3 semantics).
pub fn consistency_loss<T: Real>(u_batch: &[Array2<T>], t_batch: &[Array1<T>], k: usize) -> T {
    consistency_with_grads(u_batch, t_batch, k).0
}

/// Distinctiveness loss plus gradients w.r.t. each sample's feature
/// matrix: negated squared distances between per-concept mean features
/// over ordered concept pairs, divided by `k * (k - 1)` as specified.
pub fn distinctiveness_with_grads<T: Real>(
    u_batch: &[Array2<T>],
    t_batch: &[Array1<T>],
    k: usize,
) -> (T, Vec<Array2<T>>) {
    let mut grads: Vec<Array2<T>> = u_batch.iter().map(|u| Array2::zeros(u.raw_dim())).collect();
    let n = u_batch.len();
    if n == 0 {
        return (T::zero(), grads);
    }
    let concepts = u_batch[0].nrows();
    let dim = u_batch[0].ncols();
    let k_eff = k.min(n);
    if concepts < 2 || k_eff < 2 {
        return (T::zero(), grads);
    }
    let denom = T::of((k_eff * (k_eff - 1)) as f64);
    let inv_k = T::of(1.0 / k_eff as f64);

    let mut selections: Vec<Vec<usize>> = Vec::with_capacity(concepts);
    let mut means: Array2<T> = Array2::zeros((concepts, dim));
    for m in 0..concepts {
        let selected = top_k_by_activation(t_batch, m, k_eff);
        for &i in &selected {
            for d in 0..dim {
                means[[m, d]] = means[[m, d]] + u_batch[i][[m, d]] * inv_k;
            }
        }
        selections.push(selected);
    }

    let mut pair_sum = T::zero();
    for a in 0..concepts {
        for b in 0..concepts {
            if a == b {
                continue;
            }
            let mut dist = T::zero();
            for d in 0..dim {
                let diff = means[[a, d]] - means[[b, d]];
                dist = dist + diff * diff;
            }
            pair_sum = pair_sum + dist;
        }
    }
    let loss = -pair_sum / denom;

    // d/dmean_m = -(4 / denom) * (M * mean_m - sum_m' mean_m').
    let mean_total = means.sum_axis(ndarray::Axis(0));
    let coeff = -T::of(4.0) / denom;
    let m_t = T::of(concepts as f64);
    for m in 0..concepts {
        for &i in &selections[m] {
            for d in 0..dim {
                let g = coeff * (m_t * means[[m, d]] - mean_total[d]) * inv_k;
                grads[i][[m, d]] = grads[i][[m, d]] + g;
            }
        }
    }
    (loss, grads)
}

/// Distinctiveness loss as a pure scalar (Eq. 4 semantics, sign as
/// printed: the value is non-positive).
pub fn distinctiveness_loss<T: Real>(u_batch: &[Array2<T>], t_batch: &[Array1<T>], k: usize) -> T {
    distinctiveness_with_grads(u_batch, t_batch, k).0
}

/// Stage-1 objective: cross-entropy plus weighted regularizers.
pub fn stage1_loss<T: Real>(ce: T, consistency: T, distinctiveness: T, weights: &LossWeights) -> T {
    ce + T::of(weights.lambda_con) * consistency + T::of(weights.lambda_dist) * distinctiveness
}

/// Stage-2 objective: stage-1 objective plus the weighted
/// comprehensibility term.
pub fn stage2_loss<T: Real>(
    ce: T,
    consistency: T,
    distinctiveness: T,
    comprehensibility: T,
    weights: &LossWeights,
) -> T {
    stage1_loss(ce, consistency, distinctiveness, weights)
        + T::of(weights.lambda_com) * comprehensibility
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn consistency_zero_for_identical_features() {
        let u = vec![array![[1.0, 2.0]], array![[1.0, 2.0]]];
        let t = vec![array![1.0], array![0.5]];
        assert_eq!(consistency_loss(&u, &t, 2), 0.0);
    }

    #[test]
    fn consistency_ordered_pair_example() {
        // M=1, k=2, u=(0) and u'=(2): (4 + 4) / 2 = 4.
        let u = vec![array![[0.0]], array![[2.0]]];
        let t = vec![array![1.0], array![0.5]];
        assert_abs_diff_eq!(consistency_loss(&u, &t, 2), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn consistency_nonnegative_and_degenerate_batch() {
        let u = vec![array![[0.3, -1.0]], array![[2.0, 0.4]], array![[-0.7, 0.1]]];
        let t = vec![array![1.0], array![2.0], array![3.0]];
        assert!(consistency_loss(&u, &t, 3) >= 0.0);
        // Batch of one -> zero by convention.
        assert_eq!(consistency_loss(&u[..1], &t[..1], 5), 0.0);
    }

    #[test]
    fn distinctiveness_zero_for_identical_means() {
        let u = vec![array![[1.0], [1.0]], array![[1.0], [1.0]]];
        let t = vec![array![1.0, 1.0], array![0.5, 0.5]];
        assert_eq!(distinctiveness_loss(&u, &t, 2), 0.0);
    }

    #[test]
    fn distinctiveness_ordered_pair_example() {
        // M=2, k=2, means (0) and (2): -(4 + 4) / 2 = -4.
        let u = vec![array![[0.0], [2.0]], array![[0.0], [2.0]]];
        let t = vec![array![1.0, 1.0], array![0.5, 0.5]];
        assert_abs_diff_eq!(distinctiveness_loss(&u, &t, 2), -4.0, epsilon = 1e-12);
    }

    #[test]
    fn distinctiveness_nonpositive() {
        let u = vec![
            array![[0.3, -1.0], [0.2, 0.9]],
            array![[2.0, 0.4], [1.1, -0.3]],
        ];
        let t = vec![array![1.0, 2.0], array![2.0, 1.0]];
        assert!(distinctiveness_loss(&u, &t, 2) <= 0.0);
    }

    #[test]
    fn single_concept_distinctiveness_is_zero() {
        let u = vec![array![[0.0]], array![[2.0]]];
        let t = vec![array![1.0], array![0.5]];
        assert_eq!(distinctiveness_loss(&u, &t, 2), 0.0);
    }

    #[test]
    fn stage1_linear_combination() {
        let w = LossWeights::default();
        assert_abs_diff_eq!(stage1_loss(1.0, 4.0, -4.0, &w), 1.44, epsilon = 1e-12);
        let plain = LossWeights {
            lambda_con: 0.0,
            lambda_dist: 0.0,
            ..w
        };
        assert_eq!(stage1_loss(2.5, 100.0, -100.0, &plain), 2.5);
    }

    #[test]
    fn stage2_linear_combination() {
        let w = LossWeights::default();
        assert_abs_diff_eq!(stage2_loss(1.0, 4.0, -4.0, 1.0, &w), 2.44, epsilon = 1e-12);
        assert_eq!(stage2_loss(0.0, 0.0, 0.0, 0.0, &w), 0.0);
        let no_com = LossWeights {
            lambda_com: 0.0,
            ..w
        };
        assert_abs_diff_eq!(
            stage2_loss(1.0, 4.0, -4.0, 99.0, &no_com),
            stage1_loss(1.0, 4.0, -4.0, &no_com),
            epsilon = 1e-12
        );
    }

    #[test]
    fn uniform_logits_cross_entropy_is_ln_classes() {
        let logits = vec![array![0.7, 0.7]];
        let labels = vec![1usize];
        let (ce, grads) = cross_entropy_with_grads(&logits, &labels).unwrap();
        assert_abs_diff_eq!(ce, (2.0f64).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(grads[0][0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(grads[0][1], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn top_k_sorts_by_activation_then_index() {
        let t = vec![array![1.0], array![3.0], array![3.0], array![0.5]];
        assert_eq!(top_k_by_activation(&t, 0, 2), vec![1, 2]);
        assert_eq!(top_k_by_activation(&t, 0, 10), vec![1, 2, 0, 3]);
    }
}
