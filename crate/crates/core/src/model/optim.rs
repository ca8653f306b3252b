//! Adam optimizer with per-row freezing.

use std::collections::HashMap;

use ndarray::Array2;

use crate::scalar::Real;

/// Adam with bias correction. Moment buffers are keyed by parameter name;
/// frozen rows are skipped entirely so their values stay bit-identical.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    slots: HashMap<String, Moments<T>>,
}

#[derive(Debug, Clone)]
struct Moments<T> {
    step: u64,
    m: Array2<T>,
    v: Array2<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            slots: HashMap::new(),
        }
    }

    /// Apply one Adam step to `param`. Rows where `row_mask` is `true` are
    /// left untouched (parameters and moments alike).
    pub fn update(
        &mut self,
        name: &str,
        param: &mut Array2<T>,
        grad: &Array2<T>,
        row_mask: Option<&[bool]>,
    ) {
        debug_assert_eq!(param.raw_dim(), grad.raw_dim());
        let entry = self
            .slots
            .entry(name.to_string())
            .or_insert_with(|| Moments {
                step: 0,
                m: Array2::zeros(param.raw_dim()),
                v: Array2::zeros(param.raw_dim()),
            });
        entry.step += 1;
        let step = entry.step as i32;
        let b1 = T::of(self.beta1);
        let b2 = T::of(self.beta2);
        let one = T::one();
        let lr = T::of(self.learning_rate);
        let eps = T::of(self.epsilon);
        let corr1 = T::of(1.0 - self.beta1.powi(step));
        let corr2 = T::of(1.0 - self.beta2.powi(step));
        for r in 0..param.nrows() {
            if row_mask.map(|mask| mask[r]).unwrap_or(false) {
                continue;
            }
            for c in 0..param.ncols() {
                let g = grad[[r, c]];
                let m = b1 * entry.m[[r, c]] + (one - b1) * g;
                let v = b2 * entry.v[[r, c]] + (one - b2) * g * g;
                entry.m[[r, c]] = m;
                entry.v[[r, c]] = v;
                let m_hat = m / corr1;
                let v_hat = v / corr2;
                param[[r, c]] = param[[r, c]] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn descends_a_quadratic() {
        // min (w - 3)^2 elementwise.
        let mut w = array![[0.0f64, 10.0]];
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            let grad = w.mapv(|v| 2.0 * (v - 3.0));
            opt.update("w", &mut w, &grad, None);
        }
        assert!((w[[0, 0]] - 3.0).abs() < 1e-3);
        assert!((w[[0, 1]] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn frozen_rows_are_bit_identical() {
        let mut w = array![[1.0f64, 2.0], [3.0, 4.0]];
        let before = w.clone();
        let grad = array![[0.5, 0.5], [0.5, 0.5]];
        let mut opt = Adam::new(0.1);
        for _ in 0..10 {
            opt.update("w", &mut w, &grad, Some(&[true, false]));
        }
        assert_eq!(w.row(0), before.row(0));
        assert_ne!(w.row(1), before.row(1));
    }
}
