//! Token-level feature encoding.
//!
//! The default desk-scale encoder is a trainable embedding table followed
//! by one self-attention mixing layer with a residual connection. A fixed
//! lookup-table encoder provides the adapter seam for precomputed
//! (pretrained, frozen) token features.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Token-level feature matrix `X` (`L x D`).
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedText<T> {
    pub x: Array2<T>,
}

impl<T: Real> EncodedText<T> {
    pub fn token_count(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn validated(x: Array2<T>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "encoder produced a non-finite feature".into(),
            ));
        }
        Ok(EncodedText { x })
    }
}

/// Trainable embedding table plus one self-attention mixing layer.
#[derive(Debug, Clone)]
pub struct LearnedEncoder<T> {
    /// `V x D` embedding table.
    pub embed: Array2<T>,
    pub attn_q: Array2<T>,
    pub attn_k: Array2<T>,
    pub attn_v: Array2<T>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LearnedCache<T> {
    emb: Array2<T>,
    queries: Array2<T>,
    keys: Array2<T>,
    values: Array2<T>,
    probs: Array2<T>,
}

/// Parameter gradients for the learned encoder.
#[derive(Debug, Clone)]
pub struct LearnedGrads<T> {
    pub embed: Array2<T>,
    pub attn_q: Array2<T>,
    pub attn_k: Array2<T>,
    pub attn_v: Array2<T>,
}

impl<T: Real> LearnedEncoder<T> {
    pub fn init<R: Rng>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        let normal = |rng: &mut R, scale: f64| -> T {
            T::of(rng.sample::<f64, _>(StandardNormal) * scale)
        };
        let proj_scale = 1.0 / (dim as f64).sqrt();
        let sample_matrix = |rows: usize, cols: usize, scale: f64, rng: &mut R| {
            Array2::from_shape_fn((rows, cols), |_| normal(rng, scale))
        };
        LearnedEncoder {
            embed: sample_matrix(vocab_size, dim, 1.0, rng),
            attn_q: sample_matrix(dim, dim, proj_scale, rng),
            attn_k: sample_matrix(dim, dim, proj_scale, rng),
            attn_v: sample_matrix(dim, dim, proj_scale, rng),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embed.nrows()
    }

    pub fn dim(&self) -> usize {
        self.embed.ncols()
    }

    pub fn zero_grads(&self) -> LearnedGrads<T> {
        LearnedGrads {
            embed: Array2::zeros(self.embed.raw_dim()),
            attn_q: Array2::zeros(self.attn_q.raw_dim()),
            attn_k: Array2::zeros(self.attn_k.raw_dim()),
            attn_v: Array2::zeros(self.attn_v.raw_dim()),
        }
    }

    fn forward(&self, ids: &[usize], mask: &[bool]) -> Result<(Array2<T>, LearnedCache<T>)> {
        let dim = self.dim();
        let len = ids.len();
        let mut emb = Array2::zeros((len, dim));
        for (l, &id) in ids.iter().enumerate() {
            if id >= self.vocab_size() {
                return Err(Error::Config(format!(
                    "token id {id} out of range for embedding table of {} rows",
                    self.vocab_size()
                )));
            }
            emb.row_mut(l).assign(&self.embed.row(id));
        }
        let queries = emb.dot(&self.attn_q);
        let keys = emb.dot(&self.attn_k);
        let values = emb.dot(&self.attn_v);
        let scale = T::of(1.0 / (dim as f64).sqrt());
        let scores = queries.dot(&keys.t()) * scale;

        // Row softmax over non-padding key positions; padding rows stay zero.
        let mut probs: Array2<T> = Array2::zeros((len, len));
        for i in 0..len {
            if !mask[i] {
                continue;
            }
            let mut max = T::neg_infinity();
            for j in 0..len {
                if mask[j] && scores[[i, j]] > max {
                    max = scores[[i, j]];
                }
            }
            let mut total = T::zero();
            for j in 0..len {
                if mask[j] {
                    let e = (scores[[i, j]] - max).exp();
                    probs[[i, j]] = e;
                    total = total + e;
                }
            }
            for j in 0..len {
                probs[[i, j]] = probs[[i, j]] / total;
            }
        }

        let mixed = probs.dot(&values);
        let mut x = &emb + &mixed;
        for (l, &m) in mask.iter().enumerate() {
            if !m {
                x.row_mut(l).fill(T::zero());
            }
        }
        let cache = LearnedCache {
            emb,
            queries,
            keys,
            values,
            probs,
        };
        Ok((x, cache))
    }

    fn backward(
        &self,
        ids: &[usize],
        mask: &[bool],
        cache: &LearnedCache<T>,
        mut d_x: Array2<T>,
        grads: &mut LearnedGrads<T>,
    ) {
        let dim = self.dim();
        let len = ids.len();
        for (l, &m) in mask.iter().enumerate() {
            if !m {
                d_x.row_mut(l).fill(T::zero());
            }
        }
        // x = emb + probs . values
        let mut d_emb = d_x.clone();
        let d_probs = d_x.dot(&cache.values.t());
        let d_values = cache.probs.t().dot(&d_x);

        // Softmax rows.
        let mut d_scores: Array2<T> = Array2::zeros((len, len));
        for i in 0..len {
            if !mask[i] {
                continue;
            }
            let mut inner = T::zero();
            for j in 0..len {
                inner = inner + d_probs[[i, j]] * cache.probs[[i, j]];
            }
            for j in 0..len {
                d_scores[[i, j]] = cache.probs[[i, j]] * (d_probs[[i, j]] - inner);
            }
        }
        let scale = T::of(1.0 / (dim as f64).sqrt());
        let d_queries = d_scores.dot(&cache.keys) * scale;
        let d_keys = d_scores.t().dot(&cache.queries) * scale;

        d_emb = d_emb + d_queries.dot(&self.attn_q.t());
        d_emb = d_emb + d_keys.dot(&self.attn_k.t());
        d_emb = d_emb + d_values.dot(&self.attn_v.t());

        grads.attn_q = &grads.attn_q + &cache.emb.t().dot(&d_queries);
        grads.attn_k = &grads.attn_k + &cache.emb.t().dot(&d_keys);
        grads.attn_v = &grads.attn_v + &cache.emb.t().dot(&d_values);
        for (l, &id) in ids.iter().enumerate() {
            if mask[l] {
                for d in 0..dim {
                    grads.embed[[id, d]] = grads.embed[[id, d]] + d_emb[[l, d]];
                }
            }
        }
    }
}

/// Frozen lookup-table encoder: the adapter seam for precomputed
/// (e.g. pretrained) token features. Never receives gradient updates.
#[derive(Debug, Clone)]
pub struct FixedEncoder<T> {
    pub table: Array2<T>,
}

impl<T: Real> FixedEncoder<T> {
    fn forward(&self, ids: &[usize], mask: &[bool]) -> Result<Array2<T>> {
        let mut x = Array2::zeros((ids.len(), self.table.ncols()));
        for (l, &id) in ids.iter().enumerate() {
            if id >= self.table.nrows() {
                return Err(Error::Config(format!(
                    "token id {id} out of range for fixed encoder table of {} rows",
                    self.table.nrows()
                )));
            }
            if mask[l] {
                x.row_mut(l).assign(&self.table.row(id));
            }
        }
        Ok(x)
    }
}

/// The encoder contract: token ids -> `L x D` features.
#[derive(Debug, Clone)]
pub enum Encoder<T> {
    Learned(LearnedEncoder<T>),
    Fixed(FixedEncoder<T>),
}

/// Cache passed from forward to backward; empty for the fixed encoder.
#[derive(Debug, Clone)]
pub enum EncoderCache<T> {
    Learned(LearnedCache<T>),
    Fixed,
}

impl<T: Real> Encoder<T> {
    pub fn dim(&self) -> usize {
        match self {
            Encoder::Learned(e) => e.dim(),
            Encoder::Fixed(e) => e.table.ncols(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            Encoder::Learned(e) => e.vocab_size(),
            Encoder::Fixed(e) => e.table.nrows(),
        }
    }

    /// Deterministic forward pass; padding rows of `X` are zero.
    pub fn encode(&self, ids: &[usize], mask: &[bool]) -> Result<(EncodedText<T>, EncoderCache<T>)> {
        debug_assert_eq!(ids.len(), mask.len());
        match self {
            Encoder::Learned(e) => {
                let (x, cache) = e.forward(ids, mask)?;
                Ok((EncodedText::validated(x)?, EncoderCache::Learned(cache)))
            }
            Encoder::Fixed(e) => {
                let x = e.forward(ids, mask)?;
                Ok((EncodedText::validated(x)?, EncoderCache::Fixed))
            }
        }
    }

    /// Accumulate parameter gradients for `d_x`; no-op for fixed tables.
    pub fn backward(
        &self,
        ids: &[usize],
        mask: &[bool],
        cache: &EncoderCache<T>,
        d_x: Array2<T>,
        grads: &mut Option<LearnedGrads<T>>,
    ) {
        if let (Encoder::Learned(e), EncoderCache::Learned(c)) = (self, cache) {
            let g = grads.get_or_insert_with(|| e.zero_grads());
            e.backward(ids, mask, c, d_x, g);
        }
    }
}

/// Mean feature vector per position, used in tests as a shape probe.
pub fn column_means<T: Real>(x: &Array2<T>) -> Array1<T> {
    let n = T::of(x.nrows().max(1) as f64);
    x.sum_axis(ndarray::Axis(0)) / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn encoder(vocab: usize, dim: usize) -> LearnedEncoder<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        LearnedEncoder::init(vocab, dim, &mut rng)
    }

    #[test]
    fn shape_and_finiteness() {
        let enc = Encoder::Learned(encoder(10, 16));
        let ids = [2, 5, 7];
        let mask = [true, true, true];
        let (encoded, _) = enc.encode(&ids, &mask).unwrap();
        assert_eq!(encoded.token_count(), 3);
        assert_eq!(encoded.dim(), 16);
        assert!(encoded.x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn deterministic_given_params() {
        let enc = Encoder::Learned(encoder(10, 8));
        let ids = [1, 3, 3, 9];
        let mask = [true; 4];
        let (a, _) = enc.encode(&ids, &mask).unwrap();
        let (b, _) = enc.encode(&ids, &mask).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_range_id_is_config_error() {
        let enc = Encoder::Learned(encoder(4, 8));
        let err = enc.encode(&[5], &[true]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn padding_rows_are_zero_and_ignored_as_keys() {
        let enc = Encoder::Learned(encoder(10, 8));
        let (padded, _) = enc
            .encode(&[2, 4, 0, 0], &[true, true, false, false])
            .unwrap();
        let (plain, _) = enc.encode(&[2, 4], &[true, true]).unwrap();
        for l in 0..2 {
            for d in 0..8 {
                assert!((padded.x[[l, d]] - plain.x[[l, d]]).abs() < 1e-12);
            }
        }
        assert!(padded.x.row(2).iter().all(|&v| v == 0.0));
        assert!(padded.x.row(3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fixed_encoder_is_lookup() {
        let table = Array2::from_shape_fn((5, 3), |(i, j)| (i * 10 + j) as f64);
        let enc = Encoder::Fixed(FixedEncoder { table });
        let (encoded, _) = enc.encode(&[4, 1], &[true, true]).unwrap();
        assert_eq!(encoded.x[[0, 2]], 42.0);
        assert_eq!(encoded.x[[1, 0]], 10.0);
    }
}
