//! Slot-attention concept extraction and the concept-bottleneck classifier.
//!
//! Concept prototypes compete for every token through a simplex-projected
//! attention column; summed attention per slot is the only input to the
//! linear classifier, so the classifier matrix is the complete
//! concept-to-class coupling.

pub mod checkpoint;
pub mod losses;
pub mod optim;
pub mod sparsemax;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::encode::{EncodedText, Encoder, EncoderCache, LearnedGrads};
use crate::error::{Error, Result};
use crate::scalar::Real;
pub use sparsemax::{sparse_softmax, SlotNorm};

/// Guard added to attention mass before feature normalization so an
/// unattended slot yields a zero feature vector instead of a blow-up.
pub const MASS_EPSILON: f64 = 1e-8;

/// Model dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Number of concept slots (M).
    pub concepts: usize,
    /// Feature dimension (D).
    pub dim: usize,
    /// Number of classes.
    pub classes: usize,
}

/// Concept prototypes, attention projections, and the bottleneck classifier.
#[derive(Debug, Clone)]
pub struct ConceptModel<T> {
    pub encoder: Encoder<T>,
    /// `M x D` prototype matrix.
    pub prototypes: Array2<T>,
    /// Concepts whose prototype rows must not be updated.
    pub freeze_mask: Vec<bool>,
    pub w_query: Array2<T>,
    pub w_key: Array2<T>,
    pub w_value: Array2<T>,
    /// `M x classes` classifier matrix; deliberately bias-free.
    pub classifier: Array2<T>,
    pub norm: SlotNorm,
}

/// Attention matrix `A` (`M x L`) and per-slot features `U` (`M x D`).
#[derive(Debug, Clone)]
pub struct SlotAttentionResult<T> {
    pub attention: Array2<T>,
    pub features: Array2<T>,
}

/// Per-sample forward state retained for the backward pass.
#[derive(Debug, Clone)]
pub struct SampleCache<T> {
    pub ids: Vec<usize>,
    pub mask: Vec<bool>,
    pub encoder_cache: EncoderCache<T>,
    pub x: Array2<T>,
    pub queries: Array2<T>,
    pub keys: Array2<T>,
    pub values: Array2<T>,
    pub attention: Array2<T>,
    pub mass: Array1<T>,
    pub feat_sum: Array2<T>,
    pub features: Array2<T>,
    pub activation: Array1<T>,
    pub logits: Array1<T>,
}

/// Upstream gradients flowing into one sample's forward quantities.
#[derive(Debug, Clone)]
pub struct SampleUpstream<T> {
    pub d_logits: Array1<T>,
    pub d_features: Array2<T>,
    pub d_activation: Array1<T>,
    pub d_attention: Array2<T>,
}

impl<T: Real> SampleUpstream<T> {
    pub fn zeros(cache: &SampleCache<T>) -> Self {
        SampleUpstream {
            d_logits: Array1::zeros(cache.logits.raw_dim()),
            d_features: Array2::zeros(cache.features.raw_dim()),
            d_activation: Array1::zeros(cache.activation.raw_dim()),
            d_attention: Array2::zeros(cache.attention.raw_dim()),
        }
    }
}

/// Parameter gradients for everything the model can train.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub encoder: Option<LearnedGrads<T>>,
    pub prototypes: Array2<T>,
    pub w_query: Array2<T>,
    pub w_key: Array2<T>,
    pub w_value: Array2<T>,
    pub classifier: Array2<T>,
}

impl<T: Real> ConceptModel<T> {
    /// Random initialization: prototypes and projections i.i.d. normal with
    /// std `1/sqrt(D)`, classifier with std `0.5/sqrt(M)`.
    pub fn init<R: Rng>(encoder: Encoder<T>, dims: ModelDims, norm: SlotNorm, rng: &mut R) -> Result<Self> {
        if dims.concepts == 0 {
            return Err(Error::Config("concept count must be at least 1".into()));
        }
        if dims.classes < 2 {
            return Err(Error::Config("class count must be at least 2".into()));
        }
        if encoder.dim() != dims.dim {
            return Err(Error::Config(format!(
                "encoder dimension {} does not match model dimension {}",
                encoder.dim(),
                dims.dim
            )));
        }
        let proto_scale = 1.0 / (dims.dim as f64).sqrt();
        let cls_scale = 0.5 / (dims.concepts as f64).sqrt();
        let sample = |rows: usize, cols: usize, scale: f64, rng: &mut R| {
            Array2::from_shape_fn((rows, cols), |_| {
                T::of(rng.sample::<f64, _>(StandardNormal) * scale)
            })
        };
        Ok(ConceptModel {
            prototypes: sample(dims.concepts, dims.dim, proto_scale, rng),
            freeze_mask: vec![false; dims.concepts],
            w_query: sample(dims.dim, dims.dim, proto_scale, rng),
            w_key: sample(dims.dim, dims.dim, proto_scale, rng),
            w_value: sample(dims.dim, dims.dim, proto_scale, rng),
            classifier: sample(dims.concepts, dims.classes, cls_scale, rng),
            encoder,
            norm,
        })
    }

    pub fn concepts(&self) -> usize {
        self.prototypes.nrows()
    }

    pub fn dim(&self) -> usize {
        self.prototypes.ncols()
    }

    pub fn classes(&self) -> usize {
        self.classifier.ncols()
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            concepts: self.concepts(),
            dim: self.dim(),
            classes: self.classes(),
        }
    }

    pub fn zero_grads(&self) -> Gradients<T> {
        Gradients {
            encoder: None,
            prototypes: Array2::zeros(self.prototypes.raw_dim()),
            w_query: Array2::zeros(self.w_query.raw_dim()),
            w_key: Array2::zeros(self.w_key.raw_dim()),
            w_value: Array2::zeros(self.w_value.raw_dim()),
            classifier: Array2::zeros(self.classifier.raw_dim()),
        }
    }

    /// Full forward pass for one sample, retaining intermediates.
    pub fn forward(&self, ids: &[usize], mask: &[bool]) -> Result<SampleCache<T>> {
        if ids.len() != mask.len() {
            return Err(Error::Config("ids/mask length mismatch".into()));
        }
        let (encoded, encoder_cache) = self.encoder.encode(ids, mask)?;
        let x = encoded.x;
        let (queries, keys, values, attention, mass, feat_sum, features) =
            self.slot_attention_parts(&x, mask)?;
        let activation = mass.clone();
        let logits = self.classifier.t().dot(&activation);
        Ok(SampleCache {
            ids: ids.to_vec(),
            mask: mask.to_vec(),
            encoder_cache,
            x,
            queries,
            keys,
            values,
            attention,
            mass,
            feat_sum,
            features,
            activation,
            logits,
        })
    }

    #[allow(clippy::type_complexity)]
    fn slot_attention_parts(
        &self,
        x: &Array2<T>,
        mask: &[bool],
    ) -> Result<(
        Array2<T>,
        Array2<T>,
        Array2<T>,
        Array2<T>,
        Array1<T>,
        Array2<T>,
        Array2<T>,
    )> {
        let dim = self.dim();
        if x.ncols() != dim {
            return Err(Error::Config(format!(
                "encoded feature dimension {} does not match model dimension {dim}",
                x.ncols()
            )));
        }
        let concepts = self.concepts();
        let len = x.nrows();
        let queries = self.prototypes.dot(&self.w_query);
        let keys = x.dot(&self.w_key);
        let values = x.dot(&self.w_value);
        let scale = T::of(1.0 / (dim as f64).sqrt());
        let scores = queries.dot(&keys.t()) * scale;

        // Slot competition per token column; padding columns stay all-zero.
        let mut attention: Array2<T> = Array2::zeros((concepts, len));
        let mut column = vec![T::zero(); concepts];
        for l in 0..len {
            if !mask[l] {
                continue;
            }
            for m in 0..concepts {
                column[m] = scores[[m, l]];
            }
            let probs = self.norm.apply(&column)?;
            for m in 0..concepts {
                attention[[m, l]] = probs[m];
            }
        }
        let mass = attention.sum_axis(ndarray::Axis(1));
        let feat_sum = attention.dot(&values);
        let eps = T::of(MASS_EPSILON);
        let mut features = feat_sum.clone();
        for m in 0..concepts {
            let denom = mass[m] + eps;
            let mut row = features.row_mut(m);
            row.mapv_inplace(|v| v / denom);
        }
        Ok((queries, keys, values, attention, mass, feat_sum, features))
    }

    /// Backward pass for one sample; accumulates into `grads`.
    pub fn backward(
        &self,
        cache: &SampleCache<T>,
        upstream: &SampleUpstream<T>,
        grads: &mut Gradients<T>,
    ) {
        let concepts = self.concepts();
        let len = cache.ids.len();
        let dim = self.dim();
        let eps = T::of(MASS_EPSILON);

        // logits = classifier^T . t
        let mut d_activation = self.classifier.dot(&upstream.d_logits);
        grads.classifier = &grads.classifier
            + &cache
                .activation
                .view()
                .insert_axis(ndarray::Axis(1))
                .dot(&upstream.d_logits.view().insert_axis(ndarray::Axis(0)));
        d_activation = d_activation + &upstream.d_activation;

        // features[m] = feat_sum[m] / (mass[m] + eps)
        let mut d_feat_sum = upstream.d_features.clone();
        let mut d_mass: Array1<T> = Array1::zeros(concepts);
        for m in 0..concepts {
            let denom = cache.mass[m] + eps;
            let mut dot = T::zero();
            for d in 0..dim {
                let g = upstream.d_features[[m, d]] / denom;
                d_feat_sum[[m, d]] = g;
                dot = dot + g * cache.features[[m, d]];
            }
            d_mass[m] = -dot;
        }

        // Attention receives: explicit upstream, activation sums, mass sums,
        // and the feature aggregation term.
        let mut d_attention = upstream.d_attention.clone();
        d_attention = d_attention + &d_feat_sum.dot(&cache.values.t());
        for l in 0..len {
            if !cache.mask[l] {
                continue;
            }
            for m in 0..concepts {
                d_attention[[m, l]] = d_attention[[m, l]] + d_activation[m] + d_mass[m];
            }
        }
        let d_values = cache.attention.t().dot(&d_feat_sum);

        // Through the per-column normalization.
        let mut d_scores: Array2<T> = Array2::zeros((concepts, len));
        let mut p = vec![T::zero(); concepts];
        let mut g = vec![T::zero(); concepts];
        for l in 0..len {
            if !cache.mask[l] {
                continue;
            }
            for m in 0..concepts {
                p[m] = cache.attention[[m, l]];
                g[m] = d_attention[[m, l]];
            }
            let dz = self.norm.backward(&p, &g);
            for m in 0..concepts {
                d_scores[[m, l]] = dz[m];
            }
        }

        let scale = T::of(1.0 / (dim as f64).sqrt());
        let d_queries = d_scores.dot(&cache.keys) * scale;
        let d_keys = d_scores.t().dot(&cache.queries) * scale;

        grads.prototypes = &grads.prototypes + &d_queries.dot(&self.w_query.t());
        grads.w_query = &grads.w_query + &self.prototypes.t().dot(&d_queries);
        grads.w_key = &grads.w_key + &cache.x.t().dot(&d_keys);
        grads.w_value = &grads.w_value + &cache.x.t().dot(&d_values);

        let d_x = d_keys.dot(&self.w_key.t()) + d_values.dot(&self.w_value.t());
        self.encoder
            .backward(&cache.ids, &cache.mask, &cache.encoder_cache, d_x, &mut grads.encoder);
    }
}

/// Slot attention as a standalone operation (Eq. 1-2 semantics): attention
/// normalized across slots per token, features as mass-normalized
/// aggregates of projected values.
pub fn slot_attention<T: Real>(
    x: &EncodedText<T>,
    model: &ConceptModel<T>,
    mask: &[bool],
) -> Result<SlotAttentionResult<T>> {
    if mask.len() != x.token_count() {
        return Err(Error::Config("mask length does not match token count".into()));
    }
    let (_, _, _, attention, _, _, features) = model.slot_attention_parts(&x.x, mask)?;
    Ok(SlotAttentionResult { attention, features })
}

/// Total concept activation: per-slot attention summed over non-padding
/// token columns.
pub fn concept_activation<T: Real>(attention: &Array2<T>, mask: &[bool]) -> Array1<T> {
    let mut t = Array1::zeros(attention.nrows());
    for m in 0..attention.nrows() {
        let mut sum = T::zero();
        for (l, &keep) in mask.iter().enumerate() {
            if keep {
                sum = sum + attention[[m, l]];
            }
        }
        t[m] = sum;
    }
    t
}

/// Bottleneck prediction: `logits_w = sum_m W[m, w] * t[m]`, no bias.
pub fn predict<T: Real>(activation: &Array1<T>, classifier: &Array2<T>) -> Result<Array1<T>> {
    if activation.len() != classifier.nrows() {
        return Err(Error::Config(format!(
            "activation length {} does not match classifier rows {}",
            activation.len(),
            classifier.nrows()
        )));
    }
    Ok(classifier.t().dot(activation))
}
