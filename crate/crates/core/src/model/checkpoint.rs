//! Checkpoint persistence.
//!
//! A checkpoint is a directory holding `manifest.json` (dimensions,
//! normalization, loss weights, freeze mask, seed, and the tensor index)
//! plus `tensors.bin`, the listed tensors concatenated row-major as
//! little-endian `f64` regardless of the in-memory scalar type.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encode::{Encoder, FixedEncoder, LearnedEncoder};
use crate::error::{Error, Result};
use crate::model::losses::LossWeights;
use crate::model::{ConceptModel, ModelDims, SlotNorm};
use crate::scalar::Real;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TENSORS_FILE: &str = "tensors.bin";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Learned,
    Fixed,
}

/// Everything about a run that is not a tensor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub dims: ModelDims,
    pub vocab_size: usize,
    pub encoder: EncoderKind,
    pub norm: SlotNorm,
    pub weights: LossWeights,
    pub freeze_mask: Vec<bool>,
    pub seed: u64,
    pub tensors: Vec<TensorEntry>,
}

fn tensor_list<T: Real>(model: &ConceptModel<T>) -> Vec<(String, &Array2<T>)> {
    let mut list: Vec<(String, &Array2<T>)> = Vec::new();
    match &model.encoder {
        Encoder::Learned(enc) => {
            list.push(("embed".into(), &enc.embed));
            list.push(("enc_attn_q".into(), &enc.attn_q));
            list.push(("enc_attn_k".into(), &enc.attn_k));
            list.push(("enc_attn_v".into(), &enc.attn_v));
        }
        Encoder::Fixed(enc) => {
            list.push(("fixed_table".into(), &enc.table));
        }
    }
    list.push(("prototypes".into(), &model.prototypes));
    list.push(("w_query".into(), &model.w_query));
    list.push(("w_key".into(), &model.w_key));
    list.push(("w_value".into(), &model.w_value));
    list.push(("classifier".into(), &model.classifier));
    list
}

/// Write a checkpoint directory (created if missing).
pub fn save<T: Real>(
    dir: &Path,
    model: &ConceptModel<T>,
    weights: &LossWeights,
    seed: u64,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let tensors = tensor_list(model);
    let manifest = Manifest {
        dims: model.dims(),
        vocab_size: model.encoder.vocab_size(),
        encoder: match model.encoder {
            Encoder::Learned(_) => EncoderKind::Learned,
            Encoder::Fixed(_) => EncoderKind::Fixed,
        },
        norm: model.norm,
        weights: *weights,
        freeze_mask: model.freeze_mask.clone(),
        seed,
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                rows: t.nrows(),
                cols: t.ncols(),
            })
            .collect(),
    };
    let file = std::fs::File::create(dir.join(MANIFEST_FILE))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &manifest)?;

    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join(TENSORS_FILE))?);
    for (_, tensor) in &tensors {
        for value in tensor.iter() {
            out.write_all(&value.to64().to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(Error::Config(format!(
            "checkpoint manifest not found at {}",
            path.display()
        )));
    }
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Load a checkpoint directory back into a model.
pub fn load<T: Real>(dir: &Path) -> Result<(ConceptModel<T>, Manifest)> {
    let manifest = load_manifest(dir)?;
    let mut reader = std::io::BufReader::new(std::fs::File::open(dir.join(TENSORS_FILE))?);
    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        let mut data = Vec::with_capacity(entry.rows * entry.cols);
        let mut buf = [0u8; 8];
        for _ in 0..entry.rows * entry.cols {
            reader.read_exact(&mut buf)?;
            data.push(T::of(f64::from_le_bytes(buf)));
        }
        let array = Array2::from_shape_vec((entry.rows, entry.cols), data)
            .map_err(|e| Error::Config(format!("bad tensor shape in checkpoint: {e}")))?;
        tensors.push((entry.name.clone(), array));
    }
    let mut trailing = Vec::new();
    reader.read_to_end(&mut trailing)?;
    if !trailing.is_empty() {
        return Err(Error::Config(
            "checkpoint tensor file longer than manifest describes".into(),
        ));
    }

    let mut take = |name: &str| -> Result<Array2<T>> {
        tensors
            .iter()
            .position(|(n, _)| n == name)
            .map(|i| tensors.remove(i).1)
            .ok_or_else(|| Error::Config(format!("checkpoint missing tensor {name}")))
    };
    let encoder = match manifest.encoder {
        EncoderKind::Learned => Encoder::Learned(LearnedEncoder {
            embed: take("embed")?,
            attn_q: take("enc_attn_q")?,
            attn_k: take("enc_attn_k")?,
            attn_v: take("enc_attn_v")?,
        }),
        EncoderKind::Fixed => Encoder::Fixed(FixedEncoder {
            table: take("fixed_table")?,
        }),
    };
    let model = ConceptModel {
        encoder,
        prototypes: take("prototypes")?,
        freeze_mask: manifest.freeze_mask.clone(),
        w_query: take("w_query")?,
        w_key: take("w_key")?,
        w_value: take("w_value")?,
        classifier: take("classifier")?,
        norm: manifest.norm,
    };
    if model.freeze_mask.len() != model.concepts() {
        return Err(Error::Config(
            "freeze mask length does not match concept count".into(),
        ));
    }
    Ok((model, manifest))
}
