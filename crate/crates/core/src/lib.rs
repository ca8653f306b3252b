//! Self-explaining text classification through concept discovery.
//!
//! Documents are encoded token-by-token, concept prototypes compete for
//! tokens through simplex-projected slot attention, and a bias-free linear
//! classifier reads nothing but the summed attention per concept. An LLM
//! backend (or a deterministic mock oracle) summarizes each concept from
//! its strongest exemplars and highlights concept-related tokens; the gap
//! between model attention and those highlights drives a comprehensibility
//! fine-tuning loop that freezes concepts once their meaning stabilizes.
//!
//! The numeric core is generic over the scalar type ([`scalar::Real`]);
//! `f64` is the default used by training, checkpoints, and the CLI.

pub mod data;
pub mod encode;
pub mod error;
pub mod model;
pub mod scalar;
pub mod text;

pub use error::{BackendError, Error, Result};
pub use scalar::Real;

/// Concept model in the default training precision.
pub type Model64 = model::ConceptModel<f64>;
/// Concept model in single precision.
pub type Model32 = model::ConceptModel<f32>;
