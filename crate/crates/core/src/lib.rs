//! Non-LLM machinery for automatic advertisement video editing.
//!
//! The crate turns precomputed frame and audio embeddings into discrete
//! residual-quantized tokens, builds alignment and supervised fine-tuning
//! corpora over a shared token vocabulary, grounds generated tokens back to
//! concrete media through nearest-neighbour retrieval, assembles edit decision
//! lists with render scripts, and computes the evaluation metric suite.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root pin the `f32` instantiation used for on-disk data.

pub mod assembly;
pub mod catalog;
pub mod error;
pub mod evaluation;
pub mod quantizer;
pub mod retrieval;
pub mod scalar;
pub mod synthetic;
pub mod tokenspace;
pub mod vecmath;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

/// Embedding matrix in the storage precision.
pub type EmbeddingMatrix = catalog::EmbeddingMatrix<f32>;
/// Catalog in the storage precision.
pub type Catalog = catalog::Catalog<f32>;
/// Residual quantizer in the storage precision.
pub type QuantizerModel = quantizer::QuantizerModel<f32>;
/// Double-precision residual quantizer, used for gradient checks and analysis.
pub type QuantizerModel64 = quantizer::QuantizerModel<f64>;

/// Cosine index in the storage precision.
pub type VectorIndex = retrieval::VectorIndex<f32>;
/// Continuity segment in the storage precision.
pub type Segment = assembly::Segment<f32>;
