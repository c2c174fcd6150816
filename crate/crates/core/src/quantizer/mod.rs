//! Residual quantizers mapping embeddings to `L` discrete codes and back.

pub mod config;
pub mod kmeans;
pub mod loss;
pub mod mlp;
pub mod model;
pub mod train;

pub use config::{LossKind, QuantizerConfig, QuantizerMode};
pub use loss::{cosine_loss, CosineLoss};
pub use model::{CodeGroup, EpochLoss, QuantizerModel, ReconstructionReport};
pub use train::{straight_through_step, train_quantizer};
