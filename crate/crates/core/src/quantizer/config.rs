use serde::{Deserialize, Serialize};

use crate::catalog::Modality;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizerMode {
    /// Residual k-means directly on the input embeddings.
    RawRvq,
    /// Perceptron encoder and decoder around a residual quantizer.
    Rqvae,
}

impl std::str::FromStr for QuantizerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw_rvq" | "raw-rvq" => Ok(QuantizerMode::RawRvq),
            "rqvae" => Ok(QuantizerMode::Rqvae),
            other => Err(Error::Config(format!("unknown quantizer mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    pub modality: Modality,
    pub input_dim: usize,
    pub levels: usize,
    pub codebook_size: usize,
    pub codebook_dim: usize,
    pub shared_codebook: bool,
    pub mode: QuantizerMode,
    pub encoder_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    pub loss: LossKind,
    pub recon_weight: f64,
    pub commitment_weight: f64,
    pub weight_decay: f64,
    pub lr_init: f64,
    pub lr_min: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub ema_decay: f64,
    pub seed: u64,
}

impl QuantizerConfig {
    /// Frame-embedding quantizer: 128-d input, 8 levels of 256 codes.
    pub fn video() -> Self {
        QuantizerConfig {
            modality: Modality::Video,
            input_dim: 128,
            levels: 8,
            codebook_size: 256,
            codebook_dim: 128,
            shared_codebook: false,
            mode: QuantizerMode::Rqvae,
            encoder_widths: vec![512, 512],
            decoder_widths: vec![512, 512],
            loss: LossKind::Cosine,
            recon_weight: 1.0,
            commitment_weight: 0.0,
            weight_decay: 1e-4,
            lr_init: 1e-3,
            lr_min: 2e-5,
            batch_size: 8192,
            max_epochs: 20,
            ema_decay: 0.99,
            seed: 0,
        }
    }

    /// Background-music quantizer: 2048-d input, 8 levels of 256 codes.
    pub fn audio() -> Self {
        QuantizerConfig {
            modality: Modality::Audio,
            input_dim: 2048,
            codebook_dim: 256,
            encoder_widths: vec![1024, 512],
            decoder_widths: vec![512, 1024],
            max_epochs: 50,
            ..Self::video()
        }
    }

    pub fn for_modality(modality: Modality) -> Self {
        match modality {
            Modality::Video => Self::video(),
            Modality::Audio => Self::audio(),
        }
    }

    /// Switches mode; raw residual quantization works in input space.
    pub fn with_mode(mut self, mode: QuantizerMode) -> Self {
        self.mode = mode;
        if mode == QuantizerMode::RawRvq {
            self.codebook_dim = self.input_dim;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        if self.codebook_size == 0 {
            return bad("codebook_size must be at least 1".into());
        }
        if self.codebook_size > u16::MAX as usize + 1 {
            return bad("codebook_size must fit in 16 bits".into());
        }
        if self.input_dim == 0 || self.codebook_dim == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.shared_codebook {
            return bad("shared codebooks are not supported; levels use distinct codebooks".into());
        }
        if self.mode == QuantizerMode::RawRvq && self.codebook_dim != self.input_dim {
            return bad(format!(
                "raw_rvq requires codebook_dim ({}) = input_dim ({})",
                self.codebook_dim, self.input_dim
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return bad("ema_decay must lie in [0, 1)".into());
        }
        if self.lr_min > self.lr_init {
            return bad("lr_min exceeds lr_init".into());
        }
        Ok(())
    }

    /// Layer widths of the encoder, input to latent.
    pub fn encoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.encoder_widths);
        dims.push(self.codebook_dim);
        dims
    }

    pub fn decoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.codebook_dim];
        dims.extend(&self.decoder_widths);
        dims.push(self.input_dim);
        dims
    }
}
