use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracing::{debug, info};

use super::config::{QuantizerConfig, QuantizerMode};
use super::kmeans::kmeans;
use super::loss::cosine_loss_grad;
use super::mlp::{AdamW, Grads, Mlp};
use super::model::{residual_quantize, EpochLoss, QuantizerModel};
use crate::catalog::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vecmath::check_dim;

/// Lloyd iterations used to seed rqvae codebooks from encoder outputs.
const INIT_KMEANS_ITERS: usize = 10;

pub fn train_quantizer<T: Scalar>(
    embeddings: &EmbeddingMatrix<T>,
    config: &QuantizerConfig,
) -> Result<QuantizerModel<T>> {
    config.validate()?;
    check_dim("training embeddings", config.input_dim, embeddings.dim())?;
    if embeddings.modality() != config.modality {
        return Err(Error::InvalidInput(format!(
            "{} embeddings given to a {} quantizer",
            embeddings.modality().as_str(),
            config.modality.as_str()
        )));
    }
    if embeddings.rows() < config.codebook_size {
        return Err(Error::InsufficientData(format!(
            "{} training rows for codebook size {}",
            embeddings.rows(),
            config.codebook_size
        )));
    }
    let mut model = match config.mode {
        QuantizerMode::RawRvq => train_raw(embeddings, config)?,
        QuantizerMode::Rqvae => train_rqvae(embeddings, config)?,
    };
    let losses = model.sample_losses(embeddings)?;
    let final_loss = losses.iter().sum::<f64>() / losses.len() as f64;
    info!(
        modality = config.modality.as_str(),
        mode = ?config.mode,
        final_loss,
        "quantizer trained"
    );
    model.final_loss = Some(final_loss);
    Ok(model)
}

fn mean_cosine_loss<T: Scalar>(recon: ArrayView2<T>, data: ArrayView2<T>) -> f64 {
    let mut total = 0.0;
    for (r, x) in recon.rows().into_iter().zip(data.rows()) {
        let (mut rx, mut rr, mut xx) = (0.0f64, 0.0f64, 0.0f64);
        for (&a, &b) in r.iter().zip(x.iter()) {
            let (a, b) = (a.as_f64(), b.as_f64());
            rx += a * b;
            rr += a * a;
            xx += b * b;
        }
        total += if rr == 0.0 || xx == 0.0 {
            1.0
        } else {
            1.0 - (rx / (rr.sqrt() * xx.sqrt())).clamp(-1.0, 1.0)
        };
    }
    total / data.nrows().max(1) as f64
}

/// Level-by-level residual k-means directly on the inputs.
fn train_raw<T: Scalar>(
    embeddings: &EmbeddingMatrix<T>,
    config: &QuantizerConfig,
) -> Result<QuantizerModel<T>> {
    let (n, d) = (embeddings.rows(), embeddings.dim());
    let k = config.codebook_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let data = ArrayView2::from_shape((n, d), embeddings.data()).expect("matrix view");
    let mut residual = data.to_owned();
    let mut codebooks = Vec::with_capacity(config.levels);
    let mut log = Vec::with_capacity(config.levels);
    for level in 0..config.levels {
        let km = kmeans(
            residual.as_slice().expect("contiguous"),
            d,
            k,
            config.max_epochs,
            &mut rng,
        );
        // subtract with the same exact rule encode() uses
        residual_quantize(std::slice::from_ref(&km.centroids), k, &mut residual, |_, _, _, _| {});
        codebooks.push(km.centroids);
        let recon = &data - &residual;
        let mean_loss = mean_cosine_loss(recon.view(), data);
        debug!(level, iterations = km.iterations, converged = km.converged, mean_loss, "level fitted");
        log.push(EpochLoss {
            epoch: km.iterations,
            level: Some(level),
            mean_loss,
        });
    }
    let mut model = QuantizerModel::from_parts(config.clone(), codebooks, Mlp::empty(), Mlp::empty())?;
    model.training_log = log;
    Ok(model)
}

/// Cosine-annealed learning rate for `step` of `total`.
pub fn cosine_lr(config: &QuantizerConfig, step: usize, total: usize) -> f64 {
    let t = if total <= 1 { 0.0 } else { step as f64 / (total - 1) as f64 };
    config.lr_min + 0.5 * (config.lr_init - config.lr_min) * (1.0 + (std::f64::consts::PI * t).cos())
}

/// Output of one straight-through forward/backward pass.
pub struct StepResult<T> {
    pub loss: f64,
    pub encoder: Grads<T>,
    pub decoder: Grads<T>,
}

/// Mean cosine loss of `decoder(quantize(encoder(x)))` against `x` and its
/// parameter gradients. `quantize` maps latents to their quantized values;
/// the backward pass treats it as the identity (straight-through).
pub fn straight_through_step<T: Scalar>(
    encoder: &Mlp<T>,
    decoder: &Mlp<T>,
    x: ArrayView2<T>,
    quantize: impl FnOnce(&Array2<T>) -> Array2<T>,
) -> StepResult<T> {
    let b = x.nrows();
    let (z, enc_trace) = encoder.forward_traced(x);
    let q = quantize(&z);
    let (y, dec_trace) = decoder.forward_traced(q.view());
    let mut grad = Array2::<T>::zeros(y.raw_dim());
    let mut total = 0.0;
    let scale = T::of(1.0 / b as f64);
    for ((yr, xr), mut gr) in y.rows().into_iter().zip(x.rows()).zip(grad.rows_mut()) {
        let yv = yr.to_vec();
        let xv = xr.to_vec();
        let g = gr.as_slice_mut().expect("contiguous gradient");
        total += cosine_loss_grad(&yv, &xv, g).as_f64();
        g.iter_mut().for_each(|v| *v = *v * scale);
    }
    let (dec_grads, grad_q) = decoder.backward(&dec_trace, grad);
    let (enc_grads, _) = encoder.backward(&enc_trace, grad_q);
    StepResult {
        loss: total / b as f64,
        encoder: enc_grads,
        decoder: dec_grads,
    }
}

struct EmaCodebooks {
    counts: Vec<Vec<f64>>,
    sums: Vec<Vec<f64>>,
}

impl EmaCodebooks {
    fn new<T: Scalar>(codebooks: &[Vec<T>], k: usize) -> Self {
        EmaCodebooks {
            counts: vec![vec![1.0; k]; codebooks.len()],
            sums: codebooks
                .iter()
                .map(|cb| cb.iter().map(|v| v.as_f64()).collect())
                .collect(),
        }
    }

    fn reset(&mut self, level: usize, code: usize, value: &[f64]) {
        let d = value.len();
        self.counts[level][code] = 1.0;
        self.sums[level][code * d..(code + 1) * d].copy_from_slice(value);
    }
}

fn train_rqvae<T: Scalar>(
    embeddings: &EmbeddingMatrix<T>,
    config: &QuantizerConfig,
) -> Result<QuantizerModel<T>> {
    let (n, d_in) = (embeddings.rows(), embeddings.dim());
    let (k, d) = (config.codebook_size, config.codebook_dim);
    let levels = config.levels;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let data = ArrayView2::from_shape((n, d_in), embeddings.data()).expect("matrix view");
    let mut encoder = Mlp::<T>::new(&config.encoder_dims(), &mut rng);
    let mut decoder = Mlp::<T>::new(&config.decoder_dims(), &mut rng);

    // seed codebooks by residual k-means on encoder outputs of a sample
    let sample_rows = n.min(config.batch_size.max(k));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let sample = data.select(Axis(0), &order[..sample_rows]);
    let mut residual = encoder.forward(sample.view());
    let mut codebooks = Vec::with_capacity(levels);
    for _ in 0..levels {
        let km = kmeans(residual.as_slice().expect("contiguous"), d, k, INIT_KMEANS_ITERS, &mut rng);
        residual_quantize(std::slice::from_ref(&km.centroids), k, &mut residual, |_, _, _, _| {});
        codebooks.push(km.centroids);
    }

    let mut ema = EmaCodebooks::new(&codebooks, k);
    let decay = config.ema_decay;
    let mut opt_enc = AdamW::new(&encoder, config.weight_decay);
    let mut opt_dec = AdamW::new(&decoder, config.weight_decay);
    let batch = config.batch_size.min(n);
    let steps_per_epoch = n.div_ceil(batch);
    let total_steps = steps_per_epoch * config.max_epochs;
    let mut step = 0usize;
    let mut log = Vec::with_capacity(config.max_epochs);

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut used = vec![vec![false; k]; levels];
        let mut epoch_loss = 0.0;
        let mut last_residuals: Vec<Vec<f64>> = vec![Vec::new(); levels];
        for (bi, idx) in order.chunks(batch).enumerate() {
            let x = data.select(Axis(0), idx);
            let mut counts = vec![vec![0.0f64; k]; levels];
            let mut sums = vec![vec![0.0f64; k * d]; levels];
            let mut residuals: Vec<Vec<f64>> = vec![Vec::with_capacity(idx.len() * d); levels];
            let result = straight_through_step(&encoder, &decoder, x.view(), |z| {
                let mut r = z.clone();
                residual_quantize(&codebooks, k, &mut r, |l, _, code, res| {
                    let c = code as usize;
                    counts[l][c] += 1.0;
                    for (s, &v) in sums[l][c * d..(c + 1) * d].iter_mut().zip(res) {
                        *s += v.as_f64();
                    }
                    residuals[l].extend(res.iter().map(|v| v.as_f64()));
                });
                z - &r
            });
            if !result.loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step: bi });
            }
            epoch_loss += result.loss * idx.len() as f64;
            let lr = cosine_lr(config, step, total_steps);
            opt_dec.apply(&mut decoder, &result.decoder, lr);
            opt_enc.apply(&mut encoder, &result.encoder, lr);
            step += 1;

            for l in 0..levels {
                for c in 0..k {
                    if counts[l][c] > 0.0 {
                        used[l][c] = true;
                    }
                    ema.counts[l][c] = decay * ema.counts[l][c] + (1.0 - decay) * counts[l][c];
                    let dst = &mut ema.sums[l][c * d..(c + 1) * d];
                    for (e, &s) in dst.iter_mut().zip(&sums[l][c * d..(c + 1) * d]) {
                        *e = decay * *e + (1.0 - decay) * s;
                    }
                }
            }
            refresh_codebooks(&mut codebooks, &ema, d);
            last_residuals = residuals;
        }

        // dead codes take a random residual from the last batch at their level
        let mut reseeded = 0usize;
        for l in 0..levels {
            let pool = last_residuals[l].len() / d;
            for c in 0..k {
                if !used[l][c] && pool > 0 {
                    let r = rng.random_range(0..pool);
                    let value = last_residuals[l][r * d..(r + 1) * d].to_vec();
                    ema.reset(l, c, &value);
                    reseeded += 1;
                }
            }
        }
        refresh_codebooks(&mut codebooks, &ema, d);
        let mean_loss = epoch_loss / n as f64;
        debug!(epoch, mean_loss, reseeded, "epoch finished");
        log.push(EpochLoss {
            epoch,
            level: None,
            mean_loss,
        });
    }
    let mut model = QuantizerModel::from_parts(config.clone(), codebooks, encoder, decoder)?;
    model.training_log = log;
    Ok(model)
}

fn refresh_codebooks<T: Scalar>(codebooks: &mut [Vec<T>], ema: &EmaCodebooks, d: usize) {
    for (l, cb) in codebooks.iter_mut().enumerate() {
        for (c, word) in cb.chunks_mut(d).enumerate() {
            let count = ema.counts[l][c].max(1e-12);
            for (w, &s) in word.iter_mut().zip(&ema.sums[l][c * d..(c + 1) * d]) {
                *w = T::of(s / count);
            }
        }
    }
}
