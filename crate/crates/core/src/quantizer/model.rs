use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{s, Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::config::{QuantizerConfig, QuantizerMode};
use super::mlp::{Dense, Mlp};
use crate::catalog::{EmbeddingMatrix, Modality};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vecmath::{check_dim, dot};

const MAGIC: &[u8; 4] = b"ACQZ";
const FORMAT_VERSION: u32 = 1;
const BLOCK_ROWS: usize = 2048;

/// The `L` code indices for one frame or audio segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeGroup {
    pub modality: Modality,
    pub codes: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Residual level being fitted (raw mode only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub rows: usize,
    pub mean_cos_sim: f64,
    /// Mean cosine using only the first `l` levels, for `l = 1..=L`.
    pub per_level_curve: Vec<f64>,
    /// Rows whose reconstruction or input was all zeros.
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerModel<T> {
    pub config: QuantizerConfig,
    /// One `K x codebook_dim` row-major matrix per level.
    pub codebooks: Vec<Vec<T>>,
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
    pub training_log: Vec<EpochLoss>,
    /// Mean reconstruction loss over the training rows after training.
    pub final_loss: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: QuantizerConfig,
    training_log: Vec<EpochLoss>,
    final_loss: Option<f64>,
    encoder_dims: Vec<usize>,
    decoder_dims: Vec<usize>,
}

/// Index of the nearest codeword by exact squared distance, lowest index on
/// ties. `scores` holds `residual . codeword` for every codeword and prunes
/// the exact comparison to a near-optimal shortlist.
fn nearest_codeword<T: Scalar>(residual: &[T], codebook: &[T], norms: &[T], scores: &[T]) -> u16 {
    let dim = residual.len();
    let two = T::one() + T::one();
    let mut best_approx = f64::INFINITY;
    let mut max_norm = 0.0f64;
    for (&n, &sc) in norms.iter().zip(scores) {
        best_approx = best_approx.min((n - two * sc).as_f64());
        max_norm = max_norm.max(n.as_f64());
    }
    let margin = 1e-4 * (dot(residual, residual).as_f64() + max_norm) + f64::MIN_POSITIVE;
    let mut best = 0u16;
    let mut best_d = f64::INFINITY;
    for (j, (&n, &sc)) in norms.iter().zip(scores).enumerate() {
        if (n - two * sc).as_f64() > best_approx + margin {
            continue;
        }
        let c = &codebook[j * dim..(j + 1) * dim];
        let mut d = 0.0f64;
        for (&r, &v) in residual.iter().zip(c) {
            let diff = r.as_f64() - v.as_f64();
            d += diff * diff;
        }
        if d < best_d {
            best_d = d;
            best = j as u16;
        }
    }
    best
}

/// Greedy residual quantization in place. `visit(level, row, code, residual)`
/// sees each residual before its chosen codeword is subtracted.
pub(crate) fn residual_quantize<T: Scalar>(
    codebooks: &[Vec<T>],
    k: usize,
    residual: &mut Array2<T>,
    mut visit: impl FnMut(usize, usize, u16, &[T]),
) {
    let (n, d) = residual.dim();
    for (l, cb) in codebooks.iter().enumerate() {
        let norms: Vec<T> = cb.chunks(d).map(|c| dot(c, c)).collect();
        let cb_view = ArrayView2::from_shape((k, d), cb.as_slice()).expect("codebook shape");
        let mut start = 0;
        while start < n {
            let end = (start + BLOCK_ROWS).min(n);
            let scores = residual.slice(s![start..end, ..]).dot(&cb_view.t());
            for (off, srow) in scores.rows().into_iter().enumerate() {
                let i = start + off;
                let mut rrow = residual.row_mut(i);
                let r = rrow.as_slice_mut().expect("contiguous residual");
                let srow = srow.to_vec();
                let code = nearest_codeword(r, cb, &norms, &srow);
                visit(l, i, code, r);
                let c = &cb[code as usize * d..(code as usize + 1) * d];
                for (rv, &cv) in r.iter_mut().zip(c) {
                    *rv = *rv - cv;
                }
            }
            start = end;
        }
    }
}

fn cos_f64<T: Scalar>(a: &[T], b: &[T]) -> Option<f64> {
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x.as_f64(), y.as_f64());
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return None;
    }
    Some((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

impl<T: Scalar> QuantizerModel<T> {
    pub fn from_parts(
        config: QuantizerConfig,
        codebooks: Vec<Vec<T>>,
        encoder: Mlp<T>,
        decoder: Mlp<T>,
    ) -> Result<Self> {
        config.validate()?;
        let model = QuantizerModel {
            config,
            codebooks,
            encoder,
            decoder,
            training_log: Vec::new(),
            final_loss: None,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let c = &self.config;
        if self.codebooks.is_empty() {
            return Err(Error::Untrained);
        }
        if self.codebooks.len() != c.levels {
            return Err(Error::Format(format!(
                "model has {} codebooks, config says {} levels",
                self.codebooks.len(),
                c.levels
            )));
        }
        for (l, cb) in self.codebooks.iter().enumerate() {
            if cb.len() != c.codebook_size * c.codebook_dim {
                return Err(Error::Format(format!("codebook {l} has wrong shape")));
            }
            if cb.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("codebook {l} has non-finite entries")));
            }
        }
        match c.mode {
            QuantizerMode::RawRvq => {
                if !self.encoder.is_empty() || !self.decoder.is_empty() {
                    return Err(Error::Format("raw_rvq model carries perceptrons".into()));
                }
            }
            QuantizerMode::Rqvae => {
                if self.encoder.dims() != c.encoder_dims() || self.decoder.dims() != c.decoder_dims() {
                    return Err(Error::Format("perceptron shapes disagree with config".into()));
                }
            }
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.config.levels
    }

    pub fn modality(&self) -> Modality {
        self.config.modality
    }

    pub fn codeword(&self, level: usize, code: usize) -> &[T] {
        let d = self.config.codebook_dim;
        &self.codebooks[level][code * d..(code + 1) * d]
    }

    /// Maps input rows (`n x input_dim`) into codebook space.
    pub fn latents(&self, rows: ArrayView2<T>) -> Array2<T> {
        match self.config.mode {
            QuantizerMode::RawRvq => rows.to_owned(),
            QuantizerMode::Rqvae => self.encoder.forward(rows),
        }
    }

    /// Residual quantization of latent rows; returns `n x L` codes.
    pub fn quantize_latents(&self, latents: ArrayView2<T>) -> Vec<u16> {
        let n = latents.nrows();
        let levels = self.levels();
        let mut residual = latents.to_owned();
        let mut codes = vec![0u16; n * levels];
        residual_quantize(
            &self.codebooks,
            self.config.codebook_size,
            &mut residual,
            |l, i, code, _| codes[i * levels + l] = code,
        );
        codes
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        check_dim("quantizer input", self.config.input_dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite quantizer input".into()));
        }
        Ok(())
    }

    pub fn encode(&self, x: &[T]) -> Result<CodeGroup> {
        self.check()?;
        self.check_input(x)?;
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        let codes = self.quantize_latents(self.latents(view).view());
        Ok(CodeGroup {
            modality: self.modality(),
            codes,
        })
    }

    /// Encodes every row of a matrix.
    pub fn encode_matrix(&self, m: &EmbeddingMatrix<T>) -> Result<Vec<CodeGroup>> {
        self.check()?;
        check_dim("quantizer input", self.config.input_dim, m.dim())?;
        let view = ArrayView2::from_shape((m.rows(), m.dim()), m.data()).expect("matrix view");
        let codes = self.quantize_latents(self.latents(view).view());
        Ok(codes
            .chunks(self.levels().max(1))
            .take(m.rows())
            .map(|c| CodeGroup {
                modality: self.modality(),
                codes: c.to_vec(),
            })
            .collect())
    }

    fn check_codes(&self, group: &CodeGroup) -> Result<()> {
        if group.codes.len() != self.levels() {
            return Err(Error::InvalidInput(format!(
                "code group has {} codes, model has {} levels",
                group.codes.len(),
                self.levels()
            )));
        }
        if let Some(&bad) = group
            .codes
            .iter()
            .find(|&&c| c as usize >= self.config.codebook_size)
        {
            return Err(Error::out_of_range(
                "code index",
                bad,
                &format!("0..{}", self.config.codebook_size),
            ));
        }
        Ok(())
    }

    /// Sum of the selected codewords for the first `levels` levels.
    pub fn latent_sum(&self, codes: &[u16], levels: usize) -> Vec<T> {
        let mut acc = vec![T::zero(); self.config.codebook_dim];
        for (l, &code) in codes.iter().take(levels).enumerate() {
            for (a, &c) in acc.iter_mut().zip(self.codeword(l, code as usize)) {
                *a = *a + c;
            }
        }
        acc
    }

    fn decode_latent(&self, z: Vec<T>) -> Vec<T> {
        match self.config.mode {
            QuantizerMode::RawRvq => z,
            QuantizerMode::Rqvae => {
                let view = ArrayView2::from_shape((1, z.len()), z.as_slice()).expect("row view");
                self.decoder.forward(view).into_raw_vec_and_offset().0
            }
        }
    }

    pub fn decode(&self, group: &CodeGroup) -> Result<Vec<T>> {
        self.decode_prefix(group, self.levels())
    }

    /// Reconstruction from the first `levels` codes only.
    pub fn decode_prefix(&self, group: &CodeGroup, levels: usize) -> Result<Vec<T>> {
        self.check()?;
        self.check_codes(group)?;
        if group.modality != self.modality() {
            return Err(Error::InvalidInput(format!(
                "{} codes given to {} quantizer",
                group.modality.as_str(),
                self.modality().as_str()
            )));
        }
        Ok(self.decode_latent(self.latent_sum(&group.codes, levels.min(self.levels()))))
    }

    pub fn reconstruction_report(&self, m: &EmbeddingMatrix<T>) -> Result<ReconstructionReport> {
        if m.is_empty() {
            return Err(Error::InsufficientData("reconstruction report on empty matrix".into()));
        }
        let groups = self.encode_matrix(m)?;
        let levels = self.levels();
        let mut curve = vec![0.0f64; levels];
        let mut degenerate = 0usize;
        let d = self.config.codebook_dim;
        let n = m.rows();
        let mut start = 0;
        while start < n {
            let end = (start + BLOCK_ROWS).min(n);
            let mut acc = Array2::<T>::zeros((end - start, d));
            for l in 0..levels {
                for (off, mut row) in acc.rows_mut().into_iter().enumerate() {
                    let code = groups[start + off].codes[l] as usize;
                    for (a, &c) in row.iter_mut().zip(self.codeword(l, code)) {
                        *a = *a + c;
                    }
                }
                let recon = match self.config.mode {
                    QuantizerMode::RawRvq => acc.clone(),
                    QuantizerMode::Rqvae => self.decoder.forward(acc.view()),
                };
                for (off, row) in recon.rows().into_iter().enumerate() {
                    let r = row.to_vec();
                    match cos_f64(&r, m.row(start + off)) {
                        Some(c) => curve[l] += c,
                        None if l + 1 == levels => degenerate += 1,
                        None => {}
                    }
                }
            }
            start = end;
        }
        for c in &mut curve {
            *c /= n as f64;
        }
        Ok(ReconstructionReport {
            rows: n,
            mean_cos_sim: *curve.last().expect("levels >= 1"),
            per_level_curve: curve,
            degenerate,
        })
    }

    /// Per-row `1 - cos(decode(encode(x)), x)`, accumulated in f64. Degenerate
    /// rows score 1.
    pub fn sample_losses(&self, m: &EmbeddingMatrix<T>) -> Result<Vec<f64>> {
        let groups = self.encode_matrix(m)?;
        let levels = self.levels();
        let d = self.config.codebook_dim;
        let mut out = Vec::with_capacity(m.rows());
        for (bi, chunk) in groups.chunks(BLOCK_ROWS).enumerate() {
            let mut acc = Array2::<T>::zeros((chunk.len(), d));
            for (mut row, g) in acc.rows_mut().into_iter().zip(chunk) {
                let z = self.latent_sum(&g.codes, levels);
                row.iter_mut().zip(z).for_each(|(a, v)| *a = v);
            }
            let recon = match self.config.mode {
                QuantizerMode::RawRvq => acc,
                QuantizerMode::Rqvae => self.decoder.forward(acc.view()),
            };
            for (off, row) in recon.rows().into_iter().enumerate() {
                let x = m.row(bi * BLOCK_ROWS + off);
                out.push(1.0 - cos_f64(&row.to_vec(), x).unwrap_or(0.0));
            }
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            config: self.config.clone(),
            training_log: self.training_log.clone(),
            final_loss: self.final_loss,
            encoder_dims: self.encoder.dims(),
            decoder_dims: self.decoder.dims(),
        };
        let header = serde_json::to_vec(&header)?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let io = |e| Error::Format(format!("serialize: {e}"));
        out.write_u32::<LittleEndian>(FORMAT_VERSION).map_err(io)?;
        out.write_u8(T::WIDTH).map_err(io)?;
        out.write_u32::<LittleEndian>(header.len() as u32).map_err(io)?;
        out.write_all(&header).map_err(io)?;
        let mut put = |v: T| -> Result<()> {
            match T::WIDTH {
                4 => out.write_f32::<LittleEndian>(v.as_f64() as f32),
                _ => out.write_f64::<LittleEndian>(v.as_f64()),
            }
            .map_err(io)
        };
        for cb in &self.codebooks {
            for &v in cb {
                put(v)?;
            }
        }
        for mlp in [&self.encoder, &self.decoder] {
            for v in mlp.params_flat() {
                put(v)?;
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |e: std::io::Error| Error::Format(format!("quantizer file: {e}"));
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic).map_err(fmt)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a quantizer file".into()));
        }
        let version = cur.read_u32::<LittleEndian>().map_err(fmt)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported quantizer version {version}")));
        }
        let width = cur.read_u8().map_err(fmt)?;
        let hlen = cur.read_u32::<LittleEndian>().map_err(fmt)? as usize;
        let mut hbytes = vec![0u8; hlen];
        cur.read_exact(&mut hbytes).map_err(fmt)?;
        let header: Header = serde_json::from_slice(&hbytes)?;
        let mut take = |count: usize| -> Result<Vec<T>> {
            (0..count)
                .map(|_| match width {
                    4 => cur.read_f32::<LittleEndian>().map(|v| T::of(v as f64)),
                    8 => cur.read_f64::<LittleEndian>().map(T::of),
                    w => Err(std::io::Error::other(format!("bad width {w}"))),
                })
                .collect::<std::io::Result<Vec<T>>>()
                .map_err(fmt)
        };
        let c = &header.config;
        let mut codebooks = Vec::with_capacity(c.levels);
        for _ in 0..c.levels {
            codebooks.push(take(c.codebook_size * c.codebook_dim)?);
        }
        let mut build = |dims: &[usize]| -> Result<Mlp<T>> {
            let mut layers = Vec::new();
            for w in dims.windows(2) {
                let weight = Array2::from_shape_vec((w[1], w[0]), take(w[0] * w[1])?)
                    .map_err(|e| Error::Format(e.to_string()))?;
                let bias = Array1::from_vec(take(w[1])?);
                layers.push(Dense { weight, bias });
            }
            Ok(Mlp { layers })
        };
        let encoder = build(&header.encoder_dims)?;
        let decoder = build(&header.decoder_dims)?;
        let mut model = QuantizerModel::from_parts(header.config, codebooks, encoder, decoder)?;
        model.training_log = header.training_log;
        model.final_loss = header.final_loss;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
