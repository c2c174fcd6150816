//! Deterministic stand-in for the fine-tuned predictor.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::catalog::{AdRecord, Catalog, ClipRecord};
use crate::error::{Error, Result};
use crate::quantizer::{CodeGroup, QuantizerModel};
use crate::retrieval::VectorIndex;
use crate::scalar::Scalar;
use crate::vecmath::{cosine, mean_of};

/// What the predictor hands to assembly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorPlan {
    pub selected: Vec<String>,
    pub script: Vec<String>,
    pub bgm_tokens: Option<CodeGroup>,
}

impl PredictorPlan {
    pub fn validate(&self) -> Result<()> {
        if self.selected.len() != self.script.len() {
            return Err(Error::InvalidInput(format!(
                "plan selects {} clips for {} script lines",
                self.selected.len(),
                self.script.len()
            )));
        }
        if self.selected.is_empty() {
            return Err(Error::InvalidInput("plan selects no clips".into()));
        }
        Ok(())
    }
}

fn temporal_key(c: &ClipRecord) -> (&str, u32) {
    (c.photo_id.as_str(), c.start_frame)
}

/// Indices of the `n` highest-scored candidates, temporally earlier ones
/// winning ties, returned in temporal order. Unscored clips rank as 0.
pub fn baseline_select(candidates: &[ClipRecord], n: usize) -> Result<Vec<usize>> {
    if n > candidates.len() {
        return Err(Error::InvalidInput(format!(
            "cannot select {n} of {} candidates",
            candidates.len()
        )));
    }
    let mut ranked: Vec<usize> = (0..candidates.len()).collect();
    ranked.sort_by(|&a, &b| {
        let sa = candidates[a].relevance_score.unwrap_or(0);
        let sb = candidates[b].relevance_score.unwrap_or(0);
        sb.cmp(&sa)
            .then_with(|| temporal_key(&candidates[a]).cmp(&temporal_key(&candidates[b])))
            .then(a.cmp(&b))
    });
    ranked.truncate(n);
    ranked.sort_by(|&a, &b| (temporal_key(&candidates[a]), a).cmp(&(temporal_key(&candidates[b]), b)));
    Ok(ranked)
}

/// Order of `clips` ascending by `(photo_id, start_frame)`; entry `j` is the
/// input index of the `j`-th clip.
pub fn baseline_sort(clips: &[ClipRecord]) -> Result<Vec<usize>> {
    if clips.is_empty() {
        return Err(Error::InvalidInput("nothing to sort".into()));
    }
    let mut order: Vec<usize> = (0..clips.len()).collect();
    order.sort_by(|&a, &b| {
        (temporal_key(&clips[a]), a).cmp(&(temporal_key(&clips[b]), b))
    });
    Ok(order)
}

/// One script line per clip: the clip's own line, or the product's selling
/// points when it has none.
pub fn baseline_script(ad: &AdRecord, clips: &[ClipRecord]) -> Vec<String> {
    clips
        .iter()
        .map(|c| {
            let line = c.script_line.trim();
            if line.is_empty() {
                ad.product.selling_points.trim().to_string()
            } else {
                line.to_string()
            }
        })
        .collect()
}

/// Music for a clip set. Video and audio embeddings live in different
/// spaces, so each indexed track is represented in video space by the mean
/// clip embedding of the catalog ads that use it; the track closest to the
/// selected clips wins (smaller id on ties) and its pooled embedding is
/// encoded.
pub fn baseline_bgm<T: Scalar>(
    catalog: &Catalog<T>,
    clips: &[ClipRecord],
    audio_index: &VectorIndex<T>,
    audio_quantizer: &QuantizerModel<T>,
) -> Result<(String, CodeGroup)> {
    if clips.is_empty() {
        return Err(Error::InvalidInput("no clips to choose music for".into()));
    }
    let dim = catalog.video.dim();
    let own: Vec<Vec<T>> = clips.iter().filter_map(|c| catalog.clip_embedding(c)).collect();
    let query = mean_of(own.iter().map(Vec::as_slice), dim)
        .ok_or_else(|| Error::InsufficientData("selected clips have no frame embeddings".into()))?;
    let mut best: Option<(f64, &str)> = None;
    for key in audio_index.keys() {
        let users: Vec<Vec<T>> = catalog
            .records
            .iter()
            .filter(|ad| ad.bgm_id.as_deref() == Some(key.as_str()))
            .flat_map(|ad| ad.clips.iter().filter_map(|c| catalog.clip_embedding(c)))
            .collect();
        let score = mean_of(users.iter().map(Vec::as_slice), dim)
            .and_then(|profile| cosine(&query, &profile))
            .map_or(f64::NEG_INFINITY, |c| c.as_f64());
        let better = match best {
            None => true,
            Some((s, k)) => match score.total_cmp(&s) {
                Ordering::Greater => true,
                Ordering::Equal => key.as_str() < k,
                Ordering::Less => false,
            },
        };
        if better {
            best = Some((score, key.as_str()));
        }
    }
    let (_, track) = best.ok_or_else(|| Error::InsufficientData("audio index is empty".into()))?;
    let pooled = catalog
        .pooled_bgm(track)
        .ok_or_else(|| Error::DanglingReference {
            key: track.to_string(),
            referrer: "audio index".into(),
        })?;
    Ok((track.to_string(), audio_quantizer.encode(&pooled)?))
}
