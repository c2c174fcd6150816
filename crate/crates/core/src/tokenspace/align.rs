use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::grammar::{render_clip, render_product, ProductFields};
use super::vocab::{Marker, Vocabulary};
use crate::catalog::{AdRecord, Catalog, ClipRecord};
use crate::error::{Error, Result};
use crate::quantizer::{CodeGroup, QuantizerConfig, QuantizerModel};
use crate::retrieval::decode_frame_id;
use crate::scalar::Scalar;

/// Code groups for every catalog frame and pooled BGM track, computed once.
pub struct Tokenizer<'a, T> {
    pub catalog: &'a Catalog<T>,
    pub vocab: Vocabulary,
    frame_codes: HashMap<String, CodeGroup>,
    bgm_codes: HashMap<String, CodeGroup>,
    /// Per source video, `(frame_index, key)` in time order.
    timelines: HashMap<String, Vec<(u32, String)>>,
}

impl<'a, T: Scalar> Tokenizer<'a, T> {
    pub fn new(
        catalog: &'a Catalog<T>,
        video: &QuantizerModel<T>,
        audio: Option<&QuantizerModel<T>>,
    ) -> Result<Self> {
        let audio_cfg = audio.map_or_else(QuantizerConfig::audio, |q| q.config.clone());
        let vocab = Vocabulary::new(&video.config, &audio_cfg);
        let groups = video.encode_matrix(&catalog.video)?;
        let frame_codes = catalog.video.row_keys().iter().cloned().zip(groups).collect();
        let mut bgm_codes = HashMap::new();
        if let (Some(q), Some(m)) = (audio, catalog.pooled_bgm_matrix()?) {
            let groups = q.encode_matrix(&m)?;
            bgm_codes = m.row_keys().iter().cloned().zip(groups).collect();
        }
        let mut timelines: HashMap<String, Vec<(u32, String)>> = HashMap::new();
        for key in catalog.video.row_keys() {
            let (photo, frame) = decode_frame_id(key)?;
            timelines.entry(photo).or_default().push((frame, key.clone()));
        }
        timelines.values_mut().for_each(|t| t.sort_unstable());
        Ok(Tokenizer {
            catalog,
            vocab,
            frame_codes,
            bgm_codes,
            timelines,
        })
    }

    pub fn frame_group(&self, key: &str) -> Option<&CodeGroup> {
        self.frame_codes.get(key)
    }

    pub fn bgm_group(&self, track: &str) -> Option<&CodeGroup> {
        self.bgm_codes.get(track)
    }

    /// Frame keys of `photo_id` whose timestamps fall in `[start, end)`, in time order.
    pub fn frames_in_span(&self, photo_id: &str, start: u32, end: u32) -> Vec<&str> {
        self.timelines.get(photo_id).map_or_else(Vec::new, |t| {
            t.iter()
                .filter(|(f, _)| *f >= start && *f < end)
                .map(|(_, k)| k.as_str())
                .collect()
        })
    }

    /// Code groups of the frames soft-aligned to a clip.
    pub fn clip_groups(&self, clip: &ClipRecord) -> Vec<CodeGroup> {
        self.frames_in_span(&clip.photo_id, clip.start_frame, clip.end_frame())
            .into_iter()
            .filter_map(|k| self.frame_group(k).cloned())
            .collect()
    }

    /// Code group of the earliest frame inside the clip's span.
    pub fn first_frame_group(&self, clip: &ClipRecord) -> Result<&CodeGroup> {
        self.frames_in_span(&clip.photo_id, clip.start_frame, clip.end_frame())
            .first()
            .and_then(|k| self.frame_group(k))
            .ok_or_else(|| Error::InsufficientData(format!("clip {} has no frames in its span", clip.clip_id)))
    }

    pub fn ad_bgm_group(&self, ad: &AdRecord) -> Result<&CodeGroup> {
        let track = ad
            .bgm_id
            .as_deref()
            .ok_or_else(|| Error::InsufficientData(format!("ad {} has no bgm_id", ad.photo_id)))?;
        self.bgm_group(track)
            .ok_or_else(|| Error::InsufficientData(format!("no audio embedding for bgm track {track}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentSample {
    pub photo_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlignOutcome {
    Sample(AlignmentSample),
    Skipped { photo_id: String, reason: String },
}

/// Product block, then each clip's script text followed by the tokens of the
/// frames inside its span, then the pooled BGM tokens.
pub fn serialize_alignment_sample<T: Scalar>(tok: &Tokenizer<T>, ad: &AdRecord) -> Result<AlignOutcome> {
    let skip = |reason: String| {
        warn!(photo_id = %ad.photo_id, %reason, "alignment sample skipped");
        Ok(AlignOutcome::Skipped {
            photo_id: ad.photo_id.clone(),
            reason,
        })
    };
    if ad.clips.is_empty() {
        return skip("ad has no clips".into());
    }
    let mut text = render_product(&ProductFields::from(&ad.product));
    for (i, clip) in ad.clips.iter().enumerate() {
        let groups = tok.clip_groups(clip);
        if groups.is_empty() {
            return skip(format!("clip {} has no frames in its span", clip.clip_id));
        }
        let line = ad.script_lines.get(i).unwrap_or(&clip.script_line);
        text.push_str(&render_clip(&tok.vocab, line, &groups)?);
    }
    let bgm = match tok.ad_bgm_group(ad) {
        Ok(g) => g,
        Err(e) => return skip(e.to_string()),
    };
    text.push_str(Marker::BgmBegin.surface());
    text.push_str(&tok.vocab.render_group(bgm)?);
    text.push_str(Marker::BgmEnd.surface());
    Ok(AlignOutcome::Sample(AlignmentSample {
        photo_id: ad.photo_id.clone(),
        text,
    }))
}
