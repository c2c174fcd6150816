//! The two editing flows: script-driven (select, sort, music) and
//! footage-driven (script, sort, music), with every predicted asset passed
//! through tokens and grounded back to the catalog.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use tracing::info;

use super::baseline::{baseline_bgm, baseline_script, baseline_select, baseline_sort, PredictorPlan};
use super::edl::{assemble_edl, EditDecisionList, SegmentMap, Strategy};
use super::segment::{segment_by_continuity, Segment, SegmentConfig};
use crate::catalog::{AdRecord, Catalog, ClipRecord};
use crate::error::{Error, Result};
use crate::quantizer::QuantizerModel;
use crate::retrieval::{ground_tokens, IndexSet, MediaId};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EditMode {
    /// The ad's script is given; clips are selected from a candidate pool.
    ScriptDriven,
    /// The ad's clips are given; a script is written for them.
    FootageDriven,
}

impl std::str::FromStr for EditMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "script-driven" | "script_driven" => Ok(EditMode::ScriptDriven),
            "footage-driven" | "footage_driven" => Ok(EditMode::FootageDriven),
            other => Err(Error::Config(format!("unknown edit mode `{other}`"))),
        }
    }
}

/// Continuity segments of one source video; its frames must cover
/// `0..n` without gaps.
pub fn segment_video<T: Scalar>(catalog: &Catalog<T>, photo_id: &str, config: &SegmentConfig) -> Result<Vec<Segment<T>>> {
    let frames = catalog.frames_of(photo_id);
    if let Some(pos) = frames.iter().enumerate().position(|(i, &(f, _))| f as usize != i) {
        return Err(Error::InsufficientData(format!(
            "video {photo_id} has no embedding for frame {pos}"
        )));
    }
    let rows: Vec<&[T]> = frames.iter().map(|&(_, r)| catalog.video.row(r)).collect();
    segment_by_continuity(photo_id, &rows, config)
}

/// Candidate pool for script-driven editing: the ad's own clips followed by
/// those of other ads in the same category.
pub fn candidate_pool<'a, T>(catalog: &'a Catalog<T>, ad: &'a AdRecord) -> Vec<&'a ClipRecord> {
    let mut pool: Vec<&ClipRecord> = ad.clips.iter().collect();
    pool.extend(
        catalog
            .records
            .iter()
            .filter(|o| o.photo_id != ad.photo_id && o.product.category == ad.product.category)
            .flat_map(|o| o.clips.iter()),
    );
    pool
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditResult {
    pub photo_id: String,
    pub mode: EditMode,
    pub plan: PredictorPlan,
    pub edl: EditDecisionList,
}

pub struct Editor<'a, T> {
    pub catalog: &'a Catalog<T>,
    pub indexes: &'a IndexSet<T>,
    pub video_quantizer: &'a QuantizerModel<T>,
    pub audio_quantizer: Option<&'a QuantizerModel<T>>,
    pub segment_config: SegmentConfig,
}

impl<'a, T: Scalar> Editor<'a, T> {
    /// Tokenizes each clip's mean embedding and grounds it in the clip index.
    fn ground_clips(&self, clips: &[&ClipRecord]) -> Result<Vec<ClipRecord>> {
        let mut groups = Vec::with_capacity(clips.len());
        for clip in clips {
            let emb = self.catalog.clip_embedding(clip).ok_or_else(|| {
                Error::InsufficientData(format!("clip {} has no frame embeddings", clip.clip_id))
            })?;
            groups.push(self.video_quantizer.encode(&emb)?);
        }
        ground_tokens(self.video_quantizer, &self.indexes.clip, &groups)?
            .into_iter()
            .map(|id| self.clip_record(&id))
            .collect()
    }

    fn clip_record(&self, id: &MediaId) -> Result<ClipRecord> {
        self.catalog
            .records
            .iter()
            .flat_map(|r| r.clips.iter())
            .find(|c| c.clip_id == id.as_str())
            .cloned()
            .ok_or_else(|| Error::DanglingReference {
                key: id.to_string(),
                referrer: "clip index".into(),
            })
    }

    fn music(&self, clips: &[ClipRecord]) -> Result<Option<(MediaId, crate::quantizer::CodeGroup)>> {
        let (Some(aq), Some(audio_index)) = (self.audio_quantizer, self.indexes.audio.as_ref()) else {
            return Ok(None);
        };
        let (_, group) = baseline_bgm(self.catalog, clips, audio_index, aq)?;
        let id = ground_tokens(aq, audio_index, std::slice::from_ref(&group))?.remove(0);
        Ok(Some((id, group)))
    }

    pub fn edit(&self, photo_id: &str, mode: EditMode, strategy: Strategy) -> Result<EditResult> {
        let ad = self
            .catalog
            .record(photo_id)
            .ok_or_else(|| Error::InvalidInput(format!("no ad with photo_id {photo_id}")))?;
        let (chosen, script) = match mode {
            EditMode::ScriptDriven => {
                let script: Vec<String> = ad.script_lines.iter().map(|l| l.trim().to_string()).collect();
                if script.is_empty() {
                    return Err(Error::InsufficientData(format!("ad {photo_id} has no script")));
                }
                let pool = candidate_pool(self.catalog, ad);
                let owned: Vec<ClipRecord> = pool.iter().map(|c| (*c).clone()).collect();
                let picked = baseline_select(&owned, script.len())?;
                let picked: Vec<&ClipRecord> = picked.into_iter().map(|i| pool[i]).collect();
                let grounded = self.ground_clips(&picked)?;
                let order = baseline_sort(&grounded)?;
                (order.into_iter().map(|i| grounded[i].clone()).collect::<Vec<_>>(), script)
            }
            EditMode::FootageDriven => {
                let refs: Vec<&ClipRecord> = ad.clips.iter().collect();
                let grounded = self.ground_clips(&refs)?;
                let order = baseline_sort(&grounded)?;
                let sorted: Vec<ClipRecord> = order.into_iter().map(|i| grounded[i].clone()).collect();
                let script = baseline_script(ad, &sorted);
                (sorted, script)
            }
        };
        let music = self.music(&chosen)?;
        let plan = PredictorPlan {
            selected: chosen.iter().map(|c| c.clip_id.clone()).collect(),
            script,
            bgm_tokens: music.as_ref().map(|(_, g)| g.clone()),
        };
        let mut segments = SegmentMap::new();
        if strategy == Strategy::ByClip {
            let sources: BTreeSet<&str> = chosen.iter().map(|c| c.photo_id.as_str()).collect();
            for source in sources {
                segments.insert(source.to_string(), segment_video(self.catalog, source, &self.segment_config)?);
            }
        }
        let edl = assemble_edl(&plan, music.map(|(id, _)| id), self.catalog, &segments, strategy)?;
        info!(photo_id, entries = edl.entries.len(), duration = edl.total_duration(), "edit assembled");
        Ok(EditResult {
            photo_id: photo_id.to_string(),
            mode,
            plan,
            edl,
        })
    }
}
