use std::path::Path;

use super::index::{index_file_name, IndexMode, VectorIndex};
use super::media_id::{MediaId, MediaKind};
use crate::catalog::{Catalog, Modality};
use crate::error::{Error, Result};
use crate::quantizer::{CodeGroup, QuantizerModel};
use crate::scalar::Scalar;

fn modality_of(kind: MediaKind) -> Modality {
    match kind {
        MediaKind::Frame | MediaKind::Clip => Modality::Video,
        MediaKind::Audio => Modality::Audio,
    }
}

/// Decodes each group and returns the id of its nearest indexed asset.
pub fn ground_tokens<T: Scalar>(
    quantizer: &QuantizerModel<T>,
    index: &VectorIndex<T>,
    groups: &[CodeGroup],
) -> Result<Vec<MediaId>> {
    if modality_of(index.kind()) != quantizer.modality() {
        return Err(Error::InvalidInput(format!(
            "{} quantizer cannot ground into a {:?} index",
            quantizer.modality().as_str(),
            index.kind()
        )));
    }
    groups
        .iter()
        .map(|g| {
            let v = quantizer.decode(g)?;
            let hit = index.query(&v, 1)?;
            Ok(hit.hits.into_iter().next().expect("k = 1 on a nonempty index").id)
        })
        .collect()
}

/// The frame, clip and audio indexes over one catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet<T> {
    pub frame: VectorIndex<T>,
    pub clip: VectorIndex<T>,
    pub audio: Option<VectorIndex<T>>,
}

impl<T: Scalar> IndexSet<T> {
    /// Frame rows as stored, clips as mean frame embeddings, audio as one
    /// pooled row per track.
    pub fn build(catalog: &Catalog<T>, mode: IndexMode, seed: u64) -> Result<Self> {
        let frame = VectorIndex::build(&catalog.video, MediaKind::Frame, mode, seed)?;
        let clip = VectorIndex::build(&catalog.clip_matrix()?, MediaKind::Clip, mode, seed)?;
        let audio = match catalog.pooled_bgm_matrix()? {
            Some(m) if !m.is_empty() => Some(VectorIndex::build(&m, MediaKind::Audio, mode, seed)?),
            _ => None,
        };
        Ok(IndexSet { frame, clip, audio })
    }

    /// The `(frame_id, clip_id)` pair nearest to one video token group.
    pub fn ground_video_pair(
        &self,
        quantizer: &QuantizerModel<T>,
        group: &CodeGroup,
    ) -> Result<(MediaId, MediaId)> {
        let groups = std::slice::from_ref(group);
        let frame = ground_tokens(quantizer, &self.frame, groups)?.remove(0);
        let clip = ground_tokens(quantizer, &self.clip, groups)?.remove(0);
        Ok((frame, clip))
    }

    pub fn audio(&self) -> Result<&VectorIndex<T>> {
        self.audio
            .as_ref()
            .ok_or_else(|| Error::InsufficientData("catalog has no audio index".into()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.frame.save(&dir.join(index_file_name(MediaKind::Frame)))?;
        self.clip.save(&dir.join(index_file_name(MediaKind::Clip)))?;
        if let Some(a) = &self.audio {
            a.save(&dir.join(index_file_name(MediaKind::Audio)))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let audio_path = dir.join(index_file_name(MediaKind::Audio));
        Ok(IndexSet {
            frame: VectorIndex::load(&dir.join(index_file_name(MediaKind::Frame)))?,
            clip: VectorIndex::load(&dir.join(index_file_name(MediaKind::Clip)))?,
            audio: if audio_path.exists() {
                Some(VectorIndex::load(&audio_path)?)
            } else {
                None
            },
        })
    }
}
