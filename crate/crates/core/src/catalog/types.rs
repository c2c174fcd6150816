use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::media_id::{decode_clip_id, decode_frame_id, validate_photo_id};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Video,
    Audio,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Video => "video",
            Modality::Audio => "audio",
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "video" => Ok(Modality::Video),
            "audio" => Ok(Modality::Audio),
            other => Err(Error::InvalidInput(format!("unknown modality `{other}`"))),
        }
    }
}

/// Row-major embedding matrix with one key per row.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix<T> {
    modality: Modality,
    dim: usize,
    data: Vec<T>,
    row_keys: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn new(modality: Modality, dim: usize, data: Vec<T>, row_keys: Vec<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("embedding dim must be positive".into()));
        }
        if data.len() != dim * row_keys.len() {
            return Err(Error::DimensionMismatch {
                what: format!("{} embedding data length", modality.as_str()),
                expected: dim * row_keys.len(),
                found: data.len(),
            });
        }
        let mut lookup = HashMap::with_capacity(row_keys.len());
        for (i, key) in row_keys.iter().enumerate() {
            if lookup.insert(key.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate embedding key `{key}`")));
            }
        }
        for (i, row) in data.chunks(dim).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "non-finite entry in embedding row `{}`",
                    row_keys[i]
                )));
            }
        }
        Ok(EmbeddingMatrix {
            modality,
            dim,
            data,
            row_keys,
            lookup,
        })
    }

    /// Builds a matrix from `(key, vector)` pairs.
    pub fn from_rows(
        modality: Modality,
        dim: usize,
        rows: impl IntoIterator<Item = (String, Vec<T>)>,
    ) -> Result<Self> {
        let mut data = Vec::new();
        let mut keys = Vec::new();
        for (key, row) in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: format!("row `{key}`"),
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend(row);
            keys.push(key);
        }
        Self::new(modality, dim, data, keys)
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.row_keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_keys.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row_keys(&self) -> &[String] {
        &self.row_keys
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.dim)
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.lookup.get(key).copied()
    }

    pub fn row_by_key(&self, key: &str) -> Option<&[T]> {
        self.index_of(key).map(|i| self.row(i))
    }

    /// Converts the element type.
    pub fn cast<U: Scalar>(&self) -> EmbeddingMatrix<U> {
        EmbeddingMatrix {
            modality: self.modality,
            dim: self.dim,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
            row_keys: self.row_keys.clone(),
            lookup: self.lookup.clone(),
        }
    }
}

impl<T: PartialEq> PartialEq for EmbeddingMatrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.modality == other.modality
            && self.dim == other.dim
            && self.data == other.data
            && self.row_keys == other.row_keys
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub photo_id: String,
    /// Start second (frame index at 1 fps).
    pub start_frame: u32,
    /// Duration in seconds at 1 fps.
    pub duration: u32,
    pub script_line: String,
    #[serde(default)]
    pub frame_keys: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance_score: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<Polarity>,
}

impl ClipRecord {
    pub fn end_frame(&self) -> u32 {
        self.start_frame + self.duration
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProductInfo {
    pub category: String,
    pub brand: String,
    /// Product name; part of the deduplication key.
    #[serde(default)]
    pub name: String,
    pub selling_points: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Engagement {
    pub ctr: f64,
    pub like_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdRecord {
    pub photo_id: String,
    pub product: ProductInfo,
    pub script_lines: Vec<String>,
    pub clips: Vec<ClipRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bgm_id: Option<String>,
    /// Source video length in seconds.
    pub video_duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engagement: Option<Engagement>,
    /// Set upstream when the soundtrack is mostly lyrics or has no speech.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub lyrics_or_no_speech: bool,
}

impl AdRecord {
    pub fn is_sft_ready(&self) -> bool {
        self.script_lines.len() == self.clips.len()
    }

    pub fn full_script(&self) -> String {
        self.script_lines.join("\n")
    }

    /// Number of 1 fps frames in the source video.
    pub fn frame_count(&self) -> u32 {
        self.video_duration.max(0.0).ceil() as u32
    }

    /// Checks record-local invariants.
    pub fn validate(&self) -> Result<()> {
        validate_photo_id(&self.photo_id)?;
        if !self.video_duration.is_finite() || self.video_duration < 0.0 {
            return Err(Error::InvalidInput(format!(
                "ad {}: invalid video_duration {}",
                self.photo_id, self.video_duration
            )));
        }
        for clip in &self.clips {
            let (photo, start, duration) = decode_clip_id(&clip.clip_id)?;
            if photo != self.photo_id || clip.photo_id != self.photo_id {
                return Err(Error::InvalidInput(format!(
                    "clip {} does not belong to ad {}",
                    clip.clip_id, self.photo_id
                )));
            }
            if start != clip.start_frame || duration != clip.duration {
                return Err(Error::InvalidInput(format!(
                    "clip {} id encodes ({start}, {duration}) but record says ({}, {})",
                    clip.clip_id, clip.start_frame, clip.duration
                )));
            }
            if clip.end_frame() > self.frame_count() {
                return Err(Error::out_of_range(
                    &format!("clip {} end frame", clip.clip_id),
                    clip.end_frame(),
                    &format!("<= {}", self.frame_count()),
                ));
            }
            if let Some(score) = clip.relevance_score {
                if score > 5 {
                    return Err(Error::out_of_range("relevance score", score, "0..=5"));
                }
            }
            for key in &clip.frame_keys {
                let (photo, frame) = decode_frame_id(key)?;
                if photo != self.photo_id || frame < clip.start_frame || frame >= clip.end_frame() {
                    return Err(Error::InvalidInput(format!(
                        "frame {key} lies outside clip {}",
                        clip.clip_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Advertisement records plus their precomputed embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog<T> {
    pub records: Vec<AdRecord>,
    pub video: Arc<EmbeddingMatrix<T>>,
    pub audio: Option<Arc<EmbeddingMatrix<T>>>,
}

/// Audio rows are keyed `<audio_id>` or `<audio_id>/<segment>`.
pub fn audio_track_of(key: &str) -> &str {
    key.split_once('/').map_or(key, |(track, _)| track)
}

impl<T: Scalar> Catalog<T> {
    pub fn new(
        records: Vec<AdRecord>,
        video: EmbeddingMatrix<T>,
        audio: Option<EmbeddingMatrix<T>>,
    ) -> Result<Self> {
        let catalog = Catalog {
            records,
            video: Arc::new(video),
            audio: audio.map(Arc::new),
        };
        catalog.validate()?;
        Ok(catalog)
    }

    /// Same embeddings, different record subset.
    pub fn with_records(&self, records: Vec<AdRecord>) -> Self {
        Catalog {
            records,
            video: Arc::clone(&self.video),
            audio: self.audio.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.video.modality() != Modality::Video {
            return Err(Error::InvalidInput("video matrix has wrong modality".into()));
        }
        for key in self.video.row_keys() {
            decode_frame_id(key)?;
        }
        if let Some(audio) = &self.audio {
            if audio.modality() != Modality::Audio {
                return Err(Error::InvalidInput("audio matrix has wrong modality".into()));
            }
        }
        for ad in &self.records {
            ad.validate()?;
            for clip in &ad.clips {
                for key in &clip.frame_keys {
                    if self.video.index_of(key).is_none() {
                        return Err(Error::DanglingReference {
                            key: key.clone(),
                            referrer: format!("clip {}", clip.clip_id),
                        });
                    }
                }
            }
            if let Some(bgm) = &ad.bgm_id {
                if self.audio_rows(bgm).is_empty() {
                    return Err(Error::DanglingReference {
                        key: bgm.clone(),
                        referrer: format!("ad {} bgm_id", ad.photo_id),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn record(&self, photo_id: &str) -> Option<&AdRecord> {
        self.records.iter().find(|r| r.photo_id == photo_id)
    }

    /// 1 fps frames of one source video as `(frame_index, row)`, ordered by time.
    pub fn frames_of(&self, photo_id: &str) -> Vec<(u32, usize)> {
        let mut frames: Vec<(u32, usize)> = self
            .video
            .row_keys()
            .iter()
            .enumerate()
            .filter_map(|(row, key)| {
                let (photo, frame) = decode_frame_id(key).ok()?;
                (photo == photo_id).then_some((frame, row))
            })
            .collect();
        frames.sort_unstable();
        frames
    }

    /// Mean of a clip's frame embeddings.
    pub fn clip_embedding(&self, clip: &ClipRecord) -> Option<Vec<T>> {
        let rows: Vec<&[T]> = clip
            .frame_keys
            .iter()
            .filter_map(|k| self.video.row_by_key(k))
            .collect();
        crate::vecmath::mean_of(rows, self.video.dim())
    }

    /// Embedding of the clip's earliest frame.
    pub fn first_frame(&self, clip: &ClipRecord) -> Option<&[T]> {
        clip.frame_keys
            .iter()
            .filter_map(|k| decode_frame_id(k).ok().map(|(_, f)| (f, k)))
            .min()
            .and_then(|(_, k)| self.video.row_by_key(k))
    }

    pub fn audio_rows(&self, audio_id: &str) -> Vec<usize> {
        let Some(audio) = &self.audio else {
            return Vec::new();
        };
        audio
            .row_keys()
            .iter()
            .enumerate()
            .filter(|(_, k)| audio_track_of(k) == audio_id)
            .map(|(i, _)| i)
            .collect()
    }

    /// Mean of a track's per-segment audio embeddings.
    pub fn pooled_bgm(&self, audio_id: &str) -> Option<Vec<T>> {
        let audio = self.audio.as_ref()?;
        let rows = self.audio_rows(audio_id);
        crate::vecmath::mean_of(rows.iter().map(|&i| audio.row(i)), audio.dim())
    }

    /// Distinct audio track ids in key order.
    pub fn bgm_tracks(&self) -> Vec<String> {
        let Some(audio) = &self.audio else {
            return Vec::new();
        };
        let mut ids: Vec<String> = audio
            .row_keys()
            .iter()
            .map(|k| audio_track_of(k).to_string())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// One pooled row per audio track.
    pub fn pooled_bgm_matrix(&self) -> Result<Option<EmbeddingMatrix<T>>> {
        let Some(audio) = &self.audio else {
            return Ok(None);
        };
        let rows = self
            .bgm_tracks()
            .into_iter()
            .filter_map(|id| self.pooled_bgm(&id).map(|v| (id, v)));
        EmbeddingMatrix::from_rows(Modality::Audio, audio.dim(), rows).map(Some)
    }

    /// One row per clip: the mean of its frame embeddings, keyed by clip id.
    pub fn clip_matrix(&self) -> Result<EmbeddingMatrix<T>> {
        let mut rows = Vec::new();
        for ad in &self.records {
            for clip in &ad.clips {
                if let Some(v) = self.clip_embedding(clip) {
                    rows.push((clip.clip_id.clone(), v));
                }
            }
        }
        EmbeddingMatrix::from_rows(Modality::Video, self.video.dim(), rows)
    }
}
