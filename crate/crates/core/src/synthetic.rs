//! Seeded fixture generators: clustered embedding mixtures and small
//! self-consistent ad catalogs.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::catalog::{AdRecord, Catalog, ClipRecord, EmbeddingMatrix, Engagement, Modality, ProductInfo};
use crate::error::Result;
use crate::retrieval::{encode_clip_id, encode_frame_id};
use crate::scalar::Scalar;

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub rows: usize,
    pub dim: usize,
    pub clusters: usize,
    /// Per-coordinate noise as a fraction of the per-coordinate centre spread.
    pub noise: f64,
    pub seed: u64,
}

/// Rows drawn round-robin from `clusters` standard-normal centres plus
/// isotropic noise; keyed as frame ids so they can be indexed.
pub fn clustered_mixture<T: Scalar>(spec: &MixtureSpec, modality: Modality) -> Result<(EmbeddingMatrix<T>, Vec<Vec<f64>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centres: Vec<Vec<f64>> = (0..spec.clusters).map(|_| gaussian(&mut rng, spec.dim, 1.0)).collect();
    let mut data = Vec::with_capacity(spec.rows * spec.dim);
    let mut keys = Vec::with_capacity(spec.rows);
    for i in 0..spec.rows {
        let c = &centres[i % spec.clusters];
        data.extend(c.iter().map(|&x| T::of(x + spec.noise * rng.sample::<f64, _>(StandardNormal))));
        keys.push(encode_frame_id(&(1 + i / 10_000).to_string(), (i % 10_000) as u32)?);
    }
    Ok((EmbeddingMatrix::new(modality, spec.dim, data, keys)?, centres))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogSpec {
    pub ads: usize,
    pub clips_per_ad: (usize, usize),
    /// Inclusive clip length range, seconds.
    pub clip_seconds: (u32, u32),
    pub video_dim: usize,
    pub audio_dim: usize,
    pub tracks: usize,
    pub segments_per_track: usize,
    /// Chance a clip continues the previous clip's shot.
    pub shot_continuation: f64,
    /// Every n-th ad gets low relevance scores so filtering has work to do.
    pub low_relevance_every: Option<usize>,
    pub seed: u64,
}

impl Default for CatalogSpec {
    fn default() -> Self {
        CatalogSpec {
            ads: 24,
            clips_per_ad: (3, 5),
            clip_seconds: (2, 6),
            video_dim: 32,
            audio_dim: 16,
            tracks: 6,
            segments_per_track: 8,
            shot_continuation: 0.25,
            low_relevance_every: None,
            seed: 7,
        }
    }
}

const CATEGORIES: &[&str] = &["beauty", "food", "apparel", "electronics"];
const BRANDS: &[&str] = &["Lumen", "Harbor", "Kite", "Marlow", "Sable", "Tansy"];
const WORDS: &[&str] = &[
    "fresh", "bright", "soft", "daily", "quick", "smooth", "light", "bold", "clean", "warm", "easy", "pure",
    "glow", "taste", "wear", "charge", "feel", "shine", "try", "love", "today", "style", "comfort", "power",
];

fn sentence(rng: &mut ChaCha8Rng, words: (usize, usize)) -> String {
    let n = rng.random_range(words.0..=words.1);
    (0..n).map(|_| *WORDS.choose(rng).expect("word list")).collect::<Vec<_>>().join(" ")
}

/// Ads whose clips tile their videos; frames of one shot share a direction,
/// music tracks are noisy copies of a per-track direction.
pub fn synthetic_catalog<T: Scalar>(spec: &CatalogSpec) -> Result<Catalog<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let track_ids: Vec<String> = (0..spec.tracks).map(|t| format!("bgm{t:03}")).collect();
    let mut audio_rows = Vec::new();
    for id in &track_ids {
        let base = unit(gaussian(&mut rng, spec.audio_dim, 1.0));
        for s in 0..spec.segments_per_track {
            let noise = gaussian(&mut rng, spec.audio_dim, 0.05 / (spec.audio_dim as f64).sqrt());
            let row = base.iter().zip(noise).map(|(b, n)| T::of(b + n)).collect();
            audio_rows.push((format!("{id}/{s}"), row));
        }
    }
    let mut records = Vec::with_capacity(spec.ads);
    let mut frame_rows = Vec::new();
    for a in 0..spec.ads {
        let photo_id = (7_000_000 + a).to_string();
        let n_clips = rng.random_range(spec.clips_per_ad.0..=spec.clips_per_ad.1);
        let low = spec.low_relevance_every.is_some_and(|k| k > 0 && a % k == k - 1);
        let mut clips = Vec::with_capacity(n_clips);
        let mut script_lines = Vec::with_capacity(n_clips);
        let mut start = 0u32;
        let mut shot = unit(gaussian(&mut rng, spec.video_dim, 1.0));
        for c in 0..n_clips {
            let duration = rng.random_range(spec.clip_seconds.0..=spec.clip_seconds.1);
            if c > 0 && !rng.random_bool(spec.shot_continuation) {
                shot = unit(gaussian(&mut rng, spec.video_dim, 1.0));
            }
            let mut frame_keys = Vec::with_capacity(duration as usize);
            for f in start..start + duration {
                let key = encode_frame_id(&photo_id, f)?;
                let noise = gaussian(&mut rng, spec.video_dim, 0.05 / (spec.video_dim as f64).sqrt());
                frame_rows.push((key.clone(), shot.iter().zip(noise).map(|(s, n)| T::of(s + n)).collect()));
                frame_keys.push(key);
            }
            let line = sentence(&mut rng, (4, 10));
            let score = if low { rng.random_range(1..=3) } else { rng.random_range(4..=5) };
            clips.push(ClipRecord {
                clip_id: encode_clip_id(&photo_id, start, duration)?,
                photo_id: photo_id.clone(),
                start_frame: start,
                duration,
                script_line: line.clone(),
                frame_keys,
                relevance_score: Some(score),
                polarity: None,
            });
            script_lines.push(line);
            start += duration;
        }
        let category = CATEGORIES[a % CATEGORIES.len()];
        records.push(AdRecord {
            photo_id: photo_id.clone(),
            product: ProductInfo {
                category: category.into(),
                brand: BRANDS.choose(&mut rng).expect("brand list").to_string(),
                name: format!("{category} item {a}"),
                selling_points: sentence(&mut rng, (3, 6)),
            },
            script_lines,
            clips,
            bgm_id: (!track_ids.is_empty()).then(|| track_ids[a % track_ids.len()].clone()),
            video_duration: start as f64,
            engagement: Some(Engagement {
                ctr: rng.random_range(0.0..0.1),
                like_rate: rng.random_range(0.0..0.05),
            }),
            lyrics_or_no_speech: false,
        });
    }
    let video = EmbeddingMatrix::from_rows(Modality::Video, spec.video_dim, frame_rows)?;
    let audio = (!audio_rows.is_empty())
        .then(|| EmbeddingMatrix::from_rows(Modality::Audio, spec.audio_dim, audio_rows))
        .transpose()?;
    Catalog::new(records, video, audio)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_valid_and_seeded() {
        let spec = CatalogSpec::default();
        let a: Catalog<f32> = synthetic_catalog(&spec).unwrap();
        let b: Catalog<f32> = synthetic_catalog(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 24);
        assert!(a.records.iter().all(|r| r.is_sft_ready()));
        assert_eq!(a.bgm_tracks().len(), 6);
    }

    #[test]
    fn mixture_shape() {
        let spec = MixtureSpec {
            rows: 100,
            dim: 8,
            clusters: 4,
            noise: 0.05,
            seed: 1,
        };
        let (m, c) = clustered_mixture::<f64>(&spec, Modality::Video).unwrap();
        assert_eq!((m.rows(), m.dim(), c.len()), (100, 8, 4));
    }
}
