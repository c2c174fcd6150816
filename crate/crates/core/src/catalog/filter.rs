//! Dataset curation rules.
//!
//! Rules run in a fixed order so every rejected record is attributed to
//! exactly one rule: no_speech, engagement, duration, clip_length,
//! relevance, dedup.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::debug;

use super::types::{AdRecord, Catalog};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceRule {
    pub min_score: u8,
    pub min_fraction: f64,
}

impl Default for RelevanceRule {
    fn default() -> Self {
        RelevanceRule {
            min_score: 4,
            min_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Drop records flagged as lyrics-only or speechless.
    pub no_speech: bool,
    /// Keep records in the top fraction of both ctr and like rate.
    pub engagement_top: Option<f64>,
    /// Strict upper bound on video length, seconds.
    pub max_video_duration: Option<f64>,
    /// Inclusive clip duration range, seconds.
    pub clip_duration: Option<(u32, u32)>,
    pub relevance: Option<RelevanceRule>,
    pub dedup: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self::sft()
    }
}

impl FilterConfig {
    /// Rules used to derive the fine-tuning subset.
    pub fn sft() -> Self {
        FilterConfig {
            no_speech: false,
            engagement_top: None,
            max_video_duration: Some(120.0),
            clip_duration: Some((2, 60)),
            relevance: Some(RelevanceRule::default()),
            dedup: true,
        }
    }

    /// Rules used to build the alignment corpus.
    pub fn alignment() -> Self {
        FilterConfig {
            no_speech: true,
            engagement_top: Some(0.1),
            max_video_duration: None,
            clip_duration: None,
            relevance: None,
            dedup: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejections {
    pub no_speech: usize,
    pub engagement: usize,
    pub duration: usize,
    pub clip_length: usize,
    pub relevance: usize,
    pub dedup: usize,
}

impl Rejections {
    pub fn total(&self) -> usize {
        self.no_speech + self.engagement + self.duration + self.clip_length + self.relevance + self.dedup
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_count: usize,
    pub kept_count: usize,
    pub rejected: Rejections,
}

fn relevance_passes(ad: &AdRecord, rule: &RelevanceRule) -> Result<bool> {
    let mut good = 0usize;
    for clip in &ad.clips {
        let score = clip.relevance_score.ok_or_else(|| {
            Error::InvalidInput(format!(
                "relevance rule requested but clip {} of ad {} has no relevance_score",
                clip.clip_id, ad.photo_id
            ))
        })?;
        if score >= rule.min_score {
            good += 1;
        }
    }
    if ad.clips.is_empty() {
        return Ok(false);
    }
    Ok(good as f64 >= rule.min_fraction * ad.clips.len() as f64 - 1e-9)
}

/// Applies the configured rules and reports per-rule rejections.
pub fn filter_records(
    records: &[AdRecord],
    config: &FilterConfig,
) -> Result<(Vec<AdRecord>, FilterReport)> {
    let mut report = FilterReport {
        input_count: records.len(),
        ..Default::default()
    };
    let mut kept: Vec<AdRecord> = records.to_vec();

    if config.no_speech {
        let before = kept.len();
        kept.retain(|r| !r.lyrics_or_no_speech);
        report.rejected.no_speech = before - kept.len();
    }
    if let Some(p) = config.engagement_top {
        let before = kept.len();
        kept = engagement_percentile_filter(&kept, p)?;
        report.rejected.engagement = before - kept.len();
    }
    if let Some(max) = config.max_video_duration {
        let before = kept.len();
        kept.retain(|r| r.video_duration < max);
        report.rejected.duration = before - kept.len();
    }
    if let Some((lo, hi)) = config.clip_duration {
        let before = kept.len();
        kept.retain(|r| r.clips.iter().all(|c| (lo..=hi).contains(&c.duration)));
        report.rejected.clip_length = before - kept.len();
    }
    if let Some(rule) = &config.relevance {
        let before = kept.len();
        let mut next = Vec::with_capacity(kept.len());
        for r in kept {
            if relevance_passes(&r, rule)? {
                next.push(r);
            }
        }
        kept = next;
        report.rejected.relevance = before - kept.len();
    }
    if config.dedup {
        let before = kept.len();
        kept = dedup_records(&kept);
        report.rejected.dedup = before - kept.len();
    }
    report.kept_count = kept.len();
    debug!(?report, "filter applied");
    Ok((kept, report))
}

pub fn filter_sft<T: Scalar>(
    catalog: &Catalog<T>,
    config: &FilterConfig,
) -> Result<(Catalog<T>, FilterReport)> {
    let (records, report) = filter_records(&catalog.records, config)?;
    Ok((catalog.with_records(records), report))
}

/// Trims, collapses internal whitespace runs to one space, and lowercases.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Hex SHA-256 of the normalized brand, product name and script.
pub fn dedup_key(ad: &AdRecord) -> String {
    let mut hasher = Sha256::new();
    hasher.update(normalize_text(&ad.product.brand).as_bytes());
    hasher.update([0x1f]);
    hasher.update(normalize_text(&ad.product.name).as_bytes());
    hasher.update([0x1f]);
    hasher.update(normalize_text(&ad.full_script()).as_bytes());
    hex::encode(hasher.finalize())
}

/// Keeps the first record of every dedup-key class, preserving order.
pub fn dedup_records(records: &[AdRecord]) -> Vec<AdRecord> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter(|r| seen.insert(dedup_key(r)))
        .cloned()
        .collect()
}

pub fn dedup<T: Scalar>(catalog: &Catalog<T>) -> Catalog<T> {
    catalog.with_records(dedup_records(&catalog.records))
}

/// Value at which the top `p` fraction starts, by nearest rank.
///
/// With `n` sorted values, ceil(p*n) of them are at or above the returned
/// threshold (ties may admit more).
pub fn top_fraction_threshold(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let keep = ((p * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Some(sorted[n - keep])
}

/// Keeps records whose ctr and like rate both reach the (1 - p) quantile.
pub fn engagement_percentile_filter(records: &[AdRecord], p: f64) -> Result<Vec<AdRecord>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::out_of_range("engagement fraction", p, "(0, 1]"));
    }
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let mut ctr = Vec::with_capacity(records.len());
    let mut like = Vec::with_capacity(records.len());
    for r in records {
        let e = r.engagement.ok_or_else(|| {
            Error::InvalidInput(format!("ad {} has no engagement data", r.photo_id))
        })?;
        ctr.push(e.ctr);
        like.push(e.like_rate);
    }
    let ctr_min = top_fraction_threshold(&ctr, p).expect("nonempty");
    let like_min = top_fraction_threshold(&like, p).expect("nonempty");
    Ok(records
        .iter()
        .zip(ctr.iter().zip(&like))
        .filter(|(_, (&c, &l))| c >= ctr_min && l >= like_min)
        .map(|(r, _)| r.clone())
        .collect())
}
