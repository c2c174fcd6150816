use serde::{Deserialize, Serialize};

use super::types::AdRecord;
use crate::evaluation::metrics::word_count;

/// Histogram bin `[lo, hi)`; the last bin is open-ended and the first also
/// absorbs values below its lower edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub histogram: Vec<Bin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub ads: usize,
    pub clips_per_video: Summary,
    pub clip_duration: Summary,
    pub video_duration: Summary,
    pub clip_text_length: Summary,
    pub video_text_length: Summary,
}

pub const CLIPS_PER_VIDEO_EDGES: &[f64] = &[0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 15.0, 20.0];
pub const CLIP_DURATION_EDGES: &[f64] = &[0.0, 2.0, 5.0, 10.0, 20.0, 30.0, 60.0];
pub const VIDEO_DURATION_EDGES: &[f64] = &[0.0, 15.0, 30.0, 60.0, 90.0, 120.0, 180.0];
pub const CLIP_TEXT_EDGES: &[f64] = &[0.0, 5.0, 10.0, 20.0, 40.0];
pub const VIDEO_TEXT_EDGES: &[f64] = &[0.0, 25.0, 50.0, 100.0, 200.0, 400.0];

pub fn histogram(values: &[f64], edges: &[f64]) -> Vec<Bin> {
    let mut bins: Vec<Bin> = edges
        .iter()
        .enumerate()
        .map(|(i, &lo)| Bin {
            lo,
            hi: edges.get(i + 1).copied(),
            count: 0,
        })
        .collect();
    for &v in values {
        let idx = edges.iter().rposition(|&e| v >= e).unwrap_or(0);
        bins[idx].count += 1;
    }
    bins
}

pub fn summarize(values: &[f64], edges: &[f64]) -> Summary {
    let histogram = histogram(values, edges);
    if values.is_empty() {
        return Summary {
            count: 0,
            min: 0.0,
            max: 0.0,
            mean: 0.0,
            median: 0.0,
            histogram,
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Summary {
        count: n,
        min: sorted[0],
        max: sorted[n - 1],
        mean: sorted.iter().sum::<f64>() / n as f64,
        median,
        histogram,
    }
}

pub fn dataset_stats(records: &[AdRecord]) -> StatsReport {
    let clips_per_video: Vec<f64> = records.iter().map(|r| r.clips.len() as f64).collect();
    let clip_duration: Vec<f64> = records
        .iter()
        .flat_map(|r| r.clips.iter().map(|c| c.duration as f64))
        .collect();
    let video_duration: Vec<f64> = records.iter().map(|r| r.video_duration).collect();
    let clip_text: Vec<f64> = records
        .iter()
        .flat_map(|r| r.clips.iter().map(|c| word_count(&c.script_line) as f64))
        .collect();
    let video_text: Vec<f64> = records
        .iter()
        .map(|r| r.script_lines.iter().map(|l| word_count(l)).sum::<usize>() as f64)
        .collect();
    StatsReport {
        ads: records.len(),
        clips_per_video: summarize(&clips_per_video, CLIPS_PER_VIDEO_EDGES),
        clip_duration: summarize(&clip_duration, CLIP_DURATION_EDGES),
        video_duration: summarize(&video_duration, VIDEO_DURATION_EDGES),
        clip_text_length: summarize(&clip_text, CLIP_TEXT_EDGES),
        video_text_length: summarize(&video_text, VIDEO_TEXT_EDGES),
    }
}
