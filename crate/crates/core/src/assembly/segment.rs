use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vecmath::{check_dim, cosine, mean_of};

/// Slack on the threshold comparison so a constant sequence never splits on
/// rounding noise in its own mean.
const THRESHOLD_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub k_sigma: f64,
    pub abs_floor: f64,
    /// Minimum segment length in frames.
    pub min_len: usize,
    /// Analysis frame rate.
    pub fps: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            k_sigma: 2.0,
            abs_floor: 0.5,
            min_len: 10,
            fps: 20.0,
        }
    }
}

/// A run of visually continuous frames, `[start_frame, end_frame)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub photo_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub fps: f64,
    pub mean_embedding: Vec<T>,
}

impl<T: Scalar> Segment<T> {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start_time(&self) -> f64 {
        self.start_frame as f64 / self.fps
    }

    pub fn end_time(&self) -> f64 {
        self.end_frame as f64 / self.fps
    }

    pub fn contains_time(&self, t: f64) -> bool {
        t >= self.start_time() && t < self.end_time()
    }
}

/// Cosine similarity of each consecutive frame pair; a zero frame scores 0.
pub fn consecutive_similarities<T: Scalar>(frames: &[&[T]]) -> Vec<f64> {
    frames
        .windows(2)
        .map(|w| cosine(w[0], w[1]).map_or(0.0, |c| c.as_f64()))
        .collect()
}

/// Frame ranges split wherever similarity drops below
/// `max(abs_floor, mean - k_sigma * std)`, then short runs merged away.
pub fn continuity_ranges(sims: &[f64], config: &SegmentConfig) -> Vec<(usize, usize)> {
    let n = sims.len() + 1;
    if sims.is_empty() {
        return vec![(0, n)];
    }
    let m = sims.len() as f64;
    let mean = sims.iter().sum::<f64>() / m;
    let var = sims.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / m;
    let threshold = config.abs_floor.max(mean - config.k_sigma * var.sqrt());
    let mut cuts: Vec<usize> = sims
        .iter()
        .enumerate()
        .filter(|(_, &s)| s < threshold - THRESHOLD_SLACK)
        .map(|(t, _)| t + 1)
        .collect();
    // merge short runs into the neighbour across the more similar boundary,
    // the left one on ties
    loop {
        let mut bounds = vec![0];
        bounds.extend(&cuts);
        bounds.push(n);
        let short = bounds.windows(2).position(|w| w[1] - w[0] < config.min_len);
        let Some(i) = short.filter(|_| !cuts.is_empty()) else {
            break;
        };
        let left = (i > 0).then(|| sims[bounds[i] - 1]);
        let right = (i + 1 < bounds.len() - 1).then(|| sims[bounds[i + 1] - 1]);
        let drop_cut = match (left, right) {
            (Some(l), Some(r)) if r > l => i,
            (Some(_), _) => i - 1,
            (None, _) => i,
        };
        cuts.remove(drop_cut);
    }
    let mut bounds = vec![0];
    bounds.extend(&cuts);
    bounds.push(n);
    bounds.windows(2).map(|w| (w[0], w[1])).collect()
}

pub fn segment_by_continuity<T: Scalar>(
    photo_id: &str,
    frames: &[&[T]],
    config: &SegmentConfig,
) -> Result<Vec<Segment<T>>> {
    let Some(first) = frames.first() else {
        return Err(Error::InsufficientData(format!("video {photo_id} has no frames")));
    };
    if !(config.fps.is_finite() && config.fps > 0.0) {
        return Err(Error::Config("segmentation fps must be positive".into()));
    }
    let dim = first.len();
    for f in frames {
        check_dim("frame embedding", dim, f.len())?;
    }
    let sims = consecutive_similarities(frames);
    Ok(continuity_ranges(&sims, config)
        .into_iter()
        .map(|(s, e)| Segment {
            photo_id: photo_id.to_string(),
            start_frame: s,
            end_frame: e,
            fps: config.fps,
            mean_embedding: mean_of(frames[s..e].iter().copied(), dim).expect("nonempty range"),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(min_len: usize) -> SegmentConfig {
        SegmentConfig {
            min_len,
            ..SegmentConfig::default()
        }
    }

    fn plateaus(spec: &[(usize, [f64; 2])]) -> Vec<[f64; 2]> {
        spec.iter().flat_map(|&(n, v)| std::iter::repeat_n(v, n)).collect()
    }

    fn run(frames: &[[f64; 2]], c: &SegmentConfig) -> Vec<(usize, usize)> {
        let refs: Vec<&[f64]> = frames.iter().map(|f| f.as_slice()).collect();
        segment_by_continuity("1", &refs, c)
            .unwrap()
            .iter()
            .map(|s| (s.start_frame, s.end_frame))
            .collect()
    }

    #[test]
    fn constant_sequence_is_one_segment() {
        let f = plateaus(&[(50, [0.3, 0.7])]);
        assert_eq!(run(&f, &cfg(10)), vec![(0, 50)]);
    }

    #[test]
    fn orthogonal_plateaus_split_at_the_switch() {
        // sims: 78 ones and one zero; mean 78/79, std sqrt(78)/79
        let f = plateaus(&[(40, [1.0, 0.0]), (40, [0.0, 1.0])]);
        assert_eq!(run(&f, &cfg(10)), vec![(0, 40), (40, 80)]);
    }

    #[test]
    fn short_blip_merges_left_on_a_tie() {
        let f = plateaus(&[(40, [1.0, 0.0]), (3, [0.0, 1.0]), (40, [1.0, 0.0])]);
        assert_eq!(run(&f, &cfg(5)), vec![(0, 43), (43, 83)]);
    }

    #[test]
    fn blip_joins_the_more_similar_side() {
        // boundary into the blip scores 0, boundary out scores ~0.45
        let f = plateaus(&[(40, [1.0, 0.0]), (3, [0.0, 1.0]), (40, [1.0, 0.5])]);
        let ranges = run(&f, &cfg(5));
        assert_eq!(ranges, vec![(0, 40), (40, 83)]);
    }

    #[test]
    fn degenerate_inputs() {
        let one: Vec<&[f64]> = vec![&[1.0, 0.0]];
        let segs = segment_by_continuity("7", &one, &cfg(10)).unwrap();
        assert_eq!((segs[0].start_frame, segs[0].end_frame), (0, 1));
        let none: Vec<&[f64]> = vec![];
        assert!(segment_by_continuity("7", &none, &cfg(10)).is_err());
    }

    #[test]
    fn mean_embedding_is_the_member_mean() {
        let f = [[1.0, 0.0], [1.0, 0.2], [0.0, 1.0], [0.0, 1.0]];
        let refs: Vec<&[f64]> = f.iter().map(|r| r.as_slice()).collect();
        let segs = segment_by_continuity("1", &refs, &cfg(1)).unwrap();
        assert_eq!(segs.len(), 2);
        assert!((segs[0].mean_embedding[1] - 0.1).abs() < 1e-15);
    }
}
