use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::baseline::PredictorPlan;
use super::segment::Segment;
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::retrieval::{decode_clip_id, MediaId, MediaKind};
use crate::scalar::Scalar;

pub const TIME_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Cut at the decoded clip bounds.
    #[serde(alias = "by-frame")]
    ByFrame,
    /// Cut at the bounds of the continuity segment holding the clip start.
    #[serde(alias = "by-clip")]
    ByClip,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "by_frame" | "by-frame" => Ok(Strategy::ByFrame),
            "by_clip" | "by-clip" => Ok(Strategy::ByClip),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdlEntry {
    /// Retrieved clip this entry renders.
    pub source: MediaId,
    pub photo_id: String,
    /// Span in the source video, seconds.
    pub in_time: f64,
    pub out_time: f64,
    pub script_line: String,
    /// Span on the output timeline, seconds.
    pub subtitle_start: f64,
    pub subtitle_end: f64,
}

impl EdlEntry {
    pub fn duration(&self) -> f64 {
        self.out_time - self.in_time
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditDecisionList {
    pub entries: Vec<EdlEntry>,
    pub bgm: Option<MediaId>,
    pub strategy: Strategy,
    /// Length of every referenced source video, seconds.
    pub source_durations: BTreeMap<String, f64>,
}

impl EditDecisionList {
    pub fn total_duration(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.subtitle_end)
    }

    /// Contiguous output timeline from zero, in-range source spans, subtitle
    /// spans equal to entry spans.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(format!("invalid edit decision list: {msg}")));
        if self.entries.is_empty() {
            return bad("no entries".into());
        }
        let mut cursor = 0.0;
        for (i, e) in self.entries.iter().enumerate() {
            let times = [e.in_time, e.out_time, e.subtitle_start, e.subtitle_end];
            if times.iter().any(|t| !t.is_finite()) {
                return bad(format!("entry {i} has non-finite times"));
            }
            if e.source.kind != MediaKind::Clip {
                return bad(format!("entry {i} source {} is not a clip id", e.source));
            }
            let Some(&limit) = self.source_durations.get(&e.photo_id) else {
                return bad(format!("entry {i} source video {} has no known duration", e.photo_id));
            };
            if e.in_time < -TIME_TOLERANCE || e.out_time > limit + TIME_TOLERANCE {
                return bad(format!("entry {i} span [{}, {}) exceeds source length {limit}", e.in_time, e.out_time));
            }
            if e.out_time - e.in_time <= TIME_TOLERANCE {
                return bad(format!("entry {i} has an empty span"));
            }
            if (e.subtitle_start - cursor).abs() > TIME_TOLERANCE {
                return bad(format!("entry {i} starts at {} but the timeline is at {cursor}", e.subtitle_start));
            }
            if ((e.subtitle_end - e.subtitle_start) - e.duration()).abs() > TIME_TOLERANCE {
                return bad(format!("entry {i} subtitle span differs from its source span"));
            }
            cursor = e.subtitle_end;
        }
        if let Some(b) = &self.bgm {
            if b.kind != MediaKind::Audio {
                return bad(format!("bgm {b} is not an audio id"));
            }
        }
        Ok(())
    }
}

/// Segments per source video.
pub type SegmentMap<T> = HashMap<String, Vec<Segment<T>>>;

pub fn assemble_edl<T: Scalar>(
    plan: &PredictorPlan,
    bgm: Option<MediaId>,
    catalog: &Catalog<T>,
    segments: &SegmentMap<T>,
    strategy: Strategy,
) -> Result<EditDecisionList> {
    plan.validate()?;
    let mut entries = Vec::with_capacity(plan.selected.len());
    let mut source_durations = BTreeMap::new();
    let mut cursor = 0.0;
    for (clip_id, line) in plan.selected.iter().zip(&plan.script) {
        let source = MediaId::parse(MediaKind::Clip, clip_id)?;
        let (photo_id, start, duration) = decode_clip_id(clip_id)?;
        let ad = catalog.record(&photo_id).ok_or_else(|| Error::DanglingReference {
            key: clip_id.clone(),
            referrer: "predictor plan".into(),
        })?;
        source_durations.insert(photo_id.clone(), ad.video_duration);
        let (in_time, out_time) = match strategy {
            Strategy::ByFrame => (start as f64, (start + duration) as f64),
            Strategy::ByClip => {
                let seg = segments
                    .get(&photo_id)
                    .and_then(|segs| segs.iter().find(|s| s.contains_time(start as f64)))
                    .ok_or_else(|| {
                        Error::InsufficientData(format!("no continuity segment holds the start of clip {clip_id}"))
                    })?;
                (seg.start_time(), seg.end_time().min(ad.video_duration))
            }
        };
        let span = out_time - in_time;
        entries.push(EdlEntry {
            source,
            photo_id,
            in_time,
            out_time,
            script_line: line.clone(),
            subtitle_start: cursor,
            subtitle_end: cursor + span,
        });
        cursor += span;
    }
    let edl = EditDecisionList {
        entries,
        bgm,
        strategy,
        source_durations,
    };
    edl.validate()?;
    Ok(edl)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(photo: &str, start: u32, dur: u32, at: f64) -> EdlEntry {
        EdlEntry {
            source: MediaId::clip(photo, start, dur).unwrap(),
            photo_id: photo.into(),
            in_time: start as f64,
            out_time: (start + dur) as f64,
            script_line: "x".into(),
            subtitle_start: at,
            subtitle_end: at + dur as f64,
        }
    }

    fn edl(entries: Vec<EdlEntry>) -> EditDecisionList {
        EditDecisionList {
            entries,
            bgm: None,
            strategy: Strategy::ByFrame,
            source_durations: [("1".to_string(), 30.0)].into(),
        }
    }

    #[test]
    fn contiguous_list_is_valid() {
        edl(vec![entry("1", 0, 5, 0.0), entry("1", 10, 7, 5.0), entry("1", 20, 4, 12.0)])
            .validate()
            .unwrap();
    }

    #[test]
    fn gaps_overlaps_and_overruns_are_rejected() {
        assert!(edl(vec![entry("1", 0, 5, 0.0), entry("1", 10, 7, 6.0)]).validate().is_err());
        assert!(edl(vec![entry("1", 0, 5, 0.0), entry("1", 10, 7, 4.0)]).validate().is_err());
        assert!(edl(vec![entry("1", 0, 5, 1.0)]).validate().is_err());
        assert!(edl(vec![entry("1", 28, 5, 0.0)]).validate().is_err());
        let mut e = entry("1", 0, 5, 0.0);
        e.subtitle_end = 4.0;
        assert!(edl(vec![e]).validate().is_err());
        assert!(edl(vec![]).validate().is_err());
    }
}
