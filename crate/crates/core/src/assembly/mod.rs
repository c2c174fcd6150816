//! Continuity segmentation, the baseline predictor and edit assembly.

pub mod baseline;
pub mod edl;
pub mod pipeline;
pub mod render;
pub mod segment;

pub use baseline::{baseline_bgm, baseline_script, baseline_select, baseline_sort, PredictorPlan};
pub use edl::{assemble_edl, EditDecisionList, EdlEntry, SegmentMap, Strategy};
pub use pipeline::{candidate_pool, segment_video, EditMode, EditResult, Editor};
pub use render::{render_commands, srt_time, subtitles, RenderNames};
pub use segment::{segment_by_continuity, Segment, SegmentConfig};
