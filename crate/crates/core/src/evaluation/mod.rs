//! Native and judge-scored metrics.

pub mod judge;
pub mod metrics;
pub mod report;

pub use judge::{
    parse_score, parse_sq, Cassette, CassetteEntry, HttpTransport, Judge, JudgeRequest, JudgeResponse, ParseStatus,
    SqVerdict, TemplateId, Templates, Transport, WireRequest,
};
pub use metrics::{cra, csa, line_pairs, wcd, word_count, OrderingSample, RatioOutcome, ScriptPair, SelectionSample, WcdOutcome};
pub use report::{evaluate, EvalSet, JudgedMean, MetricReport, MusicItem, SampleCount, ScriptItem};
