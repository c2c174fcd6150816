//! Advertisement records, embeddings, ingestion and curation.

pub mod filter;
pub mod io;
pub mod stats;
pub mod types;

pub use filter::{
    dedup, dedup_key, engagement_percentile_filter, filter_records, filter_sft, FilterConfig,
    FilterReport, RelevanceRule,
};
pub use io::{load_catalog, save_catalog, LoadOptions, Manifest};
pub use stats::{dataset_stats, StatsReport};
pub use types::{
    audio_track_of, AdRecord, Catalog, ClipRecord, EmbeddingMatrix, Engagement, Modality,
    Polarity, ProductInfo,
};
