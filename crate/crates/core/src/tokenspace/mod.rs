//! Shared multimodal vocabulary, alignment sequences and fine-tuning samples.

pub mod align;
pub mod grammar;
pub mod sft;
pub mod vocab;

pub use align::{serialize_alignment_sample, AlignOutcome, AlignmentSample, Tokenizer};
pub use grammar::{parse_alignment, validate_turns, ParsedAlignment, ParsedAnswer, SftTask};
pub use sft::{
    build_bgm_sample, build_script_sample, build_selection_sample, build_sft_corpus,
    build_sorting_sample, derive_seed, validate_sample, SftSample,
};
pub use vocab::{Marker, Token, Vocabulary};
