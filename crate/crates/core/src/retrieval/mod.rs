//! Media id codec and nearest-neighbour grounding of token groups.

pub mod ground;
pub mod index;
pub mod media_id;

pub use ground::{ground_tokens, IndexSet};
pub use index::{index_file_name, Hit, IndexMode, QueryResult, VectorIndex};
pub use media_id::{
    decode_clip_id, decode_frame_id, encode_clip_id, encode_frame_id, MediaId, MediaKind,
};
