//! Digit-packed identifiers for frames, clips and audio tracks.
//!
//! A frame id is the source video's `photo_id` followed by a four digit frame
//! index. A clip id is the `photo_id` followed by a four digit start frame and
//! a three digit duration, both at one frame per second. Audio ids are opaque.
//! Ids stay strings so leading zeros in `photo_id` survive.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FRAME_SUFFIX: usize = 4;
pub const CLIP_SUFFIX: usize = 7;
pub const MAX_FRAME_INDEX: u32 = 9_999;
pub const MAX_CLIP_DURATION: u32 = 999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaKind {
    Frame,
    Clip,
    Audio,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MediaId {
    pub kind: MediaKind,
    pub text: String,
}

impl MediaId {
    pub fn frame(photo_id: &str, frame_index: u32) -> Result<Self> {
        Ok(MediaId {
            kind: MediaKind::Frame,
            text: encode_frame_id(photo_id, frame_index)?,
        })
    }

    pub fn clip(photo_id: &str, start: u32, duration: u32) -> Result<Self> {
        Ok(MediaId {
            kind: MediaKind::Clip,
            text: encode_clip_id(photo_id, start, duration)?,
        })
    }

    pub fn audio(text: impl Into<String>) -> Self {
        MediaId {
            kind: MediaKind::Audio,
            text: text.into(),
        }
    }

    /// Wraps an existing id string after validating it for `kind`.
    pub fn parse(kind: MediaKind, text: &str) -> Result<Self> {
        match kind {
            MediaKind::Frame => {
                decode_frame_id(text)?;
            }
            MediaKind::Clip => {
                decode_clip_id(text)?;
            }
            MediaKind::Audio => {
                if text.is_empty() {
                    return Err(malformed(text, "empty audio id"));
                }
            }
        }
        Ok(MediaId {
            kind,
            text: text.to_string(),
        })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for MediaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn malformed(id: &str, reason: &str) -> Error {
    Error::MalformedMediaId {
        id: id.to_string(),
        reason: reason.to_string(),
    }
}

pub fn validate_photo_id(photo_id: &str) -> Result<()> {
    if photo_id.is_empty() {
        return Err(malformed(photo_id, "empty photo_id"));
    }
    if !photo_id.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(photo_id, "photo_id must be decimal digits"));
    }
    Ok(())
}

pub fn encode_frame_id(photo_id: &str, frame_index: u32) -> Result<String> {
    validate_photo_id(photo_id)?;
    if frame_index > MAX_FRAME_INDEX {
        return Err(Error::out_of_range("frame index", frame_index, "0..=9999"));
    }
    Ok(format!("{photo_id}{frame_index:04}"))
}

pub fn encode_clip_id(photo_id: &str, start: u32, duration: u32) -> Result<String> {
    validate_photo_id(photo_id)?;
    if start > MAX_FRAME_INDEX {
        return Err(Error::out_of_range("clip start frame", start, "0..=9999"));
    }
    if duration == 0 || duration > MAX_CLIP_DURATION {
        return Err(Error::out_of_range("clip duration", duration, "1..=999"));
    }
    Ok(format!("{photo_id}{start:04}{duration:03}"))
}

fn split_suffix(id: &str, suffix: usize) -> Result<(&str, &str)> {
    if !id.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(id, "non-digit character"));
    }
    if id.len() <= suffix {
        return Err(malformed(
            id,
            &format!("needs more than {suffix} digits, found {}", id.len()),
        ));
    }
    Ok(id.split_at(id.len() - suffix))
}

/// Splits a frame id into `(photo_id, frame_index)`.
pub fn decode_frame_id(id: &str) -> Result<(String, u32)> {
    let (photo, frame) = split_suffix(id, FRAME_SUFFIX)?;
    let frame = frame.parse().map_err(|_| malformed(id, "bad frame digits"))?;
    Ok((photo.to_string(), frame))
}

/// Splits a clip id into `(photo_id, start_frame, duration)`.
pub fn decode_clip_id(id: &str) -> Result<(String, u32, u32)> {
    let (photo, tail) = split_suffix(id, CLIP_SUFFIX)?;
    let start = tail[..4].parse().map_err(|_| malformed(id, "bad start digits"))?;
    let duration: u32 = tail[4..]
        .parse()
        .map_err(|_| malformed(id, "bad duration digits"))?;
    if duration == 0 {
        return Err(malformed(id, "zero duration"));
    }
    Ok((photo.to_string(), start, duration))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frame_id_examples() {
        assert_eq!(encode_frame_id("123", 7).unwrap(), "1230007");
        assert!(matches!(
            encode_frame_id("123", 10_000),
            Err(Error::OutOfRange { .. })
        ));
        assert_eq!(decode_frame_id("1230007").unwrap(), ("123".to_string(), 7));
    }

    #[test]
    fn clip_id_examples() {
        assert_eq!(encode_clip_id("123", 45, 12).unwrap(), "1230045012");
        assert_eq!(encode_clip_id("9", 0, 1).unwrap(), "90000001");
        assert!(encode_clip_id("9", 0, 1000).is_err());
        assert!(encode_clip_id("9", 0, 0).is_err());
        assert_eq!(
            decode_clip_id("1230045012").unwrap(),
            ("123".to_string(), 45, 12)
        );
    }

    #[test]
    fn decode_errors() {
        assert!(matches!(
            decode_clip_id("12"),
            Err(Error::MalformedMediaId { .. })
        ));
        let err = decode_clip_id("12a0045012").unwrap_err();
        assert!(err.to_string().contains("non-digit"));
        assert!(decode_frame_id("1234").is_err());
        assert!(encode_frame_id("", 1).is_err());
        assert!(encode_frame_id("12x", 1).is_err());
    }

    #[test]
    fn leading_zero_photo_ids_survive() {
        let id = encode_clip_id("007", 3, 4).unwrap();
        assert_eq!(decode_clip_id(&id).unwrap(), ("007".to_string(), 3, 4));
    }

    proptest! {
        #[test]
        fn clip_round_trip(photo in "[0-9]{1,12}", start in 0u32..10_000, dur in 1u32..1000) {
            let id = encode_clip_id(&photo, start, dur).unwrap();
            prop_assert_eq!(decode_clip_id(&id).unwrap(), (photo, start, dur));
        }

        #[test]
        fn frame_round_trip(photo in "[0-9]{1,12}", frame in 0u32..10_000) {
            let id = encode_frame_id(&photo, frame).unwrap();
            prop_assert_eq!(decode_frame_id(&id).unwrap(), (photo, frame));
        }
    }
}
