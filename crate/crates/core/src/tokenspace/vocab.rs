use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::Modality;
use crate::error::{Error, Result};
use crate::quantizer::{CodeGroup, QuantizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marker {
    ClipBegin,
    ClipEnd,
    BgmBegin,
    BgmEnd,
    ProductBegin,
    ProductEnd,
}

impl Marker {
    pub const ALL: [Marker; 6] = [
        Marker::ClipBegin,
        Marker::ClipEnd,
        Marker::BgmBegin,
        Marker::BgmEnd,
        Marker::ProductBegin,
        Marker::ProductEnd,
    ];

    pub fn surface(self) -> &'static str {
        match self {
            Marker::ClipBegin => "<clip_begin>",
            Marker::ClipEnd => "<clip_end>",
            Marker::BgmBegin => "<bgm_begin>",
            Marker::BgmEnd => "<bgm_end>",
            Marker::ProductBegin => "<product_begin>",
            Marker::ProductEnd => "<product_end>",
        }
    }
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.surface())
    }
}

/// A special token: one code at one level of one modality, or a marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Code {
        modality: Modality,
        level: usize,
        code: usize,
    },
    Marker(Marker),
}

/// Layout of the multimodal special tokens: the video block (level-major),
/// then the audio block, then the six markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub video_levels: usize,
    pub video_codes: usize,
    pub audio_levels: usize,
    pub audio_codes: usize,
}

impl Vocabulary {
    pub fn new(video: &QuantizerConfig, audio: &QuantizerConfig) -> Self {
        Vocabulary {
            video_levels: video.levels,
            video_codes: video.codebook_size,
            audio_levels: audio.levels,
            audio_codes: audio.codebook_size,
        }
    }

    fn block(&self, modality: Modality) -> (usize, usize, usize) {
        match modality {
            Modality::Video => (0, self.video_levels, self.video_codes),
            Modality::Audio => (
                self.video_levels * self.video_codes,
                self.audio_levels,
                self.audio_codes,
            ),
        }
    }

    pub fn levels(&self, modality: Modality) -> usize {
        self.block(modality).1
    }

    pub fn codes(&self, modality: Modality) -> usize {
        self.block(modality).2
    }

    fn marker_base(&self) -> usize {
        self.video_levels * self.video_codes + self.audio_levels * self.audio_codes
    }

    /// Number of special tokens, markers included.
    pub fn len(&self) -> usize {
        self.marker_base() + Marker::ALL.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn token_of(&self, modality: Modality, level: usize, code: usize) -> Result<usize> {
        let (base, levels, k) = self.block(modality);
        if level >= levels {
            return Err(Error::out_of_range("token level", level, &format!("0..{levels}")));
        }
        if code >= k {
            return Err(Error::out_of_range("token code", code, &format!("0..{k}")));
        }
        Ok(base + level * k + code)
    }

    pub fn marker_id(&self, marker: Marker) -> usize {
        self.marker_base() + Marker::ALL.iter().position(|&m| m == marker).expect("known marker")
    }

    pub fn parse(&self, id: usize) -> Result<Token> {
        let audio_base = self.video_levels * self.video_codes;
        let marker_base = self.marker_base();
        if id < audio_base {
            Ok(Token::Code {
                modality: Modality::Video,
                level: id / self.video_codes,
                code: id % self.video_codes,
            })
        } else if id < marker_base {
            let off = id - audio_base;
            Ok(Token::Code {
                modality: Modality::Audio,
                level: off / self.audio_codes,
                code: off % self.audio_codes,
            })
        } else if id < self.len() {
            Ok(Token::Marker(Marker::ALL[id - marker_base]))
        } else {
            Err(Error::out_of_range("token id", id, &format!("0..{}", self.len())))
        }
    }

    pub fn surface(&self, id: usize) -> Result<String> {
        Ok(match self.parse(id)? {
            Token::Code {
                modality,
                level,
                code,
            } => code_surface(modality, level, code),
            Token::Marker(m) => m.surface().to_string(),
        })
    }

    /// Inverse of [`Vocabulary::surface`].
    pub fn parse_surface(&self, text: &str) -> Result<usize> {
        if let Some(m) = Marker::ALL.iter().find(|m| m.surface() == text) {
            return Ok(self.marker_id(*m));
        }
        let bad = || Error::Format(format!("not a special token: {text}"));
        let inner = text
            .strip_prefix('<')
            .and_then(|t| t.strip_suffix('>'))
            .ok_or_else(bad)?;
        let mut parts = inner.split('_');
        let modality = match parts.next() {
            Some("v") => Modality::Video,
            Some("a") => Modality::Audio,
            _ => return Err(bad()),
        };
        let num = |p: Option<&str>| -> Result<usize> {
            let p = p.ok_or_else(bad)?;
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) || (p.len() > 1 && p.starts_with('0')) {
                return Err(bad());
            }
            p.parse().map_err(|_| bad())
        };
        let level = num(parts.next())?;
        let code = num(parts.next())?;
        if parts.next().is_some() {
            return Err(bad());
        }
        self.token_of(modality, level, code)
    }

    /// Token ids of a code group, level 0 first.
    pub fn group_tokens(&self, group: &CodeGroup) -> Result<Vec<usize>> {
        if group.codes.len() != self.levels(group.modality) {
            return Err(Error::InvalidInput(format!(
                "code group has {} levels, vocabulary expects {}",
                group.codes.len(),
                self.levels(group.modality)
            )));
        }
        group
            .codes
            .iter()
            .enumerate()
            .map(|(l, &c)| self.token_of(group.modality, l, c as usize))
            .collect()
    }

    /// Surface text of a code group.
    pub fn render_group(&self, group: &CodeGroup) -> Result<String> {
        self.group_tokens(group)?;
        let mut out = String::new();
        for (l, &c) in group.codes.iter().enumerate() {
            out.push_str(&code_surface(group.modality, l, c as usize));
        }
        Ok(out)
    }
}

fn code_surface(modality: Modality, level: usize, code: usize) -> String {
    let tag = match modality {
        Modality::Video => 'v',
        Modality::Audio => 'a',
    };
    format!("<{tag}_{level}_{code}>")
}
