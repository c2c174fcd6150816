//! Subtitle and media-tool command emission for an edit decision list.
//!
//! The command list follows the ffmpeg idiom: one trim per entry, a concat
//! filter, then subtitle burn-in with the music mixed over a silent
//! placeholder lane where the voice-over would go.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::edl::EditDecisionList;
use crate::error::{Error, Result};

/// `HH:MM:SS,mmm`, rounded to the millisecond.
pub fn srt_time(seconds: f64) -> String {
    let ms = (seconds.max(0.0) * 1000.0).round() as u64;
    format!(
        "{:02}:{:02}:{:02},{:03}",
        ms / 3_600_000,
        (ms / 60_000) % 60,
        (ms / 1000) % 60,
        ms % 1000
    )
}

/// One cue per entry, numbered from 1.
pub fn subtitles(edl: &EditDecisionList) -> String {
    let mut out = String::new();
    for (i, e) in edl.entries.iter().enumerate() {
        let text = e.script_line.replace(['\r', '\n'], " ");
        let _ = write!(
            out,
            "{}\n{} --> {}\n{}\n\n",
            i + 1,
            srt_time(e.subtitle_start),
            srt_time(e.subtitle_end),
            text.trim()
        );
    }
    out
}

fn quote(path: &str) -> String {
    format!("\"{}\"", path.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Names of the files the render commands produce and consume.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderNames {
    pub subtitles: String,
    pub output: String,
}

impl Default for RenderNames {
    fn default() -> Self {
        RenderNames {
            subtitles: "subtitles.srt".into(),
            output: "output.mp4".into(),
        }
    }
}

/// `media_paths` maps source photo ids and the bgm id to media files.
pub fn render_commands(
    edl: &EditDecisionList,
    media_paths: &BTreeMap<String, String>,
    names: &RenderNames,
) -> Result<String> {
    let path_of = |id: &str| {
        media_paths
            .get(id)
            .ok_or_else(|| Error::DanglingReference { key: id.to_string(), referrer: "media path map".into() })
    };
    let mut out = String::new();
    let n = edl.entries.len();
    for (i, e) in edl.entries.iter().enumerate() {
        let _ = writeln!(
            out,
            "ffmpeg -y -ss {:.3} -to {:.3} -i {} -an -c:v libx264 -r 25 part_{i:03}.mp4",
            e.in_time,
            e.out_time,
            quote(path_of(&e.photo_id)?)
        );
    }
    let inputs: String = (0..n).map(|i| format!(" -i part_{i:03}.mp4")).collect();
    let streams: String = (0..n).map(|i| format!("[{i}:v]")).collect();
    let _ = writeln!(
        out,
        "ffmpeg -y{inputs} -filter_complex \"{streams}concat=n={n}:v=1:a=0[v]\" -map \"[v]\" joined.mp4"
    );
    let total = edl.total_duration();
    match &edl.bgm {
        Some(bgm) => {
            let _ = writeln!(
                out,
                "ffmpeg -y -i joined.mp4 -i {} -f lavfi -t {total:.3} -i anullsrc=r=48000:cl=stereo -filter_complex \"[0:v]subtitles={}[v];[1:a][2:a]amix=inputs=2:duration=longest[a]\" -map \"[v]\" -map \"[a]\" -t {total:.3} {}",
                quote(path_of(bgm.as_str())?),
                names.subtitles,
                names.output
            );
        }
        None => {
            let _ = writeln!(
                out,
                "ffmpeg -y -i joined.mp4 -f lavfi -t {total:.3} -i anullsrc=r=48000:cl=stereo -filter_complex \"[0:v]subtitles={}[v]\" -map \"[v]\" -map 1:a -t {total:.3} {}",
                names.subtitles, names.output
            );
        }
    }
    Ok(out)
}
