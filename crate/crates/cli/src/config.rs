//! Pipeline configuration: one TOML file, relative paths resolved against
//! the file's directory, sections overlaid on library defaults.

use std::path::{Path, PathBuf};

use autocut_core::assembly::{EditMode, SegmentConfig, Strategy};
use autocut_core::catalog::{FilterConfig, Modality};
use autocut_core::quantizer::{QuantizerConfig, QuantizerMode};
use autocut_core::retrieval::IndexMode;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPaths {
    catalog: Option<PathBuf>,
    out: Option<PathBuf>,
    models: Option<PathBuf>,
    indexes: Option<PathBuf>,
    eval_input: Option<PathBuf>,
    templates: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuantizers {
    video: Option<toml::Table>,
    audio: Option<toml::Table>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIndex {
    mode: Option<String>,
    n_lists: Option<usize>,
    n_probe: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JudgeSettings {
    /// Answer only from the cassette.
    pub replay: bool,
    pub cassette: Option<PathBuf>,
    pub timeout_secs: u64,
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl Default for JudgeSettings {
    fn default() -> Self {
        JudgeSettings {
            replay: true,
            cassette: None,
            timeout_secs: 60,
            attempts: 3,
            backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediaSettings {
    /// `{id}` is replaced by the source photo id.
    pub video_pattern: String,
    /// `{id}` is replaced by the music track id.
    pub audio_pattern: String,
}

impl Default for MediaSettings {
    fn default() -> Self {
        MediaSettings {
            video_pattern: "media/{id}.mp4".into(),
            audio_pattern: "music/{id}.mp3".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EditSettings {
    pub mode: EditMode,
    pub strategy: Strategy,
}

impl Default for EditSettings {
    fn default() -> Self {
        EditSettings {
            mode: EditMode::ScriptDriven,
            strategy: Strategy::ByFrame,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    #[serde(default)]
    paths: RawPaths,
    #[serde(default)]
    quantizer: RawQuantizers,
    #[serde(default)]
    index: RawIndex,
    segment: Option<toml::Table>,
    filter: Option<toml::Table>,
    #[serde(default)]
    judge: JudgeSettings,
    #[serde(default)]
    media: MediaSettings,
    #[serde(default)]
    edit: EditSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Paths {
    pub catalog: PathBuf,
    pub out: PathBuf,
    pub models: PathBuf,
    pub indexes: PathBuf,
    pub eval_input: Option<PathBuf>,
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub video_quantizer: QuantizerConfig,
    pub audio_quantizer: QuantizerConfig,
    pub index_mode: IndexMode,
    pub n_probe: Option<usize>,
    pub segment: SegmentConfig,
    pub filter: FilterConfig,
    pub judge: JudgeSettings,
    pub media: MediaSettings,
    pub edit: EditSettings,
}

/// Catalog frames are sampled at one per second, so segmentation defaults
/// to that rate with a two-frame minimum.
pub fn default_segment_config() -> SegmentConfig {
    SegmentConfig {
        fps: 1.0,
        min_len: 2,
        ..SegmentConfig::default()
    }
}

/// Applies `table` over the serialized `base`; unknown keys are errors.
fn overlay<T: Serialize + DeserializeOwned>(section: &str, base: T, table: Option<toml::Table>) -> Result<T, Failure> {
    let Some(table) = table else {
        return Ok(base);
    };
    let mut value = serde_json::to_value(&base).map_err(|e| Failure::config(format!("[{section}]: {e}")))?;
    let fields = value.as_object_mut().expect("config sections serialize to objects");
    for (key, v) in table {
        if !fields.contains_key(&key) {
            return Err(Failure::config(format!("[{section}]: unknown key `{key}`")));
        }
        let v = serde_json::to_value(v).map_err(|e| Failure::config(format!("[{section}] {key}: {e}")))?;
        fields.insert(key, v);
    }
    serde_json::from_value(value).map_err(|e| Failure::config(format!("[{section}]: {e}")))
}

fn quantizer(modality: Modality, table: Option<toml::Table>, seed: u64) -> Result<QuantizerConfig, Failure> {
    let section = format!("quantizer.{}", modality.as_str());
    let explicit_dim = table.as_ref().is_some_and(|t| t.contains_key("codebook_dim"));
    let explicit_seed = table.as_ref().is_some_and(|t| t.contains_key("seed"));
    let mut cfg = overlay(&section, QuantizerConfig::for_modality(modality), table)?;
    if cfg.mode == QuantizerMode::RawRvq && !explicit_dim {
        cfg.codebook_dim = cfg.input_dim;
    }
    if !explicit_seed {
        cfg.seed = seed;
    }
    if cfg.modality != modality {
        return Err(Failure::config(format!("[{section}]: modality must be {}", modality.as_str())));
    }
    Ok(cfg)
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, Failure> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Failure::config(format!("config: {e}")))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let seed = raw.seed.unwrap_or(0);
        let out = resolve(raw.paths.out.unwrap_or_else(|| "out".into()));
        let paths = Paths {
            catalog: resolve(raw.paths.catalog.ok_or_else(|| Failure::config("[paths] catalog is required"))?),
            models: raw.paths.models.map(resolve).unwrap_or_else(|| out.join("models")),
            indexes: raw.paths.indexes.map(resolve).unwrap_or_else(|| out.join("indexes")),
            eval_input: raw.paths.eval_input.map(resolve),
            templates: raw.paths.templates.map(resolve),
            out,
        };
        let index_mode = match raw.index.mode.as_deref().unwrap_or("flat") {
            "flat" => IndexMode::Flat,
            "partitioned" => IndexMode::Partitioned {
                n_lists: raw.index.n_lists,
            },
            other => return Err(Failure::config(format!("[index] unknown mode `{other}`"))),
        };
        let mut judge = raw.judge;
        judge.cassette = judge.cassette.map(resolve);
        let cfg = PipelineConfig {
            seed,
            paths,
            video_quantizer: quantizer(Modality::Video, raw.quantizer.video, seed)?,
            audio_quantizer: quantizer(Modality::Audio, raw.quantizer.audio, seed)?,
            index_mode,
            n_probe: raw.index.n_probe,
            segment: overlay("segment", default_segment_config(), raw.segment)?,
            filter: overlay("filter", FilterConfig::sft(), raw.filter)?,
            judge,
            media: raw.media,
            edit: raw.edit,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.video_quantizer.validate().map_err(Failure::from)?;
        self.audio_quantizer.validate().map_err(Failure::from)?;
        if !(self.segment.fps.is_finite() && self.segment.fps > 0.0) {
            return Err(Failure::config("[segment] fps must be positive"));
        }
        if self.segment.min_len == 0 {
            return Err(Failure::config("[segment] min_len must be at least 1"));
        }
        for (name, pattern) in [("video_pattern", &self.media.video_pattern), ("audio_pattern", &self.media.audio_pattern)] {
            if !pattern.contains("{id}") {
                return Err(Failure::config(format!("[media] {name} must contain {{id}}")));
            }
        }
        if self.n_probe == Some(0) {
            return Err(Failure::config("[index] n_probe must be at least 1"));
        }
        Ok(())
    }

    pub fn quantizer(&self, modality: Modality) -> &QuantizerConfig {
        match modality {
            Modality::Video => &self.video_quantizer,
            Modality::Audio => &self.audio_quantizer,
        }
    }


    pub fn model_path(&self, modality: Modality) -> PathBuf {
        self.paths.models.join(format!("quantizer.{}.bin", modality.as_str()))
    }
}
