//! On-disk catalog layout.
//!
//! A catalog directory holds `manifest.json`, a line-delimited JSON records
//! file, and per-modality embedding blobs (`*.f32`, little-endian row-major
//! 32-bit floats) with newline-delimited key files whose first line is
//! `dim=<n> rows=<m>`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::types::{AdRecord, Catalog, EmbeddingMatrix, Modality};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEntry {
    pub embeddings: String,
    pub keys: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub records: String,
    pub video: EmbeddingEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<EmbeddingEntry>,
}

impl Manifest {
    pub fn standard(video_dim: usize, audio_dim: Option<usize>) -> Self {
        Manifest {
            schema_version: SCHEMA_VERSION,
            records: "catalog.jsonl".into(),
            video: EmbeddingEntry {
                embeddings: "video.f32".into(),
                keys: "video.keys".into(),
                dim: video_dim,
            },
            audio: audio_dim.map(|dim| EmbeddingEntry {
                embeddings: "audio.f32".into(),
                keys: "audio.keys".into(),
                dim,
            }),
        }
    }
}

/// Dimensions the caller's quantizer configuration expects.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub video_dim: Option<usize>,
    pub audio_dim: Option<usize>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported catalog schema version {}",
            manifest.schema_version
        )));
    }
    Ok(manifest)
}

pub fn read_records(path: &Path) -> Result<Vec<AdRecord>> {
    let reader = BufReader::new(open(path)?);
    let mut records = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AdRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1)))?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_records(path: &Path, records: &[AdRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_keys_header(line: &str, path: &Path) -> Result<(usize, usize)> {
    let mut dim = None;
    let mut rows = None;
    for part in line.split_whitespace() {
        match part.split_once('=') {
            Some(("dim", v)) => dim = v.parse().ok(),
            Some(("rows", v)) => rows = v.parse().ok(),
            _ => {}
        }
    }
    match (dim, rows) {
        (Some(d), Some(r)) => Ok((d, r)),
        _ => Err(Error::Format(format!(
            "{}: header must read `dim=<n> rows=<m>`, got `{line}`",
            path.display()
        ))),
    }
}

pub fn read_embeddings<T: Scalar>(
    dir: &Path,
    entry: &EmbeddingEntry,
    modality: Modality,
    expected_dim: Option<usize>,
) -> Result<EmbeddingMatrix<T>> {
    let keys_path = dir.join(&entry.keys);
    let text = fs::read_to_string(&keys_path).map_err(|e| Error::io(&keys_path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty key file", keys_path.display())))?;
    let (dim, rows) = parse_keys_header(header, &keys_path)?;
    let keys: Vec<String> = lines.filter(|l| !l.is_empty()).map(str::to_string).collect();
    let what = format!("{} embeddings", modality.as_str());
    if dim != entry.dim {
        return Err(Error::DimensionMismatch {
            what: format!("{what} (manifest vs key header)"),
            expected: entry.dim,
            found: dim,
        });
    }
    if let Some(expected) = expected_dim {
        if dim != expected {
            return Err(Error::DimensionMismatch {
                what,
                expected,
                found: dim,
            });
        }
    }
    if keys.len() != rows {
        return Err(Error::Format(format!(
            "{}: header declares {rows} rows but lists {} keys",
            keys_path.display(),
            keys.len()
        )));
    }

    let blob_path = dir.join(&entry.embeddings);
    let mut reader = BufReader::new(open(&blob_path)?);
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(&blob_path, e))?;
    if bytes.len() != rows * dim * 4 {
        return Err(Error::Format(format!(
            "{}: expected {} bytes for {rows}x{dim} floats, found {}",
            blob_path.display(),
            rows * dim * 4,
            bytes.len()
        )));
    }
    let mut cursor = &bytes[..];
    let mut data = Vec::with_capacity(rows * dim);
    for _ in 0..rows * dim {
        let v = cursor
            .read_f32::<LittleEndian>()
            .map_err(|e| Error::io(&blob_path, e))?;
        data.push(T::of(v as f64));
    }
    EmbeddingMatrix::new(modality, dim, data, keys)
}

pub fn write_embeddings<T: Scalar>(
    dir: &Path,
    entry: &EmbeddingEntry,
    matrix: &EmbeddingMatrix<T>,
) -> Result<()> {
    let keys_path = dir.join(&entry.keys);
    let mut keys = format!("dim={} rows={}\n", matrix.dim(), matrix.rows());
    for k in matrix.row_keys() {
        keys.push_str(k);
        keys.push('\n');
    }
    fs::write(&keys_path, keys).map_err(|e| Error::io(&keys_path, e))?;

    let blob_path = dir.join(&entry.embeddings);
    let file = File::create(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    let mut w = BufWriter::new(file);
    for &v in matrix.data() {
        w.write_f32::<LittleEndian>(v.as_f64() as f32)
            .map_err(|e| Error::io(&blob_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&blob_path, e))
}

/// Loads and validates a catalog directory.
pub fn load_catalog<T: Scalar>(dir: &Path, options: LoadOptions) -> Result<Catalog<T>> {
    let manifest = read_manifest(dir)?;
    let records = read_records(&dir.join(&manifest.records))?;
    let video = read_embeddings(dir, &manifest.video, Modality::Video, options.video_dim)?;
    let audio = manifest
        .audio
        .as_ref()
        .map(|entry| read_embeddings(dir, entry, Modality::Audio, options.audio_dim))
        .transpose()?;
    Catalog::new(records, video, audio)
}

/// Writes a catalog in the standard layout; returns the manifest path.
pub fn save_catalog<T: Scalar>(catalog: &Catalog<T>, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest::standard(
        catalog.video.dim(),
        catalog.audio.as_ref().map(|a| a.dim()),
    );
    write_records(&dir.join(&manifest.records), &catalog.records)?;
    write_embeddings(dir, &manifest.video, &catalog.video)?;
    if let (Some(entry), Some(audio)) = (&manifest.audio, &catalog.audio) {
        write_embeddings(dir, entry, audio)?;
    }
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
