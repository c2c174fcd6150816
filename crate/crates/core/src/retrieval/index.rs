//! Cosine nearest-neighbour index: exact flat scan with an optional coarse
//! k-means partition. Flat mode is the ground truth; probing every list in
//! partitioned mode returns identical hits.

use std::cmp::Ordering;
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::media_id::{MediaId, MediaKind};
use crate::catalog::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::quantizer::kmeans::{assign, kmeans};
use crate::scalar::Scalar;
use crate::vecmath::{check_dim, dot, normalized, sq_dist};

const MAGIC: &[u8; 4] = b"ACIX";
const FORMAT_VERSION: u32 = 1;
const PARTITION_KMEANS_ITERS: usize = 25;
pub const DEFAULT_N_PROBE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum IndexMode {
    Flat,
    /// `n_lists = None` picks `ceil(sqrt(rows))`.
    Partitioned { n_lists: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
struct Partition<T> {
    /// `n_lists x dim`.
    centroids: Vec<T>,
    lists: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex<T> {
    kind: MediaKind,
    dim: usize,
    keys: Vec<MediaId>,
    /// Unit-norm rows, row-major.
    data: Vec<T>,
    partition: Option<Partition<T>>,
    n_probe: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: MediaId,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub hits: Vec<Hit>,
    /// Set when `k` exceeded the number of stored rows.
    pub truncated: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    kind: MediaKind,
    dim: usize,
    rows: usize,
    mode: String,
    n_lists: usize,
    n_probe: usize,
    width: u8,
    keys: Vec<String>,
}

/// Descending similarity, then ascending id text.
fn rank(a: &(f64, usize), b: &(f64, usize), keys: &[MediaId]) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| keys[a.1].text.cmp(&keys[b.1].text))
}

impl<T: Scalar> VectorIndex<T> {
    pub fn build(m: &EmbeddingMatrix<T>, kind: MediaKind, mode: IndexMode, seed: u64) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::InsufficientData("cannot index an empty matrix".into()));
        }
        let dim = m.dim();
        let mut data = Vec::with_capacity(m.rows() * dim);
        let mut keys = Vec::with_capacity(m.rows());
        for (key, row) in m.row_keys().iter().zip(m.iter_rows()) {
            let unit = normalized(row)
                .ok_or_else(|| Error::InvalidInput(format!("zero vector for key {key}")))?;
            data.extend(unit);
            keys.push(MediaId::parse(kind, key)?);
        }
        let mut index = VectorIndex {
            kind,
            dim,
            keys,
            data,
            partition: None,
            n_probe: DEFAULT_N_PROBE,
        };
        if let IndexMode::Partitioned { n_lists } = mode {
            let rows = index.rows();
            let n_lists = n_lists
                .unwrap_or_else(|| (rows as f64).sqrt().ceil() as usize)
                .clamp(1, rows);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let km = kmeans(&index.data, dim, n_lists, PARTITION_KMEANS_ITERS, &mut rng);
            let assignment = assign(&index.data, dim, &km.centroids);
            let mut lists = vec![Vec::new(); n_lists];
            for (row, &list) in assignment.iter().enumerate() {
                lists[list as usize].push(row as u32);
            }
            index.partition = Some(Partition {
                centroids: km.centroids,
                lists,
            });
        }
        Ok(index)
    }

    pub fn kind(&self) -> MediaKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.keys.len()
    }

    pub fn keys(&self) -> &[MediaId] {
        &self.keys
    }

    pub fn n_lists(&self) -> usize {
        self.partition.as_ref().map_or(0, |p| p.lists.len())
    }

    pub fn n_probe(&self) -> usize {
        self.n_probe
    }

    pub fn set_n_probe(&mut self, n_probe: usize) {
        self.n_probe = n_probe.max(1);
    }

    pub fn is_partitioned(&self) -> bool {
        self.partition.is_some()
    }

    fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn candidates(&self, q: &[T]) -> Vec<usize> {
        let Some(p) = &self.partition else {
            return (0..self.rows()).collect();
        };
        let n_lists = p.lists.len();
        let mut order: Vec<(T, usize)> = (0..n_lists)
            .map(|l| (sq_dist(q, &p.centroids[l * self.dim..(l + 1) * self.dim]), l))
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
        let mut rows: Vec<usize> = order
            .iter()
            .take(self.n_probe.min(n_lists))
            .flat_map(|&(_, l)| p.lists[l].iter().map(|&r| r as usize))
            .collect();
        rows.sort_unstable();
        rows
    }

    /// Top-`k` rows by cosine similarity to `x`.
    pub fn query(&self, x: &[T], k: usize) -> Result<QueryResult> {
        check_dim("index query", self.dim, x.len())?;
        if k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite query vector".into()));
        }
        let q = normalized(x).ok_or_else(|| Error::InvalidInput("zero query vector".into()))?;
        let mut scored: Vec<(f64, usize)> = self
            .candidates(&q)
            .into_iter()
            .map(|i| (dot(&q, self.row(i)).as_f64().clamp(-1.0, 1.0), i))
            .collect();
        let truncated = k > self.rows();
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, |a, b| rank(a, b, &self.keys));
            scored.truncate(k);
        }
        scored.sort_by(|a, b| rank(a, b, &self.keys));
        Ok(QueryResult {
            hits: scored
                .into_iter()
                .map(|(similarity, i)| Hit {
                    id: self.keys[i].clone(),
                    similarity,
                })
                .collect(),
            truncated,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            version: FORMAT_VERSION,
            kind: self.kind,
            dim: self.dim,
            rows: self.rows(),
            mode: if self.is_partitioned() { "partitioned" } else { "flat" }.into(),
            n_lists: self.n_lists(),
            n_probe: self.n_probe,
            width: T::WIDTH,
            keys: self.keys.iter().map(|k| k.text.clone()).collect(),
        };
        let header = serde_json::to_vec(&header)?;
        let io = |e: std::io::Error| Error::Format(format!("serialize index: {e}"));
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.write_u32::<LittleEndian>(header.len() as u32).map_err(io)?;
        out.write_all(&header).map_err(io)?;
        let put = |out: &mut Vec<u8>, v: T| match T::WIDTH {
            4 => out.write_f32::<LittleEndian>(v.as_f64() as f32),
            _ => out.write_f64::<LittleEndian>(v.as_f64()),
        };
        for &v in &self.data {
            put(&mut out, v).map_err(io)?;
        }
        if let Some(p) = &self.partition {
            for &v in &p.centroids {
                put(&mut out, v).map_err(io)?;
            }
            for list in &p.lists {
                out.write_u32::<LittleEndian>(list.len() as u32).map_err(io)?;
                for &r in list {
                    out.write_u32::<LittleEndian>(r).map_err(io)?;
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |e: std::io::Error| Error::Format(format!("index file: {e}"));
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic).map_err(fmt)?;
        if &magic != MAGIC {
            return Err(Error::Format("not an index file".into()));
        }
        let hlen = cur.read_u32::<LittleEndian>().map_err(fmt)? as usize;
        let mut hbytes = vec![0u8; hlen];
        cur.read_exact(&mut hbytes).map_err(fmt)?;
        let h: Header = serde_json::from_slice(&hbytes)?;
        if h.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported index version {}", h.version)));
        }
        if h.keys.len() != h.rows {
            return Err(Error::Format("index key count disagrees with header".into()));
        }
        let width = h.width;
        let take = |cur: &mut Cursor<&[u8]>, count: usize| -> Result<Vec<T>> {
            (0..count)
                .map(|_| match width {
                    4 => cur.read_f32::<LittleEndian>().map(|v| T::of(v as f64)),
                    8 => cur.read_f64::<LittleEndian>().map(T::of),
                    w => Err(std::io::Error::other(format!("bad width {w}"))),
                })
                .collect::<std::io::Result<Vec<T>>>()
                .map_err(fmt)
        };
        let data = take(&mut cur, h.rows * h.dim)?;
        let partition = if h.mode == "partitioned" {
            let centroids = take(&mut cur, h.n_lists * h.dim)?;
            let mut lists = Vec::with_capacity(h.n_lists);
            for _ in 0..h.n_lists {
                let len = cur.read_u32::<LittleEndian>().map_err(fmt)? as usize;
                let list = (0..len)
                    .map(|_| cur.read_u32::<LittleEndian>())
                    .collect::<std::io::Result<Vec<u32>>>()
                    .map_err(fmt)?;
                if list.iter().any(|&r| r as usize >= h.rows) {
                    return Err(Error::Format("index list refers past the last row".into()));
                }
                lists.push(list);
            }
            Some(Partition { centroids, lists })
        } else {
            None
        };
        let keys = h
            .keys
            .iter()
            .map(|k| MediaId::parse(h.kind, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorIndex {
            kind: h.kind,
            dim: h.dim,
            keys,
            data,
            partition,
            n_probe: h.n_probe.max(1),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// File name of a serialized index of the given kind.
pub fn index_file_name(kind: MediaKind) -> String {
    let tag = match kind {
        MediaKind::Frame => "frame",
        MediaKind::Clip => "clip",
        MediaKind::Audio => "audio",
    };
    format!("index.{tag}.bin")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Modality;

    fn frames(rows: &[(&str, Vec<f64>)]) -> EmbeddingMatrix<f64> {
        EmbeddingMatrix::from_rows(
            Modality::Video,
            rows[0].1.len(),
            rows.iter().map(|(k, v)| (k.to_string(), v.clone())),
        )
        .unwrap()
    }

    #[test]
    fn singleton_answers_every_query() {
        let idx = VectorIndex::build(&frames(&[("10000", vec![1.0, 2.0])]), MediaKind::Frame, IndexMode::Flat, 0)
            .unwrap();
        let r = idx.query(&[-3.0, 0.5], 1).unwrap();
        assert_eq!(r.hits[0].id.text, "10000");
        let r = idx.query(&[1.0, 0.0], 5).unwrap();
        assert!(r.truncated);
        assert_eq!(r.hits.len(), 1);
    }

    #[test]
    fn self_retrieval_and_tie_rule() {
        let idx = VectorIndex::build(
            &frames(&[
                ("20003", vec![0.0, 1.0]),
                ("10009", vec![0.0, 2.0]),
                ("10001", vec![1.0, 0.0]),
            ]),
            MediaKind::Frame,
            IndexMode::Flat,
            0,
        )
        .unwrap();
        let r = idx.query(&[1.0, 0.0], 1).unwrap();
        assert_eq!(r.hits[0].id.text, "10001");
        assert!((r.hits[0].similarity - 1.0).abs() < 1e-12);
        let r = idx.query(&[0.0, 5.0], 2).unwrap();
        assert_eq!(r.hits[0].id.text, "10009");
        assert_eq!(r.hits[1].id.text, "20003");
    }

    #[test]
    fn zero_rows_and_bad_queries_are_rejected() {
        let err = VectorIndex::build(
            &frames(&[("10000", vec![1.0, 0.0]), ("10001", vec![0.0, 0.0])]),
            MediaKind::Frame,
            IndexMode::Flat,
            0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("10001"));
        let idx = VectorIndex::build(&frames(&[("10000", vec![1.0, 0.0])]), MediaKind::Frame, IndexMode::Flat, 0)
            .unwrap();
        assert!(idx.query(&[1.0], 1).is_err());
        assert!(idx.query(&[1.0, 0.0], 0).is_err());
    }

    #[test]
    fn bytes_round_trip_both_modes() {
        let rows: Vec<(String, Vec<f64>)> = (0..30)
            .map(|i| (format!("5{:04}", i), vec![(i as f64).sin(), (i as f64).cos(), 0.3]))
            .collect();
        let m = EmbeddingMatrix::from_rows(Modality::Video, 3, rows).unwrap();
        for mode in [IndexMode::Flat, IndexMode::Partitioned { n_lists: None }] {
            let idx = VectorIndex::build(&m, MediaKind::Frame, mode, 3).unwrap();
            let back = VectorIndex::<f64>::from_bytes(&idx.to_bytes().unwrap()).unwrap();
            assert_eq!(back, idx);
        }
    }
}
