//! Embedding storage and cosine similarity.
//!
//! Vectors are held as `f64` even though the `EMB1` file carries `f32`.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";

/// One vector per finding id, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f64>,
    positions: HashMap<String, usize>,
    normalized: bool,
}

impl EmbeddingSet {
    pub fn new(dim: usize, ids: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if ids.len() != vectors.len() {
            return Err(emb_format(format!("{} ids for {} vectors", ids.len(), vectors.len())));
        }
        let mut data = Vec::with_capacity(dim * vectors.len());
        let mut positions = HashMap::with_capacity(ids.len());
        for (i, (id, v)) in ids.iter().zip(&vectors).enumerate() {
            if v.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(id.clone()));
            }
            if positions.insert(id.clone(), i).is_some() {
                return Err(emb_format(format!("duplicate id {id:?}")));
            }
            data.extend_from_slice(v);
        }
        Ok(EmbeddingSet {
            dim,
            ids,
            data,
            positions,
            normalized: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn vector(&self, pos: usize) -> &[f64] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.positions.get(id).map(|&p| self.vector(p))
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Reorders to `ids`, dropping any vectors not listed.
    pub fn select(&self, ids: &[String]) -> Result<EmbeddingSet> {
        let vectors = ids
            .iter()
            .map(|id| {
                self.get(id)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| Error::MissingEmbedding(id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = EmbeddingSet::new(self.dim, ids.to_vec(), vectors)?;
        out.normalized = self.normalized;
        Ok(out)
    }

    /// Divides every vector by its L2 norm.
    pub fn normalize(mut self) -> Result<EmbeddingSet> {
        let dim = self.dim;
        for (id, v) in self.ids.iter().zip(self.data.chunks_exact_mut(dim)) {
            let norm = l2_norm(v);
            if norm == 0.0 {
                return Err(Error::ZeroVector(id.clone()));
            }
            v.iter_mut().for_each(|x| *x /= norm);
        }
        self.normalized = true;
        Ok(self)
    }
}

fn emb_format(message: String) -> Error {
    Error::Format {
        kind: "embedding",
        message,
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine with explicit norm division; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let denom = l2_norm(a) * l2_norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}

#[derive(Deserialize, Serialize)]
struct JsonVector {
    id: String,
    vector: Vec<f64>,
}

/// Reads an `EMB1` file, or the JSONL fallback when the file starts with `{`.
/// Vectors keep file order.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.first() == Some(&b'{') {
        read_jsonl(path, &bytes)
    } else {
        decode_emb1(&bytes)
    }
}

/// Reads embeddings and aligns them to `expected_ids`; every expected id must
/// be present.
pub fn load_embeddings(path: &Path, expected_ids: &[String]) -> Result<EmbeddingSet> {
    read_embeddings(path)?.select(expected_ids)
}

fn read_jsonl(path: &Path, bytes: &[u8]) -> Result<EmbeddingSet> {
    let mut ids = Vec::new();
    let mut vectors = Vec::new();
    for (i, line) in BufReader::new(bytes).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonVector = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        ids.push(row.id);
        vectors.push(row.vector);
    }
    let dim = vectors.first().map_or(0, Vec::len);
    EmbeddingSet::new(dim, ids, vectors)
}

fn decode_emb1(bytes: &[u8]) -> Result<EmbeddingSet> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let end = pos + n;
        if end > bytes.len() {
            return Err(emb_format("truncated file".into()));
        }
        let out = &bytes[pos..end];
        pos = end;
        Ok(out)
    };
    if take(4)? != EMB1_MAGIC {
        return Err(emb_format("bad magic".into()));
    }
    let dim = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
    let count = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
    let mut ids = Vec::with_capacity(count.min(1 << 20));
    let mut vectors = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let len = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes")) as usize;
        let id = std::str::from_utf8(take(len)?)
            .map_err(|_| emb_format("invalid UTF-8 id".into()))?
            .to_string();
        let raw = take(dim * 4)?;
        let v = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        ids.push(id);
        vectors.push(v);
    }
    if pos != bytes.len() {
        return Err(emb_format("trailing bytes".into()));
    }
    EmbeddingSet::new(dim, ids, vectors)
}

pub fn encode_emb1(set: &EmbeddingSet) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(12 + set.len() * (set.dim * 4 + 8));
    buf.extend_from_slice(EMB1_MAGIC);
    buf.extend_from_slice(&(set.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(set.len() as u32).to_le_bytes());
    for (id, v) in set.ids.iter().zip(set.vectors()) {
        let len = u16::try_from(id.len()).map_err(|_| emb_format(format!("id too long: {id:?}")))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
        for &x in v {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn write_embeddings(path: &Path, set: &EmbeddingSet) -> Result<()> {
    fs::write(path, encode_emb1(set)?).map_err(|e| Error::io(path, e))
}

/// Dense row-major query × corpus score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    row_ids: Vec<String>,
    col_ids: Vec<String>,
}

impl SimilarityMatrix {
    pub fn from_rows(row_ids: Vec<String>, col_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Self {
        let cols = col_ids.len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged similarity rows");
        assert_eq!(row_ids.len(), rows.len(), "row id count");
        SimilarityMatrix {
            rows: rows.len(),
            cols,
            values: rows.concat(),
            row_ids,
            col_ids,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }
}

fn check_dims(queries: &EmbeddingSet, corpus: &EmbeddingSet) -> Result<()> {
    if queries.dim != corpus.dim {
        return Err(Error::DimMismatch {
            expected: corpus.dim,
            found: queries.dim,
        });
    }
    Ok(())
}

/// All query-vs-corpus dot products of two normalized sets.
pub fn cosine_matrix(queries: &EmbeddingSet, corpus: &EmbeddingSet) -> Result<SimilarityMatrix> {
    check_dims(queries, corpus)?;
    if !queries.normalized || !corpus.normalized {
        return Err(Error::Config("cosine_matrix needs normalized embeddings".into()));
    }
    let rows = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let qv = queries.vector(q);
            corpus.vectors().map(|cv| dot(qv, cv)).collect()
        })
        .collect();
    Ok(SimilarityMatrix::from_rows(
        queries.ids.clone(),
        corpus.ids.clone(),
        rows,
    ))
}

/// Pair-by-pair cosine on raw vectors, used as the reference path.
pub fn cosine_matrix_pairwise(queries: &EmbeddingSet, corpus: &EmbeddingSet) -> Result<SimilarityMatrix> {
    check_dims(queries, corpus)?;
    let rows = queries
        .vectors()
        .map(|qv| corpus.vectors().map(|cv| cosine(qv, cv)).collect())
        .collect();
    Ok(SimilarityMatrix::from_rows(
        queries.ids.clone(),
        corpus.ids.clone(),
        rows,
    ))
}

/// Checks that the set covers exactly the given ids, with no extras.
pub fn covers_exactly(set: &EmbeddingSet, ids: &[String]) -> bool {
    let have: HashSet<&str> = set.ids.iter().map(String::as_str).collect();
    set.len() == ids.len() && ids.iter().all(|id| have.contains(id.as_str()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[(&str, &[f64])]) -> EmbeddingSet {
        EmbeddingSet::new(
            rows[0].1.len(),
            rows.iter().map(|(id, _)| id.to_string()).collect(),
            rows.iter().map(|(_, v)| v.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn three_four_five() {
        let e = set(&[("A", &[3.0, 4.0])]).normalize().unwrap();
        assert_eq!(e.vector(0), &[0.6, 0.8]);
        assert!(e.is_normalized());
    }

    #[test]
    fn normalize_is_idempotent() {
        let e = set(&[("A", &[0.6, 0.8]), ("B", &[0.0, 1.0])]).normalize().unwrap();
        let again = e.clone().normalize().unwrap();
        for (a, b) in e.vectors().zip(again.vectors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_vector_named() {
        match set(&[("A", &[1.0, 0.0]), ("Z", &[0.0, 0.0])]).normalize() {
            Err(Error::ZeroVector(id)) => assert_eq!(id, "Z"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            EmbeddingSet::new(2, vec!["A".into()], vec![vec![1.0]]),
            Err(Error::DimMismatch { expected: 2, found: 1 })
        ));
        assert!(matches!(
            EmbeddingSet::new(1, vec!["A".into()], vec![vec![f64::NAN]]),
            Err(Error::NonFinite(_))
        ));
        let e = set(&[("A", &[1.0]), ("B", &[2.0])]);
        match e.select(&["A".into(), "F002".into()]) {
            Err(Error::MissingEmbedding(id)) => assert_eq!(id, "F002"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn self_and_orthogonal() {
        let e = set(&[("A", &[1.0, 0.0]), ("B", &[0.0, 1.0])]).normalize().unwrap();
        let m = cosine_matrix(&e, &e).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.col_ids(), e.ids());
    }

    #[test]
    fn unnormalized_input_rejected() {
        let e = set(&[("A", &[1.0, 2.0])]);
        assert!(cosine_matrix(&e, &e).is_err());
        let other = set(&[("B", &[1.0, 2.0, 3.0])]).normalize().unwrap();
        let e = e.normalize().unwrap();
        assert!(matches!(cosine_matrix(&e, &other), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn emb1_round_trip() {
        let e = set(&[
            ("F001", &[0.5, -0.25, 1.0, 2.0]),
            ("F002", &[1.0, 0.0, 0.0, 0.0]),
            ("F003", &[0.0, 0.0, 3.0, 0.125]),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.emb");
        write_embeddings(&path, &e).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"EMB1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        let back = load_embeddings(&path, &["F001".into(), "F002".into(), "F003".into()]).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.dim(), 4);
        assert!(!back.is_normalized());
    }

    #[test]
    fn emb1_rejects_trailing_and_truncated() {
        let e = set(&[("A", &[1.0, 2.0])]);
        let bytes = encode_emb1(&e).unwrap();
        assert!(decode_emb1(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes;
        extra.push(1);
        assert!(decode_emb1(&extra).is_err());
    }

    #[test]
    fn jsonl_fallback() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        fs::write(
            &path,
            "{\"id\":\"B\",\"vector\":[0,1]}\n{\"id\":\"A\",\"vector\":[1,0]}\n",
        )
        .unwrap();
        let e = load_embeddings(&path, &["A".into(), "B".into()]).unwrap();
        assert_eq!(e.ids(), &["A", "B"]);
        assert_eq!(e.vector(0), &[1.0, 0.0]);
        fs::write(
            &path,
            "{\"id\":\"B\",\"vector\":[0,1]}\n{\"id\":\"A\",\"vector\":[1]}\n",
        )
        .unwrap();
        assert!(matches!(read_embeddings(&path), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn coverage_check() {
        let e = set(&[("A", &[1.0]), ("B", &[2.0])]);
        assert!(covers_exactly(&e, &["B".into(), "A".into()]));
        assert!(!covers_exactly(&e, &["A".into()]));
    }
}
