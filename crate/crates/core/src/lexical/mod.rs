//! TF-IDF and BM25-family scoring over an inverted index.
//!
//! With `norm = 1 − b + b·|d|/avgdl` and `tf > 0`:
//!
//! ```text
//! BM25   idf · tf(k1+1) / (tf + k1·norm)
//! BM25+  idf · (tf(k1+1) / (tf + k1·norm) + δ)
//! BM25L  idf · (k1+1)(c+δ) / (k1+c+δ),   c = tf / norm
//! ```
//!
//! Absent terms contribute nothing for every variant. The BM25 family uses
//! `idf = ln((n − df + 0.5)/(df + 0.5) + 1)`; TF-IDF uses `idf = ln(n/df) + 1`
//! and scores by cosine between tf·idf vectors.

mod persist;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use persist::{read_index, write_index, LXIX_MAGIC, LXIX_VERSION};

use crate::dense::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::tokenizer::TokenizedCorpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Tfidf,
    Bm25,
    Bm25Plus,
    Bm25L,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Tfidf, Variant::Bm25, Variant::Bm25Plus, Variant::Bm25L];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Tfidf => "tfidf",
            Variant::Bm25 => "bm25",
            Variant::Bm25Plus => "bm25plus",
            Variant::Bm25L => "bm25l",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Variant::Tfidf => 0,
            Variant::Bm25 => 1,
            Variant::Bm25Plus => 2,
            Variant::Bm25L => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Variant::ALL.into_iter().find(|v| v.code() == code)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown lexical variant {s:?}")))
    }
}

/// Free parameters of the BM25 family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub delta: f64,
}

impl Bm25Params {
    /// k1 = 1.6, b = 0.75, and δ = 1 for BM25+, 0.5 for BM25L, 0 otherwise.
    pub fn for_variant(variant: Variant) -> Self {
        let delta = match variant {
            Variant::Bm25Plus => 1.0,
            Variant::Bm25L => 0.5,
            Variant::Tfidf | Variant::Bm25 => 0.0,
        };
        Bm25Params {
            k1: 1.6,
            b: 0.75,
            delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::Config(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("b must lie in [0,1], got {}", self.b)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be non-negative, got {}", self.delta)));
        }
        Ok(())
    }
}

/// `ln((n − df + 0.5)/(df + 0.5) + 1)`, always positive for `df ≤ n`.
pub fn bm25_idf(n_docs: usize, df: usize) -> f64 {
    let (n, df) = (n_docs as f64, df as f64);
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// `ln(n/df) + 1`.
pub fn tfidf_idf(n_docs: usize, df: usize) -> f64 {
    (n_docs as f64 / df as f64).ln() + 1.0
}

pub fn idf(variant: Variant, n_docs: usize, df: usize) -> f64 {
    match variant {
        Variant::Tfidf => tfidf_idf(n_docs, df),
        _ => bm25_idf(n_docs, df),
    }
}

fn length_norm(doc_len: f64, avgdl: f64, b: f64) -> f64 {
    1.0 - b + b * doc_len / avgdl
}

/// Per-term weight before multiplying by idf. Zero for `tf == 0`; for TF-IDF
/// this is the raw term frequency.
pub fn term_weight(variant: Variant, tf: f64, doc_len: f64, avgdl: f64, p: &Bm25Params) -> f64 {
    if tf <= 0.0 {
        return 0.0;
    }
    let norm = length_norm(doc_len, avgdl, p.b);
    let k1 = p.k1;
    match variant {
        Variant::Tfidf => tf,
        Variant::Bm25 => tf * (k1 + 1.0) / (tf + k1 * norm),
        Variant::Bm25Plus => tf * (k1 + 1.0) / (tf + k1 * norm) + p.delta,
        Variant::Bm25L => {
            let c = tf / norm + p.delta;
            (k1 + 1.0) * c / (k1 + c)
        }
    }
}

/// Inverted index with precomputed idf for one scoring variant.
#[derive(Debug, Clone, PartialEq)]
pub struct LexicalIndex {
    variant: Variant,
    params: Bm25Params,
    doc_ids: Vec<String>,
    doc_len: Vec<u32>,
    avgdl: f64,
    terms: Vec<String>,
    term_ids: HashMap<String, u32>,
    idf: Vec<f64>,
    postings: Vec<Vec<(u32, u32)>>,
    doc_norm: Vec<f64>,
}

impl LexicalIndex {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        variant: Variant,
        params: Bm25Params,
        doc_ids: Vec<String>,
        doc_len: Vec<u32>,
        avgdl: f64,
        terms: Vec<String>,
        idf: Vec<f64>,
        postings: Vec<Vec<(u32, u32)>>,
    ) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        params.validate()?;
        let term_ids = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let mut index = LexicalIndex {
            variant,
            params,
            doc_ids,
            doc_len,
            avgdl,
            terms,
            term_ids,
            idf,
            postings,
            doc_norm: Vec::new(),
        };
        if variant == Variant::Tfidf {
            index.doc_norm = index.tfidf_doc_norms();
        }
        Ok(index)
    }

    fn tfidf_doc_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.doc_ids.len()];
        for (term, plist) in self.postings.iter().enumerate() {
            let w = self.idf[term];
            for &(doc, tf) in plist {
                let x = f64::from(tf) * w;
                sq[doc as usize] += x * x;
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> &Bm25Params {
        &self.params
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_len(&self) -> &[u32] {
        &self.doc_len
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term_id(&self, token: &str) -> Option<u32> {
        self.term_ids.get(token).copied()
    }

    pub fn idf_of(&self, token: &str) -> Option<f64> {
        self.term_id(token).map(|t| self.idf[t as usize])
    }

    /// `(doc position, term frequency)` pairs for `token`, ascending by doc.
    pub fn postings_of(&self, token: &str) -> &[(u32, u32)] {
        self.term_id(token)
            .map_or(&[][..], |t| self.postings[t as usize].as_slice())
    }

    pub(crate) fn raw_postings(&self) -> &[Vec<(u32, u32)>] {
        &self.postings
    }

    pub(crate) fn raw_idf(&self) -> &[f64] {
        &self.idf
    }

    fn query_terms(&self, query_tokens: &[String]) -> BTreeMap<u32, u32> {
        let mut counts = BTreeMap::new();
        for t in query_tokens {
            if let Some(id) = self.term_id(t) {
                *counts.entry(id).or_insert(0u32) += 1;
            }
        }
        counts
    }

    /// Score of every document against the query. Out-of-vocabulary query
    /// tokens are ignored; repeated query tokens count once per occurrence.
    pub fn score_query(&self, query_tokens: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_docs()];
        let terms = self.query_terms(query_tokens);
        if terms.is_empty() {
            return scores;
        }
        match self.variant {
            Variant::Tfidf => {
                let mut q_norm_sq = 0.0;
                for (&term, &qtf) in &terms {
                    let w = self.idf[term as usize];
                    let qw = f64::from(qtf) * w;
                    q_norm_sq += qw * qw;
                    for &(doc, tf) in &self.postings[term as usize] {
                        scores[doc as usize] += qw * f64::from(tf) * w;
                    }
                }
                let q_norm = q_norm_sq.sqrt();
                for (s, &dn) in scores.iter_mut().zip(&self.doc_norm) {
                    *s = if dn > 0.0 && q_norm > 0.0 {
                        (*s / (q_norm * dn)).min(1.0)
                    } else {
                        0.0
                    };
                }
            }
            variant => {
                for (&term, &qtf) in &terms {
                    let w = self.idf[term as usize] * f64::from(qtf);
                    for &(doc, tf) in &self.postings[term as usize] {
                        let dl = f64::from(self.doc_len[doc as usize]);
                        scores[doc as usize] += w * term_weight(variant, f64::from(tf), dl, self.avgdl, &self.params);
                    }
                }
            }
        }
        scores
    }
}

/// Builds the inverted index for `variant` over a tokenized corpus.
pub fn build_lexical_index(tc: &TokenizedCorpus, variant: Variant, params: Bm25Params) -> Result<LexicalIndex> {
    if tc.n_docs == 0 {
        return Err(Error::EmptyCorpus);
    }
    if tc.vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut terms = vec![String::new(); tc.vocab.len()];
    for (t, &id) in &tc.vocab {
        terms[id as usize] = t.clone();
    }
    let mut postings: Vec<Vec<(u32, u32)>> = vec![Vec::new(); terms.len()];
    let mut doc_len = Vec::with_capacity(tc.n_docs);
    for (pos, doc) in tc.docs.iter().enumerate() {
        doc_len.push(doc.len() as u32);
        let mut tf: BTreeMap<u32, u32> = BTreeMap::new();
        for t in doc {
            let id = *tc.vocab.get(t).ok_or_else(|| Error::Format {
                kind: "tokenized corpus",
                message: format!("token {t:?} missing from vocabulary"),
            })?;
            *tf.entry(id).or_default() += 1;
        }
        for (id, count) in tf {
            postings[id as usize].push((pos as u32, count));
        }
    }
    let idf = postings
        .iter()
        .map(|p| idf(variant, tc.n_docs, p.len().max(1)))
        .collect();
    LexicalIndex::from_parts(variant, params, tc.ids.clone(), doc_len, tc.avgdl, terms, idf, postings)
}

/// Scales `row` to [0,1] by min-max; constant rows map to all zeros.
pub fn min_max_normalize(row: &[f64]) -> Vec<f64> {
    let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        return vec![0.0; row.len()];
    }
    row.iter().map(|&x| (x - lo) / range).collect()
}

/// Raw lexical scores alongside their per-row min-max normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct LexicalSimilarity {
    pub raw: SimilarityMatrix,
    pub normalized: SimilarityMatrix,
}

/// τ×n query-vs-corpus matrix for tokenized queries `(id, tokens)`.
pub fn similarity_matrix_lexical(index: &LexicalIndex, queries: &[(String, Vec<String>)]) -> LexicalSimilarity {
    let rows: Vec<Vec<f64>> = queries
        .par_iter()
        .map(|(_, tokens)| index.score_query(tokens))
        .collect();
    let normalized: Vec<Vec<f64>> = rows.iter().map(|r| min_max_normalize(r)).collect();
    let row_ids: Vec<String> = queries.iter().map(|(id, _)| id.clone()).collect();
    let col_ids = index.doc_ids().to_vec();
    LexicalSimilarity {
        raw: SimilarityMatrix::from_rows(row_ids.clone(), col_ids.clone(), rows),
        normalized: SimilarityMatrix::from_rows(row_ids, col_ids, normalized),
    }
}
