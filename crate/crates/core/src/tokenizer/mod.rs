//! Lexical tokenization pipeline.
//!
//! Stages, in order: CRR reference extraction, lowercasing and punctuation
//! splitting, stopword removal, dictionary lemmatization, collocation merging,
//! and document-frequency pruning. The first four stages are per-document;
//! the last two need corpus-wide statistics.

mod collocation;
mod crr_tokens;
mod lexicon;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use collocation::{detect_collocations, Collocations};
pub use crr_tokens::{extract_crr_tokens, is_crr_token};
pub use lexicon::Lexicon;

use crate::corpus::Corpus;
use crate::crr::CrrRef;
use crate::error::{Error, Result};

/// Tokenizer parameters.
///
/// `min_df`/`max_df` are fractions of documents; a token survives when
/// `min_df ≤ df/n ≤ max_df`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizerConfig {
    pub lexicon: Lexicon,
    pub min_df: f64,
    pub max_df: f64,
    pub ngram_max: usize,
    pub collocation_min_count: u64,
}

/// Numeric part of [`TokenizerConfig`], as persisted next to the artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenizerParams {
    pub min_df: f64,
    pub max_df: f64,
    pub ngram_max: usize,
    pub collocation_min_count: u64,
}

impl TokenizerConfig {
    /// Stopwords and lemmas only: no phrase merging, no df pruning.
    pub fn basic() -> Self {
        TokenizerConfig {
            lexicon: Lexicon::bundled(),
            min_df: 0.0,
            max_df: 1.0,
            ngram_max: 1,
            collocation_min_count: 5,
        }
    }

    /// Full pipeline: trigrams and df bounds 0.0005..0.9.
    pub fn full() -> Self {
        TokenizerConfig {
            lexicon: Lexicon::bundled(),
            min_df: 0.0005,
            max_df: 0.9,
            ngram_max: 3,
            collocation_min_count: 5,
        }
    }

    pub fn params(&self) -> TokenizerParams {
        TokenizerParams {
            min_df: self.min_df,
            max_df: self.max_df,
            ngram_max: self.ngram_max,
            collocation_min_count: self.collocation_min_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let TokenizerParams {
            min_df,
            max_df,
            ngram_max,
            collocation_min_count,
        } = self.params();
        if !(0.0..1.0).contains(&min_df) || !(0.0..=1.0).contains(&max_df) || min_df >= max_df {
            return Err(Error::Config(format!(
                "document-frequency bounds must satisfy 0 <= min_df < max_df <= 1 (got {min_df}, {max_df})"
            )));
        }
        if !(1..=3).contains(&ngram_max) {
            return Err(Error::Config(format!("ngram must be 1, 2 or 3 (got {ngram_max})")));
        }
        if collocation_min_count < 1 {
            return Err(Error::Config("collocation min count must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self::full()
    }
}

/// Lowercases, splits on punctuation, drops stopwords and pure numbers, and
/// lemmatizes. `CRR_*` tokens pass through untouched.
pub fn tokenize_base(text: &str, lexicon: &Lexicon) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let trimmed = chunk.trim_matches(|c: char| !(c.is_alphanumeric() || c == '_'));
        if is_crr_token(trimmed) {
            out.push(trimmed.to_string());
            continue;
        }
        let lowered: String = chunk
            .to_lowercase()
            .chars()
            .filter(|c| *c != '\'' && *c != '\u{2019}')
            .collect();
        for piece in lowered.split(|c: char| !c.is_alphanumeric()) {
            if piece.is_empty() || piece.chars().all(|c| c.is_numeric()) || lexicon.is_stopword(piece) {
                continue;
            }
            out.push(lexicon.lemma(piece).to_string());
        }
    }
    out
}

/// CRR extraction followed by [`tokenize_base`].
pub fn analyze(text: &str, lexicon: &Lexicon) -> (Vec<String>, Vec<CrrRef>) {
    let (rewritten, refs) = extract_crr_tokens(text);
    (tokenize_base(&rewritten, lexicon), refs)
}

/// Output of [`prune_by_df`].
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedDocs {
    pub docs: Vec<Vec<String>>,
    pub vocab: BTreeMap<String, u32>,
    pub df: BTreeMap<String, u32>,
}

fn document_frequencies(docs: &[Vec<String>]) -> BTreeMap<String, u32> {
    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    for doc in docs {
        let uniq: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
        for t in uniq {
            *df.entry(t.to_string()).or_default() += 1;
        }
    }
    df
}

fn vocab_of(df: &BTreeMap<String, u32>) -> BTreeMap<String, u32> {
    df.keys().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect()
}

/// Removes tokens whose document-frequency ratio lies outside
/// `[min_df, max_df]`.
pub fn prune_by_df(docs: &[Vec<String>], min_df: f64, max_df: f64) -> PrunedDocs {
    let n = docs.len() as f64;
    let mut df = document_frequencies(docs);
    df.retain(|_, count| {
        let ratio = f64::from(*count) / n;
        ratio >= min_df && ratio <= max_df
    });
    let docs = docs
        .iter()
        .map(|d| d.iter().filter(|t| df.contains_key(*t)).cloned().collect())
        .collect();
    PrunedDocs {
        docs,
        vocab: vocab_of(&df),
        df,
    }
}

/// Post-pipeline token lists and corpus statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedCorpus {
    pub ids: Vec<String>,
    pub docs: Vec<Vec<String>>,
    pub vocab: BTreeMap<String, u32>,
    pub df: BTreeMap<String, u32>,
    pub avgdl: f64,
    pub n_docs: usize,
    pub collocations: Collocations,
    pub params: TokenizerParams,
}

fn mean_length(docs: &[Vec<String>]) -> f64 {
    let total: usize = docs.iter().map(Vec::len).sum();
    total as f64 / docs.len() as f64
}

impl TokenizedCorpus {
    /// Wraps already-tokenized documents without running the pipeline.
    pub fn from_token_lists(ids: Vec<String>, docs: Vec<Vec<String>>) -> Result<Self> {
        if docs.is_empty() || ids.len() != docs.len() {
            return Err(Error::EmptyCorpus);
        }
        let df = document_frequencies(&docs);
        Ok(TokenizedCorpus {
            ids,
            vocab: vocab_of(&df),
            df,
            avgdl: mean_length(&docs),
            n_docs: docs.len(),
            docs,
            collocations: Collocations::default(),
            params: TokenizerConfig::basic().params(),
        })
    }

    /// Writes `tokens.jsonl`, `stats.json` and `collocations.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let rows: Vec<TokenRow> = self
            .ids
            .iter()
            .zip(&self.docs)
            .map(|(id, tokens)| TokenRow {
                id: id.clone(),
                tokens: tokens.clone(),
            })
            .collect();
        crate::corpus::write_jsonl(&dir.join("tokens.jsonl"), &rows)?;
        let stats = Stats {
            n_docs: self.n_docs,
            avgdl: self.avgdl,
            params: self.params,
            vocab: self.vocab.clone(),
            df: self.df.clone(),
        };
        write_json(&dir.join("stats.json"), &stats)?;
        write_json(&dir.join("collocations.json"), &self.collocations)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let stats: Stats = read_json(&dir.join("stats.json"))?;
        let collocations: Collocations = read_json(&dir.join("collocations.json"))?;
        let path = dir.join("tokens.jsonl");
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut ids = Vec::new();
        let mut docs = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            let row: TokenRow = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
            ids.push(row.id);
            docs.push(row.tokens);
        }
        Ok(TokenizedCorpus {
            ids,
            docs,
            vocab: stats.vocab,
            df: stats.df,
            avgdl: stats.avgdl,
            n_docs: stats.n_docs,
            collocations,
            params: stats.params,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TokenRow {
    id: String,
    tokens: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Stats {
    n_docs: usize,
    avgdl: f64,
    params: TokenizerParams,
    vocab: BTreeMap<String, u32>,
    df: BTreeMap<String, u32>,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value).expect("serializable value");
    fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&body).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Runs the full pipeline over a corpus.
pub fn build_tokenized_corpus(corpus: &Corpus, config: &TokenizerConfig) -> Result<TokenizedCorpus> {
    config.validate()?;
    let base: Vec<Vec<String>> = corpus
        .findings()
        .par_iter()
        .map(|f| analyze(&f.text, &config.lexicon).0)
        .collect();
    let (merged, collocations) = detect_collocations(&base, config.ngram_max, config.collocation_min_count);
    let pruned = prune_by_df(&merged, config.min_df, config.max_df);
    Ok(TokenizedCorpus {
        ids: corpus.ids().map(str::to_string).collect(),
        avgdl: mean_length(&pruned.docs),
        n_docs: pruned.docs.len(),
        docs: pruned.docs,
        vocab: pruned.vocab,
        df: pruned.df,
        collocations,
        params: config.params(),
    })
}

/// Frozen corpus-time artifacts applied to new text.
#[derive(Debug, Clone)]
pub struct QueryAnalyzer {
    lexicon: Lexicon,
    collocations: Collocations,
    vocab: HashSet<String>,
}

impl QueryAnalyzer {
    pub fn new(lexicon: Lexicon, collocations: Collocations, vocab: impl IntoIterator<Item = String>) -> Self {
        QueryAnalyzer {
            lexicon,
            collocations,
            vocab: vocab.into_iter().collect(),
        }
    }

    pub fn from_corpus(tc: &TokenizedCorpus, lexicon: Lexicon) -> Self {
        Self::new(lexicon, tc.collocations.clone(), tc.vocab.keys().cloned())
    }

    /// Tokens restricted to the corpus vocabulary, plus the CRR references
    /// found in the text.
    pub fn analyze(&self, text: &str) -> (Vec<String>, Vec<CrrRef>) {
        let (tokens, refs) = analyze(text, &self.lexicon);
        let merged = self.collocations.apply(&tokens);
        (merged.into_iter().filter(|t| self.vocab.contains(t)).collect(), refs)
    }
}
