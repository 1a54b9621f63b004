//! Prefilter, score, fuse and rank.

mod store;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Finding, Measure};
use crate::crr::{prefilter_within, CrrProfile, CrrTree, PrefilterConfig};
use crate::dense::{dot, l2_norm, EmbeddingSet};
use crate::error::{Error, Result};
use crate::lexical::{build_lexical_index, min_max_normalize, Bm25Params, LexicalIndex, Variant};
use crate::rng::{derived_rng, stable_hash};
use crate::tokenizer::{build_tokenized_corpus, Lexicon, QueryAnalyzer, TokenizedCorpus, TokenizerConfig};

pub use store::INDEX_FORMAT_VERSION;

/// Retrieval scheme.
///
/// `Bm25LPlus` is BM25L over the full tokenizer pipeline; the other lexical
/// schemes use the basic pipeline. `Hybrid` fuses `Bm25LPlus` with `Dense`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Random,
    Tfidf,
    Bm25,
    Bm25Plus,
    Bm25L,
    Bm25LPlus,
    Dense,
    Hybrid,
}

/// Which tokenizer configuration a lexical scheme runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Basic,
    Full,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::Random,
        Scheme::Tfidf,
        Scheme::Bm25,
        Scheme::Bm25Plus,
        Scheme::Bm25L,
        Scheme::Bm25LPlus,
        Scheme::Dense,
        Scheme::Hybrid,
    ];

    pub const LEXICAL: [Scheme; 5] = [
        Scheme::Tfidf,
        Scheme::Bm25,
        Scheme::Bm25Plus,
        Scheme::Bm25L,
        Scheme::Bm25LPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Random => "random",
            Scheme::Tfidf => "tfidf",
            Scheme::Bm25 => "bm25",
            Scheme::Bm25Plus => "bm25plus",
            Scheme::Bm25L => "bm25l",
            Scheme::Bm25LPlus => "bm25lplus",
            Scheme::Dense => "dense",
            Scheme::Hybrid => "hybrid",
        }
    }

    /// Row label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Random => "Random",
            Scheme::Tfidf => "TF-IDF",
            Scheme::Bm25 => "BM25",
            Scheme::Bm25Plus => "BM25+",
            Scheme::Bm25L => "BM25L",
            Scheme::Bm25LPlus => "BM25L+",
            Scheme::Dense => "Dense",
            Scheme::Hybrid => "Hybrid",
        }
    }

    /// Lexical index scheme this one reads, if any.
    pub fn lexical_source(self) -> Option<Scheme> {
        match self {
            Scheme::Tfidf | Scheme::Bm25 | Scheme::Bm25Plus | Scheme::Bm25L | Scheme::Bm25LPlus => Some(self),
            Scheme::Hybrid => Some(Scheme::Bm25LPlus),
            Scheme::Random | Scheme::Dense => None,
        }
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(self, Scheme::Dense | Scheme::Hybrid)
    }

    fn variant_and_pipeline(self) -> Option<(Variant, Pipeline)> {
        match self {
            Scheme::Tfidf => Some((Variant::Tfidf, Pipeline::Basic)),
            Scheme::Bm25 => Some((Variant::Bm25, Pipeline::Basic)),
            Scheme::Bm25Plus => Some((Variant::Bm25Plus, Pipeline::Basic)),
            Scheme::Bm25L => Some((Variant::Bm25L, Pipeline::Basic)),
            Scheme::Bm25LPlus => Some((Variant::Bm25L, Pipeline::Full)),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        let wanted = wanted.replace('+', "plus");
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == wanted)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }
}

/// Fusion weights for the lexical and dense rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridWeights {
    pub lexical: f64,
    pub dense: f64,
}

impl Default for HybridWeights {
    fn default() -> Self {
        HybridWeights {
            lexical: 0.5,
            dense: 0.5,
        }
    }
}

impl HybridWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lexical < 0.0 || self.dense < 0.0 || (self.lexical + self.dense - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "hybrid weights must be non-negative and sum to 1, got ({}, {})",
                self.lexical, self.dense
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieverConfig {
    pub scheme: Scheme,
    pub k: usize,
    pub prefilter: Option<PrefilterConfig>,
    pub weights: HybridWeights,
    pub seed: u64,
}

impl RetrieverConfig {
    pub fn new(scheme: Scheme, k: usize) -> Self {
        RetrieverConfig {
            scheme,
            k,
            prefilter: None,
            weights: HybridWeights::default(),
            seed: 0,
        }
    }

    pub fn with_prefilter(mut self, cfg: PrefilterConfig) -> Self {
        self.prefilter = Some(cfg);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.weights.validate()?;
        if let Some(pf) = &self.prefilter {
            pf.validate()?;
        }
        Ok(())
    }
}

/// Corpus-time settings for both tokenizer pipelines and the BM25 family.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub basic: TokenizerConfig,
    pub full: TokenizerConfig,
    pub k1: f64,
    pub b: f64,
    pub delta_plus: f64,
    pub delta_l: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            basic: TokenizerConfig::basic(),
            full: TokenizerConfig::full(),
            k1: 1.6,
            b: 0.75,
            delta_plus: 1.0,
            delta_l: 0.5,
        }
    }
}

impl EngineConfig {
    pub fn params(&self, variant: Variant) -> Bm25Params {
        let delta = match variant {
            Variant::Bm25Plus => self.delta_plus,
            Variant::Bm25L => self.delta_l,
            Variant::Tfidf | Variant::Bm25 => 0.0,
        };
        Bm25Params {
            k1: self.k1,
            b: self.b,
            delta,
        }
    }

    /// Uses `lexicon` for both pipelines.
    pub fn with_lexicon(mut self, lexicon: Lexicon) -> Self {
        self.basic.lexicon = lexicon.clone();
        self.full.lexicon = lexicon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.basic.validate()?;
        self.full.validate()?;
        for v in Variant::ALL {
            self.params(v).validate()?;
        }
        Ok(())
    }
}

/// One ranked finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub score: f64,
    /// Raw lexical score, or the min-max normalized one under `hybrid`.
    pub lexical_score: Option<f64>,
    pub dense_score: Option<f64>,
    pub measure_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub query_id: String,
    pub scheme: Scheme,
    pub k: usize,
    pub hits: Vec<Hit>,
}

/// Full-corpus score rows for one query, computed once and then ranked over
/// any candidate subset.
#[derive(Debug, Clone)]
pub struct QueryScores {
    pub query_id: String,
    pub scheme: Scheme,
    pub lexical: Option<Vec<f64>>,
    pub dense: Option<Vec<f64>>,
    pub profile: CrrProfile,
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    pos: usize,
    score: f64,
    lexical: Option<f64>,
    dense: Option<f64>,
}

/// Uniform random permutation of `candidates`: each gets an independent
/// uniform score, sorted descending.
pub fn random_order(candidates: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = candidates.iter().map(|&c| (rng.random::<f64>(), c)).collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, c)| c).collect()
}

/// Immutable retrieval state: corpus, tokenizer artifacts, lexical indexes,
/// embeddings and the CRR tree.
#[derive(Debug, Clone)]
pub struct Engine {
    corpus: Corpus,
    measures: Vec<Measure>,
    tree: CrrTree,
    profiles: Vec<CrrProfile>,
    config: EngineConfig,
    basic: TokenizedCorpus,
    full: TokenizedCorpus,
    basic_analyzer: QueryAnalyzer,
    full_analyzer: QueryAnalyzer,
    indexes: BTreeMap<Scheme, LexicalIndex>,
    embeddings: Option<EmbeddingSet>,
}

impl Engine {
    /// Tokenizes the corpus with both pipelines and builds every lexical
    /// index. A pipeline whose vocabulary ends up empty leaves its schemes
    /// unavailable instead of failing the build.
    pub fn build(corpus: Corpus, config: EngineConfig) -> Result<Engine> {
        config.validate()?;
        let basic = build_tokenized_corpus(&corpus, &config.basic)?;
        let full = build_tokenized_corpus(&corpus, &config.full)?;
        let mut indexes = BTreeMap::new();
        for scheme in Scheme::LEXICAL {
            let (variant, pipeline) = scheme.variant_and_pipeline().expect("lexical scheme");
            let tc = match pipeline {
                Pipeline::Basic => &basic,
                Pipeline::Full => &full,
            };
            match build_lexical_index(tc, variant, config.params(variant)) {
                Ok(idx) => {
                    indexes.insert(scheme, idx);
                }
                Err(Error::EmptyVocabulary) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(Self::assemble(corpus, config, basic, full, indexes))
    }

    fn assemble(
        corpus: Corpus,
        config: EngineConfig,
        basic: TokenizedCorpus,
        full: TokenizedCorpus,
        indexes: BTreeMap<Scheme, LexicalIndex>,
    ) -> Engine {
        let basic_analyzer = QueryAnalyzer::from_corpus(&basic, config.basic.lexicon.clone());
        let full_analyzer = QueryAnalyzer::from_corpus(&full, config.full.lexicon.clone());
        let profiles = corpus.findings().iter().map(|f| CrrProfile::new(&f.crr_refs)).collect();
        Engine {
            tree: CrrTree::from_corpus(&corpus),
            corpus,
            measures: Vec::new(),
            profiles,
            config,
            basic,
            full,
            basic_analyzer,
            full_analyzer,
            indexes,
            embeddings: None,
        }
    }

    /// Attaches embeddings for every corpus finding; they are aligned to
    /// corpus order and normalized.
    pub fn with_embeddings(mut self, set: EmbeddingSet) -> Result<Engine> {
        let ids: Vec<String> = self.corpus.ids().map(str::to_string).collect();
        self.embeddings = Some(set.select(&ids)?.normalize()?);
        Ok(self)
    }

    pub fn with_measures(mut self, measures: Vec<Measure>) -> Result<Engine> {
        self.corpus.validate_measures(&measures)?;
        self.measures = measures;
        Ok(self)
    }

    /// Adds the nodes of an articles list to the CRR tree.
    pub fn with_articles(mut self, tree: &CrrTree) -> Engine {
        for node in tree.nodes() {
            self.tree.insert(node);
        }
        self
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn measures(&self) -> &[Measure] {
        &self.measures
    }

    pub fn tree(&self) -> &CrrTree {
        &self.tree
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn embeddings(&self) -> Option<&EmbeddingSet> {
        self.embeddings.as_ref()
    }

    pub fn lexical_index(&self, scheme: Scheme) -> Option<&LexicalIndex> {
        scheme.lexical_source().and_then(|s| self.indexes.get(&s))
    }

    pub fn tokenized(&self, pipeline: Pipeline) -> &TokenizedCorpus {
        match pipeline {
            Pipeline::Basic => &self.basic,
            Pipeline::Full => &self.full,
        }
    }

    pub fn analyzer(&self, pipeline: Pipeline) -> &QueryAnalyzer {
        match pipeline {
            Pipeline::Basic => &self.basic_analyzer,
            Pipeline::Full => &self.full_analyzer,
        }
    }

    pub fn profile(&self, pos: usize) -> &CrrProfile {
        &self.profiles[pos]
    }

    /// Schemes whose artifacts are present.
    pub fn available_schemes(&self) -> Vec<Scheme> {
        Scheme::ALL
            .into_iter()
            .filter(|&s| self.check_scheme(s).is_ok())
            .collect()
    }

    fn check_scheme(&self, scheme: Scheme) -> Result<()> {
        if let Some(src) = scheme.lexical_source() {
            if !self.indexes.contains_key(&src) {
                return Err(Error::EmptyVocabulary);
            }
        }
        if scheme.needs_embeddings() && self.embeddings.is_none() {
            return Err(Error::MissingArtifact(format!(
                "scheme {scheme} needs embeddings; build the index with --embeddings"
            )));
        }
        Ok(())
    }

    /// Query profile from explicit references, or from references found in
    /// the text when the finding carries none.
    fn query_profile(&self, query: &Finding) -> CrrProfile {
        if query.crr_refs.is_empty() {
            let (_, refs) = crate::tokenizer::extract_crr_tokens(&query.text);
            CrrProfile::new(&refs.into_iter().collect())
        } else {
            CrrProfile::new(&query.crr_refs)
        }
    }

    fn dense_row(&self, query: &Finding, query_vec: Option<&[f64]>) -> Result<Vec<f64>> {
        let emb = self
            .embeddings
            .as_ref()
            .ok_or_else(|| Error::MissingArtifact("embeddings; build the index with --embeddings".into()))?;
        let raw = match query_vec {
            Some(v) => v,
            None => emb
                .get(&query.id)
                .ok_or_else(|| Error::MissingEmbedding(query.id.clone()))?,
        };
        if raw.len() != emb.dim() {
            return Err(Error::DimMismatch {
                expected: emb.dim(),
                found: raw.len(),
            });
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(query.id.clone()));
        }
        let norm = l2_norm(raw);
        if norm == 0.0 {
            return Err(Error::ZeroVector(query.id.clone()));
        }
        let q: Vec<f64> = raw.iter().map(|x| x / norm).collect();
        Ok(emb.vectors().map(|v| dot(&q, v)).collect())
    }

    /// Computes every score row `scheme` needs for `query`. Without an
    /// explicit `query_vec`, dense scoring looks the query id up among the
    /// corpus embeddings.
    pub fn score(&self, query: &Finding, query_vec: Option<&[f64]>, scheme: Scheme) -> Result<QueryScores> {
        self.check_scheme(scheme)?;
        let lexical = match scheme.lexical_source() {
            Some(src) => {
                let (_, pipeline) = src.variant_and_pipeline().expect("lexical scheme");
                let (tokens, _) = self.analyzer(pipeline).analyze(&query.text);
                Some(self.indexes[&src].score_query(&tokens))
            }
            None => None,
        };
        let dense = if scheme.needs_embeddings() {
            Some(self.dense_row(query, query_vec)?)
        } else {
            None
        };
        Ok(QueryScores {
            query_id: query.id.clone(),
            scheme,
            lexical,
            dense,
            profile: self.query_profile(query),
        })
    }

    /// Applies the prefilter (if any) to `candidates` and orders the
    /// survivors, best first, ties by ascending id.
    fn order(
        &self,
        scores: &QueryScores,
        candidates: &[usize],
        cfg: &RetrieverConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Scored> {
        let pool = match &cfg.prefilter {
            Some(pf) => prefilter_within(&scores.profile, &self.profiles, candidates, pf),
            None => candidates.to_vec(),
        };
        let mut scored: Vec<Scored> = match scores.scheme {
            Scheme::Random => pool
                .iter()
                .map(|&pos| Scored {
                    pos,
                    score: rng.random::<f64>(),
                    lexical: None,
                    dense: None,
                })
                .collect(),
            Scheme::Dense => {
                let row = scores.dense.as_ref().expect("dense row");
                pool.iter()
                    .map(|&pos| Scored {
                        pos,
                        score: row[pos],
                        lexical: None,
                        dense: Some(row[pos]),
                    })
                    .collect()
            }
            Scheme::Hybrid => {
                let lex = scores.lexical.as_ref().expect("lexical row");
                let den = scores.dense.as_ref().expect("dense row");
                let restricted: Vec<f64> = pool.iter().map(|&p| lex[p]).collect();
                let normalized = min_max_normalize(&restricted);
                pool.iter()
                    .zip(normalized)
                    .map(|(&pos, l)| Scored {
                        pos,
                        score: cfg.weights.lexical * l + cfg.weights.dense * den[pos],
                        lexical: Some(l),
                        dense: Some(den[pos]),
                    })
                    .collect()
            }
            _ => {
                let row = scores.lexical.as_ref().expect("lexical row");
                pool.iter()
                    .map(|&pos| Scored {
                        pos,
                        score: row[pos],
                        lexical: Some(row[pos]),
                        dense: None,
                    })
                    .collect()
            }
        };
        // corpus positions are sorted by id, so position order is id order
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.pos.cmp(&b.pos)));
        scored
    }

    /// Candidate positions ordered best first; used by the evaluation
    /// harness, which needs positions rather than hits.
    pub fn rank_positions(
        &self,
        scores: &QueryScores,
        candidates: &[usize],
        cfg: &RetrieverConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<usize> {
        self.order(scores, candidates, cfg, rng)
            .into_iter()
            .map(|s| s.pos)
            .collect()
    }

    fn to_result(&self, scores: &QueryScores, ordered: Vec<Scored>, cfg: &RetrieverConfig) -> RankedResult {
        let hits = ordered
            .into_iter()
            .take(cfg.k)
            .map(|s| {
                let f = self.corpus.get(s.pos);
                Hit {
                    id: f.id.clone(),
                    score: s.score,
                    lexical_score: s.lexical,
                    dense_score: s.dense,
                    measure_ids: f.measure_ids.iter().cloned().collect(),
                }
            })
            .collect();
        RankedResult {
            query_id: scores.query_id.clone(),
            scheme: scores.scheme,
            k: cfg.k,
            hits,
        }
    }

    fn query_rng(cfg: &RetrieverConfig, query_id: &str) -> ChaCha8Rng {
        derived_rng(cfg.seed, stable_hash(query_id), 0, 0)
    }

    /// Top-k findings for `query` restricted to `candidates`.
    pub fn retrieve_within(
        &self,
        query: &Finding,
        query_vec: Option<&[f64]>,
        candidates: &[usize],
        cfg: &RetrieverConfig,
    ) -> Result<RankedResult> {
        cfg.validate()?;
        if let Some(&bad) = candidates.iter().find(|&&c| c >= self.corpus.len()) {
            return Err(Error::Config(format!("candidate position {bad} out of range")));
        }
        let scores = self.score(query, query_vec, cfg.scheme)?;
        let mut rng = Self::query_rng(cfg, &query.id);
        let ordered = self.order(&scores, candidates, cfg, &mut rng);
        Ok(self.to_result(&scores, ordered, cfg))
    }

    /// Top-k findings for `query` over the whole corpus.
    pub fn retrieve(&self, query: &Finding, query_vec: Option<&[f64]>, cfg: &RetrieverConfig) -> Result<RankedResult> {
        let all: Vec<usize> = (0..self.corpus.len()).collect();
        self.retrieve_within(query, query_vec, &all, cfg)
    }

    /// [`Engine::retrieve`] over many queries, in parallel. Query vectors
    /// come from `query_vecs` when given, else from the corpus embeddings.
    pub fn retrieve_batch(
        &self,
        queries: &[Finding],
        query_vecs: Option<&EmbeddingSet>,
        cfg: &RetrieverConfig,
    ) -> Result<Vec<RankedResult>> {
        queries
            .par_iter()
            .map(|q| self.retrieve(q, query_vecs.and_then(|e| e.get(&q.id)), cfg))
            .collect()
    }

    /// Seeded uniform ranking of the whole corpus.
    pub fn random_ranker(&self, query: &Finding, k: usize, seed: u64) -> Result<RankedResult> {
        let cfg = RetrieverConfig {
            seed,
            ..RetrieverConfig::new(Scheme::Random, k)
        };
        self.retrieve(query, None, &cfg)
    }
}
