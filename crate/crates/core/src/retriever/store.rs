//! Index directory layout:
//!
//! ```text
//! manifest.json        format version, parameters, which artifacts exist
//! corpus.jsonl         findings in corpus order
//! measures.jsonl       optional
//! stopwords.txt        lexicon used at build time
//! lemmas.tsv
//! crr_tree.txt         one canonical reference per line
//! basic/ full/         tokenizer artifacts per pipeline
//! <scheme>.lxix        one lexical index per available lexical scheme
//! embeddings.emb1      normalized corpus embeddings, optional
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Engine, EngineConfig, Scheme};
use crate::corpus::{load_corpus, load_measures, write_corpus, write_measures};
use crate::crr::CrrTree;
use crate::dense::{read_embeddings, write_embeddings};
use crate::error::{Error, Result};
use crate::lexical::{read_index, write_index};
use crate::tokenizer::{read_json, write_json, Lexicon, TokenizedCorpus, TokenizerConfig, TokenizerParams};

pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    n_docs: usize,
    k1: f64,
    b: f64,
    delta_plus: f64,
    delta_l: f64,
    basic: TokenizerParams,
    full: TokenizerParams,
    lexical: Vec<Scheme>,
    embedding_dim: Option<usize>,
    measures: bool,
}

fn tokenizer_config(params: TokenizerParams, lexicon: &Lexicon) -> TokenizerConfig {
    TokenizerConfig {
        lexicon: lexicon.clone(),
        min_df: params.min_df,
        max_df: params.max_df,
        ngram_max: params.ngram_max,
        collocation_min_count: params.collocation_min_count,
    }
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn required(dir: &Path, name: &str) -> Result<std::path::PathBuf> {
    let path = dir.join(name);
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact(path.display().to_string()))
    }
}

impl Engine {
    /// Writes every artifact into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_corpus(&self.corpus, &dir.join("corpus.jsonl"))?;
        if !self.measures.is_empty() {
            write_measures(&self.measures, &dir.join("measures.jsonl"))?;
        }
        let lexicon = &self.config.basic.lexicon;
        write_text(&dir.join("stopwords.txt"), &lexicon.stopwords_text())?;
        write_text(&dir.join("lemmas.tsv"), &lexicon.lemmas_text())?;
        write_text(&dir.join("crr_tree.txt"), &self.tree.to_text())?;
        self.basic.save(&dir.join("basic"))?;
        self.full.save(&dir.join("full"))?;
        for (scheme, idx) in &self.indexes {
            write_index(&dir.join(format!("{scheme}.lxix")), idx)?;
        }
        if let Some(emb) = &self.embeddings {
            write_embeddings(&dir.join("embeddings.emb1"), emb)?;
        }
        let manifest = Manifest {
            format_version: INDEX_FORMAT_VERSION,
            n_docs: self.corpus.len(),
            k1: self.config.k1,
            b: self.config.b,
            delta_plus: self.config.delta_plus,
            delta_l: self.config.delta_l,
            basic: self.config.basic.params(),
            full: self.config.full.params(),
            lexical: self.indexes.keys().copied().collect(),
            embedding_dim: self.embeddings.as_ref().map(|e| e.dim()),
            measures: !self.measures.is_empty(),
        };
        write_json(&dir.join("manifest.json"), &manifest)
    }

    /// Reads an index directory written by [`Engine::save`].
    pub fn load(dir: &Path) -> Result<Engine> {
        let manifest: Manifest = read_json(&required(dir, "manifest.json")?)?;
        if manifest.format_version != INDEX_FORMAT_VERSION {
            return Err(Error::Format {
                kind: "index manifest",
                message: format!("unsupported format version {}", manifest.format_version),
            });
        }
        let corpus = load_corpus(&required(dir, "corpus.jsonl")?)?;
        if corpus.len() != manifest.n_docs {
            return Err(Error::Format {
                kind: "index manifest",
                message: format!(
                    "manifest lists {} documents, corpus has {}",
                    manifest.n_docs,
                    corpus.len()
                ),
            });
        }
        let lexicon = Lexicon::from_files(&required(dir, "stopwords.txt")?, &required(dir, "lemmas.tsv")?)?;
        let config = EngineConfig {
            basic: tokenizer_config(manifest.basic, &lexicon),
            full: tokenizer_config(manifest.full, &lexicon),
            k1: manifest.k1,
            b: manifest.b,
            delta_plus: manifest.delta_plus,
            delta_l: manifest.delta_l,
        };
        let basic = TokenizedCorpus::load(&required(dir, "basic")?)?;
        let full = TokenizedCorpus::load(&required(dir, "full")?)?;
        let ids: Vec<String> = corpus.ids().map(str::to_string).collect();
        let mut indexes = BTreeMap::new();
        for scheme in manifest.lexical {
            let idx = read_index(&required(dir, &format!("{scheme}.lxix"))?)?;
            if idx.doc_ids() != ids.as_slice() {
                return Err(Error::Format {
                    kind: "lexical index",
                    message: format!("{scheme}.lxix does not match the corpus document order"),
                });
            }
            indexes.insert(scheme, idx);
        }
        let mut engine = Engine::assemble(corpus, config, basic, full, indexes);
        let mut tree = CrrTree::new();
        tree.extend_from_file(&required(dir, "crr_tree.txt")?)?;
        engine = engine.with_articles(&tree);
        if manifest.measures {
            engine = engine.with_measures(load_measures(&required(dir, "measures.jsonl")?)?)?;
        }
        if manifest.embedding_dim.is_some() {
            engine = engine.with_embeddings(read_embeddings(&required(dir, "embeddings.emb1")?)?)?;
        }
        Ok(engine)
    }
}
