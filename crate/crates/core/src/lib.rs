//! Hybrid lexical/semantic retrieval over a corpus of regulatory findings.
//!
//! The crate covers the whole offline/online path:
//!
//! - [`corpus`]: findings, measures and JSONL IO
//! - [`synth`]: a clustered synthetic corpus with labels and embeddings
//! - [`tokenizer`]: CRR-aware lexical pipeline with phrase merging and df pruning
//! - [`lexical`]: TF-IDF, BM25, BM25+ and BM25L scoring over an inverted index
//! - [`dense`]: embedding storage and cosine similarity matrices
//! - [`crr`]: article references, the article tree, and the fuzzy prefilter
//! - [`retriever`]: scoring, fusion and top-k ranking
//! - [`eval`]: MAP/MRR, down-sampled Monte-Carlo validation, and the bound simulation
//! - [`cli`]: the `findings-ir` command-line front end

pub mod cli;
pub mod corpus;
pub mod crr;
pub mod dense;
pub mod error;
pub mod eval;
pub mod lexical;
pub mod retriever;
pub mod rng;
pub mod synth;
pub mod tokenizer;

pub use error::{Error, Result};
