//! Down-sampling validation for partially labeled relevance data.
//!
//! Each repetition draws `m` findings uniformly without replacement from the
//! pool `D` (everything except the query and its identified relevant set
//! `Ĝ`), adds `Ĝ` back, ranks that small database and scores the ranking
//! against `Ĝ`. Unidentified relevant findings are rarely drawn when `m` is
//! small relative to `D`, so they seldom push `Ĝ` down the list.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{ap_by, rr_by};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::retriever::{Engine, RetrieverConfig, Scheme};
use crate::rng::{derived_rng, stable_hash};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Down-sample size.
    pub m: usize,
    /// Number of down-sampled databases.
    pub reps: usize,
    /// Metric cutoff.
    pub k: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            m: 100,
            reps: 1000,
            k: 100,
            seed: 0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.reps == 0 || self.k == 0 {
            return Err(Error::Config(format!(
                "m, reps and k must all be at least 1 (got {}, {}, {})",
                self.m, self.reps, self.k
            )));
        }
        Ok(())
    }
}

/// Orders a candidate set, best first.
pub trait Ranker: Sync {
    fn rank(&self, candidates: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize>;
}

impl<F> Ranker for F
where
    F: Fn(&[usize], &mut ChaCha8Rng) -> Vec<usize> + Sync,
{
    fn rank(&self, candidates: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
        self(candidates, rng)
    }
}

/// Across-repetition means and standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub map: f64,
    pub mrr: f64,
    pub map_std: f64,
    pub mrr_std: f64,
    pub reps: usize,
}

pub(crate) fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the down-sampling loop for one query.
///
/// `pool` is `D` and `identified` is `Ĝ`, both as item indices. `stream`
/// separates the random streams of different queries or runs; repetition
/// `r` always draws from the same stream whatever the thread schedule.
pub fn mc_validate_with<R: Ranker + ?Sized>(
    pool: &[usize],
    identified: &[usize],
    ranker: &R,
    mc: &McConfig,
    stream: u64,
) -> Result<McSummary> {
    mc.validate()?;
    if identified.is_empty() {
        return Err(Error::EmptyRelevant);
    }
    if mc.m > pool.len() {
        return Err(Error::SampleTooLarge {
            m: mc.m,
            available: pool.len(),
        });
    }
    let relevant: HashSet<usize> = identified.iter().copied().collect();
    let per_rep: Vec<(f64, f64)> = (0..mc.reps)
        .into_par_iter()
        .map(|rep| {
            let mut draw = derived_rng(mc.seed, stream, rep as u64, 0);
            let mut dbar: Vec<usize> = sample(&mut draw, pool.len(), mc.m)
                .into_iter()
                .map(|i| pool[i])
                .chain(identified.iter().copied())
                .collect();
            dbar.sort_unstable();
            let mut order_rng = derived_rng(mc.seed, stream, rep as u64, 1);
            let ranking = ranker.rank(&dbar, &mut order_rng);
            let is_rel = |x: &usize| relevant.contains(x);
            (
                ap_by(&ranking, relevant.len(), mc.k, is_rel),
                rr_by(&ranking, mc.k, is_rel),
            )
        })
        .collect();
    let aps: Vec<f64> = per_rep.iter().map(|p| p.0).collect();
    let rrs: Vec<f64> = per_rep.iter().map(|p| p.1).collect();
    let (map, map_std) = mean_and_std(&aps);
    let (mrr, mrr_std) = mean_and_std(&rrs);
    Ok(McSummary {
        map,
        mrr,
        map_std,
        mrr_std,
        reps: mc.reps,
    })
}

/// A test finding with the findings known to be similar to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledQuery {
    pub query_id: String,
    pub relevant_ids: Vec<String>,
}

impl LabeledQuery {
    /// Resolves ids to corpus positions: `(query, identified)`.
    pub fn resolve(&self, corpus: &Corpus) -> Result<(usize, Vec<usize>)> {
        let pos = |id: &str| corpus.position(id).ok_or_else(|| Error::UnknownId(id.to_string()));
        let q = pos(&self.query_id)?;
        if self.relevant_ids.is_empty() {
            return Err(Error::EmptyRelevant);
        }
        let mut rel = Vec::with_capacity(self.relevant_ids.len());
        for id in &self.relevant_ids {
            if id == &self.query_id {
                return Err(Error::Config(format!("query {id:?} lists itself as relevant")));
            }
            rel.push(pos(id)?);
        }
        rel.sort_unstable();
        rel.dedup();
        Ok((q, rel))
    }
}

pub fn load_labels(path: &Path) -> Result<Vec<LabeledQuery>> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    body.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_labels(path: &Path, labels: &[LabeledQuery]) -> Result<()> {
    crate::corpus::write_jsonl(path, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub query_id: String,
    pub n_identified: usize,
    #[serde(flatten)]
    pub summary: McSummary,
}

/// Aggregate over labeled queries for one scheme: per-query Monte-Carlo
/// means first, then the mean across queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: Scheme,
    pub prefilter: bool,
    pub mc: McConfig,
    pub map: f64,
    pub mrr: f64,
    pub avg_score: f64,
    pub queries: Vec<QueryReport>,
}

/// Down-sampling validation of `engine` under `cfg` for every labeled query.
///
/// The query finding is removed from its own candidate pool. Scores are
/// computed once per query; each repetition ranks its down-sampled database
/// (after the prefilter, if configured).
pub fn mc_validate(
    engine: &Engine,
    labels: &[LabeledQuery],
    cfg: &RetrieverConfig,
    mc: &McConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    mc.validate()?;
    if labels.is_empty() {
        return Err(Error::Config("no labeled queries".into()));
    }
    let corpus = engine.corpus();
    let queries: Vec<QueryReport> = labels
        .par_iter()
        .map(|lq| {
            let (q, identified) = lq.resolve(corpus)?;
            let excluded: HashSet<usize> = identified.iter().copied().chain([q]).collect();
            let pool: Vec<usize> = (0..corpus.len()).filter(|p| !excluded.contains(p)).collect();
            let scores = engine.score(corpus.get(q), None, cfg.scheme)?;
            let ranker = |cands: &[usize], rng: &mut ChaCha8Rng| engine.rank_positions(&scores, cands, cfg, rng);
            let summary = mc_validate_with(&pool, &identified, &ranker, mc, stable_hash(&lq.query_id))?;
            Ok(QueryReport {
                query_id: lq.query_id.clone(),
                n_identified: identified.len(),
                summary,
            })
        })
        .collect::<Result<_>>()?;
    let n = queries.len() as f64;
    let map = queries.iter().map(|q| q.summary.map).sum::<f64>() / n;
    let mrr = queries.iter().map(|q| q.summary.mrr).sum::<f64>() / n;
    Ok(EvalReport {
        scheme: cfg.scheme,
        prefilter: cfg.prefilter.is_some(),
        mc: *mc,
        map,
        mrr,
        avg_score: (map + mrr) / 2.0,
        queries,
    })
}

/// One row per report: `model,MAP@k,MRR@k,avg score`.
pub fn write_eval_csv(out: &mut impl Write, reports: &[EvalReport]) -> std::io::Result<()> {
    let k = reports.first().map_or(100, |r| r.mc.k);
    writeln!(out, "model,MAP@{k},MRR@{k},avg score")?;
    for r in reports {
        writeln!(out, "{},{:.4},{:.4},{:.4}", r.scheme.label(), r.map, r.mrr, r.avg_score)?;
    }
    Ok(())
}
