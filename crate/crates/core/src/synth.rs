//! Seeded synthetic findings with known similarity structure.
//!
//! Findings are split into balanced clusters. Members of a cluster share a
//! topic vocabulary and a CRR reference set, so cluster co-membership is a
//! ground truth for similarity. Pairs of clusters share the same reference
//! set, which keeps the CRR prefilter from being a perfect oracle. Lengths
//! are lognormal with median ≈ 248 words, about 85% below 512.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, StandardNormal};

use crate::corpus::{Corpus, Finding, Measure};
use crate::crr::CrrRef;
use crate::dense::EmbeddingSet;
use crate::error::{Error, Result};
use crate::eval::LabeledQuery;
use crate::rng::{derived_rng, stable_hash};
use crate::tokenizer::Lexicon;

const LENGTH_MU: f64 = 5.513;
const LENGTH_SIGMA: f64 = 0.7;
const MIN_WORDS: usize = 20;
const MAX_WORDS: usize = 4000;
const TOPIC_WORDS: usize = 25;
const SHARED_TOPIC_POOL_PER_CLUSTER: usize = 10;
const GENERATED_BACKGROUND: usize = 400;
const P_TOPIC: f64 = 0.06;
const P_STOP: f64 = 0.3;
const P_NOISE_REF: f64 = 0.3;
const P_REF_IN_TEXT: f64 = 0.5;

const BACKGROUND: &[&str] = &[
    "institution",
    "model",
    "risk",
    "capital",
    "exposure",
    "rating",
    "estimate",
    "validation",
    "default",
    "loss",
    "probability",
    "governance",
    "data",
    "quality",
    "process",
    "review",
    "documentation",
    "monitoring",
    "calibration",
    "segmentation",
    "collateral",
    "portfolio",
    "assessment",
    "framework",
    "requirement",
    "deficiency",
    "implementation",
    "approach",
    "methodology",
    "function",
    "control",
    "reporting",
    "management",
    "system",
    "assignment",
    "override",
    "backtesting",
    "parameter",
    "downturn",
    "margin",
    "conservatism",
    "facility",
    "obligor",
    "grade",
    "pool",
    "retail",
    "corporate",
    "application",
    "independent",
    "unit",
    "audit",
    "policy",
    "limit",
    "threshold",
    "treatment",
    "identification",
    "recovery",
    "cure",
];

const STOP: &[&str] = &[
    "the", "of", "and", "to", "in", "is", "shall", "by", "or", "on", "for", "that", "with", "as", "be", "not", "are",
    "which", "this", "its",
];

const ARTICLES: &[u32] = &[
    92, 143, 144, 145, 146, 169, 170, 171, 172, 173, 174, 175, 176, 177, 178, 179, 180, 181, 182, 183, 184, 185, 186,
    187, 188, 189, 190, 191,
];

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "st",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "l"];

/// A generated corpus plus the side information needed to evaluate on it.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub measures: Vec<Measure>,
    /// Cluster index per finding id.
    pub clusters: BTreeMap<String, usize>,
    pub cluster_count: usize,
}

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.random_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).expect("non-empty"));
        w.push_str(VOWELS.choose(rng).expect("non-empty"));
        w.push_str(CODAS.choose(rng).expect("non-empty"));
    }
    w
}

fn word_pool(rng: &mut ChaCha8Rng, count: usize, taken: &mut HashSet<String>, lexicon: &Lexicon) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let w = pseudo_word(rng);
        if lexicon.is_stopword(&w) || lexicon.lemma(&w) != w || !taken.insert(w.clone()) {
            continue;
        }
        out.push(w);
    }
    out
}

fn zipf(len: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=len).map(|r| 1.0 / r as f64)).expect("positive weights")
}

fn random_ref(rng: &mut ChaCha8Rng) -> CrrRef {
    let article = *ARTICLES.choose(rng).expect("non-empty");
    let mut parts = vec![rng.random_range(1..=4u32).to_string()];
    if rng.random_bool(0.5) {
        parts.push(char::from(b'a' + rng.random_range(0..8u8)).to_string());
    }
    CrrRef::new(article, parts).expect("well-formed reference")
}

fn reference_phrase(r: &CrrRef) -> String {
    let mut s = r.article().to_string();
    for p in r.path().iter().skip(1) {
        s.push('(');
        s.push_str(p);
        s.push(')');
    }
    format!("pursuant to Article {s} of Regulation (EU) No 575/2013")
}

fn sentences(words: Vec<String>, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < words.len() {
        let len = rng.random_range(8..=20).min(words.len() - i);
        for (j, w) in words[i..i + len].iter().enumerate() {
            if !out.is_empty() {
                out.push(' ');
            }
            if j == 0 {
                let mut c = w.chars();
                if let Some(first) = c.next() {
                    out.extend(first.to_uppercase());
                    out.push_str(c.as_str());
                }
            } else {
                out.push_str(w);
            }
        }
        out.push('.');
        i += len;
    }
    out
}

/// Generates `n` findings in `cluster_count` balanced clusters.
pub fn generate_synthetic(n: usize, seed: u64, cluster_count: usize) -> Result<SyntheticCorpus> {
    if cluster_count == 0 || n < cluster_count {
        return Err(Error::Config(format!(
            "need n >= cluster_count >= 1 (got n={n}, cluster_count={cluster_count})"
        )));
    }
    let mut rng = derived_rng(seed, stable_hash("synthetic corpus"), n as u64, cluster_count as u64);
    let lexicon = Lexicon::bundled();

    let mut taken: HashSet<String> = BACKGROUND.iter().map(|s| s.to_string()).collect();
    // clusters draw their vocabularies from one shared pool, so topics overlap
    let pool = word_pool(
        &mut rng,
        (cluster_count * SHARED_TOPIC_POOL_PER_CLUSTER).max(TOPIC_WORDS),
        &mut taken,
        &lexicon,
    );
    let topics: Vec<Vec<String>> = (0..cluster_count)
        .map(|_| {
            index::sample(&mut rng, pool.len(), TOPIC_WORDS)
                .into_iter()
                .map(|i| pool[i].clone())
                .collect()
        })
        .collect();
    let mut background: Vec<String> = BACKGROUND.iter().map(|s| s.to_string()).collect();
    background.extend(word_pool(&mut rng, GENERATED_BACKGROUND, &mut taken, &lexicon));
    let background_dist = zipf(background.len());
    let topic_dist = zipf(TOPIC_WORDS);

    let groups = cluster_count.div_ceil(2);
    let group_refs: Vec<BTreeSet<CrrRef>> = (0..groups)
        .map(|_| {
            let size = rng.random_range(2..=3);
            let mut refs = BTreeSet::new();
            while refs.len() < size {
                refs.insert(random_ref(&mut rng));
            }
            refs
        })
        .collect();

    let measures: Vec<Measure> = (0..cluster_count)
        .flat_map(|c| (1..=2).map(move |j| (c, j)))
        .map(|(c, j)| {
            let words: Vec<&str> = topics[c].iter().skip((j - 1) * 6).take(6).map(String::as_str).collect();
            Measure {
                id: format!("M{:03}-{j}", c + 1),
                text: format!("The institution shall remediate the {} deficiencies.", words.join(" ")),
            }
        })
        .collect();

    let mut assignment: Vec<usize> = (0..n).map(|i| i % cluster_count).collect();
    assignment.shuffle(&mut rng);

    let width = n.to_string().len().max(4);
    let lengths = LogNormal::new(LENGTH_MU, LENGTH_SIGMA).expect("valid lognormal");
    let mut findings = Vec::with_capacity(n);
    let mut clusters = BTreeMap::new();
    for (i, &cluster) in assignment.iter().enumerate() {
        let id = format!("F{:0width$}", i + 1);
        let target = (lengths.sample(&mut rng).round() as usize).clamp(MIN_WORDS, MAX_WORDS);

        let mut refs = group_refs[cluster / 2].clone();
        if rng.random_bool(P_NOISE_REF) {
            refs.insert(random_ref(&mut rng));
        }
        let phrase = rng
            .random_bool(P_REF_IN_TEXT)
            .then(|| reference_phrase(refs.iter().next().expect("non-empty refs")));
        let phrase_words = phrase.as_ref().map_or(0, |p| p.split_whitespace().count());

        let mut words: Vec<String> = (0..target.saturating_sub(phrase_words).max(1))
            .map(|_| {
                let u: f64 = rng.random();
                if u < P_TOPIC {
                    topics[cluster][topic_dist.sample(&mut rng)].clone()
                } else if u < P_TOPIC + P_STOP {
                    STOP.choose(&mut rng).expect("non-empty").to_string()
                } else {
                    background[background_dist.sample(&mut rng)].clone()
                }
            })
            .collect();
        if let Some(p) = phrase {
            let at = rng.random_range(0..=words.len());
            words.splice(at..at, p.split_whitespace().map(str::to_string));
        }

        let n_measures = rng.random_range(1..=2);
        let measure_ids = (1..=n_measures).map(|j| format!("M{:03}-{j}", cluster + 1)).collect();
        findings.push(Finding {
            id: id.clone(),
            text: sentences(words, &mut rng),
            crr_refs: refs,
            measure_ids,
            year: Some(rng.random_range(2017..=2023)),
        });
        clusters.insert(id, cluster);
    }

    Ok(SyntheticCorpus {
        corpus: Corpus::new(findings)?,
        measures,
        clusters,
        cluster_count,
    })
}

/// The corpus part of [`generate_synthetic`].
pub fn generate_synthetic_corpus(n: usize, seed: u64, cluster_count: usize) -> Result<Corpus> {
    Ok(generate_synthetic(n, seed, cluster_count)?.corpus)
}

impl SyntheticCorpus {
    /// Other members of `id`'s cluster, in id order.
    pub fn ground_truth(&self, id: &str) -> Vec<String> {
        let Some(&c) = self.clusters.get(id) else {
            return Vec::new();
        };
        self.clusters
            .iter()
            .filter(|(other, &oc)| oc == c && other.as_str() != id)
            .map(|(other, _)| other.clone())
            .collect()
    }

    /// One labeled query per finding that has at least one cluster mate.
    pub fn labels(&self) -> Vec<LabeledQuery> {
        self.clusters
            .keys()
            .map(|id| LabeledQuery {
                query_id: id.clone(),
                relevant_ids: self.ground_truth(id),
            })
            .filter(|lq| !lq.relevant_ids.is_empty())
            .collect()
    }

    /// Raw vectors: a Gaussian centroid per cluster plus Gaussian noise of
    /// scale `noise` per finding.
    pub fn embeddings(&self, dim: usize, noise: f64, seed: u64) -> Result<EmbeddingSet> {
        let mut rng = derived_rng(
            seed,
            stable_hash("synthetic embeddings"),
            dim as u64,
            self.cluster_count as u64,
        );
        let centroids: Vec<Vec<f64>> = (0..self.cluster_count)
            .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let ids: Vec<String> = self.corpus.ids().map(str::to_string).collect();
        let vectors = ids
            .iter()
            .map(|id| {
                let c = &centroids[self.clusters[id]];
                c.iter()
                    .map(|x| x + noise * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        EmbeddingSet::new(dim, ids, vectors)
    }
}
