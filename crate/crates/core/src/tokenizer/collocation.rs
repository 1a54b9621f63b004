//! Bigram/trigram phrase detection.
//!
//! An adjacent pair `(a, b)` is merged into `a_b` when it occurs at least
//! `min_count` times and both conditionals beat the marginals:
//!
//! ```text
//! p(b | a) = c(a,b) / c_left(a)  >  p(b) = c(b) / N
//! p(a | b) = c(a,b) / c_right(b) >  p(a) = c(a) / N
//! ```
//!
//! where `c_left(a)` counts adjacent positions starting with `a`, `c_right(b)`
//! those ending with `b`, and `N` is the total token count. Trigrams come from
//! a second pass over the bigram-merged corpus that pairs a merged bigram with
//! an adjacent unigram, with statistics re-estimated on that corpus.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::crr_tokens::is_crr_token;

/// Learned merge table, one set of accepted pairs per pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collocations {
    pub bigrams: BTreeSet<(String, String)>,
    pub trigrams: BTreeSet<(String, String)>,
}

impl Collocations {
    pub fn is_empty(&self) -> bool {
        self.bigrams.is_empty() && self.trigrams.is_empty()
    }

    /// Applies the learned merges to a fresh token list (query time).
    pub fn apply(&self, tokens: &[String]) -> Vec<String> {
        let once = merge_tokens(tokens, &as_lookup(&self.bigrams));
        if self.trigrams.is_empty() {
            once
        } else {
            merge_tokens(&once, &as_lookup(&self.trigrams))
        }
    }
}

fn as_lookup(pairs: &BTreeSet<(String, String)>) -> HashSet<(&str, &str)> {
    pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect()
}

fn is_unigram(t: &str) -> bool {
    !t.contains('_') && !is_crr_token(t)
}

fn is_merged_bigram(t: &str) -> bool {
    !is_crr_token(t) && t.matches('_').count() == 1
}

#[derive(Default)]
struct PairStats<'a> {
    total: u64,
    unigram: HashMap<&'a str, u64>,
    left: HashMap<&'a str, u64>,
    right: HashMap<&'a str, u64>,
    pair: HashMap<(&'a str, &'a str), u64>,
}

impl<'a> PairStats<'a> {
    fn collect(docs: &'a [Vec<String>]) -> Self {
        let mut s = PairStats::default();
        for doc in docs {
            for t in doc {
                s.total += 1;
                *s.unigram.entry(t.as_str()).or_default() += 1;
            }
            for w in doc.windows(2) {
                let (a, b) = (w[0].as_str(), w[1].as_str());
                *s.left.entry(a).or_default() += 1;
                *s.right.entry(b).or_default() += 1;
                *s.pair.entry((a, b)).or_default() += 1;
            }
        }
        s
    }

    /// Both conditionals strictly exceed both marginals, compared exactly in
    /// integer arithmetic.
    fn is_collocation(&self, a: &str, b: &str, count: u64) -> bool {
        let n = u128::from(self.total);
        let c = u128::from(count);
        let ca = u128::from(self.unigram[a]);
        let cb = u128::from(self.unigram[b]);
        let left_a = u128::from(self.left[a]);
        let right_b = u128::from(self.right[b]);
        c * n > left_a * cb && c * n > right_b * ca
    }
}

fn find_pairs(
    docs: &[Vec<String>],
    min_count: u64,
    eligible: impl Fn(&str, &str) -> bool,
) -> BTreeSet<(String, String)> {
    let stats = PairStats::collect(docs);
    stats
        .pair
        .iter()
        .filter(|(&(a, b), &count)| count >= min_count && eligible(a, b) && stats.is_collocation(a, b, count))
        .map(|(&(a, b), _)| (a.to_string(), b.to_string()))
        .collect()
}

/// Left-to-right greedy, non-overlapping merge.
fn merge_tokens(tokens: &[String], accepted: &HashSet<(&str, &str)>) -> Vec<String> {
    if accepted.is_empty() {
        return tokens.to_vec();
    }
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() && accepted.contains(&(tokens[i].as_str(), tokens[i + 1].as_str())) {
            out.push(format!("{}_{}", tokens[i], tokens[i + 1]));
            i += 2;
        } else {
            out.push(tokens[i].clone());
            i += 1;
        }
    }
    out
}

/// Learns and applies collocation merges over the whole corpus.
///
/// `ngram_max` of 1 disables merging, 2 runs the bigram pass, 3 adds the
/// trigram pass.
pub fn detect_collocations(docs: &[Vec<String>], ngram_max: usize, min_count: u64) -> (Vec<Vec<String>>, Collocations) {
    let mut model = Collocations::default();
    if ngram_max < 2 {
        return (docs.to_vec(), model);
    }
    model.bigrams = find_pairs(docs, min_count, |a, b| is_unigram(a) && is_unigram(b));
    let lookup = as_lookup(&model.bigrams);
    let merged: Vec<Vec<String>> = docs.iter().map(|d| merge_tokens(d, &lookup)).collect();
    if ngram_max < 3 || model.bigrams.is_empty() {
        return (merged, model);
    }
    model.trigrams = find_pairs(&merged, min_count, |a, b| {
        (is_merged_bigram(a) && is_unigram(b)) || (is_unigram(a) && is_merged_bigram(b))
    });
    let lookup = as_lookup(&model.trigrams);
    let merged = merged.iter().map(|d| merge_tokens(d, &lookup)).collect();
    (merged, model)
}
