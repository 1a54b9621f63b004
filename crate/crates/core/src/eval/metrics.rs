use std::collections::HashSet;
use std::hash::Hash;

use crate::error::{Error, Result};

fn check(n_relevant: usize, k: usize) -> Result<()> {
    if n_relevant == 0 {
        return Err(Error::EmptyRelevant);
    }
    if k == 0 {
        return Err(Error::Config("cutoff k must be at least 1".into()));
    }
    Ok(())
}

/// AP@k with an arbitrary relevance predicate; `n_relevant` is the size of
/// the relevant set.
pub(crate) fn ap_by<T>(ranking: &[T], n_relevant: usize, k: usize, is_relevant: impl Fn(&T) -> bool) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, item) in ranking.iter().take(k).enumerate() {
        if is_relevant(item) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / n_relevant.min(k) as f64
}

pub(crate) fn rr_by<T>(ranking: &[T], k: usize, is_relevant: impl Fn(&T) -> bool) -> f64 {
    ranking
        .iter()
        .take(k)
        .position(is_relevant)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Sum of precision@i over the relevant positions within the top `k`,
/// divided by `min(|relevant|, k)`.
pub fn average_precision_at_k<T: Eq + Hash>(ranking: &[T], relevant: &HashSet<T>, k: usize) -> Result<f64> {
    check(relevant.len(), k)?;
    Ok(ap_by(ranking, relevant.len(), k, |x| relevant.contains(x)))
}

/// `1 / rank` of the first relevant item within the top `k`, else 0.
pub fn reciprocal_rank_at_k<T: Eq + Hash>(ranking: &[T], relevant: &HashSet<T>, k: usize) -> Result<f64> {
    check(relevant.len(), k)?;
    Ok(rr_by(ranking, k, |x| relevant.contains(x)))
}
