//! CRR article references, the article tree, and the fuzzy prefilter.
//!
//! A reference such as `182(1)(f)` is a path `[182, 1, f]` in a rooted tree
//! whose first level holds article numbers. Two similarities are defined over
//! sets of references: plain Jaccard on the references themselves and a
//! hierarchical Jaccard on their proper ancestors (the synthetic root is never
//! counted).

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{Corpus, Finding};
use crate::error::{Error, Result};

/// A parsed CRR article reference: article number followed by paragraph,
/// point, ... components.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CrrRef {
    article: u32,
    parts: Vec<String>,
}

impl CrrRef {
    pub fn new(article: u32, parts: Vec<String>) -> Result<Self> {
        for p in &parts {
            if p.is_empty() || !p.chars().all(|c| c.is_ascii_alphanumeric()) {
                return Err(Error::CrrParse {
                    input: format!("{article}({p})"),
                    reason: "path components must be non-empty alphanumerics".into(),
                });
            }
        }
        let parts = parts.into_iter().map(|p| p.to_ascii_lowercase()).collect();
        Ok(CrrRef { article, parts })
    }

    pub fn article(&self) -> u32 {
        self.article
    }

    /// Path components, article number first.
    pub fn path(&self) -> Vec<String> {
        std::iter::once(self.article.to_string())
            .chain(self.parts.iter().cloned())
            .collect()
    }

    pub fn depth(&self) -> usize {
        1 + self.parts.len()
    }

    /// Parent node, or `None` when the parent is the synthetic root.
    pub fn parent(&self) -> Option<CrrRef> {
        if self.parts.is_empty() {
            return None;
        }
        Some(CrrRef {
            article: self.article,
            parts: self.parts[..self.parts.len() - 1].to_vec(),
        })
    }

    /// Proper ancestors, root excluded, nearest last.
    pub fn ancestors(&self) -> Vec<CrrRef> {
        (0..self.parts.len())
            .map(|len| CrrRef {
                article: self.article,
                parts: self.parts[..len].to_vec(),
            })
            .collect()
    }

    /// Canonical string form, e.g. `182(1)(f)`.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// Atomic lexical token, e.g. `CRR_182_1_f`.
    pub fn token(&self) -> String {
        let mut s = format!("CRR_{}", self.article);
        for p in &self.parts {
            s.push('_');
            s.push_str(p);
        }
        s
    }

    /// Inverse of [`CrrRef::token`].
    pub fn from_token(token: &str) -> Option<CrrRef> {
        let rest = token.strip_prefix("CRR_")?;
        let mut it = rest.split('_');
        let article = it.next()?.parse().ok()?;
        let parts: Vec<String> = it.map(str::to_string).collect();
        CrrRef::new(article, parts).ok()
    }
}

/// Parses a canonical reference string such as `182(1)(f)` or `92`.
pub fn parse_crr_ref(s: &str) -> Result<CrrRef> {
    let err = |reason: &str| Error::CrrParse {
        input: s.to_string(),
        reason: reason.to_string(),
    };
    let s_trim = s.trim();
    if s_trim.is_empty() {
        return Err(err("empty reference"));
    }
    let digits_end = s_trim.find(|c: char| !c.is_ascii_digit()).unwrap_or(s_trim.len());
    if digits_end == 0 {
        return Err(err("article part must be numeric"));
    }
    let article: u32 = s_trim[..digits_end]
        .parse()
        .map_err(|_| err("article number out of range"))?;

    let mut parts = Vec::new();
    let mut rest = s_trim[digits_end..].trim_start();
    while !rest.is_empty() {
        let inner = rest
            .strip_prefix('(')
            .ok_or_else(|| err("expected '(' after article number"))?;
        let close = inner.find(')').ok_or_else(|| err("unclosed parenthesis"))?;
        let part = inner[..close].trim();
        if part.is_empty() {
            return Err(err("empty parenthetical"));
        }
        if !part.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(err("path components must be alphanumeric"));
        }
        parts.push(part.to_ascii_lowercase());
        rest = inner[close + 1..].trim_start();
    }
    Ok(CrrRef { article, parts })
}

impl FromStr for CrrRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_crr_ref(s)
    }
}

impl fmt::Display for CrrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.article)?;
        for p in &self.parts {
            write!(f, "({p})")?;
        }
        Ok(())
    }
}

fn natural_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

impl Ord for CrrRef {
    fn cmp(&self, other: &Self) -> Ordering {
        self.article.cmp(&other.article).then_with(|| {
            for (a, b) in self.parts.iter().zip(&other.parts) {
                match natural_cmp(a, b) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            self.parts.len().cmp(&other.parts.len())
        })
    }
}

impl PartialOrd for CrrRef {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for CrrRef {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for CrrRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_crr_ref(&s).map_err(serde::de::Error::custom)
    }
}

/// Directed rooted tree of article references.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrrTree {
    nodes: BTreeSet<CrrRef>,
}

impl CrrTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `r` and every one of its ancestors.
    pub fn insert(&mut self, r: &CrrRef) {
        if self.nodes.contains(r) {
            return;
        }
        for a in r.ancestors() {
            self.nodes.insert(a);
        }
        self.nodes.insert(r.clone());
    }

    pub fn from_refs<'a>(refs: impl IntoIterator<Item = &'a CrrRef>) -> Self {
        let mut t = Self::new();
        for r in refs {
            t.insert(r);
        }
        t
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::from_refs(corpus.findings().iter().flat_map(|f| f.crr_refs.iter()))
    }

    /// Adds the references listed in an article file (one canonical ref per
    /// line, `#` comments and blank lines ignored).
    pub fn extend_from_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let r = parse_crr_ref(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            self.insert(&r);
        }
        Ok(())
    }

    pub fn contains(&self, r: &CrrRef) -> bool {
        self.nodes.contains(r)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CrrRef> {
        self.nodes.iter()
    }

    /// Parent of a node in the tree; `Ok(None)` means the root.
    pub fn parent(&self, r: &CrrRef) -> Result<Option<CrrRef>> {
        if !self.contains(r) {
            return Err(Error::NotInTree(r.canonical()));
        }
        Ok(r.parent())
    }

    /// P(x): proper ancestors of `x`, root excluded.
    pub fn ancestors(&self, r: &CrrRef) -> Result<BTreeSet<CrrRef>> {
        if !self.contains(r) {
            return Err(Error::NotInTree(r.canonical()));
        }
        Ok(r.ancestors().into_iter().collect())
    }

    /// One canonical reference per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for n in &self.nodes {
            s.push_str(&n.canonical());
            s.push('\n');
        }
        s
    }
}

fn set_jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// J(A,B) = |A ∩ B| / |A ∪ B|; zero when both sets are empty.
pub fn jaccard(a: &BTreeSet<CrrRef>, b: &BTreeSet<CrrRef>) -> f64 {
    set_jaccard(a, b)
}

/// Node-level H(x,y) = |P(x) ∩ P(y)| / |P(x) ∪ P(y)|.
///
/// When both ancestor sets are empty (two top-level articles) the ratio is
/// undefined; identical nodes then score 1 and distinct ones 0.
pub fn node_hierarchical_sim(x: &CrrRef, y: &CrrRef, tree: &CrrTree) -> Result<f64> {
    let px = tree.ancestors(x)?;
    let py = tree.ancestors(y)?;
    if px.is_empty() && py.is_empty() {
        return Ok(if x == y { 1.0 } else { 0.0 });
    }
    Ok(set_jaccard(&px, &py))
}

fn ancestor_union(refs: &BTreeSet<CrrRef>) -> BTreeSet<CrrRef> {
    refs.iter().flat_map(CrrRef::ancestors).collect()
}

fn lifted_hierarchical(
    a: &BTreeSet<CrrRef>,
    pa: &BTreeSet<CrrRef>,
    b: &BTreeSet<CrrRef>,
    pb: &BTreeSet<CrrRef>,
) -> f64 {
    if pa.is_empty() && pb.is_empty() {
        return if !a.is_empty() && a == b { 1.0 } else { 0.0 };
    }
    set_jaccard(pa, pb)
}

/// Set-level H(A,B): Jaccard between the unions of the proper-ancestor sets
/// of the references in `a` and in `b`.
pub fn hierarchical_sim(a: &BTreeSet<CrrRef>, b: &BTreeSet<CrrRef>, tree: &CrrTree) -> Result<f64> {
    if let Some(missing) = a.iter().chain(b).find(|r| !tree.contains(r)) {
        return Err(Error::NotInTree(missing.canonical()));
    }
    Ok(lifted_hierarchical(a, &ancestor_union(a), b, &ancestor_union(b)))
}

/// Thresholds for the CRR prefilter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefilterConfig {
    pub jaccard_min: f64,
    pub hier_min: f64,
    pub fallback_on_empty: bool,
}

impl Default for PrefilterConfig {
    fn default() -> Self {
        PrefilterConfig {
            jaccard_min: 1.0 / 3.0,
            hier_min: 1.0 / 3.0,
            fallback_on_empty: true,
        }
    }
}

impl PrefilterConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("jaccard_min", self.jaccard_min), ("hier_min", self.hier_min)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        Ok(())
    }
}

/// A reference set with its ancestor union precomputed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrrProfile {
    refs: BTreeSet<CrrRef>,
    ancestors: BTreeSet<CrrRef>,
}

impl CrrProfile {
    pub fn new(refs: &BTreeSet<CrrRef>) -> Self {
        CrrProfile {
            ancestors: ancestor_union(refs),
            refs: refs.clone(),
        }
    }

    pub fn jaccard(&self, other: &CrrProfile) -> f64 {
        set_jaccard(&self.refs, &other.refs)
    }

    pub fn hierarchical(&self, other: &CrrProfile) -> f64 {
        lifted_hierarchical(&self.refs, &self.ancestors, &other.refs, &other.ancestors)
    }

    pub fn passes(&self, other: &CrrProfile, cfg: &PrefilterConfig) -> bool {
        self.jaccard(other) >= cfg.jaccard_min && self.hierarchical(other) >= cfg.hier_min
    }
}

/// Positions from `candidates` whose profiles pass the thresholds against
/// `query`; falls back to all of `candidates` when nothing passes and the
/// fallback is enabled.
pub fn prefilter_within(
    query: &CrrProfile,
    profiles: &[CrrProfile],
    candidates: &[usize],
    cfg: &PrefilterConfig,
) -> Vec<usize> {
    let kept: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&i| query.passes(&profiles[i], cfg))
        .collect();
    if kept.is_empty() && cfg.fallback_on_empty {
        candidates.to_vec()
    } else {
        kept
    }
}

/// Corpus positions that pass the CRR thresholds against `query`.
///
/// Ancestors are derived from the reference paths, which is exactly what the
/// tree encodes, so query references unseen in the corpus are still scored.
pub fn prefilter(query: &Finding, corpus: &Corpus, tree: &CrrTree, cfg: &PrefilterConfig) -> Vec<usize> {
    debug_assert!(corpus
        .findings()
        .iter()
        .flat_map(|f| f.crr_refs.iter())
        .all(|r| tree.contains(r)));
    let q = CrrProfile::new(&query.crr_refs);
    let profiles: Vec<CrrProfile> = corpus.findings().iter().map(|f| CrrProfile::new(&f.crr_refs)).collect();
    let all: Vec<usize> = (0..corpus.len()).collect();
    prefilter_within(&q, &profiles, &all, cfg)
}
