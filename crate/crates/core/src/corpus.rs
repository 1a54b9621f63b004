//! Findings, measures, and JSONL corpus IO.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crr::CrrRef;
use crate::error::{Error, Result};

/// One corpus document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub id: String,
    pub text: String,
    pub crr_refs: BTreeSet<CrrRef>,
    pub measure_ids: BTreeSet<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
}

#[derive(Deserialize)]
struct RawFinding {
    id: String,
    text: String,
    #[serde(default)]
    crr_refs: Vec<CrrRef>,
    #[serde(default)]
    measure_ids: Vec<String>,
    #[serde(default)]
    year: Option<i32>,
}

impl RawFinding {
    fn into_finding(self) -> Result<Finding> {
        let mut crr_refs = BTreeSet::new();
        for r in self.crr_refs {
            let canonical = r.canonical();
            if !crr_refs.insert(r) {
                return Err(Error::DuplicateCrrRef {
                    id: self.id,
                    reference: canonical,
                });
            }
        }
        Ok(Finding {
            id: self.id,
            text: self.text,
            crr_refs,
            measure_ids: self.measure_ids.into_iter().collect(),
            year: self.year,
        })
    }
}

impl Finding {
    /// A finding with no metadata, e.g. an ad-hoc query.
    pub fn from_text(id: impl Into<String>, text: impl Into<String>) -> Self {
        Finding {
            id: id.into(),
            text: text.into(),
            crr_refs: BTreeSet::new(),
            measure_ids: BTreeSet::new(),
            year: None,
        }
    }
}

/// A remediation measure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measure {
    pub id: String,
    pub text: String,
}

/// Immutable, validated collection of findings ordered by id.
#[derive(Debug, Clone)]
pub struct Corpus {
    findings: Vec<Finding>,
    index_by_id: HashMap<String, usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.findings == other.findings
    }
}

impl Corpus {
    /// Validates and sorts by id.
    pub fn new(mut findings: Vec<Finding>) -> Result<Self> {
        if findings.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        findings.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index_by_id = HashMap::with_capacity(findings.len());
        for (i, f) in findings.iter().enumerate() {
            if f.text.trim().is_empty() {
                return Err(Error::EmptyText(f.id.clone()));
            }
            if index_by_id.insert(f.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(f.id.clone()));
            }
        }
        Ok(Corpus { findings, index_by_id })
    }

    pub fn findings(&self) -> &[Finding] {
        &self.findings
    }

    pub fn len(&self) -> usize {
        self.findings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn get(&self, pos: usize) -> &Finding {
        &self.findings[pos]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index_by_id.get(id).copied()
    }

    pub fn by_id(&self, id: &str) -> Option<&Finding> {
        self.position(id).map(|i| &self.findings[i])
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.findings.iter().map(|f| f.id.as_str())
    }

    /// Checks that every measure id resolves against `measures`.
    pub fn validate_measures(&self, measures: &[Measure]) -> Result<()> {
        let known: BTreeSet<&str> = measures.iter().map(|m| m.id.as_str()).collect();
        for f in &self.findings {
            if let Some(m) = f.measure_ids.iter().find(|m| !known.contains(m.as_str())) {
                return Err(Error::UnknownMeasure {
                    finding: f.id.clone(),
                    measure: m.clone(),
                });
            }
        }
        Ok(())
    }
}

fn read_jsonl<T, F>(path: &Path, mut each: F) -> Result<()>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(usize, T) -> Result<()>,
{
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        each(i + 1, value)?;
    }
    Ok(())
}

/// Reads a findings JSONL file.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let mut findings = Vec::new();
    read_jsonl(path, |_, raw: RawFinding| {
        findings.push(raw.into_finding()?);
        Ok(())
    })?;
    Corpus::new(findings)
}

/// Reads findings in file order without building a corpus, e.g. a batch of
/// queries.
pub fn load_findings(path: &Path) -> Result<Vec<Finding>> {
    let mut findings = Vec::new();
    read_jsonl(path, |_, raw: RawFinding| {
        let f = raw.into_finding()?;
        if f.text.trim().is_empty() {
            return Err(Error::EmptyText(f.id));
        }
        findings.push(f);
        Ok(())
    })?;
    Ok(findings)
}

/// Writes the corpus as JSONL in corpus order.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    write_jsonl(path, corpus.findings())
}

pub fn load_measures(path: &Path) -> Result<Vec<Measure>> {
    let mut out: Vec<Measure> = Vec::new();
    let mut seen = BTreeSet::new();
    read_jsonl(path, |_, m: Measure| {
        if !seen.insert(m.id.clone()) {
            return Err(Error::DuplicateId(m.id.clone()));
        }
        out.push(m);
        Ok(())
    })?;
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

pub fn write_measures(measures: &[Measure], path: &Path) -> Result<()> {
    write_jsonl(path, measures)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("serializable record");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
