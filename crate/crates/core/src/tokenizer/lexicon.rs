use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};

const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const BUNDLED_LEMMAS: &str = include_str!("../../data/lemmas.tsv");

/// Stopword list plus surface→lemma lookup table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    stopwords: BTreeSet<String>,
    lemmas: BTreeMap<String, String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::bundled()
    }
}

impl Lexicon {
    /// The versioned lists shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STOPWORDS, BUNDLED_LEMMAS).expect("bundled lexicon is well-formed")
    }

    pub fn new(stopwords: BTreeSet<String>, lemmas: BTreeMap<String, String>) -> Self {
        Lexicon { stopwords, lemmas }
    }

    /// Parses the plain-text formats: one stopword per line, and
    /// `surface<TAB>lemma` per line. Lines starting with `#` are comments.
    pub fn parse(stopwords: &str, lemmas: &str) -> Result<Self> {
        let stopwords = content_lines(stopwords).map(|(_, l)| l.to_lowercase()).collect();
        let mut table = BTreeMap::new();
        for (i, line) in content_lines(lemmas) {
            let (surface, lemma) = line.split_once('\t').ok_or_else(|| Error::Format {
                kind: "lemma table",
                message: format!("line {}: expected surface<TAB>lemma", i + 1),
            })?;
            table.insert(surface.trim().to_lowercase(), lemma.trim().to_lowercase());
        }
        Ok(Lexicon {
            stopwords,
            lemmas: table,
        })
    }

    pub fn from_files(stopwords: &Path, lemmas: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(stopwords).map_err(|e| Error::io(stopwords, e))?;
        let l = std::fs::read_to_string(lemmas).map_err(|e| Error::io(lemmas, e))?;
        Self::parse(&s, &l)
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    /// Dictionary lemma, identity when the surface form is unknown.
    pub fn lemma<'a>(&'a self, token: &'a str) -> &'a str {
        self.lemmas.get(token).map_or(token, String::as_str)
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    pub fn stopwords_text(&self) -> String {
        let mut s = String::from("# stopwords\n");
        for w in &self.stopwords {
            s.push_str(w);
            s.push('\n');
        }
        s
    }

    pub fn lemmas_text(&self) -> String {
        let mut s = String::from("# surface<TAB>lemma\n");
        for (k, v) in &self.lemmas {
            s.push_str(k);
            s.push('\t');
            s.push_str(v);
            s.push('\n');
        }
        s
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lists_cover_worked_example() {
        let lx = Lexicon::bundled();
        for w in ["shall", "by", "or", "on", "the", "of", "and", "is"] {
            assert!(lx.is_stopword(w), "{w}");
        }
        assert!(!lx.is_stopword("pursuant"));
        assert!(lx.stopwords().len() >= 170);
        assert_eq!(lx.lemma("institutions"), "institution");
        assert_eq!(lx.lemma("factors"), "factor");
        assert_eq!(lx.lemma("realized"), "realize");
        assert_eq!(lx.lemma("basis"), "basis");
        assert_eq!(lx.lemma("planning"), "planning");
    }

    #[test]
    fn round_trips_through_text() {
        let lx = Lexicon::bundled();
        let again = Lexicon::parse(&lx.stopwords_text(), &lx.lemmas_text()).unwrap();
        assert_eq!(lx, again);
    }

    #[test]
    fn malformed_lemma_line() {
        assert!(Lexicon::parse("", "nolemma\n").is_err());
    }
}
