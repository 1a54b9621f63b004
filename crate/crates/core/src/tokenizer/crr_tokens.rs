use std::sync::OnceLock;

use regex::{Captures, Regex};

use crate::crr::CrrRef;

fn reference_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?x)
            \b[Aa]rticles?\s+
            (?P<num>\d+)\b
            (?P<parts>(?:\s?\(\s*[0-9A-Za-z]{1,8}\s*\))*)
            (?P<reg>
                \s+(?:of\s+(?:the\s+)?)?
                (?:Regulation\s*\(EU\)\s*(?:No\.?\s*)?575/2013|CRR\b)
            )?",
        )
        .expect("valid CRR pattern")
    })
}

fn part_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(\s*([0-9A-Za-z]+)\s*\)").expect("valid part pattern"))
}

fn parse_capture(caps: &Captures<'_>) -> Option<CrrRef> {
    let article: u32 = caps["num"].parse().ok()?;
    let parts = part_pattern()
        .captures_iter(&caps["parts"])
        .map(|c| c[1].to_string())
        .collect();
    CrrRef::new(article, parts).ok()
}

/// Replaces every CRR article reference in `text` by its atomic token
/// (`CRR_182_1_f`) and returns the distinct references in order of first
/// appearance.
pub fn extract_crr_tokens(text: &str) -> (String, Vec<CrrRef>) {
    let mut refs: Vec<CrrRef> = Vec::new();
    let rewritten = reference_pattern().replace_all(text, |caps: &Captures<'_>| match parse_capture(caps) {
        Some(r) => {
            let token = format!(" {} ", r.token());
            if !refs.contains(&r) {
                refs.push(r);
            }
            token
        }
        None => caps[0].to_string(),
    });
    (rewritten.into_owned(), refs)
}

/// True for tokens produced by [`extract_crr_tokens`].
pub fn is_crr_token(token: &str) -> bool {
    token
        .strip_prefix("CRR_")
        .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}
