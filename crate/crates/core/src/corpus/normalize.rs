use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizeConfig {
    pub lowercase: bool,
    /// Strip non-alphanumeric characters from both ends of each token.
    pub strip_punctuation: bool,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
        }
    }
}

/// Splits a raw query into normalized tokens.
///
/// Whitespace (any Unicode white space) separates tokens. Tokens that are
/// left empty after stripping are dropped, so an all-punctuation query
/// yields no tokens. Inner characters are kept: `"9.5"` and `"128gb"` stay
/// single tokens.
pub fn normalize(raw: &str, cfg: &NormalizeConfig) -> Vec<String> {
    raw.split_whitespace()
        .filter_map(|tok| {
            let folded = if cfg.lowercase {
                tok.to_lowercase()
            } else {
                tok.to_owned()
            };
            let kept = if cfg.strip_punctuation {
                folded.trim_matches(|c: char| !c.is_alphanumeric())
            } else {
                folded.as_str()
            };
            (!kept.is_empty()).then(|| kept.to_owned())
        })
        .collect()
}

/// Canonical string form of a token list; used as the query key everywhere.
pub fn join_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_ref());
    }
    out
}
