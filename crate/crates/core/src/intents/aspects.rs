use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::corpus::{normalize, NormalizeConfig};
use crate::{Error, Result};

/// One position of an aspect pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Slot {
    Literal(String),
    /// `<num>`: digits, optionally with inner dots (`9`, `9.5`).
    Number,
    /// `<num>gb` and the like: a number glued to a fixed suffix.
    NumberWithSuffix(String),
}

impl Slot {
    fn parse(raw: &str) -> Result<Self> {
        if let Some(rest) = raw.strip_prefix("<num>") {
            return Ok(if rest.is_empty() {
                Slot::Number
            } else {
                Slot::NumberWithSuffix(rest.to_lowercase())
            });
        }
        let toks = normalize(raw, &NormalizeConfig::default());
        match toks.as_slice() {
            [t] => Ok(Slot::Literal(t.clone())),
            _ => Err(Error::Config(format!("bad aspect pattern token {raw:?}"))),
        }
    }

    fn matches(&self, token: &str) -> bool {
        match self {
            Slot::Literal(l) => l == token,
            Slot::Number => is_number(token),
            Slot::NumberWithSuffix(sfx) => token.strip_suffix(sfx.as_str()).is_some_and(is_number),
        }
    }
}

fn is_number(t: &str) -> bool {
    t.bytes().next().is_some_and(|b| b.is_ascii_digit())
        && t.bytes().last().is_some_and(|b| b.is_ascii_digit())
        && t.bytes().all(|b| b.is_ascii_digit() || b == b'.')
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Aspect {
    name: String,
    patterns: Vec<Vec<Slot>>,
}

/// Pattern lexicon used to pull explicit product aspects out of a query.
///
/// Aspects are tried in declaration order, which is the priority order; a
/// token is claimed by the first pattern that matches at its position.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AspectLexicon {
    aspects: Vec<Aspect>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconFile {
    #[serde(default)]
    aspect: Vec<AspectEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AspectEntry {
    name: String,
    patterns: Vec<String>,
}

impl AspectLexicon {
    pub fn new<N, P>(aspects: impl IntoIterator<Item = (N, Vec<P>)>) -> Result<Self>
    where
        N: Into<String>,
        P: AsRef<str>,
    {
        let mut out = Vec::new();
        for (name, patterns) in aspects {
            let name = name.into();
            if out.iter().any(|a: &Aspect| a.name == name) {
                return Err(Error::Config(format!("aspect {name:?} declared twice")));
            }
            let patterns = patterns
                .iter()
                .map(|p| {
                    let slots: Vec<Slot> = p
                        .as_ref()
                        .split_whitespace()
                        .map(Slot::parse)
                        .collect::<Result<_>>()?;
                    if slots.is_empty() {
                        return Err(Error::Config(format!("empty pattern in aspect {name:?}")));
                    }
                    Ok(slots)
                })
                .collect::<Result<_>>()?;
            out.push(Aspect { name, patterns });
        }
        Ok(Self { aspects: out })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: LexiconFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("lexicon: {e}")))?;
        Self::new(file.aspect.into_iter().map(|a| (a.name, a.patterns)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn aspect_names(&self) -> impl Iterator<Item = &str> {
        self.aspects.iter().map(|a| a.name.as_str())
    }
}

/// Aspect values found in a query plus the tokens no aspect claimed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaggedQuery {
    pub aspects: BTreeMap<String, Vec<String>>,
    pub residual: Vec<String>,
}

pub fn tag_aspects<S: AsRef<str>>(tokens: &[S], lexicon: &AspectLexicon) -> TaggedQuery {
    let mut out = TaggedQuery::default();
    let mut i = 0;
    'scan: while i < tokens.len() {
        for aspect in &lexicon.aspects {
            for pat in &aspect.patterns {
                let fits = i + pat.len() <= tokens.len()
                    && pat
                        .iter()
                        .zip(&tokens[i..])
                        .all(|(slot, t)| slot.matches(t.as_ref()));
                if fits {
                    out.aspects.entry(aspect.name.clone()).or_default().extend(
                        tokens[i..i + pat.len()]
                            .iter()
                            .map(|t| t.as_ref().to_owned()),
                    );
                    i += pat.len();
                    continue 'scan;
                }
            }
        }
        out.residual.push(tokens[i].as_ref().to_owned());
        i += 1;
    }
    out
}
