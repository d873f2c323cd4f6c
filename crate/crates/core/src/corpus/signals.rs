use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SessionEvent;
use crate::{Error, Result};

/// Kind of engagement recorded on a search results page.
///
/// The four named kinds have default weights. Any other kind is carried
/// through as [`SignalKind::Other`] and must be given a weight in config
/// before it can be scored.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum SignalKind {
    Click,
    Bid,
    AddToCart,
    Bought,
    Other(String),
}

impl SignalKind {
    pub fn as_str(&self) -> &str {
        match self {
            SignalKind::Click => "click",
            SignalKind::Bid => "bid",
            SignalKind::AddToCart => "add_to_cart",
            SignalKind::Bought => "bought",
            SignalKind::Other(s) => s,
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<String> for SignalKind {
    fn from(s: String) -> Self {
        match s.as_str() {
            "click" => SignalKind::Click,
            "bid" => SignalKind::Bid,
            "add_to_cart" => SignalKind::AddToCart,
            "bought" => SignalKind::Bought,
            _ => SignalKind::Other(s),
        }
    }
}

impl From<SignalKind> for String {
    fn from(k: SignalKind) -> Self {
        k.as_str().to_owned()
    }
}

impl FromStr for SignalKind {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(SignalKind::from(s.to_owned()))
    }
}

/// Per-kind weights of the engagement score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignalWeights(BTreeMap<SignalKind, f64>);

impl Default for SignalWeights {
    fn default() -> Self {
        Self(BTreeMap::from([
            (SignalKind::Click, 1.0),
            (SignalKind::Bid, 3.0),
            (SignalKind::AddToCart, 4.0),
            (SignalKind::Bought, 5.0),
        ]))
    }
}

impl SignalWeights {
    pub fn new(weights: impl IntoIterator<Item = (SignalKind, f64)>) -> Result<Self> {
        let w = Self(weights.into_iter().collect());
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (kind, w) in &self.0 {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::Config(format!(
                    "weight for signal {kind} must be finite and >= 0, got {w}"
                )));
            }
        }
        Ok(())
    }

    pub fn weight(&self, kind: &SignalKind) -> Result<f64> {
        self.0
            .get(kind)
            .copied()
            .ok_or_else(|| Error::Config(format!("no weight configured for signal kind {kind:?}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SignalKind, &f64)> {
        self.0.iter()
    }
}

/// Weighted sum of an event's engagements; 0 when there are none.
pub fn engagement_score(event: &SessionEvent, weights: &SignalWeights) -> Result<f64> {
    event
        .engagements
        .iter()
        .try_fold(0.0, |acc, e| Ok(acc + weights.weight(&e.signal)?))
}
