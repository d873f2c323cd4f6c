//! Behavioral log data model, ingestion and synthetic generation.

mod generator;
mod log;
mod normalize;
mod signals;
mod taxonomy;

pub use generator::{
    generate_synthetic_log, read_manifest, write_manifest, CategorySpec, GeneratorSpec,
    PlantedPair, SyntheticLog,
};
pub use log::{load_log, write_log, Engagement, LogFormat, Session, SessionEvent, SessionLog};
pub use normalize::{join_tokens, normalize, NormalizeConfig};
pub use signals::{engagement_score, SignalKind, SignalWeights};
pub use taxonomy::Taxonomy;

/// Rejects identifiers that would break the tab/semicolon separated outputs.
pub(crate) fn check_identifier(what: &str, id: &str) -> Result<(), String> {
    if id.is_empty() {
        return Err(format!("{what} is empty"));
    }
    if id.chars().any(|c| c == ';' || c.is_control()) {
        return Err(format!("{what} {id:?} contains ';' or a control character"));
    }
    Ok(())
}
