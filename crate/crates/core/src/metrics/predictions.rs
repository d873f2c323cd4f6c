use std::io::{BufRead, Write};
use std::path::Path;

use super::EvalInstance;
use crate::corpus::{normalize, NormalizeConfig};
use crate::intents::IntentBucket;
use crate::{Error, Result};

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRow {
    pub source: String,
    pub gold: String,
    pub bucket: IntentBucket,
    /// Ranked; an empty string stands for "no rewrite".
    pub candidates: Vec<String>,
}

/// Writes `source \t gold \t tag \t candidate_1 [\t candidate_2 ...]` lines.
pub fn write_predictions(rows: &[PredictionRow], mut w: impl Write) -> std::io::Result<()> {
    for r in rows {
        write!(w, "{}\t{}\t{}", r.source, r.gold, r.bucket.tag())?;
        for c in &r.candidates {
            write!(w, "\t{c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Parses a predictions file into evaluation instances.
///
/// Every query field goes through the default normalization, so files
/// written by other tools need not be pre-normalized.
pub fn read_predictions(reader: impl BufRead, origin: &Path) -> Result<Vec<EvalInstance>> {
    let cfg = NormalizeConfig::default();
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let start = offset;
        offset += line.len() + 1;
        let fail = |m: String| Error::parse(origin, i + 1, start, m);
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 4 {
            return Err(fail(format!(
                "expected source, gold, intent tag and at least one candidate; got {} fields",
                cols.len()
            )));
        }
        let bucket = IntentBucket::from_tag(cols[2])
            .ok_or_else(|| fail(format!("unknown intent tag {:?}", cols[2])))?;
        let source = normalize(cols[0], &cfg);
        let gold = normalize(cols[1], &cfg);
        if source.is_empty() || gold.is_empty() {
            return Err(fail("source and gold queries must not be empty".into()));
        }
        let candidates = cols[3..].iter().map(|c| normalize(c, &cfg)).collect();
        out.push(
            EvalInstance::new(source, gold, candidates, Some(bucket))
                .map_err(|e| fail(e.to_string()))?,
        );
    }
    Ok(out)
}
