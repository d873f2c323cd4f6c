use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_identifier, normalize, NormalizeConfig, SignalKind, Taxonomy};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Engagement {
    pub item: String,
    pub signal: SignalKind,
}

/// One search impression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionEvent {
    pub session_id: String,
    /// Milliseconds, strictly positive.
    pub ts: u64,
    pub raw_query: String,
    /// `normalize(raw_query)`; never empty.
    pub tokens: Vec<String>,
    pub category: String,
    pub engagements: Vec<Engagement>,
}

impl SessionEvent {
    /// Normalized query key (tokens joined by single spaces).
    pub fn query(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub id: String,
    /// Strictly increasing `ts`.
    pub events: Vec<SessionEvent>,
}

/// Events grouped by session, groups in first-appearance order.
///
/// Immutable once built; all constructors validate the session invariants.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SessionLog {
    sessions: Vec<Session>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogFormat {
    /// One JSON object per line.
    #[default]
    JsonLines,
}

/// Wire form of one log line.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    session_id: String,
    ts: i64,
    query: String,
    category: String,
    #[serde(default)]
    engagements: Vec<Engagement>,
}

impl SessionLog {
    /// Groups events by session id and checks every invariant.
    pub fn from_events(events: impl IntoIterator<Item = SessionEvent>) -> Result<Self> {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut sessions: Vec<Session> = Vec::new();
        for ev in events {
            validate_event(&ev)?;
            let slot = *index.entry(ev.session_id.clone()).or_insert_with(|| {
                sessions.push(Session {
                    id: ev.session_id.clone(),
                    events: Vec::new(),
                });
                sessions.len() - 1
            });
            let session = &mut sessions[slot];
            if let Some(last) = session.events.last() {
                if ev.ts <= last.ts {
                    return Err(Error::Validation(format!(
                        "session {:?}: timestamp {} does not follow {}",
                        session.id, ev.ts, last.ts
                    )));
                }
            }
            session.events.push(ev);
        }
        Ok(Self { sessions })
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn events(&self) -> impl Iterator<Item = &SessionEvent> {
        self.sessions.iter().flat_map(|s| s.events.iter())
    }

    pub fn len(&self) -> usize {
        self.sessions.iter().map(|s| s.events.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// Checks that every event is filed under a known category.
    pub fn validate_categories(&self, taxonomy: &Taxonomy) -> Result<()> {
        for ev in self.events() {
            if !taxonomy.contains(&ev.category) {
                return Err(Error::Validation(format!(
                    "session {:?} ts {}: category {:?} is not in the taxonomy",
                    ev.session_id, ev.ts, ev.category
                )));
            }
        }
        Ok(())
    }

    /// Parses JSON lines. `origin` is only used in error messages.
    pub fn read_jsonl(reader: impl BufRead, origin: &Path, cfg: &NormalizeConfig) -> Result<Self> {
        let mut reader = reader;
        let mut events = Vec::new();
        let mut line = String::new();
        let mut line_no = 0;
        let mut offset = 0;
        loop {
            line.clear();
            let n = reader
                .read_line(&mut line)
                .map_err(|e| Error::io(origin, e))?;
            if n == 0 {
                break;
            }
            line_no += 1;
            let start = offset;
            offset += n;
            let body = line.strip_suffix('\n').unwrap_or(&line);
            if body.trim().is_empty() {
                continue;
            }
            let rec: EventRecord = serde_json::from_str(body).map_err(|e| {
                Error::parse(
                    origin,
                    line_no,
                    start + e.column().saturating_sub(1),
                    e.to_string(),
                )
            })?;
            let ev = record_to_event(rec, cfg)
                .map_err(|msg| Error::parse(origin, line_no, start, msg))?;
            events.push(ev);
        }
        Self::from_events(events)
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for ev in self.events() {
            let rec = EventRecord {
                session_id: ev.session_id.clone(),
                ts: ev.ts as i64,
                query: ev.raw_query.clone(),
                category: ev.category.clone(),
                engagements: ev.engagements.clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn record_to_event(
    rec: EventRecord,
    cfg: &NormalizeConfig,
) -> std::result::Result<SessionEvent, String> {
    if rec.ts <= 0 {
        return Err(format!("ts must be strictly positive, got {}", rec.ts));
    }
    let tokens = normalize(&rec.query, cfg);
    Ok(SessionEvent {
        session_id: rec.session_id,
        ts: rec.ts as u64,
        raw_query: rec.query,
        tokens,
        category: rec.category,
        engagements: rec.engagements,
    })
}

fn validate_event(ev: &SessionEvent) -> Result<()> {
    let fail = |msg: String| Error::Validation(format!("session {:?}: {msg}", ev.session_id));
    check_identifier("session id", &ev.session_id).map_err(fail)?;
    check_identifier("category", &ev.category).map_err(fail)?;
    if ev.ts == 0 {
        return Err(fail("ts must be strictly positive".into()));
    }
    if ev.tokens.is_empty() {
        return Err(fail(format!(
            "query {:?} has no tokens after normalization",
            ev.raw_query
        )));
    }
    for e in &ev.engagements {
        check_identifier("item id", &e.item).map_err(fail)?;
    }
    Ok(())
}

pub fn load_log(path: &Path, format: LogFormat, cfg: &NormalizeConfig) -> Result<SessionLog> {
    match format {
        LogFormat::JsonLines => {
            let f = File::open(path).map_err(|e| Error::io(path, e))?;
            SessionLog::read_jsonl(BufReader::new(f), path, cfg)
        }
    }
}

pub fn write_log(log: &SessionLog, path: &Path, format: LogFormat) -> Result<()> {
    match format {
        LogFormat::JsonLines => {
            let f = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(f);
            log.write_jsonl(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(path, e))
        }
    }
}
