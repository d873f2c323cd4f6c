//! Reformulation mining over a [`SessionLog`].
//!
//! Three strategies, one per [`Provenance`]:
//! - in-session: an earlier query in a session followed, within a few hops,
//!   by an engaged query;
//! - co-engaged: two queries from different sessions that engaged the same
//!   items;
//! - one-hop: two queries with no common item that are both co-engaged with
//!   a third (bridge) query.
//!
//! All outputs are deterministic and independent of the order events were
//! logged in (beyond the within-session order the in-session miner uses).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{engagement_score, SessionLog, SignalKind, SignalWeights};
use crate::intents::IntentBucket;
use crate::{Error, Result};

pub const DEFAULT_MAX_HOPS: usize = 3;
pub const DEFAULT_MIN_SHARED: usize = 1;
pub const DEFAULT_MIN_ENGAGEMENT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    InSession,
    CrossSessionCoEngaged,
    CrossSessionOneHop,
}

impl Provenance {
    pub const ALL: [Provenance; 3] = [
        Provenance::InSession,
        Provenance::CrossSessionCoEngaged,
        Provenance::CrossSessionOneHop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::InSession => "in_session",
            Provenance::CrossSessionCoEngaged => "co_engaged",
            Provenance::CrossSessionOneHop => "one_hop",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Provenance::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown provenance {s:?}"))
    }
}

/// Why a pair was mined. The variant determines the pair's provenance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Evidence {
    InSession {
        session_id: String,
        hops: usize,
    },
    /// Sorted, non-empty.
    CoEngaged {
        shared_items: Vec<String>,
    },
    OneHop {
        bridge: String,
        /// Item shared by the source and the bridge.
        source_item: String,
        /// Item shared by the bridge and the target.
        target_item: String,
    },
}

impl Evidence {
    pub fn provenance(&self) -> Provenance {
        match self {
            Evidence::InSession { .. } => Provenance::InSession,
            Evidence::CoEngaged { .. } => Provenance::CrossSessionCoEngaged,
            Evidence::OneHop { .. } => Provenance::CrossSessionOneHop,
        }
    }

    /// Semicolon-joined form used in pair files.
    pub fn encode(&self) -> String {
        match self {
            Evidence::InSession { session_id, hops } => format!("{session_id};{hops}"),
            Evidence::CoEngaged { shared_items } => shared_items.join(";"),
            Evidence::OneHop {
                bridge,
                source_item,
                target_item,
            } => format!("{bridge};{source_item};{target_item}"),
        }
    }

    pub fn decode(provenance: Provenance, s: &str) -> std::result::Result<Self, String> {
        let bad = || format!("malformed {provenance} evidence {s:?}");
        match provenance {
            Provenance::InSession => {
                let (session_id, hops) = s.rsplit_once(';').ok_or_else(bad)?;
                let hops = hops.parse().map_err(|_| bad())?;
                if session_id.is_empty() || hops == 0 {
                    return Err(bad());
                }
                Ok(Evidence::InSession {
                    session_id: session_id.to_owned(),
                    hops,
                })
            }
            Provenance::CrossSessionCoEngaged => {
                let shared_items: Vec<String> = s.split(';').map(str::to_owned).collect();
                if shared_items.iter().any(String::is_empty) {
                    return Err(bad());
                }
                Ok(Evidence::CoEngaged { shared_items })
            }
            Provenance::CrossSessionOneHop => {
                // the bridge is a query and may itself contain ';'
                let mut parts = s.rsplitn(3, ';');
                let target_item = parts.next().ok_or_else(bad)?;
                let source_item = parts.next().ok_or_else(bad)?;
                let bridge = parts.next().ok_or_else(bad)?;
                if [bridge, source_item, target_item]
                    .iter()
                    .any(|p| p.is_empty())
                {
                    return Err(bad());
                }
                Ok(Evidence::OneHop {
                    bridge: bridge.to_owned(),
                    source_item: source_item.to_owned(),
                    target_item: target_item.to_owned(),
                })
            }
        }
    }
}

/// A mined (source, target) reformulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPair {
    pub source_tokens: Vec<String>,
    pub target_tokens: Vec<String>,
    pub source_query: String,
    pub target_query: String,
    pub evidence: Evidence,
    /// Filled in by intent bucketing.
    pub bucket: Option<IntentBucket>,
}

impl QueryPair {
    /// Builds a pair from normalized query keys.
    pub fn new(source: &str, target: &str, evidence: Evidence) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::Validation("pair with an empty query".into()));
        }
        if source == target {
            return Err(Error::Validation(format!(
                "source and target are the same query {source:?}"
            )));
        }
        Ok(Self {
            source_tokens: source.split(' ').map(str::to_owned).collect(),
            target_tokens: target.split(' ').map(str::to_owned).collect(),
            source_query: source.to_owned(),
            target_query: target.to_owned(),
            evidence,
            bucket: None,
        })
    }

    pub fn provenance(&self) -> Provenance {
        self.evidence.provenance()
    }
}

/// Engagement counts on one query-item edge, per signal kind.
pub type EdgeCounts = BTreeMap<SignalKind, u64>;

/// Bipartite query/item engagement graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoClickGraph {
    query_items: BTreeMap<String, BTreeMap<String, EdgeCounts>>,
    item_queries: BTreeMap<String, BTreeSet<String>>,
}

impl CoClickGraph {
    pub fn query_count(&self) -> usize {
        self.query_items.len()
    }

    pub fn item_count(&self) -> usize {
        self.item_queries.len()
    }

    pub fn edge_count(&self) -> usize {
        self.query_items.values().map(BTreeMap::len).sum()
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.query_items.keys().map(String::as_str)
    }

    /// Items engaged under `query`, with counts.
    pub fn items_of(&self, query: &str) -> Option<&BTreeMap<String, EdgeCounts>> {
        self.query_items.get(query)
    }

    /// Queries under which `item` was engaged.
    pub fn queries_of(&self, item: &str) -> Option<&BTreeSet<String>> {
        self.item_queries.get(item)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, &EdgeCounts)> {
        self.query_items
            .iter()
            .flat_map(|(q, items)| items.iter().map(move |(i, c)| (q.as_str(), i.as_str(), c)))
    }

    /// Items engaged under both queries, sorted. Empty for a self-pair.
    pub fn shared_items(&self, a: &str, b: &str) -> Vec<&str> {
        if a == b {
            return Vec::new();
        }
        match (self.query_items.get(a), self.query_items.get(b)) {
            (Some(x), Some(y)) => x
                .keys()
                .filter(|k| y.contains_key(*k))
                .map(String::as_str)
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn co_engaged(&self, a: &str, b: &str) -> usize {
        self.shared_items(a, b).len()
    }

    /// Every unordered query pair with at least one common item, keyed
    /// `(smaller, larger)`, with the sorted common items.
    fn shared_by_pair(&self) -> BTreeMap<(&str, &str), Vec<&str>> {
        let mut shared: BTreeMap<(&str, &str), Vec<&str>> = BTreeMap::new();
        for (item, queries) in &self.item_queries {
            let qs: Vec<&str> = queries.iter().map(String::as_str).collect();
            for (i, a) in qs.iter().enumerate() {
                for b in &qs[i + 1..] {
                    shared.entry((a, b)).or_default().push(item);
                }
            }
        }
        shared
    }
}

/// Builds the graph from events, keeping only engagements whose kind is in
/// `signals`.
pub fn build_coclick_graph(log: &SessionLog, signals: &BTreeSet<SignalKind>) -> CoClickGraph {
    let mut g = CoClickGraph::default();
    for ev in log.events() {
        for e in ev
            .engagements
            .iter()
            .filter(|e| signals.contains(&e.signal))
        {
            let query = ev.query();
            *g.query_items
                .entry(query.clone())
                .or_default()
                .entry(e.item.clone())
                .or_default()
                .entry(e.signal.clone())
                .or_default() += 1;
            g.item_queries
                .entry(e.item.clone())
                .or_default()
                .insert(query);
        }
    }
    g
}

pub fn default_signal_filter() -> BTreeSet<SignalKind> {
    BTreeSet::from([SignalKind::Click])
}

/// In-session pairs `(q_i, q_j)` with `i < j <= i + max_hops` where event `j`
/// scores at least `min_engagement`.
///
/// Sessions are visited in id order and events in time order; a repeated
/// `(source, target)` keeps its first evidence.
pub fn mine_in_session(
    log: &SessionLog,
    max_hops: usize,
    min_engagement: f64,
    weights: &SignalWeights,
) -> Result<Vec<QueryPair>> {
    if max_hops == 0 {
        return Err(Error::Input("max_hops must be at least 1".into()));
    }
    let mut sessions: Vec<_> = log.sessions().iter().collect();
    sessions.sort_by(|a, b| a.id.cmp(&b.id));
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut out = Vec::new();
    for session in sessions {
        let events = &session.events;
        let engaged: Vec<bool> = events
            .iter()
            .map(|e| Ok(engagement_score(e, weights)? >= min_engagement))
            .collect::<Result<_>>()?;
        let queries: Vec<String> = events.iter().map(|e| e.query()).collect();
        for i in 0..events.len() {
            for j in i + 1..events.len().min(i + max_hops + 1) {
                if !engaged[j] || queries[i] == queries[j] {
                    continue;
                }
                if seen.insert((queries[i].clone(), queries[j].clone())) {
                    out.push(QueryPair::new(
                        &queries[i],
                        &queries[j],
                        Evidence::InSession {
                            session_id: session.id.clone(),
                            hops: j - i,
                        },
                    )?);
                }
            }
        }
    }
    Ok(out)
}

/// Cross-session co-engaged pairs: at least `min_shared` common items and
/// issued in two different sessions. Emitted once each, lexicographically
/// ordered `(source < target)`.
pub fn mine_cross_session_coengaged(
    graph: &CoClickGraph,
    log: &SessionLog,
    min_shared: usize,
) -> Result<Vec<QueryPair>> {
    if min_shared == 0 {
        return Err(Error::Input("min_shared must be at least 1".into()));
    }
    let mut sessions: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    for ev in log.events() {
        sessions
            .entry(ev.query())
            .or_default()
            .insert(&ev.session_id);
    }
    let empty = BTreeSet::new();
    let mut out = Vec::new();
    for ((a, b), items) in graph.shared_by_pair() {
        if items.len() < min_shared {
            continue;
        }
        let sa = sessions.get(a).unwrap_or(&empty);
        let sb = sessions.get(b).unwrap_or(&empty);
        if !in_different_sessions(sa, sb) {
            continue;
        }
        out.push(QueryPair::new(
            a,
            b,
            Evidence::CoEngaged {
                shared_items: items.iter().map(|s| s.to_string()).collect(),
            },
        )?);
    }
    Ok(out)
}

/// True when some session of `a` differs from some session of `b`.
fn in_different_sessions(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> bool {
    match (a.len(), b.len()) {
        (0, _) | (_, 0) => false,
        (1, 1) => a != b,
        _ => true,
    }
}

/// One-hop pairs: `q1` and `q2` share no item but are each co-engaged with a
/// bridge query (at least `min_shared` items per hop).
///
/// Among several bridges the lexicographically smallest is recorded, with
/// the smallest witnessing item on each hop.
pub fn mine_cross_session_onehop(
    graph: &CoClickGraph,
    min_shared: usize,
) -> Result<Vec<QueryPair>> {
    if min_shared == 0 {
        return Err(Error::Input("min_shared must be at least 1".into()));
    }
    let shared = graph.shared_by_pair();
    let mut neighbours: BTreeMap<&str, BTreeMap<&str, &str>> = BTreeMap::new();
    for (&(a, b), items) in &shared {
        if items.len() >= min_shared {
            neighbours.entry(a).or_default().insert(b, items[0]);
            neighbours.entry(b).or_default().insert(a, items[0]);
        }
    }
    let mut found: BTreeMap<(&str, &str), Evidence> = BTreeMap::new();
    for (bridge, around) in &neighbours {
        let around: Vec<(&str, &str)> = around.iter().map(|(q, i)| (*q, *i)).collect();
        for (i, &(a, via_a)) in around.iter().enumerate() {
            for &(b, via_b) in &around[i + 1..] {
                if shared.contains_key(&(a, b)) {
                    continue;
                }
                found.entry((a, b)).or_insert_with(|| Evidence::OneHop {
                    bridge: bridge.to_string(),
                    source_item: via_a.to_owned(),
                    target_item: via_b.to_owned(),
                });
            }
        }
    }
    found
        .into_iter()
        .map(|((a, b), ev)| QueryPair::new(a, b, ev))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinerSettings {
    pub max_hops: usize,
    pub min_engagement: f64,
    pub min_shared: usize,
    pub signals: BTreeSet<SignalKind>,
}

impl Default for MinerSettings {
    fn default() -> Self {
        Self {
            max_hops: DEFAULT_MAX_HOPS,
            min_engagement: DEFAULT_MIN_ENGAGEMENT,
            min_shared: DEFAULT_MIN_SHARED,
            signals: default_signal_filter(),
        }
    }
}

/// Runs all three miners; output is in-session, then co-engaged, then
/// one-hop pairs, each in its own canonical order.
pub fn mine_all(
    log: &SessionLog,
    settings: &MinerSettings,
    weights: &SignalWeights,
) -> Result<Vec<QueryPair>> {
    if settings.signals.is_empty() {
        return Err(Error::Config("signal filter must not be empty".into()));
    }
    let graph = build_coclick_graph(log, &settings.signals);
    let mut pairs = mine_in_session(log, settings.max_hops, settings.min_engagement, weights)?;
    pairs.extend(mine_cross_session_coengaged(
        &graph,
        log,
        settings.min_shared,
    )?);
    pairs.extend(mine_cross_session_onehop(&graph, settings.min_shared)?);
    Ok(pairs)
}

/// Writes `provenance \t source \t target \t evidence` lines.
pub fn write_pairs(pairs: &[QueryPair], mut w: impl Write) -> std::io::Result<()> {
    for p in pairs {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            p.provenance(),
            p.source_query,
            p.target_query,
            p.evidence.encode()
        )?;
    }
    Ok(())
}

pub fn read_pairs(reader: impl BufRead, origin: &Path) -> Result<Vec<QueryPair>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let start = offset;
        offset += line.len() + 1;
        out.push(parse_pair_fields(&line).map_err(|m| Error::parse(origin, i + 1, start, m))?);
    }
    Ok(out)
}

pub(crate) fn parse_pair_fields(line: &str) -> std::result::Result<QueryPair, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    let [prov, source, target, evidence] = cols[..] else {
        return Err(format!(
            "expected 4 tab-separated fields, got {}",
            cols.len()
        ));
    };
    let prov: Provenance = prov.parse()?;
    let evidence = Evidence::decode(prov, evidence)?;
    QueryPair::new(source, target, evidence).map_err(|e| e.to_string())
}
