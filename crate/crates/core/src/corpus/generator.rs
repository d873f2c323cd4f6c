use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_identifier, normalize, Engagement, NormalizeConfig, SessionEvent, SessionLog, SignalKind,
    Taxonomy,
};
use crate::intents::InventoryItem;
use crate::miner::Provenance;
use crate::{Error, Result};

const FRESH_ATTEMPTS: usize = 200;

/// Vocabulary of one leaf category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategorySpec {
    pub id: String,
    /// Meta category (child of the taxonomy root) this leaf sits under.
    pub meta: String,
    #[serde(default)]
    pub brands: Vec<String>,
    /// Head phrases; every query has exactly one.
    pub products: Vec<String>,
    #[serde(default)]
    pub modifiers: Vec<String>,
}

/// What a synthetic log should look like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Total sessions, planted patterns included.
    pub sessions: usize,
    #[serde(default = "default_root")]
    pub root: String,
    /// Sessions whose last query is engaged after 1 to 3 reformulations.
    #[serde(default)]
    pub in_session_chains: usize,
    /// Groups of `clique_size` queries, each issued in its own session and
    /// clicking the same items.
    #[serde(default)]
    pub coclick_cliques: usize,
    #[serde(default = "default_clique_size")]
    pub clique_size: usize,
    /// Query triples `q1 - x - bridge - y - q2` spread over three sessions.
    #[serde(default)]
    pub twohop_bridges: usize,
    /// Inclusive range of events in a background session.
    #[serde(default = "default_noise_events")]
    pub noise_events: [usize; 2],
    #[serde(default = "default_items")]
    pub items_per_category: usize,
    /// Chance a background event clicks anything.
    #[serde(default = "default_click_probability")]
    pub click_probability: f64,
    pub categories: Vec<CategorySpec>,
}

fn default_root() -> String {
    "all".into()
}
fn default_clique_size() -> usize {
    3
}
fn default_noise_events() -> [usize; 2] {
    [1, 4]
}
fn default_items() -> usize {
    12
}
fn default_click_probability() -> f64 {
    0.6
}

impl GeneratorSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    fn planted_sessions(&self) -> usize {
        self.in_session_chains + self.coclick_cliques * self.clique_size + self.twohop_bridges * 3
    }

    fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Spec(m));
        if self.sessions == 0 {
            return err("sessions must be at least 1".into());
        }
        if self.categories.is_empty() {
            return err("vocabulary is empty: no categories".into());
        }
        if self.planted_sessions() > self.sessions {
            return err(format!(
                "planted patterns need {} sessions but only {} requested",
                self.planted_sessions(),
                self.sessions
            ));
        }
        if self.clique_size < 2 {
            return err("clique_size must be at least 2".into());
        }
        let [lo, hi] = self.noise_events;
        if lo == 0 || lo > hi {
            return err(format!("noise_events range [{lo}, {hi}] is invalid"));
        }
        if self.items_per_category == 0 {
            return err("items_per_category must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.click_probability) {
            return err("click_probability must lie in [0, 1]".into());
        }
        let leaves: BTreeSet<&str> = self.categories.iter().map(|c| c.id.as_str()).collect();
        if leaves.len() != self.categories.len() {
            return err("duplicate category id".into());
        }
        for c in &self.categories {
            check_identifier("category", &c.id).map_err(Error::Spec)?;
            check_identifier("meta category", &c.meta).map_err(Error::Spec)?;
            if leaves.contains(c.meta.as_str()) || c.meta == self.root || c.id == self.root {
                return err(format!(
                    "category {:?} clashes with its meta or the root",
                    c.id
                ));
            }
            if c.products.iter().all(|p| tokens(p).is_empty()) {
                return err(format!(
                    "vocabulary is empty: category {:?} has no products",
                    c.id
                ));
            }
        }
        Ok(())
    }

    pub fn taxonomy(&self) -> Result<Taxonomy> {
        let mut links = Vec::new();
        for c in &self.categories {
            links.push((c.meta.clone(), self.root.clone()));
            links.push((c.id.clone(), c.meta.clone()));
        }
        Taxonomy::new(self.root.clone(), links).map_err(|e| Error::Spec(e.to_string()))
    }
}

/// A pair the generator guarantees to be minable from its log.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PlantedPair {
    pub provenance: Provenance,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone)]
pub struct SyntheticLog {
    pub log: SessionLog,
    /// Sorted, duplicate-free.
    pub manifest: Vec<PlantedPair>,
    pub taxonomy: Taxonomy,
    /// Every item the log engages, sorted by id.
    pub inventory: Vec<InventoryItem>,
}

fn tokens(s: &str) -> Vec<String> {
    normalize(s, &NormalizeConfig::default())
}

/// A composed query: optional brand, one product phrase, some modifiers.
#[derive(Debug, Clone)]
struct Draft {
    brand: Option<usize>,
    product: usize,
    mods: Vec<usize>,
}

struct Builder<'a> {
    spec: &'a GeneratorSpec,
    rng: ChaCha8Rng,
    used: BTreeSet<String>,
    inventory: BTreeMap<String, InventoryItem>,
    planted_items: usize,
}

type RawEvent = (String, String, Vec<Engagement>);

impl<'a> Builder<'a> {
    fn render(&self, cat: &CategorySpec, d: &Draft) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if let Some(b) = d.brand {
            parts.push(&cat.brands[b]);
        }
        parts.push(&cat.products[d.product]);
        parts.extend(d.mods.iter().map(|&m| cat.modifiers[m].as_str()));
        parts.join(" ")
    }

    fn random_draft(&mut self, cat: &CategorySpec) -> Draft {
        let brand = (!cat.brands.is_empty() && self.rng.gen_bool(0.8))
            .then(|| self.rng.gen_range(0..cat.brands.len()));
        let product = self.rng.gen_range(0..cat.products.len());
        let n_mods = self.rng.gen_range(0..=2.min(cat.modifiers.len()));
        let mut mods: Vec<usize> = (0..cat.modifiers.len()).collect();
        mods.shuffle(&mut self.rng);
        mods.truncate(n_mods);
        mods.sort_unstable();
        Draft {
            brand,
            product,
            mods,
        }
    }

    /// Reserves the rendered draft if its normalized form is unused.
    fn claim(&mut self, cat: &CategorySpec, d: &Draft) -> Option<String> {
        let raw = self.render(cat, d);
        let key = tokens(&raw).join(" ");
        (!key.is_empty() && self.used.insert(key)).then_some(raw)
    }

    fn fresh(&mut self, cat: &CategorySpec) -> Result<(Draft, String)> {
        for _ in 0..FRESH_ATTEMPTS {
            let d = self.random_draft(cat);
            if let Some(raw) = self.claim(cat, &d) {
                return Ok((d, raw));
            }
        }
        Err(Error::Spec(format!(
            "vocabulary of category {:?} is exhausted; add products or modifiers",
            cat.id
        )))
    }

    /// A small edit of `d` (add, drop or swap one part), falling back to a
    /// fresh query when no unused edit turns up.
    fn reformulate(&mut self, cat: &CategorySpec, d: &Draft) -> Result<(Draft, String)> {
        for _ in 0..FRESH_ATTEMPTS {
            let mut next = d.clone();
            match self.rng.gen_range(0..4) {
                0 if !cat.modifiers.is_empty() => {
                    let m = self.rng.gen_range(0..cat.modifiers.len());
                    if !next.mods.contains(&m) {
                        next.mods.push(m);
                        next.mods.sort_unstable();
                    }
                }
                1 if !next.mods.is_empty() => {
                    let i = self.rng.gen_range(0..next.mods.len());
                    next.mods.remove(i);
                }
                2 => next.product = self.rng.gen_range(0..cat.products.len()),
                _ if !cat.brands.is_empty() => {
                    next.brand = Some(self.rng.gen_range(0..cat.brands.len()))
                }
                _ => continue,
            }
            if let Some(raw) = self.claim(cat, &next) {
                return Ok((next, raw));
            }
        }
        self.fresh(cat)
    }

    /// A new item only the planted pattern will ever engage.
    fn planted_item(&mut self, cat: &CategorySpec, title: &str) -> String {
        self.planted_items += 1;
        let id = format!("{}-p{:04}", cat.id, self.planted_items);
        self.inventory.insert(
            id.clone(),
            InventoryItem {
                id: id.clone(),
                category: cat.id.clone(),
                tokens: tokens(title),
            },
        );
        id
    }

    fn pick_category(&mut self) -> &'a CategorySpec {
        let spec = self.spec;
        spec.categories.choose(&mut self.rng).unwrap()
    }
}

fn click(item: String) -> Engagement {
    Engagement {
        item,
        signal: SignalKind::Click,
    }
}

fn canonical(p: Provenance, a: &str, b: &str) -> PlantedPair {
    let (s, t) = if a <= b { (a, b) } else { (b, a) };
    PlantedPair {
        provenance: p,
        source: s.to_owned(),
        target: t.to_owned(),
    }
}

/// Generates a log with planted reformulation patterns on top of random
/// background traffic. Same `(spec, seed)` always gives the same output.
///
/// Planted queries and items are reserved: background sessions never issue
/// a planted query or engage a planted item, so every manifest pair keeps
/// its defining property in the final log.
pub fn generate_synthetic_log(spec: &GeneratorSpec, seed: u64) -> Result<SyntheticLog> {
    spec.validate()?;
    let taxonomy = spec.taxonomy()?;
    let mut b = Builder {
        spec,
        rng: ChaCha8Rng::seed_from_u64(seed),
        used: BTreeSet::new(),
        inventory: BTreeMap::new(),
        planted_items: 0,
    };
    let mut sessions: Vec<Vec<RawEvent>> = Vec::new();
    let mut manifest = BTreeSet::new();
    let key = |raw: &str| tokens(raw).join(" ");

    for _ in 0..spec.in_session_chains {
        let cat = b.pick_category();
        let len = b.rng.gen_range(2..=4);
        let (mut draft, raw) = b.fresh(cat)?;
        let mut chain = vec![raw];
        while chain.len() < len {
            let (next, raw) = b.reformulate(cat, &draft)?;
            draft = next;
            chain.push(raw);
        }
        let target = chain.last().unwrap().clone();
        let item = b.planted_item(cat, &target);
        let mut events: Vec<RawEvent> = chain
            .iter()
            .map(|q| (q.clone(), cat.id.clone(), Vec::new()))
            .collect();
        events.last_mut().unwrap().2.push(click(item));
        for src in &chain[..chain.len() - 1] {
            manifest.insert(PlantedPair {
                provenance: Provenance::InSession,
                source: key(src),
                target: key(&target),
            });
        }
        sessions.push(events);
    }

    for _ in 0..spec.coclick_cliques {
        let cat = b.pick_category();
        let (mut draft, first) = b.fresh(cat)?;
        let mut queries = vec![first];
        while queries.len() < spec.clique_size {
            let (next, raw) = b.reformulate(cat, &draft)?;
            draft = next;
            queries.push(raw);
        }
        let shared: Vec<String> = (0..2).map(|_| b.planted_item(cat, &queries[0])).collect();
        for (i, q) in queries.iter().enumerate() {
            let engs = shared.iter().cloned().map(click).collect();
            sessions.push(vec![(q.clone(), cat.id.clone(), engs)]);
            for other in &queries[i + 1..] {
                manifest.insert(canonical(
                    Provenance::CrossSessionCoEngaged,
                    &key(q),
                    &key(other),
                ));
            }
        }
    }

    for _ in 0..spec.twohop_bridges {
        let cat_a = b.pick_category();
        let cat_b = b.pick_category();
        let (bridge_draft, bridge) = b.fresh(cat_a)?;
        let (_, left) = b.reformulate(cat_a, &bridge_draft)?;
        let (_, right) = b.fresh(cat_b)?;
        let x = b.planted_item(cat_a, &left);
        let y = b.planted_item(cat_b, &right);
        sessions.push(vec![(
            left.clone(),
            cat_a.id.clone(),
            vec![click(x.clone())],
        )]);
        sessions.push(vec![(
            bridge.clone(),
            cat_a.id.clone(),
            vec![click(x), click(y.clone())],
        )]);
        sessions.push(vec![(right.clone(), cat_b.id.clone(), vec![click(y)])]);
        let (l, m, r) = (key(&left), key(&bridge), key(&right));
        manifest.insert(canonical(Provenance::CrossSessionOneHop, &l, &r));
        manifest.insert(canonical(Provenance::CrossSessionCoEngaged, &l, &m));
        manifest.insert(canonical(Provenance::CrossSessionCoEngaged, &m, &r));
    }

    // background inventory and traffic
    let mut stock: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for cat in &spec.categories {
        let ids = stock.entry(cat.id.as_str()).or_default();
        for n in 0..spec.items_per_category {
            let d = b.random_draft(cat);
            let id = format!("{}-{:04}", cat.id, n + 1);
            b.inventory.insert(
                id.clone(),
                InventoryItem {
                    id: id.clone(),
                    category: cat.id.clone(),
                    tokens: tokens(&b.render(cat, &d)),
                },
            );
            ids.push(id);
        }
    }
    let mut pools: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for _ in sessions.len()..spec.sessions {
        let n_events = b.rng.gen_range(spec.noise_events[0]..=spec.noise_events[1]);
        let mut events = Vec::with_capacity(n_events);
        for _ in 0..n_events {
            let cat = b.pick_category();
            let pool = pools.entry(cat.id.as_str()).or_default();
            let reuse = !pool.is_empty() && b.rng.gen_bool(0.5);
            let raw = if reuse {
                pool.choose(&mut b.rng).unwrap().clone()
            } else {
                match b.fresh(cat) {
                    Ok((_, raw)) => {
                        pool.push(raw.clone());
                        raw
                    }
                    Err(e) if pool.is_empty() => return Err(e),
                    Err(_) => pool.choose(&mut b.rng).unwrap().clone(),
                }
            };
            let mut engs = Vec::new();
            if b.rng.gen_bool(spec.click_probability) {
                let items = &stock[cat.id.as_str()];
                let n = b.rng.gen_range(1..=2.min(items.len()));
                for item in items.choose_multiple(&mut b.rng, n) {
                    engs.push(click(item.clone()));
                    if b.rng.gen_bool(0.15) {
                        let signal = [SignalKind::Bid, SignalKind::AddToCart, SignalKind::Bought]
                            .choose(&mut b.rng)
                            .unwrap()
                            .clone();
                        engs.push(Engagement {
                            item: item.clone(),
                            signal,
                        });
                    }
                }
            }
            events.push((raw, cat.id.clone(), engs));
        }
        sessions.push(events);
    }

    sessions.shuffle(&mut b.rng);
    let width = spec.sessions.to_string().len().max(4);
    let mut events = Vec::new();
    for (i, session) in sessions.into_iter().enumerate() {
        let id = format!("s{i:0width$}");
        let mut ts = 1_000_000 + i as u64 * 100_000;
        for (raw, category, engagements) in session {
            ts += b.rng.gen_range(1_000..20_000);
            events.push(SessionEvent {
                session_id: id.clone(),
                ts,
                tokens: tokens(&raw),
                raw_query: raw,
                category,
                engagements,
            });
        }
    }

    Ok(SyntheticLog {
        log: SessionLog::from_events(events)?,
        manifest: manifest.into_iter().collect(),
        taxonomy,
        inventory: b.inventory.into_values().collect(),
    })
}

/// Writes the manifest as `provenance \t source \t target` lines.
pub fn write_manifest(manifest: &[PlantedPair], path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let res: std::io::Result<()> = (|| {
        for p in manifest {
            writeln!(w, "{}\t{}\t{}", p.provenance, p.source, p.target)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<PlantedPair>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let start = offset;
        offset += line.len() + 1;
        let cols: Vec<&str> = line.split('\t').collect();
        let [prov, source, target] = cols[..] else {
            return Err(Error::parse(
                path,
                i + 1,
                start,
                "expected 3 tab-separated fields",
            ));
        };
        let provenance = prov
            .parse()
            .map_err(|e: String| Error::parse(path, i + 1, start, e))?;
        out.push(PlantedPair {
            provenance,
            source: source.to_owned(),
            target: target.to_owned(),
        });
    }
    Ok(out)
}
