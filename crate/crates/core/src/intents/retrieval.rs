use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::corpus::check_identifier;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InventoryItem {
    pub id: String,
    pub category: String,
    pub tokens: Vec<String>,
}

/// Inverted index over an item inventory.
#[derive(Debug, Clone, Default)]
pub struct RetrievalIndex {
    /// Sorted by id; postings refer to positions in this list.
    items: Vec<InventoryItem>,
    postings: BTreeMap<String, Vec<usize>>,
}

impl RetrievalIndex {
    pub fn new(items: impl IntoIterator<Item = InventoryItem>) -> Result<Self> {
        let mut items: Vec<InventoryItem> = items.into_iter().collect();
        items.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = items.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Validation(format!(
                "duplicate item id {:?}",
                w[0].id
            )));
        }
        let mut postings: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (pos, item) in items.iter().enumerate() {
            let distinct: BTreeSet<&String> = item.tokens.iter().collect();
            for t in distinct {
                postings.entry(t.clone()).or_default().push(pos);
            }
        }
        Ok(Self { items, postings })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[InventoryItem] {
        &self.items
    }
}

/// Top-`k` items by number of distinct query tokens they contain, ties
/// broken by item id. Items matching no token are never returned.
pub fn recall_set<'a, S: AsRef<str>>(
    tokens: &[S],
    index: &'a RetrievalIndex,
    k: usize,
) -> Result<Vec<&'a str>> {
    if k == 0 {
        return Err(Error::Input("recall set size k must be at least 1".into()));
    }
    let distinct: BTreeSet<&str> = tokens.iter().map(AsRef::as_ref).collect();
    let mut hits: BTreeMap<usize, usize> = BTreeMap::new();
    for t in distinct {
        for &pos in index.postings.get(t).into_iter().flatten() {
            *hits.entry(pos).or_default() += 1;
        }
    }
    let mut ranked: Vec<(usize, usize)> = hits.into_iter().collect();
    // positions follow id order, so sorting on position breaks ties by id
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked
        .into_iter()
        .take(k)
        .map(|(pos, _)| index.items[pos].id.as_str())
        .collect())
}

/// Jaccard overlap of the two top-`k` recall sets; 0 when both are empty.
pub fn recall_similarity<F: Scalar, S: AsRef<str>>(
    source: &[S],
    target: &[S],
    index: &RetrievalIndex,
    k: usize,
) -> Result<F> {
    let a: BTreeSet<&str> = recall_set(source, index, k)?.into_iter().collect();
    let b: BTreeSet<&str> = recall_set(target, index, k)?.into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return Ok(F::zero());
    }
    Ok(F::ratio(a.intersection(&b).count(), union))
}

/// Inventory file: `id \t category \t title` per line.
pub fn read_inventory(reader: impl BufRead, origin: &Path) -> Result<Vec<InventoryItem>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let start = offset;
        offset += line.len() + 1;
        let cols: Vec<&str> = line.split('\t').collect();
        let [id, category, title] = cols[..] else {
            return Err(Error::parse(
                origin,
                i + 1,
                start,
                "expected id, category and title",
            ));
        };
        check_identifier("item id", id).map_err(|m| Error::parse(origin, i + 1, start, m))?;
        out.push(InventoryItem {
            id: id.to_owned(),
            category: category.to_owned(),
            tokens: title.split_whitespace().map(str::to_owned).collect(),
        });
    }
    Ok(out)
}

pub fn write_inventory(items: &[InventoryItem], mut w: impl Write) -> std::io::Result<()> {
    for it in items {
        writeln!(w, "{}\t{}\t{}", it.id, it.category, it.tokens.join(" "))?;
    }
    Ok(())
}
