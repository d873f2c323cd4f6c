use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Category tree. Leaves are the categories queries are filed under; the
/// children of the root are meta categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    root: String,
    parent: BTreeMap<String, String>,
    children: BTreeMap<String, BTreeSet<String>>,
}

/// On-disk form: the root id plus a `child = parent` table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyFile {
    root: String,
    parents: BTreeMap<String, String>,
}

impl Taxonomy {
    /// Builds and validates a tree from `(child, parent)` links.
    pub fn new(
        root: impl Into<String>,
        links: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let root = root.into();
        let mut parent = BTreeMap::new();
        for (child, p) in links {
            if child == root {
                return Err(Error::Validation(format!(
                    "root {root:?} cannot have a parent"
                )));
            }
            if let Some(prev) = parent.insert(child.clone(), p.clone()) {
                if prev != p {
                    return Err(Error::Validation(format!(
                        "category {child:?} has two parents: {prev:?} and {p:?}"
                    )));
                }
            }
        }
        let mut children: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (child, p) in &parent {
            if p != &root && !parent.contains_key(p) {
                return Err(Error::Validation(format!(
                    "category {child:?} has unknown parent {p:?}"
                )));
            }
            children.entry(p.clone()).or_default().insert(child.clone());
        }
        // every node must reach the root; a cycle would never get there
        for start in parent.keys() {
            let mut node = start;
            let mut steps = 0;
            while node != &root {
                node = &parent[node];
                steps += 1;
                if steps > parent.len() {
                    return Err(Error::Validation(format!(
                        "category {start:?} is on a cycle"
                    )));
                }
            }
        }
        Ok(Self {
            root,
            parent,
            children,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: TaxonomyFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("taxonomy: {e}")))?;
        Self::new(file.root, file.parents)
    }

    pub fn to_toml(&self) -> String {
        let file = TaxonomyFile {
            root: self.root.clone(),
            parents: self.parent.clone(),
        };
        toml::to_string(&file).expect("taxonomy serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn contains(&self, id: &str) -> bool {
        id == self.root || self.parent.contains_key(id)
    }

    pub fn parent(&self, id: &str) -> Option<&str> {
        self.parent.get(id).map(String::as_str)
    }

    pub fn is_leaf(&self, id: &str) -> bool {
        self.contains(id) && !self.children.contains_key(id)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &str> {
        self.parent
            .keys()
            .filter(|k| !self.children.contains_key(*k))
            .map(String::as_str)
    }

    /// The depth-1 ancestor of `id` (`id` itself when it sits directly under
    /// the root). `None` for the root and for unknown ids.
    pub fn meta_category(&self, id: &str) -> Option<&str> {
        let mut node = self.parent.get_key_value(id)?.0;
        loop {
            let p = &self.parent[node];
            if p == &self.root {
                return Some(node);
            }
            node = p;
        }
    }
}
