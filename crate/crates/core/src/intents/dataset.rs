use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{IntentBucket, RejectReason};
use crate::miner::{parse_pair_fields, QueryPair};
use crate::{Error, Result};

/// One training instance: intent tag, source, target.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DatasetRow {
    pub bucket: IntentBucket,
    pub source: String,
    pub target: String,
}

/// Per-bucket line counts, written next to the dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCounts {
    pub same: usize,
    pub similar: usize,
    pub inspired: usize,
}

impl BucketCounts {
    fn bump(&mut self, b: IntentBucket) {
        match b {
            IntentBucket::SameIntent => self.same += 1,
            IntentBucket::SimilarIntent => self.similar += 1,
            IntentBucket::InspiredIntent => self.inspired += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.same + self.similar + self.inspired
    }
}

/// Writes `tag \t source \t target` lines sorted by (bucket, source, target).
///
/// A pair mined by several strategies into the same bucket is written once.
pub fn write_dataset(pairs: &[QueryPair], mut w: impl Write) -> Result<BucketCounts> {
    let mut rows = BTreeSet::new();
    for p in pairs {
        let bucket = p.bucket.ok_or_else(|| {
            Error::Validation(format!(
                "pair {:?} -> {:?} has no intent bucket",
                p.source_query, p.target_query
            ))
        })?;
        rows.insert(DatasetRow {
            bucket,
            source: p.source_query.clone(),
            target: p.target_query.clone(),
        });
    }
    let mut counts = BucketCounts::default();
    let io = |e| Error::io("<dataset>", e);
    for r in &rows {
        writeln!(w, "{}\t{}\t{}", r.bucket.tag(), r.source, r.target).map_err(io)?;
        counts.bump(r.bucket);
    }
    Ok(counts)
}

/// `dataset.tsv` -> `dataset.manifest.json`.
pub fn manifest_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("manifest.json")
}

/// Writes the dataset and its sibling manifest of bucket counts.
pub fn export_dataset(pairs: &[QueryPair], path: &Path) -> Result<BucketCounts> {
    let mut buf = Vec::new();
    let counts = write_dataset(pairs, &mut buf)?;
    std::fs::write(path, &buf).map_err(|e| Error::io(path, e))?;
    let manifest = manifest_path(path);
    let mut json = serde_json::to_string_pretty(&counts).expect("counts serialize");
    json.push('\n');
    std::fs::write(&manifest, json).map_err(|e| Error::io(&manifest, e))?;
    Ok(counts)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRow>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let start = offset;
        offset += line.len() + 1;
        let fail = |m: String| Error::parse(path, i + 1, start, m);
        let cols: Vec<&str> = line.split('\t').collect();
        let [tag, source, target] = cols[..] else {
            return Err(fail(format!(
                "expected 3 tab-separated fields, got {}",
                cols.len()
            )));
        };
        let bucket = IntentBucket::from_tag(tag)
            .ok_or_else(|| fail(format!("unknown intent tag {tag:?}")))?;
        if source.trim().is_empty() || target.trim().is_empty() {
            return Err(fail("empty query".into()));
        }
        out.push(DatasetRow {
            bucket,
            source: source.to_owned(),
            target: target.to_owned(),
        });
    }
    Ok(out)
}

/// Bucketed pairs: `bucket \t provenance \t source \t target \t evidence`.
pub fn write_bucketed(pairs: &[QueryPair], mut w: impl Write) -> Result<()> {
    let io = |e| Error::io("<bucketed pairs>", e);
    for p in pairs {
        let bucket = p.bucket.ok_or_else(|| {
            Error::Validation(format!("pair {:?} has no intent bucket", p.source_query))
        })?;
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            bucket,
            p.provenance(),
            p.source_query,
            p.target_query,
            p.evidence.encode()
        )
        .map_err(io)?;
    }
    Ok(())
}

pub fn read_bucketed(reader: impl BufRead, origin: &Path) -> Result<Vec<QueryPair>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let start = offset;
        offset += line.len() + 1;
        let fail = |m: String| Error::parse(origin, i + 1, start, m);
        let (bucket, rest) = line
            .split_once('\t')
            .ok_or_else(|| fail("expected a bucket column".into()))?;
        let bucket: IntentBucket = bucket.parse().map_err(fail)?;
        let mut pair = parse_pair_fields(rest).map_err(fail)?;
        pair.bucket = Some(bucket);
        out.push(pair);
    }
    Ok(out)
}

/// Rejection log: `reason \t provenance \t source \t target \t evidence`.
pub fn write_rejections(rejected: &[(QueryPair, RejectReason)], mut w: impl Write) -> Result<()> {
    for (p, r) in rejected {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            r,
            p.provenance(),
            p.source_query,
            p.target_query,
            p.evidence.encode()
        )
        .map_err(|e| Error::io("<rejections>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::Evidence;

    fn bucketed(s: &str, t: &str, b: IntentBucket) -> QueryPair {
        let mut p = QueryPair::new(
            s,
            t,
            Evidence::CoEngaged {
                shared_items: vec!["x".into()],
            },
        )
        .unwrap();
        p.bucket = Some(b);
        p
    }

    #[test]
    fn empty_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.tsv");
        let counts = export_dataset(&[], &path).unwrap();
        assert_eq!(counts, BucketCounts::default());
        assert_eq!(std::fs::read(&path).unwrap(), b"");
        let manifest: BucketCounts =
            serde_json::from_str(&std::fs::read_to_string(manifest_path(&path)).unwrap()).unwrap();
        assert_eq!(manifest, BucketCounts::default());
    }

    #[test]
    fn one_per_bucket_sorted_by_bucket() {
        let pairs = vec![
            bucketed(
                "adidas adios pro 4",
                "nike ultrafly trail 12",
                IntentBucket::InspiredIntent,
            ),
            bucketed(
                "nike womens size 9",
                "nike womens air max size 9",
                IntentBucket::SimilarIntent,
            ),
            bucketed(
                "nike air jordan 4",
                "nike air jordan 11",
                IntentBucket::SameIntent,
            ),
        ];
        let mut buf = Vec::new();
        let counts = write_dataset(&pairs, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "<same>\tnike air jordan 4\tnike air jordan 11\n\
             <similar>\tnike womens size 9\tnike womens air max size 9\n\
             <inspired>\tadidas adios pro 4\tnike ultrafly trail 12\n"
        );
        assert_eq!(
            counts,
            BucketCounts {
                same: 1,
                similar: 1,
                inspired: 1
            }
        );
    }

    #[test]
    fn re_export_is_byte_identical_and_order_free() {
        let mut pairs = vec![
            bucketed("b", "c", IntentBucket::SameIntent),
            bucketed("a", "c", IntentBucket::SameIntent),
            bucketed("a", "b", IntentBucket::InspiredIntent),
            bucketed("a", "c", IntentBucket::SameIntent),
        ];
        let mut one = Vec::new();
        write_dataset(&pairs, &mut one).unwrap();
        pairs.reverse();
        let mut two = Vec::new();
        let counts = write_dataset(&pairs, &mut two).unwrap();
        assert_eq!(one, two);
        assert_eq!(counts.total(), 3);
    }

    #[test]
    fn unbucketed_pair_is_an_error() {
        let mut p = bucketed("a", "b", IntentBucket::SameIntent);
        p.bucket = None;
        assert!(matches!(
            write_dataset(&[p], Vec::new()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn dataset_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.tsv");
        export_dataset(
            &[bucketed("a b", "a c", IntentBucket::SimilarIntent)],
            &path,
        )
        .unwrap();
        let rows = read_dataset(&path).unwrap();
        assert_eq!(rows[0].bucket, IntentBucket::SimilarIntent);
        std::fs::write(&path, "<same>\ta\tb\n<weird>\ta\tb\n").unwrap();
        assert!(matches!(
            read_dataset(&path),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn bucketed_round_trip() {
        let pairs = vec![
            bucketed("a b", "a c", IntentBucket::SimilarIntent),
            bucketed("x", "y", IntentBucket::InspiredIntent),
        ];
        let mut buf = Vec::new();
        write_bucketed(&pairs, &mut buf).unwrap();
        assert_eq!(
            read_bucketed(buf.as_slice(), Path::new("b")).unwrap(),
            pairs
        );
    }
}
