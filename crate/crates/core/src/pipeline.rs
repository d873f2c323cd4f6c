//! Stage runners behind the `qref` subcommands, and their shared config.
//!
//! Every stage reads its inputs, refuses to clobber existing outputs unless
//! `force` is set, and writes deterministic files: the same inputs and seed
//! always produce the same bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineConfig, BaselineKind};
use crate::corpus::{
    generate_synthetic_log, load_log, write_log, write_manifest, GeneratorSpec, LogFormat,
    NormalizeConfig, SignalWeights, Taxonomy,
};
use crate::intents::{
    bucketize, export_dataset, manifest_path, read_bucketed, read_inventory, write_bucketed,
    write_inventory, write_rejections, AspectLexicon, BucketCounts, IntentContext,
    IntentThresholds, QueryCategories, RetrievalIndex,
};
use crate::metrics::{evaluate_at_k, read_predictions, render_tables, NamedReport};
use crate::miner::{mine_all, read_pairs, write_pairs, MinerSettings, Provenance};
use crate::{Error, Result};

pub const LOG_FILE: &str = "log.jsonl";
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const TAXONOMY_FILE: &str = "taxonomy.toml";
pub const INVENTORY_FILE: &str = "inventory.tsv";
pub const PAIRS_FILE: &str = "pairs.tsv";
pub const BUCKETED_FILE: &str = "bucketed.tsv";
pub const REJECTIONS_FILE: &str = "rejections.tsv";
pub const DATASET_FILE: &str = "dataset.tsv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";

/// Input locations. Relative paths are taken from the config file's
/// directory; unset inputs default to the file of the same role that
/// `gen` writes into the work directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inventory: Option<PathBuf>,
    /// `query \t category` lines; when unset, categories come from the log.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub categories: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workdir: Option<PathBuf>,
}

/// Baseline settings; the seed is the pipeline seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub kind: BaselineKind,
    pub max_drop_fraction: f64,
    pub min_tokens_to_drop_from: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        let d = BaselineConfig::default();
        BaselineSection {
            kind: d.kind,
            max_drop_fraction: d.max_drop_fraction,
            min_tokens_to_drop_from: d.min_tokens_to_drop_from,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { k: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub normalize: NormalizeConfig,
    pub signals: SignalWeights,
    pub miner: MinerSettings,
    pub intents: IntentThresholds<f64>,
    pub baseline: BaselineSection,
    pub eval: EvalSection,
    /// Directory relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            paths: PathsConfig::default(),
            normalize: NormalizeConfig::default(),
            signals: SignalWeights::default(),
            miner: MinerSettings::default(),
            intents: IntentThresholds::default(),
            baseline: BaselineSection::default(),
            eval: EvalSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.signals.validate()?;
        if self.miner.max_hops == 0 {
            return Err(Error::Config("miner.max_hops must be at least 1".into()));
        }
        if self.miner.min_shared == 0 {
            return Err(Error::Config("miner.min_shared must be at least 1".into()));
        }
        if !self.miner.min_engagement.is_finite() || self.miner.min_engagement < 0.0 {
            return Err(Error::Config(
                "miner.min_engagement must be finite and non-negative".into(),
            ));
        }
        if self.miner.signals.is_empty() {
            return Err(Error::Config("miner.signals must not be empty".into()));
        }
        for s in &self.miner.signals {
            self.signals.weight(s)?;
        }
        self.intents.validate()?;
        self.baseline_config().validate()?;
        if self.eval.k == 0 {
            return Err(Error::Config("eval.k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn baseline_config(&self) -> BaselineConfig {
        BaselineConfig {
            kind: self.baseline.kind,
            seed: self.seed,
            max_drop_fraction: self.baseline.max_drop_fraction,
            min_tokens_to_drop_from: self.baseline.min_tokens_to_drop_from,
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn workdir(&self) -> PathBuf {
        self.resolve(self.paths.workdir.as_deref().unwrap_or(Path::new(".")))
    }

    fn input_or_work(&self, p: &Option<PathBuf>, default: &str) -> PathBuf {
        match p {
            Some(p) => self.resolve(p),
            None => self.workdir().join(default),
        }
    }

    pub fn generator_path(&self) -> Result<PathBuf> {
        self.paths
            .generator
            .as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| Error::Config("paths.generator is not set".into()))
    }

    pub fn log_path(&self) -> PathBuf {
        self.input_or_work(&self.paths.log, LOG_FILE)
    }

    pub fn taxonomy_path(&self) -> PathBuf {
        self.input_or_work(&self.paths.taxonomy, TAXONOMY_FILE)
    }

    pub fn inventory_path(&self) -> PathBuf {
        self.input_or_work(&self.paths.inventory, INVENTORY_FILE)
    }

    pub fn lexicon_path(&self) -> Option<PathBuf> {
        self.paths.lexicon.as_deref().map(|p| self.resolve(p))
    }

    pub fn categories_path(&self) -> Option<PathBuf> {
        self.paths.categories.as_deref().map(|p| self.resolve(p))
    }
}

/// Fails with a config error naming the first missing input.
pub fn require_inputs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(Error::Config(format!(
                "input file {} does not exist",
                p.display()
            )));
        }
    }
    Ok(())
}

/// Fails if any output already exists and `force` is off.
pub fn check_outputs(paths: &[&Path], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    for p in paths {
        if p.exists() {
            return Err(Error::Validation(format!(
                "output {} already exists (pass --force to overwrite)",
                p.display()
            )));
        }
    }
    Ok(())
}

fn ensure_parent(p: &Path) -> Result<()> {
    match p.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    ensure_parent(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value).expect("serializable value");
    json.push('\n');
    ensure_parent(path)?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// `query \t category` lines.
pub fn read_categories(path: &Path, cfg: &NormalizeConfig) -> Result<QueryCategories> {
    let mut out = QueryCategories::default();
    let mut offset = 0;
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let start = offset;
        offset += line.len() + 1;
        let Some((q, c)) = line.split_once('\t') else {
            return Err(Error::parse(
                path,
                i + 1,
                start,
                "expected query and category",
            ));
        };
        let tokens = crate::corpus::normalize(q, cfg);
        if tokens.is_empty() || c.trim().is_empty() {
            return Err(Error::parse(path, i + 1, start, "empty query or category"));
        }
        out.insert(tokens.join(" "), c.trim());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenSummary {
    pub sessions: usize,
    pub events: usize,
    pub planted: usize,
    pub inventory: usize,
}

/// Writes the synthetic log, planted-pair manifest, taxonomy and inventory
/// into `out_dir`.
pub fn cmd_gen(spec: &Path, seed: u64, out_dir: &Path, force: bool) -> Result<GenSummary> {
    require_inputs(&[spec])?;
    let outputs = [LOG_FILE, MANIFEST_FILE, TAXONOMY_FILE, INVENTORY_FILE].map(|f| out_dir.join(f));
    check_outputs(
        &outputs.iter().map(PathBuf::as_path).collect::<Vec<_>>(),
        force,
    )?;
    let spec = GeneratorSpec::load(spec)?;
    let synth = generate_synthetic_log(&spec, seed)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_log(&synth.log, &outputs[0], LogFormat::JsonLines)?;
    write_manifest(&synth.manifest, &outputs[1])?;
    std::fs::write(&outputs[2], synth.taxonomy.to_toml()).map_err(|e| Error::io(&outputs[2], e))?;
    write_file(&outputs[3], |w| {
        write_inventory(&synth.inventory, w).map_err(|e| Error::io(&outputs[3], e))
    })?;
    Ok(GenSummary {
        sessions: synth.log.sessions().len(),
        events: synth.log.len(),
        planted: synth.manifest.len(),
        inventory: synth.inventory.len(),
    })
}

/// `pairs.tsv` -> `pairs.counts.json`.
pub fn counts_path(pairs: &Path) -> PathBuf {
    pairs.with_extension("counts.json")
}

/// Runs all three miners and writes the pairs file plus per-miner counts.
pub fn cmd_mine(
    log: &Path,
    cfg: &PipelineConfig,
    out: &Path,
    force: bool,
) -> Result<BTreeMap<String, usize>> {
    require_inputs(&[log])?;
    let counts_file = counts_path(out);
    check_outputs(&[out, &counts_file], force)?;
    let log = load_log(log, LogFormat::JsonLines, &cfg.normalize)?;
    let pairs = mine_all(&log, &cfg.miner, &cfg.signals)?;
    let mut counts: BTreeMap<String, usize> = [
        Provenance::InSession,
        Provenance::CrossSessionCoEngaged,
        Provenance::CrossSessionOneHop,
    ]
    .iter()
    .map(|p| (p.as_str().to_owned(), 0))
    .collect();
    for p in &pairs {
        *counts
            .get_mut(p.provenance().as_str())
            .expect("known provenance") += 1;
    }
    write_file(out, |w| {
        write_pairs(&pairs, w).map_err(|e| Error::io(out, e))
    })?;
    write_json(&counts_file, &counts)?;
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BucketizeSummary {
    pub accepted: BucketCounts,
    pub rejected: BTreeMap<String, usize>,
}

/// Loads taxonomy, lexicon, inventory and query categories named by `cfg`.
pub fn intent_context(cfg: &PipelineConfig) -> Result<IntentContext<f64>> {
    let taxonomy_path = cfg.taxonomy_path();
    let inventory_path = cfg.inventory_path();
    let lexicon_path = cfg
        .lexicon_path()
        .ok_or_else(|| Error::Config("paths.lexicon is not set".into()))?;
    let categories_path = cfg.categories_path();
    let log_path = cfg.log_path();
    let source = categories_path.as_deref().unwrap_or(&log_path);
    require_inputs(&[&taxonomy_path, &inventory_path, &lexicon_path, source])?;

    let taxonomy = Taxonomy::load(&taxonomy_path)?;
    let lexicon = AspectLexicon::load(&lexicon_path)?;
    let index = RetrievalIndex::new(read_inventory(open(&inventory_path)?, &inventory_path)?)?;
    let categories = match &categories_path {
        Some(p) => read_categories(p, &cfg.normalize)?,
        None => {
            let log = load_log(&log_path, LogFormat::JsonLines, &cfg.normalize)?;
            log.validate_categories(&taxonomy)?;
            QueryCategories::from_log(&log)
        }
    };
    Ok(IntentContext {
        taxonomy,
        lexicon,
        index,
        categories,
        thresholds: cfg.intents.clone(),
    })
}

/// Buckets mined pairs; writes accepted pairs and a rejection log.
pub fn cmd_bucketize(
    pairs: &Path,
    cfg: &PipelineConfig,
    out: &Path,
    rejections: &Path,
    force: bool,
) -> Result<BucketizeSummary> {
    require_inputs(&[pairs])?;
    check_outputs(&[out, rejections], force)?;
    let ctx = intent_context(cfg)?;
    let mined = read_pairs(open(pairs)?, pairs)?;
    let (accepted, rejected) = bucketize(mined, &ctx)?;
    write_file(out, |w| write_bucketed(&accepted, w))?;
    write_file(rejections, |w| write_rejections(&rejected, w))?;

    let mut summary = BucketizeSummary {
        accepted: BucketCounts::default(),
        rejected: BTreeMap::new(),
    };
    for p in &accepted {
        match p.bucket.expect("accepted pairs carry a bucket") {
            crate::IntentBucket::SameIntent => summary.accepted.same += 1,
            crate::IntentBucket::SimilarIntent => summary.accepted.similar += 1,
            crate::IntentBucket::InspiredIntent => summary.accepted.inspired += 1,
        }
    }
    for (_, r) in &rejected {
        *summary.rejected.entry(r.as_str().to_owned()).or_default() += 1;
    }
    Ok(summary)
}

/// Writes the intent-tagged dataset and its manifest.
pub fn cmd_export(bucketed: &Path, out: &Path, force: bool) -> Result<BucketCounts> {
    require_inputs(&[bucketed])?;
    check_outputs(&[out, &manifest_path(out)], force)?;
    let pairs = read_bucketed(open(bucketed)?, bucketed)?;
    ensure_parent(out)?;
    export_dataset(&pairs, out)
}

/// Default predictions file name for a baseline kind.
pub fn predictions_file(kind: BaselineKind) -> &'static str {
    match kind {
        BaselineKind::RandomDrop => "predictions.random_drop.tsv",
        BaselineKind::Identity => "predictions.identity.tsv",
    }
}

pub fn cmd_baseline(
    dataset: &Path,
    cfg: &BaselineConfig,
    out: &Path,
    force: bool,
) -> Result<usize> {
    require_inputs(&[dataset])?;
    check_outputs(&[out], force)?;
    ensure_parent(out)?;
    run_baseline(dataset, cfg, out)
}

/// Scores each named predictions file at `k` and writes `report.json`
/// (structured) and `report.txt` (rendered tables).
pub fn cmd_eval(
    predictions: &[(String, PathBuf)],
    k: usize,
    out_json: &Path,
    out_txt: &Path,
    force: bool,
) -> Result<Vec<NamedReport<f64>>> {
    if predictions.is_empty() {
        return Err(Error::Input("no predictions files given".into()));
    }
    let inputs: Vec<&Path> = predictions.iter().map(|(_, p)| p.as_path()).collect();
    require_inputs(&inputs)?;
    check_outputs(&[out_json, out_txt], force)?;
    let mut reports = Vec::new();
    for (model, path) in predictions {
        let instances = read_predictions(open(path)?, path)?;
        if instances.is_empty() {
            return Err(Error::Validation(format!(
                "{} has no predictions",
                path.display()
            )));
        }
        reports.push(NamedReport {
            model: model.clone(),
            report: evaluate_at_k(&instances, k)?,
        });
    }
    write_json(out_json, &reports)?;
    ensure_parent(out_txt)?;
    std::fs::write(out_txt, render_tables(&reports)).map_err(|e| Error::io(out_txt, e))?;
    Ok(reports)
}
