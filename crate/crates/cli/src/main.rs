use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qref_core::baselines::BaselineKind;
use qref_core::pipeline::{self, PipelineConfig};
use qref_core::{Error, ErrorKind};
use serde_json::json;

const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_VALIDATION: u8 = 4;
const EXIT_IO: u8 = 5;

/// Mine query reformulations from behavioral logs, bucket them by intent,
/// and evaluate reformulation models.
#[derive(Debug, Parser)]
#[command(name = "qref", version)]
struct Cli {
    /// Pipeline config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    /// Directory for stage outputs; overrides `paths.workdir`.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic session log with planted reformulations.
    Gen {
        /// Generator spec; defaults to `paths.generator`.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory; defaults to the work directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mine query pairs with all three strategies.
    Mine {
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sort mined pairs into intent buckets.
    Bucketize {
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        rejections: Option<PathBuf>,
    },
    /// Write the intent-tagged training dataset.
    Export {
        #[arg(long)]
        bucketed: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a reference reformulator over the dataset.
    Baseline {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `baseline.kind`.
        #[arg(long, value_parser = parse_kind)]
        kind: Option<BaselineKind>,
    },
    /// Score predictions files and render the report tables.
    Eval {
        /// `NAME=PATH` or `PATH` (named after the file). Defaults to the
        /// configured baseline's predictions in the work directory.
        predictions: Vec<String>,
        /// Candidates considered per instance; overrides `eval.k`.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<BaselineKind, String> {
    match s {
        "random_drop" => Ok(BaselineKind::RandomDrop),
        "identity" => Ok(BaselineKind::Identity),
        other => Err(format!(
            "unknown baseline kind {other:?} (random_drop, identity)"
        )),
    }
}

fn load_config(cli: &Cli) -> qref_core::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "config file {} does not exist",
                    p.display()
                )));
            }
            PipelineConfig::load(p)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = &cli.workdir {
        let cwd = std::env::current_dir().map_err(|e| Error::Io {
            path: ".".into(),
            source: e,
        })?;
        cfg.paths.workdir = Some(cwd.join(w));
    }
    Ok(cfg)
}

fn model_spec(raw: &str) -> (String, PathBuf) {
    match raw.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_owned(), PathBuf::from(path)),
        _ => {
            let p = PathBuf::from(raw);
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| raw.to_owned());
            (name, p)
        }
    }
}

fn or_work(p: &Option<PathBuf>, work: &Path, default: &str) -> PathBuf {
    p.clone().unwrap_or_else(|| work.join(default))
}

fn run(cli: &Cli) -> qref_core::Result<serde_json::Value> {
    let cfg = load_config(cli)?;
    let work = cfg.workdir();
    let force = cli.force;
    let value = match &cli.command {
        Command::Gen { spec, out } => {
            let spec = match spec {
                Some(s) => s.clone(),
                None => cfg.generator_path()?,
            };
            let out = out.clone().unwrap_or_else(|| work.clone());
            json!(pipeline::cmd_gen(&spec, cfg.seed, &out, force)?)
        }
        Command::Mine { log, out } => {
            let log = log.clone().unwrap_or_else(|| cfg.log_path());
            let out = or_work(out, &work, pipeline::PAIRS_FILE);
            json!(pipeline::cmd_mine(&log, &cfg, &out, force)?)
        }
        Command::Bucketize {
            pairs,
            out,
            rejections,
        } => {
            let pairs = or_work(pairs, &work, pipeline::PAIRS_FILE);
            let out = or_work(out, &work, pipeline::BUCKETED_FILE);
            let rej = or_work(rejections, &work, pipeline::REJECTIONS_FILE);
            json!(pipeline::cmd_bucketize(&pairs, &cfg, &out, &rej, force)?)
        }
        Command::Export { bucketed, out } => {
            let bucketed = or_work(bucketed, &work, pipeline::BUCKETED_FILE);
            let out = or_work(out, &work, pipeline::DATASET_FILE);
            json!(pipeline::cmd_export(&bucketed, &out, force)?)
        }
        Command::Baseline { dataset, out, kind } => {
            let mut bcfg = cfg.baseline_config();
            if let Some(k) = kind {
                bcfg.kind = *k;
            }
            let dataset = or_work(dataset, &work, pipeline::DATASET_FILE);
            let out = or_work(out, &work, pipeline::predictions_file(bcfg.kind));
            let lines = pipeline::cmd_baseline(&dataset, &bcfg, &out, force)?;
            json!({ "predictions": out, "lines": lines })
        }
        Command::Eval {
            predictions,
            k,
            out,
        } => {
            let k = k.unwrap_or(cfg.eval.k);
            if k == 0 {
                return Err(Error::Config("k must be at least 1".into()));
            }
            let models: Vec<(String, PathBuf)> = if predictions.is_empty() {
                let file = pipeline::predictions_file(cfg.baseline.kind);
                vec![(model_name(cfg.baseline.kind).to_owned(), work.join(file))]
            } else {
                predictions.iter().map(|p| model_spec(p)).collect()
            };
            let dir = out.clone().unwrap_or_else(|| work.clone());
            let json_out = dir.join(pipeline::REPORT_JSON);
            let txt_out = dir.join(pipeline::REPORT_TXT);
            let reports = pipeline::cmd_eval(&models, k, &json_out, &txt_out, force)?;
            print!("{}", qref_core::metrics::render_tables(&reports));
            json!({ "report": json_out, "tables": txt_out })
        }
    };
    Ok(value)
}

fn model_name(kind: BaselineKind) -> &'static str {
    match kind {
        BaselineKind::RandomDrop => "random_drop",
        BaselineKind::Identity => "identity",
    }
}

fn fail(kind: &str, code: u8, message: String) -> ExitCode {
    let err = json!({ "error": { "kind": kind, "code": code, "message": message } });
    eprintln!("{err}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            return fail(
                "usage",
                EXIT_USAGE,
                e.render().to_string().trim().to_owned(),
            )
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (kind, code) = match e.kind() {
                ErrorKind::Config => ("config", EXIT_CONFIG),
                ErrorKind::Validation => ("validation", EXIT_VALIDATION),
                ErrorKind::Io => ("io", EXIT_IO),
            };
            fail(kind, code, e.to_string())
        }
    }
}
