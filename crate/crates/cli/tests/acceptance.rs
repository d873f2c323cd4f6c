//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report reads top to
//! bottom; the process exits nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use qref_core::baselines::{theta_r, BaselineConfig};
use qref_core::corpus::{
    generate_synthetic_log, GeneratorSpec, SessionLog, SignalKind, SignalWeights,
};
use qref_core::intents::{bucketize, Verdict};
use qref_core::metrics::{
    bleu, coverage, evaluate, evaluate_at_k, rats, rouge_l, token_precision, token_recall,
    EvalInstance,
};
use qref_core::miner::{
    build_coclick_graph, default_signal_filter, mine_all, mine_cross_session_coengaged,
    mine_cross_session_onehop, mine_in_session, MinerSettings,
};
use qref_core::pipeline::{intent_context, PipelineConfig};
use qref_core::rewrite::type_histogram;
use qref_core::{assign_bucket, classify, IntentBucket, RewriteType};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, Duration, fn() -> Outcome);

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_query(rng: &mut ChaCha8Rng, len: usize, vocab: usize) -> Vec<String> {
    (0..len)
        .map(|_| format!("t{}", rng.gen_range(0..vocab)))
        .collect()
}

// --- independent rewrite-type rules --------------------------------------

fn counts(xs: &[String]) -> BTreeMap<&str, i64> {
    let mut m = BTreeMap::new();
    for x in xs {
        *m.entry(x.as_str()).or_insert(0) += 1;
    }
    m
}

/// Evaluates every rule separately and returns the ones that hold.
fn firing_rules(src: &[String], pred: &[String]) -> Vec<RewriteType> {
    let (s, p) = (counts(src), counts(pred));
    let keys: BTreeSet<&str> = s.keys().chain(p.keys()).copied().collect();
    let (mut kept, mut dropped, mut added) = (0, 0, 0);
    for k in keys {
        let (a, b) = (
            s.get(k).copied().unwrap_or(0),
            p.get(k).copied().unwrap_or(0),
        );
        kept += a.min(b);
        dropped += (a - b).max(0);
        added += (b - a).max(0);
    }
    let (ls, lp) = (src.len(), pred.len());
    let all3 = dropped > 0 && added > 0 && kept > 0;
    let mut fired = Vec::new();
    let empty = pred.is_empty();
    if empty {
        fired.push(RewriteType::Empty);
    }
    if !empty && dropped == 0 && added == 0 {
        fired.push(RewriteType::Same);
    }
    if !empty && dropped == 0 && added > 0 {
        fired.push(RewriteType::SuperSet);
    }
    if !empty && added == 0 && dropped > 0 {
        fired.push(RewriteType::SubSet);
    }
    if all3 && lp == ls {
        fired.push(RewriteType::Replace);
    }
    if all3 && lp < ls {
        fired.push(RewriteType::SubSetRep);
    }
    if all3 && lp > ls {
        fired.push(RewriteType::SupSetRep);
    }
    if !empty && kept == 0 && dropped > 0 && added > 0 {
        fired.push(RewriteType::Other);
    }
    fired
}

// --- criteria ------------------------------------------------------------

fn c1_theta_r_support() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let corpus: Vec<Vec<String>> = (0..10_000)
        .map(|_| {
            let len = rng.gen_range(1..=9);
            random_query(&mut rng, len, 50)
        })
        .collect();
    let cfg = BaselineConfig {
        seed: 7,
        ..Default::default()
    };
    let pairs: Vec<(Vec<String>, Vec<String>)> = corpus
        .iter()
        .enumerate()
        .map(|(i, q)| (q.clone(), theta_r(q, &cfg, i as u64)))
        .collect();
    let h = type_histogram::<f64, _>(&pairs).map_err(|e| e.to_string())?;
    for t in RewriteType::ALL {
        if !matches!(t, RewriteType::Same | RewriteType::SubSet) {
            ensure(h.counts[&t] == 0, || {
                format!("{t} has {} instances", h.counts[&t])
            })?;
        }
    }
    ensure(
        h.counts[&RewriteType::Same] > 0 && h.counts[&RewriteType::SubSet] > 0,
        || "expected mass on both Same and SubSet".into(),
    )?;
    Ok(format!(
        "10000 queries: Same {:.2}%, SubSet {:.2}%, all others 0.00%",
        h.percentage(RewriteType::Same),
        h.percentage(RewriteType::SubSet)
    ))
}

fn c2_theta_r_coverage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut corpus: Vec<Vec<String>> = (0..100)
        .map(|i| {
            let len = if i < 33 {
                rng.gen_range(4..=8)
            } else {
                rng.gen_range(1..=3)
            };
            random_query(&mut rng, len, 30)
        })
        .collect();
    corpus.shuffle(&mut rng);
    let cfg = BaselineConfig {
        seed: 7,
        ..Default::default()
    };
    let instances: Vec<EvalInstance> = corpus
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let mut gold = q.clone();
            gold.push("extra".into());
            EvalInstance::new(q.clone(), gold, vec![theta_r(q, &cfg, i as u64)], None)
        })
        .collect::<qref_core::Result<_>>()
        .map_err(|e| e.to_string())?;
    let cov: f64 = coverage(&instances).map_err(|e| e.to_string())?;
    ensure(cov == 0.33, || format!("coverage {cov}, expected 0.33"))?;
    Ok(format!("33 of 100 queries have >= 4 tokens; cov = {cov}"))
}

fn c3_rats_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=12);
        let mut instances = Vec::new();
        for _ in 0..n {
            let sl = rng.gen_range(1..=5);
            let gl = rng.gen_range(1..=5);
            let pl = rng.gen_range(0..=5);
            let src = random_query(&mut rng, sl, 6);
            let gold = random_query(&mut rng, gl, 6);
            let pred = random_query(&mut rng, pl, 6);
            instances
                .push(EvalInstance::new(src, gold, vec![pred], None).map_err(|e| e.to_string())?);
        }
        let got: f64 = rats(&instances).map_err(|e| e.to_string())?;
        let hits = instances
            .iter()
            .filter(|i| {
                firing_rules(&i.source, &i.candidates[0]) == firing_rules(&i.source, &i.gold)
            })
            .count();
        let want = hits as f64 / instances.len() as f64;
        worst = worst.max((got - want).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!(
        "1000 random fixtures, max |rats - oracle| = {worst:e}"
    ))
}

fn miner_spec(sessions: usize) -> GeneratorSpec {
    GeneratorSpec::from_toml(&format!(
        r#"
sessions = {sessions}
in_session_chains = 4
coclick_cliques = 2
twohop_bridges = 2
noise_events = [1, 3]
items_per_category = 6

[[categories]]
id = "sneakers"
meta = "fashion"
brands = ["nike", "adidas"]
products = ["air jordan", "running shoes", "slides"]
modifiers = ["womens", "mens", "size 9", "white"]

[[categories]]
id = "phones"
meta = "electronics"
brands = ["apple", "samsung"]
products = ["iphone 14", "galaxy s23"]
modifiers = ["unlocked", "128gb", "blue"]
"#
    ))
    .expect("valid spec")
}

fn clicked(log: &SessionLog) -> BTreeMap<String, BTreeSet<String>> {
    let mut m: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for ev in log.events() {
        for e in ev
            .engagements
            .iter()
            .filter(|e| e.signal == SignalKind::Click)
        {
            m.entry(ev.tokens.join(" "))
                .or_default()
                .insert(e.item.clone());
        }
    }
    m
}

type PairSet = BTreeSet<(String, String)>;

fn oracle_pairs(log: &SessionLog) -> (PairSet, PairSet, PairSet) {
    let mut in_session = BTreeSet::new();
    for s in log.sessions() {
        for j in 0..s.events.len() {
            let score: f64 = s.events[j]
                .engagements
                .iter()
                .map(|e| match e.signal {
                    SignalKind::Click => 1.0,
                    SignalKind::Bid => 3.0,
                    SignalKind::AddToCart => 4.0,
                    SignalKind::Bought => 5.0,
                    SignalKind::Other(_) => 0.0,
                })
                .sum();
            if score < 1.0 {
                continue;
            }
            for i in j.saturating_sub(3)..j {
                let (a, b) = (s.events[i].tokens.join(" "), s.events[j].tokens.join(" "));
                if a != b {
                    in_session.insert((a, b));
                }
            }
        }
    }
    let items = clicked(log);
    let mut sessions: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    for ev in log.events() {
        sessions
            .entry(ev.tokens.join(" "))
            .or_default()
            .insert(&ev.session_id);
    }
    let meets = |a: &BTreeSet<String>, b: &BTreeSet<String>| a.intersection(b).count() >= 1;
    let mut co = BTreeSet::new();
    let mut hop = BTreeSet::new();
    for (a, ia) in &items {
        for (b, ib) in &items {
            if a >= b {
                continue;
            }
            if meets(ia, ib) {
                if sessions[a].union(&sessions[b]).count() >= 2 {
                    co.insert((a.clone(), b.clone()));
                }
            } else if items
                .iter()
                .any(|(c, ic)| c != a && c != b && meets(ia, ic) && meets(ic, ib))
            {
                hop.insert((a.clone(), b.clone()));
            }
        }
    }
    (in_session, co, hop)
}

fn c4_miner_oracle() -> Outcome {
    let weights = SignalWeights::default();
    let filter = default_signal_filter();
    let (mut logs, mut planted) = (0, 0);
    for seed in 0..20u64 {
        let synth = generate_synthetic_log(&miner_spec(30 + (seed as usize % 3) * 5), seed)
            .map_err(|e| e.to_string())?;
        ensure(synth.log.len() <= 200, || {
            format!("seed {seed}: {} events", synth.log.len())
        })?;
        let set = |v: Vec<qref_core::QueryPair>| -> PairSet {
            v.into_iter()
                .map(|p| (p.source_query, p.target_query))
                .collect()
        };
        let g = build_coclick_graph(&synth.log, &filter);
        let got_in = set(mine_in_session(&synth.log, 3, 1.0, &weights).map_err(|e| e.to_string())?);
        let got_co =
            set(mine_cross_session_coengaged(&g, &synth.log, 1).map_err(|e| e.to_string())?);
        let got_hop = set(mine_cross_session_onehop(&g, 1).map_err(|e| e.to_string())?);
        let (want_in, want_co, want_hop) = oracle_pairs(&synth.log);
        ensure(got_in == want_in, || {
            format!("seed {seed}: in-session differs")
        })?;
        ensure(got_co == want_co, || {
            format!("seed {seed}: co-engaged differs")
        })?;
        ensure(got_hop == want_hop, || {
            format!("seed {seed}: one-hop differs")
        })?;

        let all =
            mine_all(&synth.log, &MinerSettings::default(), &weights).map_err(|e| e.to_string())?;
        let found: BTreeSet<_> = all
            .iter()
            .map(|p| {
                (
                    p.provenance(),
                    p.source_query.as_str(),
                    p.target_query.as_str(),
                )
            })
            .collect();
        for p in &synth.manifest {
            ensure(
                found.contains(&(p.provenance, p.source.as_str(), p.target.as_str())),
                || {
                    format!(
                        "seed {seed}: planted {} {} -> {} not mined",
                        p.provenance, p.source, p.target
                    )
                },
            )?;
        }
        logs += 1;
        planted += synth.manifest.len();
    }
    Ok(format!(
        "{logs} logs set-equal to oracles; {planted}/{planted} planted pairs recovered"
    ))
}

fn c5_labelled_pairs() -> Outcome {
    let dir = root().join("fixtures/labelled_pairs");
    let cfg = PipelineConfig::load(&dir.join("config.toml")).map_err(|e| e.to_string())?;
    let ctx = intent_context(&cfg).map_err(|e| e.to_string())?;
    let path = dir.join("pairs.tsv");
    let file = File::open(&path).map_err(|e| e.to_string())?;
    let pairs =
        qref_core::miner::read_pairs(BufReader::new(file), &path).map_err(|e| e.to_string())?;
    let expected = std::fs::read_to_string(dir.join("expected.tsv")).map_err(|e| e.to_string())?;
    let mut right = BTreeMap::new();
    for line in expected.lines() {
        let c: Vec<&str> = line.split('\t').collect();
        let want = match c[0] {
            "same" => IntentBucket::SameIntent,
            "similar" => IntentBucket::SimilarIntent,
            _ => IntentBucket::InspiredIntent,
        };
        let pair = pairs
            .iter()
            .find(|p| p.source_query == c[1] && p.target_query == c[2])
            .ok_or_else(|| format!("pair {} -> {} missing", c[1], c[2]))?;
        let got = assign_bucket(pair, &ctx).map_err(|e| e.to_string())?;
        ensure(got == Verdict::Bucket(want), || {
            format!("{} -> {}: {got:?}, want {want:?}", c[1], c[2])
        })?;
        *right.entry(want.name()).or_insert(0) += 1;
    }
    let (accepted, rejected) = bucketize(pairs, &ctx).map_err(|e| e.to_string())?;
    ensure(accepted.len() == 9 && rejected.is_empty(), || {
        "bucketize disagrees".into()
    })?;
    Ok(format!("buckets {right:?}"))
}

fn c6_partition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut seen = BTreeSet::new();
    for _ in 0..100_000 {
        let sl = rng.gen_range(1..=6);
        let pl = rng.gen_range(0..=6);
        let src = random_query(&mut rng, sl, 5);
        let pred = random_query(&mut rng, pl, 5);
        let fired = firing_rules(&src, &pred);
        ensure(fired.len() == 1, || {
            format!("{src:?} -> {pred:?}: rules {fired:?}")
        })?;
        let t = classify(&src, &pred).map_err(|e| e.to_string())?;
        ensure(t == fired[0], || {
            format!("{src:?} -> {pred:?}: {t} vs {}", fired[0])
        })?;
        seen.insert(t);
        if !pred.is_empty() {
            let back = classify(&pred, &src).map_err(|e| e.to_string())?;
            let dual = match t {
                RewriteType::SubSet => RewriteType::SuperSet,
                RewriteType::SuperSet => RewriteType::SubSet,
                RewriteType::SubSetRep => RewriteType::SupSetRep,
                RewriteType::SupSetRep => RewriteType::SubSetRep,
                other => other,
            };
            ensure(back == dual, || {
                format!("{src:?} <-> {pred:?}: {t} then {back}")
            })?;
        }
    }
    ensure(seen.len() == 8, || {
        format!("only {} types reached", seen.len())
    })?;
    Ok("100000 random pairs: exactly one rule each, duality holds, all 8 types reached".into())
}

fn c7_metric_anchors() -> Outcome {
    let same = vec![
        (toks("nike air jordan 4"), toks("nike air jordan 4")),
        (toks("iphone 14 plus case"), toks("iphone 14 plus case")),
    ];
    let b: f64 = bleu(&same).map_err(|e| e.to_string())?;
    let r: f64 = rouge_l(&same).map_err(|e| e.to_string())?;
    ensure(b == 100.0, || format!("identical BLEU {b}"))?;
    ensure(r == 1.0, || format!("identical ROUGE-L {r}"))?;
    let (g, p) = (toks("a b c d"), toks("a b x"));
    let rec: f64 = token_recall(&g, &p).map_err(|e| e.to_string())?;
    let pre: f64 = token_precision(&g, &p).map_err(|e| e.to_string())?;
    ensure(rec == 0.5 && (pre - 2.0 / 3.0).abs() < 1e-15, || {
        format!("P/R ({rec}, {pre})")
    })?;
    // matches 5/7, 3/6, 1/5, 0/4 (smoothed to 1/5); candidate longer than reference
    let hand = 100.0 * (5.0 / 7.0 * 3.0 / 6.0 * 1.0 / 5.0 * 1.0 / 5.0f64).powf(0.25);
    let fixture = vec![(
        toks("the cat is on the mat"),
        toks("the cat the cat on the mat"),
    )];
    let got: f64 = bleu(&fixture).map_err(|e| e.to_string())?;
    ensure((got - hand).abs() <= 0.1, || {
        format!("BLEU {got} vs hand {hand}")
    })?;
    Ok(format!(
        "BLEU 100, ROUGE-L 1, P/R (0.5, 2/3), fixture BLEU {got:.4} vs {hand:.4}"
    ))
}

fn c8_at_k() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for set in 0..100 {
        let n = rng.gen_range(1..=15);
        let mut instances = Vec::new();
        for _ in 0..n {
            let sl = rng.gen_range(1..=5);
            let gl = rng.gen_range(1..=5);
            let src = random_query(&mut rng, sl, 6);
            let gold = random_query(&mut rng, gl, 6);
            let k = rng.gen_range(1..=5);
            let cands = (0..k)
                .map(|_| {
                    let l = rng.gen_range(0..=5);
                    random_query(&mut rng, l, 6)
                })
                .collect();
            instances.push(EvalInstance::new(src, gold, cands, None).map_err(|e| e.to_string())?);
        }
        let mut prev = (0.0, 0.0);
        for k in 1..=5 {
            let r = evaluate_at_k::<f64>(&instances, k).map_err(|e| e.to_string())?;
            ensure(r.rats >= prev.0 && r.cov >= prev.1, || {
                format!(
                    "set {set}: k={k} rats {} cov {} after {prev:?}",
                    r.rats, r.cov
                )
            })?;
            prev = (r.rats, r.cov);
        }
        let single: Vec<EvalInstance> = instances
            .iter()
            .map(|i| EvalInstance {
                candidates: vec![i.candidates[0].clone()],
                ..i.clone()
            })
            .collect();
        let at1 = evaluate_at_k::<f64>(&instances, 1).map_err(|e| e.to_string())?;
        let plain = evaluate::<f64>(&single).map_err(|e| e.to_string())?;
        let same_bits =
            serde_json::to_string(&at1).unwrap() == serde_json::to_string(&plain).unwrap();
        ensure(at1 == plain && same_bits, || {
            format!("set {set}: @1 differs from single")
        })?;
    }
    Ok("100 random sets: rats@k and cov@k non-decreasing for k = 1..5; @1 identical".into())
}

fn run_pipeline(bin: &Path, config: &Path, work: &Path) -> Result<(), String> {
    for stage in ["gen", "mine", "bucketize", "export", "baseline", "eval"] {
        let out = Command::new(bin)
            .arg("--config")
            .arg(config)
            .arg("--workdir")
            .arg(work)
            .arg("--seed")
            .arg("7")
            .arg(stage)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!("{stage} failed: {}", String::from_utf8_lossy(&out.stderr))
        })?;
    }
    Ok(())
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut m = BTreeMap::new();
    for e in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let e = e.map_err(|e| e.to_string())?;
        let bytes = std::fs::read(e.path()).map_err(|e| e.to_string())?;
        m.insert(e.file_name().to_string_lossy().into_owned(), bytes);
    }
    Ok(m)
}

fn c9_determinism() -> Outcome {
    let bin = PathBuf::from(env!("CARGO_BIN_EXE_qref"));
    let config = root().join("demo/config.toml");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_pipeline(&bin, &config, &a)?;
    run_pipeline(&bin, &config, &b)?;
    let (sa, sb) = (snapshot(&a)?, snapshot(&b)?);
    ensure(sa.keys().eq(sb.keys()), || "artifact sets differ".into())?;
    for (name, bytes) in &sa {
        ensure(sb[name] == *bytes, || {
            format!("{name} differs between runs")
        })?;
    }
    for required in [
        "log.jsonl",
        "pairs.tsv",
        "bucketed.tsv",
        "dataset.tsv",
        "report.json",
    ] {
        ensure(sa.get(required).is_some_and(|b| !b.is_empty()), || {
            format!("{required} missing or empty")
        })?;
    }

    let report: serde_json::Value =
        serde_json::from_slice(&sa["report.json"]).map_err(|e| e.to_string())?;
    let rats = report[0]["report"]["rats"]
        .as_f64()
        .ok_or("report has no rats")?;
    ensure((0.0..=1.0).contains(&rats), || {
        format!("rats {rats} out of range")
    })?;
    let counts = &report[0]["report"]["prediction_types"]["counts"];
    for t in RewriteType::ALL {
        if !matches!(t, RewriteType::Same | RewriteType::SubSet) {
            ensure(counts[t.name()].as_u64() == Some(0), || {
                format!("baseline produced {t}")
            })?;
        }
    }
    Ok(format!(
        "{} artifacts byte-identical across two runs",
        sa.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "1",
            "random-drop baseline supported on Same/SubSet",
            Duration::from_secs(1),
            c1_theta_r_support,
        ),
        (
            "2",
            "random-drop baseline coverage",
            Duration::from_secs(1),
            c2_theta_r_coverage,
        ),
        (
            "3",
            "rats oracle equivalence",
            Duration::from_secs(1),
            c3_rats_oracle,
        ),
        (
            "4",
            "miner-oracle equivalence",
            Duration::from_secs(10),
            c4_miner_oracle,
        ),
        (
            "5",
            "labelled example pairs bucket correctly",
            Duration::from_secs(1),
            c5_labelled_pairs,
        ),
        (
            "6",
            "rewrite-type partition and duality",
            Duration::from_secs(5),
            c6_partition,
        ),
        (
            "7",
            "metric anchors",
            Duration::from_secs(1),
            c7_metric_anchors,
        ),
        ("8", "@k monotonicity", Duration::from_secs(5), c8_at_k),
        (
            "9",
            "end-to-end determinism",
            Duration::from_secs(30),
            c9_determinism,
        ),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > limit => {
                Err(format!("{detail}; took {took:.2?}, limit {limit:?}"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {id}: {name} ({took:.2?}) - {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id}: {name} ({took:.2?}) - {why}");
            }
        }
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
