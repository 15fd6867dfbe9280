use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{ingest_corpus, CorpusDb, IngestConfig, RECORDS_FILE, REPORTS_FILE};
use crate::digest::{file_sha256, sha256_hex};
use crate::engine::{
    evaluate_corpus, open_engine, selfplay_generate, write_evals_csv, EngineSettings, EvalCache, EvalConfig, Evaluator, SelfplayConfig,
};
use crate::novelty::{build_prefix_index, inject_synthetic_games, novelty_distribution, read_novelty_csv, write_novelty_csv, NoveltyConfig};
use crate::panel::{
    table1_model, trend_file_name, write_observations_csv, write_panel_csv, write_table1_csv, write_trend_csv, FeOptions, Period,
};
use crate::sgf::write_sgf;

use super::regress::{load_observations, metric_trend, novelty_panel_from_records, Metric, CORPUS_DIR, EVALS_CSV, NOVELTY_CSV, OBSERVATIONS_CSV};
use super::{apply_filter, render_report, FilterSpec, PipelineConfig};

pub const STATE_DIR: &str = ".stages";
pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const INJECTED_NOVELTY_CSV: &str = "novelty_injected.csv";
pub const DEFAULT_CACHE: &str = "cache/evals.gcf";
const SELFPLAY_DIR: &str = "selfplay";
const SELFPLAY_CACHE: &str = "cache/selfplay.gcf";
const INJECTED_SUBSET: &str = "selfplay-injected";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ran,
    Skipped,
    Failed,
    /// Not attempted because an upstream stage failed.
    Stale,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    pub rows: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub key: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<OutputRecord>,
    pub notes: Vec<String>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub config_sha256: String,
    pub started_at: String,
    pub finished_at: String,
    pub stages: Vec<StageRecord>,
    pub ok: bool,
}

impl RunManifest {
    /// Digest of every output, keyed by relative path.
    pub fn output_digests(&self) -> BTreeMap<String, String> {
        self.stages
            .iter()
            .flat_map(|s| s.outputs.iter().map(|o| (o.path.clone(), o.sha256.clone())))
            .collect()
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn load(out: &Path) -> anyhow::Result<RunManifest> {
        let path = out.join(RUN_MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Rerun every stage regardless of recorded state.
    pub force: bool,
}

#[derive(Serialize, Deserialize)]
struct StageState {
    key: String,
    outputs: Vec<OutputRecord>,
    notes: Vec<String>,
}

#[derive(Default)]
struct Produced {
    files: Vec<(PathBuf, Option<usize>)>,
    notes: Vec<String>,
}

impl Produced {
    fn add(&mut self, path: PathBuf, rows: Option<usize>) {
        self.files.push((path, rows));
    }
}

fn rel(out: &Path, p: &Path) -> String {
    p.strip_prefix(out)
        .unwrap_or(p)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn input_digests(out: &Path, files: &[PathBuf]) -> anyhow::Result<BTreeMap<String, String>> {
    files
        .iter()
        .map(|f| Ok((rel(out, f), file_sha256(f).with_context(|| format!("hashing input {}", f.display()))?)))
        .collect()
}

/// Digest of every `.sgf`/`.zip` file under `root`, by relative path.
pub fn corpus_digest(root: &Path) -> anyhow::Result<String> {
    let mut lines = String::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry?;
        if !entry.file_type().is_file() {
            continue;
        }
        let ext = entry.path().extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
        if matches!(ext.as_deref(), Some("sgf" | "zip")) {
            lines.push_str(&format!("{}\0{}\n", rel(root, entry.path()), file_sha256(entry.path())?));
        }
    }
    Ok(sha256_hex(lines.as_bytes()))
}

struct Runner<'a> {
    out: &'a Path,
    force: bool,
}

impl Runner<'_> {
    fn state_path(&self, name: &str) -> PathBuf {
        self.out.join(STATE_DIR).join(format!("{name}.json"))
    }

    fn load_state(&self, name: &str) -> Option<StageState> {
        serde_json::from_str(&fs::read_to_string(self.state_path(name)).ok()?).ok()
    }

    fn outputs_intact(&self, outputs: &[OutputRecord]) -> bool {
        outputs
            .iter()
            .all(|o| file_sha256(&self.out.join(&o.path)).map(|d| d == o.sha256).unwrap_or(false))
    }

    /// Runs `body` unless the stage key and recorded outputs are unchanged.
    /// Outputs recorded by the previous run of the stage are removed first.
    fn stage(
        &self,
        name: &str,
        version: u32,
        config: serde_json::Value,
        inputs: BTreeMap<String, String>,
        body: impl FnOnce() -> anyhow::Result<Produced>,
    ) -> StageRecord {
        let key = sha256_hex(
            serde_json::to_string(&json!({
                "stage": name,
                "version": version,
                "tool": env!("CARGO_PKG_VERSION"),
                "config": config,
                "inputs": inputs,
            }))
            .expect("key serializes")
            .as_bytes(),
        );
        let previous = self.load_state(name);
        if let Some(prev) = &previous {
            if !self.force && prev.key == key && self.outputs_intact(&prev.outputs) {
                log::info!("stage {name}: up to date");
                return StageRecord {
                    name: name.into(),
                    status: StageStatus::Skipped,
                    key,
                    inputs,
                    outputs: prev.outputs.clone(),
                    notes: prev.notes.clone(),
                    error: None,
                };
            }
            for o in &prev.outputs {
                let _ = fs::remove_file(self.out.join(&o.path));
            }
        }
        let _ = fs::remove_file(self.state_path(name));
        log::info!("stage {name}: running");
        let result = body().and_then(|produced| {
            let mut outputs = Vec::with_capacity(produced.files.len());
            for (path, rows) in produced.files {
                let bytes = fs::read(&path).with_context(|| format!("reading output {}", path.display()))?;
                outputs.push(OutputRecord {
                    path: rel(self.out, &path),
                    sha256: sha256_hex(&bytes),
                    bytes: bytes.len() as u64,
                    rows,
                });
            }
            outputs.sort_by(|a, b| a.path.cmp(&b.path));
            Ok((outputs, produced.notes))
        });
        match result {
            Ok((outputs, notes)) => {
                let state = StageState {
                    key: key.clone(),
                    outputs: outputs.clone(),
                    notes: notes.clone(),
                };
                let path = self.state_path(name);
                let saved = fs::create_dir_all(path.parent().expect("state dir"))
                    .and_then(|_| fs::write(&path, serde_json::to_string_pretty(&state).expect("state serializes")));
                if let Err(e) = saved {
                    log::warn!("stage {name}: cannot record state: {e}");
                }
                StageRecord {
                    name: name.into(),
                    status: StageStatus::Ran,
                    key,
                    inputs,
                    outputs,
                    notes,
                    error: None,
                }
            }
            Err(e) => {
                log::error!("stage {name} failed: {e:#}");
                StageRecord {
                    name: name.into(),
                    status: StageStatus::Failed,
                    key,
                    inputs,
                    outputs: Vec::new(),
                    notes: Vec::new(),
                    error: Some(format!("{e:#}")),
                }
            }
        }
    }
}

fn stale(name: &str, why: &str) -> StageRecord {
    StageRecord {
        name: name.into(),
        status: StageStatus::Stale,
        key: String::new(),
        inputs: BTreeMap::new(),
        outputs: Vec::new(),
        notes: vec![format!("not run: {why}")],
        error: None,
    }
}

fn ok(r: &StageRecord) -> bool {
    matches!(r.status, StageStatus::Ran | StageStatus::Skipped)
}

fn settings(cfg: &PipelineConfig) -> EngineSettings {
    EngineSettings {
        visits: cfg.engine.visits,
        komi: cfg.engine.komi,
        ruleset: cfg.engine.rules,
    }
}

fn ingest_stage(r: &Runner, cfg: &PipelineConfig) -> StageRecord {
    let icfg = IngestConfig {
        date_min: cfg.corpus.date_min,
        date_max: cfg.corpus.date_max,
        include_setup: cfg.corpus.include_setup,
        dedup: cfg.corpus.dedup,
    };
    let digest = match corpus_digest(&cfg.corpus.path) {
        Ok(d) => d,
        Err(e) => return failed("ingest", e.context(format!("reading corpus {}", cfg.corpus.path.display()))),
    };
    let inputs = BTreeMap::from([("corpus".to_string(), digest)]);
    r.stage("ingest", 1, json!(icfg), inputs, || {
        let db = ingest_corpus(&cfg.corpus.path, &icfg)?;
        if db.games.is_empty() {
            bail!("no valid games under {}", cfg.corpus.path.display());
        }
        let dir = r.out.join(CORPUS_DIR);
        db.write(&dir)?;
        let mut p = Produced::default();
        p.add(dir.join(RECORDS_FILE), Some(db.games.len()));
        p.add(dir.join(REPORTS_FILE), Some(db.reports.len()));
        p.notes.push(format!("{} games kept, {} files seen", db.stats.games, db.stats.files_seen));
        Ok(p)
    })
}

fn failed(name: &str, e: anyhow::Error) -> StageRecord {
    StageRecord {
        name: name.into(),
        status: StageStatus::Failed,
        key: String::new(),
        inputs: BTreeMap::new(),
        outputs: Vec::new(),
        notes: Vec::new(),
        error: Some(format!("{e:#}")),
    }
}

fn records_path(out: &Path) -> PathBuf {
    out.join(CORPUS_DIR).join(RECORDS_FILE)
}

fn with_inputs(r: &Runner, name: &str, files: &[PathBuf], f: impl FnOnce(BTreeMap<String, String>) -> StageRecord) -> StageRecord {
    match input_digests(r.out, files) {
        Ok(inputs) => f(inputs),
        Err(e) => failed(name, e),
    }
}

fn novelty_config(cfg: &PipelineConfig) -> NoveltyConfig {
    NoveltyConfig {
        max_move: cfg.novelty.max_move,
        canonicalize: cfg.novelty.canonicalize,
    }
}

fn novelty_stage(r: &Runner, cfg: &PipelineConfig) -> StageRecord {
    let ncfg = novelty_config(cfg);
    with_inputs(r, "novelty", &[records_path(r.out)], |inputs| {
        r.stage("novelty", 1, json!(ncfg), inputs, || {
            let db = CorpusDb::open(&r.out.join(CORPUS_DIR))?;
            let (index, records) = build_prefix_index(&db.games, &ncfg)?;
            let path = r.out.join(NOVELTY_CSV);
            write_novelty_csv(&path, &records)?;
            let mut p = Produced::default();
            p.add(path, Some(records.len()));
            let dist = novelty_distribution(&records, ncfg.max_move)?;
            let spath = r.out.join("novelty_summary.json");
            fs::write(&spath, serde_json::to_string_pretty(&dist)? + "\n")?;
            p.add(spath, None);
            p.notes.push(format!("{} trie nodes, {} games without a novel move", index.len(), dist.n_absent));
            Ok(p)
        })
    })
}

fn evaluate_stage(r: &Runner, cfg: &PipelineConfig) -> StageRecord {
    let ecfg = EvalConfig {
        max_move: cfg.novelty.max_move,
        settings: settings(cfg),
    };
    let config = json!({ "engine": cfg.engine.command, "eval": ecfg });
    with_inputs(r, "evaluate", &[records_path(r.out)], |inputs| {
        r.stage("evaluate", 1, config, inputs, || {
            let db = CorpusDb::open(&r.out.join(CORPUS_DIR))?;
            let engine = open_engine(&cfg.engine.command, Duration::from_secs(cfg.engine.timeout_secs), cfg.engine.max_in_flight)?;
            let cache_path = cfg.engine.cache.clone().unwrap_or_else(|| r.out.join(DEFAULT_CACHE));
            if let Some(parent) = cache_path.parent() {
                fs::create_dir_all(parent)?;
            }
            let cache = EvalCache::open(&cache_path).with_context(|| format!("opening cache {}", cache_path.display()))?;
            let mut ev = Evaluator::new(engine, cache);
            ev.batch_size = cfg.engine.batch_size.max(1);
            let evals = evaluate_corpus(&mut ev, &db.games, &ecfg)?;
            let path = r.out.join(EVALS_CSV);
            write_evals_csv(&path, &evals)?;
            let mut p = Produced::default();
            p.add(path, Some(evals.len()));
            p.notes.push(format!("{} engine requests", ev.engine().requests_sent()));
            Ok(p)
        })
    })
}

fn selfplay_config(cfg: &PipelineConfig) -> SelfplayConfig {
    SelfplayConfig {
        n_games: cfg.selfplay.games,
        max_move: cfg.novelty.max_move,
        seed: cfg.seed,
        top_k: cfg.selfplay.top_k,
        temperature: cfg.selfplay.temperature,
        settings: settings(cfg),
    }
}

fn selfplay_stage(r: &Runner, cfg: &PipelineConfig) -> StageRecord {
    let scfg = selfplay_config(cfg);
    let config = json!({ "engine": cfg.engine.command, "selfplay": scfg });
    r.stage("selfplay", 1, config, BTreeMap::new(), || {
        let games = generate_selfplay(cfg, &scfg, &r.out.join(SELFPLAY_CACHE))?;
        let dir = r.out.join(SELFPLAY_DIR);
        let mut p = Produced::default();
        for path in write_sgf_dir(&dir, &games)? {
            p.add(path, None);
        }
        if games.len() < scfg.n_games {
            p.notes.push(format!("{} of {} self-play games failed", scfg.n_games - games.len(), scfg.n_games));
        }
        Ok(p)
    })
}

/// Self-play through the configured engine, cached at `cache_path`.
pub fn generate_selfplay(cfg: &PipelineConfig, scfg: &SelfplayConfig, cache_path: &Path) -> anyhow::Result<Vec<crate::GameRecord>> {
    let engine = open_engine(&cfg.engine.command, Duration::from_secs(cfg.engine.timeout_secs), cfg.engine.max_in_flight)?;
    if let Some(parent) = cache_path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut ev = Evaluator::new(engine, EvalCache::open(cache_path)?);
    ev.batch_size = cfg.engine.batch_size.max(1);
    Ok(selfplay_generate(&mut ev, scfg))
}

/// Writes one SGF per game as `selfplay-NNNNN.sgf`.
pub fn write_sgf_dir(dir: &Path, games: &[crate::GameRecord]) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(games.len());
    for (i, g) in games.iter().enumerate() {
        let path = dir.join(format!("selfplay-{i:05}.sgf"));
        fs::write(&path, write_sgf(g))?;
        paths.push(path);
    }
    Ok(paths)
}

fn sgf_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map(|rd| rd.filter_map(Result::ok).map(|e| e.path()).filter(|p| p.extension().is_some_and(|e| e == "sgf")).collect())
        .unwrap_or_default();
    v.sort();
    v
}

fn inject_stage(r: &Runner, cfg: &PipelineConfig) -> StageRecord {
    let ncfg = novelty_config(cfg);
    let mut files = vec![records_path(r.out)];
    files.extend(sgf_files(&r.out.join(SELFPLAY_DIR)));
    let config = json!({ "novelty": ncfg, "inject_date": cfg.inject_date(), "cutoff": cfg.analysis.cutoff });
    with_inputs(r, "inject", &files, |inputs| {
        r.stage("inject", 1, config, inputs, || {
            let db = CorpusDb::open(&r.out.join(CORPUS_DIR))?;
            let synth = ingest_corpus(
                &r.out.join(SELFPLAY_DIR),
                &IngestConfig {
                    dedup: false,
                    ..IngestConfig::default()
                },
            )?;
            let records = inject_synthetic_games(&db.games, &synth.games, cfg.inject_date(), cfg.analysis.cutoff, &ncfg)?;
            let path = r.out.join(INJECTED_NOVELTY_CSV);
            write_novelty_csv(&path, &records)?;
            let mut p = Produced::default();
            p.add(path, Some(records.len()));
            p.notes.push(format!("{} self-play games injected at {}", synth.games.len(), cfg.inject_date()));
            Ok(p)
        })
    })
}

/// Metrics estimated for a subset: DQI everywhere, novelty on the full data
/// and on subsets restricted to novel moves.
fn metrics_for(spec: FilterSpec) -> &'static [Metric] {
    match spec {
        FilterSpec::All => &[Metric::Dqi, Metric::Novelty],
        FilterSpec::NovelMovesOnly | FilterSpec::NovelDiffersFromAi | FilterSpec::NovelMatchesAi => &[Metric::Novelty],
        _ => &[Metric::Dqi],
    }
}

fn regress_stage(r: &Runner, cfg: &PipelineConfig, injected: bool) -> StageRecord {
    let mut files = vec![records_path(r.out), r.out.join(NOVELTY_CSV), r.out.join(EVALS_CSV)];
    if injected {
        files.push(r.out.join(INJECTED_NOVELTY_CSV));
    }
    let config = json!({ "analysis": cfg.analysis, "max_move": cfg.novelty.max_move, "injected": injected });
    with_inputs(r, "regress", &files, |inputs| r.stage("regress", 1, config, inputs, || regress_body(r.out, cfg, injected)))
}

fn regress_body(out: &Path, cfg: &PipelineConfig, injected: bool) -> anyhow::Result<Produced> {
    let a = &cfg.analysis;
    let opts = FeOptions {
        tolerance: a.tolerance,
        max_sweeps: a.max_sweeps,
    };
    let baseline: Option<Period> = a.baseline.as_deref().map(str::parse).transpose().map_err(anyhow::Error::msg)?;
    let max_move = cfg.novelty.max_move;
    let mut p = Produced::default();

    let obs = load_observations(out, a.cutoff)?;
    let opath = out.join(OBSERVATIONS_CSV);
    write_observations_csv(&opath, &obs)?;
    p.add(opath, Some(obs.len()));

    if !a.models.is_empty() {
        let mut results = Vec::new();
        for &m in &a.models {
            results.push((m, table1_model(&obs, m, &opts).with_context(|| format!("model {m}"))?));
        }
        let path = out.join("table1.csv");
        write_table1_csv(&path, &results)?;
        let rows = results.iter().map(|(m, res)| crate::panel::table1_rows(*m, res).len()).sum();
        p.add(path, Some(rows));
    }

    let mut subsets = vec![FilterSpec::All];
    subsets.extend(a.filters.iter().copied().filter(|f| *f != FilterSpec::All));
    for spec in subsets {
        let rows = if spec == FilterSpec::All { obs.clone() } else { apply_filter(&obs, spec) };
        let dir = if spec == FilterSpec::All { out.to_path_buf() } else { out.join("filters").join(spec.slug()) };
        fs::create_dir_all(&dir)?;
        for &kind in &a.periods {
            for &metric in metrics_for(spec) {
                let path = dir.join(trend_file_name(&metric.to_string(), kind));
                match metric_trend(&rows, metric, kind, baseline, max_move, a.attribution, &opts) {
                    Ok((panel, fit)) => {
                        write_trend_csv(&path, &fit.points)?;
                        p.add(path, Some(fit.points.len()));
                        if !fit.dropped_periods.is_empty() {
                            p.notes.push(dropped_note(&format!("{spec} {metric} by {kind}"), &fit));
                        }
                        if spec == FilterSpec::All {
                            let ppath = dir.join(format!("panel_{metric}_{kind}.csv"));
                            write_panel_csv(&ppath, &panel)?;
                            p.add(ppath, Some(panel.len()));
                        }
                    }
                    Err(e) if spec != FilterSpec::All => {
                        write_trend_csv(&path, &[])?;
                        p.add(path, Some(0));
                        p.notes.push(format!("{spec} {metric} by {kind}: no estimate ({e})"));
                    }
                    Err(e) => return Err(anyhow::Error::new(e).context(format!("{metric} trend by {kind}"))),
                }
            }
        }
    }

    if injected {
        let db = CorpusDb::open(&out.join(CORPUS_DIR))?;
        let records = read_novelty_csv(&out.join(INJECTED_NOVELTY_CSV))?;
        let dir = out.join("filters").join(INJECTED_SUBSET);
        fs::create_dir_all(&dir)?;
        for &kind in &a.periods {
            let path = dir.join(trend_file_name("novelty", kind));
            let panel = novelty_panel_from_records(&records, &db.games, max_move, a.attribution, kind);
            let fit = super::regress::resolve_baseline(&panel, baseline, kind).and_then(|b| crate::panel::trend_fit(&panel, b, &opts));
            match fit {
                Ok(fit) => {
                    write_trend_csv(&path, &fit.points)?;
                    p.add(path, Some(fit.points.len()));
                    if !fit.dropped_periods.is_empty() {
                        p.notes.push(dropped_note(&format!("{INJECTED_SUBSET} novelty by {kind}"), &fit));
                    }
                }
                Err(e) => {
                    write_trend_csv(&path, &[])?;
                    p.add(path, Some(0));
                    p.notes.push(format!("{INJECTED_SUBSET} novelty by {kind}: no estimate ({e})"));
                }
            }
        }
    }
    Ok(p)
}

fn dropped_note(what: &str, fit: &crate::panel::TrendFit) -> String {
    let shown: Vec<String> = fit.dropped_periods.iter().take(8).map(|p| p.to_string()).collect();
    format!(
        "{what}: {} periods ({} panel rows) not linked to the baseline: {}{}",
        fit.dropped_periods.len(),
        fit.dropped_rows,
        shown.join(", "),
        if fit.dropped_periods.len() > shown.len() { ", ..." } else { "" }
    )
}

fn report_stage(r: &Runner, cfg: &PipelineConfig, regress: &StageRecord) -> StageRecord {
    let files: Vec<PathBuf> = regress
        .outputs
        .iter()
        .filter(|o| o.path.ends_with("table1.csv") || o.path.rsplit('/').next().is_some_and(|n| n.starts_with("trend_")))
        .map(|o| r.out.join(&o.path))
        .collect();
    let config = json!({ "cutoff": cfg.analysis.cutoff });
    with_inputs(r, "report", &files, |inputs| {
        r.stage("report", 1, config, inputs, || {
            let written = render_report(r.out, &r.out.join("report"), Some(cfg.analysis.cutoff))?;
            let mut p = Produced::default();
            for w in written {
                p.add(w, None);
            }
            Ok(p)
        })
    })
}

/// Runs every stage into `out`, skipping stages whose inputs, configuration
/// and outputs are unchanged, and writes `run_manifest.json`. Stage failures
/// are recorded in the manifest (`ok == false`) rather than returned.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path, options: &RunOptions) -> anyhow::Result<RunManifest> {
    cfg.validate().map_err(anyhow::Error::msg)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let started_at = chrono::Utc::now().to_rfc3339();
    let r = Runner {
        out,
        force: options.force,
    };
    let selfplay_on = cfg.selfplay.games > 0;
    let mut stages = Vec::new();

    let ingest = ingest_stage(&r, cfg);
    let ingest_ok = ok(&ingest);
    stages.push(ingest);
    if ingest_ok {
        let (novelty, evaluate, selfplay) = std::thread::scope(|s| {
            let n = s.spawn(|| novelty_stage(&r, cfg));
            let sp = selfplay_on.then(|| s.spawn(|| selfplay_stage(&r, cfg)));
            let e = evaluate_stage(&r, cfg);
            (
                n.join().expect("novelty stage panicked"),
                e,
                sp.map(|h| h.join().expect("selfplay stage panicked")),
            )
        });
        let upstream_ok = ok(&novelty) && ok(&evaluate);
        let selfplay_ok = selfplay.as_ref().is_none_or(ok);
        stages.push(novelty);
        stages.push(evaluate);
        if let Some(sp) = selfplay {
            stages.push(sp);
            stages.push(if selfplay_ok && ok(&stages[1]) {
                inject_stage(&r, cfg)
            } else {
                stale("inject", "self-play or novelty failed")
            });
        }
        let inject_ok = !selfplay_on || stages.last().is_some_and(ok);
        if upstream_ok && inject_ok {
            let regress = regress_stage(&r, cfg, selfplay_on);
            let report = if ok(&regress) { report_stage(&r, cfg, &regress) } else { stale("report", "regress failed") };
            stages.push(regress);
            stages.push(report);
        } else {
            stages.push(stale("regress", "an upstream stage failed"));
            stages.push(stale("report", "an upstream stage failed"));
        }
    } else {
        for name in ["novelty", "evaluate"] {
            stages.push(stale(name, "ingest failed"));
        }
        if selfplay_on {
            stages.push(stale("selfplay", "ingest failed"));
            stages.push(stale("inject", "ingest failed"));
        }
        stages.push(stale("regress", "ingest failed"));
        stages.push(stale("report", "ingest failed"));
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        config: cfg.clone(),
        config_sha256: sha256_hex(serde_json::to_string(cfg)?.as_bytes()),
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        ok: stages.iter().all(ok),
        stages,
    };
    fs::write(out.join(RUN_MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}
