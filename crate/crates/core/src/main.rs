use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use gocf::corpus::{ingest_corpus, CorpusDb, IngestConfig};
use gocf::engine::{evaluate_corpus, open_engine, write_evals_csv, EngineSettings, EvalCache, EvalConfig, Evaluator, MockEngine, Ruleset, SelfplayConfig, DEFAULT_TIMEOUT};
use gocf::novelty::{build_prefix_index, inject_synthetic_games, novelty_distribution, write_novelty_csv, NoveltyConfig};
use gocf::panel::{
    default_cutoff, read_observations_csv, read_replication_csv, table1_model, table1_rows, trend_file_name, write_observations_csv,
    write_panel_csv, write_table1_csv, write_trend_csv, Attribution, FeOptions, MoveObservation, Period, PeriodKind, Table1Model,
};
use gocf::pipeline::regress::{load_observations, metric_trend};
use gocf::pipeline::{apply_filter, bundled_corpus_dir, render_report, run_pipeline, verify, FilterSpec, Metric, PipelineConfig, RunOptions, StageStatus};

#[derive(Parser)]
#[command(name = "gocf", version, about = "Go game-record corpus analysis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, validate, order and deduplicate an SGF corpus into a database directory.
    Ingest(IngestArgs),
    /// Find each game's first historically novel move.
    Novelty(NoveltyArgs),
    /// Evaluate every decision with an engine and compute the DQI.
    Evaluate(EvaluateArgs),
    /// Generate engine self-play games as SGF.
    Selfplay(SelfplayArgs),
    /// Fit the move-level models or period-effect trends.
    Regress(RegressArgs),
    /// Write the subsets of move observations selected by filters.
    Filter(FilterArgs),
    /// Render trend CSVs to SVG charts with a text summary.
    Report(ReportArgs),
    /// Run every stage from a TOML configuration.
    Run(RunArgs),
    /// Cross-check the components against reference implementations.
    Verify(VerifyArgs),
    /// Serve the built-in mock engine on stdin/stdout.
    #[command(hide = true)]
    MockEngine,
}

#[derive(Args)]
struct EngineArgs {
    /// `mock` or a shell command speaking the JSON line protocol.
    #[arg(long, env = "GO_CF_ENGINE", default_value = "mock")]
    engine: String,
    #[arg(long, default_value_t = 50)]
    visits: u32,
    #[arg(long, default_value_t = 6.5)]
    komi: f64,
    #[arg(long, default_value = "japanese")]
    rules: Ruleset,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs())]
    timeout: u64,
    /// Evaluation cache file; in-memory when absent.
    #[arg(long, env = "GO_CF_CACHE")]
    cache: Option<PathBuf>,
}

impl EngineArgs {
    fn settings(&self) -> EngineSettings {
        EngineSettings {
            visits: self.visits,
            komi: self.komi,
            ruleset: self.rules,
        }
    }

    fn evaluator(&self) -> anyhow::Result<Evaluator<Box<dyn gocf::engine::AnalysisEngine + Send>>> {
        let engine = open_engine(&self.engine, Duration::from_secs(self.timeout), 8)?;
        let cache = match &self.cache {
            Some(p) => {
                if let Some(dir) = p.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                EvalCache::open(p).with_context(|| format!("opening cache {}", p.display()))?
            }
            None => EvalCache::in_memory(),
        };
        Ok(Evaluator::new(engine, cache))
    }
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_dedup: bool,
    /// Keep games with handicap or setup stones.
    #[arg(long)]
    include_handicap: bool,
    #[arg(long)]
    date_min: Option<NaiveDate>,
    #[arg(long)]
    date_max: Option<NaiveDate>,
}

#[derive(Args)]
struct NoveltyArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long, default_value_t = 60)]
    max_move: u32,
    /// Compare sequences up to board symmetry.
    #[arg(long)]
    canonicalize: bool,
    /// Directory of SGF games to inject before the cutoff.
    #[arg(long, requires = "inject_date")]
    inject: Option<PathBuf>,
    #[arg(long)]
    inject_date: Option<NaiveDate>,
    #[arg(long, default_value_t = default_cutoff())]
    cutoff: NaiveDate,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    db: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 60)]
    max_move: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelfplayArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 600)]
    games: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    max_move: u32,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long, default_value_t = 0.02)]
    temperature: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    #[value(name = "table1-m1")]
    Table1M1,
    #[value(name = "table1-m2")]
    Table1M2,
    Trend,
}

#[derive(Args)]
struct ObservationSource {
    /// Pipeline output directory, observations CSV or replication CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// After-AI cutoff; repeat to fit several.
    #[arg(long, default_values_t = [default_cutoff()])]
    cutoff: Vec<NaiveDate>,
}

impl ObservationSource {
    fn load(&self, cutoff: NaiveDate) -> anyhow::Result<Vec<MoveObservation>> {
        if self.input.is_dir() {
            return load_observations(&self.input, cutoff);
        }
        let rows = match read_observations_csv(&self.input) {
            Ok(rows) => rows,
            Err(_) => read_replication_csv(&self.input, cutoff).with_context(|| format!("reading {}", self.input.display()))?,
        };
        Ok(rows
            .into_iter()
            .map(|mut r| {
                r.after_ai = r.date >= cutoff;
                r
            })
            .collect())
    }

    fn out_dir(&self, out: &Path, cutoff: NaiveDate) -> PathBuf {
        if self.cutoff.len() > 1 {
            out.join(format!("cutoff-{cutoff}"))
        } else {
            out.to_path_buf()
        }
    }
}

#[derive(Args)]
struct RegressArgs {
    #[arg(long, required = true)]
    model: Vec<ModelArg>,
    #[arg(long, default_value = "dqi")]
    metric: Metric,
    #[arg(long, default_value = "year")]
    period: PeriodKind,
    #[command(flatten)]
    source: ObservationSource,
    /// Baseline period for trends (`YYYY` or `YYYY-MM`); earliest by default.
    #[arg(long)]
    baseline: Option<Period>,
    #[arg(long, value_enum, default_value = "novel-move-player")]
    attribution: AttributionArg,
    #[arg(long, default_value_t = 60)]
    max_move: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttributionArg {
    NovelMovePlayer,
    BothPlayers,
}

impl From<AttributionArg> for Attribution {
    fn from(a: AttributionArg) -> Self {
        match a {
            AttributionArg::NovelMovePlayer => Attribution::NovelMovePlayer,
            AttributionArg::BothPlayers => Attribution::BothPlayers,
        }
    }
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    source: ObservationSource,
    /// Filter to apply; repeatable.
    #[arg(long, required = true)]
    spec: Vec<FilterSpec>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = default_cutoff())]
    cutoff: NaiveDate,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Rerun every stage.
    #[arg(long)]
    force: bool,
    /// Overrides the configured engine command.
    #[arg(long, env = "GO_CF_ENGINE")]
    engine: Option<String>,
    /// Overrides the configured cache path.
    #[arg(long, env = "GO_CF_CACHE")]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Corpus to check; the bundled one by default.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Ingest(a) => ingest(a)?,
        Command::Novelty(a) => novelty(a)?,
        Command::Evaluate(a) => evaluate(a)?,
        Command::Selfplay(a) => selfplay(a)?,
        Command::Regress(a) => regress(a)?,
        Command::Filter(a) => filter(a)?,
        Command::Report(a) => {
            for p in render_report(&a.input, &a.out, Some(a.cutoff))? {
                println!("{}", p.display());
            }
        }
        Command::Run(a) => return run(a),
        Command::Verify(a) => {
            let corpus = a.corpus.unwrap_or_else(bundled_corpus_dir);
            let checks = verify(&corpus)?;
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::MockEngine => MockEngine::serve(io::stdin().lock(), BufWriter::new(io::stdout().lock()))?,
    }
    Ok(ExitCode::SUCCESS)
}

fn ingest(a: IngestArgs) -> anyhow::Result<()> {
    let cfg = IngestConfig {
        date_min: a.date_min,
        date_max: a.date_max,
        include_setup: a.include_handicap,
        dedup: !a.no_dedup,
    };
    let db = ingest_corpus(&a.corpus, &cfg)?;
    db.write(&a.out)?;
    println!("{}", serde_json::to_string_pretty(&db.stats)?);
    Ok(())
}

fn novelty(a: NoveltyArgs) -> anyhow::Result<()> {
    let db = CorpusDb::open(&a.db)?;
    let cfg = NoveltyConfig {
        max_move: a.max_move,
        canonicalize: a.canonicalize,
    };
    let records = match (&a.inject, a.inject_date) {
        (Some(dir), Some(date)) => {
            let synth = ingest_corpus(dir, &IngestConfig { dedup: false, ..IngestConfig::default() })?;
            inject_synthetic_games(&db.games, &synth.games, date, a.cutoff, &cfg)?
        }
        _ => build_prefix_index(&db.games, &cfg)?.1,
    };
    write_novelty_csv(&a.out, &records)?;
    let dist = novelty_distribution(&records, a.max_move)?;
    println!(
        "{} games, {} with a novel move; half are novel by move {}",
        dist.n_games,
        dist.n_defined,
        dist.move_reaching(0.5).map_or_else(|| "-".into(), |k| k.to_string())
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let db = CorpusDb::open(&a.db)?;
    let mut ev = a.engine.evaluator()?;
    let cfg = EvalConfig {
        max_move: a.max_move,
        settings: a.engine.settings(),
    };
    let evals = evaluate_corpus(&mut ev, &db.games, &cfg)?;
    write_evals_csv(&a.out, &evals)?;
    println!("{} decisions evaluated, {} engine requests", evals.len(), ev.engine().requests_sent());
    Ok(())
}

fn selfplay(a: SelfplayArgs) -> anyhow::Result<()> {
    let mut ev = a.engine.evaluator()?;
    let cfg = SelfplayConfig {
        n_games: a.games,
        max_move: a.max_move,
        seed: a.seed,
        top_k: a.top_k,
        temperature: a.temperature,
        settings: a.engine.settings(),
    };
    let games = gocf::engine::selfplay_generate(&mut ev, &cfg);
    let paths = gocf::pipeline::write_sgf_dir(&a.out, &games)?;
    println!("{} of {} games written to {}", paths.len(), a.games, a.out.display());
    if paths.len() < a.games {
        bail!("{} self-play games failed", a.games - paths.len());
    }
    Ok(())
}

fn regress(a: RegressArgs) -> anyhow::Result<()> {
    let opts = FeOptions::default();
    for &cutoff in &a.source.cutoff {
        let obs = a.source.load(cutoff)?;
        let out = a.source.out_dir(&a.out, cutoff);
        std::fs::create_dir_all(&out)?;
        let mut table = Vec::new();
        for &m in &a.model {
            match m {
                ModelArg::Table1M1 | ModelArg::Table1M2 => {
                    let model = if m == ModelArg::Table1M1 { Table1Model::M1 } else { Table1Model::M2 };
                    table.push((model, table1_model(&obs, model, &opts).with_context(|| format!("{model} at cutoff {cutoff}"))?));
                }
                ModelArg::Trend => {
                    let (panel, fit) = metric_trend(&obs, a.metric, a.period, a.baseline, a.max_move, a.attribution.into(), &opts)?;
                    write_panel_csv(&out.join(format!("panel_{}_{}.csv", a.metric, a.period)), &panel)?;
                    let path = out.join(trend_file_name(&a.metric.to_string(), a.period));
                    write_trend_csv(&path, &fit.points)?;
                    println!("cutoff {cutoff}: {} periods -> {}", fit.points.len(), path.display());
                    if !fit.dropped_periods.is_empty() {
                        println!("  {} periods not linked to the baseline were left out", fit.dropped_periods.len());
                    }
                    for p in &fit.points {
                        println!("  {}  {:>9.4}  [{:.4}, {:.4}]", p.period, p.effect, p.ci_low, p.ci_high);
                    }
                }
            }
        }
        if !table.is_empty() {
            let path = out.join("table1.csv");
            write_table1_csv(&path, &table)?;
            println!("cutoff {cutoff}: {}", path.display());
            for (m, r) in &table {
                for row in table1_rows(*m, r) {
                    println!("  {:<10} {:<28} {:>10}{:<3} {:>10}", row.model, row.row, row.estimate, row.stars, row.se);
                }
            }
        }
    }
    Ok(())
}

fn filter(a: FilterArgs) -> anyhow::Result<()> {
    for &cutoff in &a.source.cutoff {
        let obs = a.source.load(cutoff)?;
        let out = a.source.out_dir(&a.out, cutoff);
        std::fs::create_dir_all(&out)?;
        for spec in &a.spec {
            let rows = apply_filter(&obs, *spec);
            let path = out.join(format!("{}.csv", spec.slug()));
            write_observations_csv(&path, &rows)?;
            println!("{spec}: {} of {} rows -> {}", rows.len(), obs.len(), path.display());
        }
    }
    Ok(())
}

fn run(a: RunArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(e) = a.engine {
        cfg.engine.command = e;
    }
    if let Some(c) = a.cache {
        cfg.engine.cache = Some(c);
    }
    let manifest = run_pipeline(&cfg, &a.out, &RunOptions { force: a.force })?;
    for s in &manifest.stages {
        let status = match s.status {
            StageStatus::Ran => "ran",
            StageStatus::Skipped => "skipped",
            StageStatus::Failed => "FAILED",
            StageStatus::Stale => "not run",
        };
        println!("{:<9} {:<8} {} outputs", s.name, status, s.outputs.len());
        for n in &s.notes {
            println!("          {n}");
        }
        if let Some(e) = &s.error {
            println!("          error: {e}");
        }
    }
    Ok(if manifest.ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
