//! Estimates the yearly decision-quality trend over the bundled corpus and
//! draws it as an SVG chart.
//!
//! ```text
//! cargo run --release --example trend_chart -- [OUT.svg]
//! ```

use chrono::NaiveDate;
use gocf::corpus::{ingest_corpus, IngestConfig};
use gocf::engine::{evaluate_corpus, EngineSettings, EvalCache, EvalConfig, Evaluator, MockEngine};
use gocf::novelty::{build_prefix_index, NoveltyConfig};
use gocf::panel::{Attribution, FeOptions, PeriodKind};
use gocf::pipeline::regress::metric_trend;
use gocf::pipeline::{bundled_corpus_dir, join_observations, render_trend_svg, Metric};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "trend_dqi_year.svg".into());
    let cutoff = NaiveDate::from_ymd_opt(2016, 3, 15).unwrap();
    let max_move = 60;

    let db = ingest_corpus(&bundled_corpus_dir(), &IngestConfig::default())?;
    let (_, novelty) = build_prefix_index(&db.games, &NoveltyConfig { max_move, canonicalize: false })?;
    let mut ev = Evaluator::new(MockEngine::new(), EvalCache::in_memory());
    let evals = evaluate_corpus(&mut ev, &db.games, &EvalConfig { max_move, settings: EngineSettings::desk() })?;
    let obs = join_observations(&evals, &novelty, &db.games, cutoff)?;

    let (panel, fit) = metric_trend(&obs, Metric::Dqi, PeriodKind::Year, None, max_move, Attribution::NovelMovePlayer, &FeOptions::default())?;
    println!("{} player-year cells from {} moves", panel.len(), obs.len());
    for p in &fit.points {
        println!("  {}  {:+7.3}  [{:+7.3}, {:+7.3}]", p.period, p.effect, p.ci_low, p.ci_high);
    }
    if !fit.dropped_periods.is_empty() {
        println!("  not linked to the baseline: {:?}", fit.dropped_periods);
    }
    std::fs::write(&out, render_trend_svg("Decision quality by year", &fit.points, Some(cutoff)))?;
    println!("chart written to {out}");
    Ok(())
}
