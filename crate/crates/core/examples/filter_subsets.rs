//! Splits the move-level observations into the analysis subsets and prints
//! the size and mean decision quality of each.
//!
//! ```text
//! cargo run --release --example filter_subsets
//! ```

use chrono::NaiveDate;
use gocf::corpus::{ingest_corpus, IngestConfig};
use gocf::engine::{evaluate_corpus, EngineSettings, EvalCache, EvalConfig, Evaluator, MockEngine};
use gocf::novelty::{build_prefix_index, NoveltyConfig};
use gocf::pipeline::{apply_filter, bundled_corpus_dir, join_observations, FilterSpec};

fn main() -> anyhow::Result<()> {
    let cutoff = NaiveDate::from_ymd_opt(2016, 3, 15).unwrap();
    let db = ingest_corpus(&bundled_corpus_dir(), &IngestConfig::default())?;
    let (_, novelty) = build_prefix_index(&db.games, &NoveltyConfig { max_move: 60, canonicalize: false })?;
    let mut ev = Evaluator::new(MockEngine::new(), EvalCache::in_memory());
    let evals = evaluate_corpus(&mut ev, &db.games, &EvalConfig { max_move: 60, settings: EngineSettings::desk() })?;
    let obs = join_observations(&evals, &novelty, &db.games, cutoff)?;

    let mut specs = vec![FilterSpec::All, FilterSpec::MatchesAi, FilterSpec::DiffersFromAi];
    specs.extend((1..=FilterSpec::STAGE_BUCKETS).map(FilterSpec::StageBucket));
    specs.extend([
        FilterSpec::OpponentDeviationResponse(None),
        FilterSpec::OpponentDeviationResponse(Some(2)),
        FilterSpec::NovelMovesOnly,
        FilterSpec::NovelMatchesAi,
        FilterSpec::NovelDiffersFromAi,
    ]);
    for spec in specs {
        let rows = apply_filter(&obs, spec);
        let mean = rows.iter().map(|r| r.dqi).sum::<f64>() / rows.len().max(1) as f64;
        println!("{:<32} {:>6} moves  mean dqi {:7.3}", spec.to_string(), rows.len(), mean);
    }
    Ok(())
}
