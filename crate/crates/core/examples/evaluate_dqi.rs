//! Scores every early decision of a few games with the mock engine and
//! prints the decision quality index per move.
//!
//! ```text
//! cargo run --example evaluate_dqi -- [N_GAMES] [CACHE_FILE]
//! ```
//!
//! With a cache file a second run sends no requests to the engine.

use gocf::corpus::{ingest_corpus, IngestConfig};
use gocf::engine::{evaluate_corpus, AnalysisEngine, EngineSettings, EvalCache, EvalConfig, Evaluator, MockEngine};
use gocf::pipeline::bundled_corpus_dir;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(3), |s| s.parse())?;
    let cache = match args.next() {
        Some(path) => EvalCache::open(path.as_ref())?,
        None => EvalCache::in_memory(),
    };
    let db = ingest_corpus(&bundled_corpus_dir(), &IngestConfig::default())?;
    let games = &db.games[..n.min(db.games.len())];
    let cfg = EvalConfig { max_move: 20, settings: EngineSettings::desk() };
    let mut ev = Evaluator::new(MockEngine::new(), cache);
    let evals = evaluate_corpus(&mut ev, games, &cfg)?;

    for e in &evals {
        println!(
            "{:<28} {:>2} {} {:<4} {:.4}  best {:<4} {:.4}  dqi {:7.3}{}",
            e.game_id,
            e.move_number,
            e.color.letter(),
            e.human_move,
            e.human_winrate,
            e.best_move,
            e.best_winrate,
            e.dqi,
            if e.matched_ai { "  =" } else { "" }
        );
    }
    let mean = evals.iter().map(|e| e.dqi).sum::<f64>() / evals.len().max(1) as f64;
    println!("{} decisions, mean dqi {mean:.3}, {} engine requests", evals.len(), ev.engine().requests_sent());
    Ok(())
}
