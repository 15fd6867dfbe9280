//! Builds the opening-sequence index over a corpus and prints where games
//! first leave known territory.
//!
//! ```text
//! cargo run --example novelty_index -- [CORPUS_DIR] [MAX_MOVE]
//! ```

use std::path::PathBuf;

use gocf::corpus::{ingest_corpus, IngestConfig};
use gocf::novelty::{build_prefix_index, novelty_distribution, NoveltyConfig};
use gocf::pipeline::bundled_corpus_dir;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = args.next().map(PathBuf::from).unwrap_or_else(bundled_corpus_dir);
    let max_move: u32 = args.next().map_or(Ok(60), |s| s.parse())?;
    let db = ingest_corpus(&root, &IngestConfig::default())?;
    let cfg = NoveltyConfig { max_move, canonicalize: false };
    let (index, records) = build_prefix_index(&db.games, &cfg)?;
    println!("{} games, {} distinct prefixes", records.len(), index.len());

    let dist = novelty_distribution(&records, max_move)?;
    println!("novel move found in {}; none within {max_move} moves in {}", dist.n_defined, dist.n_absent);
    for k in [1, 5, 10, 20, 40, 60].into_iter().filter(|k| *k <= max_move) {
        println!("  by move {k:>2}: {:5.1}% of games", 100.0 * dist.cumulative_fraction[k as usize - 1]);
    }
    for r in records.iter().take(5) {
        println!("  {} {} -> {:?}", r.date, r.game_id, r.novel_move_number);
    }
    Ok(())
}
