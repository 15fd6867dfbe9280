//! Writes a reproducible synthetic SGF corpus.
//!
//! ```text
//! cargo run --example generate_corpus -- OUT_DIR [N_GAMES] [SEED]
//! ```
//!
//! With no count or seed this regenerates the bundled `data/synthetic300`.

use std::path::PathBuf;

use gocf::sgf::write_sgf;
use gocf::synthetic::{bundled_corpus_spec, synthetic_corpus, year_span};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synthetic-corpus".into()));
    let mut spec = bundled_corpus_spec();
    if let Some(n) = args.next() {
        spec.n_games = n.parse().expect("N_GAMES must be an integer");
    }
    if let Some(s) = args.next() {
        spec.seed = s.parse().expect("SEED must be an integer");
    }
    let games = synthetic_corpus(&spec);
    std::fs::create_dir_all(&out)?;
    for g in &games {
        std::fs::write(out.join(format!("{}.sgf", g.game_id)), write_sgf(g))?;
    }
    let (first, last) = year_span(&games).unwrap_or((0, 0));
    println!("{} games ({first}-{last}) written to {}", games.len(), out.display());
    Ok(())
}
