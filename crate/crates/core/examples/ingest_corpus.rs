//! Ingests a directory of SGF files (or `.zip` archives of them) and writes
//! a corpus database.
//!
//! ```text
//! cargo run --example ingest_corpus -- [CORPUS_DIR] [OUT_DIR]
//! ```
//!
//! Defaults to the bundled synthetic corpus.

use std::path::PathBuf;

use gocf::corpus::{ingest_corpus, IngestConfig};
use gocf::pipeline::bundled_corpus_dir;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = args.next().map(PathBuf::from).unwrap_or_else(bundled_corpus_dir);
    let db = ingest_corpus(&root, &IngestConfig::default())?;
    let s = &db.stats;
    println!("{} files seen, {} games kept", s.files_seen, s.games);
    println!(
        "malformed {}  illegal {}  out of scope {}  setup {}  duplicates {}",
        s.malformed_files, s.invalid_games, s.out_of_scope_games, s.excluded_setup, s.duplicates_removed
    );
    if let (Some(first), Some(last)) = (db.games.first(), db.games.last()) {
        println!("dates {} .. {}", first.date, last.date);
    }
    if let Some(out) = args.next() {
        let manifest = db.write(&PathBuf::from(&out))?;
        println!("database written to {out} ({} games)", manifest.stats.games);
    }
    Ok(())
}
