//! Generates engine self-play games, places them just before a cutoff and
//! shows how that delays novelty in the games that follow.
//!
//! ```text
//! cargo run --example selfplay_inject -- [N_SELFPLAY] [SEED]
//! ```

use chrono::NaiveDate;
use gocf::corpus::{ingest_corpus, IngestConfig};
use gocf::engine::{selfplay_generate, EvalCache, Evaluator, MockEngine, SelfplayConfig};
use gocf::novelty::{build_prefix_index, inject_synthetic_games, NoveltyConfig};
use gocf::pipeline::bundled_corpus_dir;
use gocf::record::{sort_corpus, Move};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(20), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(2016), |s| s.parse())?;
    let cutoff = NaiveDate::from_ymd_opt(2016, 3, 15).unwrap();
    let at = cutoff.pred_opt().unwrap();

    let mut games = ingest_corpus(&bundled_corpus_dir(), &IngestConfig::default())?.games;
    let mut ev = Evaluator::new(MockEngine::new(), EvalCache::in_memory());
    let synthetic = selfplay_generate(&mut ev, &SelfplayConfig { n_games: n, seed, ..SelfplayConfig::default() });
    let first: Vec<String> = synthetic[0].moves.iter().take(8).map(|m| gocf::rules::point_to_sgf(m.point)).collect();
    println!("{} self-play games; first opens {}", synthetic.len(), first.join(" "));

    // a later human game that follows the first self-play game for 12 moves
    let mut follower = synthetic[0].clone();
    follower.game_id = "follower.sgf".into();
    follower.date = cutoff + chrono::Duration::days(30);
    follower.is_synthetic = false;
    follower.moves.truncate(12);
    follower.moves.push(Move { number: 13, color: follower.moves[11].color.opponent(), point: None });
    games.push(follower);
    sort_corpus(&mut games);

    let cfg = NoveltyConfig { max_move: 60, canonicalize: false };
    let (_, base) = build_prefix_index(&games, &cfg)?;
    let injected = inject_synthetic_games(&games, &synthetic, at, cutoff, &cfg)?;
    let mut delayed = 0;
    let mut after = 0;
    for (b, i) in base.iter().zip(&injected).filter(|(b, _)| b.date >= cutoff) {
        after += 1;
        if i.novel_move_number != b.novel_move_number {
            delayed += 1;
            println!("  {} novel at {:?} -> {:?}", b.game_id, b.novel_move_number, i.novel_move_number);
        }
    }
    println!("{delayed} of {after} post-cutoff games now leave known sequences later");
    Ok(())
}
