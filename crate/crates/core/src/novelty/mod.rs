//! Historical novelty of opening sequences.
//!
//! Games are processed in corpus order. A game's novel move is the first
//! move at which its sequence (colour and point, passes included) had never
//! appeared in any earlier game; its Novelty Index is `max_move` minus that
//! move number. Games whose whole (truncated) sequence already exists have
//! no novel move.

mod symmetry;
mod trie;

use std::io;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{sort_corpus, GameRecord, Move};
use crate::rules::{Color, Point, NUM_POINTS};

pub use symmetry::{canonicalize, transform, SYMMETRIES};
pub use trie::PrefixIndex;

pub const DEFAULT_MAX_MOVE: u32 = 60;

/// A `(colour, point-or-pass)` pair packed into 10 bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(pub u16);

impl Token {
    const PASS: u16 = NUM_POINTS as u16;
    const PER_COLOR: u16 = NUM_POINTS as u16 + 1;
    pub const COUNT: usize = 2 * (NUM_POINTS + 1);

    pub fn new(color: Color, point: Option<Point>) -> Token {
        let p = point.map_or(Self::PASS, |p| p.index() as u16);
        Token(color.index() as u16 * Self::PER_COLOR + p)
    }

    pub fn from_move(m: &Move) -> Token {
        Token::new(m.color, m.point)
    }

    pub fn decode(self) -> (Color, Option<Point>) {
        let color = if self.0 < Self::PER_COLOR { Color::Black } else { Color::White };
        let p = self.0 % Self::PER_COLOR;
        (color, (p != Self::PASS).then(|| Point::from_index(p as usize)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoveltyConfig {
    pub max_move: u32,
    /// Match sequences up to the eight board symmetries.
    pub canonicalize: bool,
}

impl Default for NoveltyConfig {
    fn default() -> Self {
        NoveltyConfig {
            max_move: DEFAULT_MAX_MOVE,
            canonicalize: false,
        }
    }
}

impl NoveltyConfig {
    pub fn tokens(&self, moves: &[Move]) -> Vec<Token> {
        let n = moves.len().min(self.max_move as usize);
        let raw: Vec<Token> = moves[..n].iter().map(Token::from_move).collect();
        if self.canonicalize {
            canonicalize(&raw)
        } else {
            raw
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoveltyRecord {
    pub game_id: String,
    pub date: NaiveDate,
    pub novel_move_number: Option<u32>,
    pub novelty_index: Option<u32>,
    pub is_synthetic: bool,
}

impl NoveltyRecord {
    pub fn new(game: &GameRecord, novel_move_number: Option<u32>, max_move: u32) -> Self {
        NoveltyRecord {
            game_id: game.game_id.clone(),
            date: game.date,
            novel_move_number,
            novelty_index: novel_move_number.map(|k| max_move - k),
            is_synthetic: game.is_synthetic,
        }
    }
}

#[derive(Debug, Error)]
pub enum NoveltyError {
    #[error("corpus is not in (date, game_id) order at game {0}")]
    Unsorted(String),
    #[error("max_move must be at least 1")]
    BadMaxMove,
    #[error("injection date {position} is not before the after-AI cutoff {cutoff}")]
    InjectionAfterCutoff { position: NaiveDate, cutoff: NaiveDate },
    #[error("no novelty records to summarize")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Builds the prefix index over an ordered corpus and reports each game's
/// novel move.
pub fn build_prefix_index(
    corpus: &[GameRecord],
    config: &NoveltyConfig,
) -> Result<(PrefixIndex, Vec<NoveltyRecord>), NoveltyError> {
    if config.max_move == 0 {
        return Err(NoveltyError::BadMaxMove);
    }
    for w in corpus.windows(2) {
        if w[0].order_key() >= w[1].order_key() {
            return Err(NoveltyError::Unsorted(w[1].game_id.clone()));
        }
    }
    let mut index = PrefixIndex::new(config.max_move as usize);
    let records = corpus
        .iter()
        .map(|g| {
            let novel = index.insert_game(g.date, &g.game_id, &config.tokens(&g.moves));
            NoveltyRecord::new(g, novel, config.max_move)
        })
        .collect();
    Ok((index, records))
}

/// Inserts synthetic games dated `position_date` (ordered before real games
/// of that date), rebuilds the index and returns records for real games only.
pub fn inject_synthetic_games(
    corpus: &[GameRecord],
    synthetic: &[GameRecord],
    position_date: NaiveDate,
    cutoff: NaiveDate,
    config: &NoveltyConfig,
) -> Result<Vec<NoveltyRecord>, NoveltyError> {
    if position_date >= cutoff {
        return Err(NoveltyError::InjectionAfterCutoff {
            position: position_date,
            cutoff,
        });
    }
    let mut merged: Vec<GameRecord> = corpus.to_vec();
    merged.extend(synthetic.iter().map(|g| {
        let mut g = g.clone();
        g.date = position_date;
        g.is_synthetic = true;
        g
    }));
    sort_corpus(&mut merged);
    let (_, records) = build_prefix_index(&merged, config)?;
    Ok(records.into_iter().filter(|r| !r.is_synthetic).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoveltyDistribution {
    pub max_move: u32,
    pub n_games: usize,
    pub n_defined: usize,
    pub n_absent: usize,
    /// `counts[k - 1]` games have their novel move at move `k`.
    pub counts: Vec<u64>,
    /// Share of all games whose novel move is at or before move `k`.
    pub cumulative_fraction: Vec<f64>,
    /// Share of defined novel moves at or before move `k`.
    pub cumulative_share_of_novel: Vec<f64>,
    pub absent_share: f64,
}

impl NoveltyDistribution {
    /// Smallest move number by which at least `fraction` of all games are novel.
    pub fn move_reaching(&self, fraction: f64) -> Option<u32> {
        self.cumulative_fraction
            .iter()
            .position(|&f| f >= fraction)
            .map(|i| i as u32 + 1)
    }
}

pub fn novelty_distribution(records: &[NoveltyRecord], max_move: u32) -> Result<NoveltyDistribution, NoveltyError> {
    if records.is_empty() {
        return Err(NoveltyError::Empty);
    }
    let mut counts = vec![0u64; max_move as usize];
    let mut n_defined = 0usize;
    for r in records {
        if let Some(k) = r.novel_move_number {
            let slot = (k as usize).clamp(1, max_move as usize) - 1;
            counts[slot] += 1;
            n_defined += 1;
        }
    }
    let n = records.len();
    let mut running = 0u64;
    let mut cumulative_fraction = Vec::with_capacity(counts.len());
    let mut cumulative_share_of_novel = Vec::with_capacity(counts.len());
    for &c in &counts {
        running += c;
        cumulative_fraction.push(running as f64 / n as f64);
        cumulative_share_of_novel.push(if n_defined == 0 { 0.0 } else { running as f64 / n_defined as f64 });
    }
    Ok(NoveltyDistribution {
        max_move,
        n_games: n,
        n_defined,
        n_absent: n - n_defined,
        counts,
        cumulative_fraction,
        cumulative_share_of_novel,
        absent_share: (n - n_defined) as f64 / n as f64,
    })
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    game_id: String,
    date: NaiveDate,
    novel_move_number: Option<u32>,
    novelty_index: Option<u32>,
    is_synthetic: bool,
}

pub fn write_novelty_csv(path: &Path, records: &[NoveltyRecord]) -> Result<(), NoveltyError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(CsvRow {
            game_id: r.game_id.clone(),
            date: r.date,
            novel_move_number: r.novel_move_number,
            novelty_index: r.novelty_index,
            is_synthetic: r.is_synthetic,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_novelty_csv(path: &Path) -> Result<Vec<NoveltyRecord>, NoveltyError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            Ok(NoveltyRecord {
                game_id: row.game_id,
                date: row.date,
                novel_move_number: row.novel_move_number,
                novelty_index: row.novelty_index,
                is_synthetic: row.is_synthetic,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgf::parse_sgf_from;

    fn game(id: &str, date: &str, moves: &str) -> GameRecord {
        let src = format!("(;DT[{date}]{})", moves.split(' ').enumerate().map(|(i, m)| {
            format!(";{}[{m}]", if i % 2 == 0 { "B" } else { "W" })
        }).collect::<String>());
        parse_sgf_from(src.as_bytes(), id).unwrap().remove(0)
    }

    #[test]
    fn token_roundtrip() {
        for c in [Color::Black, Color::White] {
            for p in Point::all().map(Some).chain([None]) {
                let t = Token::new(c, p);
                assert!((t.0 as usize) < Token::COUNT);
                assert_eq!(t.decode(), (c, p));
            }
        }
    }

    #[test]
    fn first_game_is_novel_at_move_one() {
        let g = game("a", "2000-01-01", "dd pp dp pd");
        let (_, recs) = build_prefix_index(&[g], &NoveltyConfig::default()).unwrap();
        assert_eq!(recs[0].novel_move_number, Some(1));
        assert_eq!(recs[0].novelty_index, Some(59));
    }

    #[test]
    fn divergence_at_move_ten() {
        let base = "dd pp dp pd qf nc fq cn jj";
        let a = game("a", "2000-01-01", &format!("{base} aa"));
        let b = game("b", "2001-01-01", &format!("{base} bb"));
        let (index, recs) = build_prefix_index(&[a, b], &NoveltyConfig::default()).unwrap();
        assert_eq!(recs[1].novel_move_number, Some(10));
        assert_eq!(recs[1].novelty_index, Some(50));
        assert_eq!(index.len(), 11);
        let prefix: Vec<Token> = NoveltyConfig::default().tokens(&game("x", "2000", base).moves);
        assert_eq!(index.earliest(&prefix).unwrap().1, "a");
    }

    #[test]
    fn repeated_sequence_has_no_novel_move() {
        let a = game("a", "2000-01-01", "dd pp");
        let b = game("b", "2000-01-02", "dd pp");
        let c = game("c", "2000-01-03", "dd");
        let (_, recs) = build_prefix_index(&[a, b, c], &NoveltyConfig::default()).unwrap();
        assert_eq!(recs[1].novel_move_number, None);
        assert_eq!(recs[1].novelty_index, None);
        assert_eq!(recs[2].novel_move_number, None);
    }

    #[test]
    fn unsorted_input_rejected() {
        let a = game("a", "2001-01-01", "dd");
        let b = game("b", "2000-01-01", "pp");
        assert!(matches!(build_prefix_index(&[a, b], &NoveltyConfig::default()), Err(NoveltyError::Unsorted(_))));
    }

    #[test]
    fn cap_applies() {
        let cfg = NoveltyConfig { max_move: 2, canonicalize: false };
        let a = game("a", "2000-01-01", "dd pp dp");
        let b = game("b", "2000-01-02", "dd pp pd");
        let (_, recs) = build_prefix_index(&[a, b], &cfg).unwrap();
        assert_eq!(recs[1].novel_move_number, None);
        assert_eq!(recs[0].novelty_index, Some(1));
    }

    #[test]
    fn canonical_matching_is_opt_in() {
        let a = game("a", "2000-01-01", "dd pp");
        let b = game("b", "2000-01-02", "pd dp");
        let (_, plain) = build_prefix_index(&[a.clone(), b.clone()], &NoveltyConfig::default()).unwrap();
        assert_eq!(plain[1].novel_move_number, Some(1));
        let cfg = NoveltyConfig { canonicalize: true, ..NoveltyConfig::default() };
        let (_, canon) = build_prefix_index(&[a, b], &cfg).unwrap();
        assert_eq!(canon[1].novel_move_number, None);
    }

    #[test]
    fn injection_before_cutoff_only() {
        let a = game("a", "2017-01-01", "dd pp");
        let s = game("s", "1900-01-01", "dd pp");
        let d = |s: &str| s.parse::<NaiveDate>().unwrap();
        let cfg = NoveltyConfig::default();
        let out = inject_synthetic_games(&[a.clone()], &[s.clone()], d("2016-03-14"), d("2016-03-15"), &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].novel_move_number, None);
        assert!(matches!(
            inject_synthetic_games(&[a], &[s], d("2016-03-15"), d("2016-03-15"), &cfg),
            Err(NoveltyError::InjectionAfterCutoff { .. })
        ));
    }

    #[test]
    fn distribution_basics() {
        let d = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let rec = |k: Option<u32>| NoveltyRecord {
            game_id: "g".into(),
            date: d,
            novel_move_number: k,
            novelty_index: k.map(|k| 60 - k),
            is_synthetic: false,
        };
        let all_one = vec![rec(Some(1)); 5];
        let dist = novelty_distribution(&all_one, 60).unwrap();
        assert_eq!(dist.cumulative_fraction[0], 1.0);
        let mixed = vec![rec(Some(1)), rec(Some(3)), rec(None), rec(Some(3))];
        let dist = novelty_distribution(&mixed, 60).unwrap();
        assert_eq!(dist.counts.iter().sum::<u64>(), 3);
        assert_eq!(dist.n_absent, 1);
        assert_eq!(dist.cumulative_fraction[2], 0.75);
        assert_eq!(dist.cumulative_share_of_novel[2], 1.0);
        assert_eq!(dist.move_reaching(0.5), Some(3));
        assert!(novelty_distribution(&[], 60).is_err());
    }
}
