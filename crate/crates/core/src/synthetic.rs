//! Deterministic synthetic data: game corpora, planted-effect regression
//! panels and large token-level corpora for load testing.

use chrono::{Datelike, Duration, NaiveDate};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::mock_winrate;
use crate::panel::{MoveObservation, PeriodKind};
use crate::record::{DatePrecision, GameRecord, GameResult, Move};
use crate::rules::{Board, Color, Point, SplitMix64, NUM_POINTS};

pub fn blank_record(game_id: &str, date: NaiveDate) -> GameRecord {
    GameRecord {
        game_id: game_id.to_string(),
        date,
        date_precision: DatePrecision::Day,
        black_id: String::new(),
        white_id: String::new(),
        result: GameResult::Unknown,
        komi: 6.5,
        board_size: 19,
        setup_stones: Vec::new(),
        moves: Vec::new(),
        source_path: "synthetic".into(),
        is_synthetic: false,
    }
}

fn mix(a: u64, b: u64) -> u64 {
    SplitMix64::new(a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15)).next_u64()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_games: usize,
    pub seed: u64,
    pub n_players: usize,
    pub first_year: i32,
    pub last_date: NaiveDate,
    pub min_moves: u32,
    pub max_moves: u32,
    /// Moves up to this depth are usually drawn from a position-keyed book,
    /// so openings are shared across games.
    pub book_depth: u32,
    /// Let players copy the mock engine's top move, more often after
    /// `ai_date`. Costs one full mock ranking per early move.
    pub engine_guided: bool,
    pub ai_date: NaiveDate,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_games: 300,
            seed: 2016,
            n_players: 40,
            first_year: 1950,
            last_date: NaiveDate::from_ymd_opt(2021, 6, 30).expect("valid date"),
            min_moves: 60,
            max_moves: 100,
            book_depth: 24,
            engine_guided: true,
            ai_date: crate::panel::default_cutoff(),
        }
    }
}

struct Player {
    id: String,
    from: NaiveDate,
    to: NaiveDate,
    skill: f64,
}

fn players(spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Vec<Player> {
    let start = NaiveDate::from_ymd_opt(spec.first_year, 1, 1).expect("valid year");
    let span = (spec.last_date - start).num_days().max(1);
    (0..spec.n_players)
        .map(|i| {
            // careers of 10-35 years spread evenly over the range, so every
            // date has several active players
            let len = 365 * rng.random_range(10..=35i64);
            let centre = span * (2 * i as i64 + 1) / (2 * spec.n_players as i64);
            let from = start + Duration::days((centre - len / 2).clamp(0, span));
            let to = start + Duration::days((centre + len / 2).clamp(0, span));
            Player {
                id: format!("Player {:02}", i + 1),
                from,
                to,
                skill: rng.random_range(0.0..0.2),
            }
        })
        .collect()
}

fn pick_players(all: &[Player], date: NaiveDate, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let mut active: Vec<usize> = (0..all.len()).filter(|&i| all[i].from <= date && date <= all[i].to).collect();
    if active.len() < 2 {
        let dist = |p: &Player| (p.from - date).num_days().abs().min((p.to - date).num_days().abs());
        active = (0..all.len()).collect();
        active.sort_by_key(|&i| (dist(&all[i]), i));
        active.truncate(2);
    }
    let a = active[rng.random_range(0..active.len())];
    let mut b = a;
    while b == a {
        b = active[rng.random_range(0..active.len())];
    }
    (a, b)
}

/// Legal point ranked first under a position-keyed shuffle; `rank` picks
/// among the top few.
fn book_move(board: &Board, rank: usize) -> Option<Point> {
    let mut pts: Vec<(u64, Point)> = Point::all()
        .filter(|&p| board.is_legal(Some(p)))
        .map(|p| (mix(board.zobrist_hash(), p.index() as u64), p))
        .collect();
    if pts.is_empty() {
        return None;
    }
    let k = rank.min(pts.len() - 1);
    pts.select_nth_unstable_by_key(k, |t| t.0);
    Some(pts[k].1)
}

fn engine_move(board: &Board) -> Option<Point> {
    let mut best: Option<(f64, Point)> = None;
    for p in Point::all() {
        if let Some(w) = mock_winrate(board, Some(p)) {
            if best.is_none_or(|(bw, bp)| w > bw || (w == bw && p < bp)) {
                best = Some((w, p));
            }
        }
    }
    best.map(|b| b.1)
}

fn local_move(board: &Board, rng: &mut ChaCha8Rng) -> Option<Point> {
    let legal: Vec<Point> = board.legal_moves().into_iter().flatten().collect();
    if legal.is_empty() {
        return None;
    }
    let near: Vec<Point> = legal
        .iter()
        .copied()
        .filter(|p| {
            (-2i32..=2).any(|dr| {
                (-2i32..=2).any(|dc| Point::try_new(p.col as i32 + dc, p.row as i32 + dr).is_some_and(|q| board.get(q).is_some()))
            })
        })
        .collect();
    let pool = if near.is_empty() || rng.random_bool(0.2) { &legal } else { &near };
    Some(pool[rng.random_range(0..pool.len())])
}

fn play_game(spec: &CorpusSpec, date: NaiveDate, skill: [f64; 2], rng: &mut ChaCha8Rng) -> Vec<Move> {
    let n = rng.random_range(spec.min_moves..=spec.max_moves);
    let after_ai = date >= spec.ai_date;
    let mut board = Board::new();
    let mut moves = Vec::with_capacity(n as usize);
    for number in 1..=n {
        let color = board.to_move();
        let depth_share = 1.0 - (number as f64 / spec.book_depth.max(1) as f64);
        let p_book = if number <= spec.book_depth { 0.35 + 0.6 * depth_share } else { 0.0 };
        let p_engine = if spec.engine_guided && number <= 60 {
            0.3 + skill[color.index()] + if after_ai { 0.3 } else { 0.0 }
        } else {
            0.0
        };
        let u: f64 = rng.random();
        let point = if u < p_book {
            let rank = match rng.random_range(0..10) {
                0..=5 => 0,
                6..=8 => 1,
                _ => 2,
            };
            book_move(&board, rank)
        } else if rng.random_bool(p_engine.min(1.0)) {
            engine_move(&board)
        } else {
            local_move(&board, rng)
        };
        board.play(color, point).expect("generator only proposes legal moves");
        moves.push(Move { number, color, point });
    }
    moves
}

/// A chronologically spread corpus of legal games between recurring
/// players. Identical specs give identical corpora.
pub fn synthetic_corpus(spec: &CorpusSpec) -> Vec<GameRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let roster = players(spec, &mut rng);
    let start = NaiveDate::from_ymd_opt(spec.first_year, 1, 1).expect("valid year");
    let span = (spec.last_date - start).num_days();
    (0..spec.n_games)
        .map(|i| {
            let mut game_rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, i as u64));
            let date = start + Duration::days(game_rng.random_range(0..=span));
            let (b, w) = pick_players(&roster, date, &mut game_rng);
            let mut g = blank_record(&format!("syn-{:05}", i), date);
            g.black_id = roster[b].id.clone();
            g.white_id = roster[w].id.clone();
            g.source_path = format!("syn-{:05}.sgf", i);
            g.moves = play_game(spec, date, [roster[b].skill, roster[w].skill], &mut game_rng);
            g
        })
        .collect()
}

/// Spec of the 300-game corpus shipped in `data/synthetic300`.
pub fn bundled_corpus_spec() -> CorpusSpec {
    CorpusSpec::default()
}

/// Move-level panel for the after-AI/novelty models with known coefficients:
///
/// ```text
/// dqi = 85 + a_player + g_move + b1·after + b2·novel + b3·after·novel + e
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub seed: u64,
    pub n_players: usize,
    pub n_games: usize,
    pub moves_per_game: u32,
    pub beta: [f64; 3],
    pub noise_sd: f64,
    pub cutoff: NaiveDate,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            seed: 0,
            n_players: 200,
            n_games: 1_000,
            moves_per_game: 60,
            beta: [0.6, -0.6, 0.5],
            noise_sd: 1.0,
            cutoff: crate::panel::default_cutoff(),
        }
    }
}

pub fn planted_table1(spec: &PlantedSpec) -> Vec<MoveObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).expect("valid sd");
    let unit = Normal::new(0.0, 1.0).expect("valid sd");
    let alpha: Vec<f64> = (0..spec.n_players).map(|_| 3.0 * unit.sample(&mut rng)).collect();
    let gamma: Vec<f64> = (0..spec.moves_per_game).map(|m| -0.05 * m as f64).collect();
    let start = NaiveDate::from_ymd_opt(2010, 1, 1).expect("valid date");
    let span = (NaiveDate::from_ymd_opt(2021, 6, 30).expect("valid date") - start).num_days();
    let mut out = Vec::with_capacity(spec.n_games * spec.moves_per_game as usize);
    for g in 0..spec.n_games {
        let date = start + Duration::days(rng.random_range(0..=span));
        let after = date >= spec.cutoff;
        let b = rng.random_range(0..spec.n_players);
        let w = (b + rng.random_range(1..spec.n_players)) % spec.n_players;
        let novel = rng.random_range(1..=spec.moves_per_game);
        for m in 1..=spec.moves_per_game {
            let (me, them) = if m % 2 == 1 { (b, w) } else { (w, b) };
            let is_novel = m == novel;
            let (a, n) = (after as u8 as f64, is_novel as u8 as f64);
            let dqi = 85.0 + alpha[me] + gamma[m as usize - 1] + spec.beta[0] * a + spec.beta[1] * n + spec.beta[2] * a * n + noise.sample(&mut rng);
            out.push(MoveObservation {
                game_id: format!("planted-{g:05}"),
                move_number: m,
                player_id: format!("P{me:03}"),
                opponent_id: format!("P{them:03}"),
                date,
                month_id: PeriodKind::Month.of(date),
                dqi,
                matched_ai: false,
                after_ai: after,
                novelty_dummy: is_novel,
            });
        }
    }
    out
}

/// A large corpus for indexing load tests. Each game is 60 distinct points
/// in alternating colours, following popular continuations with high
/// probability so prefixes are shared; legality is not enforced.
/// Games come out in corpus order.
pub fn perf_corpus(n_games: usize, seed: u64) -> Vec<GameRecord> {
    let base = NaiveDate::from_ymd_opt(1950, 1, 1).expect("valid date");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_games)
        .map(|i| {
            let date = base + Duration::days((i as i64 * 26_000) / n_games.max(1) as i64);
            let mut g = blank_record(&format!("perf-{i:07}"), date);
            let mut used = [false; NUM_POINTS];
            let mut h = seed;
            let mut moves = Vec::with_capacity(60);
            for number in 1..=60u32 {
                let idx = loop {
                    let cand = if rng.random_bool(0.85) {
                        (mix(h, rng.random_range(0..3u64)) % NUM_POINTS as u64) as usize
                    } else {
                        rng.random_range(0..NUM_POINTS)
                    };
                    if !used[cand] {
                        break cand;
                    }
                    // collisions with earlier moves fall back to a free point
                    if let Some(free) = (0..NUM_POINTS).map(|k| (cand + k) % NUM_POINTS).find(|&k| !used[k]) {
                        break free;
                    }
                };
                used[idx] = true;
                h = mix(h, idx as u64 + 1);
                let color = if number % 2 == 1 { Color::Black } else { Color::White };
                moves.push(Move {
                    number,
                    color,
                    point: Some(Point::from_index(idx)),
                });
            }
            g.moves = moves;
            g.black_id = format!("B{}", i % 997);
            g.white_id = format!("W{}", i % 991);
            g
        })
        .collect()
}

/// Year of the earliest and latest game, for summaries.
pub fn year_span(games: &[GameRecord]) -> Option<(i32, i32)> {
    let min = games.iter().map(|g| g.date).min()?;
    let max = games.iter().map(|g| g.date).max()?;
    Some((min.year(), max.year()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate_record;
    use crate::corpus::ValidationStatus;

    #[test]
    fn corpus_is_deterministic_and_legal() {
        let spec = CorpusSpec {
            n_games: 12,
            engine_guided: false,
            ..CorpusSpec::default()
        };
        let a = synthetic_corpus(&spec);
        assert_eq!(a, synthetic_corpus(&spec));
        for g in &a {
            assert_eq!(validate_record(g).status, ValidationStatus::Ok);
            assert_ne!(g.black_id, g.white_id);
            assert!(g.moves.len() >= 60);
        }
    }

    #[test]
    fn perf_games_have_distinct_points() {
        for g in perf_corpus(50, 3) {
            let mut pts: Vec<_> = g.moves.iter().map(|m| m.point).collect();
            pts.sort();
            pts.dedup();
            assert_eq!(pts.len(), 60);
        }
    }

    #[test]
    fn planted_panel_shape() {
        let spec = PlantedSpec {
            n_games: 20,
            ..PlantedSpec::default()
        };
        let obs = planted_table1(&spec);
        assert_eq!(obs.len(), 20 * 60);
        for game in obs.chunks(60) {
            assert_eq!(game.iter().filter(|o| o.novelty_dummy).count(), 1);
        }
    }
}
