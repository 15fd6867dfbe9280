//! Counterfactual evaluation of human moves by an analysis engine.
//!
//! For every move the position before it is sent to the engine; the engine's
//! preferred move and the human's actual move are both evaluated, and the
//! Decision Quality Index is
//!
//! ```text
//! dqi = 100 - 100 * (best_winrate - human_winrate)
//! ```
//!
//! with `best_winrate` the maximum over the engine's candidates and the human
//! move, so `dqi <= 100`. Win rates are from the perspective of the side to
//! move.

mod cache;
mod mock;
mod process;
pub mod protocol;
mod selfplay;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{replay, ReplayError};
use crate::record::{GameRecord, SetupStone};
use crate::rules::{Board, Color, Point, RuleError};

pub use cache::{decode_record, encode_record, CacheKey, EvalCache, MAGIC as CACHE_MAGIC};
pub use mock::{mock_score, mock_winrate, mock_winrate_from_score, MockEngine, MOCK_ENGINE_ID};
pub use process::{ProcessEngine, DEFAULT_TIMEOUT};
pub use protocol::{move_from_wire, move_to_wire, AllowMoves, AnalysisRequest, AnalysisResponse, MoveInfo, Ruleset};
pub use selfplay::{selfplay_generate, SelfplayConfig};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("could not start engine: {0}")]
    Spawn(#[source] std::io::Error),
    #[error("engine crashed again after a restart")]
    Crashed,
    #[error("engine timed out after {secs} s waiting for query {query_id}")]
    Timeout { query_id: String, secs: f64 },
    #[error("malformed engine response ({reason}): {line}")]
    Malformed { line: String, reason: String },
    #[error("engine reported an error for query {id}: {message}")]
    Engine { id: String, message: String },
}

pub(crate) fn parse_response_line(line: &str) -> Result<AnalysisResponse, EngineError> {
    serde_json::from_str(line).map_err(|e| EngineError::Malformed {
        line: line.to_string(),
        reason: e.to_string(),
    })
}

/// Anything that answers analysis requests. Responses are returned in
/// request order.
pub trait AnalysisEngine {
    fn engine_id(&self) -> &str;
    fn analyze(&mut self, requests: &[AnalysisRequest]) -> Result<Vec<AnalysisResponse>, EngineError>;
    /// Requests delivered to the engine so far.
    fn requests_sent(&self) -> u64;
}

impl<E: AnalysisEngine + ?Sized> AnalysisEngine for Box<E> {
    fn engine_id(&self) -> &str {
        (**self).engine_id()
    }
    fn analyze(&mut self, requests: &[AnalysisRequest]) -> Result<Vec<AnalysisResponse>, EngineError> {
        (**self).analyze(requests)
    }
    fn requests_sent(&self) -> u64 {
        (**self).requests_sent()
    }
}

/// `"mock"` selects the built-in engine; anything else is a shell command.
pub fn open_engine(spec: &str, timeout: Duration, max_in_flight: usize) -> Result<Box<dyn AnalysisEngine + Send>, EngineError> {
    if spec == "mock" {
        Ok(Box::new(MockEngine::new()))
    } else {
        Ok(Box::new(
            ProcessEngine::spawn(spec)?
                .with_timeout(timeout)
                .with_max_in_flight(max_in_flight),
        ))
    }
}

/// One position's analysis: engine candidates plus any forced moves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Argmax of `winrates` (ties broken by `(row, col)`, pass last).
    pub best_move: String,
    pub winrates: BTreeMap<String, f64>,
    pub visits_used: u32,
    pub engine_id: String,
    /// Moves that were only evaluated because a query forced them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forced: Vec<String>,
}

fn rank_key(m: &str) -> (u8, u8, u8) {
    match move_from_wire(m) {
        Some(Some(p)) => (0, p.row, p.col),
        _ => (1, 0, 0),
    }
}

/// Argmax over `(move, winrate)` pairs with the deterministic tie-break.
pub fn argmax_move<'a>(items: impl Iterator<Item = (&'a str, f64)>) -> Option<(&'a str, f64)> {
    items.fold(None, |best: Option<(&str, f64)>, (m, w)| match best {
        None => Some((m, w)),
        Some((bm, bw)) => {
            if w > bw || (w == bw && rank_key(m) < rank_key(bm)) {
                Some((m, w))
            } else {
                Some((bm, bw))
            }
        }
    })
}

impl Evaluation {
    fn from_infos(infos: &[MoveInfo], engine_id: &str) -> Option<Evaluation> {
        let mut e = Evaluation {
            best_move: String::new(),
            winrates: BTreeMap::new(),
            visits_used: 0,
            engine_id: engine_id.to_string(),
            forced: Vec::new(),
        };
        e.merge(infos, false);
        (!e.winrates.is_empty()).then_some(e)
    }

    fn merge(&mut self, infos: &[MoveInfo], forced: bool) {
        for info in infos {
            if !self.winrates.contains_key(&info.mv) {
                self.winrates.insert(info.mv.clone(), info.winrate);
                if forced {
                    self.forced.push(info.mv.clone());
                }
            }
            self.visits_used = self.visits_used.max(info.visits);
        }
        self.forced.sort();
        if let Some((m, _)) = argmax_move(self.winrates.iter().map(|(m, w)| (m.as_str(), *w))) {
            self.best_move = m.to_string();
        }
    }

    /// Engine candidates only (forced moves excluded).
    pub fn candidates(&self) -> impl Iterator<Item = (&str, f64)> {
        self.winrates
            .iter()
            .filter(|(m, _)| self.forced.binary_search(m).is_err())
            .map(|(m, w)| (m.as_str(), *w))
    }

    pub fn winrate(&self, mv: &str) -> Option<f64> {
        self.winrates.get(mv).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineSettings {
    pub visits: u32,
    pub komi: f64,
    pub ruleset: Ruleset,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            visits: 10_000,
            komi: 6.5,
            ruleset: Ruleset::Japanese,
        }
    }
}

impl EngineSettings {
    /// Small visit budget for desk-scale runs.
    pub fn desk() -> Self {
        EngineSettings {
            visits: 50,
            ..Self::default()
        }
    }
}

/// A position to evaluate, described by its history from the empty board.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionQuery {
    pub setup: Vec<SetupStone>,
    pub moves: Vec<(Color, Option<Point>)>,
    pub to_move: Color,
    pub komi: f64,
    pub ruleset: Ruleset,
    pub visits: u32,
}

impl PositionQuery {
    /// The position before move `move_number` (1-based) of `record`.
    pub fn before_move(record: &GameRecord, move_number: usize, settings: &EngineSettings) -> PositionQuery {
        let moves: Vec<_> = record.moves[..move_number - 1].iter().map(|m| (m.color, m.point)).collect();
        let to_move = record.moves[move_number - 1].color;
        PositionQuery {
            setup: record.setup_stones.clone(),
            moves,
            to_move,
            komi: settings.komi,
            ruleset: settings.ruleset,
            visits: settings.visits,
        }
    }

    pub fn board(&self) -> Result<Board, ReplayError> {
        let mut board = Board::new();
        for st in &self.setup {
            board.place_setup(st.color, st.point).map_err(ReplayError::Setup)?;
        }
        let first = self.moves.first().map_or(self.to_move, |m| m.0);
        board.set_to_move(if self.setup.is_empty() { Color::Black } else { first });
        for (i, (c, p)) in self.moves.iter().enumerate() {
            board.play(*c, *p).map_err(|error| ReplayError::Move {
                ordinal: i as u32 + 1,
                error,
            })?;
        }
        if board.to_move() != self.to_move {
            return Err(ReplayError::Move {
                ordinal: self.moves.len() as u32 + 1,
                error: RuleError::WrongTurn(self.to_move),
            });
        }
        Ok(board)
    }

    fn request(&self, id: String, forced: Option<Option<Point>>) -> AnalysisRequest {
        AnalysisRequest {
            id,
            initial_stones: self
                .setup
                .iter()
                .map(|s| (s.color.letter().to_string(), s.point.to_sgf()))
                .collect(),
            initial_player: (!self.setup.is_empty())
                .then(|| self.moves.first().map_or(self.to_move, |m| m.0).letter().to_string()),
            moves: AnalysisRequest::wire_moves(&self.moves),
            rules: self.ruleset,
            komi: self.komi,
            max_visits: self.visits,
            include_policy: false,
            allow_moves: forced.map(|m| {
                vec![AllowMoves {
                    player: self.to_move.letter().to_string(),
                    moves: vec![move_to_wire(m)],
                    until_depth: 1,
                }]
            }),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("query position does not replay: {0:?}")]
    Precondition(ReplayError),
    #[error("{context}: {source}")]
    Engine {
        context: String,
        #[source]
        source: EngineError,
    },
    #[error("engine returned no candidates for {0}")]
    NoCandidates(String),
    #[error("cache write failed: {0}")]
    Cache(#[from] std::io::Error),
    #[error(transparent)]
    Dqi(#[from] DqiError),
}

/// Engine plus evaluation cache.
pub struct Evaluator<E> {
    engine: E,
    cache: EvalCache,
    /// Positions sent per engine round trip; each round trip is persisted.
    pub batch_size: usize,
    next_id: u64,
}

impl<E: AnalysisEngine> Evaluator<E> {
    pub fn new(engine: E, cache: EvalCache) -> Self {
        Evaluator {
            engine,
            cache,
            batch_size: 8,
            next_id: 0,
        }
    }

    pub fn engine(&self) -> &E {
        &self.engine
    }

    pub fn cache(&self) -> &EvalCache {
        &self.cache
    }

    pub fn into_parts(self) -> (E, EvalCache) {
        (self.engine, self.cache)
    }

    fn key(&self, q: &PositionQuery, board: &Board) -> CacheKey {
        CacheKey::new(board.zobrist_hash(), q.to_move, q.komi, q.ruleset, q.visits, self.engine.engine_id())
    }

    pub fn evaluate_position(&mut self, q: &PositionQuery) -> Result<Evaluation, EvalError> {
        Ok(self.evaluate_batch(&[(q.clone(), None)], "position")?.remove(0))
    }

    /// Evaluates several positions, each optionally forcing one move into the
    /// result. Cached positions are not re-sent.
    pub fn evaluate_batch(&mut self, items: &[(PositionQuery, Option<Option<Point>>)], context: &str) -> Result<Vec<Evaluation>, EvalError> {
        let mut keys = Vec::with_capacity(items.len());
        for (q, _) in items {
            let board = q.board().map_err(EvalError::Precondition)?;
            keys.push(self.key(q, &board));
        }

        // phase 1: unrestricted analysis of uncached positions
        let mut pending: Vec<usize> = Vec::new();
        let mut seen = HashMap::new();
        for (i, k) in keys.iter().enumerate() {
            if self.cache.get(k).is_none() && seen.insert(k.clone(), i).is_none() {
                pending.push(i);
            }
        }
        self.round_trips(items, &keys, &pending, false, context)?;

        // phase 2: force moves the engine did not report
        let mut pending = Vec::new();
        let mut seen = HashMap::new();
        for (i, (k, (_, forced))) in keys.iter().zip(items).enumerate() {
            if let Some(m) = forced {
                let cached = self.cache.get(k).ok_or_else(|| EvalError::NoCandidates(context.to_string()))?;
                if cached.winrate(&move_to_wire(*m)).is_none() && seen.insert((k.clone(), *m), i).is_none() {
                    pending.push(i);
                }
            }
        }
        self.round_trips(items, &keys, &pending, true, context)?;

        keys.iter()
            .map(|k| self.cache.get(k).ok_or_else(|| EvalError::NoCandidates(context.to_string())))
            .collect()
    }

    fn round_trips(
        &mut self,
        items: &[(PositionQuery, Option<Option<Point>>)],
        keys: &[CacheKey],
        pending: &[usize],
        forced: bool,
        context: &str,
    ) -> Result<(), EvalError> {
        for chunk in pending.chunks(self.batch_size.max(1)) {
            let requests: Vec<AnalysisRequest> = chunk
                .iter()
                .map(|&i| {
                    self.next_id += 1;
                    let (q, f) = &items[i];
                    q.request(format!("q{}", self.next_id), if forced { *f } else { None })
                })
                .collect();
            let responses = self.engine.analyze(&requests).map_err(|source| EvalError::Engine {
                context: context.to_string(),
                source,
            })?;
            for (&i, resp) in chunk.iter().zip(responses) {
                let key = &keys[i];
                let eval = if forced {
                    let mut e = self.cache.get(key).ok_or_else(|| EvalError::NoCandidates(context.to_string()))?;
                    e.merge(&resp.move_infos, true);
                    e
                } else {
                    Evaluation::from_infos(&resp.move_infos, self.engine.engine_id())
                        .ok_or_else(|| EvalError::NoCandidates(format!("{context} (query {})", resp.id)))?
                };
                self.cache.put(key.clone(), eval)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DqiError {
    #[error("win rate {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("best win rate {best} below human win rate {human}")]
    BestBelowHuman { human: f64, best: f64 },
}

/// Decision Quality Index in percentage points.
pub fn dqi(human_winrate: f64, best_winrate: f64) -> Result<f64, DqiError> {
    for w in [human_winrate, best_winrate] {
        if !(0.0..=1.0).contains(&w) {
            return Err(DqiError::OutOfRange(w));
        }
    }
    if best_winrate < human_winrate {
        return Err(DqiError::BestBelowHuman {
            human: human_winrate,
            best: best_winrate,
        });
    }
    Ok(100.0 - 100.0 * (best_winrate - human_winrate))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionEval {
    pub game_id: String,
    pub move_number: u32,
    pub player_id: String,
    pub color: Color,
    pub human_move: String,
    pub human_winrate: f64,
    pub best_move: String,
    pub best_winrate: f64,
    pub dqi: f64,
    pub matched_ai: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub max_move: u32,
    pub settings: EngineSettings,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            max_move: 60,
            settings: EngineSettings::default(),
        }
    }
}

/// Evaluates the first `config.max_move` moves of a validated game.
pub fn evaluate_game<E: AnalysisEngine>(
    evaluator: &mut Evaluator<E>,
    record: &GameRecord,
    config: &EvalConfig,
) -> Result<Vec<DecisionEval>, EvalError> {
    replay(record, record.moves.len()).map_err(EvalError::Precondition)?;
    let n = record.moves.len().min(config.max_move as usize);
    let items: Vec<_> = (1..=n)
        .map(|m| {
            (
                PositionQuery::before_move(record, m, &config.settings),
                Some(record.moves[m - 1].point),
            )
        })
        .collect();
    let evals = evaluator.evaluate_batch(&items, &format!("game {}", record.game_id))?;
    record.moves[..n]
        .iter()
        .zip(evals)
        .map(|(mv, eval)| {
            let human = move_to_wire(mv.point);
            let human_w = eval
                .winrate(&human)
                .ok_or_else(|| EvalError::NoCandidates(format!("{} move {} (human move not evaluated)", record.game_id, mv.number)))?;
            let (best, best_w) = argmax_move(eval.candidates().chain(std::iter::once((human.as_str(), human_w))))
                .expect("human move present");
            let best = best.to_string();
            Ok(DecisionEval {
                game_id: record.game_id.clone(),
                move_number: mv.number,
                player_id: record.player_for(mv.color).to_string(),
                color: mv.color,
                matched_ai: best == human,
                human_move: human,
                human_winrate: human_w,
                best_move: best,
                best_winrate: best_w,
                dqi: dqi(human_w, best_w)?,
            })
        })
        .collect()
}

/// Evaluates every game in order.
pub fn evaluate_corpus<E: AnalysisEngine>(
    evaluator: &mut Evaluator<E>,
    games: &[GameRecord],
    config: &EvalConfig,
) -> Result<Vec<DecisionEval>, EvalError> {
    let mut out = Vec::new();
    for (i, g) in games.iter().enumerate() {
        out.extend(evaluate_game(evaluator, g, config)?);
        if (i + 1) % 100 == 0 {
            log::info!("evaluated {}/{} games", i + 1, games.len());
        }
    }
    Ok(out)
}

pub fn write_evals_csv(path: &Path, evals: &[DecisionEval]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for e in evals {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_evals_csv(path: &Path) -> Result<Vec<DecisionEval>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dqi_values() {
        assert_eq!(dqi(0.5, 0.5).unwrap(), 100.0);
        assert_eq!(dqi(0.5, 0.55).unwrap(), 95.0);
        assert_eq!(dqi(0.0, 1.0).unwrap(), 0.0);
        assert!(matches!(dqi(-0.1, 0.5), Err(DqiError::OutOfRange(_))));
        assert!(matches!(dqi(0.5, 1.5), Err(DqiError::OutOfRange(_))));
        assert!(matches!(dqi(0.6, 0.5), Err(DqiError::BestBelowHuman { .. })));
    }

    #[test]
    fn argmax_tie_break() {
        let items = [("pp", 0.5), ("dd", 0.5), ("pass", 0.5), ("dp", 0.4)];
        assert_eq!(argmax_move(items.into_iter()).unwrap().0, "dd");
    }

    #[test]
    fn query_precondition_blocks_engine() {
        let mut ev = Evaluator::new(MockEngine::new(), EvalCache::in_memory());
        let q = PositionQuery {
            setup: vec![],
            moves: vec![(Color::Black, Some(Point::new(3, 3))), (Color::White, Some(Point::new(3, 3)))],
            to_move: Color::Black,
            komi: 6.5,
            ruleset: Ruleset::Japanese,
            visits: 50,
        };
        assert!(matches!(ev.evaluate_position(&q), Err(EvalError::Precondition(_))));
        assert_eq!(ev.engine().requests_sent(), 0);
    }

    #[test]
    fn second_query_hits_cache() {
        let mut ev = Evaluator::new(MockEngine::new(), EvalCache::in_memory());
        let q = PositionQuery {
            setup: vec![],
            moves: vec![],
            to_move: Color::Black,
            komi: 6.5,
            ruleset: Ruleset::Japanese,
            visits: 50,
        };
        let a = ev.evaluate_position(&q).unwrap();
        let b = ev.evaluate_position(&q).unwrap();
        assert_eq!(a, b);
        assert_eq!(ev.engine().requests_sent(), 1);
        assert_eq!(a.best_move, "jj");
    }
}
