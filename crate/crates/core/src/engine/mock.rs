//! Deterministic stand-in engine speaking the analysis dialect.
//!
//! For a candidate move `m` by the side to move, evaluated on the position
//! after `m` is played (captures resolved):
//!
//! ```text
//! s(m)       = (friendly - opponent) / 10 + (1 - d_center / 18) / 10
//! winrate(m) = 0.5 + 0.4 * tanh(s(m)) / 2
//! ```
//!
//! where `friendly` and `opponent` count stones within Chebyshev distance 2
//! of `m` (the played stone excluded) and `d_center` is the Euclidean
//! distance from `m` to the centre point. A pass scores `s = 0`. Candidates
//! are ranked by win rate, ties broken by `(row, col)`; passes are only
//! offered when no point move is legal. Unrestricted queries report the
//! top [`MockEngine::TOP_K`] moves.

use std::io::{BufRead, Write};

use crate::rules::{Board, Color, Point, BOARD_SIZE};

use super::protocol::{move_from_wire, move_to_wire, AnalysisRequest, AnalysisResponse, MoveInfo};
use super::{AnalysisEngine, EngineError};

pub const MOCK_ENGINE_ID: &str = "mock-v1";

/// Score of a point move for `color` on `after` (the position after the move).
pub fn mock_score(after: &Board, color: Color, p: Point) -> f64 {
    let mut friendly = 0i32;
    let mut opponent = 0i32;
    for dr in -2i32..=2 {
        for dc in -2i32..=2 {
            if dr == 0 && dc == 0 {
                continue;
            }
            if let Some(q) = Point::try_new(p.col as i32 + dc, p.row as i32 + dr) {
                match after.get(q) {
                    Some(c) if c == color => friendly += 1,
                    Some(_) => opponent += 1,
                    None => {}
                }
            }
        }
    }
    let center = (BOARD_SIZE / 2) as f64;
    let d = ((p.col as f64 - center).powi(2) + (p.row as f64 - center).powi(2)).sqrt();
    (friendly - opponent) as f64 / 10.0 + (1.0 - d / 18.0) / 10.0
}

pub fn mock_winrate_from_score(s: f64) -> f64 {
    0.5 + 0.4 * s.tanh() / 2.0
}

/// Win rate of `point` for the side to move on `board`; `None` if illegal.
pub fn mock_winrate(board: &Board, point: Option<Point>) -> Option<f64> {
    let color = board.to_move();
    let after = board.apply_move(color, point).ok()?;
    Some(match point {
        Some(p) => mock_winrate_from_score(mock_score(&after, color, p)),
        None => mock_winrate_from_score(0.0),
    })
}

fn rank_key(p: Option<Point>) -> (u8, u8, u8) {
    match p {
        Some(p) => (0, p.row, p.col),
        None => (1, 0, 0),
    }
}

#[derive(Clone, Debug, Default)]
pub struct MockEngine {
    requests: u64,
}

impl MockEngine {
    pub const TOP_K: usize = 10;

    pub fn new() -> Self {
        Self::default()
    }

    fn position(req: &AnalysisRequest) -> Result<Board, String> {
        let mut board = Board::new();
        for (c, m) in &req.initial_stones {
            let color = Color::from_letter(c).ok_or_else(|| format!("bad colour {c:?}"))?;
            let p = move_from_wire(m).flatten().ok_or_else(|| format!("bad setup point {m:?}"))?;
            board.place_setup(color, p).map_err(|e| e.to_string())?;
        }
        let first = match (&req.initial_player, req.moves.first()) {
            (Some(p), _) => Color::from_letter(p).ok_or_else(|| format!("bad initialPlayer {p:?}"))?,
            (None, Some((c, _))) if !req.initial_stones.is_empty() => {
                Color::from_letter(c).ok_or_else(|| format!("bad colour {c:?}"))?
            }
            _ => Color::Black,
        };
        board.set_to_move(first);
        for (i, (c, m)) in req.moves.iter().enumerate() {
            let color = Color::from_letter(c).ok_or_else(|| format!("bad colour {c:?}"))?;
            let p = move_from_wire(m).ok_or_else(|| format!("bad move {m:?}"))?;
            board
                .play(color, p)
                .map_err(|e| format!("illegal move {} ({c} {m}): {e}", i + 1))?;
        }
        Ok(board)
    }

    /// Answers one request.
    pub fn respond(req: &AnalysisRequest) -> AnalysisResponse {
        let board = match Self::position(req) {
            Ok(b) => b,
            Err(e) => {
                return AnalysisResponse {
                    id: req.id.clone(),
                    move_infos: vec![],
                    error: Some(e),
                    is_during_search: None,
                }
            }
        };
        let to_move = board.to_move();
        let restricted = req.allow_moves.as_ref().map(|allow| {
            allow
                .iter()
                .filter(|a| Color::from_letter(&a.player) == Some(to_move))
                .flat_map(|a| a.moves.iter().filter_map(|m| move_from_wire(m)))
                .collect::<Vec<_>>()
        });
        let candidates: Vec<Option<Point>> = match &restricted {
            Some(list) => list.clone(),
            None => {
                let legal: Vec<Option<Point>> = board.legal_moves().into_iter().filter(|m| m.is_some()).collect();
                if legal.is_empty() {
                    vec![None]
                } else {
                    legal
                }
            }
        };
        let mut scored: Vec<(Option<Point>, f64)> = candidates
            .into_iter()
            .filter_map(|m| mock_winrate(&board, m).map(|w| (m, w)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| rank_key(a.0).cmp(&rank_key(b.0))));
        scored.dedup_by(|a, b| a.0 == b.0);
        if restricted.is_none() {
            scored.truncate(Self::TOP_K);
        }
        AnalysisResponse {
            id: req.id.clone(),
            move_infos: scored
                .into_iter()
                .map(|(m, w)| MoveInfo {
                    mv: move_to_wire(m),
                    winrate: w,
                    visits: req.max_visits,
                })
                .collect(),
            error: None,
            is_during_search: None,
        }
    }

    /// Handles one protocol line, returning the response line.
    pub fn handle_line(line: &str) -> String {
        match serde_json::from_str::<AnalysisRequest>(line) {
            Ok(req) => Self::respond(&req).to_line(),
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_string))
                    .unwrap_or_default();
                serde_json::json!({ "id": id, "error": format!("could not parse request: {e}") }).to_string()
            }
        }
    }

    /// Serves the protocol until `input` closes.
    pub fn serve<R: BufRead, W: Write>(input: R, mut output: W) -> std::io::Result<()> {
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            writeln!(output, "{}", Self::handle_line(&line))?;
            output.flush()?;
        }
        Ok(())
    }
}

impl AnalysisEngine for MockEngine {
    fn engine_id(&self) -> &str {
        MOCK_ENGINE_ID
    }

    fn analyze(&mut self, requests: &[AnalysisRequest]) -> Result<Vec<AnalysisResponse>, EngineError> {
        requests
            .iter()
            .map(|req| {
                self.requests += 1;
                // round-trip through the wire format so the in-process path
                // exercises exactly what a child process would see
                let line = Self::handle_line(&req.to_line());
                super::parse_response_line(&line)
            })
            .collect()
    }

    fn requests_sent(&self) -> u64 {
        self.requests
    }
}
