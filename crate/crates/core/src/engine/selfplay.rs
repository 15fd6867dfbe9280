use chrono::NaiveDate;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::record::{DatePrecision, GameRecord, GameResult, Move};
use crate::rules::{Board, Color};

use super::{move_from_wire, AnalysisEngine, EngineSettings, Evaluator, PositionQuery};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfplayConfig {
    pub n_games: usize,
    pub max_move: u32,
    pub seed: u64,
    /// Sample among the engine's `top_k` candidates...
    pub top_k: usize,
    /// ...with weights `exp((winrate - best) / temperature)`.
    pub temperature: f64,
    pub settings: EngineSettings,
}

impl Default for SelfplayConfig {
    fn default() -> Self {
        SelfplayConfig {
            n_games: 600,
            max_move: 60,
            seed: 0,
            top_k: 5,
            temperature: 0.02,
            settings: EngineSettings::desk(),
        }
    }
}

fn game_seed(seed: u64, game: usize) -> u64 {
    let mut sm = crate::rules::SplitMix64::new(seed ^ (game as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    sm.next_u64()
}

/// Engine-versus-engine games from the empty board. Games whose engine
/// queries fail are logged and dropped. Records are dated 2000-01-01 and
/// flagged synthetic; injection re-dates them.
pub fn selfplay_generate<E: AnalysisEngine>(evaluator: &mut Evaluator<E>, config: &SelfplayConfig) -> Vec<GameRecord> {
    let engine_id = evaluator.engine().engine_id().to_string();
    let mut games = Vec::with_capacity(config.n_games);
    for g in 0..config.n_games {
        match play_one(evaluator, config, g) {
            Ok(moves) => games.push(GameRecord {
                game_id: format!("selfplay/{:016x}/{:06}", config.seed, g),
                date: NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date"),
                date_precision: DatePrecision::Day,
                black_id: format!("{engine_id} (black)"),
                white_id: format!("{engine_id} (white)"),
                result: GameResult::Unknown,
                komi: config.settings.komi,
                board_size: 19,
                setup_stones: Vec::new(),
                moves,
                source_path: format!("selfplay:{engine_id}:seed={}", config.seed),
                is_synthetic: true,
            }),
            Err(e) => log::warn!("self-play game {g} discarded: {e}"),
        }
    }
    games
}

fn play_one<E: AnalysisEngine>(evaluator: &mut Evaluator<E>, config: &SelfplayConfig, game: usize) -> Result<Vec<Move>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(game_seed(config.seed, game));
    let mut board = Board::new();
    let mut moves: Vec<Move> = Vec::with_capacity(config.max_move as usize);
    for number in 1..=config.max_move {
        let to_move = board.to_move();
        let q = PositionQuery {
            setup: Vec::new(),
            moves: moves.iter().map(|m| (m.color, m.point)).collect(),
            to_move,
            komi: config.settings.komi,
            ruleset: config.settings.ruleset,
            visits: config.settings.visits,
        };
        let eval = evaluator.evaluate_position(&q).map_err(|e| e.to_string())?;
        let mut cands: Vec<(&str, f64)> = eval.candidates().collect();
        cands.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        cands.truncate(config.top_k.max(1));
        let best = cands.first().ok_or("engine returned no candidates")?.1;
        let weights: Vec<f64> = cands
            .iter()
            .map(|(_, w)| ((w - best) / config.temperature.max(1e-9)).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = cands.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if pick < *w {
                chosen = i;
                break;
            }
            pick -= w;
        }
        let point = move_from_wire(cands[chosen].0).ok_or_else(|| format!("engine proposed unparseable move {:?}", cands[chosen].0))?;
        board.play(to_move, point).map_err(|e| format!("engine proposed illegal move: {e}"))?;
        moves.push(Move { number, color: to_move, point });
    }
    debug_assert_eq!(board.to_move(), if config.max_move % 2 == 0 { Color::Black } else { Color::White });
    Ok(moves)
}
