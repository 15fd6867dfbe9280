use std::cmp::Ordering;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::rules::{Color, Point};

/// One decision in a game.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Move {
    /// 1-based ordinal within the game.
    pub number: u32,
    pub color: Color,
    /// `None` is a pass.
    pub point: Option<Point>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameResult {
    BlackWin,
    WhiteWin,
    Draw,
    Unknown,
}

impl GameResult {
    /// Interprets an SGF `RE` value.
    pub fn from_sgf(s: &str) -> GameResult {
        let s = s.trim();
        let upper = s.to_ascii_uppercase();
        if upper.starts_with("B+") {
            GameResult::BlackWin
        } else if upper.starts_with("W+") {
            GameResult::WhiteWin
        } else if upper == "0" || upper == "DRAW" || upper.starts_with("JIGO") {
            GameResult::Draw
        } else {
            GameResult::Unknown
        }
    }

    pub fn to_sgf(self) -> Option<&'static str> {
        match self {
            GameResult::BlackWin => Some("B+"),
            GameResult::WhiteWin => Some("W+"),
            GameResult::Draw => Some("0"),
            GameResult::Unknown => None,
        }
    }
}

/// How much of the date the source recorded. Month-only dates resolve to the
/// 15th and year-only dates to July 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatePrecision {
    Day,
    Month,
    Year,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SetupStone {
    pub color: Color,
    pub point: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub game_id: String,
    pub date: NaiveDate,
    pub date_precision: DatePrecision,
    pub black_id: String,
    pub white_id: String,
    pub result: GameResult,
    pub komi: f64,
    pub board_size: u32,
    pub setup_stones: Vec<SetupStone>,
    pub moves: Vec<Move>,
    pub source_path: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_synthetic: bool,
}

impl GameRecord {
    pub fn order_key(&self) -> CorpusKey<'_> {
        CorpusKey {
            date: self.date,
            real: !self.is_synthetic,
            game_id: &self.game_id,
        }
    }

    /// Identity used for exact-duplicate detection.
    pub fn dedup_key(&self) -> (NaiveDate, &str, &str, &[Move]) {
        (self.date, &self.black_id, &self.white_id, &self.moves)
    }

    pub fn player_for(&self, color: Color) -> &str {
        match color {
            Color::Black => &self.black_id,
            Color::White => &self.white_id,
        }
    }

    pub fn has_setup(&self) -> bool {
        !self.setup_stones.is_empty()
    }
}

/// Total corpus order: date, then synthetic games before real ones on the
/// same date, then `game_id`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusKey<'a> {
    pub date: NaiveDate,
    pub real: bool,
    pub game_id: &'a str,
}

impl Ord for CorpusKey<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.date, self.real, self.game_id).cmp(&(other.date, other.real, other.game_id))
    }
}

impl PartialOrd for CorpusKey<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn sort_corpus(games: &mut [GameRecord]) {
    games.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
}
