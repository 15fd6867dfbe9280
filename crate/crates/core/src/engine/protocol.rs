//! Line-delimited JSON analysis dialect.
//!
//! One request object per line on the engine's stdin, one response object
//! per line on its stdout. Coordinates are SGF letter pairs; a pass is
//! `"pass"`. The field names follow the analysis mode of KataGo, whose
//! engine must be configured to report win rates for the side to move
//! (`reportAnalysisWinratesAs = SIDETOMOVE`).

use serde::{Deserialize, Serialize};

use crate::rules::{Color, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ruleset {
    Japanese,
    Chinese,
}

impl Ruleset {
    pub fn code(self) -> u8 {
        match self {
            Ruleset::Japanese => 0,
            Ruleset::Chinese => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Ruleset> {
        match code {
            0 => Some(Ruleset::Japanese),
            1 => Some(Ruleset::Chinese),
            _ => None,
        }
    }
}

impl std::str::FromStr for Ruleset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "japanese" => Ok(Ruleset::Japanese),
            "chinese" => Ok(Ruleset::Chinese),
            other => Err(format!("unknown ruleset {other:?}")),
        }
    }
}

/// Wire form of a move target.
pub fn move_to_wire(point: Option<Point>) -> String {
    match point {
        Some(p) => p.to_sgf(),
        None => "pass".to_string(),
    }
}

pub fn move_from_wire(s: &str) -> Option<Option<Point>> {
    match s {
        "pass" | "tt" | "" => Some(None),
        other => Point::from_sgf(other).map(Some),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AllowMoves {
    pub player: String,
    pub moves: Vec<String>,
    pub until_depth: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisRequest {
    pub id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_stones: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_player: Option<String>,
    pub moves: Vec<(String, String)>,
    pub rules: Ruleset,
    pub komi: f64,
    pub max_visits: u32,
    #[serde(default)]
    pub include_policy: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_moves: Option<Vec<AllowMoves>>,
}

impl AnalysisRequest {
    pub fn wire_moves(moves: &[(Color, Option<Point>)]) -> Vec<(String, String)> {
        moves
            .iter()
            .map(|(c, p)| (c.letter().to_string(), move_to_wire(*p)))
            .collect()
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveInfo {
    #[serde(rename = "move")]
    pub mv: String,
    pub winrate: f64,
    pub visits: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisResponse {
    pub id: String,
    #[serde(default)]
    pub move_infos: Vec<MoveInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_during_search: Option<bool>,
}

impl AnalysisResponse {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }
}
