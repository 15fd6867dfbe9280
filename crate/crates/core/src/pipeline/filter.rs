use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::DecisionEval;
use crate::novelty::NoveltyRecord;
use crate::panel::{MoveObservation, PeriodKind};
use crate::record::GameRecord;

/// Subsets of evaluated moves used by the memorization tests.
///
/// Text forms: `all`, `differs-from-ai`, `matches-ai`, `stage-bucket:K`,
/// `opponent-deviation-response`, `opponent-deviation-response:L`,
/// `novel-moves-only`, `novel-differs-from-ai`, `novel-matches-ai`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FilterSpec {
    All,
    DiffersFromAi,
    MatchesAi,
    /// Moves `10(k-1)+1 ..= 10k`, `k` in `1..=6`.
    StageBucket(u32),
    /// Move `m` answers an opponent deviation at `m-1`. With `None` every
    /// move before `m-1` must have matched the engine; with `Some(l)` only
    /// the `l` moves before `m-1`.
    OpponentDeviationResponse(Option<u32>),
    NovelMovesOnly,
    NovelDiffersFromAi,
    NovelMatchesAi,
}

impl FilterSpec {
    pub const STAGE_BUCKETS: u32 = 6;

    /// Filesystem-safe label.
    pub fn slug(&self) -> String {
        self.to_string().replace(':', "-")
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterSpec::All => f.write_str("all"),
            FilterSpec::DiffersFromAi => f.write_str("differs-from-ai"),
            FilterSpec::MatchesAi => f.write_str("matches-ai"),
            FilterSpec::StageBucket(k) => write!(f, "stage-bucket:{k}"),
            FilterSpec::OpponentDeviationResponse(None) => f.write_str("opponent-deviation-response"),
            FilterSpec::OpponentDeviationResponse(Some(l)) => write!(f, "opponent-deviation-response:{l}"),
            FilterSpec::NovelMovesOnly => f.write_str("novel-moves-only"),
            FilterSpec::NovelDiffersFromAi => f.write_str("novel-differs-from-ai"),
            FilterSpec::NovelMatchesAi => f.write_str("novel-matches-ai"),
        }
    }
}

impl FromStr for FilterSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<u32, String> {
            a.ok_or_else(|| format!("filter {kind} needs a parameter"))?
                .parse()
                .map_err(|_| format!("bad parameter in filter {s:?}"))
        };
        let spec = match kind {
            "all" => FilterSpec::All,
            "differs-from-ai" => FilterSpec::DiffersFromAi,
            "matches-ai" => FilterSpec::MatchesAi,
            "stage-bucket" => {
                let k = num(arg)?;
                if !(1..=Self::STAGE_BUCKETS).contains(&k) {
                    return Err(format!("stage bucket {k} outside 1..=6"));
                }
                return Ok(FilterSpec::StageBucket(k));
            }
            "opponent-deviation-response" => {
                return Ok(FilterSpec::OpponentDeviationResponse(match arg {
                    None => None,
                    a => Some(num(a)?),
                }))
            }
            "novel-moves-only" => FilterSpec::NovelMovesOnly,
            "novel-differs-from-ai" => FilterSpec::NovelDiffersFromAi,
            "novel-matches-ai" => FilterSpec::NovelMatchesAi,
            _ => return Err(format!("unknown filter {s:?}")),
        };
        if arg.is_some() {
            return Err(format!("filter {kind} takes no parameter"));
        }
        Ok(spec)
    }
}

impl Serialize for FilterSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FilterSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum JoinError {
    #[error("{count} evaluation rows reference unknown games or moves; first: {}", .first.join(", "))]
    Dangling { count: usize, first: Vec<String> },
}

fn dangling(keys: Vec<String>) -> Result<(), JoinError> {
    if keys.is_empty() {
        Ok(())
    } else {
        Err(JoinError::Dangling {
            count: keys.len(),
            first: keys.into_iter().take(10).collect(),
        })
    }
}

/// Joins move evaluations with each game's date and novel move. Every
/// `(game_id, move_number)` must resolve against the corpus and the novelty
/// records; rows come out in (game, move) order of the input.
pub fn join_observations(
    evals: &[DecisionEval],
    novelty: &[NoveltyRecord],
    games: &[GameRecord],
    cutoff: NaiveDate,
) -> Result<Vec<MoveObservation>, JoinError> {
    let by_game: HashMap<&str, &GameRecord> = games.iter().map(|g| (g.game_id.as_str(), g)).collect();
    let novel: HashMap<&str, Option<u32>> = novelty.iter().map(|r| (r.game_id.as_str(), r.novel_move_number)).collect();
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(evals.len());
    for e in evals {
        let key = format!("{}#{}", e.game_id, e.move_number);
        let (Some(g), Some(nov)) = (by_game.get(e.game_id.as_str()), novel.get(e.game_id.as_str())) else {
            missing.push(key);
            continue;
        };
        let Some(mv) = e.move_number.checked_sub(1).and_then(|i| g.moves.get(i as usize)) else {
            missing.push(key);
            continue;
        };
        out.push(MoveObservation {
            game_id: e.game_id.clone(),
            move_number: e.move_number,
            player_id: e.player_id.clone(),
            opponent_id: g.player_for(mv.color.opponent()).to_string(),
            date: g.date,
            month_id: PeriodKind::Month.of(g.date),
            dqi: e.dqi,
            matched_ai: e.matched_ai,
            after_ai: g.date >= cutoff,
            novelty_dummy: *nov == Some(e.move_number),
        });
    }
    dangling(missing)?;
    Ok(out)
}

/// Rows selected by `spec`, in input order.
pub fn apply_filter(rows: &[MoveObservation], spec: FilterSpec) -> Vec<MoveObservation> {
    let keep: Vec<bool> = match spec {
        FilterSpec::OpponentDeviationResponse(prefix) => deviation_responses(rows, prefix),
        _ => rows
            .iter()
            .map(|r| match spec {
                FilterSpec::All => true,
                FilterSpec::DiffersFromAi => !r.matched_ai,
                FilterSpec::MatchesAi => r.matched_ai,
                FilterSpec::StageBucket(k) => (10 * (k - 1) + 1..=10 * k).contains(&r.move_number),
                FilterSpec::NovelMovesOnly => r.novelty_dummy,
                FilterSpec::NovelDiffersFromAi => r.novelty_dummy && !r.matched_ai,
                FilterSpec::NovelMatchesAi => r.novelty_dummy && r.matched_ai,
                FilterSpec::OpponentDeviationResponse(_) => unreachable!(),
            })
            .collect(),
    };
    rows.iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r.clone()).collect()
}

fn deviation_responses(rows: &[MoveObservation], prefix: Option<u32>) -> Vec<bool> {
    // per game: move number -> matched; a missing move counts as unmatched
    let mut games: HashMap<&str, BTreeMap<u32, bool>> = HashMap::new();
    for r in rows {
        games.entry(&r.game_id).or_default().insert(r.move_number, r.matched_ai);
    }
    rows.iter()
        .map(|r| {
            let m = r.move_number;
            let seq = &games[r.game_id.as_str()];
            let matched = |k: u32| seq.get(&k).copied().unwrap_or(false);
            if m < 2 || matched(m - 1) {
                return false;
            }
            let first = match prefix {
                None => 1,
                Some(l) if l + 1 < m => m - 1 - l,
                Some(_) => return false,
            };
            (first..m - 1).all(matched)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Period;

    fn row(game: &str, m: u32, matched: bool) -> MoveObservation {
        MoveObservation {
            game_id: game.into(),
            move_number: m,
            player_id: if m % 2 == 1 { "B".into() } else { "W".into() },
            opponent_id: if m % 2 == 1 { "W".into() } else { "B".into() },
            date: NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(),
            month_id: Period::Month(2017, 1),
            dqi: if matched { 100.0 } else { 97.0 },
            matched_ai: matched,
            after_ai: true,
            novelty_dummy: false,
        }
    }

    #[test]
    fn worked_deviation_example() {
        // dd (B, matched) -> pp (W, matched) -> dp (B, deviates) -> pd (W)
        let rows = vec![row("g", 1, true), row("g", 2, true), row("g", 3, false), row("g", 4, false)];
        let picked = apply_filter(&rows, FilterSpec::OpponentDeviationResponse(None));
        assert_eq!(picked.iter().map(|r| r.move_number).collect::<Vec<_>>(), [4]);
    }

    #[test]
    fn relaxed_deviation_needs_only_recent_matches() {
        let rows = vec![row("g", 1, false), row("g", 2, true), row("g", 3, true), row("g", 4, false), row("g", 5, true)];
        assert!(apply_filter(&rows, FilterSpec::OpponentDeviationResponse(None)).iter().all(|r| r.move_number == 2));
        let relaxed = apply_filter(&rows, FilterSpec::OpponentDeviationResponse(Some(2)));
        assert_eq!(relaxed.iter().map(|r| r.move_number).collect::<Vec<_>>(), [5]);
    }

    #[test]
    fn all_matched_leaves_nothing_differing() {
        let rows: Vec<_> = (1..=8).map(|m| row("g", m, true)).collect();
        assert!(apply_filter(&rows, FilterSpec::DiffersFromAi).is_empty());
        assert_eq!(apply_filter(&rows, FilterSpec::MatchesAi).len(), 8);
    }

    #[test]
    fn text_forms_roundtrip() {
        for s in [
            "all",
            "differs-from-ai",
            "matches-ai",
            "stage-bucket:6",
            "opponent-deviation-response",
            "opponent-deviation-response:3",
            "novel-moves-only",
            "novel-differs-from-ai",
            "novel-matches-ai",
        ] {
            assert_eq!(s.parse::<FilterSpec>().unwrap().to_string(), s);
        }
        assert!("stage-bucket:7".parse::<FilterSpec>().is_err());
        assert!("all:1".parse::<FilterSpec>().is_err());
        assert_eq!(FilterSpec::StageBucket(2).slug(), "stage-bucket-2");
    }
}
