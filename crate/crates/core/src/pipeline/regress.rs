use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::Context;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusDb;
use crate::engine::read_evals_csv;
use crate::novelty::{read_novelty_csv, NoveltyRecord};
use crate::panel::{
    aggregate_player_period, dqi_points, novelty_points, trend_fit, Attribution, FeOptions, MoveObservation, PanelError,
    PanelObservation, Period, PeriodKind, TrendFit,
};
use crate::record::GameRecord;

use super::join_observations;

pub const CORPUS_DIR: &str = "corpus";
pub const NOVELTY_CSV: &str = "novelty.csv";
pub const EVALS_CSV: &str = "evals.csv";
pub const OBSERVATIONS_CSV: &str = "observations.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Dqi,
    Novelty,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Dqi => "dqi",
            Metric::Novelty => "novelty",
        })
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dqi" => Ok(Metric::Dqi),
            "novelty" => Ok(Metric::Novelty),
            _ => Err(format!("unknown metric {s:?} (dqi or novelty)")),
        }
    }
}

/// Joins `evals.csv`, `novelty.csv` and the corpus under a pipeline output
/// directory.
pub fn load_observations(dir: &Path, cutoff: NaiveDate) -> anyhow::Result<Vec<MoveObservation>> {
    let db = CorpusDb::open(&dir.join(CORPUS_DIR)).context("opening corpus")?;
    let novelty = read_novelty_csv(&dir.join(NOVELTY_CSV)).context("reading novelty.csv")?;
    let evals = read_evals_csv(&dir.join(EVALS_CSV)).context("reading evals.csv")?;
    Ok(join_observations(&evals, &novelty, &db.games, cutoff)?)
}

/// Per-(player, period) medians of `metric` over `obs`.
pub fn metric_panel(obs: &[MoveObservation], metric: Metric, kind: PeriodKind, max_move: u32, attribution: Attribution) -> Vec<PanelObservation> {
    match metric {
        Metric::Dqi => aggregate_player_period(dqi_points(obs), kind),
        Metric::Novelty => aggregate_player_period(novelty_points(obs, max_move, attribution), kind),
    }
}

/// Novelty panel straight from novelty records, for record sets that have
/// no evaluations (e.g. after self-play injection).
pub fn novelty_panel_from_records(
    records: &[NoveltyRecord],
    games: &[GameRecord],
    max_move: u32,
    attribution: Attribution,
    kind: PeriodKind,
) -> Vec<PanelObservation> {
    let by_id: HashMap<&str, &GameRecord> = games.iter().map(|g| (g.game_id.as_str(), g)).collect();
    let mut points = Vec::new();
    for r in records {
        let (Some(k), Some(g)) = (r.novel_move_number, by_id.get(r.game_id.as_str())) else {
            continue;
        };
        let Some(mv) = g.moves.get(k as usize - 1) else { continue };
        let v = max_move.saturating_sub(k) as f64;
        points.push((g.player_for(mv.color), g.date, v));
        if attribution == Attribution::BothPlayers {
            points.push((g.player_for(mv.color.opponent()), g.date, v));
        }
    }
    aggregate_player_period(points, kind)
}

/// The baseline period for `panel`: the requested one coerced to `kind`
/// (a year maps to its earliest observed month), else the earliest period.
pub fn resolve_baseline(panel: &[PanelObservation], requested: Option<Period>, kind: PeriodKind) -> Result<Period, PanelError> {
    let earliest = panel.iter().map(|o| o.period).min().ok_or(PanelError::Empty)?;
    Ok(match (requested, kind) {
        (None, _) => earliest,
        (Some(p), k) if p.kind() == k => p,
        (Some(Period::Month(y, _)), PeriodKind::Year) => Period::Year(y),
        (Some(Period::Year(y)), PeriodKind::Month) => panel
            .iter()
            .map(|o| o.period)
            .filter(|p| matches!(p, Period::Month(py, _) if *py == y))
            .min()
            .ok_or_else(|| PanelError::MissingBaseline(y.to_string()))?,
        (Some(p), _) => p,
    })
}

/// Panel and period-effect series of one metric.
pub fn metric_trend(
    obs: &[MoveObservation],
    metric: Metric,
    kind: PeriodKind,
    baseline: Option<Period>,
    max_move: u32,
    attribution: Attribution,
    options: &FeOptions,
) -> Result<(Vec<PanelObservation>, TrendFit), PanelError> {
    let panel = metric_panel(obs, metric, kind, max_move, attribution);
    let base = resolve_baseline(&panel, baseline, kind)?;
    let fit = trend_fit(&panel, base, options)?;
    Ok((panel, fit))
}
