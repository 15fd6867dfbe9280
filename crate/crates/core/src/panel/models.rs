use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{fe_regression, FeDesign, FeOptions, Factor, PanelError, RegressionResult};

pub const DEFAULT_CUTOFF: (i32, u32, u32) = (2016, 3, 15);

pub fn default_cutoff() -> NaiveDate {
    let (y, m, d) = DEFAULT_CUTOFF;
    NaiveDate::from_ymd_opt(y, m, d).expect("valid cutoff")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodKind {
    Year,
    Month,
}

impl PeriodKind {
    pub fn of(self, date: NaiveDate) -> Period {
        match self {
            PeriodKind::Year => Period::Year(date.year()),
            PeriodKind::Month => Period::Month(date.year(), date.month()),
        }
    }
}

impl fmt::Display for PeriodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PeriodKind::Year => "year",
            PeriodKind::Month => "month",
        })
    }
}

impl FromStr for PeriodKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "year" => Ok(PeriodKind::Year),
            "month" => Ok(PeriodKind::Month),
            _ => Err(format!("unknown period {s:?} (expected year or month)")),
        }
    }
}

/// A calendar year or month; displayed as `2015` or `2015-03`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Period {
    Year(i32),
    Month(i32, u32),
}

impl Period {
    pub fn kind(self) -> PeriodKind {
        match self {
            Period::Year(_) => PeriodKind::Year,
            Period::Month(..) => PeriodKind::Month,
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Year(y) => write!(f, "{y}"),
            Period::Month(y, m) => write!(f, "{y}-{m:02}"),
        }
    }
}

impl FromStr for Period {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("bad period {s:?} (expected YYYY or YYYY-MM)");
        match s.split_once('-') {
            None => s.parse().map(Period::Year).map_err(|_| bad()),
            Some((y, m)) => {
                let y = y.parse().map_err(|_| bad())?;
                let m: u32 = m.parse().map_err(|_| bad())?;
                if (1..=12).contains(&m) {
                    Ok(Period::Month(y, m))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One evaluated move, as entered into the move-level models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveObservation {
    pub game_id: String,
    pub move_number: u32,
    pub player_id: String,
    pub opponent_id: String,
    pub date: NaiveDate,
    pub month_id: Period,
    pub dqi: f64,
    pub matched_ai: bool,
    pub after_ai: bool,
    /// This move is its game's novel move.
    pub novelty_dummy: bool,
}

pub fn write_observations_csv(path: &Path, rows: &[MoveObservation]) -> Result<(), PanelError> {
    write_csv(path, rows)
}

pub fn read_observations_csv(path: &Path) -> Result<Vec<MoveObservation>, PanelError> {
    read_csv(path)
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PanelError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, PanelError> {
    Ok(csv::Reader::from_path(path)?.deserialize().collect::<Result<_, _>>()?)
}

/// Who a game's Novelty Index is credited to in player panels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attribution {
    #[default]
    NovelMovePlayer,
    BothPlayers,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    pub player_id: String,
    pub period: Period,
    pub value: f64,
    pub n_underlying: usize,
}

/// Median with the midpoint convention for even counts.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Per-(player, period) medians of `(player, date, value)` points, in
/// (player, period) order.
pub fn aggregate_player_period<'a>(points: impl IntoIterator<Item = (&'a str, NaiveDate, f64)>, kind: PeriodKind) -> Vec<PanelObservation> {
    let mut cells: BTreeMap<(&str, Period), Vec<f64>> = BTreeMap::new();
    for (player, date, v) in points {
        cells.entry((player, kind.of(date))).or_default().push(v);
    }
    cells
        .into_iter()
        .map(|((player, period), mut vs)| PanelObservation {
            player_id: player.to_string(),
            period,
            n_underlying: vs.len(),
            value: median(&mut vs).expect("non-empty cell"),
        })
        .collect()
}

/// DQI points of every observation.
pub fn dqi_points(obs: &[MoveObservation]) -> impl Iterator<Item = (&str, NaiveDate, f64)> {
    obs.iter().map(|o| (o.player_id.as_str(), o.date, o.dqi))
}

/// Novelty Index points from the novel-move rows (`max_move - move_number`).
pub fn novelty_points(obs: &[MoveObservation], max_move: u32, attribution: Attribution) -> Vec<(&str, NaiveDate, f64)> {
    let mut out = Vec::new();
    for o in obs.iter().filter(|o| o.novelty_dummy) {
        let v = max_move.saturating_sub(o.move_number) as f64;
        out.push((o.player_id.as_str(), o.date, v));
        if attribution == Attribution::BothPlayers {
            out.push((o.opponent_id.as_str(), o.date, v));
        }
    }
    out
}

pub fn write_panel_csv(path: &Path, rows: &[PanelObservation]) -> Result<(), PanelError> {
    write_csv(path, rows)
}

pub fn read_panel_csv(path: &Path) -> Result<Vec<PanelObservation>, PanelError> {
    read_csv(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Table1Model {
    /// After-AI, novelty and interaction; move-number and player effects.
    M1,
    /// Novelty and interaction; month, move-number and player effects.
    M2,
}

impl Table1Model {
    pub fn label(self) -> &'static str {
        match self {
            Table1Model::M1 => "table1-m1",
            Table1Model::M2 => "table1-m2",
        }
    }
}

impl fmt::Display for Table1Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Table1Model {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table1-m1" | "m1" => Ok(Table1Model::M1),
            "table1-m2" | "m2" => Ok(Table1Model::M2),
            _ => Err(format!("unknown model {s:?} (expected table1-m1 or table1-m2)")),
        }
    }
}

impl Serialize for Table1Model {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Table1Model {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

pub const TERM_AFTER_AI: &str = "after_ai";
pub const TERM_NOVELTY: &str = "novelty";
pub const TERM_INTERACTION: &str = "after_ai_x_novelty";

pub fn table1_model(obs: &[MoveObservation], model: Table1Model, options: &FeOptions) -> Result<RegressionResult, PanelError> {
    if obs.is_empty() {
        return Err(PanelError::Empty);
    }
    let bit = |b: bool| if b { 1.0 } else { 0.0 };
    let after: Vec<f64> = obs.iter().map(|o| bit(o.after_ai)).collect();
    let novel: Vec<f64> = obs.iter().map(|o| bit(o.novelty_dummy)).collect();
    let inter: Vec<f64> = after.iter().zip(&novel).map(|(a, b)| a * b).collect();
    let players: Vec<&str> = obs.iter().map(|o| o.player_id.as_str()).collect();
    let moves: Vec<u32> = obs.iter().map(|o| o.move_number).collect();

    let mut regressors = Vec::new();
    let mut absorb = Vec::new();
    if model == Table1Model::M1 {
        regressors.push((TERM_AFTER_AI.to_string(), after));
    } else {
        let months: Vec<Period> = obs.iter().map(|o| o.month_id).collect();
        absorb.push(Factor::from_labels("month", &months));
    }
    regressors.push((TERM_NOVELTY.to_string(), novel));
    regressors.push((TERM_INTERACTION.to_string(), inter));
    absorb.push(Factor::from_labels("move_number", &moves));
    absorb.push(Factor::from_labels("player", &players));
    let design = FeDesign {
        y: obs.iter().map(|o| o.dqi).collect(),
        regressors,
        absorb,
        cluster: Factor::from_labels("player", &players),
    };
    fe_regression(&design, options)
}

/// One row of `table1.csv`: a coefficient, a fixed-effect indicator, or a
/// count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub model: String,
    pub row: String,
    pub estimate: String,
    pub se: String,
    pub stars: String,
    pub ci_low: String,
    pub ci_high: String,
}

pub fn table1_rows(model: Table1Model, r: &RegressionResult) -> Vec<Table1Row> {
    let row = |name: &str, estimate: String| Table1Row {
        model: model.label().into(),
        row: name.into(),
        estimate,
        se: String::new(),
        stars: String::new(),
        ci_low: String::new(),
        ci_high: String::new(),
    };
    let mut out: Vec<Table1Row> = r
        .terms
        .iter()
        .map(|t| Table1Row {
            se: format!("{:.5}", t.se),
            stars: t.stars().into(),
            ci_low: format!("{:.5}", t.ci_low),
            ci_high: format!("{:.5}", t.ci_high),
            ..row(&t.name, format!("{:.5}", t.estimate))
        })
        .collect();
    let has = |d: &str| if r.absorbed_dims.iter().any(|a| a == d) { "yes" } else { "no" };
    out.push(row("monthly_fixed_effects", has("month").into()));
    out.push(row("move_number_fixed_effects", has("move_number").into()));
    out.push(row("player_fixed_effects", has("player").into()));
    out.push(row("n", r.n_obs.to_string()));
    out.push(row("clusters", r.n_clusters.to_string()));
    out
}

pub fn write_table1_csv(path: &Path, results: &[(Table1Model, RegressionResult)]) -> Result<(), PanelError> {
    let rows: Vec<Table1Row> = results.iter().flat_map(|(m, r)| table1_rows(*m, r)).collect();
    write_csv(path, &rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub period: Period,
    pub effect: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// A period-effect fit. Periods not linked to the baseline through players
/// observed in both carry no identified effect and are left out.
#[derive(Clone, Debug, PartialEq)]
pub struct TrendFit {
    pub points: Vec<TrendPoint>,
    pub dropped_periods: Vec<Period>,
    pub dropped_rows: usize,
}

/// Rows in the same player-period bipartite component as `baseline`.
fn baseline_component(panel: &[PanelObservation], baseline: Period) -> Vec<bool> {
    let mut period_ix: BTreeMap<Period, usize> = BTreeMap::new();
    let mut player_ix: BTreeMap<&str, usize> = BTreeMap::new();
    for o in panel {
        let n = period_ix.len();
        period_ix.entry(o.period).or_insert(n);
    }
    for o in panel {
        let n = period_ix.len() + player_ix.len();
        player_ix.entry(o.player_id.as_str()).or_insert(n);
    }
    let mut parent: Vec<usize> = (0..period_ix.len() + player_ix.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for o in panel {
        let a = find(&mut parent, period_ix[&o.period]);
        let b = find(&mut parent, player_ix[o.player_id.as_str()]);
        parent[a] = b;
    }
    let root = find(&mut parent, period_ix[&baseline]);
    panel.iter().map(|o| find(&mut parent, period_ix[&o.period]) == root).collect()
}

/// Period effects relative to `baseline`, with player effects absorbed and
/// player-clustered 95% intervals. The baseline is reported as zero.
pub fn trend_fit(all: &[PanelObservation], baseline: Period, options: &FeOptions) -> Result<TrendFit, PanelError> {
    let panel = all;
    if !panel.iter().any(|o| o.period == baseline) {
        return Err(PanelError::MissingBaseline(baseline.to_string()));
    }
    let keep = baseline_component(panel, baseline);
    let dropped_rows = keep.iter().filter(|k| !**k).count();
    let panel: Vec<&PanelObservation> = panel.iter().zip(&keep).filter(|(_, k)| **k).map(|(o, _)| o).collect();
    let periods: Vec<Period> = panel.iter().map(|o| o.period).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let dropped_periods: Vec<Period> = keep
        .iter()
        .zip(all)
        .filter(|(k, _)| !**k)
        .map(|(_, o)| o.period)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let players: Vec<&str> = panel.iter().map(|o| o.player_id.as_str()).collect();
    let dummies: Vec<Period> = periods.iter().copied().filter(|p| *p != baseline).collect();
    let zero = |p: Period| TrendPoint {
        period: p,
        effect: 0.0,
        ci_low: 0.0,
        ci_high: 0.0,
    };
    if dummies.is_empty() {
        return Ok(TrendFit {
            points: vec![zero(baseline)],
            dropped_periods,
            dropped_rows,
        });
    }
    let regressors = dummies
        .iter()
        .map(|d| (d.to_string(), panel.iter().map(|o| if o.period == *d { 1.0 } else { 0.0 }).collect()))
        .collect();
    let design = FeDesign {
        y: panel.iter().map(|o| o.value).collect(),
        regressors,
        absorb: vec![Factor::from_labels("player", &players)],
        cluster: Factor::from_labels("player", &players),
    };
    let r = fe_regression(&design, options)?;
    let points = periods
        .iter()
        .map(|p| match r.term(&p.to_string()) {
            Some(t) => TrendPoint {
                period: *p,
                effect: t.estimate,
                ci_low: t.ci_low,
                ci_high: t.ci_high,
            },
            None => zero(*p),
        })
        .collect();
    Ok(TrendFit {
        points,
        dropped_periods,
        dropped_rows,
    })
}

/// Points of [`trend_fit`].
pub fn trend_series(panel: &[PanelObservation], baseline: Period, options: &FeOptions) -> Result<Vec<TrendPoint>, PanelError> {
    trend_fit(panel, baseline, options).map(|f| f.points)
}

pub fn write_trend_csv(path: &Path, series: &[TrendPoint]) -> Result<(), PanelError> {
    write_csv(path, series)
}

pub fn read_trend_csv(path: &Path) -> Result<Vec<TrendPoint>, PanelError> {
    read_csv(path)
}

/// Name of a trend output, e.g. `trend_dqi_year.csv`.
pub fn trend_file_name(metric: &str, kind: PeriodKind) -> String {
    format!("trend_{metric}_{kind}.csv")
}

/// Reads an externally prepared move-level table. Column names are matched
/// case-insensitively against common spellings; `after_ai` is derived from
/// the date and `cutoff` when absent.
pub fn read_replication_csv(path: &Path, cutoff: NaiveDate) -> Result<Vec<MoveObservation>, PanelError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let find = |names: &[&str]| names.iter().find_map(|n| headers.iter().position(|h| h == n));
    let need = |names: &[&str]| find(names).ok_or_else(|| PanelError::Invalid(format!("{}: no column named any of {names:?}", path.display())));
    let c_dqi = need(&["dqi", "decision_quality", "decision_quality_index"])?;
    let c_player = need(&["player_id", "player", "playerid", "player_name", "name"])?;
    let c_move = need(&["move_number", "move", "movenumber", "move_no", "moveno"])?;
    let c_novel = need(&["novelty_dummy", "novelty", "novel", "novel_move", "novelmove"])?;
    let c_after = find(&["after_ai", "afterai", "after_ai_dummy", "after"]);
    let c_date = find(&["date", "game_date"]);
    let c_month = find(&["month_id", "month", "ym", "yearmonth"]);
    let c_year = find(&["year"]);
    let c_game = find(&["game_id", "game", "gameid"]);
    let c_opp = find(&["opponent_id", "opponent"]);
    let c_matched = find(&["matched_ai", "match", "matched", "same_as_ai"]);

    let flag = |s: &str| matches!(s.trim(), "1" | "1.0" | "true" | "TRUE" | "True");
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| PanelError::Invalid(format!("{} row {}: bad {what}", path.display(), line + 2));
        let get = |c: usize| rec.get(c).unwrap_or("").trim();
        let dqi: f64 = get(c_dqi).parse().map_err(|_| bad("dqi"))?;
        let move_number: u32 = get(c_move).parse::<f64>().map_err(|_| bad("move number"))? as u32;
        let date = match (c_date, c_month, c_year) {
            (Some(c), ..) => parse_loose_date(get(c)).ok_or_else(|| bad("date"))?,
            (None, Some(c), _) => parse_loose_date(get(c)).ok_or_else(|| bad("month"))?,
            (None, None, Some(c)) => parse_loose_date(get(c)).ok_or_else(|| bad("year"))?,
            _ => return Err(PanelError::Invalid(format!("{}: no date, month or year column", path.display()))),
        };
        let month_id = match c_month.and_then(|c| get(c).parse::<Period>().ok()) {
            Some(p @ Period::Month(..)) => p,
            _ => PeriodKind::Month.of(date),
        };
        out.push(MoveObservation {
            game_id: c_game.map_or_else(|| format!("row{}", line + 2), |c| get(c).to_string()),
            move_number,
            player_id: get(c_player).to_string(),
            opponent_id: c_opp.map_or_else(String::new, |c| get(c).to_string()),
            date,
            month_id,
            dqi,
            matched_ai: c_matched.is_some_and(|c| flag(get(c))),
            after_ai: c_after.map_or(date >= cutoff, |c| flag(get(c))),
            novelty_dummy: flag(get(c_novel)),
        });
    }
    Ok(out)
}

fn parse_loose_date(s: &str) -> Option<NaiveDate> {
    for fmt in ["%Y-%m-%d", "%Y/%m/%d", "%m/%d/%Y", "%Y%m%d"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return Some(d);
        }
    }
    match s.parse::<Period>().ok()? {
        Period::Month(y, m) => NaiveDate::from_ymd_opt(y, m, 1),
        Period::Year(y) if s.len() == 6 => NaiveDate::from_ymd_opt(y / 100, (y % 100) as u32, 1),
        Period::Year(y) => NaiveDate::from_ymd_opt(y, 1, 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&mut [90.0, 100.0, 95.0]), Some(95.0));
        assert_eq!(median(&mut [90.0, 100.0]), Some(95.0));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn aggregation_by_year_and_month() {
        let pts = [("A", d(2015, 1, 3), 90.0), ("A", d(2015, 6, 1), 100.0), ("A", d(2015, 6, 9), 95.0), ("B", d(2016, 2, 2), 80.0)];
        let yearly = aggregate_player_period(pts.iter().copied(), PeriodKind::Year);
        assert_eq!(yearly.len(), 2);
        assert_eq!((yearly[0].value, yearly[0].n_underlying), (95.0, 3));
        let monthly = aggregate_player_period(pts.iter().copied(), PeriodKind::Month);
        assert_eq!(monthly.len(), 3);
        assert_eq!(monthly[1].period, Period::Month(2015, 6));
        assert_eq!(monthly[1].value, 97.5);
    }

    #[test]
    fn period_text_roundtrip() {
        for p in [Period::Year(1950), Period::Month(2016, 3)] {
            assert_eq!(p.to_string().parse::<Period>(), Ok(p));
        }
        assert!("2016-13".parse::<Period>().is_err());
    }

    #[test]
    fn exact_shift_trend() {
        let mut panel = Vec::new();
        for (i, base) in [50.0, 61.5, 70.25, 80.0].iter().enumerate() {
            for (y, shift) in [(2000, 0.0), (2001, 3.0)] {
                panel.push(PanelObservation {
                    player_id: format!("p{i}"),
                    period: Period::Year(y),
                    value: base + shift,
                    n_underlying: 1,
                });
            }
        }
        let s = trend_series(&panel, Period::Year(2000), &FeOptions::default()).unwrap();
        assert_eq!(s[0], TrendPoint { period: Period::Year(2000), effect: 0.0, ci_low: 0.0, ci_high: 0.0 });
        assert!((s[1].effect - 3.0).abs() < 1e-12);
        assert!((s[1].ci_high - s[1].ci_low).abs() < 1e-10);
    }

    #[test]
    fn missing_baseline() {
        let panel = vec![PanelObservation {
            player_id: "a".into(),
            period: Period::Year(2001),
            value: 1.0,
            n_underlying: 1,
        }];
        assert!(matches!(trend_series(&panel, Period::Year(1950), &FeOptions::default()), Err(PanelError::MissingBaseline(_))));
    }

    #[test]
    fn all_after_ai_is_collinear_under_model_1() {
        let obs: Vec<MoveObservation> = (0..40)
            .map(|i| MoveObservation {
                game_id: format!("g{}", i / 4),
                move_number: (i % 4) + 1,
                player_id: format!("p{}", i % 5),
                opponent_id: String::new(),
                date: d(2018, 1, 1),
                month_id: Period::Month(2018, 1),
                dqi: 90.0 + (i * 7 % 11) as f64,
                matched_ai: false,
                after_ai: true,
                novelty_dummy: i % 4 == 2 && i % 8 < 4,
            })
            .collect();
        match table1_model(&obs, Table1Model::M1, &FeOptions::default()) {
            Err(PanelError::Collinear(names)) => assert!(names.contains(&TERM_AFTER_AI.to_string())),
            other => panic!("{other:?}"),
        }
    }
}
