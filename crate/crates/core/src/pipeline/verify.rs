use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::corpus::{ingest_corpus, IngestConfig};
use crate::engine::{evaluate_corpus, EngineSettings, EvalCache, EvalConfig, Evaluator, MockEngine};
use crate::novelty::{build_prefix_index, NoveltyConfig};
use crate::oracle::{explicit_dummy_ols, filter_by_scan, naive_medians, novelty_bruteforce, SlowBoard};
use crate::panel::{
    aggregate_player_period, default_cutoff, dqi_points, table1_model, FeOptions, PeriodKind, Table1Model, TERM_AFTER_AI,
    TERM_INTERACTION, TERM_NOVELTY,
};
use crate::record::GameRecord;
use crate::rules::Board;
use crate::synthetic::{planted_table1, PlantedSpec};

use super::{apply_filter, join_observations, FilterSpec};

/// Games evaluated by the engine-dependent checks.
const EVAL_GAMES: usize = 40;

/// The corpus shipped with the crate.
pub fn bundled_corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("synthetic300")
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn check(name: &'static str, result: Result<String, String>) -> Check {
    match result {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

/// Cross-checks every optimized component against its reference
/// implementation on the games under `corpus`.
pub fn verify(corpus: &Path) -> anyhow::Result<Vec<Check>> {
    let db = ingest_corpus(corpus, &IngestConfig::default())?;
    let games = &db.games;
    let mut out = vec![
        check("rules: board and hash against reference board", rules_check(games)),
        check("novelty: prefix index against pairwise scan", novelty_check(games)),
    ];
    let observations = engine_rows(games);
    out.push(check("engine: DQI bounds and engine-match rows", observations.as_ref().map(|(_, d)| d.clone()).map_err(Clone::clone)));
    if let Ok((rows, _)) = &observations {
        out.push(check("filters: partitions and predicate scan", filters_check(rows)));
        out.push(check("panel: player-period medians against naive grouping", medians_check(rows)));
    }
    out.push(check("panel: absorbed estimates against explicit dummies", fe_check()));
    Ok(out)
}

fn rules_check(games: &[GameRecord]) -> Result<String, String> {
    let mut positions = 0usize;
    for g in games.iter().filter(|g| g.setup_stones.is_empty()) {
        let mut fast = Board::new();
        let mut slow = SlowBoard::new();
        for m in &g.moves {
            fast.play(m.color, m.point).map_err(|e| format!("{} move {}: {e}", g.game_id, m.number))?;
            slow.play(m.color, m.point)
                .map_err(|e| format!("{} move {}: reference board rejects: {e:?}", g.game_id, m.number))?;
            if crate::rules::Point::all().any(|p| fast.get(p) != slow.get(p)) {
                return Err(format!("{} move {}: stones differ", g.game_id, m.number));
            }
            let h = fast.zobrist_hash();
            if h != fast.compute_zobrist() || h != slow.zobrist() {
                return Err(format!("{} move {}: hash differs", g.game_id, m.number));
            }
            positions += 1;
        }
    }
    Ok(format!("{positions} positions agree"))
}

fn novelty_check(games: &[GameRecord]) -> Result<String, String> {
    let cfg = NoveltyConfig::default();
    let (_, records) = build_prefix_index(games, &cfg).map_err(|e| e.to_string())?;
    let brute = novelty_bruteforce(games, cfg.max_move as usize);
    for (r, b) in records.iter().zip(&brute) {
        if r.novel_move_number != *b {
            return Err(format!("{}: index {:?}, scan {:?}", r.game_id, r.novel_move_number, b));
        }
        if r.novelty_index != b.map(|k| cfg.max_move - k) {
            return Err(format!("{}: novelty index {:?}", r.game_id, r.novelty_index));
        }
    }
    Ok(format!("{} games agree", records.len()))
}

type Rows = Vec<crate::panel::MoveObservation>;

fn engine_rows(games: &[GameRecord]) -> Result<(Rows, String), String> {
    let subset: Vec<GameRecord> = games.iter().filter(|g| g.setup_stones.is_empty()).take(EVAL_GAMES).cloned().collect();
    let mut ev = Evaluator::new(MockEngine::new(), EvalCache::in_memory());
    let cfg = EvalConfig {
        max_move: 60,
        settings: EngineSettings::desk(),
    };
    let evals = evaluate_corpus(&mut ev, &subset, &cfg).map_err(|e| e.to_string())?;
    for e in &evals {
        if !(0.0..=100.0).contains(&e.dqi) || e.best_winrate < e.human_winrate {
            return Err(format!("{} move {}: dqi {}", e.game_id, e.move_number, e.dqi));
        }
        if e.matched_ai != (e.human_move == e.best_move) || (e.matched_ai && e.dqi != 100.0) {
            return Err(format!("{} move {}: match flag inconsistent", e.game_id, e.move_number));
        }
    }
    let (_, novelty) = build_prefix_index(&subset, &NoveltyConfig::default()).map_err(|e| e.to_string())?;
    let rows = join_observations(&evals, &novelty, &subset, default_cutoff()).map_err(|e| e.to_string())?;
    let matched = rows.iter().filter(|r| r.matched_ai).count();
    Ok((rows, format!("{} moves of {} games, {matched} match the engine", evals.len(), subset.len())))
}

fn filters_check(rows: &Rows) -> Result<String, String> {
    let count = |s| apply_filter(rows, s).len();
    if count(FilterSpec::DiffersFromAi) + count(FilterSpec::MatchesAi) != rows.len() {
        return Err("differs/matches do not partition the rows".into());
    }
    let in_range = rows.iter().filter(|r| (1..=60).contains(&r.move_number)).count();
    if (1..=FilterSpec::STAGE_BUCKETS).map(|k| count(FilterSpec::StageBucket(k))).sum::<usize>() != in_range {
        return Err("stage buckets do not partition moves 1-60".into());
    }
    let mut specs = vec![
        FilterSpec::All,
        FilterSpec::DiffersFromAi,
        FilterSpec::MatchesAi,
        FilterSpec::OpponentDeviationResponse(None),
        FilterSpec::OpponentDeviationResponse(Some(1)),
        FilterSpec::OpponentDeviationResponse(Some(4)),
        FilterSpec::NovelMovesOnly,
        FilterSpec::NovelDiffersFromAi,
        FilterSpec::NovelMatchesAi,
    ];
    specs.extend((1..=FilterSpec::STAGE_BUCKETS).map(FilterSpec::StageBucket));
    for s in &specs {
        let fast: Vec<(String, u32)> = apply_filter(rows, *s).into_iter().map(|r| (r.game_id, r.move_number)).collect();
        let slow: Vec<(String, u32)> = filter_by_scan(rows, *s).into_iter().map(|i| (rows[i].game_id.clone(), rows[i].move_number)).collect();
        if fast != slow {
            return Err(format!("{s}: {} rows vs {} by scan", fast.len(), slow.len()));
        }
    }
    Ok(format!("{} filters agree on {} rows", specs.len(), rows.len()))
}

fn medians_check(rows: &Rows) -> Result<String, String> {
    for kind in [PeriodKind::Year, PeriodKind::Month] {
        let fast = aggregate_player_period(dqi_points(rows), kind);
        let points: Vec<(String, String, f64)> = rows.iter().map(|r| (r.player_id.clone(), kind.of(r.date).to_string(), r.dqi)).collect();
        let slow = naive_medians(&points);
        if fast.len() != slow.len() {
            return Err(format!("{kind}: {} cells vs {}", fast.len(), slow.len()));
        }
        for (f, s) in fast.iter().zip(&slow) {
            if f.player_id != s.0 || f.period.to_string() != s.1 || f.value != s.2 || f.n_underlying != s.3 {
                return Err(format!("{kind}: cell {} {} differs", f.player_id, f.period));
            }
        }
    }
    Ok("year and month cells agree".into())
}

fn codes<T: Ord + Clone>(labels: impl Iterator<Item = T>) -> Vec<u32> {
    let labels: Vec<T> = labels.collect();
    let mut map = BTreeMap::new();
    for l in &labels {
        let next = map.len() as u32;
        map.entry(l.clone()).or_insert(next);
    }
    labels.iter().map(|l| map[l]).collect()
}

fn fe_check() -> Result<String, String> {
    let spec = PlantedSpec {
        seed: 11,
        n_players: 24,
        n_games: 120,
        moves_per_game: 12,
        ..PlantedSpec::default()
    };
    let obs = planted_table1(&spec);
    let fe = table1_model(&obs, Table1Model::M1, &FeOptions::default()).map_err(|e| e.to_string())?;
    let after: Vec<f64> = obs.iter().map(|o| o.after_ai as u8 as f64).collect();
    let nov: Vec<f64> = obs.iter().map(|o| o.novelty_dummy as u8 as f64).collect();
    let inter: Vec<f64> = after.iter().zip(&nov).map(|(a, b)| a * b).collect();
    let players = codes(obs.iter().map(|o| o.player_id.clone()));
    let moves = codes(obs.iter().map(|o| o.move_number));
    let y: Vec<f64> = obs.iter().map(|o| o.dqi).collect();
    let oracle = explicit_dummy_ols(&y, &[after, nov, inter], &[moves, players.clone()], &players);
    if oracle.k != fe.k {
        return Err(format!("K {} vs {}", fe.k, oracle.k));
    }
    let mut worst = 0.0f64;
    for (j, name) in [TERM_AFTER_AI, TERM_NOVELTY, TERM_INTERACTION].iter().enumerate() {
        let t = fe.term(name).ok_or_else(|| format!("missing term {name}"))?;
        let se = oracle.cov[j][j].sqrt();
        worst = worst.max((t.estimate - oracle.beta[j]).abs()).max((t.se - se).abs() / se);
    }
    if worst > 1e-6 {
        return Err(format!("largest discrepancy {worst:.2e}"));
    }
    Ok(format!("{} rows, largest discrepancy {worst:.1e}", obs.len()))
}
