//! Acceptance criteria. Each criterion prints one `PASS`, `FAIL` or `SKIP`
//! line; the process exits non-zero if any criterion fails.
//!
//! Set `GOCF_BLESS=1` to (re)write the frozen golden files instead of
//! comparing against them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use gocf::corpus::{ingest_corpus, CorpusDb, IngestConfig};
use gocf::engine::{
    dqi, evaluate_corpus, evaluate_game, read_evals_csv, DecisionEval, EngineSettings, EvalCache, EvalConfig, Evaluator, MockEngine,
    ProcessEngine,
};
use gocf::novelty::{build_prefix_index, inject_synthetic_games, NoveltyConfig, NoveltyRecord};
use gocf::oracle::{explicit_dummy_ols, filter_by_scan, novelty_bruteforce, SlowBoard};
use gocf::panel::{default_cutoff, fe_regression, table1_model, FeDesign, FeOptions, Factor, Table1Model, TERM_INTERACTION};
use gocf::pipeline::{apply_filter, bundled_corpus_dir, join_observations, run_pipeline, FilterSpec, PipelineConfig, RunOptions};
use gocf::record::{sort_corpus, GameRecord, Move};
use gocf::rules::{Board, Color, Point};
use gocf::synthetic::{perf_corpus, planted_table1, synthetic_corpus, CorpusSpec, PlantedSpec};

type Outcome = Result<String, String>;

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn golden(name: &str) -> PathBuf {
    manifest_dir().join("tests").join("golden").join(name)
}

fn blessing() -> bool {
    std::env::var_os("GOCF_BLESS").is_some()
}

fn bundled() -> Vec<GameRecord> {
    ingest_corpus(&bundled_corpus_dir(), &IngestConfig::default()).expect("bundled corpus").games
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- novelty

/// Synthetic corpus plus exact and truncated copies of earlier games placed
/// later, so that absent novel moves occur.
fn oracle_corpus(seed: u64) -> Vec<GameRecord> {
    let spec = CorpusSpec {
        n_games: 500,
        seed,
        engine_guided: false,
        min_moves: 20,
        max_moves: 60,
        ..CorpusSpec::default()
    };
    let mut games = synthetic_corpus(&spec);
    sort_corpus(&mut games);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0FFEE);
    let n = games.len();
    for k in 0..25 {
        let src = games[rng.random_range(0..n / 2)].clone();
        let later = games[rng.random_range(n / 2..n)].date;
        let mut copy = src.clone();
        copy.game_id = format!("copy-{k:03}");
        copy.date = later;
        if k % 2 == 1 {
            let keep = rng.random_range(1..=copy.moves.len());
            copy.moves.truncate(keep);
        }
        games.push(copy);
    }
    sort_corpus(&mut games);
    games
}

fn c01_novelty_oracle() -> Outcome {
    let cfg = NoveltyConfig::default();
    let mut slowest = Duration::ZERO;
    let mut absent = 0;
    for seed in 0..20 {
        let games = oracle_corpus(seed);
        ensure(games.iter().all(|g| g.moves.len() <= 60), || "corpus has games over 60 moves".into())?;
        let t = Instant::now();
        let (_, records) = build_prefix_index(&games, &cfg).map_err(|e| e.to_string())?;
        slowest = slowest.max(t.elapsed());
        let brute = novelty_bruteforce(&games, 60);
        let fast: Vec<Option<u32>> = records.iter().map(|r| r.novel_move_number).collect();
        if fast != brute {
            let i = fast.iter().zip(&brute).position(|(a, b)| a != b).unwrap_or(0);
            return Err(format!("seed {seed}: game {} index {:?} vs scan {:?}", games[i].game_id, fast[i], brute[i]));
        }
        absent += fast.iter().filter(|k| k.is_none()).count();
    }
    ensure(slowest < Duration::from_secs(10), || format!("slowest corpus took {slowest:?}"))?;
    Ok(format!("20 corpora of 525 games identical; {absent} absent novel moves; slowest index {slowest:.2?}"))
}

fn check_arithmetic(records: &[NoveltyRecord]) -> Result<usize, String> {
    for r in records {
        if let Some(k) = r.novel_move_number {
            ensure(r.novelty_index == Some(60 - k), || format!("{}: index {:?} for move {k}", r.game_id, r.novelty_index))?;
        } else {
            ensure(r.novelty_index.is_none(), || format!("{}: index without a novel move", r.game_id))?;
        }
    }
    ensure(records.first().is_some_and(|r| r.novel_move_number == Some(1)), || "first game not novel at move 1".into())?;
    Ok(records.len())
}

fn c02_novelty_arithmetic() -> Outcome {
    let cfg = NoveltyConfig::default();
    let mut n = 0;
    for seed in 0..20 {
        n += check_arithmetic(&build_prefix_index(&oracle_corpus(seed), &cfg).map_err(|e| e.to_string())?.1)?;
    }
    n += check_arithmetic(&build_prefix_index(&bundled(), &cfg).map_err(|e| e.to_string())?.1)?;
    let single = &bundled()[..1];
    n += check_arithmetic(&build_prefix_index(single, &cfg).map_err(|e| e.to_string())?.1)?;
    Ok(format!("{n} records checked, first game novel at move 1 in every corpus"))
}

fn c03_injection() -> Outcome {
    let games = bundled();
    let cfg = NoveltyConfig::default();
    let cutoff = default_cutoff();
    let at = cutoff.pred_opt().unwrap();
    let (_, base) = build_prefix_index(&games, &cfg).map_err(|e| e.to_string())?;
    let targets: Vec<&GameRecord> = games.iter().filter(|g| g.date > at && g.moves.len() >= 60).take(10).collect();
    ensure(!targets.is_empty(), || "no game after the injection date".into())?;
    for g in &targets {
        let mut copy = (*g).clone();
        copy.game_id = format!("inject-{}", g.game_id);
        copy.moves.truncate(60);
        let recs = inject_synthetic_games(&games, &[copy], at, cutoff, &cfg).map_err(|e| e.to_string())?;
        ensure(recs.len() == games.len(), || "injected records leaked into the output".into())?;
        let r = recs.iter().find(|r| r.game_id == g.game_id).expect("target present");
        ensure(r.novel_move_number.is_none(), || format!("{} still novel at {:?}", g.game_id, r.novel_move_number))?;
    }
    // disjoint: every injected game opens on a point no real game opens on
    let used: std::collections::HashSet<Option<Point>> = games.iter().filter_map(|g| g.moves.first().map(|m| m.point)).collect();
    let free: Vec<Point> = Point::all().filter(|p| !used.contains(&Some(*p))).collect();
    ensure(!free.is_empty(), || "every point is used as an opening".into())?;
    let disjoint: Vec<GameRecord> = games
        .iter()
        .take(40)
        .enumerate()
        .map(|(i, g)| {
            let mut s = g.clone();
            s.game_id = format!("disjoint-{i}");
            s.moves[0] = Move {
                number: 1,
                color: Color::Black,
                point: Some(free[i % free.len()]),
            };
            s
        })
        .collect();
    let recs = inject_synthetic_games(&games, &disjoint, at, cutoff, &cfg).map_err(|e| e.to_string())?;
    ensure(recs == base, || "prefix-disjoint injection changed real records".into())?;
    Ok(format!("{} targets lose their novel move; 40 disjoint games change none of {} records", targets.len(), base.len()))
}

// ------------------------------------------------------------------ panel

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn c04_hdfe() -> Outcome {
    let mut fe_time = Duration::ZERO;
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(200..=2000usize);
        let n_players = rng.random_range(5..=50u32);
        let n_periods = rng.random_range(3..=20u32);
        let p = rng.random_range(1..=3usize);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let player: Vec<u32> = (0..n).map(|i| if (i as u32) < n_players { i as u32 } else { rng.random_range(0..n_players) }).collect();
        let period: Vec<u32> = (0..n).map(|i| if (i as u32) < n_periods { i as u32 } else { rng.random_range(0..n_periods) }).collect();
        let a: Vec<f64> = (0..n_players).map(|_| normal.sample(&mut rng) * 2.0).collect();
        let g: Vec<f64> = (0..n_periods).map(|_| normal.sample(&mut rng)).collect();
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let xs: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|i| normal.sample(&mut rng) + 0.3 * a[player[i] as usize] + 0.2 * g[period[i] as usize]).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| a[player[i] as usize] + g[period[i] as usize] + (0..p).map(|j| beta[j] * xs[j][i]).sum::<f64>() + normal.sample(&mut rng))
            .collect();
        let design = FeDesign {
            y: y.clone(),
            regressors: xs.iter().enumerate().map(|(j, x)| (format!("x{j}"), x.clone())).collect(),
            absorb: vec![Factor::from_labels("player", &player), Factor::from_labels("period", &period)],
            cluster: Factor::from_labels("player", &player),
        };
        let t = Instant::now();
        let fe = fe_regression(&design, &FeOptions::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        fe_time += t.elapsed();
        let oracle = explicit_dummy_ols(&y, &xs, &[player.clone(), period.clone()], &player);
        ensure(fe.k == oracle.k, || format!("seed {seed}: K {} vs {}", fe.k, oracle.k))?;
        for j in 0..p {
            let t = &fe.terms[j];
            worst = worst.max(rel_err(t.estimate, oracle.beta[j])).max(rel_err(t.se, oracle.cov[j][j].sqrt()));
        }
    }
    ensure(worst <= 1e-8, || format!("largest relative discrepancy {worst:.2e}"))?;
    ensure(fe_time < Duration::from_secs(5), || format!("absorbed fits took {fe_time:?}"))?;
    Ok(format!("100 instances, largest relative discrepancy {worst:.1e}, absorbed fits {fe_time:.2?} total"))
}

fn planted_interaction(seed: u64) -> Result<(bool, f64), String> {
    let spec = PlantedSpec { seed, ..PlantedSpec::default() };
    let r = table1_model(&planted_table1(&spec), Table1Model::M1, &FeOptions::default()).map_err(|e| format!("seed {seed}: {e}"))?;
    let t = r.term(TERM_INTERACTION).ok_or("no interaction term")?;
    Ok((t.ci_low <= spec.beta[2] && spec.beta[2] <= t.ci_high, t.estimate))
}

fn c05_planted() -> Outcome {
    let mut covered = 0;
    let mut sum = 0.0;
    for seed in 0..100 {
        let (hit, est) = planted_interaction(seed)?;
        covered += hit as usize;
        sum += est;
    }
    let mean = sum / 100.0;
    if covered < 93 {
        // context for the failure: coverage over a longer run of seeds
        let mut long = covered;
        for seed in 100..1000 {
            long += planted_interaction(seed)?.0 as usize;
        }
        return Err(format!(
            "95% CI covers 0.5 in {covered}/100 (mean estimate {mean:.4}); over seeds 0..999 coverage is {:.1}%",
            long as f64 / 10.0
        ));
    }
    Ok(format!("95% CI covers 0.5 in {covered}/100 replications; mean estimate {mean:.4}"))
}

// ----------------------------------------------------------------- engine

fn evaluate_all(games: &[GameRecord]) -> Result<Vec<DecisionEval>, String> {
    let mut ev = Evaluator::new(MockEngine::new(), EvalCache::in_memory());
    let cfg = EvalConfig {
        max_move: 60,
        settings: EngineSettings::desk(),
    };
    evaluate_corpus(&mut ev, games, &cfg).map_err(|e| e.to_string())
}

fn c06_dqi() -> Outcome {
    ensure(dqi(0.5, 0.5) == Ok(100.0), || format!("dqi(0.5, 0.5) = {:?}", dqi(0.5, 0.5)))?;
    ensure(dqi(0.5, 0.55) == Ok(95.0), || format!("dqi(0.5, 0.55) = {:?}", dqi(0.5, 0.55)))?;
    let evals = evaluate_all(&bundled())?;
    let matched = evals.iter().filter(|e| e.matched_ai).count();
    for e in &evals {
        ensure(e.dqi <= 100.0, || format!("{} move {}: dqi {}", e.game_id, e.move_number, e.dqi))?;
        ensure(!e.matched_ai || e.dqi == 100.0, || format!("{} move {}: matched with dqi {}", e.game_id, e.move_number, e.dqi))?;
    }
    Ok(format!("exact values hold; {} moves, {matched} matched, all matched at 100, none above 100", evals.len()))
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gocf"));
    c.env_remove("GO_CF_ENGINE").env_remove("GO_CF_CACHE").env("RUST_LOG", "error");
    c
}

fn protocol_golden() -> Result<String, String> {
    let req = fs::read_to_string(golden("mock_request.jsonl")).map_err(|e| format!("golden request: {e}"))?;
    let mut child = bin()
        .arg("mock-engine")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    {
        use std::io::Write;
        child.stdin.take().unwrap().write_all(req.as_bytes()).map_err(|e| e.to_string())?;
    }
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    let got = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let path = golden("mock_response.jsonl");
    if blessing() {
        fs::write(&path, &got).map_err(|e| e.to_string())?;
    }
    let want = fs::read_to_string(&path).map_err(|e| format!("golden response: {e}"))?;
    ensure(got == want, || "mock engine response differs from golden".into())?;
    Ok(format!("{} golden request lines answered", req.lines().count()))
}

fn golden_game() -> GameRecord {
    let mut g = gocf::synthetic::blank_record("golden", NaiveDate::from_ymd_opt(2017, 5, 1).unwrap());
    g.black_id = "Black Player".into();
    g.white_id = "White Player".into();
    let seq = ["dd", "pp", "dp", "pd", "jj", "qf"];
    g.moves = seq
        .iter()
        .enumerate()
        .map(|(i, s)| Move {
            number: i as u32 + 1,
            color: if i % 2 == 0 { Color::Black } else { Color::White },
            point: Point::from_sgf(s),
        })
        .collect();
    g
}

fn golden_evaluations() -> Result<String, String> {
    let g = golden_game();
    let mut ev = Evaluator::new(MockEngine::new(), EvalCache::in_memory());
    let evals = evaluate_game(&mut ev, &g, &EvalConfig { max_move: 60, settings: EngineSettings::desk() }).map_err(|e| e.to_string())?;
    // independent check: best move by scanning every legal move
    let mut board = Board::new();
    for (m, e) in g.moves.iter().zip(&evals) {
        let mut best = f64::MIN;
        for p in Point::all() {
            if let Some(w) = gocf::engine::mock_winrate(&board, Some(p)) {
                best = best.max(w);
            }
        }
        let human = gocf::engine::mock_winrate(&board, m.point).unwrap();
        ensure((e.best_winrate - best).abs() < 1e-12 && (e.human_winrate - human).abs() < 1e-12, || {
            format!("move {}: engine ({}, {}) vs scan ({human}, {best})", m.number, e.human_winrate, e.best_winrate)
        })?;
        board.play(m.color, m.point).unwrap();
    }
    let path = golden("evaluate_game.csv");
    let tmp = tempfile::NamedTempFile::new().map_err(|e| e.to_string())?;
    gocf::engine::write_evals_csv(tmp.path(), &evals).map_err(|e| e.to_string())?;
    let got = fs::read_to_string(tmp.path()).map_err(|e| e.to_string())?;
    if blessing() {
        fs::write(&path, &got).map_err(|e| e.to_string())?;
    }
    let want = fs::read_to_string(&path).map_err(|e| format!("golden evaluations: {e}"))?;
    ensure(got == want, || "evaluate_game output differs from golden".into())?;
    Ok(format!("{} golden decisions", evals.len()))
}

fn process_matches_in_process(games: &[GameRecord]) -> Result<String, String> {
    let cmd = format!("'{}' mock-engine", env!("CARGO_BIN_EXE_gocf"));
    let engine = ProcessEngine::spawn(&cmd).map_err(|e| e.to_string())?.with_engine_id(gocf::engine::MOCK_ENGINE_ID);
    let mut ev = Evaluator::new(engine, EvalCache::in_memory());
    let cfg = EvalConfig { max_move: 60, settings: EngineSettings::desk() };
    let over_pipe = evaluate_corpus(&mut ev, games, &cfg).map_err(|e| e.to_string())?;
    let direct = evaluate_all(games)?;
    ensure(over_pipe == direct, || "evaluations over the pipe differ from in-process".into())?;
    Ok(format!("{} decisions identical over the pipe", direct.len()))
}

fn kill_and_resume(dir: &Path) -> Result<String, String> {
    let db = dir.join("db");
    CorpusDb::from_games(bundled()).write(&db).map_err(|e| e.to_string())?;
    let run = |cache: &Path, out: &Path| {
        let mut c = bin();
        c.args(["evaluate", "--engine", "mock", "--db"]).arg(&db).arg("--cache").arg(cache).arg("--out").arg(out);
        c
    };
    let reference = dir.join("reference.csv");
    let status = run(&dir.join("reference.gcf"), &reference).stdout(Stdio::null()).status().map_err(|e| e.to_string())?;
    ensure(status.success(), || "reference evaluation failed".into())?;
    let full = fs::metadata(dir.join("reference.gcf")).map_err(|e| e.to_string())?.len();

    let cache = dir.join("resume.gcf");
    let out = dir.join("resume.csv");
    let mut child = run(&cache, &out).stdout(Stdio::null()).spawn().map_err(|e| e.to_string())?;
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let size = fs::metadata(&cache).map(|m| m.len()).unwrap_or(0);
        if size >= full / 3 {
            break;
        }
        if child.try_wait().map_err(|e| e.to_string())?.is_some() || Instant::now() > deadline {
            return Err("evaluation ended before it could be killed".into());
        }
        std::thread::sleep(Duration::from_millis(1));
    }
    child.kill().map_err(|e| e.to_string())?;
    let status = child.wait().map_err(|e| e.to_string())?;
    ensure(!status.success() && !out.exists(), || "killed run completed anyway".into())?;
    let partial = fs::metadata(&cache).map_err(|e| e.to_string())?.len();

    let resumed = run(&cache, &out).output().map_err(|e| e.to_string())?;
    ensure(resumed.status.success(), || "resumed evaluation failed".into())?;
    let a = fs::read(&reference).map_err(|e| e.to_string())?;
    let b = fs::read(&out).map_err(|e| e.to_string())?;
    ensure(a == b, || "resumed CSV differs from uninterrupted run".into())?;
    let rows = read_evals_csv(&out).map_err(|e| e.to_string())?.len();
    Ok(format!(
        "killed at {:.0}% of the cache, resumed CSV byte-identical ({rows} rows): {}",
        100.0 * partial as f64 / full as f64,
        String::from_utf8_lossy(&resumed.stdout).trim()
    ))
}

fn c07_engine_bridge() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let games = bundled();
    let parts = [
        protocol_golden()?,
        golden_evaluations()?,
        process_matches_in_process(&games[..5])?,
        kill_and_resume(dir.path())?,
    ];
    Ok(parts.join("; "))
}

// ---------------------------------------------------------------- filters

fn c08_filters() -> Outcome {
    let games = bundled();
    let evals = evaluate_all(&games)?;
    let (_, novelty) = build_prefix_index(&games, &NoveltyConfig::default()).map_err(|e| e.to_string())?;
    let rows = join_observations(&evals, &novelty, &games, default_cutoff()).map_err(|e| e.to_string())?;
    let key = |v: &[gocf::panel::MoveObservation]| -> Vec<(String, u32)> { v.iter().map(|r| (r.game_id.clone(), r.move_number)).collect() };
    let differs = apply_filter(&rows, FilterSpec::DiffersFromAi);
    let matches = apply_filter(&rows, FilterSpec::MatchesAi);
    let mut union = key(&differs);
    union.extend(key(&matches));
    union.sort();
    let mut all = key(&rows);
    all.sort();
    ensure(union == all && differs.len() + matches.len() == rows.len(), || "matches/differs not a partition".into())?;
    let mut buckets: Vec<(String, u32)> = Vec::new();
    for k in 1..=6 {
        let b = apply_filter(&rows, FilterSpec::StageBucket(k));
        ensure(b.iter().all(|r| (10 * (k - 1) + 1..=10 * k).contains(&r.move_number)), || format!("bucket {k} out of range"))?;
        buckets.extend(key(&b));
    }
    buckets.sort();
    let mut in_range = key(&rows.iter().filter(|r| r.move_number <= 60).cloned().collect::<Vec<_>>());
    in_range.sort();
    ensure(buckets == in_range, || "stage buckets do not partition moves 1-60".into())?;
    for spec in [FilterSpec::OpponentDeviationResponse(None), FilterSpec::OpponentDeviationResponse(Some(3)), FilterSpec::NovelMovesOnly] {
        let fast = key(&apply_filter(&rows, spec));
        let slow: Vec<(String, u32)> = filter_by_scan(&rows, spec).into_iter().map(|i| (rows[i].game_id.clone(), rows[i].move_number)).collect();
        ensure(fast == slow, || format!("{spec} disagrees with the predicate scan"))?;
    }

    // worked example: dd and pp match the engine, dp deviates, pd answers
    let g = {
        let mut g = golden_game();
        g.moves.truncate(4);
        g
    };
    let ev = |m: u32, matched: bool| DecisionEval {
        game_id: g.game_id.clone(),
        move_number: m,
        player_id: g.player_for(g.moves[m as usize - 1].color).to_string(),
        color: g.moves[m as usize - 1].color,
        human_move: g.moves[m as usize - 1].point.map(|p| p.to_sgf()).unwrap_or_default(),
        human_winrate: if matched { 0.6 } else { 0.5 },
        best_move: if matched { g.moves[m as usize - 1].point.unwrap().to_sgf() } else { "jj".into() },
        best_winrate: 0.6,
        dqi: if matched { 100.0 } else { 90.0 },
        matched_ai: matched,
    };
    let example = [ev(1, true), ev(2, true), ev(3, false), ev(4, false)];
    let (_, nov) = build_prefix_index(std::slice::from_ref(&g), &NoveltyConfig::default()).map_err(|e| e.to_string())?;
    let joined = join_observations(&example, &nov, std::slice::from_ref(&g), default_cutoff()).map_err(|e| e.to_string())?;
    let picked = apply_filter(&joined, FilterSpec::OpponentDeviationResponse(None));
    ensure(picked.len() == 1 && picked[0].move_number == 4, || format!("worked example selects {:?}", key(&picked)))?;
    ensure(g.moves[3].point == Point::from_sgf("pd"), || "example move 4 is not pd".into())?;
    Ok(format!("{} rows partition exactly; buckets cover moves 1-60; worked example selects only pd", rows.len()))
}

// ------------------------------------------------------------------ rules

fn c09_rules() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut moves = 0usize;
    let mut rejected = 0usize;
    let mut captures = 0usize;
    for playout in 0..10_000 {
        let mut fast = Board::new();
        let mut slow = SlowBoard::new();
        let len = rng.random_range(20..=160);
        let mut played = 0;
        while played < len {
            let color = fast.to_move();
            let point = if rng.random_bool(0.02) { None } else { Some(Point::from_index(rng.random_range(0..361))) };
            let before = fast.stone_count(Color::Black) + fast.stone_count(Color::White);
            let a = fast.play(color, point);
            let b = slow.play(color, point);
            ensure(a.is_ok() == b.is_ok(), || format!("playout {playout}: verdicts differ on {point:?}: {a:?} vs {b:?}"))?;
            if a.is_err() {
                rejected += 1;
                continue;
            }
            played += 1;
            moves += 1;
            if fast.stone_count(Color::Black) + fast.stone_count(Color::White) < before + usize::from(point.is_some()) {
                captures += 1;
            }
            ensure(fast.zobrist_hash() == slow.zobrist(), || format!("playout {playout}: hashes differ after {played} moves"))?;
        }
        ensure(Point::all().all(|p| fast.get(p) == slow.get(p)), || format!("playout {playout}: final boards differ"))?;
    }

    let mut board = Board::new();
    let mut checked = 0usize;
    while checked < 100_000 {
        let legal = board.legal_moves();
        let mv = legal[rng.random_range(0..legal.len())];
        board.play(board.to_move(), mv).unwrap();
        ensure(board.zobrist_hash() == board.compute_zobrist(), || format!("incremental hash wrong at move {checked}"))?;
        checked += 1;
        if board.move_count() >= 300 {
            board = Board::new();
        }
    }
    Ok(format!(
        "10000 playouts ({moves} moves, {captures} capturing, {rejected} illegal attempts) agree; 100000 incremental hashes equal recomputation"
    ))
}

// ------------------------------------------------------------ performance

fn peak_rss_bytes() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn c10_performance() -> Outcome {
    let t = Instant::now();
    let games = perf_corpus(1_000_000, 7);
    let generated = t.elapsed();
    let t = Instant::now();
    let (index, records) = build_prefix_index(&games, &NoveltyConfig::default()).map_err(|e| e.to_string())?;
    let indexed = t.elapsed();
    let peak = peak_rss_bytes();
    let novel = records.iter().filter(|r| r.novel_move_number.is_some()).count();
    let gib = |b: u64| b as f64 / (1u64 << 30) as f64;
    ensure(indexed < Duration::from_secs(120), || format!("indexing took {indexed:?}"))?;
    if let Some(p) = peak {
        ensure(p < 8 << 30, || format!("peak resident memory {:.2} GiB", gib(p)))?;
    }
    Ok(format!(
        "1000000 games indexed in {indexed:.1?} (generation {generated:.1?}), {} trie nodes, {:.2} GiB trie heap, peak RSS {}, {novel} novel; {} CPU(s)",
        index.len(),
        gib(index.heap_bytes() as u64),
        peak.map_or_else(|| "unknown".into(), |p| format!("{:.2} GiB", gib(p))),
        std::thread::available_parallelism().map_or(1, |n| n.get())
    ))
}

// ------------------------------------------------------------ end to end

fn c11_end_to_end() -> Outcome {
    let cfg = PipelineConfig::load(&manifest_dir().join("data").join("pipeline.toml")).map_err(|e| e.to_string())?;
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = Instant::now();
    let ma = run_pipeline(&cfg, a.path(), &RunOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let mb = run_pipeline(&cfg, b.path(), &RunOptions::default()).map_err(|e| e.to_string())?;
    ensure(ma.ok && mb.ok, || "a stage failed".into())?;
    let (da, db) = (ma.output_digests(), mb.output_digests());
    ensure(da == db, || {
        let diff: Vec<&String> = da.keys().filter(|k| da.get(*k) != db.get(*k)).take(5).collect();
        format!("digests differ between runs: {diff:?}")
    })?;
    let path = golden("e2e_digests.json");
    if blessing() {
        fs::write(&path, serde_json::to_string_pretty(&da).unwrap() + "\n").map_err(|e| e.to_string())?;
    }
    let frozen: BTreeMap<String, String> =
        serde_json::from_str(&fs::read_to_string(&path).map_err(|e| format!("golden digests: {e}"))?).map_err(|e| e.to_string())?;
    ensure(frozen == da, || {
        let diff: Vec<&String> = da.keys().filter(|k| frozen.get(*k) != da.get(*k)).take(5).collect();
        format!("digests differ from the frozen reference platform: {diff:?}")
    })?;
    Ok(format!("{} output digests identical across two runs and the frozen reference; run took {elapsed:.1?}", da.len()))
}

fn c12_replication() -> Result<Option<String>, String> {
    let Some(csv) = std::env::var_os("GO_CF_REPLICATION_CSV") else {
        return Ok(None);
    };
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let status = bin()
        .args(["regress", "--model", "table1-m1", "--in"])
        .arg(&csv)
        .arg("--out")
        .arg(out.path())
        .stdout(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || "regress failed".into())?;
    let mut rdr = csv::Reader::from_path(out.path().join("table1.csv")).map_err(|e| e.to_string())?;
    let mut got = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        if let (Ok(est), Ok(se)) = (rec[2].parse::<f64>(), rec[3].parse::<f64>()) {
            got.insert(rec[1].to_string(), (est, se));
        }
    }
    let want = [("after_ai", 0.59754, 0.01601), ("novelty", -0.60770, 0.01219), ("after_ai_x_novelty", 0.51504, 0.02147)];
    let mut lines = Vec::new();
    for (name, beta, se_ref) in want {
        let (est, se) = *got.get(name).ok_or_else(|| format!("missing {name}"))?;
        ensure((est - beta).abs() <= 0.001, || format!("{name}: {est} vs {beta}"))?;
        ensure((se - se_ref).abs() <= 0.0005, || format!("{name}: se {se} vs {se_ref}"))?;
        lines.push(format!("{name} {est:.5} ({se:.5})"));
    }
    Ok(Some(lines.join(", ")))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("novelty oracle equivalence", c01_novelty_oracle),
        ("novelty arithmetic", c02_novelty_arithmetic),
        ("injection semantics", c03_injection),
        ("absorbed fixed effects against explicit dummies", c04_hdfe),
        ("planted-effect recovery", c05_planted),
        ("DQI contract", c06_dqi),
        ("engine bridge conformance", c07_engine_bridge),
        ("filter partitions and worked example", c08_filters),
        ("rules engine against reference replayer", c09_rules),
        ("end-to-end determinism", c11_end_to_end),
        ("million-game novelty indexing", c10_performance),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, f) in criteria {
        if filter.as_deref().is_some_and(|s| !name.contains(s)) {
            continue;
        }
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name} ({:.1?}): {detail}", t.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({:.1?}): {detail}", t.elapsed());
            }
        }
    }
    let name = "replication CSV reproduces the move-level model";
    if filter.as_deref().is_none_or(|s| name.contains(s)) {
        match c12_replication() {
            Ok(Some(detail)) => println!("PASS {name}: {detail}"),
            Ok(None) => println!("SKIP {name}: GO_CF_REPLICATION_CSV not set"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
