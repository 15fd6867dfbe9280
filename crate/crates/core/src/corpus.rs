//! Corpus ingestion: SGF discovery, validation, filtering, deduplication and
//! the on-disk corpus database.
//!
//! A corpus database is a directory holding
//!
//! * `records.jsonl`: one [`GameRecord`] JSON object per line, in corpus order;
//! * `reports.jsonl`: a [`ValidationReport`] for every game that was excluded
//!   because it failed validation;
//! * `manifest.json`: counts, the ingest config hash and a timestamp.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;
use crate::record::{sort_corpus, GameRecord};
use crate::rules::{Board, Color, RuleError};
use crate::sgf::parse_sgf_from;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const REPORTS_FILE: &str = "reports.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("corpus root {0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("no valid games found under {0}")]
    Empty(PathBuf),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt corpus database {path}: line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidationStatus {
    Ok,
    IllegalMove,
    Malformed,
    OutOfScope,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub game_id: String,
    pub status: ValidationStatus,
    pub first_bad_move: Option<u32>,
    pub detail: String,
}

impl ValidationReport {
    fn ok(game_id: &str) -> Self {
        ValidationReport {
            game_id: game_id.to_string(),
            status: ValidationStatus::Ok,
            first_bad_move: None,
            detail: String::new(),
        }
    }
}

/// Failure while replaying a record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReplayError {
    Setup(RuleError),
    Move { ordinal: u32, error: RuleError },
}

/// Board after the setup stones, with the side to move set for the first move.
pub fn initial_board(record: &GameRecord) -> Result<Board, RuleError> {
    let mut board = Board::new();
    for st in &record.setup_stones {
        board.place_setup(st.color, st.point)?;
    }
    let first = record.moves.first().map(|m| m.color);
    board.set_to_move(match (record.has_setup(), first) {
        (true, Some(c)) => c,
        (true, None) => Color::White,
        _ => Color::Black,
    });
    Ok(board)
}

/// Replays the first `upto` moves.
pub fn replay(record: &GameRecord, upto: usize) -> Result<Board, ReplayError> {
    let mut board = initial_board(record).map_err(ReplayError::Setup)?;
    for mv in record.moves.iter().take(upto) {
        board
            .play(mv.color, mv.point)
            .map_err(|error| ReplayError::Move { ordinal: mv.number, error })?;
    }
    Ok(board)
}

/// Structural checks followed by a full replay through the rules engine.
pub fn validate_record(record: &GameRecord) -> ValidationReport {
    let mut report = ValidationReport::ok(&record.game_id);
    let mut fail = |status, bad: Option<u32>, detail: String| {
        report.status = status;
        report.first_bad_move = bad;
        report.detail = detail;
    };
    if record.board_size != 19 {
        fail(ValidationStatus::OutOfScope, None, format!("board size {}", record.board_size));
        return report;
    }
    for (i, mv) in record.moves.iter().enumerate() {
        if mv.number as usize != i + 1 {
            fail(ValidationStatus::Malformed, Some(i as u32 + 1), format!("move numbered {} at position {}", mv.number, i + 1));
            return report;
        }
    }
    let mut expected = if record.has_setup() { None } else { Some(Color::Black) };
    for mv in &record.moves {
        if let Some(c) = expected {
            if mv.color != c {
                fail(ValidationStatus::Malformed, Some(mv.number), format!("expected {c} to move"));
                return report;
            }
        }
        expected = Some(mv.color.opponent());
    }
    match replay(record, record.moves.len()) {
        Ok(_) => {}
        Err(ReplayError::Setup(e)) => fail(ValidationStatus::Malformed, None, format!("setup: {e}")),
        Err(ReplayError::Move { ordinal, error }) => fail(ValidationStatus::IllegalMove, Some(ordinal), error.to_string()),
    }
    report
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub date_min: Option<NaiveDate>,
    pub date_max: Option<NaiveDate>,
    /// Keep games with handicap/setup stones.
    pub include_setup: bool,
    pub dedup: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            date_min: None,
            date_max: None,
            include_setup: false,
            dedup: true,
        }
    }
}

impl IngestConfig {
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub files_seen: usize,
    pub unreadable_files: usize,
    pub malformed_files: usize,
    pub games_parsed: usize,
    pub invalid_games: usize,
    pub out_of_scope_games: usize,
    pub filtered_by_date: usize,
    pub excluded_setup: usize,
    pub duplicates_removed: usize,
    pub games: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub stats: IngestStats,
    pub config: IngestConfig,
    pub config_hash: String,
    pub records_sha256: String,
    pub ingest_timestamp: String,
    pub tool_version: String,
}

/// Ordered, validated games plus the reports of everything rejected.
#[derive(Clone, Debug, Default)]
pub struct CorpusDb {
    pub games: Vec<GameRecord>,
    pub reports: Vec<ValidationReport>,
    pub stats: IngestStats,
    pub config: IngestConfig,
}

enum Source {
    File(PathBuf),
    Zip(PathBuf),
}

fn discover(root: &Path) -> Vec<(String, Source)> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name().into_iter() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                log::warn!("skipping unreadable directory entry: {e}");
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let rel = path
            .strip_prefix(root)
            .unwrap_or(path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let ext = path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("sgf") => out.push((rel, Source::File(path.to_path_buf()))),
            Some("zip") => out.push((rel, Source::Zip(path.to_path_buf()))),
            _ => {}
        }
    }
    out
}

#[derive(Default)]
struct FileOutcome {
    files: usize,
    unreadable: usize,
    malformed: usize,
    games: Vec<GameRecord>,
    reports: Vec<ValidationReport>,
}

impl FileOutcome {
    fn parse(&mut self, source: &str, bytes: &[u8]) {
        self.files += 1;
        match parse_sgf_from(bytes, source) {
            Ok(games) => self.games.extend(games),
            Err(e) => {
                self.malformed += 1;
                self.reports.push(ValidationReport {
                    game_id: source.to_string(),
                    status: ValidationStatus::Malformed,
                    first_bad_move: None,
                    detail: e.to_string(),
                });
            }
        }
    }

    fn merge(mut self, other: FileOutcome) -> FileOutcome {
        self.files += other.files;
        self.unreadable += other.unreadable;
        self.malformed += other.malformed;
        self.games.extend(other.games);
        self.reports.extend(other.reports);
        self
    }
}

fn load_source(rel: &str, source: &Source) -> FileOutcome {
    let mut out = FileOutcome::default();
    match source {
        Source::File(path) => match fs::read(path) {
            Ok(bytes) => out.parse(rel, &bytes),
            Err(e) => {
                log::warn!("skipping unreadable file {}: {e}", path.display());
                out.files += 1;
                out.unreadable += 1;
            }
        },
        Source::Zip(path) => {
            let archive = File::open(path)
                .map_err(|e| e.to_string())
                .and_then(|f| zip::ZipArchive::new(f).map_err(|e| e.to_string()));
            let mut archive = match archive {
                Ok(a) => a,
                Err(e) => {
                    log::warn!("skipping unreadable archive {}: {e}", path.display());
                    out.files += 1;
                    out.unreadable += 1;
                    return out;
                }
            };
            let mut names: Vec<String> = archive
                .file_names()
                .filter_map(|n| n.ok().map(|n| n.into_owned()))
                .filter(|n| n.to_ascii_lowercase().ends_with(".sgf"))
                .collect();
            names.sort();
            for name in names {
                let mut bytes = Vec::new();
                let read = archive
                    .by_name(&name)
                    .map_err(|e| e.to_string())
                    .and_then(|mut f| f.read_to_end(&mut bytes).map_err(|e| e.to_string()));
                match read {
                    Ok(_) => out.parse(&format!("{rel}/{name}"), &bytes),
                    Err(e) => {
                        log::warn!("skipping unreadable archive entry {rel}/{name}: {e}");
                        out.files += 1;
                        out.unreadable += 1;
                    }
                }
            }
        }
    }
    out
}

/// Walks `root`, parses every `.sgf` (including inside `.zip` archives) and
/// assembles an ordered corpus. The result does not depend on thread count.
pub fn ingest_corpus(root: &Path, config: &IngestConfig) -> Result<CorpusDb, IngestError> {
    if !root.is_dir() {
        return Err(IngestError::NotADirectory(root.to_path_buf()));
    }
    let sources = discover(root);
    let parsed = sources
        .par_iter()
        .map(|(rel, src)| load_source(rel, src))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(FileOutcome::default(), FileOutcome::merge);

    let mut stats = IngestStats {
        files_seen: parsed.files,
        unreadable_files: parsed.unreadable,
        malformed_files: parsed.malformed,
        games_parsed: parsed.games.len(),
        ..IngestStats::default()
    };
    let mut reports = parsed.reports;

    let validated: Vec<(GameRecord, ValidationReport)> = parsed
        .games
        .into_par_iter()
        .map(|g| {
            let r = validate_record(&g);
            (g, r)
        })
        .collect();

    let mut games = Vec::with_capacity(validated.len());
    for (game, report) in validated {
        match report.status {
            ValidationStatus::Ok => {}
            ValidationStatus::OutOfScope => {
                stats.out_of_scope_games += 1;
                reports.push(report);
                continue;
            }
            _ => {
                stats.invalid_games += 1;
                reports.push(report);
                continue;
            }
        }
        if config.date_min.is_some_and(|d| game.date < d) || config.date_max.is_some_and(|d| game.date > d) {
            stats.filtered_by_date += 1;
            continue;
        }
        if game.has_setup() && !config.include_setup {
            stats.excluded_setup += 1;
            continue;
        }
        games.push(game);
    }

    sort_corpus(&mut games);
    if config.dedup {
        let before = games.len();
        games = dedup_sorted(games);
        stats.duplicates_removed = before - games.len();
    }
    stats.games = games.len();
    reports.sort_by(|a, b| a.game_id.cmp(&b.game_id));

    if games.is_empty() {
        return Err(IngestError::Empty(root.to_path_buf()));
    }
    Ok(CorpusDb {
        games,
        reports,
        stats,
        config: config.clone(),
    })
}

/// Keeps the first (earliest in corpus order) of each exact duplicate.
pub fn dedup_sorted(games: Vec<GameRecord>) -> Vec<GameRecord> {
    let mut keep = vec![true; games.len()];
    {
        let mut seen = HashSet::new();
        for (i, g) in games.iter().enumerate() {
            if !seen.insert(g.dedup_key()) {
                keep[i] = false;
            }
        }
    }
    games
        .into_iter()
        .zip(keep)
        .filter_map(|(g, k)| k.then_some(g))
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), IngestError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for item in items {
        serde_json::to_writer(&mut w, item).expect("record serializes");
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, IngestError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| IngestError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

impl CorpusDb {
    /// Builds an in-memory database from already-parsed games.
    pub fn from_games(mut games: Vec<GameRecord>) -> CorpusDb {
        sort_corpus(&mut games);
        let stats = IngestStats {
            games_parsed: games.len(),
            games: games.len(),
            ..IngestStats::default()
        };
        CorpusDb {
            games,
            reports: Vec::new(),
            stats,
            config: IngestConfig::default(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<CorpusManifest, IngestError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let records = dir.join(RECORDS_FILE);
        write_jsonl(&records, &self.games)?;
        write_jsonl(&dir.join(REPORTS_FILE), &self.reports)?;
        let bytes = fs::read(&records).map_err(io_err(&records))?;
        let manifest = CorpusManifest {
            stats: self.stats.clone(),
            config: self.config.clone(),
            config_hash: self.config.hash(),
            records_sha256: sha256_hex(&bytes),
            ingest_timestamp: Utc::now().to_rfc3339(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let mpath = dir.join(MANIFEST_FILE);
        fs::write(&mpath, serde_json::to_string_pretty(&manifest).expect("manifest serializes")).map_err(io_err(&mpath))?;
        Ok(manifest)
    }

    pub fn open(dir: &Path) -> Result<CorpusDb, IngestError> {
        let games: Vec<GameRecord> = read_jsonl(&dir.join(RECORDS_FILE))?;
        let reports_path = dir.join(REPORTS_FILE);
        let reports = if reports_path.exists() { read_jsonl(&reports_path)? } else { Vec::new() };
        let mpath = dir.join(MANIFEST_FILE);
        let (stats, config) = match fs::read_to_string(&mpath) {
            Ok(s) => {
                let m: CorpusManifest = serde_json::from_str(&s).map_err(|e| IngestError::Corrupt {
                    path: mpath.clone(),
                    line: 0,
                    message: e.to_string(),
                })?;
                (m.stats, m.config)
            }
            Err(_) => (IngestStats::default(), IngestConfig::default()),
        };
        for w in games.windows(2) {
            if w[0].order_key() > w[1].order_key() {
                return Err(IngestError::Corrupt {
                    path: dir.join(RECORDS_FILE),
                    line: 0,
                    message: format!("records out of order at {}", w[1].game_id),
                });
            }
        }
        Ok(CorpusDb { games, reports, stats, config })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgf::parse_sgf;

    fn rec(src: &str) -> GameRecord {
        parse_sgf(src.as_bytes()).unwrap().remove(0)
    }

    #[test]
    fn occupied_point_reported_with_ordinal() {
        let r = rec("(;DT[2000];B[aa];W[bb];B[cc];W[dd];B[ee];W[ff];B[bb])");
        let rep = validate_record(&r);
        assert_eq!(rep.status, ValidationStatus::IllegalMove);
        assert_eq!(rep.first_bad_move, Some(7));
    }

    #[test]
    fn alternation_enforced_without_setup() {
        let r = rec("(;DT[2000];B[aa];B[bb])");
        let rep = validate_record(&r);
        assert_eq!(rep.status, ValidationStatus::Malformed);
        assert_eq!(rep.first_bad_move, Some(2));
        let r = rec("(;DT[2000];W[aa])");
        assert_eq!(validate_record(&r).status, ValidationStatus::Malformed);
        let r = rec("(;DT[2000]AB[dd][pp];W[aa];B[bb])");
        assert_eq!(validate_record(&r).status, ValidationStatus::Ok);
    }

    #[test]
    fn out_of_scope_board() {
        let r = rec("(;SZ[13]DT[2000];B[aa])");
        assert_eq!(validate_record(&r).status, ValidationStatus::OutOfScope);
    }

    #[test]
    fn setup_on_same_point_is_malformed() {
        let r = rec("(;DT[2000]AB[dd]AW[dd];W[aa])");
        assert_eq!(validate_record(&r).status, ValidationStatus::Malformed);
    }
}
