use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::engine::Ruleset;
use crate::panel::{default_cutoff, Attribution, PeriodKind, Table1Model, DEFAULT_MAX_SWEEPS, DEFAULT_TOLERANCE};

use super::FilterSpec;

/// The whole run, as read from one TOML file. Relative paths are resolved
/// against the file's directory.
///
/// ```toml
/// seed = 7
///
/// [corpus]
/// path = "synthetic300"
///
/// [engine]
/// command = "mock"
/// visits = 50
///
/// [analysis]
/// cutoff = "2016-03-15"
/// periods = ["year", "month"]
/// filters = ["differs-from-ai", "stage-bucket:1"]
///
/// [selfplay]
/// games = 20
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub novelty: NoveltySection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub selfplay: SelfplaySection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    #[serde(default = "yes")]
    pub dedup: bool,
    #[serde(default)]
    pub include_setup: bool,
    #[serde(default)]
    pub date_min: Option<NaiveDate>,
    #[serde(default)]
    pub date_max: Option<NaiveDate>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoveltySection {
    pub max_move: u32,
    pub canonicalize: bool,
}

impl Default for NoveltySection {
    fn default() -> Self {
        NoveltySection {
            max_move: crate::novelty::DEFAULT_MAX_MOVE,
            canonicalize: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineSection {
    /// `mock` or a shell command speaking the analysis protocol.
    pub command: String,
    pub visits: u32,
    pub komi: f64,
    pub rules: Ruleset,
    /// Defaults to `cache/evals.gcf` under the output directory.
    pub cache: Option<PathBuf>,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub batch_size: usize,
}

impl Default for EngineSection {
    fn default() -> Self {
        EngineSection {
            command: "mock".into(),
            visits: 50,
            komi: 6.5,
            rules: Ruleset::Japanese,
            cache: None,
            timeout_secs: crate::engine::DEFAULT_TIMEOUT.as_secs(),
            max_in_flight: 8,
            batch_size: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub cutoff: NaiveDate,
    /// Baseline period (`YYYY` or `YYYY-MM`); the earliest period by default.
    pub baseline: Option<String>,
    pub periods: Vec<PeriodKind>,
    pub attribution: Attribution,
    pub models: Vec<Table1Model>,
    /// Subsets whose trends are estimated besides the full data.
    pub filters: Vec<FilterSpec>,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let mut filters = vec![FilterSpec::DiffersFromAi, FilterSpec::MatchesAi];
        filters.extend((1..=FilterSpec::STAGE_BUCKETS).map(FilterSpec::StageBucket));
        filters.extend([
            FilterSpec::OpponentDeviationResponse(None),
            FilterSpec::NovelDiffersFromAi,
            FilterSpec::NovelMatchesAi,
        ]);
        AnalysisSection {
            cutoff: default_cutoff(),
            baseline: None,
            periods: vec![PeriodKind::Year, PeriodKind::Month],
            attribution: Attribution::NovelMovePlayer,
            models: vec![Table1Model::M1, Table1Model::M2],
            filters,
            tolerance: DEFAULT_TOLERANCE,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelfplaySection {
    /// Zero disables self-play and injection.
    pub games: usize,
    pub top_k: usize,
    pub temperature: f64,
    /// Date the injected games are placed at; the day before the cutoff by
    /// default.
    pub inject_date: Option<NaiveDate>,
}

impl Default for SelfplaySection {
    fn default() -> Self {
        let d = crate::engine::SelfplayConfig::default();
        SelfplaySection {
            games: 0,
            top_k: d.top_k,
            temperature: d.temperature,
            inject_date: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text).map_err(|message| ConfigError::Invalid {
            path: path.to_path_buf(),
            message,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.corpus.path = base.join(&cfg.corpus.path);
        if let Some(c) = &cfg.engine.cache {
            cfg.engine.cache = Some(base.join(c));
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<PipelineConfig, String> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.novelty.max_move == 0 {
            return Err("novelty.max_move must be at least 1".into());
        }
        if self.engine.visits == 0 {
            return Err("engine.visits must be positive".into());
        }
        if self.analysis.periods.is_empty() {
            return Err("analysis.periods must not be empty".into());
        }
        if let Some(b) = &self.analysis.baseline {
            b.parse::<crate::panel::Period>()?;
        }
        if let Some(d) = self.selfplay.inject_date {
            if d >= self.analysis.cutoff {
                return Err(format!("selfplay.inject_date {d} must precede analysis.cutoff {}", self.analysis.cutoff));
            }
        }
        Ok(())
    }

    pub fn inject_date(&self) -> NaiveDate {
        self.selfplay
            .inject_date
            .unwrap_or_else(|| self.analysis.cutoff.pred_opt().expect("cutoff after the minimum date"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = PipelineConfig::parse("[corpus]\npath = \"games\"\n").unwrap();
        assert_eq!(cfg.engine.command, "mock");
        assert_eq!(cfg.analysis.cutoff, default_cutoff());
        assert_eq!(cfg.novelty.max_move, 60);
        assert!(cfg.analysis.filters.contains(&FilterSpec::StageBucket(6)));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(PipelineConfig::parse("[corpus]\npath = \"g\"\nbogus = 1\n").is_err());
        assert!(PipelineConfig::parse("[corpus]\npath = \"g\"\n[analysis]\nfilters = [\"stage-bucket:9\"]\n").is_err());
        assert!(PipelineConfig::parse("[corpus]\npath = \"g\"\n[selfplay]\ninject_date = \"2020-01-01\"\n").is_err());
    }

    #[test]
    fn roundtrips_through_toml() {
        let cfg = PipelineConfig::parse("seed = 3\n[corpus]\npath = \"g\"\n[analysis]\nmodels = [\"table1-m2\"]\n").unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(PipelineConfig::parse(&text).unwrap(), cfg);
    }
}
