//! Stage orchestration: configuration, the move filters, regression
//! drivers, SVG reports and the self-check.

mod config;
mod filter;
pub mod regress;
mod report;
mod run;
mod verify;

pub use config::{AnalysisSection, ConfigError, CorpusSection, EngineSection, NoveltySection, PipelineConfig, SelfplaySection};
pub use filter::{apply_filter, join_observations, FilterSpec, JoinError};
pub use regress::Metric;
pub use report::{baseline_of, render_report, render_trend_svg, title_for};
pub use run::{
    corpus_digest, generate_selfplay, run_pipeline, write_sgf_dir, OutputRecord, RunManifest, RunOptions, StageRecord, StageStatus,
    DEFAULT_CACHE, INJECTED_NOVELTY_CSV, RUN_MANIFEST, STATE_DIR,
};
pub use verify::{bundled_corpus_dir, verify, Check};
