//! Go game-record corpus analysis.
//!
//! The crate turns a directory of SGF game records into:
//!
//! * a validated, chronologically ordered corpus ([`corpus`]);
//! * the first historically novel move of every game ([`novelty`]);
//! * a per-move Decision Quality Index from counterfactual engine
//!   evaluations ([`engine`]);
//! * fixed-effects panel regressions with player-clustered standard errors
//!   ([`panel`]);
//!
//! and wires them together in a reproducible, content-hashed pipeline
//! ([`pipeline`]). Runnable walkthroughs of each piece live in `examples/`.

pub mod corpus;
pub mod digest;
pub mod engine;
pub mod novelty;
pub mod oracle;
pub mod panel;
pub mod pipeline;
pub mod record;
pub mod rules;
pub mod sgf;
pub mod synthetic;

pub use corpus::{ingest_corpus, validate_record, CorpusDb, IngestConfig, ValidationReport, ValidationStatus};
pub use record::{GameRecord, Move};
pub use rules::{Board, Color, Point};
