//! Anomaly detection over process-creation telemetry.
//!
//! The engine ingests endpoint process-creation events, builds a text
//! payload per event, and scores payload rarity against the day's corpus
//! with two complementary scorers over unigram and bigram token streams.
//! Dynamic thresholds calibrated on a trailing window turn scores into
//! severities; events flagged by any scorer are then cross-checked against
//! per-user and per-asset execution history with an isolation forest, which
//! separates true anomalies from globally-rare-but-locally-routine
//! activity. A synthetic harness generates reproducible fleet workloads
//! with labeled attack injections for benchmarking the whole pipeline.

pub mod error;
pub mod forest;
pub mod local;
pub mod pipeline;
pub mod scoring;
pub mod synth;
pub mod telemetry;
pub mod threshold;
pub mod tokenize;
pub mod verdict;

pub use error::{Error, Result};
