//! Stage artifact files.
//!
//! Every pipeline stage reads its inputs from the output directory and
//! writes its results back there, so stages can run in one process or as
//! separate invocations with identical results. All files are either JSON,
//! JSON Lines, or CSV with deterministic field and row order.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use scade_core::local::LocalOutcome;
use scade_core::scoring::{ScoreRecord, TokenAttribution};
use scade_core::telemetry::{EventRef, LogFormat, PayloadAttribute, ProcessEvent};
use scade_core::threshold::{SeveritySet, ThresholdModel};
use scade_core::verdict::VerdictSummary;

use crate::exit::CliError;
use std::collections::BTreeMap;

pub const INGEST_REPORT: &str = "ingest_report.json";
pub const EVENTS: &str = "events.jsonl";
pub const PAYLOADS: &str = "payloads.jsonl";
pub const MODEL_UNIGRAM: &str = "model_unigram.json";
pub const MODEL_BIGRAM: &str = "model_bigram.json";
pub const SCORES_UNIGRAM: &str = "scores_unigram.jsonl";
pub const SCORES_BIGRAM: &str = "scores_bigram.jsonl";
pub const THRESHOLDS: &str = "thresholds.json";
pub const SEVERITIES: &str = "severities.jsonl";
pub const STATS: &str = "stats.csv";
pub const LOCAL: &str = "local.jsonl";
pub const LOCAL_SUMMARY: &str = "local_summary.json";
pub const VERDICTS: &str = "verdicts.jsonl";
pub const SUMMARY: &str = "summary.json";
pub const SYNTH_LOG: &str = "synthetic_log.jsonl";
pub const GROUND_TRUTH: &str = "ground_truth.jsonl";
pub const SCENARIO: &str = "scenario.json";
pub const METRICS: &str = "metrics.json";

/// Summary of an ingest run, including the payload settings later stages
/// must reuse to stay consistent with `payloads.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub log: String,
    pub format: LogFormat,
    pub total_records: usize,
    pub malformed: usize,
    /// Process creation events kept after filtering and normalization.
    pub events: u64,
    pub first_day: Option<NaiveDate>,
    pub last_day: Option<NaiveDate>,
    pub attribute_order: Vec<PayloadAttribute>,
}

/// One normalized process creation event with its stable reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub event_ref: EventRef,
    #[serde(flatten)]
    pub event: ProcessEvent,
}

/// One scored payload, tagged with its calendar day for threshold
/// calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub event_ref: EventRef,
    pub day: NaiveDate,
    pub bm25: f64,
    pub log_entropy: f64,
    pub attributions: BTreeMap<String, TokenAttribution>,
}

impl ScoreRow {
    pub fn new(record: ScoreRecord, day: NaiveDate) -> Self {
        ScoreRow {
            event_ref: record.event_ref,
            day,
            bm25: record.bm25,
            log_entropy: record.log_entropy,
            attributions: record.attributions,
        }
    }

    pub fn into_record(self) -> ScoreRecord {
        ScoreRecord {
            event_ref: self.event_ref,
            bm25: self.bm25,
            log_entropy: self.log_entropy,
            attributions: self.attributions,
        }
    }
}

/// Calibrated thresholds for all four models, in fixed model order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsFile {
    pub as_of: NaiveDate,
    pub window_days: u32,
    /// Models whose window scores had zero spread; they classify
    /// everything Low.
    pub degenerate: Vec<String>,
    pub models: Vec<ThresholdModel>,
}

/// Per-event severity under each model, plus the union flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityRow {
    pub event_ref: EventRef,
    pub day: NaiveDate,
    #[serde(flatten)]
    pub severities: SeveritySet,
    pub flagged: bool,
}

/// One execution statistics row in `stats.csv`, with its anomaly score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsCsvRow {
    pub event_ref: u64,
    pub day: NaiveDate,
    pub command_count_on_asset: u32,
    pub total_commands_on_asset: u32,
    pub distinct_assets_running_command: u32,
    pub user_total_command_count: u32,
    pub score: f64,
}

/// Baseline cross-check outcome for one flagged event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRow {
    pub event_ref: EventRef,
    #[serde(flatten)]
    pub outcome: LocalOutcome,
}

/// Counts from the baseline cross-check stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSummaryFile {
    pub cutoff: Option<f64>,
    pub flagged: usize,
    pub scored: usize,
    pub abstained: usize,
    pub stats_rows: usize,
}

/// Final run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub as_of: NaiveDate,
    pub window_days: u32,
    pub flagged: usize,
    pub degenerate: Vec<String>,
    #[serde(flatten)]
    pub verdicts: VerdictSummary,
}

pub fn artifact_path(out: &Path, name: &str) -> PathBuf {
    out.join(name)
}

/// Fails with a usage hint when a stage runs before its inputs exist.
pub fn require_artifact(out: &Path, name: &str, produced_by: &str) -> Result<PathBuf, CliError> {
    let path = artifact_path(out, name);
    if !path.exists() {
        return Err(CliError::config(format!(
            "missing {}: run `scade {produced_by}` first",
            path.display()
        )));
    }
    Ok(path)
}

pub fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    writer
        .write_all(b"\n")
        .and_then(|()| writer.flush())
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let raw = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&raw)
        .map_err(|e| CliError::data(format!("invalid {}: {e}", path.display())))
}

pub fn write_jsonl<'a, T, I>(path: &Path, rows: I) -> Result<(), CliError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let file = fs::File::create(path)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    let mut writer = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut writer, row)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
        writer
            .write_all(b"\n")
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line =
            line.map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| {
            CliError::data(format!("invalid {} line {}: {e}", path.display(), idx + 1))
        })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_stats_csv(path: &Path, rows: &[StatsCsvRow]) -> Result<(), CliError> {
    // Header is written by hand so a run with no stats rows still
    // produces a well-formed file.
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    writer
        .write_record([
            "event_ref",
            "day",
            "command_count_on_asset",
            "total_commands_on_asset",
            "distinct_assets_running_command",
            "user_total_command_count",
            "score",
        ])
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
pub fn read_stats_csv(path: &Path) -> Result<Vec<StatsCsvRow>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    reader
        .deserialize()
        .collect::<Result<Vec<StatsCsvRow>, _>>()
        .map_err(|e| CliError::data(format!("invalid {}: {e}", path.display())))
}
