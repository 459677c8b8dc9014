//! Pipeline stages as disk-to-disk functions.
//!
//! Each stage reads its inputs from the output directory and writes its
//! results back, so `scade detect` and a sequence of single-stage
//! invocations produce byte-identical artifacts. JSON float encoding
//! round-trips exactly, which keeps staged runs bit-equal to in-process
//! runs.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::Path;

use chrono::NaiveDate;

use scade_core::local::{analyze_local, LocalAnalysis, LocalOutcome};
use scade_core::pipeline::{score_gram, tokenize_all, PipelineConfig};
use scade_core::scoring::ScoreRecord;
use scade_core::synth::{default_scenario, evaluate, Metrics, Scenario};
use scade_core::telemetry::{parse_events, EventRef, EventStore, PayloadItem};
use scade_core::threshold::{
    classify, recalibrate, GramMode, ModelTag, ScoreHistory, ScorerKind, SeveritySet,
    ThresholdModel,
};
use scade_core::verdict::{finalize, summarize, Classification, Verdict};

use crate::artifacts::{
    artifact_path, ensure_out_dir, read_json, read_jsonl, require_artifact, write_json,
    write_jsonl, write_stats_csv, EventRow, IngestReport, LocalRow, LocalSummaryFile, ScoreRow,
    SeverityRow, StatsCsvRow, SummaryFile, ThresholdsFile, EVENTS, GROUND_TRUTH, INGEST_REPORT,
    LOCAL, LOCAL_SUMMARY, METRICS, MODEL_BIGRAM, MODEL_UNIGRAM, PAYLOADS, SCENARIO, SCORES_BIGRAM,
    SCORES_UNIGRAM, SEVERITIES, STATS, SUMMARY, SYNTH_LOG, THRESHOLDS, VERDICTS,
};
use crate::config::RunConfig;
use crate::exit::CliError;

/// Counts reported by the score stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreStats {
    pub payloads: usize,
    pub unigram_vocab: usize,
    pub bigram_vocab: usize,
}

/// Counts reported by the threshold stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdStats {
    pub file: ThresholdsFile,
    pub flagged: usize,
    pub total: usize,
}

/// Counts reported by the simulate stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulateStats {
    pub events: usize,
    pub attacks: usize,
}

/// Parses the input log, keeps process creation events, normalizes them,
/// and writes the event and payload artifacts.
pub fn run_ingest(config: &RunConfig) -> Result<IngestReport, CliError> {
    let log_path = config.require_log()?;
    ensure_out_dir(&config.out)?;

    let file = fs::File::open(log_path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", log_path.display())))?;
    let outcome = parse_events(BufReader::new(file), config.format)?;
    let total_records = outcome.total;
    let malformed = outcome.malformed;

    let store = EventStore::from_parsed(outcome.events);
    if store.is_empty() {
        return Err(scade_core::Error::EmptyCorpus.into());
    }
    let payloads = store.build_payloads(&config.attribute_order)?;
    let days = store.days();

    let event_rows: Vec<EventRow> = store
        .iter()
        .map(|(event_ref, event)| EventRow {
            event_ref,
            event: event.clone(),
        })
        .collect();
    write_jsonl(&artifact_path(&config.out, EVENTS), &event_rows)?;
    write_jsonl(&artifact_path(&config.out, PAYLOADS), &payloads)?;

    let report = IngestReport {
        log: log_path.display().to_string(),
        format: config.format,
        total_records,
        malformed,
        events: store.len() as u64,
        first_day: days.first().copied(),
        last_day: days.last().copied(),
        attribute_order: config.attribute_order.clone(),
    };
    write_json(&artifact_path(&config.out, INGEST_REPORT), &report)?;
    Ok(report)
}

/// Loads `events.jsonl` and checks that references are dense and in order,
/// which `EventStore::from_normalized` relies on.
fn load_store(out: &Path) -> Result<EventStore, CliError> {
    let path = require_artifact(out, EVENTS, "ingest")?;
    let rows: Vec<EventRow> = read_jsonl(&path)?;
    for (idx, row) in rows.iter().enumerate() {
        if row.event_ref != EventRef(idx as u64) {
            return Err(CliError::data(format!(
                "{}: event_ref {} at line {} breaks dense ordering",
                path.display(),
                row.event_ref,
                idx + 1
            )));
        }
    }
    Ok(EventStore::from_normalized(
        rows.into_iter().map(|r| r.event).collect(),
    ))
}

/// Tokenizes payloads, fits both corpus models, and writes per-event
/// rarity scores for both token modes.
pub fn run_score(config: &RunConfig) -> Result<ScoreStats, CliError> {
    let report: IngestReport = read_json(&require_artifact(&config.out, INGEST_REPORT, "ingest")?)?;
    let payloads: Vec<PayloadItem> =
        read_jsonl(&require_artifact(&config.out, PAYLOADS, "ingest")?)?;
    let store = load_store(&config.out)?;

    // Payloads were built with the order recorded at ingest; reuse it so
    // cross-field pairs stay consistent with the payload text.
    let pipeline_config = PipelineConfig {
        attribute_order: report.attribute_order.clone(),
        ..config.pipeline()
    };

    let unigram_docs = tokenize_all(&store, &payloads, GramMode::Unigram, &pipeline_config)?;
    let bigram_docs = tokenize_all(&store, &payloads, GramMode::Bigram, &pipeline_config)?;
    let unigram = score_gram(&unigram_docs, &pipeline_config)?;
    let bigram = score_gram(&bigram_docs, &pipeline_config)?;

    let day_of: BTreeMap<EventRef, NaiveDate> =
        payloads.iter().map(|p| (p.event_ref, p.day)).collect();
    let to_rows = |records: &BTreeMap<EventRef, ScoreRecord>| -> Result<Vec<ScoreRow>, CliError> {
        records
            .values()
            .map(|record| {
                let day = day_of.get(&record.event_ref).copied().ok_or_else(|| {
                    CliError::data(format!("no payload for scored event {}", record.event_ref))
                })?;
                Ok(ScoreRow::new(record.clone(), day))
            })
            .collect()
    };

    write_json(&artifact_path(&config.out, MODEL_UNIGRAM), &unigram.model)?;
    write_json(&artifact_path(&config.out, MODEL_BIGRAM), &bigram.model)?;
    write_jsonl(
        &artifact_path(&config.out, SCORES_UNIGRAM),
        &to_rows(&unigram.records)?,
    )?;
    write_jsonl(
        &artifact_path(&config.out, SCORES_BIGRAM),
        &to_rows(&bigram.records)?,
    )?;

    Ok(ScoreStats {
        payloads: payloads.len(),
        unigram_vocab: unigram.model.vocabulary_size(),
        bigram_vocab: bigram.model.vocabulary_size(),
    })
}

fn scorer_value(row: &ScoreRow, scorer: ScorerKind) -> f64 {
    match scorer {
        ScorerKind::Bm25 => row.bm25,
        ScorerKind::LogEntropy => row.log_entropy,
    }
}

/// Calibrates the four threshold models on the trailing window and writes
/// per-event severities.
pub fn run_threshold(config: &RunConfig) -> Result<ThresholdStats, CliError> {
    let uni_path = require_artifact(&config.out, SCORES_UNIGRAM, "score")?;
    let bi_path = require_artifact(&config.out, SCORES_BIGRAM, "score")?;
    let uni: Vec<ScoreRow> = read_jsonl(&uni_path)?;
    let bi: Vec<ScoreRow> = read_jsonl(&bi_path)?;
    if uni.is_empty() {
        return Err(CliError::data(format!(
            "{}: no scored payloads",
            uni_path.display()
        )));
    }
    if uni.len() != bi.len() {
        return Err(CliError::data(format!(
            "{} and {} disagree on event count",
            uni_path.display(),
            bi_path.display()
        )));
    }
    for (u, b) in uni.iter().zip(&bi) {
        if u.event_ref != b.event_ref || u.day != b.day {
            return Err(CliError::data(format!(
                "{} and {} disagree at event {}",
                uni_path.display(),
                bi_path.display(),
                u.event_ref
            )));
        }
    }

    let as_of = uni.iter().map(|r| r.day).max().expect("nonempty scores");
    let now = as_of.and_hms_opt(23, 59, 59).expect("valid time").and_utc();

    let mut models: Vec<ThresholdModel> = Vec::new();
    let mut degenerate: Vec<String> = Vec::new();
    for tag in ModelTag::ALL {
        let rows = match tag.gram {
            GramMode::Unigram => &uni,
            GramMode::Bigram => &bi,
        };
        let mut history = ScoreHistory::new();
        for row in rows {
            history.add(row.day, scorer_value(row, tag.scorer));
        }
        let model = recalibrate(&history, now, config.window_days, tag)?;
        if model.is_degenerate() {
            degenerate.push(tag.to_string());
        }
        models.push(model);
    }
    let by_tag: BTreeMap<ModelTag, &ThresholdModel> = models.iter().map(|m| (m.tag, m)).collect();

    let mut severity_rows: Vec<SeverityRow> = Vec::with_capacity(uni.len());
    for (u, b) in uni.iter().zip(&bi) {
        let mut set = SeveritySet::default();
        for tag in ModelTag::ALL {
            let row = match tag.gram {
                GramMode::Unigram => u,
                GramMode::Bigram => b,
            };
            set.set(tag, classify(scorer_value(row, tag.scorer), by_tag[&tag]));
        }
        let flagged = set.flagged();
        severity_rows.push(SeverityRow {
            event_ref: u.event_ref,
            day: u.day,
            severities: set,
            flagged,
        });
    }
    let flagged = severity_rows.iter().filter(|r| r.flagged).count();

    let file = ThresholdsFile {
        as_of,
        window_days: config.window_days,
        degenerate,
        models,
    };
    write_json(&artifact_path(&config.out, THRESHOLDS), &file)?;
    write_jsonl(&artifact_path(&config.out, SEVERITIES), &severity_rows)?;

    Ok(ThresholdStats {
        file,
        flagged,
        total: severity_rows.len(),
    })
}

/// Cross-checks flagged events against per-user and per-asset execution
/// baselines and writes the outcomes.
pub fn run_localize(config: &RunConfig) -> Result<LocalSummaryFile, CliError> {
    let thresholds: ThresholdsFile =
        read_json(&require_artifact(&config.out, THRESHOLDS, "threshold")?)?;
    let severity_rows: Vec<SeverityRow> =
        read_jsonl(&require_artifact(&config.out, SEVERITIES, "threshold")?)?;
    let store = load_store(&config.out)?;

    let flagged: Vec<EventRef> = severity_rows
        .iter()
        .filter(|r| r.flagged)
        .map(|r| r.event_ref)
        .collect();
    let analysis = analyze_local(&flagged, &store, &config.local(), thresholds.as_of)?;

    let local_rows: Vec<LocalRow> = analysis
        .outcomes
        .iter()
        .map(|(event_ref, outcome)| LocalRow {
            event_ref: *event_ref,
            outcome: outcome.clone(),
        })
        .collect();
    let csv_rows: Vec<StatsCsvRow> = analysis
        .rows
        .iter()
        .map(|scored| StatsCsvRow {
            event_ref: scored.row.event_ref.0,
            day: scored.row.day,
            command_count_on_asset: scored.row.command_count_on_asset,
            total_commands_on_asset: scored.row.total_commands_on_asset,
            distinct_assets_running_command: scored.row.distinct_assets_running_command,
            user_total_command_count: scored.row.user_total_command_count,
            score: scored.score,
        })
        .collect();
    let scored = analysis
        .outcomes
        .values()
        .filter(|o| matches!(o, LocalOutcome::Scored { .. }))
        .count();

    let summary = LocalSummaryFile {
        cutoff: analysis.cutoff,
        flagged: flagged.len(),
        scored,
        abstained: analysis.outcomes.len() - scored,
        stats_rows: csv_rows.len(),
    };
    write_jsonl(&artifact_path(&config.out, LOCAL), &local_rows)?;
    write_stats_csv(&artifact_path(&config.out, STATS), &csv_rows)?;
    write_json(&artifact_path(&config.out, LOCAL_SUMMARY), &summary)?;
    Ok(summary)
}

/// Combines scores, severities, and local outcomes into final verdicts.
pub fn run_report(config: &RunConfig) -> Result<SummaryFile, CliError> {
    let uni: Vec<ScoreRow> = read_jsonl(&require_artifact(&config.out, SCORES_UNIGRAM, "score")?)?;
    let bi: Vec<ScoreRow> = read_jsonl(&require_artifact(&config.out, SCORES_BIGRAM, "score")?)?;
    let thresholds_file: ThresholdsFile =
        read_json(&require_artifact(&config.out, THRESHOLDS, "threshold")?)?;
    let severity_rows: Vec<SeverityRow> =
        read_jsonl(&require_artifact(&config.out, SEVERITIES, "threshold")?)?;
    let local_rows: Vec<LocalRow> = read_jsonl(&require_artifact(&config.out, LOCAL, "localize")?)?;
    let local_summary: LocalSummaryFile =
        read_json(&require_artifact(&config.out, LOCAL_SUMMARY, "localize")?)?;

    let into_records = |rows: Vec<ScoreRow>| -> BTreeMap<EventRef, ScoreRecord> {
        rows.into_iter()
            .map(|row| (row.event_ref, row.into_record()))
            .collect()
    };
    let unigram_records = into_records(uni);
    let bigram_records = into_records(bi);
    let thresholds: BTreeMap<ModelTag, ThresholdModel> = thresholds_file
        .models
        .iter()
        .map(|m| (m.tag, m.clone()))
        .collect();
    let severities: BTreeMap<EventRef, SeveritySet> = severity_rows
        .iter()
        .map(|r| (r.event_ref, r.severities))
        .collect();
    let flagged = severity_rows.iter().filter(|r| r.flagged).count();
    let local = LocalAnalysis {
        outcomes: local_rows
            .into_iter()
            .map(|r| (r.event_ref, r.outcome))
            .collect(),
        cutoff: local_summary.cutoff,
        rows: Vec::new(),
    };

    let mut verdicts = finalize(
        &unigram_records,
        &bigram_records,
        &severities,
        &thresholds,
        &local,
    )?;
    // The summary counts every classification even when benign positives
    // are suppressed from the verdict feed.
    let summary = SummaryFile {
        as_of: thresholds_file.as_of,
        window_days: thresholds_file.window_days,
        flagged,
        degenerate: thresholds_file.degenerate.clone(),
        verdicts: summarize(&verdicts),
    };
    if !config.include_bp {
        verdicts.retain(|v| v.classification != Classification::BenignPositive);
    }
    write_jsonl(&artifact_path(&config.out, VERDICTS), &verdicts)?;
    write_json(&artifact_path(&config.out, SUMMARY), &summary)?;
    Ok(summary)
}

/// Resolves the scenario named in the configuration: the bundled default
/// or a scenario file.
pub fn load_scenario(config: &RunConfig) -> Result<Scenario, CliError> {
    if config.scenario == "default" {
        return Ok(default_scenario());
    }
    let path = Path::new(&config.scenario);
    if !path.exists() {
        return Err(CliError::config(format!(
            "scenario file {} does not exist (or use 'default')",
            path.display()
        )));
    }
    read_json(path)
}

/// Generates a synthetic log with injected attacks and writes the log,
/// the ground truth, and the scenario that produced them.
pub fn run_simulate(config: &RunConfig) -> Result<SimulateStats, CliError> {
    let scenario = load_scenario(config)?;
    let (events, truth) = scenario.generate()?;
    ensure_out_dir(&config.out)?;
    write_jsonl(&artifact_path(&config.out, SYNTH_LOG), &events)?;
    write_jsonl(&artifact_path(&config.out, GROUND_TRUTH), &truth)?;
    write_json(&artifact_path(&config.out, SCENARIO), &scenario)?;
    Ok(SimulateStats {
        events: events.len(),
        attacks: truth.len(),
    })
}

/// Scores detection verdicts against ground truth and writes metrics.
pub fn run_evaluate(
    config: &RunConfig,
    verdicts_path: Option<&Path>,
    truth_path: Option<&Path>,
) -> Result<Metrics, CliError> {
    let default_verdicts;
    let verdicts_path = match verdicts_path {
        Some(p) => p,
        None => {
            default_verdicts = require_artifact(&config.out, VERDICTS, "detect")?;
            &default_verdicts
        }
    };
    let default_truth;
    let truth_path = match truth_path {
        Some(p) => p,
        None => {
            default_truth = require_artifact(&config.out, GROUND_TRUTH, "simulate")?;
            &default_truth
        }
    };
    let verdicts: Vec<Verdict> = read_jsonl(verdicts_path)?;
    let truth = read_jsonl(truth_path)?;
    let metrics = evaluate(&verdicts, &truth)?;
    ensure_out_dir(&config.out)?;
    write_json(&artifact_path(&config.out, METRICS), &metrics)?;
    Ok(metrics)
}
