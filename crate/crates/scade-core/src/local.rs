//! Local behavioral analysis of flagged events.
//!
//! Global rarity cannot tell a novel attack from a routine command that
//! merely has unusual vocabulary. This layer cross-checks each flagged
//! event against per-user and per-asset execution history: how often has
//! this exact command run on this asset, on how many assets does it appear,
//! and how active is this user day by day. An isolation forest over those
//! daily stats separates "rare everywhere and new here" from "rare
//! globally but routine in this corner of the fleet".

use std::collections::{BTreeSet, HashMap};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{self, ForestParams};
use crate::telemetry::{EventRef, EventStore, ProcessEvent};

/// Days of history each flagged event is profiled over.
pub const DEFAULT_HISTORY_DAYS: u32 = 5;

/// Below this many stats rows a forest cannot say anything useful.
pub const MIN_STATS_ROWS: usize = 8;

/// Identity of a command for history lookups: the normalized process name
/// and command line together.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommandKey(String);

impl CommandKey {
    pub fn of(event: &ProcessEvent) -> CommandKey {
        let mut key =
            String::with_capacity(event.process_name.len() + event.command_line.len() + 1);
        key.push_str(&event.process_name);
        if !event.process_name.is_empty() && !event.command_line.is_empty() {
            key.push(' ');
        }
        key.push_str(&event.command_line);
        CommandKey(key)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

type UserKey = (String, String);

fn user_key(event: &ProcessEvent) -> UserKey {
    (event.account_domain.clone(), event.account_name.clone())
}

/// One day of execution statistics for one flagged event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionStatsRow {
    pub event_ref: EventRef,
    pub day: NaiveDate,
    /// Executions of this exact command on this event's asset.
    pub command_count_on_asset: u32,
    /// All command executions on this event's asset.
    pub total_commands_on_asset: u32,
    /// Distinct assets where this command ran.
    pub distinct_assets_running_command: u32,
    /// All command executions by this event's user.
    pub user_total_command_count: u32,
}

impl ExecutionStatsRow {
    pub fn features(&self) -> Vec<f64> {
        vec![
            f64::from(self.command_count_on_asset),
            f64::from(self.total_commands_on_asset),
            f64::from(self.distinct_assets_running_command),
            f64::from(self.user_total_command_count),
        ]
    }
}

/// Pre-aggregated execution counts over the whole corpus, keyed by day.
#[derive(Debug, Default)]
struct HistoryIndex {
    asset_day_total: HashMap<(String, NaiveDate), u32>,
    command_asset_day: HashMap<(CommandKey, String, NaiveDate), u32>,
    command_day_assets: HashMap<(CommandKey, NaiveDate), BTreeSet<String>>,
    user_day_total: HashMap<(UserKey, NaiveDate), u32>,
}

impl HistoryIndex {
    fn build(store: &EventStore) -> HistoryIndex {
        let mut index = HistoryIndex::default();
        for (_, event) in store.iter() {
            let day = event.day();
            let command = CommandKey::of(event);
            *index
                .asset_day_total
                .entry((event.device_id.clone(), day))
                .or_insert(0) += 1;
            *index
                .command_asset_day
                .entry((command.clone(), event.device_id.clone(), day))
                .or_insert(0) += 1;
            index
                .command_day_assets
                .entry((command, day))
                .or_default()
                .insert(event.device_id.clone());
            *index
                .user_day_total
                .entry((user_key(event), day))
                .or_insert(0) += 1;
        }
        index
    }
}

/// Builds daily stats rows for each flagged event over the history window
/// ending at `as_of` (inclusive). Rows are ordered by event reference, then
/// day ascending, to keep downstream training deterministic.
pub fn generate_execution_stats(
    flagged: &[EventRef],
    store: &EventStore,
    history_days: u32,
    as_of: NaiveDate,
) -> Result<Vec<ExecutionStatsRow>> {
    if history_days == 0 {
        return Err(Error::Parameter("history_days must be at least 1".into()));
    }
    let index = HistoryIndex::build(store);
    let start = as_of - Duration::days(i64::from(history_days) - 1);

    let mut refs: Vec<EventRef> = flagged.to_vec();
    refs.sort_unstable();
    refs.dedup();

    let mut rows = Vec::with_capacity(refs.len() * history_days as usize);
    for event_ref in refs {
        let event = store.get(event_ref)?;
        let command = CommandKey::of(event);
        let user = user_key(event);
        let mut day = start;
        while day <= as_of {
            rows.push(ExecutionStatsRow {
                event_ref,
                day,
                command_count_on_asset: index
                    .command_asset_day
                    .get(&(command.clone(), event.device_id.clone(), day))
                    .copied()
                    .unwrap_or(0),
                total_commands_on_asset: index
                    .asset_day_total
                    .get(&(event.device_id.clone(), day))
                    .copied()
                    .unwrap_or(0),
                distinct_assets_running_command: index
                    .command_day_assets
                    .get(&(command.clone(), day))
                    .map(|assets| assets.len() as u32)
                    .unwrap_or(0),
                user_total_command_count: index
                    .user_day_total
                    .get(&(user.clone(), day))
                    .copied()
                    .unwrap_or(0),
            });
            day += Duration::days(1);
        }
    }
    Ok(rows)
}

/// Why the local layer declined to judge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AbstainReason {
    /// The corpus spans fewer days than the history window.
    InsufficientHistory { span_days: u32, required: u32 },
    /// Too few stats rows to train on.
    TooFewRows { rows: usize, required: usize },
}

/// Local judgment for one flagged event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LocalOutcome {
    /// Mean anomaly score of the event's daily stats rows, compared
    /// against the forest's contamination cutoff.
    Scored {
        score: f64,
        anomalous: bool,
    },
    Abstained {
        reason: AbstainReason,
    },
}

impl LocalOutcome {
    pub fn is_anomalous(&self) -> Option<bool> {
        match self {
            LocalOutcome::Scored { anomalous, .. } => Some(*anomalous),
            LocalOutcome::Abstained { .. } => None,
        }
    }
}

/// A stats row together with its individual anomaly score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredStatsRow {
    #[serde(flatten)]
    pub row: ExecutionStatsRow,
    pub score: f64,
}

/// Full local-layer result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LocalAnalysis {
    pub outcomes: std::collections::BTreeMap<EventRef, LocalOutcome>,
    /// Forest cutoff, when a forest was trained.
    pub cutoff: Option<f64>,
    /// Every stats row with its score, for reporting.
    pub rows: Vec<ScoredStatsRow>,
}

/// Parameters of the local layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalParams {
    pub history_days: u32,
    pub forest: ForestParams,
    /// Minimum stats rows needed to train instead of abstaining.
    pub min_rows: usize,
}

impl Default for LocalParams {
    fn default() -> Self {
        LocalParams {
            history_days: DEFAULT_HISTORY_DAYS,
            forest: ForestParams::default(),
            min_rows: MIN_STATS_ROWS,
        }
    }
}

/// Cross-checks flagged events against execution history.
///
/// All flagged events' stats rows train one forest jointly: an attack's
/// zero-history days stand out against the routine majority. Each event's
/// score is the mean of its daily row scores. When history is too short or
/// rows too few, every event abstains rather than returning a judgment the
/// data cannot support.
pub fn analyze_local(
    flagged: &[EventRef],
    store: &EventStore,
    params: &LocalParams,
    as_of: NaiveDate,
) -> Result<LocalAnalysis> {
    if flagged.is_empty() {
        return Ok(LocalAnalysis::default());
    }
    params.forest.validate()?;

    let days = store.days();
    let span_days = match (days.first(), days.last()) {
        (Some(first), Some(last)) => ((*last - *first).num_days() + 1) as u32,
        _ => 0,
    };
    if span_days < params.history_days {
        let reason = AbstainReason::InsufficientHistory {
            span_days,
            required: params.history_days,
        };
        let mut outcomes = std::collections::BTreeMap::new();
        for event_ref in flagged {
            outcomes.insert(
                *event_ref,
                LocalOutcome::Abstained {
                    reason: reason.clone(),
                },
            );
        }
        return Ok(LocalAnalysis {
            outcomes,
            cutoff: None,
            rows: Vec::new(),
        });
    }

    let rows = generate_execution_stats(flagged, store, params.history_days, as_of)?;
    if rows.len() < params.min_rows {
        let reason = AbstainReason::TooFewRows {
            rows: rows.len(),
            required: params.min_rows,
        };
        let mut outcomes = std::collections::BTreeMap::new();
        for event_ref in flagged {
            outcomes.insert(
                *event_ref,
                LocalOutcome::Abstained {
                    reason: reason.clone(),
                },
            );
        }
        return Ok(LocalAnalysis {
            outcomes,
            cutoff: None,
            rows: Vec::new(),
        });
    }

    let features: Vec<Vec<f64>> = rows.iter().map(|r| r.features()).collect();
    let forest = forest::fit(&features, &params.forest)?;

    let mut scored_rows = Vec::with_capacity(rows.len());
    let mut per_event: std::collections::BTreeMap<EventRef, (f64, u32)> =
        std::collections::BTreeMap::new();
    for (row, score) in rows.into_iter().zip(forest.training_scores.iter()) {
        let entry = per_event.entry(row.event_ref).or_insert((0.0, 0));
        entry.0 += *score;
        entry.1 += 1;
        scored_rows.push(ScoredStatsRow { row, score: *score });
    }

    let mut outcomes = std::collections::BTreeMap::new();
    for (event_ref, (sum, count)) in per_event {
        let score = sum / f64::from(count);
        outcomes.insert(
            event_ref,
            LocalOutcome::Scored {
                score,
                anomalous: forest.is_anomalous(score),
            },
        );
    }
    Ok(LocalAnalysis {
        outcomes,
        cutoff: Some(forest.cutoff),
        rows: scored_rows,
    })
}
