//! Ingestion of process-creation telemetry.
//!
//! Raw logs arrive as JSON Lines or RFC 4180 CSV. Each record describes one
//! endpoint event; only process-creation events (event id 4688) feed the
//! detection pipeline. Parsing is tolerant per record and strict in
//! aggregate: a malformed record is counted and skipped, but when more than
//! half of a file fails to parse the whole ingest is rejected.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Windows event id for process creation.
pub const PROCESS_CREATION_EVENT_ID: u32 = 4688;

/// Index of an accepted process-creation event within a single run.
///
/// References are assigned densely, in input order, after format filtering,
/// so the same log always yields the same references.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct EventRef(pub u64);

impl std::fmt::Display for EventRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One process-creation record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessEvent {
    pub timestamp: DateTime<Utc>,
    pub event_id: u32,
    pub account_name: String,
    pub account_domain: String,
    pub device_id: String,
    pub parent_process_name: String,
    pub process_name: String,
    pub command_line: String,
    pub file_path: String,
}

impl ProcessEvent {
    /// UTC calendar day of the event.
    pub fn day(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }
}

/// Scoring unit: the text document built from one event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadItem {
    pub event_ref: EventRef,
    pub text: String,
    pub day: NaiveDate,
}

/// Event attributes that can participate in payload text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadAttribute {
    AccountDomain,
    AccountName,
    DeviceId,
    ParentProcessName,
    ProcessName,
    CommandLine,
    FilePath,
}

/// Attribute order used when none is configured.
pub const DEFAULT_ATTRIBUTE_ORDER: [PayloadAttribute; 7] = [
    PayloadAttribute::AccountDomain,
    PayloadAttribute::AccountName,
    PayloadAttribute::DeviceId,
    PayloadAttribute::ParentProcessName,
    PayloadAttribute::ProcessName,
    PayloadAttribute::CommandLine,
    PayloadAttribute::FilePath,
];

impl PayloadAttribute {
    pub fn as_str(self) -> &'static str {
        match self {
            PayloadAttribute::AccountDomain => "account_domain",
            PayloadAttribute::AccountName => "account_name",
            PayloadAttribute::DeviceId => "device_id",
            PayloadAttribute::ParentProcessName => "parent_process_name",
            PayloadAttribute::ProcessName => "process_name",
            PayloadAttribute::CommandLine => "command_line",
            PayloadAttribute::FilePath => "file_path",
        }
    }

    /// Value of this attribute on an event.
    pub fn extract(self, event: &ProcessEvent) -> &str {
        match self {
            PayloadAttribute::AccountDomain => &event.account_domain,
            PayloadAttribute::AccountName => &event.account_name,
            PayloadAttribute::DeviceId => &event.device_id,
            PayloadAttribute::ParentProcessName => &event.parent_process_name,
            PayloadAttribute::ProcessName => &event.process_name,
            PayloadAttribute::CommandLine => &event.command_line,
            PayloadAttribute::FilePath => &event.file_path,
        }
    }
}

impl FromStr for PayloadAttribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "account_domain" => Ok(PayloadAttribute::AccountDomain),
            "account_name" => Ok(PayloadAttribute::AccountName),
            "device_id" => Ok(PayloadAttribute::DeviceId),
            "parent_process_name" => Ok(PayloadAttribute::ParentProcessName),
            "process_name" => Ok(PayloadAttribute::ProcessName),
            "command_line" => Ok(PayloadAttribute::CommandLine),
            "file_path" => Ok(PayloadAttribute::FilePath),
            other => Err(Error::Parameter(format!(
                "unknown payload attribute '{other}'"
            ))),
        }
    }
}

/// Input encodings accepted by [`parse_events`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogFormat {
    Jsonl,
    Csv,
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(LogFormat::Jsonl),
            "csv" => Ok(LogFormat::Csv),
            other => Err(Error::Parameter(format!("unknown log format '{other}'"))),
        }
    }
}

/// Result of parsing a raw log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub events: Vec<ProcessEvent>,
    /// Records that failed to parse and were skipped.
    pub malformed: usize,
    /// Total records seen (accepted + malformed). Blank lines are not records.
    pub total: usize,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    timestamp: String,
    event_id: i64,
    account_name: String,
    account_domain: String,
    device_id: String,
    parent_process_name: String,
    process_name: String,
    command_line: String,
    file_path: String,
}

/// Parses a timestamp, accepting RFC 3339 or a naive `YYYY-MM-DD HH:MM:SS`
/// style stamp (with `T` or space separator, optional fractional seconds).
/// Naive stamps are interpreted as UTC.
pub fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Ok(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Ok(naive.and_utc());
        }
    }
    Err(Error::Parameter(format!("unparseable timestamp '{raw}'")))
}

fn validate_record(raw: RawRecord) -> Result<ProcessEvent> {
    let timestamp = parse_timestamp(&raw.timestamp)?;
    let event_id = u32::try_from(raw.event_id)
        .map_err(|_| Error::Parameter(format!("event_id {} out of range", raw.event_id)))?;
    if raw.device_id.trim().is_empty() {
        return Err(Error::Parameter("empty device_id".into()));
    }
    if raw.command_line.trim().is_empty() {
        return Err(Error::Parameter("empty command_line".into()));
    }
    Ok(ProcessEvent {
        timestamp,
        event_id,
        account_name: raw.account_name,
        account_domain: raw.account_domain,
        device_id: raw.device_id,
        parent_process_name: raw.parent_process_name,
        process_name: raw.process_name,
        command_line: raw.command_line,
        file_path: raw.file_path,
    })
}

/// Parses one JSON Lines record. Exposed separately so callers can fan
/// disjoint chunks of a large file across threads; records are independent.
pub fn parse_jsonl_record(line: &str) -> Result<ProcessEvent> {
    let raw: RawRecord = serde_json::from_str(line)?;
    validate_record(raw)
}

/// Reads an entire log in the declared format.
///
/// Malformed records are skipped and counted. If more than half of the
/// records are malformed the whole parse fails with
/// [`Error::CorpusQuality`], since silently proceeding on a mostly-broken
/// file would calibrate thresholds on garbage.
pub fn parse_events<R: BufRead>(reader: R, format: LogFormat) -> Result<ParseOutcome> {
    let mut events = Vec::new();
    let mut malformed = 0usize;
    let mut total = 0usize;

    match format {
        LogFormat::Jsonl => {
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                total += 1;
                match parse_jsonl_record(&line) {
                    Ok(event) => events.push(event),
                    Err(_) => malformed += 1,
                }
            }
        }
        LogFormat::Csv => {
            let mut csv_reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(false)
                .from_reader(reader);
            for record in csv_reader.deserialize::<RawRecord>() {
                total += 1;
                match record {
                    Ok(raw) => match validate_record(raw) {
                        Ok(event) => events.push(event),
                        Err(_) => malformed += 1,
                    },
                    Err(_) => malformed += 1,
                }
            }
        }
    }

    if total > 0 && malformed * 2 > total {
        return Err(Error::CorpusQuality { malformed, total });
    }
    Ok(ParseOutcome {
        events,
        malformed,
        total,
    })
}

/// Keeps only process-creation events, preserving input order.
pub fn filter_process_creation(events: Vec<ProcessEvent>) -> Vec<ProcessEvent> {
    events
        .into_iter()
        .filter(|e| e.event_id == PROCESS_CREATION_EVENT_ID)
        .collect()
}

/// Lowercases a field, trims it, and collapses interior whitespace runs to
/// single spaces. Idempotent.
pub fn normalize_field(value: &str) -> String {
    let lowered = value.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for part in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(part);
    }
    out
}

/// Normalizes every text attribute of an event in place.
pub fn normalize(event: &mut ProcessEvent) {
    event.account_name = normalize_field(&event.account_name);
    event.account_domain = normalize_field(&event.account_domain);
    event.device_id = normalize_field(&event.device_id);
    event.parent_process_name = normalize_field(&event.parent_process_name);
    event.process_name = normalize_field(&event.process_name);
    event.command_line = normalize_field(&event.command_line);
    event.file_path = normalize_field(&event.file_path);
}

/// Builds the scoring payload for one event by joining the selected
/// attributes, in order, with single spaces. Empty attributes are skipped.
/// Fails if every selected attribute is empty.
pub fn build_payload(
    event_ref: EventRef,
    event: &ProcessEvent,
    order: &[PayloadAttribute],
) -> Result<PayloadItem> {
    let mut text = String::new();
    for attr in order {
        let value = attr.extract(event);
        if value.is_empty() {
            continue;
        }
        if !text.is_empty() {
            text.push(' ');
        }
        text.push_str(value);
    }
    if text.is_empty() {
        return Err(Error::EmptyPayload);
    }
    Ok(PayloadItem {
        event_ref,
        text,
        day: event.day(),
    })
}

/// Accepted events of one run, indexed by [`EventRef`].
///
/// The store is the single source of truth for reference resolution: a
/// reference is the event's position in this vector.
#[derive(Debug, Clone, Default)]
pub struct EventStore {
    events: Vec<ProcessEvent>,
}

impl EventStore {
    /// Filters to process-creation events, normalizes them, and assigns
    /// dense references in input order.
    pub fn from_parsed(parsed: Vec<ProcessEvent>) -> Self {
        let mut events = filter_process_creation(parsed);
        for event in &mut events {
            normalize(event);
        }
        EventStore { events }
    }

    /// Wraps events that are already filtered and normalized.
    pub fn from_normalized(events: Vec<ProcessEvent>) -> Self {
        EventStore { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, event_ref: EventRef) -> Result<&ProcessEvent> {
        self.events
            .get(event_ref.0 as usize)
            .ok_or(Error::Reference(event_ref.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (EventRef, &ProcessEvent)> {
        self.events
            .iter()
            .enumerate()
            .map(|(i, e)| (EventRef(i as u64), e))
    }

    /// Distinct UTC days present, ascending.
    pub fn days(&self) -> Vec<NaiveDate> {
        let mut set: BTreeMap<NaiveDate, ()> = BTreeMap::new();
        for event in &self.events {
            set.insert(event.day(), ());
        }
        set.into_keys().collect()
    }

    /// Builds payloads for every stored event under the given order.
    pub fn build_payloads(&self, order: &[PayloadAttribute]) -> Result<Vec<PayloadItem>> {
        self.iter()
            .map(|(event_ref, event)| build_payload(event_ref, event, order))
            .collect()
    }
}
