//! Final classification of events.
//!
//! The global layer nominates (any scorer rates the event medium or high);
//! the local layer then separates real alerts from globally-rare-but-
//! locally-routine activity. An event flagged globally and anomalous
//! locally is a true positive; flagged but locally routine is a benign
//! positive; never flagged is legitimate. When the local layer abstained,
//! the global flag stands but at reduced confidence, favoring noisy alerts
//! over silence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local::{LocalAnalysis, LocalOutcome};
use crate::scoring::ScoreRecord;
use crate::telemetry::EventRef;
use crate::threshold::{GramMode, ModelTag, SeveritySet, ThresholdModel};

/// Final class of one event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    TruePositive,
    BenignPositive,
    Legitimate,
}

impl Classification {
    /// True positives first in reports.
    fn rank(self) -> u8 {
        match self {
            Classification::TruePositive => 0,
            Classification::BenignPositive => 1,
            Classification::Legitimate => 2,
        }
    }
}

/// Confidence attached to a classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Normal,
    /// The local layer abstained, so the global flag stands unchecked.
    Low,
}

/// Combines the two layers for one flagged event.
pub fn combine(severities: &SeveritySet, local: &LocalOutcome) -> (Classification, Confidence) {
    debug_assert!(severities.flagged());
    match local {
        LocalOutcome::Scored {
            anomalous: true, ..
        } => (Classification::TruePositive, Confidence::Normal),
        LocalOutcome::Scored {
            anomalous: false, ..
        } => (Classification::BenignPositive, Confidence::Normal),
        LocalOutcome::Abstained { .. } => (Classification::TruePositive, Confidence::Low),
    }
}

/// Raw scores of one event under both scorers and both token modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ScoreSet {
    pub bm25_unigram: f64,
    pub bm25_bigram: f64,
    pub log_entropy_unigram: f64,
    pub log_entropy_bigram: f64,
}

impl ScoreSet {
    pub fn get(&self, tag: ModelTag) -> f64 {
        use crate::threshold::ScorerKind;
        match (tag.scorer, tag.gram) {
            (ScorerKind::Bm25, GramMode::Unigram) => self.bm25_unigram,
            (ScorerKind::Bm25, GramMode::Bigram) => self.bm25_bigram,
            (ScorerKind::LogEntropy, GramMode::Unigram) => self.log_entropy_unigram,
            (ScorerKind::LogEntropy, GramMode::Bigram) => self.log_entropy_bigram,
        }
    }
}

/// One token's contribution, carried into the verdict evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionEntry {
    pub token: String,
    pub gram: GramMode,
    pub bm25: f64,
    pub log_entropy: f64,
}

/// Evidence from the local layer, if it ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalEvidence {
    #[serde(flatten)]
    pub outcome: LocalOutcome,
    pub cutoff: Option<f64>,
}

/// Final judgment for one event, with the evidence that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub event_ref: EventRef,
    pub classification: Classification,
    pub confidence: Confidence,
    pub severities: SeveritySet,
    pub scores: ScoreSet,
    /// Highest standardized score across the four threshold models.
    pub max_standardized: f64,
    /// Top score contributors, largest combined contribution first.
    pub top_tokens: Vec<AttributionEntry>,
    /// Present only for flagged events.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local: Option<LocalEvidence>,
}

/// Events the global layer flagged, in reference order.
pub fn filter_flagged(severities: &BTreeMap<EventRef, SeveritySet>) -> Vec<EventRef> {
    severities
        .iter()
        .filter(|(_, s)| s.flagged())
        .map(|(r, _)| *r)
        .collect()
}

/// How many top-contributing tokens a verdict carries.
const TOP_TOKENS: usize = 5;

fn top_tokens(records: &[(GramMode, &ScoreRecord)]) -> Vec<AttributionEntry> {
    let mut entries: Vec<AttributionEntry> = Vec::new();
    for (gram, record) in records {
        for (token, attribution) in &record.attributions {
            entries.push(AttributionEntry {
                token: token.clone(),
                gram: *gram,
                bm25: attribution.bm25,
                log_entropy: attribution.log_entropy,
            });
        }
    }
    entries.sort_by(|a, b| {
        let ka = a.bm25 + a.log_entropy;
        let kb = b.bm25 + b.log_entropy;
        kb.partial_cmp(&ka)
            .expect("attributions are finite")
            .then_with(|| a.token.cmp(&b.token))
            .then_with(|| a.gram.as_str().cmp(b.gram.as_str()))
    });
    entries.truncate(TOP_TOKENS);
    entries
}

/// Assembles final verdicts for every scored event.
///
/// Inputs are keyed by event reference: per-gram score records, per-model
/// severities, the calibrated threshold models, and the local analysis of
/// flagged events. Output is sorted most urgent first: true positives, then
/// benign positives, then legitimate; within a class by highest
/// standardized score descending, ties by reference.
pub fn finalize(
    unigram_records: &BTreeMap<EventRef, ScoreRecord>,
    bigram_records: &BTreeMap<EventRef, ScoreRecord>,
    severities: &BTreeMap<EventRef, SeveritySet>,
    thresholds: &BTreeMap<ModelTag, ThresholdModel>,
    local: &LocalAnalysis,
) -> Result<Vec<Verdict>> {
    for tag in ModelTag::ALL {
        if !thresholds.contains_key(&tag) {
            return Err(Error::Consistency(format!("missing threshold model {tag}")));
        }
    }

    let mut verdicts = Vec::with_capacity(severities.len());
    for (event_ref, severity_set) in severities {
        let uni = unigram_records
            .get(event_ref)
            .ok_or_else(|| Error::Consistency(format!("event {event_ref} has no unigram score")))?;
        let bi = bigram_records
            .get(event_ref)
            .ok_or_else(|| Error::Consistency(format!("event {event_ref} has no bigram score")))?;
        let scores = ScoreSet {
            bm25_unigram: uni.bm25,
            bm25_bigram: bi.bm25,
            log_entropy_unigram: uni.log_entropy,
            log_entropy_bigram: bi.log_entropy,
        };
        let max_standardized = ModelTag::ALL
            .iter()
            .map(|tag| thresholds[tag].standardized(scores.get(*tag)))
            .fold(f64::NEG_INFINITY, f64::max);

        let (classification, confidence, local_evidence) = if severity_set.flagged() {
            let outcome = local.outcomes.get(event_ref).ok_or_else(|| {
                Error::Consistency(format!(
                    "flagged event {event_ref} missing from local analysis"
                ))
            })?;
            let (classification, confidence) = combine(severity_set, outcome);
            (
                classification,
                confidence,
                Some(LocalEvidence {
                    outcome: outcome.clone(),
                    cutoff: local.cutoff,
                }),
            )
        } else {
            (Classification::Legitimate, Confidence::Normal, None)
        };

        verdicts.push(Verdict {
            event_ref: *event_ref,
            classification,
            confidence,
            severities: *severity_set,
            scores,
            max_standardized,
            top_tokens: top_tokens(&[(GramMode::Unigram, uni), (GramMode::Bigram, bi)]),
            local: local_evidence,
        });
    }

    verdicts.sort_by(|a, b| {
        a.classification
            .rank()
            .cmp(&b.classification.rank())
            .then_with(|| {
                b.max_standardized
                    .partial_cmp(&a.max_standardized)
                    .expect("standardized scores are finite")
            })
            .then_with(|| a.event_ref.cmp(&b.event_ref))
    });
    Ok(verdicts)
}

/// Alert counts and the precision-style quality measure over them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub total_events: usize,
    pub true_positives: usize,
    pub benign_positives: usize,
    pub legitimate: usize,
    pub low_confidence: usize,
}

pub fn summarize(verdicts: &[Verdict]) -> VerdictSummary {
    let mut summary = VerdictSummary {
        total_events: verdicts.len(),
        true_positives: 0,
        benign_positives: 0,
        legitimate: 0,
        low_confidence: 0,
    };
    for v in verdicts {
        match v.classification {
            Classification::TruePositive => summary.true_positives += 1,
            Classification::BenignPositive => summary.benign_positives += 1,
            Classification::Legitimate => summary.legitimate += 1,
        }
        if v.confidence == Confidence::Low {
            summary.low_confidence += 1;
        }
    }
    summary
}
