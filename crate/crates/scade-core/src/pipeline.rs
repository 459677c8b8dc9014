//! End-to-end detection pipeline.
//!
//! Wires the stages together: payload construction, tokenization, corpus
//! modeling, rarity scoring under both scorers and both token modes,
//! threshold calibration on the trailing window, local behavioral
//! cross-checking of flagged events, and final verdicts. Every intermediate
//! product is kept so callers can persist stage artifacts.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local::{analyze_local, LocalAnalysis, LocalParams};
use crate::scoring::{score_document, ScoreRecord, ScoringParams};
use crate::telemetry::{EventStore, PayloadAttribute, PayloadItem, DEFAULT_ATTRIBUTE_ORDER};
use crate::threshold::{
    classify, recalibrate, GramMode, ModelTag, ScoreHistory, SeveritySet, ThresholdModel,
};
use crate::tokenize::{
    build_corpus_model, cross_field_pair_tokens, extend_doc, tokenize, CorpusModel, TokenizedDoc,
};
use crate::verdict::{filter_flagged, finalize, summarize, Verdict, VerdictSummary};

/// Everything the pipeline needs to know about a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub attribute_order: Vec<PayloadAttribute>,
    /// Also emit unordered attribute-value pairs into the bigram stream.
    pub cross_field_pairs: bool,
    pub scoring: ScoringParams,
    pub window_days: u32,
    pub local: LocalParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            attribute_order: DEFAULT_ATTRIBUTE_ORDER.to_vec(),
            cross_field_pairs: false,
            scoring: ScoringParams::default(),
            window_days: crate::threshold::DEFAULT_WINDOW_DAYS,
            local: LocalParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.attribute_order.is_empty() {
            return Err(Error::Parameter("attribute order must not be empty".into()));
        }
        for (i, attr) in self.attribute_order.iter().enumerate() {
            if self.attribute_order[..i].contains(attr) {
                return Err(Error::Parameter(format!(
                    "attribute '{}' appears twice in the order",
                    attr.as_str()
                )));
            }
        }
        self.scoring.validate()?;
        if self.window_days == 0 {
            return Err(Error::Parameter("window_days must be at least 1".into()));
        }
        if self.local.history_days == 0 {
            return Err(Error::Parameter("history_days must be at least 1".into()));
        }
        self.local.forest.validate()?;
        Ok(())
    }
}

/// Model and per-event scores for one token mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramArtifacts {
    pub model: CorpusModel,
    pub records: BTreeMap<crate::telemetry::EventRef, ScoreRecord>,
}

/// Full output of one detection run.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRun {
    pub payloads: Vec<PayloadItem>,
    pub unigram: GramArtifacts,
    pub bigram: GramArtifacts,
    pub thresholds: BTreeMap<ModelTag, ThresholdModel>,
    pub severities: BTreeMap<crate::telemetry::EventRef, SeveritySet>,
    pub flagged: Vec<crate::telemetry::EventRef>,
    pub local: LocalAnalysis,
    pub verdicts: Vec<Verdict>,
    pub summary: VerdictSummary,
    /// Run date: the latest event day in the corpus. Calibration and
    /// history windows end here, so a frozen log always reproduces the
    /// same run regardless of when it is analyzed.
    pub as_of: NaiveDate,
    /// Threshold models that calibrated to zero variance.
    pub degenerate: Vec<ModelTag>,
}

/// Tokenizes every payload for one token mode, applying the optional
/// cross-field pair enrichment to the bigram stream.
pub fn tokenize_all(
    store: &EventStore,
    payloads: &[PayloadItem],
    gram: GramMode,
    config: &PipelineConfig,
) -> Result<Vec<TokenizedDoc>> {
    let mut docs = payloads
        .par_iter()
        .map(|p| tokenize(p, gram.token_mode()))
        .collect::<Result<Vec<_>>>()?;
    if config.cross_field_pairs && gram == GramMode::Bigram {
        for doc in &mut docs {
            let event = store.get(doc.event_ref)?;
            let values: Vec<&str> = config
                .attribute_order
                .iter()
                .map(|attr| attr.extract(event))
                .collect();
            extend_doc(doc, cross_field_pair_tokens(&values));
        }
    }
    Ok(docs)
}

/// Builds the corpus model over `docs` and scores each document against it.
pub fn score_gram(docs: &[TokenizedDoc], config: &PipelineConfig) -> Result<GramArtifacts> {
    let model = build_corpus_model(docs)?;
    let records = docs
        .par_iter()
        .map(|doc| score_document(doc, &model, &config.scoring).map(|r| (r.event_ref, r)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(GramArtifacts { model, records })
}

/// Runs detection over an ingested event store.
pub fn run_detection(store: &EventStore, config: &PipelineConfig) -> Result<DetectionRun> {
    config.validate()?;
    if store.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let payloads = store.build_payloads(&config.attribute_order)?;
    let as_of = payloads
        .iter()
        .map(|p| p.day)
        .max()
        .ok_or(Error::EmptyCorpus)?;

    let unigram_docs = tokenize_all(store, &payloads, GramMode::Unigram, config)?;
    let bigram_docs = tokenize_all(store, &payloads, GramMode::Bigram, config)?;
    let unigram = score_gram(&unigram_docs, config)?;
    let bigram = score_gram(&bigram_docs, config)?;

    let day_of: BTreeMap<crate::telemetry::EventRef, NaiveDate> =
        payloads.iter().map(|p| (p.event_ref, p.day)).collect();

    let mut thresholds = BTreeMap::new();
    let mut degenerate = Vec::new();
    for tag in ModelTag::ALL {
        let records = match tag.gram {
            GramMode::Unigram => &unigram.records,
            GramMode::Bigram => &bigram.records,
        };
        let mut history = ScoreHistory::new();
        for (event_ref, record) in records {
            let score = match tag.scorer {
                crate::threshold::ScorerKind::Bm25 => record.bm25,
                crate::threshold::ScorerKind::LogEntropy => record.log_entropy,
            };
            history.add(day_of[event_ref], score);
        }
        let now = as_of.and_hms_opt(23, 59, 59).expect("valid time").and_utc();
        let model = recalibrate(&history, now, config.window_days, tag)?;
        if model.is_degenerate() {
            degenerate.push(tag);
        }
        thresholds.insert(tag, model);
    }

    let mut severities: BTreeMap<crate::telemetry::EventRef, SeveritySet> = BTreeMap::new();
    for (event_ref, record) in &unigram.records {
        let mut set = SeveritySet::default();
        for tag in ModelTag::ALL {
            let score = match (tag.scorer, tag.gram) {
                (crate::threshold::ScorerKind::Bm25, GramMode::Unigram) => record.bm25,
                (crate::threshold::ScorerKind::LogEntropy, GramMode::Unigram) => record.log_entropy,
                (crate::threshold::ScorerKind::Bm25, GramMode::Bigram) => {
                    bigram.records[event_ref].bm25
                }
                (crate::threshold::ScorerKind::LogEntropy, GramMode::Bigram) => {
                    bigram.records[event_ref].log_entropy
                }
            };
            set.set(tag, classify(score, &thresholds[&tag]));
        }
        severities.insert(*event_ref, set);
    }

    let flagged = filter_flagged(&severities);
    let local = analyze_local(&flagged, store, &config.local, as_of)?;
    let verdicts = finalize(
        &unigram.records,
        &bigram.records,
        &severities,
        &thresholds,
        &local,
    )?;
    let summary = summarize(&verdicts);

    Ok(DetectionRun {
        payloads,
        unigram,
        bigram,
        thresholds,
        severities,
        flagged,
        local,
        verdicts,
        summary,
        as_of,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::default_scenario;
    use crate::telemetry::EventRef;
    use crate::verdict::Classification;

    fn small_run() -> (EventStore, DetectionRun) {
        let mut scenario = default_scenario();
        scenario.workload.n_assets = 4;
        scenario.workload.commands_per_asset_per_day = 40;
        scenario.attacks.truncate(4);
        for (i, attack) in scenario.attacks.iter_mut().enumerate() {
            attack.target_asset = format!("ASSET-{:02}", i + 1);
        }
        let (events, _) = scenario.generate().unwrap();
        let store = EventStore::from_parsed(events);
        let run = run_detection(&store, &PipelineConfig::default()).unwrap();
        (store, run)
    }

    #[test]
    fn run_produces_one_verdict_per_event() {
        let (store, run) = small_run();
        assert_eq!(run.verdicts.len(), store.len());
        assert_eq!(run.payloads.len(), store.len());
        assert_eq!(run.severities.len(), store.len());
        // Every reference appears exactly once.
        let mut refs: Vec<EventRef> = run.verdicts.iter().map(|v| v.event_ref).collect();
        refs.sort_unstable();
        refs.dedup();
        assert_eq!(refs.len(), store.len());
    }

    #[test]
    fn run_is_deterministic() {
        let (_, a) = small_run();
        let (_, b) = small_run();
        assert_eq!(a.verdicts, b.verdicts);
        assert_eq!(a.thresholds, b.thresholds);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn flagged_set_matches_severities() {
        let (_, run) = small_run();
        for event_ref in &run.flagged {
            assert!(run.severities[event_ref].flagged());
        }
        let from_severities: Vec<EventRef> = run
            .severities
            .iter()
            .filter(|(_, s)| s.flagged())
            .map(|(r, _)| *r)
            .collect();
        assert_eq!(run.flagged, from_severities);
    }

    #[test]
    fn verdict_partition_is_consistent_with_layers() {
        let (_, run) = small_run();
        for verdict in &run.verdicts {
            let flagged = run.severities[&verdict.event_ref].flagged();
            match verdict.classification {
                Classification::Legitimate => assert!(!flagged),
                _ => assert!(flagged),
            }
        }
    }

    #[test]
    fn empty_store_is_rejected() {
        let store = EventStore::from_normalized(Vec::new());
        assert!(matches!(
            run_detection(&store, &PipelineConfig::default()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn config_validation_catches_duplicates_and_zeroes() {
        let mut config = PipelineConfig::default();
        config.attribute_order.push(PayloadAttribute::DeviceId);
        assert!(config.validate().is_err());

        let config = PipelineConfig {
            window_days: 0,
            ..PipelineConfig::default()
        };
        assert!(config.validate().is_err());

        let config = PipelineConfig {
            attribute_order: Vec::new(),
            ..PipelineConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn cross_field_pairs_enrich_bigram_docs() {
        let (store, _) = small_run();
        let config = PipelineConfig {
            cross_field_pairs: true,
            ..PipelineConfig::default()
        };
        let payloads = store.build_payloads(&config.attribute_order).unwrap();
        let plain = tokenize_all(
            &store,
            &payloads,
            GramMode::Bigram,
            &PipelineConfig::default(),
        )
        .unwrap();
        let enriched = tokenize_all(&store, &payloads, GramMode::Bigram, &config).unwrap();
        // 7 attributes -> up to 21 extra pair tokens per document.
        assert!(enriched[0].length > plain[0].length);
        let run = run_detection(&store, &config).unwrap();
        assert_eq!(run.verdicts.len(), store.len());
    }
}
