//! Rarity scoring of payload documents against a frozen corpus model.
//!
//! Two scorers run over the same statistics. The saturating-frequency
//! scorer combines a length-regularized term frequency with a smoothed
//! inverse document frequency; the entropy-weight scorer rewards tokens
//! whose occurrences concentrate in few documents. Both sum per-token
//! contributions over the distinct tokens of a document, so larger totals
//! mean rarer payloads.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::EventRef;
use crate::tokenize::{CorpusModel, TokenizedDoc};

/// Term-frequency shape parameters.
///
/// `k` bounds a single token's contribution (saturation), `b` sets how much
/// long documents are penalized (0 = not at all, 1 = fully proportional).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringParams {
    pub k: f64,
    pub b: f64,
}

impl Default for ScoringParams {
    fn default() -> Self {
        ScoringParams { k: 1.5, b: 0.75 }
    }
}

impl ScoringParams {
    pub fn validate(&self) -> Result<()> {
        if !self.k.is_finite() || self.k < 0.0 {
            return Err(Error::Parameter(format!(
                "k must be finite and >= 0, got {}",
                self.k
            )));
        }
        if !self.b.is_finite() || !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Parameter(format!(
                "b must be in [0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

/// Saturating, length-regularized term frequency.
///
/// `f * (k+1) / (f + k * (1 - b + b * len/avg_len))`. At `f = 1` and
/// `len = avg_len` the regularizer is exactly 1 and the value is exactly
/// 1.0 for any `b`; as `f` grows the value saturates toward `k + 1`.
pub fn tf_score(
    term_count: u32,
    doc_length: u32,
    params: &ScoringParams,
    avg_doc_length: f64,
) -> Result<f64> {
    params.validate()?;
    if avg_doc_length <= 0.0 || !avg_doc_length.is_finite() {
        return Err(Error::Parameter(format!(
            "average document length must be positive, got {avg_doc_length}"
        )));
    }
    let f = f64::from(term_count);
    let regularizer = (1.0 - params.b) + params.b * (f64::from(doc_length) / avg_doc_length);
    Ok(f * (params.k + 1.0) / (f + params.k * regularizer))
}

/// Smoothed inverse document frequency: `ln((N - n + 0.5)/(n + 0.5) + 1)`.
///
/// The additive 1 keeps the value positive even when a token appears in
/// every document, so rarity contributions never flip sign.
pub fn idf_score(doc_frequency: u64, corpus_size: u64) -> Result<f64> {
    if corpus_size == 0 {
        return Err(Error::EmptyCorpus);
    }
    if doc_frequency == 0 || doc_frequency > corpus_size {
        return Err(Error::Consistency(format!(
            "document frequency {doc_frequency} out of range for corpus of {corpus_size}"
        )));
    }
    let n = corpus_size as f64;
    let df = doc_frequency as f64;
    Ok(((n - df + 0.5) / (df + 0.5) + 1.0).ln())
}

/// Entropy-style weight of one token in one document:
/// `1 + (f_dt / F_t) * ln(N / (1 + n_t))` where `f_dt` is the in-document
/// count, `F_t` the corpus-wide count, `n_t` the document frequency and `N`
/// the corpus size. A token concentrated in a single document of a large
/// corpus scores near `1 + ln(N/2)`; a token spread evenly scores near 1.
pub fn log_entropy_weight(
    term_count: u32,
    total_term_count: u64,
    doc_frequency: u64,
    corpus_size: u64,
) -> Result<f64> {
    if corpus_size == 0 {
        return Err(Error::EmptyCorpus);
    }
    if total_term_count == 0 || doc_frequency == 0 {
        return Err(Error::Consistency(
            "token has zero corpus frequency but appears in a document".into(),
        ));
    }
    if u64::from(term_count) > total_term_count || doc_frequency > corpus_size {
        return Err(Error::Consistency(format!(
            "impossible token statistics: f_dt={term_count} F_t={total_term_count} n_t={doc_frequency} N={corpus_size}"
        )));
    }
    let share = f64::from(term_count) / total_term_count as f64;
    let spread = (corpus_size as f64 / (1.0 + doc_frequency as f64)).ln();
    Ok(1.0 + share * spread)
}

/// Per-token contributions to each scorer's total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct TokenAttribution {
    pub bm25: f64,
    pub log_entropy: f64,
}

/// Both scorers' results for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub event_ref: EventRef,
    pub bm25: f64,
    pub log_entropy: f64,
    /// Per-token breakdown, summing to the totals above.
    pub attributions: BTreeMap<String, TokenAttribution>,
}

fn model_stats(token: &str, model: &CorpusModel) -> Result<(u64, u64)> {
    let df =
        model.doc_frequency.get(token).copied().ok_or_else(|| {
            Error::Consistency(format!("token '{token}' missing from frozen model"))
        })?;
    let ttf = model
        .total_term_frequency
        .get(token)
        .copied()
        .ok_or_else(|| {
            Error::Consistency(format!("token '{token}' missing total term frequency"))
        })?;
    Ok((df, ttf))
}

/// Scores one document with both scorers against a frozen model.
///
/// Every document token must be in the model's vocabulary; scoring a
/// document the model has never summarized is a consistency error, not a
/// silent zero. Contributions are summed over distinct tokens in
/// lexicographic order, so totals are reproducible bit for bit.
pub fn score_document(
    doc: &TokenizedDoc,
    model: &CorpusModel,
    params: &ScoringParams,
) -> Result<ScoreRecord> {
    params.validate()?;
    let mut attributions: BTreeMap<String, TokenAttribution> = BTreeMap::new();
    let mut bm25_total = 0.0f64;
    let mut entropy_total = 0.0f64;
    for (token, &count) in &doc.token_counts {
        let (df, ttf) = model_stats(token, model)?;
        let tf = tf_score(count, doc.length, params, model.avg_doc_length)?;
        let idf = idf_score(df, model.doc_count)?;
        let bm25 = idf * tf;
        let entropy = log_entropy_weight(count, ttf, df, model.doc_count)?;
        bm25_total += bm25;
        entropy_total += entropy;
        attributions.insert(
            token.clone(),
            TokenAttribution {
                bm25,
                log_entropy: entropy,
            },
        );
    }
    Ok(ScoreRecord {
        event_ref: doc.event_ref,
        bm25: bm25_total,
        log_entropy: entropy_total,
        attributions,
    })
}
