//! Tokenization and corpus statistics.
//!
//! Payload text is split on whitespace into unigrams; bigrams are adjacent
//! ordered pairs joined by a separator that cannot occur inside a token.
//! Corpus statistics (document frequency, total term frequency, average
//! document length) are accumulated through a builder whose merge is
//! associative, so partial models built over disjoint document sets combine
//! into the same model regardless of grouping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::{EventRef, PayloadItem};

/// Joins the two halves of a bigram token. U+241E (symbol for record
/// separator) never appears in whitespace-split tokens, so unigrams and
/// bigrams cannot collide.
pub const BIGRAM_SEPARATOR: char = '\u{241E}';

/// Which token streams a document carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenMode {
    Unigram,
    Bigram,
    /// Union of both streams with counts summed per token.
    Both,
}

/// Bag-of-tokens view of one payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub event_ref: EventRef,
    /// Token counts in deterministic (lexicographic) order.
    pub token_counts: BTreeMap<String, u32>,
    /// Total token count, i.e. the document length.
    pub length: u32,
}

/// Splits payload text into the requested token stream.
///
/// A single-token document has no bigrams: in bigram mode it yields an
/// empty document, which is still valid for scoring (score zero).
pub fn tokenize(payload: &PayloadItem, mode: TokenMode) -> Result<TokenizedDoc> {
    let unigrams: Vec<&str> = payload.text.split_whitespace().collect();
    if unigrams.is_empty() {
        return Err(Error::EmptyText);
    }
    let mut token_counts: BTreeMap<String, u32> = BTreeMap::new();
    let mut length = 0u32;
    if matches!(mode, TokenMode::Unigram | TokenMode::Both) {
        for t in &unigrams {
            *token_counts.entry((*t).to_string()).or_insert(0) += 1;
            length += 1;
        }
    }
    if matches!(mode, TokenMode::Bigram | TokenMode::Both) {
        for pair in unigrams.windows(2) {
            let mut token = String::with_capacity(pair[0].len() + pair[1].len() + 3);
            token.push_str(pair[0]);
            token.push(BIGRAM_SEPARATOR);
            token.push_str(pair[1]);
            *token_counts.entry(token).or_insert(0) += 1;
            length += 1;
        }
    }
    Ok(TokenizedDoc {
        event_ref: payload.event_ref,
        token_counts,
        length,
    })
}

/// Builds unordered attribute-pair tokens from attribute values, one per
/// pair of distinct non-empty attributes. The two values are ordered
/// lexicographically inside the token so that (a, b) and (b, a) produce the
/// same token. Intended to be appended to a bigram stream to capture
/// "attribute values that never co-occur" without regard to adjacency.
pub fn cross_field_pair_tokens(values: &[&str]) -> Vec<String> {
    let present: Vec<&str> = values.iter().copied().filter(|v| !v.is_empty()).collect();
    let mut tokens = Vec::new();
    for i in 0..present.len() {
        for j in (i + 1)..present.len() {
            let (lo, hi) = if present[i] <= present[j] {
                (present[i], present[j])
            } else {
                (present[j], present[i])
            };
            let mut token = String::with_capacity(lo.len() + hi.len() + 3);
            token.push_str(lo);
            token.push(BIGRAM_SEPARATOR);
            token.push_str(hi);
            tokens.push(token);
        }
    }
    tokens
}

/// Adds extra tokens (for example cross-field pairs) to a document.
pub fn extend_doc(doc: &mut TokenizedDoc, extra: impl IntoIterator<Item = String>) {
    for token in extra {
        if token.is_empty() {
            continue;
        }
        *doc.token_counts.entry(token).or_insert(0) += 1;
        doc.length += 1;
    }
}

/// Frozen corpus statistics for one token mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusModel {
    /// Number of documents the model was built from.
    pub doc_count: u64,
    /// Mean document length over the corpus.
    pub avg_doc_length: f64,
    /// Per token: number of documents containing it at least once.
    pub doc_frequency: BTreeMap<String, u64>,
    /// Per token: total occurrences summed over all documents.
    pub total_term_frequency: BTreeMap<String, u64>,
}

impl CorpusModel {
    pub fn vocabulary_size(&self) -> usize {
        self.doc_frequency.len()
    }

    /// Sorted vocabulary; the position of a token in this list is its
    /// dense index, stable for a frozen model.
    pub fn vocabulary(&self) -> Vec<&str> {
        self.doc_frequency.keys().map(String::as_str).collect()
    }

    /// Dense index of a token, if the model has seen it.
    pub fn token_index(&self, token: &str) -> Option<usize> {
        use std::ops::Bound;
        // BTreeMap iteration is sorted, so the range before the token is
        // exactly its index.
        if !self.doc_frequency.contains_key(token) {
            return None;
        }
        let before = (Bound::Unbounded, Bound::Excluded(token));
        Some(self.doc_frequency.range::<str, _>(before).count())
    }
}

/// Accumulates corpus statistics document by document.
///
/// `merge` is associative and commutative, so disjoint chunks of a corpus
/// can be folded independently and combined in any grouping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusBuilder {
    doc_count: u64,
    length_sum: u64,
    doc_frequency: BTreeMap<String, u64>,
    total_term_frequency: BTreeMap<String, u64>,
}

impl CorpusBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_doc(&mut self, doc: &TokenizedDoc) {
        self.doc_count += 1;
        self.length_sum += u64::from(doc.length);
        for (token, count) in &doc.token_counts {
            *self.doc_frequency.entry(token.clone()).or_insert(0) += 1;
            *self.total_term_frequency.entry(token.clone()).or_insert(0) += u64::from(*count);
        }
    }

    pub fn merge(mut self, other: CorpusBuilder) -> CorpusBuilder {
        self.doc_count += other.doc_count;
        self.length_sum += other.length_sum;
        for (token, n) in other.doc_frequency {
            *self.doc_frequency.entry(token).or_insert(0) += n;
        }
        for (token, n) in other.total_term_frequency {
            *self.total_term_frequency.entry(token).or_insert(0) += n;
        }
        self
    }

    pub fn finish(self) -> Result<CorpusModel> {
        if self.doc_count == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(CorpusModel {
            doc_count: self.doc_count,
            avg_doc_length: self.length_sum as f64 / self.doc_count as f64,
            doc_frequency: self.doc_frequency,
            total_term_frequency: self.total_term_frequency,
        })
    }
}

/// Builds a corpus model over a document set.
pub fn build_corpus_model(docs: &[TokenizedDoc]) -> Result<CorpusModel> {
    let mut builder = CorpusBuilder::new();
    for doc in docs {
        builder.add_doc(doc);
    }
    builder.finish()
}

/// Sparse vector form of a document against a frozen model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseVector {
    /// (dense vocabulary index, count) pairs, index-ascending.
    pub entries: Vec<(usize, u32)>,
    /// Total count of tokens absent from the model's vocabulary.
    pub oov_count: u32,
}

/// Projects a document onto a model's vocabulary. Out-of-vocabulary tokens
/// are tallied, not dropped silently.
pub fn vectorize(doc: &TokenizedDoc, model: &CorpusModel) -> SparseVector {
    let mut entries = Vec::new();
    let mut oov_count = 0u32;
    for (token, count) in &doc.token_counts {
        match model.token_index(token) {
            Some(index) => entries.push((index, *count)),
            None => oov_count += *count,
        }
    }
    // BTreeMap iteration is lexicographic and so is the vocabulary, hence
    // indices already ascend.
    SparseVector { entries, oov_count }
}
