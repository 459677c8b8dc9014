//! Error type shared across the detection engine.

/// Errors raised by the engine's stages.
///
/// Variants are grouped by how the caller should react: configuration
/// problems, data-quality problems, calibration failures, and internal
/// consistency violations that indicate a bug or a model/corpus mismatch.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    /// More than half of the input records failed to parse, which almost
    /// always means the declared format is wrong.
    #[error("corpus quality: {malformed} of {total} records malformed (is the format right?)")]
    CorpusQuality { malformed: usize, total: usize },

    #[error("empty corpus: at least one document is required")]
    EmptyCorpus,

    #[error("payload construction: all selected attributes are empty")]
    EmptyPayload,

    #[error("cannot tokenize empty payload text")]
    EmptyText,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A document/model mismatch: the document references vocabulary the
    /// frozen model has never seen, or corpus statistics are impossible.
    #[error("corpus consistency: {0}")]
    Consistency(String),

    #[error("calibration requires at least 2 scores in the window, got {0}")]
    Calibration(usize),

    #[error("unresolved event reference {0}")]
    Reference(u64),

    #[error("scenario: {0}")]
    Scenario(String),

    /// Evaluation inputs do not cover each other (ground truth refers to
    /// events missing from the verdict set).
    #[error("coverage: {0}")]
    Coverage(String),

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
