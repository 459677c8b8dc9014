//! Error-to-exit-code mapping.
//!
//! | Code | Meaning |
//! |------|---------|
//! | 0    | success |
//! | 2    | configuration or usage error |
//! | 3    | data error (unreadable, malformed, or empty input) |
//! | 4    | calibration error (not enough history to set thresholds) |
//! | 5    | internal error |

use scade_core::Error as CoreError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CALIBRATION: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    /// Bad settings or usage: exits 2.
    Config(String),
    /// Unreadable or unusable input data: exits 3.
    Data(String),
    /// Engine error: exit code depends on the variant.
    Core(CoreError),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError::Data(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Core(e) => match e {
                CoreError::Parameter(_) | CoreError::Scenario(_) => EXIT_CONFIG,
                CoreError::Io(_)
                | CoreError::CorpusQuality { .. }
                | CoreError::EmptyCorpus
                | CoreError::EmptyPayload
                | CoreError::EmptyText
                | CoreError::Coverage(_) => EXIT_DATA,
                CoreError::Calibration(_) => EXIT_CALIBRATION,
                CoreError::Consistency(_)
                | CoreError::Reference(_)
                | CoreError::Serialization(_) => EXIT_INTERNAL,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Data(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}
