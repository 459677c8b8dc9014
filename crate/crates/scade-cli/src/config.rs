//! Run configuration.
//!
//! Settings come from four layers, weakest first: built-in defaults, a TOML
//! config file (`--config` or `SCADE_CONFIG`), `SCADE_*` environment
//! variables, and command-line flags. Later layers override earlier ones
//! field by field.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use scade_core::forest::ForestParams;
use scade_core::local::LocalParams;
use scade_core::pipeline::PipelineConfig;
use scade_core::scoring::ScoringParams;
use scade_core::telemetry::{LogFormat, PayloadAttribute, DEFAULT_ATTRIBUTE_ORDER};

use crate::exit::CliError;

/// Fully resolved settings for a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub log: Option<PathBuf>,
    pub format: LogFormat,
    pub out: PathBuf,
    pub attribute_order: Vec<PayloadAttribute>,
    pub cross_field_pairs: bool,
    pub k: f64,
    pub b: f64,
    pub window_days: u32,
    pub history_days: u32,
    pub n_trees: usize,
    pub subsample: usize,
    pub contamination: f64,
    pub forest_seed: u64,
    pub min_rows: usize,
    /// Keep benign positives in the verdict feed.
    pub include_bp: bool,
    /// 0 means "let the runtime decide".
    pub threads: usize,
    pub scenario: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let forest = ForestParams::default();
        let scoring = ScoringParams::default();
        RunConfig {
            log: None,
            format: LogFormat::Jsonl,
            out: PathBuf::from("scade-out"),
            attribute_order: DEFAULT_ATTRIBUTE_ORDER.to_vec(),
            cross_field_pairs: false,
            k: scoring.k,
            b: scoring.b,
            window_days: scade_core::threshold::DEFAULT_WINDOW_DAYS,
            history_days: scade_core::local::DEFAULT_HISTORY_DAYS,
            n_trees: forest.n_trees,
            subsample: forest.subsample,
            contamination: forest.contamination,
            forest_seed: forest.seed,
            min_rows: scade_core::local::MIN_STATS_ROWS,
            include_bp: true,
            threads: 0,
            scenario: "default".to_string(),
        }
    }
}

/// The optional layers: every field absent unless set.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverlay {
    pub log: Option<PathBuf>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
    pub attribute_order: Option<Vec<String>>,
    pub cross_field_pairs: Option<bool>,
    pub k: Option<f64>,
    pub b: Option<f64>,
    pub window_days: Option<u32>,
    pub history_days: Option<u32>,
    pub n_trees: Option<usize>,
    pub subsample: Option<usize>,
    pub contamination: Option<f64>,
    pub forest_seed: Option<u64>,
    pub min_rows: Option<usize>,
    pub include_bp: Option<bool>,
    pub threads: Option<usize>,
    pub scenario: Option<String>,
}

fn parse_attribute_order(names: &[String]) -> Result<Vec<PayloadAttribute>, CliError> {
    names
        .iter()
        .map(|name| {
            PayloadAttribute::from_str(name.trim()).map_err(|e| CliError::config(e.to_string()))
        })
        .collect()
}

impl RunConfig {
    pub fn apply(&mut self, overlay: &ConfigOverlay) -> Result<(), CliError> {
        if let Some(log) = &overlay.log {
            self.log = Some(log.clone());
        }
        if let Some(format) = &overlay.format {
            self.format =
                LogFormat::from_str(format).map_err(|e| CliError::config(e.to_string()))?;
        }
        if let Some(out) = &overlay.out {
            self.out = out.clone();
        }
        if let Some(order) = &overlay.attribute_order {
            self.attribute_order = parse_attribute_order(order)?;
        }
        if let Some(v) = overlay.cross_field_pairs {
            self.cross_field_pairs = v;
        }
        if let Some(v) = overlay.k {
            self.k = v;
        }
        if let Some(v) = overlay.b {
            self.b = v;
        }
        if let Some(v) = overlay.window_days {
            self.window_days = v;
        }
        if let Some(v) = overlay.history_days {
            self.history_days = v;
        }
        if let Some(v) = overlay.n_trees {
            self.n_trees = v;
        }
        if let Some(v) = overlay.subsample {
            self.subsample = v;
        }
        if let Some(v) = overlay.contamination {
            self.contamination = v;
        }
        if let Some(v) = overlay.forest_seed {
            self.forest_seed = v;
        }
        if let Some(v) = overlay.min_rows {
            self.min_rows = v;
        }
        if let Some(v) = overlay.include_bp {
            self.include_bp = v;
        }
        if let Some(v) = overlay.threads {
            self.threads = v;
        }
        if let Some(scenario) = &overlay.scenario {
            self.scenario = scenario.clone();
        }
        Ok(())
    }

    /// Reads one environment variable, parsed with the field's type.
    fn env_parse<T: FromStr>(name: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match std::env::var(name) {
            Ok(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::config(format!("bad {name}: {e}"))),
            Err(std::env::VarError::NotPresent) => Ok(None),
            Err(e) => Err(CliError::config(format!("bad {name}: {e}"))),
        }
    }

    pub fn env_overlay() -> Result<ConfigOverlay, CliError> {
        Ok(ConfigOverlay {
            log: Self::env_parse::<PathBuf>("SCADE_LOG")?,
            format: Self::env_parse::<String>("SCADE_FORMAT")?,
            out: Self::env_parse::<PathBuf>("SCADE_OUT")?,
            attribute_order: Self::env_parse::<String>("SCADE_ATTRIBUTE_ORDER")?
                .map(|raw| raw.split(',').map(|s| s.trim().to_string()).collect()),
            cross_field_pairs: Self::env_parse::<bool>("SCADE_CROSS_FIELD_PAIRS")?,
            k: Self::env_parse::<f64>("SCADE_K")?,
            b: Self::env_parse::<f64>("SCADE_B")?,
            window_days: Self::env_parse::<u32>("SCADE_WINDOW_DAYS")?,
            history_days: Self::env_parse::<u32>("SCADE_HISTORY_DAYS")?,
            n_trees: Self::env_parse::<usize>("SCADE_N_TREES")?,
            subsample: Self::env_parse::<usize>("SCADE_SUBSAMPLE")?,
            contamination: Self::env_parse::<f64>("SCADE_CONTAMINATION")?,
            forest_seed: Self::env_parse::<u64>("SCADE_FOREST_SEED")?,
            min_rows: Self::env_parse::<usize>("SCADE_MIN_ROWS")?,
            include_bp: Self::env_parse::<bool>("SCADE_INCLUDE_BP")?,
            threads: Self::env_parse::<usize>("SCADE_THREADS")?,
            scenario: Self::env_parse::<String>("SCADE_SCENARIO")?,
        })
    }

    pub fn file_overlay(path: &Path) -> Result<ConfigOverlay, CliError> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            CliError::config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        toml::from_str(&raw)
            .map_err(|e| CliError::config(format!("invalid config file {}: {e}", path.display())))
    }

    /// Builds the final configuration from all layers.
    ///
    /// `flag_overlay` holds only the values the user passed explicitly on
    /// the command line.
    pub fn resolve(
        config_flag: Option<&Path>,
        flag_overlay: &ConfigOverlay,
    ) -> Result<RunConfig, CliError> {
        let mut config = RunConfig::default();
        let config_path: Option<PathBuf> = match config_flag {
            Some(p) => Some(p.to_path_buf()),
            None => Self::env_parse::<PathBuf>("SCADE_CONFIG")?,
        };
        if let Some(path) = config_path {
            config.apply(&Self::file_overlay(&path)?)?;
        }
        config.apply(&Self::env_overlay()?)?;
        config.apply(flag_overlay)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.pipeline()
            .validate()
            .map_err(|e| CliError::config(e.to_string()))
    }

    pub fn scoring(&self) -> ScoringParams {
        ScoringParams {
            k: self.k,
            b: self.b,
        }
    }

    pub fn forest(&self) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            subsample: self.subsample,
            contamination: self.contamination,
            seed: self.forest_seed,
        }
    }

    pub fn local(&self) -> LocalParams {
        LocalParams {
            history_days: self.history_days,
            forest: self.forest(),
            min_rows: self.min_rows,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            attribute_order: self.attribute_order.clone(),
            cross_field_pairs: self.cross_field_pairs,
            scoring: self.scoring(),
            window_days: self.window_days,
            local: self.local(),
        }
    }

    /// Input log path, required by ingest-like commands.
    pub fn require_log(&self) -> Result<&Path, CliError> {
        let path = self
            .log
            .as_deref()
            .ok_or_else(|| CliError::config("no input log given (use --log)".to_string()))?;
        if !path.exists() {
            return Err(CliError::config(format!(
                "input log {} does not exist",
                path.display()
            )));
        }
        Ok(path)
    }
}
