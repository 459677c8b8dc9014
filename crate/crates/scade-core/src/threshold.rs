//! Dynamic score thresholds.
//!
//! Instead of fixed cutoffs, each scorer/token-mode combination gets a
//! threshold model calibrated from the score distribution of a rolling
//! window of recent days: mean and population standard deviation. Severity
//! is assigned by distance above the mean in standard deviations.

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scoring::ScoringParams;

/// Days of score history a threshold is calibrated from.
pub const DEFAULT_WINDOW_DAYS: u32 = 2;

/// Severity cutoffs in standard deviations above the mean.
pub const HIGH_SIGMA: f64 = 2.0;
pub const MEDIUM_SIGMA: f64 = 1.5;

/// Absorbs floating-point rounding at severity boundaries so a score that
/// mathematically equals the cutoff is never pushed over it by the
/// mean/deviation computation path. Severity is strict: a score must exceed
/// the cutoff by more than this (in standardized units) to escalate.
const BOUNDARY_EPSILON: f64 = 1e-9;

/// The two rarity scorers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Bm25,
    LogEntropy,
}

impl ScorerKind {
    pub const ALL: [ScorerKind; 2] = [ScorerKind::Bm25, ScorerKind::LogEntropy];

    pub fn as_str(self) -> &'static str {
        match self {
            ScorerKind::Bm25 => "bm25",
            ScorerKind::LogEntropy => "log_entropy",
        }
    }
}

/// Token stream a model scores over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum GramMode {
    Unigram,
    Bigram,
}

impl GramMode {
    pub const ALL: [GramMode; 2] = [GramMode::Unigram, GramMode::Bigram];

    pub fn as_str(self) -> &'static str {
        match self {
            GramMode::Unigram => "unigram",
            GramMode::Bigram => "bigram",
        }
    }

    pub fn token_mode(self) -> crate::tokenize::TokenMode {
        match self {
            GramMode::Unigram => crate::tokenize::TokenMode::Unigram,
            GramMode::Bigram => crate::tokenize::TokenMode::Bigram,
        }
    }
}

/// Identifies one of the four scorer/token-mode combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
pub struct ModelTag {
    pub scorer: ScorerKind,
    pub gram: GramMode,
}

impl ModelTag {
    /// All four combinations, in a fixed order.
    pub const ALL: [ModelTag; 4] = [
        ModelTag {
            scorer: ScorerKind::Bm25,
            gram: GramMode::Unigram,
        },
        ModelTag {
            scorer: ScorerKind::Bm25,
            gram: GramMode::Bigram,
        },
        ModelTag {
            scorer: ScorerKind::LogEntropy,
            gram: GramMode::Unigram,
        },
        ModelTag {
            scorer: ScorerKind::LogEntropy,
            gram: GramMode::Bigram,
        },
    ];
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}_{}", self.scorer.as_str(), self.gram.as_str())
    }
}

/// Alert severity. Ordered: `Low < Medium < High`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    #[default]
    Low,
    Medium,
    High,
}

/// Calibrated threshold for one scorer/token-mode combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub tag: ModelTag,
    pub mean: f64,
    /// Population standard deviation (divisor n).
    pub std_dev: f64,
    pub window_days: u32,
    /// Scores the calibration saw.
    pub sample_count: usize,
}

impl ThresholdModel {
    /// A zero-variance window cannot discriminate; every score is low.
    pub fn is_degenerate(&self) -> bool {
        self.std_dev == 0.0
    }

    /// Distance of a score above the mean in standard deviations, or 0 for
    /// a degenerate model.
    pub fn standardized(&self, score: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (score - self.mean) / self.std_dev
        }
    }
}

/// Calibrates a threshold model from a window of scores.
///
/// Needs at least two scores; one score has no spread to measure. A window
/// where every score is identical calibrates to a degenerate model rather
/// than failing, since that is a legitimate (if useless) distribution.
pub fn calibrate(scores: &[f64], window_days: u32, tag: ModelTag) -> Result<ThresholdModel> {
    if scores.len() < 2 {
        return Err(Error::Calibration(scores.len()));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Consistency(format!(
            "non-finite score {bad} in calibration window"
        )));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let variance = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    Ok(ThresholdModel {
        tag,
        mean,
        std_dev: variance.sqrt(),
        window_days,
        sample_count: scores.len(),
    })
}

/// Assigns a severity to one score.
///
/// High requires strictly more than two standard deviations above the mean;
/// medium covers the half-open interval above 1.5 up to and including 2.
/// Degenerate models label everything low.
pub fn classify(score: f64, model: &ThresholdModel) -> Severity {
    if model.is_degenerate() {
        return Severity::Low;
    }
    let z = model.standardized(score);
    if z > HIGH_SIGMA + BOUNDARY_EPSILON {
        Severity::High
    } else if z > MEDIUM_SIGMA + BOUNDARY_EPSILON {
        Severity::Medium
    } else {
        Severity::Low
    }
}

/// Per-day score history for one scorer/token-mode combination.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistory {
    by_day: BTreeMap<NaiveDate, Vec<f64>>,
}

impl ScoreHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, day: NaiveDate, score: f64) {
        self.by_day.entry(day).or_default().push(score);
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.by_day.keys().copied()
    }

    /// Scores within the `window_days`-day window ending at `as_of`
    /// (inclusive).
    pub fn window_scores(&self, as_of: NaiveDate, window_days: u32) -> Vec<f64> {
        if window_days == 0 {
            return Vec::new();
        }
        let start = as_of - Duration::days(i64::from(window_days) - 1);
        self.by_day
            .range(start..=as_of)
            .flat_map(|(_, scores)| scores.iter().copied())
            .collect()
    }
}

/// Recalibrates a threshold from the history window ending at `now`'s UTC
/// date. Scores from days after `now` are ignored.
pub fn recalibrate(
    history: &ScoreHistory,
    now: DateTime<Utc>,
    window_days: u32,
    tag: ModelTag,
) -> Result<ThresholdModel> {
    if window_days == 0 {
        return Err(Error::Parameter("window_days must be at least 1".into()));
    }
    let scores = history.window_scores(now.date_naive(), window_days);
    calibrate(&scores, window_days, tag)
}

/// Severity under each of the four scorer/token-mode combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SeveritySet {
    pub bm25_unigram: Severity,
    pub bm25_bigram: Severity,
    pub log_entropy_unigram: Severity,
    pub log_entropy_bigram: Severity,
}

impl SeveritySet {
    pub fn get(&self, tag: ModelTag) -> Severity {
        match (tag.scorer, tag.gram) {
            (ScorerKind::Bm25, GramMode::Unigram) => self.bm25_unigram,
            (ScorerKind::Bm25, GramMode::Bigram) => self.bm25_bigram,
            (ScorerKind::LogEntropy, GramMode::Unigram) => self.log_entropy_unigram,
            (ScorerKind::LogEntropy, GramMode::Bigram) => self.log_entropy_bigram,
        }
    }

    pub fn set(&mut self, tag: ModelTag, severity: Severity) {
        match (tag.scorer, tag.gram) {
            (ScorerKind::Bm25, GramMode::Unigram) => self.bm25_unigram = severity,
            (ScorerKind::Bm25, GramMode::Bigram) => self.bm25_bigram = severity,
            (ScorerKind::LogEntropy, GramMode::Unigram) => self.log_entropy_unigram = severity,
            (ScorerKind::LogEntropy, GramMode::Bigram) => self.log_entropy_bigram = severity,
        }
    }

    pub fn max(&self) -> Severity {
        ModelTag::ALL
            .iter()
            .map(|tag| self.get(*tag))
            .max()
            .unwrap_or(Severity::Low)
    }

    /// An event is flagged when any combination rates it medium or high.
    pub fn flagged(&self) -> bool {
        self.max() >= Severity::Medium
    }
}

/// Full scoring configuration for a run, bundling the shared term-frequency
/// parameters with the calibration window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdParams {
    pub scoring: ScoringParams,
    pub window_days: u32,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        ThresholdParams {
            scoring: ScoringParams::default(),
            window_days: DEFAULT_WINDOW_DAYS,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TAG: ModelTag = ModelTag {
        scorer: ScorerKind::Bm25,
        gram: GramMode::Unigram,
    };

    #[test]
    fn calibrate_uses_population_deviation() {
        // Scores [1,1,1,1,10]: mean 2.8, population deviation 3.6.
        let model = calibrate(&[1.0, 1.0, 1.0, 1.0, 10.0], 2, TAG).unwrap();
        assert_relative_eq!(model.mean, 2.8, max_relative = 1e-12);
        assert_relative_eq!(model.std_dev, 3.6, max_relative = 1e-12);
        assert_eq!(model.sample_count, 5);
    }

    #[test]
    fn classify_boundaries() {
        let model = calibrate(&[1.0, 1.0, 1.0, 1.0, 10.0], 2, TAG).unwrap();
        // 10 sits exactly at mean + 2 deviations: medium, not high.
        assert_eq!(classify(10.0, &model), Severity::Medium);
        assert_eq!(classify(10.01, &model), Severity::High);
        // 8.2 = mean + 1.5 deviations exactly: low, medium starts above it.
        assert_eq!(classify(8.2, &model), Severity::Low);
        assert_eq!(classify(8.21, &model), Severity::Medium);
        assert_eq!(classify(1.0, &model), Severity::Low);
        assert_eq!(classify(-50.0, &model), Severity::Low);
        assert_eq!(classify(1e9, &model), Severity::High);
    }

    #[test]
    fn single_score_cannot_calibrate() {
        assert!(matches!(
            calibrate(&[5.0], 2, TAG),
            Err(Error::Calibration(1))
        ));
        assert!(matches!(calibrate(&[], 2, TAG), Err(Error::Calibration(0))));
    }

    #[test]
    fn identical_scores_degenerate_to_all_low() {
        let model = calibrate(&[3.0; 40], 2, TAG).unwrap();
        assert!(model.is_degenerate());
        assert_eq!(classify(3.0, &model), Severity::Low);
        assert_eq!(classify(1e12, &model), Severity::Low);
        assert_eq!(model.standardized(1e12), 0.0);
    }

    #[test]
    fn severity_is_monotone_in_score() {
        let model = calibrate(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 9.0], 2, TAG).unwrap();
        let mut last = Severity::Low;
        for i in 0..2000 {
            let score = -5.0 + f64::from(i) * 0.01;
            let severity = classify(score, &model);
            assert!(severity >= last, "severity regressed at score {score}");
            last = severity;
        }
    }

    #[test]
    fn affine_transform_preserves_labels() {
        let base = [1.0, 1.0, 1.0, 1.0, 10.0];
        let model = calibrate(&base, 2, TAG).unwrap();
        let probes = [1.0, 8.2, 8.21, 10.0, 10.01, 40.0];
        let original: Vec<Severity> = probes.iter().map(|s| classify(*s, &model)).collect();

        for (a, c) in [(2.0, 5.0), (0.001, -3.0), (1e6, 1e8), (0.5, 0.0)] {
            let transformed: Vec<f64> = base.iter().map(|s| a * s + c).collect();
            let t_model = calibrate(&transformed, 2, TAG).unwrap();
            for (probe, want) in probes.iter().zip(&original) {
                let got = classify(a * probe + c, &t_model);
                assert_eq!(got, *want, "a={a} c={c} probe={probe}");
            }
        }
    }

    #[test]
    fn window_selects_recent_days_only() {
        let day = |d: u32| NaiveDate::from_ymd_opt(2025, 6, d).unwrap();
        let mut history = ScoreHistory::new();
        history.add(day(1), 100.0);
        history.add(day(2), 1.0);
        history.add(day(3), 2.0);
        history.add(day(3), 3.0);
        history.add(day(4), 999.0);

        // Two-day window ending June 3 sees only June 2 and 3.
        let scores = history.window_scores(day(3), 2);
        assert_eq!(scores, vec![1.0, 2.0, 3.0]);

        let now = day(3).and_hms_opt(23, 0, 0).unwrap().and_utc();
        let model = recalibrate(&history, now, 2, TAG).unwrap();
        assert_relative_eq!(model.mean, 2.0, max_relative = 1e-12);
        assert_eq!(model.sample_count, 3);
    }

    #[test]
    fn empty_window_is_a_calibration_error() {
        let day = NaiveDate::from_ymd_opt(2025, 6, 1).unwrap();
        let mut history = ScoreHistory::new();
        history.add(day, 1.0);
        let much_later = NaiveDate::from_ymd_opt(2025, 7, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
            .and_utc();
        assert!(matches!(
            recalibrate(&history, much_later, 2, TAG),
            Err(Error::Calibration(0))
        ));
    }

    #[test]
    fn non_finite_scores_rejected() {
        assert!(matches!(
            calibrate(&[1.0, f64::NAN], 2, TAG),
            Err(Error::Consistency(_))
        ));
        assert!(matches!(
            calibrate(&[1.0, f64::INFINITY], 2, TAG),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn severity_set_flagging_rule() {
        let mut set = SeveritySet::default();
        assert!(!set.flagged());
        set.bm25_bigram = Severity::Medium;
        assert!(set.flagged());
        assert_eq!(set.max(), Severity::Medium);
        set.log_entropy_unigram = Severity::High;
        assert_eq!(set.max(), Severity::High);
        assert_eq!(set.get(ModelTag::ALL[3]), Severity::Low);
    }

    #[test]
    fn model_tag_display_names() {
        let names: Vec<String> = ModelTag::ALL.iter().map(|t| t.to_string()).collect();
        assert_eq!(
            names,
            vec![
                "bm25_unigram",
                "bm25_bigram",
                "log_entropy_unigram",
                "log_entropy_bigram"
            ]
        );
    }
}
