//! Command-line front end for the detection engine.
//!
//! Subcommands map one-to-one onto pipeline stages plus the synthetic
//! drill tooling. `detect` runs all five stages; the single-stage
//! commands read and write the same artifact files, so a staged run
//! reproduces `detect` exactly.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod artifacts;
mod config;
mod exit;
mod stages;

use artifacts::{IngestReport, LocalSummaryFile, SummaryFile};
use config::{ConfigOverlay, RunConfig};
use exit::CliError;
use scade_core::synth::Metrics;
use stages::{ScoreStats, SimulateStats, ThresholdStats};

#[derive(Parser)]
#[command(
    name = "scade",
    version,
    about = "Payload rarity anomaly detection over process creation telemetry"
)]
struct Cli {
    /// TOML config file (also SCADE_CONFIG).
    #[arg(short, long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for stage artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 0 means one per core.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct IngestOpts {
    /// Input log file.
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
    /// Input encoding: jsonl or csv.
    #[arg(long, value_name = "FMT")]
    format: Option<String>,
    /// Payload attribute order, comma separated.
    #[arg(long, value_name = "ATTRS", value_delimiter = ',')]
    attribute_order: Option<Vec<String>>,
}

#[derive(Args, Default)]
struct ScoreOpts {
    /// Term frequency saturation.
    #[arg(long, value_name = "K")]
    k: Option<f64>,
    /// Length normalization strength, 0 to 1.
    #[arg(long, value_name = "B")]
    b: Option<f64>,
    /// Add cross-field attribute pairs to the bigram stream.
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    cross_field_pairs: Option<bool>,
}

#[derive(Args, Default)]
struct ThresholdOpts {
    /// Calibration window in days.
    #[arg(long, value_name = "DAYS")]
    window_days: Option<u32>,
}

#[derive(Args, Default)]
struct LocalizeOpts {
    /// Baseline history window in days.
    #[arg(long, value_name = "DAYS")]
    history_days: Option<u32>,
    /// Trees in the isolation forest.
    #[arg(long, value_name = "N")]
    n_trees: Option<usize>,
    /// Rows sampled per tree.
    #[arg(long, value_name = "N")]
    subsample: Option<usize>,
    /// Expected anomalous fraction, in (0, 0.5].
    #[arg(long, value_name = "FRAC")]
    contamination: Option<f64>,
    /// Isolation forest RNG seed.
    #[arg(long, value_name = "SEED")]
    forest_seed: Option<u64>,
    /// Minimum stats rows needed to train a forest.
    #[arg(long, value_name = "N")]
    min_rows: Option<usize>,
}

#[derive(Args, Default)]
struct ReportOpts {
    /// Keep benign positives in the verdict feed; false drops them.
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    include_bp: Option<bool>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a log, keep process creation events, build payloads.
    Ingest {
        #[command(flatten)]
        ingest: IngestOpts,
    },
    /// Fit corpus models and score payload rarity.
    Score {
        #[command(flatten)]
        score: ScoreOpts,
    },
    /// Calibrate dynamic thresholds and assign severities.
    Threshold {
        #[command(flatten)]
        threshold: ThresholdOpts,
    },
    /// Cross-check flagged events against execution baselines.
    Localize {
        #[command(flatten)]
        localize: LocalizeOpts,
    },
    /// Combine all evidence into ranked verdicts.
    Report {
        #[command(flatten)]
        report: ReportOpts,
    },
    /// Run the whole pipeline over one log.
    Detect {
        #[command(flatten)]
        ingest: IngestOpts,
        #[command(flatten)]
        score: ScoreOpts,
        #[command(flatten)]
        threshold: ThresholdOpts,
        #[command(flatten)]
        localize: LocalizeOpts,
        #[command(flatten)]
        report: ReportOpts,
        /// Resolve settings and check inputs without writing anything.
        #[arg(long)]
        dry_run: bool,
    },
    /// Generate a synthetic log with injected attack events.
    Simulate {
        /// 'default' or a scenario JSON file.
        #[arg(long, value_name = "NAME_OR_FILE")]
        scenario: Option<String>,
    },
    /// Score verdicts against ground truth.
    Evaluate {
        /// Verdicts file; defaults to OUT/verdicts.jsonl.
        #[arg(long, value_name = "FILE")]
        verdicts: Option<PathBuf>,
        /// Ground truth file; defaults to OUT/ground_truth.jsonl.
        #[arg(long, value_name = "FILE")]
        truth: Option<PathBuf>,
    },
}

fn overlay_ingest(overlay: &mut ConfigOverlay, opts: &IngestOpts) {
    overlay.log = opts.log.clone();
    overlay.format = opts.format.clone();
    overlay.attribute_order = opts.attribute_order.clone();
}

fn overlay_score(overlay: &mut ConfigOverlay, opts: &ScoreOpts) {
    overlay.k = opts.k;
    overlay.b = opts.b;
    overlay.cross_field_pairs = opts.cross_field_pairs;
}

fn overlay_threshold(overlay: &mut ConfigOverlay, opts: &ThresholdOpts) {
    overlay.window_days = opts.window_days;
}

fn overlay_localize(overlay: &mut ConfigOverlay, opts: &LocalizeOpts) {
    overlay.history_days = opts.history_days;
    overlay.n_trees = opts.n_trees;
    overlay.subsample = opts.subsample;
    overlay.contamination = opts.contamination;
    overlay.forest_seed = opts.forest_seed;
    overlay.min_rows = opts.min_rows;
}

fn overlay_report(overlay: &mut ConfigOverlay, opts: &ReportOpts) {
    overlay.include_bp = opts.include_bp;
}

impl Cli {
    fn overlay(&self) -> ConfigOverlay {
        let mut overlay = ConfigOverlay {
            out: self.out.clone(),
            threads: self.threads,
            ..ConfigOverlay::default()
        };
        match &self.command {
            Command::Ingest { ingest } => overlay_ingest(&mut overlay, ingest),
            Command::Score { score } => overlay_score(&mut overlay, score),
            Command::Threshold { threshold } => overlay_threshold(&mut overlay, threshold),
            Command::Localize { localize } => overlay_localize(&mut overlay, localize),
            Command::Report { report } => overlay_report(&mut overlay, report),
            Command::Evaluate { .. } => {}
            Command::Detect {
                ingest,
                score,
                threshold,
                localize,
                report,
                ..
            } => {
                overlay_ingest(&mut overlay, ingest);
                overlay_score(&mut overlay, score);
                overlay_threshold(&mut overlay, threshold);
                overlay_localize(&mut overlay, localize);
                overlay_report(&mut overlay, report);
            }
            Command::Simulate { scenario } => {
                overlay.scenario = scenario.clone();
            }
        }
        overlay
    }
}

fn print_ingest(report: &IngestReport) {
    let span = match (report.first_day, report.last_day) {
        (Some(first), Some(last)) => format!(", {first} to {last}"),
        _ => String::new(),
    };
    println!(
        "ingest: {} events from {} records ({} malformed){span}",
        report.events, report.total_records, report.malformed
    );
}

fn print_score(stats: &ScoreStats) {
    println!(
        "score: {} payloads, {} unigram terms, {} bigram terms",
        stats.payloads, stats.unigram_vocab, stats.bigram_vocab
    );
}

fn print_threshold(stats: &ThresholdStats) {
    println!(
        "threshold: as of {}, window {} days, flagged {} of {}",
        stats.file.as_of, stats.file.window_days, stats.flagged, stats.total
    );
    for tag in &stats.file.degenerate {
        eprintln!("warning: {tag} calibrated with zero variance; it flags nothing");
    }
}

fn print_localize(summary: &LocalSummaryFile) {
    let cutoff = match summary.cutoff {
        Some(c) => format!("{c:.6}"),
        None => "none".to_string(),
    };
    println!(
        "localize: {} flagged, {} scored, {} abstained, cutoff {}",
        summary.flagged, summary.scored, summary.abstained, cutoff
    );
}

fn print_report(summary: &SummaryFile) {
    println!(
        "report: {} true positive, {} benign positive, {} legitimate ({} low confidence)",
        summary.verdicts.true_positives,
        summary.verdicts.benign_positives,
        summary.verdicts.legitimate,
        summary.verdicts.low_confidence
    );
}

fn print_simulate(stats: &SimulateStats, config: &RunConfig) {
    println!(
        "simulate: {} events ({} attack events) written to {}",
        stats.events,
        stats.attacks,
        config.out.display()
    );
}

fn print_evaluate(metrics: &Metrics) {
    println!(
        "evaluate: precision {:.3} recall {:.3} snr {:.3} ({} tp, {} fp, {} fn)",
        metrics.precision,
        metrics.recall,
        metrics.snr,
        metrics.true_positives,
        metrics.false_positives,
        metrics.false_negatives
    );
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overlay = cli.overlay();
    let config = RunConfig::resolve(cli.config.as_deref(), &overlay)?;
    if config.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot set thread count: {e}")))?;
    }

    match &cli.command {
        Command::Ingest { .. } => print_ingest(&stages::run_ingest(&config)?),
        Command::Score { .. } => print_score(&stages::run_score(&config)?),
        Command::Threshold { .. } => print_threshold(&stages::run_threshold(&config)?),
        Command::Localize { .. } => print_localize(&stages::run_localize(&config)?),
        Command::Report { .. } => print_report(&stages::run_report(&config)?),
        Command::Detect { dry_run, .. } => {
            if *dry_run {
                config.require_log()?;
                let resolved = serde_json::to_string_pretty(&config)
                    .map_err(|e| CliError::data(format!("cannot render settings: {e}")))?;
                println!("{resolved}");
                return Ok(());
            }
            print_ingest(&stages::run_ingest(&config)?);
            print_score(&stages::run_score(&config)?);
            print_threshold(&stages::run_threshold(&config)?);
            print_localize(&stages::run_localize(&config)?);
            print_report(&stages::run_report(&config)?);
        }
        Command::Simulate { .. } => print_simulate(&stages::run_simulate(&config)?, &config),
        Command::Evaluate { verdicts, truth } => print_evaluate(&stages::run_evaluate(
            &config,
            verdicts.as_deref(),
            truth.as_deref(),
        )?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
