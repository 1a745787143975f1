//! Decision makers and the evaluation runner.
//!
//! A comparator is anything that maps a resume pair to a verdict: a remote
//! chat endpoint, or one of the synthetic reference judges used to calibrate
//! the metrics (oracle, coin flip, biased judge, and friends). Synthetic
//! verdicts are pure functions of (comparator seed, pair id), so any run can
//! be replayed bit for bit. The runner walks the requested grid of
//! pair x comparator x prompt variant x mode cells, appends one record per
//! cell to a line-delimited log, and skips cells that are already on disk,
//! which makes interrupted runs resumable without duplicates.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::sync::LazyLock;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::ChatClient;
use crate::gensuite::Suite;
use crate::model::{DemographicGroup, GroundTruthLabel, PairCase, PairId};
use crate::{seeds, SCHEMA_VERSION};

mod prompts;

pub use prompts::{
    assemble_prompt, job_posting_text, system_text, user_template, BASELINE_SYSTEM,
    HUMAN_REPHRASED_SYSTEM, LLM_REPHRASED_SYSTEM, SLOT_JOB, SLOT_RESUME_1, SLOT_RESUME_2,
};

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("invalid run setup: {0}")]
    Config(String),
    #[error("pair {pair_id} belongs to job {pair_job}, prompt assembly got job {got_job}")]
    JobMismatch { pair_id: String, pair_job: String, got_job: String },
    #[error("suite does not define job {job_id}, referenced by pair {pair_id}")]
    MissingJob { pair_id: String, job_id: String },
    #[error("missing artifact {path}; run `{produced_by}` first")]
    MissingArtifact { path: String, produced_by: String },
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("artifact {path} has schema {found}, expected {expected}")]
    Schema { path: String, found: String, expected: String },
    #[error("run directory already holds a different run ({path}): {detail}")]
    PlanMismatch { path: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    First,
    Second,
    Abstain,
}

impl Verdict {
    /// The token a well-behaved responder would put inside the answer tags.
    pub fn as_token(self) -> &'static str {
        match self {
            Verdict::First => "first",
            Verdict::Second => "second",
            Verdict::Abstain => "ABSTAIN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFailureKind {
    /// No <answer>...</answer> span anywhere in the response.
    NoTag,
    /// A tag was found but its content is not one of the legal tokens.
    BadToken,
    /// An ABSTAIN answer under forced choice.
    IllegalAbstain,
    /// The endpoint never produced a response.
    Transport,
}

/// What a comparator produced for one cell. Metrics treat `ParseFailure`
/// according to policy; it never aborts a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Verdict(Verdict),
    ParseFailure(ParseFailureKind),
}

impl Decision {
    pub fn verdict(self) -> Option<Verdict> {
        match self {
            Decision::Verdict(v) => Some(v),
            Decision::ParseFailure(_) => None,
        }
    }

    pub fn is_parse_failure(self) -> bool {
        matches!(self, Decision::ParseFailure(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    Baseline,
    HumanRephrased,
    LlmRephrased,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 3] =
        [PromptVariant::Baseline, PromptVariant::HumanRephrased, PromptVariant::LlmRephrased];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::Baseline => "baseline",
            PromptVariant::HumanRephrased => "human_rephrased",
            PromptVariant::LlmRephrased => "llm_rephrased",
        }
    }
}

impl std::fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fully assembled prompt for one pair in one variant and mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub variant: PromptVariant,
    pub abstain_allowed: bool,
    pub system_text: String,
    pub user_text: String,
}

/// One evaluated cell. `raw_response` keeps whatever came back, verbatim,
/// so parse failures stay auditable; for transport failures, where nothing
/// came back, it holds the transport error text instead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub pair_id: PairId,
    pub comparator_id: String,
    pub variant: PromptVariant,
    pub abstain_allowed: bool,
    #[serde(default)]
    pub repeat: u32,
    pub raw_response: String,
    pub decision: Decision,
    pub attempt_count: u32,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComparatorKind {
    /// A live chat-completions endpoint. Carries the credential variable's
    /// name; the credential itself is read from the environment at call time.
    RemoteEndpoint {
        label: String,
        url: String,
        model: String,
        credential_env: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        params: BTreeMap<String, serde_json::Value>,
    },
    /// Always selects the strictly better side; abstains on ties when
    /// allowed, otherwise flips a seeded fair coin.
    Oracle,
    /// Inverts the oracle on strict pairs; behaves like the oracle on ties.
    AntiOracle,
    /// Seeded fair coin between the two sides; never abstains.
    CoinFlip,
    /// Emits the ABSTAIN token regardless of truth or mode, so forced-choice
    /// cells become IllegalAbstain parse failures.
    AlwaysAbstain,
    /// Oracle that errs with probability epsilon: picks the wrong side on
    /// strict pairs, and on ties (abstention mode) picks a random side
    /// instead of abstaining. Forced ties are a fair coin.
    NoisyOracle { epsilon: f64 },
    /// Correct on strict pairs; on ties with exactly one candidate from
    /// `group`, selects that candidate with probability `bias_prob`, else the
    /// other. Other ties are a fair coin. Never abstains.
    GroupBiased { group: DemographicGroup, bias_prob: f64 },
    /// Abstains with probability `p` when allowed, otherwise a fair coin.
    /// At p = 1/3 this is the uniform random judge over all three answers.
    AbstainProne { p: f64 },
}

impl ComparatorKind {
    pub fn is_remote(&self) -> bool {
        matches!(self, ComparatorKind::RemoteEndpoint { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorSpec {
    pub comparator_id: String,
    pub kind: ComparatorKind,
    pub seed: u64,
}

impl ComparatorSpec {
    pub fn validate(&self) -> Result<(), JudgeError> {
        let bad = |what: &str| {
            Err(JudgeError::Config(format!(
                "comparator {}: {what}",
                if self.comparator_id.is_empty() { "<unnamed>" } else { &self.comparator_id }
            )))
        };
        if self.comparator_id.trim().is_empty() {
            return bad("comparator_id must be non-empty");
        }
        let in_unit = |p: f64| (0.0..=1.0).contains(&p);
        match &self.kind {
            ComparatorKind::RemoteEndpoint { label, url, model, credential_env, .. } => {
                if label.is_empty()
                    || url.is_empty()
                    || model.is_empty()
                    || credential_env.is_empty()
                {
                    return bad("remote endpoints need label, url, model, and credential_env");
                }
            }
            ComparatorKind::NoisyOracle { epsilon } if !in_unit(*epsilon) => {
                return bad("epsilon must lie in [0, 1]");
            }
            ComparatorKind::GroupBiased { bias_prob, .. } if !in_unit(*bias_prob) => {
                return bad("bias_prob must lie in [0, 1]");
            }
            ComparatorKind::AbstainProne { p } if !in_unit(*p) => {
                return bad("p must lie in [0, 1]");
            }
            _ => {}
        }
        Ok(())
    }
}

static ANSWER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<answer>\s*(.*?)\s*</answer>").expect("static regex"));

/// Extracts the verdict from a raw response. The last well-formed
/// <answer>...</answer> span wins (responders sometimes draft, then settle).
/// Tokens match case-insensitively, with or without the quotes the prompt
/// uses when listing them.
pub fn parse_verdict(raw: &str, abstain_allowed: bool) -> Decision {
    let Some(caps) = ANSWER_RE.captures_iter(raw).last() else {
        return Decision::ParseFailure(ParseFailureKind::NoTag);
    };
    let mut token = caps[1].trim();
    for (open, close) in [("\"", "\""), ("'", "'"), ("\u{201c}", "\u{201d}")] {
        if token.len() > open.len() + close.len() {
            if let Some(inner) = token.strip_prefix(open).and_then(|t| t.strip_suffix(close)) {
                token = inner.trim();
                break;
            }
        }
    }
    match token.to_ascii_lowercase().as_str() {
        "first" => Decision::Verdict(Verdict::First),
        "second" => Decision::Verdict(Verdict::Second),
        "abstain" if abstain_allowed => Decision::Verdict(Verdict::Abstain),
        "abstain" => Decision::ParseFailure(ParseFailureKind::IllegalAbstain),
        _ => Decision::ParseFailure(ParseFailureKind::BadToken),
    }
}

fn coin(rng: &mut ChaCha8Rng) -> Verdict {
    if rng.random_bool(0.5) {
        Verdict::First
    } else {
        Verdict::Second
    }
}

/// The verdict a synthetic comparator gives a pair. Pure in
/// (spec.seed, pair_id): the mode can steer which branch is taken, but every
/// random draw comes from the same replayable stream.
fn synthetic_verdict(spec: &ComparatorSpec, pair: &PairCase, abstain_allowed: bool) -> Verdict {
    let rng = &mut seeds::rng_for(spec.seed, &["judge", &pair.pair_id.0]);
    let truth = pair.truth;
    let oracle_on_tie = |rng: &mut ChaCha8Rng| {
        if abstain_allowed {
            Verdict::Abstain
        } else {
            coin(rng)
        }
    };
    match &spec.kind {
        ComparatorKind::RemoteEndpoint { .. } => {
            unreachable!("remote endpoints are not synthetic")
        }
        ComparatorKind::Oracle => match truth {
            GroundTruthLabel::StrictLeft => Verdict::First,
            GroundTruthLabel::StrictRight => Verdict::Second,
            GroundTruthLabel::Tie => oracle_on_tie(rng),
        },
        ComparatorKind::AntiOracle => match truth {
            GroundTruthLabel::StrictLeft => Verdict::Second,
            GroundTruthLabel::StrictRight => Verdict::First,
            GroundTruthLabel::Tie => oracle_on_tie(rng),
        },
        ComparatorKind::CoinFlip => coin(rng),
        ComparatorKind::AlwaysAbstain => Verdict::Abstain,
        ComparatorKind::NoisyOracle { epsilon } => {
            let err = rng.random_bool(*epsilon);
            match truth {
                GroundTruthLabel::StrictLeft => {
                    if err {
                        Verdict::Second
                    } else {
                        Verdict::First
                    }
                }
                GroundTruthLabel::StrictRight => {
                    if err {
                        Verdict::First
                    } else {
                        Verdict::Second
                    }
                }
                GroundTruthLabel::Tie => {
                    if abstain_allowed && !err {
                        Verdict::Abstain
                    } else {
                        coin(rng)
                    }
                }
            }
        }
        ComparatorKind::GroupBiased { group, bias_prob } => match truth {
            GroundTruthLabel::StrictLeft => Verdict::First,
            GroundTruthLabel::StrictRight => Verdict::Second,
            GroundTruthLabel::Tie => {
                let left_in = pair.left.signal.group == Some(*group);
                let right_in = pair.right.signal.group == Some(*group);
                match (left_in, right_in) {
                    (true, false) => {
                        if rng.random_bool(*bias_prob) {
                            Verdict::First
                        } else {
                            Verdict::Second
                        }
                    }
                    (false, true) => {
                        if rng.random_bool(*bias_prob) {
                            Verdict::Second
                        } else {
                            Verdict::First
                        }
                    }
                    _ => coin(rng),
                }
            }
        },
        ComparatorKind::AbstainProne { p } => {
            let prone = rng.random_bool(*p);
            if abstain_allowed && prone {
                Verdict::Abstain
            } else {
                coin(rng)
            }
        }
    }
}

fn synthetic_record(
    spec: &ComparatorSpec,
    pair: &PairCase,
    variant: PromptVariant,
    abstain_allowed: bool,
    repeat: u32,
) -> DecisionRecord {
    let verdict = synthetic_verdict(spec, pair, abstain_allowed);
    let raw_response = format!("<answer>{}</answer>", verdict.as_token());
    // Round-tripping through the parser keeps the decision column honest:
    // always_abstain under forced choice really is an IllegalAbstain.
    let decision = parse_verdict(&raw_response, abstain_allowed);
    DecisionRecord {
        pair_id: pair.pair_id.clone(),
        comparator_id: spec.comparator_id.clone(),
        variant,
        abstain_allowed,
        repeat,
        raw_response,
        decision,
        attempt_count: 1,
        latency_ms: 0,
    }
}

fn remote_record(
    client: &ChatClient,
    spec: &ComparatorSpec,
    pair: &PairCase,
    prompt: &PromptBundle,
    repeat: u32,
    max_attempts: u32,
) -> DecisionRecord {
    let started = Instant::now();
    let (outcome, attempt_count) =
        client.complete_with_retries(&prompt.system_text, &prompt.user_text, max_attempts);
    let latency_ms = started.elapsed().as_millis() as u64;
    let (raw_response, decision) = match outcome {
        Ok(text) => {
            let decision = parse_verdict(&text, prompt.abstain_allowed);
            (text, decision)
        }
        Err(err) => (
            format!("transport failure after {attempt_count} attempt(s): {err}"),
            Decision::ParseFailure(ParseFailureKind::Transport),
        ),
    };
    DecisionRecord {
        pair_id: pair.pair_id.clone(),
        comparator_id: spec.comparator_id.clone(),
        variant: prompt.variant,
        abstain_allowed: prompt.abstain_allowed,
        repeat,
        raw_response,
        decision,
        attempt_count,
        latency_ms,
    }
}

fn client_for(kind: &ComparatorKind) -> ChatClient {
    match kind {
        ComparatorKind::RemoteEndpoint { url, model, credential_env, params, .. } => {
            ChatClient::new(url.clone(), model.clone(), credential_env.clone())
                .with_params(params.clone())
        }
        _ => unreachable!("only remote endpoints get a client"),
    }
}

/// Evaluates one cell. Synthetic comparators ignore the prompt text (they
/// read the pair directly); remote endpoints send it with three attempts.
pub fn compare(spec: &ComparatorSpec, pair: &PairCase, prompt: &PromptBundle) -> DecisionRecord {
    if spec.kind.is_remote() {
        remote_record(&client_for(&spec.kind), spec, pair, prompt, 0, 3)
    } else {
        synthetic_record(spec, pair, prompt.variant, prompt.abstain_allowed, 0)
    }
}

/// Grid selection and execution knobs for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    pub variants: Vec<PromptVariant>,
    /// Modes to run; `true` allows abstention, `false` forces a choice.
    pub abstain_modes: Vec<bool>,
    pub repeats: u32,
    /// In-flight bound for remote calls; synthetic cells ignore it.
    pub concurrency: usize,
    pub max_attempts: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            variants: vec![PromptVariant::Baseline],
            abstain_modes: vec![true, false],
            repeats: 1,
            concurrency: 4,
            max_attempts: 3,
        }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Result<(), JudgeError> {
        let bad = |msg: &str| Err(JudgeError::Config(msg.to_string()));
        if self.variants.is_empty() {
            return bad("at least one prompt variant is required");
        }
        if BTreeSet::from_iter(&self.variants).len() != self.variants.len() {
            return bad("prompt variants must be distinct");
        }
        if self.abstain_modes.is_empty() {
            return bad("at least one mode is required");
        }
        if BTreeSet::from_iter(&self.abstain_modes).len() != self.abstain_modes.len() {
            return bad("modes must be distinct");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1");
        }
        Ok(())
    }
}

/// What a run directory holds, written to `run.json` before any record.
/// Resuming requires the stored plan to match the requested one exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub schema_version: String,
    pub suite_id: String,
    pub comparators: Vec<ComparatorSpec>,
    pub options: RunOptions,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub plan: RunPlan,
    pub records: Vec<DecisionRecord>,
}

pub const RUN_PLAN_FILE: &str = "run.json";
pub const RECORDS_FILE: &str = "records.jsonl";

type CellKey = (PairId, String, PromptVariant, bool, u32);

fn record_key(r: &DecisionRecord) -> CellKey {
    (r.pair_id.clone(), r.comparator_id.clone(), r.variant, r.abstain_allowed, r.repeat)
}

fn io_err(path: &Path, source: std::io::Error) -> JudgeError {
    JudgeError::Io { path: path.display().to_string(), source }
}

/// Reads a record log, tolerating one torn trailing line (the footprint of
/// an interrupted append). Returns the records plus the byte length of the
/// clean prefix; a malformed line anywhere else is a hard error.
fn read_records(path: &Path) -> Result<(Vec<DecisionRecord>, u64), JudgeError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut records = Vec::new();
    let mut clean_len = 0u64;
    let mut offset = 0usize;
    for chunk in text.split_inclusive('\n') {
        let line = chunk.strip_suffix('\n').unwrap_or(chunk);
        let torn_tail = offset + chunk.len() == text.len() && !chunk.ends_with('\n');
        if !line.trim().is_empty() {
            match serde_json::from_str::<DecisionRecord>(line) {
                Ok(record) => records.push(record),
                Err(_) if torn_tail => break,
                Err(e) => {
                    return Err(JudgeError::Parse {
                        path: path.display().to_string(),
                        detail: format!("record line starting at byte {offset}: {e}"),
                    });
                }
            }
        }
        offset += chunk.len();
        clean_len = offset as u64;
    }
    Ok((records, clean_len))
}

struct PendingCell<'a> {
    pair: &'a PairCase,
    spec: &'a ComparatorSpec,
    variant: PromptVariant,
    abstain_allowed: bool,
    repeat: u32,
    /// Present exactly when the comparator is remote.
    prompt: Option<Arc<PromptBundle>>,
}

fn evaluate_cell(
    cell: &PendingCell<'_>,
    clients: &BTreeMap<String, ChatClient>,
    max_attempts: u32,
) -> DecisionRecord {
    match &cell.prompt {
        Some(prompt) => {
            let client = clients.get(&cell.spec.comparator_id).expect("client prebuilt");
            remote_record(client, cell.spec, cell.pair, prompt, cell.repeat, max_attempts)
        }
        None => {
            synthetic_record(cell.spec, cell.pair, cell.variant, cell.abstain_allowed, cell.repeat)
        }
    }
}

fn flush_cells(
    buffer: &mut Vec<PendingCell<'_>>,
    clients: &BTreeMap<String, ChatClient>,
    max_attempts: u32,
    sink: &mut impl std::io::Write,
    out: &mut Vec<DecisionRecord>,
    records_path: &Path,
) -> Result<(), JudgeError> {
    if buffer.is_empty() {
        return Ok(());
    }
    let remote_cells = buffer.iter().filter(|c| c.prompt.is_some()).count();
    let evaluated: Vec<DecisionRecord> = if remote_cells > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = buffer
                .iter()
                .map(|cell| scope.spawn(move || evaluate_cell(cell, clients, max_attempts)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("cell evaluation panicked")).collect()
        })
    } else {
        buffer.iter().map(|cell| evaluate_cell(cell, clients, max_attempts)).collect()
    };
    for record in evaluated {
        let line = serde_json::to_string(&record).expect("record serializes");
        sink.write_all(line.as_bytes()).map_err(|e| io_err(records_path, e))?;
        sink.write_all(b"\n").map_err(|e| io_err(records_path, e))?;
        out.push(record);
    }
    sink.flush().map_err(|e| io_err(records_path, e))?;
    buffer.clear();
    Ok(())
}

/// Runs the requested grid over a suite, appending one record per
/// (pair, comparator, variant, mode, repeat) cell to `dir/records.jsonl`.
/// Cells already present are skipped, so an interrupted run resumes to the
/// same final log. Cell order is canonical: suite pair order, then variant,
/// mode, comparator, repeat.
pub fn run_suite(
    suite: &Suite,
    comparators: &[ComparatorSpec],
    options: &RunOptions,
    dir: &Path,
) -> Result<RunLog, JudgeError> {
    options.validate()?;
    if comparators.is_empty() {
        return Err(JudgeError::Config("at least one comparator is required".into()));
    }
    let mut seen_ids = BTreeSet::new();
    for spec in comparators {
        spec.validate()?;
        if !seen_ids.insert(&spec.comparator_id) {
            return Err(JudgeError::Config(format!(
                "duplicate comparator_id {}",
                spec.comparator_id
            )));
        }
    }

    let plan = RunPlan {
        schema_version: SCHEMA_VERSION.to_string(),
        suite_id: suite.manifest.suite_id.clone(),
        comparators: comparators.to_vec(),
        options: options.clone(),
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let plan_path = dir.join(RUN_PLAN_FILE);
    if plan_path.exists() {
        let existing = load_plan(&plan_path)?;
        if existing != plan {
            let detail = if existing.suite_id != plan.suite_id {
                format!("it was started from suite {}", existing.suite_id)
            } else {
                "its comparators or options differ".to_string()
            };
            return Err(JudgeError::PlanMismatch { path: plan_path.display().to_string(), detail });
        }
    } else {
        let mut body = serde_json::to_string_pretty(&plan).expect("plan serializes");
        body.push('\n');
        std::fs::write(&plan_path, body).map_err(|e| io_err(&plan_path, e))?;
    }

    let records_path = dir.join(RECORDS_FILE);
    let mut records = Vec::new();
    let mut completed: BTreeSet<CellKey> = BTreeSet::new();
    if records_path.exists() {
        let (existing, clean_len) = read_records(&records_path)?;
        let known: BTreeSet<&PairId> = suite.pairs.iter().map(|p| &p.pair_id).collect();
        for record in &existing {
            if !known.contains(&record.pair_id) {
                return Err(JudgeError::Parse {
                    path: records_path.display().to_string(),
                    detail: format!("record references pair {} not in this suite", record.pair_id),
                });
            }
            completed.insert(record_key(record));
        }
        let file_len =
            std::fs::metadata(&records_path).map_err(|e| io_err(&records_path, e))?.len();
        if clean_len < file_len {
            // Drop the torn tail so the append below starts on a line boundary.
            let file = std::fs::OpenOptions::new()
                .write(true)
                .open(&records_path)
                .map_err(|e| io_err(&records_path, e))?;
            file.set_len(clean_len).map_err(|e| io_err(&records_path, e))?;
        }
        records = existing;
    }

    let clients: BTreeMap<String, ChatClient> = comparators
        .iter()
        .filter(|s| s.kind.is_remote())
        .map(|s| (s.comparator_id.clone(), client_for(&s.kind)))
        .collect();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&records_path)
        .map_err(|e| io_err(&records_path, e))?;
    let mut sink = std::io::BufWriter::new(file);

    let mut buffer: Vec<PendingCell<'_>> = Vec::new();
    for pair in &suite.pairs {
        let job = suite.job(&pair.job_id).ok_or_else(|| JudgeError::MissingJob {
            pair_id: pair.pair_id.0.clone(),
            job_id: pair.job_id.0.clone(),
        })?;
        for &variant in &options.variants {
            for &abstain_allowed in &options.abstain_modes {
                let mut prompt: Option<Arc<PromptBundle>> = None;
                for spec in comparators {
                    for repeat in 0..options.repeats {
                        let key = (
                            pair.pair_id.clone(),
                            spec.comparator_id.clone(),
                            variant,
                            abstain_allowed,
                            repeat,
                        );
                        if completed.contains(&key) {
                            continue;
                        }
                        let cell_prompt = if spec.kind.is_remote() {
                            if prompt.is_none() {
                                prompt = Some(Arc::new(assemble_prompt(
                                    pair,
                                    job,
                                    variant,
                                    abstain_allowed,
                                )?));
                            }
                            prompt.clone()
                        } else {
                            None
                        };
                        buffer.push(PendingCell {
                            pair,
                            spec,
                            variant,
                            abstain_allowed,
                            repeat,
                            prompt: cell_prompt,
                        });
                        if buffer.len() >= options.concurrency.max(1) {
                            flush_cells(
                                &mut buffer,
                                &clients,
                                options.max_attempts,
                                &mut sink,
                                &mut records,
                                &records_path,
                            )?;
                        }
                    }
                }
            }
        }
    }
    flush_cells(
        &mut buffer,
        &clients,
        options.max_attempts,
        &mut sink,
        &mut records,
        &records_path,
    )?;

    Ok(RunLog { plan, records })
}

fn load_plan(path: &Path) -> Result<RunPlan, JudgeError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let plan: RunPlan = serde_json::from_str(&text).map_err(|e| JudgeError::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    if plan.schema_version != SCHEMA_VERSION {
        return Err(JudgeError::Schema {
            path: path.display().to_string(),
            found: plan.schema_version,
            expected: SCHEMA_VERSION.to_string(),
        });
    }
    Ok(plan)
}

impl RunLog {
    /// Loads a run directory for scoring. A torn trailing record line is
    /// ignored (interrupted runs are a normal terminal state); the file is
    /// left untouched.
    pub fn load(dir: &Path) -> Result<RunLog, JudgeError> {
        let plan_path = dir.join(RUN_PLAN_FILE);
        if !plan_path.exists() {
            return Err(JudgeError::MissingArtifact {
                path: plan_path.display().to_string(),
                produced_by: "screenaudit evaluate".to_string(),
            });
        }
        let plan = load_plan(&plan_path)?;
        let records_path = dir.join(RECORDS_FILE);
        if !records_path.exists() {
            return Err(JudgeError::MissingArtifact {
                path: records_path.display().to_string(),
                produced_by: "screenaudit evaluate".to_string(),
            });
        }
        let (records, _) = read_records(&records_path)?;
        Ok(RunLog { plan, records })
    }
}
