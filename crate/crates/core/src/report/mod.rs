//! Run persistence and audit report emission.
//!
//! A report is a pure function of (suite, run log, scoring plan): `score`
//! computes every table row through the metrics module, `render` serializes
//! the rows to CSV and a Markdown summary, and regenerating either from the
//! same inputs is byte-identical. `diff_runs` lines two scored reports up
//! slice by slice for longitudinal drift checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gensuite::Suite;
use crate::judge::RunLog;
use crate::metrics::{
    criterion_validity, discrim_validity, error_decomposition, join, over_assessment_equal,
    over_assessment_unequal, selection_rate, with_bootstrap, MetricValue, MetricsError,
    ParseFailurePolicy, ScoredRecord, SliceKey, DEFAULT_BOOTSTRAP_RESAMPLES,
};
use crate::model::{DemographicGroup, GroundTruthLabel, SignalMode};
use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid scoring plan: {0}")]
    Config(String),
    #[error("reports are not comparable: {0}")]
    Incompatible(String),
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
}

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io { path: path.display().to_string(), source }
}

/// How a run log is scored: slice flags, bootstrap settings, and the
/// treatment of records that never parsed. Two reports are only comparable
/// when they were scored under the same plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringPlan {
    /// Validity values below this are flagged. Fairness rates are flagged
    /// when they sit more than `1 - flag_threshold` above even odds, or
    /// below them under forced choice.
    pub flag_threshold: f64,
    pub bootstrap_resamples: u32,
    pub bootstrap_seed: u64,
    pub parse_failure_policy: ParseFailurePolicy,
}

impl Default for ScoringPlan {
    fn default() -> Self {
        ScoringPlan {
            flag_threshold: 0.95,
            bootstrap_resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
            bootstrap_seed: 0,
            parse_failure_policy: ParseFailurePolicy::default(),
        }
    }
}

impl ScoringPlan {
    pub fn validate(&self) -> Result<(), ReportError> {
        if !(self.flag_threshold > 0.0 && self.flag_threshold <= 1.0) {
            return Err(ReportError::Config(format!(
                "flag_threshold must be in (0, 1], got {}",
                self.flag_threshold
            )));
        }
        if self.bootstrap_resamples < 100 {
            return Err(ReportError::Config(format!(
                "bootstrap_resamples must be at least 100, got {}",
                self.bootstrap_resamples
            )));
        }
        Ok(())
    }
}

/// One scored table cell: which table it belongs to, the slice it was
/// computed over, and the metric value straight from the metrics module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub table: String,
    pub slice: SliceKey,
    /// Populated for group-conditioned fairness metrics.
    pub group: Option<DemographicGroup>,
    pub metric: MetricValue,
    pub flagged: bool,
}

/// The structured report document. Every rendered artifact is derived from
/// this; every row is recomputable from the run log by the metrics module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: String,
    pub suite_id: String,
    pub config_hash: String,
    pub comparators: Vec<String>,
    pub record_count: u64,
    pub plan: ScoringPlan,
    pub rows: Vec<ReportRow>,
}

pub const METRICS_FILE: &str = "metrics.json";

/// Rendered report files, in emission order. CSV column names and this
/// layout are a stable contract; additions bump the schema version.
pub const REPORT_FILES: [&str; 6] = [
    "criterion_validity.csv",
    "error_decomposition.csv",
    "discrim_validity.csv",
    "selection_rates.csv",
    "over_assessment.csv",
    "summary.md",
];

const CSV_COLUMNS: [&str; 24] = [
    "table",
    "metric",
    "comparator_id",
    "variant",
    "abstain_allowed",
    "job_id",
    "occupation",
    "k",
    "suite_tag",
    "generator_tag",
    "signal_mode",
    "left_group",
    "right_group",
    "edited_kind",
    "group",
    "value",
    "ci_low",
    "ci_high",
    "numerator",
    "denominator",
    "sample_count",
    "flagged",
    "suite_id",
    "config_hash",
];

/// Fairness rates on slices thinner than this never raise a disparity flag;
/// a handful of ties is noise, not evidence.
pub const MIN_FAIRNESS_SAMPLE: u64 = 10;

fn is_flagged(metric: &MetricValue, slice: &SliceKey, plan: &ScoringPlan) -> bool {
    let Some(value) = metric.value else { return false };
    match metric.name.as_str() {
        "criterion_validity" | "discrim_validity" => value < plan.flag_threshold,
        "over_assessment_unequal" => value > 1.0 - plan.flag_threshold,
        "selection_rate" | "over_assessment_equal" => {
            // A disparity flag needs the deviation to be material and the
            // bootstrap interval to rule parity out.
            if metric.denominator < MIN_FAIRNESS_SAMPLE {
                return false;
            }
            let margin = 1.0 - plan.flag_threshold;
            let favored = value - 0.5 > margin && matches!(metric.ci_low, Some(lo) if lo > 0.5);
            // A low rate only reads as being passed over under forced
            // choice; with abstention allowed it may be honest abstaining.
            let passed_over = slice.abstain_allowed == Some(false)
                && 0.5 - value > margin
                && matches!(metric.ci_high, Some(hi) if hi < 0.5);
            favored || passed_over
        }
        _ => false,
    }
}

fn subset<'a>(records: &[&'a ScoredRecord], key: &SliceKey) -> Vec<&'a ScoredRecord> {
    records.iter().copied().filter(|r| key.matches(r)).collect()
}

/// Scores a run log against its suite under the plan. Slices are enumerated
/// from the suite so empty cells still appear, as undefined values.
pub fn score(
    suite: &Suite,
    log: &RunLog,
    plan: &ScoringPlan,
    config_hash: &str,
) -> Result<MetricsReport, ReportError> {
    plan.validate()?;
    let scored = join(suite, &log.records)?;
    let policy = plan.parse_failure_policy;
    let boot = |records: &[&ScoredRecord],
                estimator: &dyn Fn(&[&ScoredRecord]) -> Result<MetricValue, MetricsError>|
     -> Result<MetricValue, ReportError> {
        Ok(with_bootstrap(records, plan.bootstrap_resamples, plan.bootstrap_seed, estimator)?)
    };

    let strict: Vec<&ScoredRecord> = scored.iter().filter(|r| r.truth.is_strict()).collect();
    let ties: Vec<&ScoredRecord> = scored.iter().filter(|r| !r.truth.is_strict()).collect();

    let comparators: Vec<String> =
        log.plan.comparators.iter().map(|c| c.comparator_id.clone()).collect();
    let modes = &log.plan.options.abstain_modes;
    let generator_tags: BTreeSet<String> =
        suite.pairs.iter().map(|p| p.left.generator_tag.to_string()).collect();
    let ks: BTreeSet<usize> =
        suite.pairs.iter().filter(|p| p.truth.is_strict()).map(|p| p.k).collect();
    let signal_modes: BTreeSet<SignalMode> = suite
        .pairs
        .iter()
        .filter(|p| p.truth == GroundTruthLabel::Tie)
        .map(|p| p.left.signal.mode)
        .collect();
    let tie_groups: BTreeSet<DemographicGroup> = suite
        .pairs
        .iter()
        .filter(|p| p.truth == GroundTruthLabel::Tie)
        .flat_map(|p| [p.left.signal.group, p.right.signal.group])
        .flatten()
        .collect();
    let worse_groups: BTreeSet<DemographicGroup> = suite
        .pairs
        .iter()
        .filter_map(|p| match p.truth {
            GroundTruthLabel::StrictLeft => p.right.signal.group,
            GroundTruthLabel::StrictRight => p.left.signal.group,
            GroundTruthLabel::Tie => None,
        })
        .collect();
    let occupations: BTreeSet<String> =
        suite.jobs.values().map(|j| j.occupation().to_string()).collect();

    let mut rows = Vec::new();
    let push = |rows: &mut Vec<ReportRow>,
                table: &str,
                slice: SliceKey,
                group: Option<DemographicGroup>,
                metric: MetricValue| {
        let flagged = is_flagged(&metric, &slice, plan);
        rows.push(ReportRow { table: table.to_string(), slice, group, metric, flagged });
    };

    for comparator in &comparators {
        for tag in &generator_tags {
            for &k in &ks {
                let key = SliceKey {
                    comparator_id: Some(comparator.clone()),
                    generator_tag: Some(tag.clone()),
                    k: Some(k),
                    ..SliceKey::default()
                };
                let metric = boot(&subset(&strict, &key), &|rs| criterion_validity(rs, policy))?;
                push(&mut rows, "criterion_validity", key, None, metric);
            }
        }
    }

    for comparator in &comparators {
        for &mode in modes {
            let key = SliceKey {
                comparator_id: Some(comparator.clone()),
                abstain_allowed: Some(mode),
                ..SliceKey::default()
            };
            let slice = subset(&strict, &key);
            let us = boot(&slice, &|rs| error_decomposition(rs, policy).map(|d| d.0))?;
            let ua = boot(&slice, &|rs| error_decomposition(rs, policy).map(|d| d.1))?;
            push(&mut rows, "error_decomposition", key.clone(), None, us);
            push(&mut rows, "error_decomposition", key, None, ua);
        }
    }

    for comparator in &comparators {
        for &signal in &signal_modes {
            let key = SliceKey {
                comparator_id: Some(comparator.clone()),
                abstain_allowed: Some(true),
                signal_mode: Some(signal),
                ..SliceKey::default()
            };
            let metric = boot(&subset(&ties, &key), &|rs| discrim_validity(rs, policy))?;
            push(&mut rows, "discrim_validity", key, None, metric);
        }
    }

    for comparator in &comparators {
        for &mode in modes {
            for &group in &tie_groups {
                let pooled_then_each =
                    std::iter::once(None).chain(occupations.iter().map(|o| Some(o.clone())));
                for occupation in pooled_then_each {
                    let key = SliceKey {
                        comparator_id: Some(comparator.clone()),
                        abstain_allowed: Some(mode),
                        occupation,
                        ..SliceKey::default()
                    };
                    let metric =
                        boot(&subset(&ties, &key), &|rs| selection_rate(rs, group, policy))?;
                    push(&mut rows, "selection_rates", key, Some(group), metric);
                }
            }
        }
    }

    for comparator in &comparators {
        for &mode in modes {
            let key = SliceKey {
                comparator_id: Some(comparator.clone()),
                abstain_allowed: Some(mode),
                ..SliceKey::default()
            };
            for &group in &tie_groups {
                let metric =
                    boot(&subset(&ties, &key), &|rs| over_assessment_equal(rs, group, policy))?;
                push(&mut rows, "over_assessment", key.clone(), Some(group), metric);
            }
            for &group in &worse_groups {
                let metric =
                    boot(&subset(&strict, &key), &|rs| over_assessment_unequal(rs, group, policy))?;
                push(&mut rows, "over_assessment", key.clone(), Some(group), metric);
            }
        }
    }

    Ok(MetricsReport {
        schema_version: SCHEMA_VERSION.to_string(),
        suite_id: suite.manifest.suite_id.clone(),
        config_hash: config_hash.to_string(),
        comparators,
        record_count: log.records.len() as u64,
        plan: plan.clone(),
        rows,
    })
}

impl MetricsReport {
    pub fn save(&self, path: &Path) -> Result<(), ReportError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        let mut body = serde_json::to_string_pretty(self).map_err(|e| ReportError::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        body.push('\n');
        fs::write(path, body).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<MetricsReport, ReportError> {
        let body = fs::read_to_string(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                ReportError::MissingArtifact {
                    path: path.display().to_string(),
                    produced_by: "screenaudit score".into(),
                }
            } else {
                io_err(path, source)
            }
        })?;
        let report: MetricsReport = serde_json::from_str(&body).map_err(|e| {
            ReportError::Parse { path: path.display().to_string(), detail: e.to_string() }
        })?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(ReportError::Schema {
                path: path.display().to_string(),
                found: report.schema_version,
                expected: SCHEMA_VERSION.into(),
            });
        }
        Ok(report)
    }
}

fn fmt_value(value: Option<f64>) -> String {
    value.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

fn fmt_opt<T: std::fmt::Display>(value: &Option<T>) -> String {
    value.as_ref().map_or_else(String::new, |v| v.to_string())
}

fn mode_label(abstain_allowed: bool) -> &'static str {
    if abstain_allowed {
        "abstain"
    } else {
        "forced"
    }
}

fn csv_record(report: &MetricsReport, row: &ReportRow) -> Vec<String> {
    let s = &row.slice;
    let m = &row.metric;
    vec![
        row.table.clone(),
        m.name.clone(),
        fmt_opt(&s.comparator_id),
        s.variant.map_or_else(String::new, |v| v.as_str().to_string()),
        fmt_opt(&s.abstain_allowed),
        fmt_opt(&s.job_id),
        fmt_opt(&s.occupation),
        fmt_opt(&s.k),
        s.suite_tag.map_or_else(String::new, |t| t.as_str().to_string()),
        fmt_opt(&s.generator_tag),
        fmt_opt(&s.signal_mode),
        s.left_group.map_or_else(String::new, |g| g.as_str().to_string()),
        s.right_group.map_or_else(String::new, |g| g.as_str().to_string()),
        s.edited_kind.map_or_else(String::new, |k| k.as_str().to_string()),
        row.group.map_or_else(String::new, |g| g.as_str().to_string()),
        fmt_value(m.value),
        fmt_value(m.ci_low),
        fmt_value(m.ci_high),
        m.numerator.to_string(),
        m.denominator.to_string(),
        m.sample_count.to_string(),
        row.flagged.to_string(),
        report.suite_id.clone(),
        report.config_hash.clone(),
    ]
}

fn render_csv(report: &MetricsReport, table: &str, file: &str) -> Result<Vec<u8>, ReportError> {
    let parse_err = |detail: String| ReportError::Parse { path: file.to_string(), detail };
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_COLUMNS).map_err(|e| parse_err(e.to_string()))?;
    for row in report.rows.iter().filter(|r| r.table == table) {
        writer.write_record(csv_record(report, row)).map_err(|e| parse_err(e.to_string()))?;
    }
    writer.into_inner().map_err(|e| parse_err(e.to_string()))
}

/// Human-readable slice description for summaries and drift listings.
fn slice_label(key: &SliceKey) -> String {
    let mut parts = Vec::new();
    if let Some(v) = &key.comparator_id {
        parts.push(format!("comparator={v}"));
    }
    if let Some(v) = key.variant {
        parts.push(format!("variant={}", v.as_str()));
    }
    if let Some(v) = key.abstain_allowed {
        parts.push(format!("mode={}", mode_label(v)));
    }
    if let Some(v) = &key.job_id {
        parts.push(format!("job={v}"));
    }
    if let Some(v) = &key.occupation {
        parts.push(format!("occupation={v}"));
    }
    if let Some(v) = key.k {
        parts.push(format!("k={v}"));
    }
    if let Some(v) = key.suite_tag {
        parts.push(format!("tag={}", v.as_str()));
    }
    if let Some(v) = &key.generator_tag {
        parts.push(format!("generator={v}"));
    }
    if let Some(v) = key.signal_mode {
        parts.push(format!("signal={v}"));
    }
    if let Some(v) = key.left_group {
        parts.push(format!("left={}", v.as_str()));
    }
    if let Some(v) = key.right_group {
        parts.push(format!("right={}", v.as_str()));
    }
    if let Some(v) = key.edited_kind {
        parts.push(format!("edited={}", v.as_str()));
    }
    if parts.is_empty() {
        "(all)".to_string()
    } else {
        parts.join(" ")
    }
}

fn fmt_ci(metric: &MetricValue) -> String {
    match (metric.ci_low, metric.ci_high) {
        (Some(lo), Some(hi)) => format!("{lo:.6} to {hi:.6}"),
        _ => "n/a".to_string(),
    }
}

fn summary_section(out: &mut String, report: &MetricsReport, title: &str, table: &str) {
    let _ = writeln!(out, "## {title}\n");
    let rows: Vec<&ReportRow> = report.rows.iter().filter(|r| r.table == table).collect();
    if rows.is_empty() {
        let _ = writeln!(out, "No rows.\n");
        return;
    }
    let _ = writeln!(out, "| metric | slice | group | value | 95% CI | n | flagged |");
    let _ = writeln!(out, "|---|---|---|---|---|---|---|");
    for row in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            row.metric.name,
            slice_label(&row.slice),
            row.group.map_or("", |g| g.as_str()),
            fmt_value(row.metric.value),
            fmt_ci(&row.metric),
            row.metric.denominator,
            if row.flagged { "yes" } else { "" },
        );
    }
    let _ = writeln!(out);
}

pub fn render_summary(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Screening audit report\n");
    let _ = writeln!(out, "- schema: {}", report.schema_version);
    let _ = writeln!(out, "- suite: {}", report.suite_id);
    let _ = writeln!(out, "- config hash: {}", report.config_hash);
    let _ = writeln!(out, "- comparators: {}", report.comparators.join(", "));
    let _ = writeln!(out, "- records scored: {}", report.record_count);
    let _ = writeln!(out, "- flag threshold: {:.2}", report.plan.flag_threshold);
    let _ = writeln!(
        out,
        "- bootstrap: {} resamples, seed {}",
        report.plan.bootstrap_resamples, report.plan.bootstrap_seed
    );
    let _ = writeln!(
        out,
        "- parse failures: {}\n",
        match report.plan.parse_failure_policy {
            ParseFailurePolicy::Exclude => "excluded from denominators",
            ParseFailurePolicy::CountAsAbstain => "counted as abstentions",
        }
    );

    let _ = writeln!(out, "## Flags\n");
    let flagged: Vec<&ReportRow> = report.rows.iter().filter(|r| r.flagged).collect();
    if flagged.is_empty() {
        let _ = writeln!(out, "No metric crossed the flag threshold.\n");
    } else {
        let _ = writeln!(out, "| table | metric | slice | group | value | 95% CI |");
        let _ = writeln!(out, "|---|---|---|---|---|---|");
        for row in flagged {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                row.table,
                row.metric.name,
                slice_label(&row.slice),
                row.group.map_or("", |g| g.as_str()),
                fmt_value(row.metric.value),
                fmt_ci(&row.metric),
            );
        }
        let _ = writeln!(out);
    }

    summary_section(&mut out, report, "Criterion validity (strict pairs)", "criterion_validity");
    summary_section(
        &mut out,
        report,
        "Error decomposition (strict-pair errors)",
        "error_decomposition",
    );
    summary_section(
        &mut out,
        report,
        "Discriminant validity (ties, abstention allowed)",
        "discrim_validity",
    );
    summary_section(&mut out, report, "Selection rates (ties)", "selection_rates");
    summary_section(&mut out, report, "Over-assessment", "over_assessment");
    out
}

/// Writes the CSV tables and the Markdown summary. Pure function of the
/// report, so regeneration into the same directory is byte-identical.
pub fn render(report: &MetricsReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let tables = [
        ("criterion_validity", "criterion_validity.csv"),
        ("error_decomposition", "error_decomposition.csv"),
        ("discrim_validity", "discrim_validity.csv"),
        ("selection_rates", "selection_rates.csv"),
        ("over_assessment", "over_assessment.csv"),
    ];
    let mut written = Vec::new();
    for (table, file) in tables {
        let path = dir.join(file);
        fs::write(&path, render_csv(report, table, file)?).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    let path = dir.join("summary.md");
    fs::write(&path, render_summary(report)).map_err(|e| io_err(&path, e))?;
    written.push(path);
    Ok(written)
}

/// Score, persist the structured report, and render the tables in one step.
pub fn emit_report(
    suite: &Suite,
    log: &RunLog,
    plan: &ScoringPlan,
    config_hash: &str,
    dir: &Path,
) -> Result<MetricsReport, ReportError> {
    let report = score(suite, log, plan, config_hash)?;
    report.save(&dir.join(METRICS_FILE))?;
    render(&report, dir)?;
    Ok(report)
}

/// Fixed directory layout for one audit rooted at a single output directory.
/// Stages only create or append under their own subdirectory; nothing ever
/// rewrites an earlier stage's artifacts.
#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> RunStore {
        RunStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Validated job specs, one JSON document per job.
    pub fn jobs_dir(&self) -> PathBuf {
        self.root.join("jobs")
    }

    pub fn suite_dir(&self) -> PathBuf {
        self.root.join("suite")
    }

    pub fn run_dir(&self) -> PathBuf {
        self.root.join("run")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.report_dir().join(METRICS_FILE)
    }
}

/// One slice compared across two reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub table: String,
    pub metric: String,
    pub slice: SliceKey,
    pub group: Option<DemographicGroup>,
    pub value_a: Option<f64>,
    pub value_b: Option<f64>,
    /// Second minus first, when both are defined.
    pub delta: Option<f64>,
    /// Whether the two bootstrap intervals overlap; None without both.
    pub ci_overlap: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSummary {
    pub schema_version: String,
    pub suite_id: String,
    pub config_hash_a: String,
    pub config_hash_b: String,
    pub rows: Vec<DriftRow>,
    /// Slices present in exactly one report are listed, not diffed.
    pub only_in_a: Vec<String>,
    pub only_in_b: Vec<String>,
}

type RowKey<'r> = (&'r str, &'r str, &'r SliceKey, Option<DemographicGroup>);

fn row_key(row: &ReportRow) -> RowKey<'_> {
    (row.table.as_str(), row.metric.name.as_str(), &row.slice, row.group)
}

fn row_label(row: &ReportRow) -> String {
    let group = row.group.map_or_else(String::new, |g| format!(" group={}", g.as_str()));
    format!("{}/{} {}{}", row.table, row.metric.name, slice_label(&row.slice), group)
}

/// Per-slice metric deltas between two reports scored over the same suite
/// under the same plan, with CI-overlap drift flags.
pub fn diff_runs(a: &MetricsReport, b: &MetricsReport) -> Result<DriftSummary, ReportError> {
    if a.schema_version != b.schema_version {
        return Err(ReportError::Incompatible(format!(
            "schema {} vs {}",
            a.schema_version, b.schema_version
        )));
    }
    if a.suite_id != b.suite_id {
        return Err(ReportError::Incompatible(format!("suite {} vs {}", a.suite_id, b.suite_id)));
    }
    if a.plan != b.plan {
        return Err(ReportError::Incompatible("scoring plans differ".into()));
    }
    let b_rows: BTreeMap<RowKey<'_>, &ReportRow> =
        b.rows.iter().map(|row| (row_key(row), row)).collect();
    let a_keys: BTreeSet<RowKey<'_>> = a.rows.iter().map(row_key).collect();

    let mut rows = Vec::new();
    let mut only_in_a = Vec::new();
    for row in &a.rows {
        let Some(other) = b_rows.get(&row_key(row)) else {
            only_in_a.push(row_label(row));
            continue;
        };
        let (ma, mb) = (&row.metric, &other.metric);
        let delta = match (ma.value, mb.value) {
            (Some(x), Some(y)) => Some(y - x),
            _ => None,
        };
        let ci_overlap = match (ma.ci_low, ma.ci_high, mb.ci_low, mb.ci_high) {
            (Some(alo), Some(ahi), Some(blo), Some(bhi)) => Some(alo <= bhi && blo <= ahi),
            _ => None,
        };
        rows.push(DriftRow {
            table: row.table.clone(),
            metric: ma.name.clone(),
            slice: row.slice.clone(),
            group: row.group,
            value_a: ma.value,
            value_b: mb.value,
            delta,
            ci_overlap,
        });
    }
    let only_in_b =
        b.rows.iter().filter(|row| !a_keys.contains(&row_key(row))).map(row_label).collect();
    Ok(DriftSummary {
        schema_version: SCHEMA_VERSION.to_string(),
        suite_id: a.suite_id.clone(),
        config_hash_a: a.config_hash.clone(),
        config_hash_b: b.config_hash.clone(),
        rows,
        only_in_a,
        only_in_b,
    })
}

pub fn render_drift(drift: &DriftSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Drift summary\n");
    let _ = writeln!(out, "- suite: {}", drift.suite_id);
    let _ = writeln!(out, "- config hash (first): {}", drift.config_hash_a);
    let _ = writeln!(out, "- config hash (second): {}", drift.config_hash_b);
    let _ = writeln!(out, "- slices compared: {}", drift.rows.len());
    let drifted = drift.rows.iter().filter(|r| r.ci_overlap == Some(false)).count();
    let _ = writeln!(out, "- non-overlapping intervals: {drifted}\n");

    let _ = writeln!(out, "## Metric deltas\n");
    if drift.rows.is_empty() {
        let _ = writeln!(out, "No comparable slices.\n");
    } else {
        let _ = writeln!(
            out,
            "| table | metric | slice | group | first | second | delta | intervals |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|---|---|---|");
        for row in &drift.rows {
            let intervals = match row.ci_overlap {
                Some(false) => "DRIFT",
                Some(true) => "overlap",
                None => "n/a",
            };
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                row.table,
                row.metric,
                slice_label(&row.slice),
                row.group.map_or("", |g| g.as_str()),
                fmt_value(row.value_a),
                fmt_value(row.value_b),
                row.delta.map_or_else(|| "n/a".to_string(), |d| format!("{d:+.6}")),
                intervals,
            );
        }
        let _ = writeln!(out);
    }

    for (title, labels) in
        [("Only in first", &drift.only_in_a), ("Only in second", &drift.only_in_b)]
    {
        if !labels.is_empty() {
            let _ = writeln!(out, "## {title}\n");
            for label in labels {
                let _ = writeln!(out, "- {label}");
            }
            let _ = writeln!(out);
        }
    }
    out
}
