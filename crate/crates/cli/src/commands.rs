//! Stage implementations behind the subcommands.
//!
//! Each command reads the artifacts earlier stages left in the run store,
//! writes only under its own subdirectory, and returns a printable summary
//! struct so the binary and the tests see the same facts. Asking for a
//! stage whose inputs are missing fails with the name of the command that
//! produces them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use screenaudit::gensuite::{Suite, SuiteGenerator};
use screenaudit::judge::{run_suite, RunLog, RUN_PLAN_FILE};
use screenaudit::model::{
    qual_id, JobId, JobSpec, Qualification, SkillKind, SkillKindLexicon, SuiteTag, Tier,
};
use screenaudit::report::{diff_runs, render, render_drift, score, DriftSummary, MetricsReport};

use crate::config::AuditConfig;
use crate::CliError;

/// Validated jobs live here, one JSON object per line, sorted by job id.
pub const JOBS_FILE: &str = "jobs.jsonl";

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), source }
}

/// The ingestion schema: one structured document per job. Qualification ids
/// are assigned by position at load, so re-ingesting the same document
/// always yields the same ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobDocument {
    pub job_id: String,
    pub title: String,
    pub occupation: String,
    pub description_text: String,
    pub required: Vec<String>,
    #[serde(default)]
    pub preferred: Vec<String>,
}

/// Builds a validated [`JobSpec`] from an ingestion document, tagging each
/// qualification's skill kind with the configured keyword lists.
pub fn ingest_document(
    doc: JobDocument,
    lexicon: &SkillKindLexicon,
) -> Result<JobSpec, screenaudit::model::ModelError> {
    let job_id = JobId(doc.job_id);
    let mut quals = Vec::with_capacity(doc.required.len() + doc.preferred.len());
    for (tier, texts) in [(Tier::Required, doc.required), (Tier::Preferred, doc.preferred)] {
        for (index, text) in texts.into_iter().enumerate() {
            quals.push(Qualification {
                id: qual_id(&job_id, tier, index),
                skill_kind: lexicon.classify(&text),
                text,
                tier,
            });
        }
    }
    JobSpec::new(job_id, doc.title, doc.occupation, doc.description_text, quals)
}

#[derive(Debug, Clone)]
pub struct IngestedJob {
    pub job_id: String,
    pub title: String,
    pub required: usize,
    pub preferred: usize,
    pub kind_counts: BTreeMap<SkillKind, usize>,
}

#[derive(Debug)]
pub struct IngestSummary {
    pub accepted: Vec<IngestedJob>,
    /// Input path and reason, one entry per document that failed.
    pub rejected: Vec<(PathBuf, String)>,
    pub jobs_path: PathBuf,
}

impl IngestSummary {
    pub fn ok(&self) -> bool {
        self.rejected.is_empty() && !self.accepted.is_empty()
    }
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for job in &self.accepted {
            let kinds = job
                .kind_counts
                .iter()
                .map(|(kind, n)| format!("{n} {kind}"))
                .collect::<Vec<_>>()
                .join(", ");
            writeln!(
                f,
                "  {}: {} ({} required, {} preferred; {kinds})",
                job.job_id, job.title, job.required, job.preferred
            )?;
        }
        for (path, reason) in &self.rejected {
            writeln!(f, "  rejected {}: {reason}", path.display())?;
        }
        if self.accepted.is_empty() {
            writeln!(f, "no valid job documents; nothing persisted")
        } else {
            writeln!(
                f,
                "ingested {} of {} job documents -> {}",
                self.accepted.len(),
                self.accepted.len() + self.rejected.len(),
                self.jobs_path.display()
            )
        }
    }
}

/// Expands each configured path: files pass through, directories contribute
/// their `*.json` entries in name order.
fn expand_job_paths(paths: &[PathBuf]) -> (Vec<PathBuf>, Vec<(PathBuf, String)>) {
    let mut files = Vec::new();
    let mut rejected = Vec::new();
    for path in paths {
        if path.is_dir() {
            match std::fs::read_dir(path) {
                Ok(entries) => {
                    let mut found: Vec<PathBuf> = entries
                        .filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
                        .collect();
                    found.sort();
                    if found.is_empty() {
                        rejected.push((path.clone(), "directory holds no .json documents".into()));
                    }
                    files.extend(found);
                }
                Err(e) => rejected.push((path.clone(), e.to_string())),
            }
        } else {
            files.push(path.clone());
        }
    }
    (files, rejected)
}

/// Loads, validates, and persists the configured job documents. A malformed
/// document rejects that file with a diagnostic and the run continues; the
/// valid remainder is written whenever there is one.
pub fn cmd_ingest(config: &AuditConfig) -> Result<IngestSummary, CliError> {
    let (files, mut rejected) = expand_job_paths(&config.job_paths);
    let mut jobs: BTreeMap<String, JobSpec> = BTreeMap::new();
    for path in files {
        let text = match std::fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) => {
                rejected.push((path, e.to_string()));
                continue;
            }
        };
        // serde_json diagnostics carry line and column positions.
        let doc: JobDocument = match serde_json::from_str(&text) {
            Ok(doc) => doc,
            Err(e) => {
                rejected.push((path, e.to_string()));
                continue;
            }
        };
        if jobs.contains_key(&doc.job_id) {
            rejected.push((path, format!("duplicate job_id {}", doc.job_id)));
            continue;
        }
        match ingest_document(doc, &config.lexicon) {
            Ok(job) => {
                jobs.insert(job.job_id().0.clone(), job);
            }
            Err(e) => rejected.push((path, e.to_string())),
        }
    }

    let jobs_dir = config.store().jobs_dir();
    let jobs_path = jobs_dir.join(JOBS_FILE);
    if !jobs.is_empty() {
        std::fs::create_dir_all(&jobs_dir).map_err(|e| io_err(&jobs_dir, e))?;
        let mut out = String::new();
        for job in jobs.values() {
            out.push_str(&serde_json::to_string(job).map_err(|e| CliError::Parse {
                path: jobs_path.display().to_string(),
                detail: e.to_string(),
            })?);
            out.push('\n');
        }
        std::fs::write(&jobs_path, out).map_err(|e| io_err(&jobs_path, e))?;
    }

    let accepted = jobs
        .values()
        .map(|job| {
            let mut kind_counts: BTreeMap<SkillKind, usize> = BTreeMap::new();
            for qual in job.ordered_qualifications() {
                *kind_counts.entry(qual.skill_kind).or_insert(0) += 1;
            }
            IngestedJob {
                job_id: job.job_id().0.clone(),
                title: job.title().to_string(),
                required: job.required().len(),
                preferred: job.preferred().len(),
                kind_counts,
            }
        })
        .collect();
    Ok(IngestSummary { accepted, rejected, jobs_path })
}

/// Reads the persisted job store back for generation.
fn load_jobs(config: &AuditConfig) -> Result<Vec<JobSpec>, CliError> {
    let jobs_path = config.store().jobs_dir().join(JOBS_FILE);
    let text = std::fs::read_to_string(&jobs_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingArtifact {
                path: jobs_path.display().to_string(),
                produced_by: "screenaudit ingest".to_string(),
            }
        } else {
            io_err(&jobs_path, e)
        }
    })?;
    let mut jobs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let job: JobSpec = serde_json::from_str(line).map_err(|e| CliError::Parse {
            path: jobs_path.display().to_string(),
            detail: format!("line {}: {e}", lineno + 1),
        })?;
        jobs.push(job);
    }
    if jobs.is_empty() {
        return Err(CliError::Parse {
            path: jobs_path.display().to_string(),
            detail: "job store is empty".into(),
        });
    }
    Ok(jobs)
}

#[derive(Debug)]
pub struct GenerateSummary {
    pub suite_id: String,
    pub pair_count: usize,
    /// Per-job counts in [`SuiteTag::ALL`] order.
    pub by_job: Vec<(String, [usize; 4])>,
    pub totals: [usize; 4],
    pub skipped: Vec<String>,
    pub suite_dir: PathBuf,
}

impl fmt::Display for GenerateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "suite {}: {} pairs across {} jobs -> {}",
            self.suite_id,
            self.pair_count,
            self.by_job.len(),
            self.suite_dir.display()
        )?;
        let id_width = self.by_job.iter().map(|(id, _)| id.len()).chain([6]).max().unwrap_or(6);
        write!(f, "  {:id_width$}", "job")?;
        for tag in SuiteTag::ALL {
            write!(f, "  {:>18}", tag.as_str())?;
        }
        writeln!(f, "  {:>7}", "total")?;
        let mut row = |name: &str, counts: &[usize; 4]| -> fmt::Result {
            write!(f, "  {name:id_width$}")?;
            for count in counts {
                write!(f, "  {count:>18}")?;
            }
            writeln!(f, "  {:>7}", counts.iter().sum::<usize>())
        };
        for (job_id, counts) in &self.by_job {
            row(job_id, counts)?;
        }
        row("total", &self.totals)?;
        for note in &self.skipped {
            writeln!(f, "  note: {note}")?;
        }
        Ok(())
    }
}

/// Builds the pair suite from the ingested jobs and persists it.
pub fn cmd_generate(config: &AuditConfig) -> Result<GenerateSummary, CliError> {
    let jobs = load_jobs(config)?;
    let generator = SuiteGenerator::new(config.generation.clone())?;
    let suite = generator.build_suite(&jobs)?;
    let suite_dir = config.store().suite_dir();
    suite.save(&suite_dir)?;

    let tag_index =
        |tag: SuiteTag| SuiteTag::ALL.iter().position(|t| *t == tag).expect("known tag");
    let mut by_job: BTreeMap<String, [usize; 4]> = BTreeMap::new();
    let mut totals = [0usize; 4];
    for pair in &suite.pairs {
        let slot = tag_index(pair.suite_tag);
        by_job.entry(pair.job_id.0.clone()).or_default()[slot] += 1;
        totals[slot] += 1;
    }
    Ok(GenerateSummary {
        suite_id: suite.manifest.suite_id.clone(),
        pair_count: suite.pairs.len(),
        by_job: by_job.into_iter().collect(),
        totals,
        skipped: suite.manifest.skipped.clone(),
        suite_dir,
    })
}

#[derive(Debug)]
pub struct EvaluateSummary {
    pub suite_id: String,
    pub record_count: usize,
    /// Records already present before this invocation; resumed runs skip them.
    pub resumed: usize,
    pub comparators: usize,
    pub run_dir: PathBuf,
}

impl fmt::Display for EvaluateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "run over suite {}: {} records ({} fresh, {} resumed) from {} comparators -> {}",
            self.suite_id,
            self.record_count,
            self.record_count - self.resumed,
            self.resumed,
            self.comparators,
            self.run_dir.display()
        )
    }
}

/// Runs the configured comparator grid over the stored suite, appending to
/// the run log. Interrupted runs resume; finished runs are a no-op.
pub fn cmd_evaluate(config: &AuditConfig) -> Result<EvaluateSummary, CliError> {
    let store = config.store();
    let suite = Suite::load(&store.suite_dir())?;
    let run_dir = store.run_dir();
    let resumed = if run_dir.join(RUN_PLAN_FILE).exists() {
        RunLog::load(&run_dir)?.records.len()
    } else {
        0
    };
    let log = run_suite(&suite, &config.comparators, &config.evaluation, &run_dir)?;
    Ok(EvaluateSummary {
        suite_id: suite.manifest.suite_id.clone(),
        record_count: log.records.len(),
        resumed,
        comparators: config.comparators.len(),
        run_dir,
    })
}

#[derive(Debug)]
pub struct ScoreSummary {
    pub rows: usize,
    pub defined: usize,
    pub flagged: usize,
    pub metrics_path: PathBuf,
}

impl fmt::Display for ScoreSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "scored {} metric rows ({} defined, {} flagged) -> {}",
            self.rows,
            self.defined,
            self.flagged,
            self.metrics_path.display()
        )
    }
}

/// Scores the stored run log against its suite and persists the metrics
/// document every report is rendered from.
pub fn cmd_score(config: &AuditConfig) -> Result<ScoreSummary, CliError> {
    let store = config.store();
    let suite = Suite::load(&store.suite_dir())?;
    let log = RunLog::load(&store.run_dir())?;
    if log.plan.suite_id != suite.manifest.suite_id {
        return Err(CliError::Config(format!(
            "run log was recorded against suite {} but the stored suite is {}; re-run `screenaudit evaluate`",
            log.plan.suite_id, suite.manifest.suite_id
        )));
    }
    let report = score(&suite, &log, &config.scoring, &config.config_hash)?;
    let metrics_path = store.metrics_path();
    report.save(&metrics_path)?;
    let defined = report.rows.iter().filter(|r| r.metric.value.is_some()).count();
    let flagged = report.rows.iter().filter(|r| r.flagged).count();
    Ok(ScoreSummary { rows: report.rows.len(), defined, flagged, metrics_path })
}

#[derive(Debug)]
pub struct ReportSummary {
    pub files: Vec<PathBuf>,
    pub flagged: usize,
    /// Set when the stored metrics were scored under a different config.
    pub stale_hash: Option<String>,
}

impl fmt::Display for ReportSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for file in &self.files {
            writeln!(f, "  wrote {}", file.display())?;
        }
        writeln!(f, "{} flagged metric rows", self.flagged)?;
        if let Some(hash) = &self.stale_hash {
            writeln!(
                f,
                "note: metrics were scored under config {hash}; re-run `screenaudit score` to refresh"
            )?;
        }
        Ok(())
    }
}

/// Renders the CSV tables and the Markdown summary from stored metrics.
pub fn cmd_report(config: &AuditConfig) -> Result<ReportSummary, CliError> {
    let store = config.store();
    let metrics = MetricsReport::load(&store.metrics_path())?;
    let files = render(&metrics, &store.report_dir())?;
    let flagged = metrics.rows.iter().filter(|r| r.flagged).count();
    let stale_hash =
        (metrics.config_hash != config.config_hash).then(|| metrics.config_hash.clone());
    Ok(ReportSummary { files, flagged, stale_hash })
}

#[derive(Debug)]
pub struct DiffOutput {
    pub drift: DriftSummary,
    pub markdown: String,
}

/// Compares two scored run roots, slice by slice.
pub fn cmd_diff(run_a: &Path, run_b: &Path) -> Result<DiffOutput, CliError> {
    let load = |root: &Path| {
        MetricsReport::load(&screenaudit::report::RunStore::new(root.to_path_buf()).metrics_path())
    };
    let a = load(run_a)?;
    let b = load(run_b)?;
    let drift = diff_runs(&a, &b)?;
    let markdown = render_drift(&drift);
    Ok(DiffOutput { drift, markdown })
}

impl fmt::Display for DiffOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.markdown)
    }
}
