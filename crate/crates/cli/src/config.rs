//! Audit configuration: one TOML file drives the whole pipeline.
//!
//! The file names the job documents, the generation settings, the
//! comparators under audit, the evaluation grid, and the scoring plan.
//! Loading resolves it into a concrete [`AuditConfig`]: relative paths are
//! anchored at the config file's directory, per-stage seeds are derived as
//! labeled streams under the master seed, and the whole resolved document
//! is hashed. That hash is stamped into scored reports, so any drift
//! between two runs is attributable to a config change, not guesswork.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use screenaudit::gensuite::GenerationConfig;
use screenaudit::judge::{ComparatorKind, ComparatorSpec, RunOptions};
use screenaudit::model::SkillKindLexicon;
use screenaudit::report::{RunStore, ScoringPlan};
use screenaudit::seeds;

use crate::CliError;

/// One comparator as written in the file. The seed is optional: left out,
/// it derives from the master seed and the comparator id, so distinct
/// comparators get independent streams. Pin it only when two entries must
/// share one stream on purpose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorEntry {
    pub comparator_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub kind: ComparatorKind,
}

/// The TOML document as written. [`AuditConfig::load`] turns it into the
/// resolved form the commands consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub master_seed: u64,
    /// Job documents, or directories scanned for `*.json`. Relative to the
    /// config file.
    pub jobs: Vec<String>,
    /// Artifact root. Relative to the config file. Excluded from the config
    /// hash: relocating artifacts does not change the audit.
    pub out_root: String,
    /// The generation seed is derived from `master_seed`; setting it here
    /// is rejected so one knob controls all entropy.
    pub generation: GenerationConfig,
    pub comparators: Vec<ComparatorEntry>,
    pub evaluation: RunOptions,
    pub scoring: ScoringPlan,
    /// Keyword lists for qualification skill-kind tagging at ingest.
    pub lexicon: SkillKindLexicon,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            master_seed: 0,
            jobs: Vec::new(),
            out_root: "audit-out".into(),
            generation: GenerationConfig::default(),
            comparators: Vec::new(),
            evaluation: RunOptions::default(),
            scoring: ScoringPlan::default(),
            lexicon: SkillKindLexicon::default(),
        }
    }
}

/// Command-line overrides applied before resolution. A seed override
/// replaces the master seed, shifting every derived stream and the hash;
/// an out override replaces the artifact root without touching the hash.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Everything covered by the config hash: the audit's semantic content.
/// Output location stays out; job paths enter as written so the hash is
/// machine-independent.
#[derive(Serialize)]
struct HashView<'a> {
    master_seed: u64,
    jobs: &'a [String],
    generation: &'a GenerationConfig,
    comparators: &'a [ComparatorSpec],
    evaluation: &'a RunOptions,
    scoring: &'a ScoringPlan,
    lexicon: &'a SkillKindLexicon,
}

/// Resolved configuration: absolute paths, concrete seeds, stamped hash.
#[derive(Debug, Clone)]
pub struct AuditConfig {
    pub master_seed: u64,
    /// Files, or directories expanded to `*.json` at ingest time.
    pub job_paths: Vec<PathBuf>,
    pub out_root: PathBuf,
    pub generation: GenerationConfig,
    pub comparators: Vec<ComparatorSpec>,
    pub evaluation: RunOptions,
    pub scoring: ScoringPlan,
    pub lexicon: SkillKindLexicon,
    pub config_hash: String,
}

impl AuditConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<AuditConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        let file: ConfigFile = toml::from_str(&text).map_err(|e| CliError::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        AuditConfig::resolve(file, base, overrides)
    }

    /// Resolution without a file on disk; relative paths anchor at `base`.
    pub fn resolve(
        mut file: ConfigFile,
        base: &Path,
        overrides: &Overrides,
    ) -> Result<AuditConfig, CliError> {
        if let Some(seed) = overrides.seed {
            file.master_seed = seed;
        }
        if file.jobs.is_empty() {
            return Err(CliError::Config("config needs at least one entry under `jobs`".into()));
        }
        if file.comparators.is_empty() {
            return Err(CliError::Config("config needs at least one [[comparators]] entry".into()));
        }
        if file.generation.seed != 0 {
            return Err(CliError::Config(
                "[generation] seed is derived from master_seed; remove it".into(),
            ));
        }
        let mut generation = file.generation;
        generation.seed = seeds::derive_seed(file.master_seed, &["generate"]);
        generation.validate()?;

        let mut comparators = Vec::with_capacity(file.comparators.len());
        let mut seen_ids = BTreeSet::new();
        for entry in file.comparators {
            if !seen_ids.insert(entry.comparator_id.clone()) {
                return Err(CliError::Config(format!(
                    "duplicate comparator_id {}",
                    entry.comparator_id
                )));
            }
            let seed = entry.seed.unwrap_or_else(|| {
                seeds::derive_seed(file.master_seed, &["comparator", &entry.comparator_id])
            });
            let spec =
                ComparatorSpec { comparator_id: entry.comparator_id, kind: entry.kind, seed };
            spec.validate()?;
            comparators.push(spec);
        }
        file.evaluation.validate()?;
        file.scoring.validate()?;

        let view = HashView {
            master_seed: file.master_seed,
            jobs: &file.jobs,
            generation: &generation,
            comparators: &comparators,
            evaluation: &file.evaluation,
            scoring: &file.scoring,
            lexicon: &file.lexicon,
        };
        let canonical = serde_json::to_string(&view).expect("config serializes");
        let config_hash = seeds::stable_id("c", &[&canonical]);

        let anchor = |raw: &str| -> PathBuf {
            let p = PathBuf::from(raw);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let out_root = match &overrides.out {
            Some(out) => out.clone(),
            None => anchor(&file.out_root),
        };
        let job_paths = file.jobs.iter().map(|j| anchor(j)).collect();

        Ok(AuditConfig {
            master_seed: file.master_seed,
            job_paths,
            out_root,
            generation,
            comparators,
            evaluation: file.evaluation,
            scoring: file.scoring,
            lexicon: file.lexicon,
            config_hash,
        })
    }

    pub fn store(&self) -> RunStore {
        RunStore::new(self.out_root.clone())
    }
}
