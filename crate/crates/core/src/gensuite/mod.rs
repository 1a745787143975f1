//! Test-suite construction: base resumes, k-edit variants, rewording,
//! demographic signals, and pair assembly with randomized presentation order.
//!
//! Ground truth is never inferred from text. Every pair's label comes from
//! the attribute sets assigned during construction, re-derived through the
//! preference axioms before a pair is admitted.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::ChatClient;
use crate::model::{
    derive_label, DemographicGroup, DemographicSignal, ExplicitEntry, ExplicitEntryKind,
    GroundTruthLabel, JobId, JobSpec, LabelOutcome, ModelError, PairCase, PairId, QualId,
    Qualification, ResumeDoc, ResumeId, SignalMode, SuiteTag,
};
use crate::seeds;
use crate::SCHEMA_VERSION;

pub mod render;

pub use render::{
    draw_name, name_list, DeterministicRenderer, ExternalRenderer, ResumeRenderer, BASE_YEAR,
};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("external renderer {endpoint} failed after {attempts} attempt(s): {diagnostics}")]
    ExternalRender { endpoint: String, attempts: u32, diagnostics: String },
    #[error("degenerate rendering: {0}")]
    Degenerate(String),
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

/// How `trivial_edit_filter` measures textual difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiffMetric {
    /// Absolute difference in character counts. Cheap and order-independent.
    #[default]
    LengthDiff,
    /// Levenshtein distance over characters. Quadratic; opt-in.
    EditDistance,
}

/// Which rendering backend builds resume text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RendererChoice {
    #[default]
    Deterministic,
    External {
        label: String,
        url: String,
        model: String,
        credential_env: String,
    },
}

fn default_k_values() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_min_diff_chars() -> usize {
    120
}

fn default_pair_cap() -> usize {
    160
}

fn default_groups() -> Vec<DemographicGroup> {
    DemographicGroup::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub seed: u64,
    pub k_values: Vec<usize>,
    /// Pairs whose rendered texts differ by less than this are discarded.
    pub min_diff_chars: usize,
    pub diff_metric: DiffMetric,
    pub renderer: RendererChoice,
    /// Cap on unequal pairs per job, split across k values.
    pub pairs_per_job_cap: usize,
    /// Cap on equal pairs per job for each signal mode. Zero disables.
    pub equal_pairs_per_job_cap: usize,
    pub demographic_groups: Vec<DemographicGroup>,
    /// Job title to professional-field overrides for explicit signal
    /// templates; falls back to built-ins, then to the job's occupation.
    pub field_map: BTreeMap<String, String>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            seed: 0,
            k_values: default_k_values(),
            min_diff_chars: default_min_diff_chars(),
            diff_metric: DiffMetric::default(),
            renderer: RendererChoice::default(),
            pairs_per_job_cap: default_pair_cap(),
            equal_pairs_per_job_cap: default_pair_cap(),
            demographic_groups: default_groups(),
            field_map: BTreeMap::new(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.k_values.is_empty() {
            return Err(GenError::Config("k_values must not be empty".into()));
        }
        if self.k_values.contains(&0) {
            return Err(GenError::Config("k_values must all be >= 1".into()));
        }
        let mut seen_k = BTreeSet::new();
        for &k in &self.k_values {
            if !seen_k.insert(k) {
                return Err(GenError::Config(format!("duplicate k value {k}")));
            }
        }
        if self.pairs_per_job_cap == 0 {
            return Err(GenError::Config("pairs_per_job_cap must be >= 1".into()));
        }
        if self.demographic_groups.is_empty() {
            return Err(GenError::Config("demographic_groups must not be empty".into()));
        }
        let mut seen = BTreeSet::new();
        for g in &self.demographic_groups {
            if !seen.insert(*g) {
                return Err(GenError::Config(format!("duplicate demographic group {g:?}")));
            }
        }
        Ok(())
    }
}

/// Levenshtein distance over characters. Quadratic: intended for the opt-in
/// filter metric and tests, not bulk text.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn text_difference(a: &str, b: &str, metric: DiffMetric) -> usize {
    match metric {
        DiffMetric::LengthDiff => {
            let la = a.chars().count();
            let lb = b.chars().count();
            la.abs_diff(lb)
        }
        DiffMetric::EditDistance => levenshtein(a, b),
    }
}

/// Keep a pair iff its rendered texts differ by at least `min_diff_chars`
/// under the default length metric. A threshold of zero keeps everything.
pub fn trivial_edit_filter(a: &ResumeDoc, b: &ResumeDoc, min_diff_chars: usize) -> bool {
    trivial_edit_filter_with(
        &a.rendered_text,
        &b.rendered_text,
        min_diff_chars,
        DiffMetric::LengthDiff,
    )
}

pub fn trivial_edit_filter_with(
    a: &str,
    b: &str,
    min_diff_chars: usize,
    metric: DiffMetric,
) -> bool {
    text_difference(a, b, metric) >= min_diff_chars
}

fn mode_str(mode: SignalMode) -> &'static str {
    match mode {
        SignalMode::Implicit => "implicit",
        SignalMode::Explicit => "explicit",
        SignalMode::None => "none",
    }
}

/// Professional field used in explicit-signal templates for the built-in
/// demo occupations; unknown titles fall back to the job's occupation.
fn builtin_field(title: &str) -> Option<&'static str> {
    match title {
        "Software Engineer" => Some("Computer Science"),
        "Nurse Practitioner" => Some("Nursing"),
        "Wind Turbine Technician" => Some("Wind Energy"),
        _ => None,
    }
}

/// Organization and award line templates per demographic group.
pub fn explicit_entries(group: DemographicGroup, field: &str, title: &str) -> [ExplicitEntry; 2] {
    let (org, award) = match group {
        DemographicGroup::BlackWoman => (
            format!("Chair, Black Women in {field} Initiative"),
            format!("Recipient, National Black Women's Professional Association: {title} Rising Star Award"),
        ),
        DemographicGroup::BlackMan => (
            format!("President, Black Men in {field} Association"),
            format!("Recipient, National Association of Black Professionals: {title} Emerging Leader Award"),
        ),
        DemographicGroup::WhiteWoman => (
            format!("President, Society of European Women in {field}"),
            format!("Recipient, American Society of Women in Industry: {title} Emerging Leader Award"),
        ),
        DemographicGroup::WhiteMan => (
            format!("Chair, European {field} Society"),
            format!("Recipient, European Men's Professional Association: {title} Rising Star Award"),
        ),
    };
    [
        ExplicitEntry { kind: ExplicitEntryKind::Organization, text: org },
        ExplicitEntry { kind: ExplicitEntryKind::Award, text: award },
    ]
}

fn doc_id(
    job: &JobSpec,
    attrs: &BTreeSet<QualId>,
    signal: &DemographicSignal,
    render_seed: u64,
    tag: &str,
) -> ResumeId {
    let attr_join = attrs.iter().map(|a| a.0.as_str()).collect::<Vec<_>>().join(",");
    ResumeId(seeds::stable_id(
        "r",
        &[
            &job.job_id().0,
            &attr_join,
            &signal.name,
            mode_str(signal.mode),
            &render_seed.to_string(),
            tag,
        ],
    ))
}

/// Splices a materialized signal into neutral text: the name line changes,
/// and explicit entries append as a trailing section.
fn apply_signal_text(neutral_text: &str, signal: &DemographicSignal) -> Result<String, GenError> {
    let placeholder_line = format!("Name: {}", crate::model::NEUTRAL_NAME);
    let Some(rest) = neutral_text.strip_prefix(&placeholder_line) else {
        return Err(GenError::Degenerate(
            "cannot attach a signal: text does not start with the neutral name line".into(),
        ));
    };
    let mut text = format!("Name: {}{}", signal.name, rest);
    if !signal.explicit_entries.is_empty() {
        text.push_str("\n\nOrganizations & Awards");
        for entry in &signal.explicit_entries {
            text.push_str("\n- ");
            text.push_str(&entry.text);
        }
    }
    Ok(text)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SuiteManifest {
    pub schema_version: String,
    pub suite_id: String,
    pub config: GenerationConfig,
    pub job_ids: Vec<JobId>,
    pub pair_ids_by_tag: BTreeMap<SuiteTag, Vec<PairId>>,
    /// Human-readable notes about skipped cells and filtered pairs.
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub manifest: SuiteManifest,
    pub jobs: BTreeMap<JobId, JobSpec>,
    pub pairs: Vec<PairCase>,
}

impl Suite {
    pub fn job(&self, id: &JobId) -> Option<&JobSpec> {
        self.jobs.get(id)
    }

    pub fn pair(&self, id: &PairId) -> Option<&PairCase> {
        self.pairs.iter().find(|p| &p.pair_id == id)
    }

    pub fn count_by_tag(&self, tag: SuiteTag) -> usize {
        self.manifest.pair_ids_by_tag.get(&tag).map_or(0, Vec::len)
    }

    pub fn save(&self, dir: &Path) -> Result<(), GenError> {
        let io_err =
            |path: &Path, source| GenError::Io { path: path.display().to_string(), source };
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let manifest_path = dir.join("manifest.json");
        let mut manifest = serde_json::to_string_pretty(&self.manifest).map_err(|e| {
            GenError::Parse { path: manifest_path.display().to_string(), detail: e.to_string() }
        })?;
        manifest.push('\n');
        std::fs::write(&manifest_path, manifest).map_err(|e| io_err(&manifest_path, e))?;

        let jobs_path = dir.join("jobs.jsonl");
        let mut jobs_out = String::new();
        for job in self.jobs.values() {
            jobs_out.push_str(&serde_json::to_string(job).map_err(|e| GenError::Parse {
                path: jobs_path.display().to_string(),
                detail: e.to_string(),
            })?);
            jobs_out.push('\n');
        }
        std::fs::write(&jobs_path, jobs_out).map_err(|e| io_err(&jobs_path, e))?;

        let pairs_path = dir.join("pairs.jsonl");
        let mut pairs_out = String::new();
        for pair in &self.pairs {
            pairs_out.push_str(&serde_json::to_string(pair).map_err(|e| GenError::Parse {
                path: pairs_path.display().to_string(),
                detail: e.to_string(),
            })?);
            pairs_out.push('\n');
        }
        std::fs::write(&pairs_path, pairs_out).map_err(|e| io_err(&pairs_path, e))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Suite, GenError> {
        let read = |name: &str| -> Result<String, GenError> {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| {
                if source.kind() == std::io::ErrorKind::NotFound {
                    GenError::MissingArtifact {
                        path: path.display().to_string(),
                        produced_by: "screenaudit generate".into(),
                    }
                } else {
                    GenError::Io { path: path.display().to_string(), source }
                }
            })
        };
        let manifest_path = dir.join("manifest.json").display().to_string();
        let manifest: SuiteManifest = serde_json::from_str(&read("manifest.json")?)
            .map_err(|e| GenError::Parse { path: manifest_path.clone(), detail: e.to_string() })?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(GenError::Schema {
                path: manifest_path,
                found: manifest.schema_version,
                expected: SCHEMA_VERSION.into(),
            });
        }

        let jobs_path = dir.join("jobs.jsonl").display().to_string();
        let mut jobs = BTreeMap::new();
        for (no, line) in read("jobs.jsonl")?.lines().enumerate() {
            let job: JobSpec = serde_json::from_str(line).map_err(|e| GenError::Parse {
                path: jobs_path.clone(),
                detail: format!("line {}: {e}", no + 1),
            })?;
            jobs.insert(job.job_id().clone(), job);
        }

        let pairs_path = dir.join("pairs.jsonl").display().to_string();
        let mut pairs = Vec::new();
        for (no, line) in read("pairs.jsonl")?.lines().enumerate() {
            let pair: PairCase = serde_json::from_str(line).map_err(|e| GenError::Parse {
                path: pairs_path.clone(),
                detail: format!("line {}: {e}", no + 1),
            })?;
            pairs.push(pair);
        }

        let suite = Suite { manifest, jobs, pairs };
        suite.validate()?;
        Ok(suite)
    }

    /// Re-derives every pair's invariants and cross-checks the manifest.
    pub fn validate(&self) -> Result<(), GenError> {
        let mut by_tag: BTreeMap<SuiteTag, BTreeSet<&PairId>> = BTreeMap::new();
        for pair in &self.pairs {
            let job = self.jobs.get(&pair.job_id).ok_or_else(|| GenError::Parse {
                path: "pairs.jsonl".into(),
                detail: format!("pair {} references unknown job {}", pair.pair_id.0, pair.job_id.0),
            })?;
            pair.validate(job)?;
            by_tag.entry(pair.suite_tag).or_default().insert(&pair.pair_id);
        }
        for (tag, ids) in &self.manifest.pair_ids_by_tag {
            let have = by_tag.get(tag).map_or(0, BTreeSet::len);
            if ids.len() != have {
                return Err(GenError::Parse {
                    path: "manifest.json".into(),
                    detail: format!(
                        "manifest lists {} pairs for {}, pairs file has {have}",
                        ids.len(),
                        tag.as_str()
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Builds suites from job specs. Holds the config and the renderer; all
/// entropy is derived from the config seed, so generation is a pure function
/// of (jobs, config).
pub struct SuiteGenerator {
    cfg: GenerationConfig,
    renderer: Box<dyn ResumeRenderer>,
}

impl SuiteGenerator {
    pub fn new(cfg: GenerationConfig) -> Result<Self, GenError> {
        cfg.validate()?;
        let renderer: Box<dyn ResumeRenderer> = match &cfg.renderer {
            RendererChoice::Deterministic => Box::new(DeterministicRenderer),
            RendererChoice::External { label, url, model, credential_env } => {
                let client = ChatClient::new(url.clone(), model.clone(), credential_env.clone());
                Box::new(ExternalRenderer::new(label.clone(), client))
            }
        };
        Ok(SuiteGenerator { cfg, renderer })
    }

    pub fn with_renderer(
        cfg: GenerationConfig,
        renderer: Box<dyn ResumeRenderer>,
    ) -> Result<Self, GenError> {
        cfg.validate()?;
        Ok(SuiteGenerator { cfg, renderer })
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.cfg
    }

    fn field_for(&self, job: &JobSpec) -> String {
        self.cfg
            .field_map
            .get(job.title())
            .cloned()
            .or_else(|| builtin_field(job.title()).map(str::to_string))
            .unwrap_or_else(|| job.occupation().to_string())
    }

    /// Renders a resume holding exactly the job's required qualifications.
    pub fn render_base_resume(
        &self,
        job: &JobSpec,
        signal: &DemographicSignal,
        seed: u64,
    ) -> Result<ResumeDoc, GenError> {
        signal.validate()?;
        let neutral_text = self.renderer.base_text(job, seed)?;
        let text = if signal.mode == SignalMode::None {
            neutral_text
        } else {
            apply_signal_text(&neutral_text, signal)?
        };
        let doc = ResumeDoc {
            resume_id: doc_id(job, job.required(), signal, seed, "base"),
            job_id: job.job_id().clone(),
            rendered_text: text,
            relevant_attrs: job.required().clone(),
            signal: signal.clone(),
            generator_tag: self.renderer.tag(),
            render_seed: seed,
        };
        doc.validate(job)?;
        Ok(doc)
    }

    fn ensure_neutral(doc: &ResumeDoc, op: &str) -> Result<(), GenError> {
        if doc.signal.mode != SignalMode::None {
            return Err(GenError::Config(format!(
                "{op} expects a neutral base; attach demographic signals afterwards"
            )));
        }
        Ok(())
    }

    /// Removes k required qualifications chosen uniformly without
    /// replacement.
    pub fn make_underqualified(
        &self,
        job: &JobSpec,
        base: &ResumeDoc,
        k: usize,
        rng: &mut impl Rng,
    ) -> Result<ResumeDoc, GenError> {
        Self::ensure_neutral(base, "make_underqualified")?;
        if base.job_id != *job.job_id() {
            return Err(GenError::Model(ModelError::MismatchedJob {
                resume_id: base.resume_id.0.clone(),
                expected: job.job_id().0.clone(),
                actual: base.job_id.0.clone(),
            }));
        }
        let pool: Vec<&QualId> = base.relevant_attrs.intersection(job.required()).collect();
        if k == 0 || k > pool.len() {
            return Err(GenError::Config(format!(
                "cannot remove k={k} required qualifications; base holds {}",
                pool.len()
            )));
        }
        let removed: BTreeSet<QualId> =
            rand::seq::index::sample(rng, pool.len(), k).iter().map(|i| pool[i].clone()).collect();
        let result_attrs: BTreeSet<QualId> =
            base.relevant_attrs.difference(&removed).cloned().collect();
        let removed_quals: Vec<&Qualification> =
            removed.iter().filter_map(|id| job.qualification(id)).collect();
        let text = self.renderer.underqualified_text(job, base, &removed_quals, &result_attrs)?;
        let doc = ResumeDoc {
            resume_id: doc_id(job, &result_attrs, &base.signal, base.render_seed, "under"),
            job_id: base.job_id.clone(),
            rendered_text: text,
            relevant_attrs: result_attrs,
            signal: base.signal.clone(),
            generator_tag: self.renderer.tag(),
            render_seed: base.render_seed,
        };
        doc.validate(job)?;
        Ok(doc)
    }

    /// Adds k preferred qualifications chosen uniformly without replacement.
    pub fn make_overqualified(
        &self,
        job: &JobSpec,
        base: &ResumeDoc,
        k: usize,
        rng: &mut impl Rng,
    ) -> Result<ResumeDoc, GenError> {
        Self::ensure_neutral(base, "make_overqualified")?;
        if base.job_id != *job.job_id() {
            return Err(GenError::Model(ModelError::MismatchedJob {
                resume_id: base.resume_id.0.clone(),
                expected: job.job_id().0.clone(),
                actual: base.job_id.0.clone(),
            }));
        }
        let pool: Vec<&QualId> = job.preferred().difference(&base.relevant_attrs).collect();
        if k == 0 || k > pool.len() {
            return Err(GenError::Config(format!(
                "cannot add k={k} preferred qualifications; {} are available",
                pool.len()
            )));
        }
        let added: BTreeSet<QualId> =
            rand::seq::index::sample(rng, pool.len(), k).iter().map(|i| pool[i].clone()).collect();
        let result_attrs: BTreeSet<QualId> = base.relevant_attrs.union(&added).cloned().collect();
        let added_quals: Vec<&Qualification> =
            added.iter().filter_map(|id| job.qualification(id)).collect();
        let text = self.renderer.overqualified_text(job, base, &added_quals, &result_attrs)?;
        let doc = ResumeDoc {
            resume_id: doc_id(job, &result_attrs, &base.signal, base.render_seed, "over"),
            job_id: base.job_id.clone(),
            rendered_text: text,
            relevant_attrs: result_attrs,
            signal: base.signal.clone(),
            generator_tag: self.renderer.tag(),
            render_seed: base.render_seed,
        };
        doc.validate(job)?;
        Ok(doc)
    }

    /// Rewords a resume without touching its qualification set.
    pub fn reword_resume(
        &self,
        job: &JobSpec,
        base: &ResumeDoc,
        seed: u64,
    ) -> Result<ResumeDoc, GenError> {
        Self::ensure_neutral(base, "reword_resume")?;
        let text = self.renderer.reworded_text(job, base, seed)?;
        if text == base.rendered_text {
            return Err(GenError::Degenerate("reword produced text identical to its base".into()));
        }
        let doc = ResumeDoc {
            resume_id: doc_id(job, &base.relevant_attrs, &base.signal, seed, "reword"),
            job_id: base.job_id.clone(),
            rendered_text: text,
            relevant_attrs: base.relevant_attrs.clone(),
            signal: base.signal.clone(),
            generator_tag: self.renderer.tag(),
            render_seed: seed,
        };
        doc.validate(job)?;
        Ok(doc)
    }

    /// Replaces the neutral name with a group-drawn one; explicit mode also
    /// appends one organization line and one award line.
    pub fn attach_demographic_signal(
        &self,
        job: &JobSpec,
        doc: &ResumeDoc,
        group: DemographicGroup,
        mode: SignalMode,
        rng: &mut impl Rng,
    ) -> Result<ResumeDoc, GenError> {
        Self::ensure_neutral(doc, "attach_demographic_signal")?;
        if mode == SignalMode::None {
            return Err(GenError::Config(
                "attach_demographic_signal requires implicit or explicit mode".into(),
            ));
        }
        let name = draw_name(group, rng).to_string();
        let explicit = if mode == SignalMode::Explicit {
            explicit_entries(group, &self.field_for(job), job.title()).to_vec()
        } else {
            Vec::new()
        };
        let signal =
            DemographicSignal { group: Some(group), mode, name, explicit_entries: explicit };
        signal.validate()?;
        let text = apply_signal_text(&doc.rendered_text, &signal)?;
        let out = ResumeDoc {
            resume_id: doc_id(job, &doc.relevant_attrs, &signal, doc.render_seed, "signal"),
            job_id: doc.job_id.clone(),
            rendered_text: text,
            relevant_attrs: doc.relevant_attrs.clone(),
            signal,
            generator_tag: doc.generator_tag.clone(),
            render_seed: doc.render_seed,
        };
        out.validate(job)?;
        Ok(out)
    }

    /// Attach with a name guaranteed distinct from `other`; needed when both
    /// sides of a pair draw from the same group list.
    fn attach_distinct(
        &self,
        job: &JobSpec,
        doc: &ResumeDoc,
        group: DemographicGroup,
        mode: SignalMode,
        rng: &mut impl Rng,
        other: &str,
    ) -> Result<ResumeDoc, GenError> {
        for _ in 0..64 {
            let out = self.attach_demographic_signal(job, doc, group, mode, rng)?;
            if out.signal.name != other {
                return Ok(out);
            }
        }
        Err(GenError::Config(format!("name list for {group:?} cannot supply two distinct names")))
    }

    fn assemble_pair(
        &self,
        job: &JobSpec,
        pair_id: PairId,
        tag: SuiteTag,
        side_a: ResumeDoc,
        side_b: ResumeDoc,
        a_is_better: Option<bool>,
    ) -> Result<PairCase, GenError> {
        let order_seed = seeds::derive_seed(self.cfg.seed, &["order", &pair_id.0]);
        let mut order_rng = ChaCha8Rng::seed_from_u64(order_seed);
        let a_left = order_rng.random_bool(0.5);
        let k = side_a.relevant_attrs.symmetric_difference(&side_b.relevant_attrs).count();
        let (left, right) = if a_left { (side_a, side_b) } else { (side_b, side_a) };
        let truth = match a_is_better {
            None => GroundTruthLabel::Tie,
            Some(true) if a_left => GroundTruthLabel::StrictLeft,
            Some(true) => GroundTruthLabel::StrictRight,
            Some(false) if a_left => GroundTruthLabel::StrictRight,
            Some(false) => GroundTruthLabel::StrictLeft,
        };
        // Trust nothing: the stored truth must match a fresh derivation.
        match derive_label(&left, &right, job)? {
            LabelOutcome::Label(derived) if derived == truth => {}
            other => {
                return Err(GenError::Degenerate(format!(
                    "constructed pair {} derives {other:?}, expected {truth:?}",
                    pair_id.0
                )))
            }
        }
        let case = PairCase {
            pair_id,
            job_id: job.job_id().clone(),
            left,
            right,
            truth,
            k,
            suite_tag: tag,
            order_seed,
        };
        case.validate(job)?;
        Ok(case)
    }

    /// Builds the four sub-suites for every job. Deterministic for the
    /// deterministic renderer: same jobs and config, same bytes.
    pub fn build_suite(&self, jobs: &[JobSpec]) -> Result<Suite, GenError> {
        if jobs.is_empty() {
            return Err(GenError::Config("build_suite needs at least one job".into()));
        }
        let mut sorted_jobs: Vec<&JobSpec> = jobs.iter().collect();
        sorted_jobs.sort_by(|a, b| a.job_id().0.cmp(&b.job_id().0));
        let mut job_map: BTreeMap<JobId, JobSpec> = BTreeMap::new();
        for job in &sorted_jobs {
            if job_map.insert(job.job_id().clone(), (*job).clone()).is_some() {
                return Err(GenError::Config(format!("duplicate job id {}", job.job_id().0)));
            }
        }

        let groups = &self.cfg.demographic_groups;
        let mut combos: Vec<(DemographicGroup, DemographicGroup)> = Vec::new();
        for &a in groups {
            for &b in groups {
                if a != b {
                    combos.push((a, b));
                }
            }
        }

        let mut pairs: Vec<PairCase> = Vec::new();
        let mut skipped: Vec<String> = Vec::new();

        for job in &sorted_jobs {
            let job_key = &job.job_id().0;
            let base_seed = seeds::derive_seed(self.cfg.seed, &["base", job_key]);
            let base = self.render_base_resume(job, &DemographicSignal::neutral(), base_seed)?;

            self.build_unequal(job, &base, &combos, &mut pairs, &mut skipped)?;
            for mode in [SignalMode::Implicit, SignalMode::Explicit] {
                self.build_equal(job, &base, mode, &combos, &mut pairs, &mut skipped)?;
            }
        }

        let mut pair_ids_by_tag: BTreeMap<SuiteTag, Vec<PairId>> = BTreeMap::new();
        for tag in SuiteTag::ALL {
            pair_ids_by_tag.insert(tag, Vec::new());
        }
        for pair in &pairs {
            pair_ids_by_tag
                .get_mut(&pair.suite_tag)
                .expect("all tags present")
                .push(pair.pair_id.clone());
        }

        let config_json = serde_json::to_string(&self.cfg).map_err(|e| GenError::Parse {
            path: "generation config".into(),
            detail: e.to_string(),
        })?;
        let job_ids: Vec<JobId> = sorted_jobs.iter().map(|j| j.job_id().clone()).collect();
        let pair_digest_input: Vec<String> = pairs.iter().map(|p| p.pair_id.0.clone()).collect();
        let mut id_parts: Vec<&str> = vec![config_json.as_str()];
        id_parts.extend(job_ids.iter().map(|j| j.0.as_str()));
        id_parts.extend(pair_digest_input.iter().map(String::as_str));
        let suite_id = seeds::stable_id("s", &id_parts);

        let manifest = SuiteManifest {
            schema_version: SCHEMA_VERSION.into(),
            suite_id,
            config: self.cfg.clone(),
            job_ids,
            pair_ids_by_tag,
            skipped,
        };
        let suite = Suite { manifest, jobs: job_map, pairs };
        suite.validate()?;
        Ok(suite)
    }

    fn build_unequal(
        &self,
        job: &JobSpec,
        base: &ResumeDoc,
        combos: &[(DemographicGroup, DemographicGroup)],
        pairs: &mut Vec<PairCase>,
        skipped: &mut Vec<String>,
    ) -> Result<(), GenError> {
        let job_key = &job.job_id().0;
        let groups = &self.cfg.demographic_groups;
        let cross_possible = !combos.is_empty();
        if !cross_possible {
            skipped.push(format!(
                "job {job_key}: single demographic group configured; cross-demographic pairs skipped"
            ));
        }

        let usable_ks: Vec<usize> = self
            .cfg
            .k_values
            .iter()
            .copied()
            .filter(|&k| {
                let ok = k <= job.required().len() && k <= job.preferred().len();
                if !ok {
                    skipped.push(format!(
                        "job {job_key}: k={k} exceeds required ({}) or preferred ({}) pool",
                        job.required().len(),
                        job.preferred().len()
                    ));
                }
                ok
            })
            .collect();
        if usable_ks.is_empty() {
            skipped.push(format!("job {job_key}: no usable k values; unequal pairs skipped"));
            return Ok(());
        }

        let per_k = self.cfg.pairs_per_job_cap / usable_ks.len();
        let remainder = self.cfg.pairs_per_job_cap % usable_ks.len();
        let mut pair_counter = 0usize;
        let mut same_cycle = 0usize;
        let mut cross_cycle = 0usize;

        for (ki, &k) in usable_ks.iter().enumerate() {
            let quota = per_k + usize::from(ki < remainder);
            if quota == 0 {
                continue;
            }
            let mut emitted = 0usize;
            let mut triple_idx = 0usize;
            let max_triples = quota * 4;
            while emitted < quota && triple_idx < max_triples {
                let mut triple_rng = seeds::rng_for(
                    self.cfg.seed,
                    &["triple", job_key, &k.to_string(), &triple_idx.to_string()],
                );
                let under = self.make_underqualified(job, base, k, &mut triple_rng)?;
                let over = self.make_overqualified(job, base, k, &mut triple_rng)?;

                let slots: [(&str, &ResumeDoc, &ResumeDoc); 3] = [
                    ("over-base", &over, base),
                    ("base-under", base, &under),
                    ("over-under", &over, &under),
                ];
                for (slot, hi, lo) in slots {
                    if emitted >= quota {
                        break;
                    }
                    let is_cross = cross_possible && pair_counter % 2 == 1;
                    let tag = if is_cross {
                        SuiteTag::UnequalCrossDemo
                    } else {
                        SuiteTag::UnequalSameDemo
                    };
                    let (g_hi, g_lo) = if is_cross {
                        let combo = combos[cross_cycle % combos.len()];
                        cross_cycle += 1;
                        combo
                    } else {
                        let g = groups[same_cycle % groups.len()];
                        same_cycle += 1;
                        (g, g)
                    };
                    pair_counter += 1;

                    let mut signal_rng = seeds::rng_for(
                        self.cfg.seed,
                        &["signal", job_key, &k.to_string(), &triple_idx.to_string(), slot],
                    );
                    let hi_signed = self.attach_demographic_signal(
                        job,
                        hi,
                        g_hi,
                        SignalMode::Implicit,
                        &mut signal_rng,
                    )?;
                    let lo_signed = self.attach_distinct(
                        job,
                        lo,
                        g_lo,
                        SignalMode::Implicit,
                        &mut signal_rng,
                        &hi_signed.signal.name,
                    )?;

                    if !trivial_edit_filter_with(
                        &hi_signed.rendered_text,
                        &lo_signed.rendered_text,
                        self.cfg.min_diff_chars,
                        self.cfg.diff_metric,
                    ) {
                        skipped.push(format!(
                            "job {job_key} k={k} triple {triple_idx} {slot}: texts differ below {} chars; pair dropped",
                            self.cfg.min_diff_chars
                        ));
                        continue;
                    }

                    let pair_id = PairId(seeds::stable_id(
                        "p",
                        &[job_key, tag.as_str(), &k.to_string(), &triple_idx.to_string(), slot],
                    ));
                    let case =
                        self.assemble_pair(job, pair_id, tag, hi_signed, lo_signed, Some(true))?;
                    pairs.push(case);
                    emitted += 1;
                }
                triple_idx += 1;
            }
            if emitted < quota {
                skipped.push(format!(
                    "job {job_key} k={k}: emitted {emitted} of {quota} requested unequal pairs"
                ));
            }
        }
        Ok(())
    }

    fn build_equal(
        &self,
        job: &JobSpec,
        base: &ResumeDoc,
        mode: SignalMode,
        combos: &[(DemographicGroup, DemographicGroup)],
        pairs: &mut Vec<PairCase>,
        skipped: &mut Vec<String>,
    ) -> Result<(), GenError> {
        let tag = match mode {
            SignalMode::Implicit => SuiteTag::EqualImplicit,
            SignalMode::Explicit => SuiteTag::EqualExplicit,
            SignalMode::None => unreachable!("equal suites always carry a signal mode"),
        };
        let job_key = &job.job_id().0;
        let quota = self.cfg.equal_pairs_per_job_cap;
        if quota == 0 {
            return Ok(());
        }
        if combos.is_empty() {
            skipped.push(format!(
                "job {job_key}: {} needs two distinct demographic groups; skipped",
                tag.as_str()
            ));
            return Ok(());
        }
        for idx in 0..quota {
            let (ga, gb) = combos[idx % combos.len()];
            let idx_str = idx.to_string();
            let seed_a = seeds::derive_seed(
                self.cfg.seed,
                &["reword", job_key, tag.as_str(), &idx_str, "a"],
            );
            let mut seed_b = seeds::derive_seed(
                self.cfg.seed,
                &["reword", job_key, tag.as_str(), &idx_str, "b"],
            );
            let side_a = self.reword_resume(job, base, seed_a)?;
            let mut side_b = self.reword_resume(job, base, seed_b)?;
            let mut bump = 0;
            while side_b.rendered_text == side_a.rendered_text {
                bump += 1;
                if bump > 8 {
                    return Err(GenError::Degenerate(format!(
                        "job {job_key} {} pair {idx}: rewords collapse to identical text",
                        tag.as_str()
                    )));
                }
                seed_b = seeds::derive_seed(seed_b, &["reword-retry", &bump.to_string()]);
                side_b = self.reword_resume(job, base, seed_b)?;
            }

            let mut signal_rng =
                seeds::rng_for(self.cfg.seed, &["equal-signal", job_key, tag.as_str(), &idx_str]);
            let a_signed =
                self.attach_demographic_signal(job, &side_a, ga, mode, &mut signal_rng)?;
            let b_signed = self.attach_distinct(
                job,
                &side_b,
                gb,
                mode,
                &mut signal_rng,
                &a_signed.signal.name,
            )?;

            let pair_id = PairId(seeds::stable_id("p", &[job_key, tag.as_str(), &idx_str]));
            let case = self.assemble_pair(job, pair_id, tag, a_signed, b_signed, None)?;
            pairs.push(case);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
