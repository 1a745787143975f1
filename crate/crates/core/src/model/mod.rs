//! Core data model: jobs, qualifications, resumes, pair cases, and the
//! partial order that defines ground truth.
//!
//! A resume's `relevant_attrs` is the set of job qualification ids it
//! satisfies. Candidate `a` is strictly preferable to candidate `b` for a job
//! exactly when `a`'s job-relevant attributes form a proper superset of
//! `b`'s; equal sets are ties; overlapping-but-incomparable sets never enter
//! a suite. Everything downstream (generation, judging, metrics) relies on
//! these definitions, so they live here with no knowledge of rendering or
//! transport concerns.

mod skill;

pub use skill::{
    SkillKindLexicon, DEFAULT_EDUCATION_KEYWORDS, DEFAULT_HARD_KEYWORDS, DEFAULT_SOFT_KEYWORDS,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::seeds;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid job spec `{job_id}`: {reason}")]
    InvalidJobSpec { job_id: String, reason: String },
    #[error("invalid resume `{resume_id}`: {reason}")]
    InvalidResume { resume_id: String, reason: String },
    #[error("invalid pair `{pair_id}`: {reason}")]
    InvalidPair { pair_id: String, reason: String },
    #[error("resume `{resume_id}` belongs to job `{actual}`, expected `{expected}`")]
    MismatchedJob { resume_id: String, expected: String, actual: String },
    #[error("invalid demographic signal: {0}")]
    InvalidSignal(String),
}

macro_rules! string_id {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(v: &str) -> Self {
                Self(v.to_string())
            }
        }
    };
}

string_id!(
    /// Caller-chosen job identifier, unique within a store.
    JobId
);
string_id!(
    /// Deterministic qualification id, see [`qual_id`].
    QualId
);
string_id!(
    /// Deterministic resume id derived from its generation coordinates.
    ResumeId
);
string_id!(
    /// Deterministic pair id derived from its generation coordinates.
    PairId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Required,
    Preferred,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Required => "required",
            Tier::Preferred => "preferred",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillKind {
    Soft,
    Hard,
    Education,
    Unclassified,
}

impl SkillKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SkillKind::Soft => "soft",
            SkillKind::Hard => "hard",
            SkillKind::Education => "education",
            SkillKind::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for SkillKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stable qualification id: a hash of (job, tier, position) so re-ingesting
/// the same document always yields the same ids.
pub fn qual_id(job: &JobId, tier: Tier, index: usize) -> QualId {
    QualId(seeds::stable_id("q", &["qual", &job.0, tier.as_str(), &index.to_string()]))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qualification {
    pub id: QualId,
    pub text: String,
    pub tier: Tier,
    pub skill_kind: SkillKind,
}

/// A job opening: free-text description plus structured required/preferred
/// qualification sets. Construct via [`JobSpec::new`], which enforces the
/// invariants (at least three required qualifications, unique non-empty
/// texts, disjoint tiers).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "JobSpecRepr", into = "JobSpecRepr")]
pub struct JobSpec {
    job_id: JobId,
    title: String,
    occupation: String,
    description_text: String,
    qualifications: BTreeMap<QualId, Qualification>,
    required: BTreeSet<QualId>,
    preferred: BTreeSet<QualId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JobSpecRepr {
    job_id: JobId,
    title: String,
    occupation: String,
    description_text: String,
    qualifications: Vec<Qualification>,
}

impl TryFrom<JobSpecRepr> for JobSpec {
    type Error = ModelError;

    fn try_from(repr: JobSpecRepr) -> Result<Self, Self::Error> {
        JobSpec::new(
            repr.job_id,
            repr.title,
            repr.occupation,
            repr.description_text,
            repr.qualifications,
        )
    }
}

impl From<JobSpec> for JobSpecRepr {
    fn from(job: JobSpec) -> Self {
        let qualifications = job.ordered_qualifications().into_iter().cloned().collect();
        JobSpecRepr {
            job_id: job.job_id,
            title: job.title,
            occupation: job.occupation,
            description_text: job.description_text,
            qualifications,
        }
    }
}

impl JobSpec {
    pub const MIN_REQUIRED: usize = 3;

    pub fn new(
        job_id: JobId,
        title: String,
        occupation: String,
        description_text: String,
        qualifications: Vec<Qualification>,
    ) -> Result<Self, ModelError> {
        let invalid =
            |reason: String| ModelError::InvalidJobSpec { job_id: job_id.0.clone(), reason };
        if job_id.0.trim().is_empty() {
            return Err(ModelError::InvalidJobSpec {
                job_id: String::new(),
                reason: "job_id must be non-empty".into(),
            });
        }
        if title.trim().is_empty() || description_text.trim().is_empty() {
            return Err(invalid("title and description_text must be non-empty".into()));
        }
        let mut by_id = BTreeMap::new();
        let mut required = BTreeSet::new();
        let mut preferred = BTreeSet::new();
        let mut seen_texts = BTreeSet::new();
        for qual in qualifications {
            if qual.text.trim().is_empty() {
                return Err(invalid(format!("qualification `{}` has empty text", qual.id)));
            }
            if !seen_texts.insert(qual.text.trim().to_lowercase()) {
                return Err(invalid(format!("duplicate qualification text: {:?}", qual.text)));
            }
            match qual.tier {
                Tier::Required => required.insert(qual.id.clone()),
                Tier::Preferred => preferred.insert(qual.id.clone()),
            };
            if by_id.insert(qual.id.clone(), qual).is_some() {
                return Err(invalid("duplicate qualification id".into()));
            }
        }
        if required.len() < Self::MIN_REQUIRED {
            return Err(invalid(format!(
                "needs at least {} required qualifications, found {}",
                Self::MIN_REQUIRED,
                required.len()
            )));
        }
        debug_assert!(required.is_disjoint(&preferred));
        Ok(JobSpec {
            job_id,
            title,
            occupation,
            description_text,
            qualifications: by_id,
            required,
            preferred,
        })
    }

    pub fn job_id(&self) -> &JobId {
        &self.job_id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn occupation(&self) -> &str {
        &self.occupation
    }

    pub fn description_text(&self) -> &str {
        &self.description_text
    }

    pub fn required(&self) -> &BTreeSet<QualId> {
        &self.required
    }

    pub fn preferred(&self) -> &BTreeSet<QualId> {
        &self.preferred
    }

    /// All job-relevant qualification ids (required and preferred).
    pub fn relevant(&self) -> BTreeSet<QualId> {
        self.required.union(&self.preferred).cloned().collect()
    }

    pub fn qualification(&self, id: &QualId) -> Option<&Qualification> {
        self.qualifications.get(id)
    }

    /// Qualifications in a stable presentation order: required first, then
    /// preferred, each tier ordered by qualification id.
    pub fn ordered_qualifications(&self) -> Vec<&Qualification> {
        let mut quals: Vec<&Qualification> = self.qualifications.values().collect();
        quals.sort_by_key(|q| (q.tier, q.id.clone()));
        quals
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemographicGroup {
    BlackMan,
    BlackWoman,
    WhiteMan,
    WhiteWoman,
}

impl DemographicGroup {
    pub const ALL: [DemographicGroup; 4] = [
        DemographicGroup::BlackMan,
        DemographicGroup::BlackWoman,
        DemographicGroup::WhiteMan,
        DemographicGroup::WhiteWoman,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DemographicGroup::BlackMan => "black_man",
            DemographicGroup::BlackWoman => "black_woman",
            DemographicGroup::WhiteMan => "white_man",
            DemographicGroup::WhiteWoman => "white_woman",
        }
    }
}

impl fmt::Display for DemographicGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DemographicGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DemographicGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown demographic group `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalMode {
    Implicit,
    Explicit,
    None,
}

impl fmt::Display for SignalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignalMode::Implicit => "implicit",
            SignalMode::Explicit => "explicit",
            SignalMode::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplicitEntryKind {
    Organization,
    Award,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplicitEntry {
    pub kind: ExplicitEntryKind,
    pub text: String,
}

/// How (and whether) a resume signals demographic group membership.
///
/// `none` means the resume still carries the neutral `{{CANDIDATE_NAME}}`
/// placeholder; `implicit` signals only through a group-typical name;
/// `explicit` additionally lists one organization and one award naming the
/// group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicSignal {
    pub group: Option<DemographicGroup>,
    pub mode: SignalMode,
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explicit_entries: Vec<ExplicitEntry>,
}

/// Placeholder name carried by resumes before a signal is attached.
pub const NEUTRAL_NAME: &str = "{{CANDIDATE_NAME}}";

impl DemographicSignal {
    pub fn neutral() -> Self {
        DemographicSignal {
            group: None,
            mode: SignalMode::None,
            name: NEUTRAL_NAME.to_string(),
            explicit_entries: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |msg: &str| Err(ModelError::InvalidSignal(msg.to_string()));
        if self.name.trim().is_empty() {
            return err("name must be non-empty");
        }
        match self.mode {
            SignalMode::None => {
                if self.group.is_some() || !self.explicit_entries.is_empty() {
                    return err("mode none must carry no group and no explicit entries");
                }
            }
            SignalMode::Implicit => {
                if self.group.is_none() {
                    return err("implicit signal requires a group");
                }
                if !self.explicit_entries.is_empty() {
                    return err("implicit signal must carry no explicit entries");
                }
            }
            SignalMode::Explicit => {
                if self.group.is_none() {
                    return err("explicit signal requires a group");
                }
                let orgs = self
                    .explicit_entries
                    .iter()
                    .filter(|e| e.kind == ExplicitEntryKind::Organization)
                    .count();
                let awards = self
                    .explicit_entries
                    .iter()
                    .filter(|e| e.kind == ExplicitEntryKind::Award)
                    .count();
                if orgs != 1 || awards != 1 {
                    return err(
                        "explicit signal requires exactly one organization and one award entry",
                    );
                }
            }
        }
        Ok(())
    }
}

/// Provenance of a rendered resume text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorTag {
    Deterministic,
    External { endpoint: String },
}

impl fmt::Display for GeneratorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorTag::Deterministic => f.write_str("deterministic"),
            GeneratorTag::External { endpoint } => write!(f, "external:{endpoint}"),
        }
    }
}

static EMAIL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}").expect("static regex")
});
static PHONE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(\+\d{1,3}[-. ]?)?\(?\d{3}\)?[-. ]\d{3}[-. ]\d{4}").expect("static regex")
});
static URL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(https?://|www\.|linkedin\.com|github\.com)").expect("static regex")
});

/// One rendered candidate resume plus the attribute set it was built to
/// satisfy. The attribute set is ground truth by construction; the text is
/// the only thing a judge ever sees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResumeDoc {
    pub resume_id: ResumeId,
    pub job_id: JobId,
    pub rendered_text: String,
    pub relevant_attrs: BTreeSet<QualId>,
    pub signal: DemographicSignal,
    pub generator_tag: GeneratorTag,
    pub render_seed: u64,
}

impl ResumeDoc {
    /// Checks the structural invariants against the owning job: attributes
    /// are job-relevant, the text opens with the signal's name line, and no
    /// contact-information line slipped in.
    pub fn validate(&self, job: &JobSpec) -> Result<(), ModelError> {
        let invalid = |reason: String| ModelError::InvalidResume {
            resume_id: self.resume_id.0.clone(),
            reason,
        };
        if self.job_id != *job.job_id() {
            return Err(ModelError::MismatchedJob {
                resume_id: self.resume_id.0.clone(),
                expected: job.job_id().0.clone(),
                actual: self.job_id.0.clone(),
            });
        }
        self.signal.validate()?;
        let relevant = job.relevant();
        if let Some(stray) = self.relevant_attrs.iter().find(|a| !relevant.contains(*a)) {
            return Err(invalid(format!("attribute `{stray}` is not a qualification of this job")));
        }
        let expected_first = format!("Name: {}", self.signal.name);
        if self.rendered_text.lines().next() != Some(expected_first.as_str()) {
            return Err(invalid(format!("rendered text must begin with {expected_first:?}")));
        }
        for line in self.rendered_text.lines() {
            // Cheap prefilters keep the regexes off the hot path; validation
            // runs on every generated document.
            let maybe_email = line.contains('@');
            let maybe_url = line.contains("://")
                || line.contains("www.")
                || line.contains("linkedin")
                || line.contains("github");
            let maybe_phone = line.bytes().filter(u8::is_ascii_digit).count() >= 7;
            if (maybe_email && EMAIL_RE.is_match(line))
                || (maybe_phone && PHONE_RE.is_match(line))
                || (maybe_url && URL_RE.is_match(line))
            {
                return Err(invalid(format!("contact-information line is not allowed: {line:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruthLabel {
    StrictLeft,
    StrictRight,
    Tie,
}

impl GroundTruthLabel {
    pub fn is_strict(self) -> bool {
        !matches!(self, GroundTruthLabel::Tie)
    }
}

/// Outcome of comparing two resumes under the preference axioms. Incomparable
/// pairs (neither nested nor equal attribute sets) are excluded from suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelOutcome {
    Label(GroundTruthLabel),
    Incomparable,
}

/// Strict preference: `a`'s job-relevant attributes are a proper superset of
/// `b`'s. Indifference is equality of the two intersections; anything else is
/// incomparable. Note the direction of the definition: nesting implies
/// preference, but a judge's preference never implies nesting.
pub fn strictly_preferred(a: &ResumeDoc, b: &ResumeDoc, job: &JobSpec) -> Result<bool, ModelError> {
    for doc in [a, b] {
        if doc.job_id != *job.job_id() {
            return Err(ModelError::MismatchedJob {
                resume_id: doc.resume_id.0.clone(),
                expected: job.job_id().0.clone(),
                actual: doc.job_id.0.clone(),
            });
        }
    }
    let relevant = job.relevant();
    let xa: BTreeSet<&QualId> = a.relevant_attrs.iter().filter(|q| relevant.contains(*q)).collect();
    let xb: BTreeSet<&QualId> = b.relevant_attrs.iter().filter(|q| relevant.contains(*q)).collect();
    Ok(xb.is_subset(&xa) && xa != xb)
}

/// Ground-truth label for the ordered pair (left, right), or `Incomparable`.
pub fn derive_label(
    left: &ResumeDoc,
    right: &ResumeDoc,
    job: &JobSpec,
) -> Result<LabelOutcome, ModelError> {
    let lr = strictly_preferred(left, right, job)?;
    let rl = strictly_preferred(right, left, job)?;
    debug_assert!(!(lr && rl), "strict preference is antisymmetric");
    Ok(match (lr, rl) {
        (true, false) => LabelOutcome::Label(GroundTruthLabel::StrictLeft),
        (false, true) => LabelOutcome::Label(GroundTruthLabel::StrictRight),
        (false, false) => {
            let relevant = job.relevant();
            let xa: BTreeSet<&QualId> =
                left.relevant_attrs.iter().filter(|q| relevant.contains(*q)).collect();
            let xb: BTreeSet<&QualId> =
                right.relevant_attrs.iter().filter(|q| relevant.contains(*q)).collect();
            if xa == xb {
                LabelOutcome::Label(GroundTruthLabel::Tie)
            } else {
                LabelOutcome::Incomparable
            }
        }
        (true, true) => unreachable!("proper supersets cannot be mutual"),
    })
}

/// Which of the four suite categories a pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteTag {
    UnequalSameDemo,
    UnequalCrossDemo,
    EqualImplicit,
    EqualExplicit,
}

impl SuiteTag {
    pub const ALL: [SuiteTag; 4] = [
        SuiteTag::UnequalSameDemo,
        SuiteTag::UnequalCrossDemo,
        SuiteTag::EqualImplicit,
        SuiteTag::EqualExplicit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteTag::UnequalSameDemo => "unequal_same_demo",
            SuiteTag::UnequalCrossDemo => "unequal_cross_demo",
            SuiteTag::EqualImplicit => "equal_implicit",
            SuiteTag::EqualExplicit => "equal_explicit",
        }
    }

    pub fn is_equal(self) -> bool {
        matches!(self, SuiteTag::EqualImplicit | SuiteTag::EqualExplicit)
    }
}

impl fmt::Display for SuiteTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One test case: two rendered resumes for the same job in randomized
/// presentation order, with the ground-truth label and the edit distance `k`
/// (symmetric difference of the attribute sets) recorded at build time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairCase {
    pub pair_id: PairId,
    pub job_id: JobId,
    pub left: ResumeDoc,
    pub right: ResumeDoc,
    pub truth: GroundTruthLabel,
    pub k: usize,
    pub suite_tag: SuiteTag,
    pub order_seed: u64,
}

impl PairCase {
    /// Re-derives the label and edit count from the attribute sets and checks
    /// them against the stored values, along with both resumes' invariants.
    pub fn validate(&self, job: &JobSpec) -> Result<(), ModelError> {
        let invalid =
            |reason: String| ModelError::InvalidPair { pair_id: self.pair_id.0.clone(), reason };
        if self.job_id != *job.job_id() {
            return Err(invalid(format!(
                "pair references job `{}`, validated against `{}`",
                self.job_id,
                job.job_id()
            )));
        }
        self.left.validate(job)?;
        self.right.validate(job)?;
        match derive_label(&self.left, &self.right, job)? {
            LabelOutcome::Label(label) if label == self.truth => {}
            LabelOutcome::Label(label) => {
                return Err(invalid(format!(
                    "stored truth {:?} disagrees with derived label {label:?}",
                    self.truth
                )));
            }
            LabelOutcome::Incomparable => {
                return Err(invalid("attribute sets are incomparable".into()));
            }
        }
        let diff =
            self.left.relevant_attrs.symmetric_difference(&self.right.relevant_attrs).count();
        if diff != self.k {
            return Err(invalid(format!(
                "stored k = {} but attribute sets differ by {diff}",
                self.k
            )));
        }
        if (self.truth == GroundTruthLabel::Tie) != (self.k == 0) {
            return Err(invalid("ties and k = 0 must coincide".into()));
        }
        if self.suite_tag.is_equal() != (self.truth == GroundTruthLabel::Tie) {
            return Err(invalid(format!(
                "suite tag {} does not match truth {:?}",
                self.suite_tag, self.truth
            )));
        }
        Ok(())
    }

    /// The resume on the strictly-preferred side, if any.
    pub fn better_side(&self) -> Option<&ResumeDoc> {
        match self.truth {
            GroundTruthLabel::StrictLeft => Some(&self.left),
            GroundTruthLabel::StrictRight => Some(&self.right),
            GroundTruthLabel::Tie => None,
        }
    }

    pub fn worse_side(&self) -> Option<&ResumeDoc> {
        match self.truth {
            GroundTruthLabel::StrictLeft => Some(&self.right),
            GroundTruthLabel::StrictRight => Some(&self.left),
            GroundTruthLabel::Tie => None,
        }
    }
}
