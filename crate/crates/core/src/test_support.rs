//! Shared fixtures for the crate's unit tests.
//!
//! One realistic job spec (long enough that generated resumes clear the
//! trivial-edit filter) plus fabricated docs and pairs for exercising judges
//! and metrics without paying for full suite generation.

use std::collections::BTreeSet;

use crate::gensuite::{GenerationConfig, Suite, SuiteGenerator};
use crate::model::{
    qual_id, DemographicGroup, DemographicSignal, GeneratorTag, GroundTruthLabel, JobId, JobSpec,
    PairCase, PairId, QualId, Qualification, ResumeDoc, ResumeId, SignalMode, SkillKindLexicon,
    SuiteTag, Tier, NEUTRAL_NAME,
};

pub(crate) fn qual(job: &JobId, tier: Tier, index: usize, text: &str) -> Qualification {
    Qualification {
        id: qual_id(job, tier, index),
        text: text.to_string(),
        tier,
        skill_kind: SkillKindLexicon::default().classify(text),
    }
}

pub(crate) const REQUIRED_TEXTS: [&str; 6] = [
    "Clear, proactive communication with teammates, product partners, and stakeholders, including written summaries that keep long-running projects moving",
    "5+ years of professional experience building and operating backend services in Python or Java across the full release lifecycle",
    "Certified Kubernetes Administrator credential earned through the certification program and kept current with renewal coursework",
    "Hands-on production experience with PostgreSQL schema design, query tuning, and migration planning for high-volume transactional workloads",
    "Fluency with Git-based development workflows, disciplined code review habits, and continuous integration pipelines under version control",
    "Working knowledge of observability tooling, including metrics dashboards, structured logging, and actionable alerting for production services",
];

pub(crate) const PREFERRED_TEXTS: [&str; 4] = [
    "Bachelor of Science in Computer Science or a closely related quantitative field, or equivalent coursework",
    "Practical experience operating Kafka or a similar event streaming platform in production environments at moderate scale",
    "3+ years working with Terraform or comparable infrastructure-as-code tooling to provision and manage cloud environments",
    "Exposure to performance profiling and capacity planning for latency-sensitive services under seasonal traffic patterns",
];

pub(crate) const DESCRIPTION: &str = "\
Designs, builds, and maintains the distributed services that power customer scheduling, invoicing, and billing workflows for enterprise accounts. \
Partners with product managers to turn loosely specified business problems into deliverable technical plans with clear milestones and checkpoints. \
Owns the full lifecycle of assigned services, from architecture sketches and prototypes through deployment, monitoring, and iterative improvement. \
Writes clear design documents, weighs tradeoffs in the open, and participates in constructive, detail-oriented code reviews across the team. \
Investigates production incidents, coordinates blameless postmortems, and lands durable fixes instead of short-lived patches. \
Collaborates with data engineering to keep analytics pipelines accurate, timely, and inexpensive to operate at growing volume. \
Mentors early-career engineers through pairing sessions, careful review feedback, and honest conversations about growth. \
Coordinates cross-team integration work, sequencing risky changes behind feature flags and carefully staged rollouts. \
Tracks and reduces operational toil by automating deployment, failover, and capacity management tasks across environments. \
Contributes to quarterly planning with realistic estimates grounded in measured team throughput and historical delivery data. \
Keeps dependencies current and security patches applied across a fleet of internal services with minimal disruption. \
Helps shape hiring through structured interviews, consistent rubrics, and thoughtful, evidence-based debrief discussions. \
Champions accessibility and performance budgets as first-class engineering requirements rather than afterthoughts. \
Reviews capacity forecasts with finance and infrastructure teams to keep unit costs predictable through seasonal peaks. \
Documents runbooks and on-call procedures so that incident response stays calm, repeatable, and easy to hand off. \
Evaluates build-versus-buy decisions for supporting tooling and presents recommendations with clear cost models. \
Improves local developer experience by trimming build times, flaky tests, and noisy alerts that erode team focus. \
Runs small proofs of concept to de-risk platform migrations before committing the broader team to a direction. \
Represents the team in architecture reviews and keeps decision records current as systems and constraints evolve. \
Audits data retention and access controls with the security team on a recurring cadence to stay ahead of policy changes. \
Prototypes internal command-line tooling that shaves minutes off common release and diagnostic workflows. \
Curates the service catalog so ownership, dependencies, and escalation paths stay accurate as teams reorganize. \
Benchmarks critical request paths after each major release and files regressions with reproducible traces.";

pub(crate) fn gen_job() -> JobSpec {
    let id = JobId::from("swe-gen-fixture");
    let mut quals = Vec::new();
    for (i, text) in REQUIRED_TEXTS.iter().enumerate() {
        quals.push(qual(&id, Tier::Required, i, text));
    }
    for (i, text) in PREFERRED_TEXTS.iter().enumerate() {
        quals.push(qual(&id, Tier::Preferred, i, text));
    }
    JobSpec::new(
        id,
        "Software Engineer".into(),
        "Software Developers".into(),
        DESCRIPTION.into(),
        quals,
    )
    .expect("fixture job is valid")
}

/// A real generated suite over the fixture job, kept small via the caps.
pub(crate) fn small_suite(seed: u64, pair_cap: usize, equal_cap: usize) -> Suite {
    let cfg = GenerationConfig {
        seed,
        k_values: vec![1],
        pairs_per_job_cap: pair_cap,
        equal_pairs_per_job_cap: equal_cap,
        ..GenerationConfig::default()
    };
    let generator = SuiteGenerator::new(cfg).expect("config is valid");
    generator.build_suite(&[gen_job()]).expect("suite builds")
}

/// A structurally plausible resume that skips the renderer entirely. Only
/// for code paths that read ids, groups, and truth, never the text.
pub(crate) fn fake_doc(
    job_id: &JobId,
    tag: &str,
    group: Option<DemographicGroup>,
    attrs: &BTreeSet<QualId>,
) -> ResumeDoc {
    let (mode, name) = match group {
        Some(g) => (SignalMode::Implicit, format!("Fixture {}", g.as_str())),
        None => (SignalMode::None, NEUTRAL_NAME.to_string()),
    };
    ResumeDoc {
        resume_id: ResumeId::from(format!("fake-{tag}").as_str()),
        job_id: job_id.clone(),
        rendered_text: format!("Name: {name}\n\nSummary\nFixture resume body for {tag}."),
        relevant_attrs: attrs.clone(),
        signal: DemographicSignal { group, mode, name, explicit_entries: Vec::new() },
        generator_tag: GeneratorTag::Deterministic,
        render_seed: 0,
    }
}

/// A fabricated pair with the stated truth and per-side groups. Attribute
/// sets are made consistent with the label so `k` and truth line up, but the
/// pair is not run through `PairCase::validate`.
pub(crate) fn fake_pair(
    id: &str,
    truth: GroundTruthLabel,
    left_group: Option<DemographicGroup>,
    right_group: Option<DemographicGroup>,
) -> PairCase {
    let job_id = JobId::from("fake-job");
    let shared = qual_id(&job_id, Tier::Required, 0);
    let extra = qual_id(&job_id, Tier::Required, 1);
    let small: BTreeSet<QualId> = BTreeSet::from([shared.clone()]);
    let big: BTreeSet<QualId> = BTreeSet::from([shared, extra]);
    let (left_attrs, right_attrs, k, suite_tag) = match truth {
        GroundTruthLabel::StrictLeft => (&big, &small, 1, SuiteTag::UnequalSameDemo),
        GroundTruthLabel::StrictRight => (&small, &big, 1, SuiteTag::UnequalSameDemo),
        GroundTruthLabel::Tie => (&small, &small, 0, SuiteTag::EqualImplicit),
    };
    PairCase {
        pair_id: PairId::from(id),
        job_id: job_id.clone(),
        left: fake_doc(&job_id, &format!("{id}-left"), left_group, left_attrs),
        right: fake_doc(&job_id, &format!("{id}-right"), right_group, right_attrs),
        truth,
        k,
        suite_tag,
        order_seed: 0,
    }
}
