//! End-to-end checks of the config loader and the stage commands, driving
//! the library the way the binary does and the binary itself for arg
//! parsing and exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

use screenaudit::gensuite::{GenerationConfig, Suite};
use screenaudit::judge::ComparatorKind;
use screenaudit::model::{qual_id, SkillKind, Tier};
use screenaudit::report::{MetricsReport, ScoringPlan};
use screenaudit_cli::config::{AuditConfig, ConfigFile, Overrides};
use screenaudit_cli::{
    cmd_diff, cmd_evaluate, cmd_generate, cmd_ingest, cmd_report, cmd_score, ingest_document,
    CliError, JobDocument,
};

fn sample_document(job_id: &str) -> JobDocument {
    let body = |topic: &str, i: usize| {
        format!(
            "{topic} duties covering sustained hands-on production work with measurable outcomes, \
             disciplined same-day documentation, and peer review habits, item {i}"
        )
    };
    JobDocument {
        job_id: job_id.into(),
        title: "Software Engineer".into(),
        occupation: "Software Developers".into(),
        description_text: "Designs, builds, and operates the services behind a scheduling \
                           product. Partners with product and support to plan work, owns \
                           deployment and monitoring, and mentors newer engineers through \
                           review and pairing."
            .into(),
        required: (0..6).map(|i| body("Required engineering", i)).collect(),
        preferred: vec![
            body("Preferred platform", 0),
            "Bachelor's degree in a quantitative field, or equivalent structured coursework \
             and sustained self-directed study with verifiable projects"
                .into(),
        ],
    }
}

fn write_job(dir: &Path, doc: &JobDocument) -> PathBuf {
    let path = dir.join(format!("{}.json", doc.job_id));
    std::fs::write(&path, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    path
}

/// A small, fast audit over one generated job: tiny caps, two synthetic
/// comparators, the floor bootstrap budget.
fn small_file(jobs_dir: &Path, out_root: &Path) -> ConfigFile {
    ConfigFile {
        master_seed: 41,
        jobs: vec![jobs_dir.display().to_string()],
        out_root: out_root.display().to_string(),
        generation: GenerationConfig {
            k_values: vec![1],
            pairs_per_job_cap: 8,
            equal_pairs_per_job_cap: 4,
            ..GenerationConfig::default()
        },
        comparators: vec![
            comparator("oracle", ComparatorKind::Oracle),
            comparator("coin", ComparatorKind::CoinFlip),
        ],
        scoring: ScoringPlan { bootstrap_resamples: 100, ..ScoringPlan::default() },
        ..ConfigFile::default()
    }
}

fn small_config(jobs_dir: &Path, out_root: &Path) -> AuditConfig {
    AuditConfig::resolve(small_file(jobs_dir, out_root), Path::new("."), &Overrides::default())
        .expect("config resolves")
}

fn comparator(id: &str, kind: ComparatorKind) -> screenaudit_cli::config::ComparatorEntry {
    screenaudit_cli::config::ComparatorEntry { comparator_id: id.into(), seed: None, kind }
}

#[test]
fn a_literal_toml_document_round_trips_through_the_loader() {
    let dir = TempDir::new().unwrap();
    let text = r#"
master_seed = 7
jobs = ["jobs"]
out_root = "artifacts"

[generation]
k_values = [1, 2]
pairs_per_job_cap = 10

[[comparators]]
comparator_id = "oracle"
kind = "oracle"

[[comparators]]
comparator_id = "noisy"
kind = "noisy_oracle"
epsilon = 0.25

[[comparators]]
comparator_id = "biased"
kind = "group_biased"
group = "black_woman"
bias_prob = 1.0

[[comparators]]
comparator_id = "pinned-coin"
kind = "coin_flip"
seed = 99

[evaluation]
variants = ["baseline", "human_rephrased"]
abstain_modes = [true]
repeats = 2

[scoring]
flag_threshold = 0.9
parse_failure_policy = "count_as_abstain"
"#;
    let path = dir.path().join("audit.toml");
    std::fs::write(&path, text).unwrap();
    let config = AuditConfig::load(&path, &Overrides::default()).expect("config loads");

    assert_eq!(config.master_seed, 7);
    assert_eq!(config.job_paths, vec![dir.path().join("jobs")]);
    assert_eq!(config.out_root, dir.path().join("artifacts"));
    assert_eq!(config.generation.k_values, vec![1, 2]);
    assert_ne!(config.generation.seed, 0, "generation seed derives from the master seed");
    assert_eq!(config.comparators.len(), 4);
    assert!(
        matches!(config.comparators[1].kind, ComparatorKind::NoisyOracle { epsilon } if epsilon == 0.25)
    );
    assert!(
        matches!(config.comparators[2].kind, ComparatorKind::GroupBiased { bias_prob, .. } if bias_prob == 1.0)
    );
    assert_eq!(config.comparators[3].seed, 99, "pinned seeds pass through verbatim");
    assert_ne!(
        config.comparators[0].seed, config.comparators[1].seed,
        "derived comparator seeds are independent"
    );
    assert_eq!(config.evaluation.repeats, 2);
    assert_eq!(config.scoring.flag_threshold, 0.9);
    assert!(config.config_hash.starts_with('c'));
}

#[test]
fn the_loader_rejects_underspecified_or_contradictory_files() {
    let dir = TempDir::new().unwrap();
    let check = |body: &str, needle: &str| {
        let path = dir.path().join("audit.toml");
        std::fs::write(&path, body).unwrap();
        let err = AuditConfig::load(&path, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains(needle), "expected {needle:?} in {err}");
    };
    check("jobs = []\n[[comparators]]\ncomparator_id = \"o\"\nkind = \"oracle\"\n", "jobs");
    check("jobs = [\"j\"]\n", "comparators");
    check(
        "jobs = [\"j\"]\n[generation]\nseed = 5\n[[comparators]]\ncomparator_id = \"o\"\nkind = \"oracle\"\n",
        "master_seed",
    );
    check(
        "jobs = [\"j\"]\n[[comparators]]\ncomparator_id = \"o\"\nkind = \"oracle\"\n[[comparators]]\ncomparator_id = \"o\"\nkind = \"coin_flip\"\n",
        "duplicate comparator_id",
    );
    check("master_sed = 3\njobs = [\"j\"]\n", "master_sed");
}

#[test]
fn overrides_shift_the_seed_but_not_the_out_root_hash() {
    let dir = TempDir::new().unwrap();
    let jobs = dir.path().join("jobs");
    let base = small_config(&jobs, &dir.path().join("out-a"));
    let reseeded = AuditConfig::resolve(
        small_file(&jobs, &dir.path().join("out-a")),
        Path::new("."),
        &Overrides { seed: Some(99), out: None },
    )
    .unwrap();
    assert_ne!(base.config_hash, reseeded.config_hash);
    assert_ne!(base.generation.seed, reseeded.generation.seed);
    assert_ne!(base.comparators[0].seed, reseeded.comparators[0].seed);

    let relocated = small_config(&jobs, &dir.path().join("out-b"));
    assert_eq!(base.config_hash, relocated.config_hash, "artifact location is not semantic");
}

#[test]
fn ingest_validates_classifies_and_persists() {
    let dir = TempDir::new().unwrap();
    let jobs_dir = dir.path().join("jobs");
    std::fs::create_dir(&jobs_dir).unwrap();
    write_job(&jobs_dir, &sample_document("alpha"));

    let config = small_config(&jobs_dir, &dir.path().join("out"));
    let summary = cmd_ingest(&config).expect("ingest runs");
    assert!(summary.ok());
    assert_eq!(summary.accepted.len(), 1);
    assert_eq!(summary.accepted[0].required, 6);
    assert_eq!(summary.accepted[0].preferred, 2);
    assert!(summary.jobs_path.exists());

    // The stored spec carries positional ids and classified kinds.
    let text = std::fs::read_to_string(&summary.jobs_path).unwrap();
    let job: screenaudit::model::JobSpec =
        serde_json::from_str(text.lines().next().unwrap()).unwrap();
    let first_pref = job
        .ordered_qualifications()
        .into_iter()
        .find(|q| q.tier == Tier::Preferred && q.text.contains("Bachelor"))
        .expect("degree qualification present");
    assert_eq!(first_pref.skill_kind, SkillKind::Education);
    assert_eq!(first_pref.id, qual_id(job.job_id(), Tier::Preferred, 1));
}

#[test]
fn ingest_continues_past_broken_documents_and_reports_each() {
    let dir = TempDir::new().unwrap();
    let jobs_dir = dir.path().join("jobs");
    std::fs::create_dir(&jobs_dir).unwrap();
    write_job(&jobs_dir, &sample_document("alpha"));
    // Too few required qualifications.
    let mut thin = sample_document("thin");
    thin.required.truncate(2);
    write_job(&jobs_dir, &thin);
    // Duplicate id in a later file (directory scan is name-ordered).
    let mut dup = sample_document("alpha");
    dup.title = "Software Engineer II".into();
    let dup_path = jobs_dir.join("zz-dup.json");
    std::fs::write(&dup_path, serde_json::to_string(&dup).unwrap()).unwrap();
    // Not JSON at all.
    std::fs::write(jobs_dir.join("broken.json"), "{ not json").unwrap();

    let config = small_config(&jobs_dir, &dir.path().join("out"));
    let summary = cmd_ingest(&config).expect("ingest still runs");
    assert!(!summary.ok());
    assert_eq!(summary.accepted.len(), 1, "only the valid document lands");
    assert_eq!(summary.rejected.len(), 3);
    let reasons: Vec<&str> = summary.rejected.iter().map(|(_, r)| r.as_str()).collect();
    assert!(reasons.iter().any(|r| r.contains("at least 3 required")), "{reasons:?}");
    assert!(reasons.iter().any(|r| r.contains("duplicate job_id alpha")), "{reasons:?}");
    assert!(reasons.iter().any(|r| r.contains("line 1")), "json diagnostics: {reasons:?}");

    let text = std::fs::read_to_string(&summary.jobs_path).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn generate_reports_the_pair_distribution_it_persisted() {
    let dir = TempDir::new().unwrap();
    let jobs_dir = dir.path().join("jobs");
    std::fs::create_dir(&jobs_dir).unwrap();
    write_job(&jobs_dir, &sample_document("alpha"));
    let config = small_config(&jobs_dir, &dir.path().join("out"));
    cmd_ingest(&config).unwrap();

    let summary = cmd_generate(&config).expect("generate runs");
    assert_eq!(summary.by_job.len(), 1);
    assert_eq!(summary.totals.iter().sum::<usize>(), summary.pair_count);
    assert!(
        summary.totals.iter().all(|&n| n > 0),
        "all four sub-suites present: {:?}",
        summary.totals
    );

    let suite = Suite::load(&summary.suite_dir).expect("persisted suite loads");
    assert_eq!(suite.pairs.len(), summary.pair_count);
    assert_eq!(suite.manifest.suite_id, summary.suite_id);
    let rendered = summary.to_string();
    assert!(rendered.contains("unequal_cross_demo"));
    assert!(rendered.contains(&summary.suite_id));
}

#[test]
fn each_stage_names_the_command_that_feeds_it() {
    let dir = TempDir::new().unwrap();
    let jobs_dir = dir.path().join("jobs");
    std::fs::create_dir(&jobs_dir).unwrap();
    write_job(&jobs_dir, &sample_document("alpha"));
    let config = small_config(&jobs_dir, &dir.path().join("out"));

    let stage_err = |e: CliError| e.to_string();
    assert!(stage_err(cmd_generate(&config).unwrap_err()).contains("screenaudit ingest"));
    cmd_ingest(&config).unwrap();
    assert!(stage_err(cmd_evaluate(&config).unwrap_err()).contains("screenaudit generate"));
    cmd_generate(&config).unwrap();
    assert!(stage_err(cmd_score(&config).unwrap_err()).contains("screenaudit evaluate"));
    cmd_evaluate(&config).unwrap();
    assert!(stage_err(cmd_report(&config).unwrap_err()).contains("screenaudit score"));
    cmd_score(&config).unwrap();
    cmd_report(&config).unwrap();
}

#[test]
fn evaluate_resumes_instead_of_reevaluating() {
    let dir = TempDir::new().unwrap();
    let jobs_dir = dir.path().join("jobs");
    std::fs::create_dir(&jobs_dir).unwrap();
    write_job(&jobs_dir, &sample_document("alpha"));
    let config = small_config(&jobs_dir, &dir.path().join("out"));
    cmd_ingest(&config).unwrap();
    cmd_generate(&config).unwrap();

    let first = cmd_evaluate(&config).unwrap();
    assert_eq!(first.resumed, 0);
    assert!(first.record_count > 0);
    let before = std::fs::read(first.run_dir.join("records.jsonl")).unwrap();

    let second = cmd_evaluate(&config).unwrap();
    assert_eq!(second.resumed, first.record_count, "everything already evaluated");
    assert_eq!(second.record_count, first.record_count);
    let after = std::fs::read(second.run_dir.join("records.jsonl")).unwrap();
    assert_eq!(before, after, "resume appends nothing to a complete log");
}

#[test]
fn score_refuses_a_log_recorded_against_a_different_suite() {
    let dir = TempDir::new().unwrap();
    let jobs_dir = dir.path().join("jobs");
    std::fs::create_dir(&jobs_dir).unwrap();
    write_job(&jobs_dir, &sample_document("alpha"));
    let config = small_config(&jobs_dir, &dir.path().join("out"));
    cmd_ingest(&config).unwrap();
    cmd_generate(&config).unwrap();
    cmd_evaluate(&config).unwrap();

    // Regenerate the suite under another seed; the stored log now points at
    // pairs that no longer exist.
    let mut reseeded = config.clone();
    reseeded.generation.seed = 4242;
    cmd_generate(&reseeded).unwrap();

    let err = cmd_score(&config).unwrap_err().to_string();
    assert!(err.contains("suite"), "{err}");
    assert!(err.contains("screenaudit evaluate"), "{err}");
}

#[test]
fn score_then_report_then_diff_line_up() {
    let dir = TempDir::new().unwrap();
    let jobs_dir = dir.path().join("jobs");
    std::fs::create_dir(&jobs_dir).unwrap();
    write_job(&jobs_dir, &sample_document("alpha"));

    let mut roots = Vec::new();
    for out in ["out-a", "out-b"] {
        let config = small_config(&jobs_dir, &dir.path().join(out));
        cmd_ingest(&config).unwrap();
        cmd_generate(&config).unwrap();
        cmd_evaluate(&config).unwrap();
        let scored = cmd_score(&config).unwrap();
        assert!(scored.rows > 0);
        assert!(MetricsReport::load(&scored.metrics_path).is_ok());
        let reported = cmd_report(&config).unwrap();
        assert_eq!(reported.files.len(), 6);
        assert!(reported.stale_hash.is_none());
        roots.push(config.out_root.clone());
    }

    let diff = cmd_diff(&roots[0], &roots[1]).expect("identical runs diff cleanly");
    assert!(!diff.drift.rows.is_empty());
    assert!(diff.drift.rows.iter().all(|r| r.delta.unwrap_or(0.0) == 0.0));
    assert!(diff.markdown.contains("Drift summary"));
}

#[test]
fn the_binary_parses_args_and_signals_failure_in_the_exit_code() {
    let dir = TempDir::new().unwrap();
    let jobs_dir = dir.path().join("jobs");
    std::fs::create_dir(&jobs_dir).unwrap();
    write_job(&jobs_dir, &sample_document("alpha"));
    let config_path = dir.path().join("audit.toml");
    std::fs::write(
        &config_path,
        "master_seed = 3\njobs = [\"jobs\"]\nout_root = \"out\"\n\
         [generation]\nk_values = [1]\npairs_per_job_cap = 6\nequal_pairs_per_job_cap = 2\n\
         [[comparators]]\ncomparator_id = \"oracle\"\nkind = \"oracle\"\n\
         [scoring]\nbootstrap_resamples = 100\n",
    )
    .unwrap();

    let bin = env!("CARGO_BIN_EXE_screenaudit");
    let run = |args: &[&str]| {
        Command::new(bin)
            .arg("--config")
            .arg(&config_path)
            .args(args)
            .output()
            .expect("binary runs")
    };

    // Wrong order: the error names the missing stage and fails the exit code.
    let premature = run(&["evaluate"]);
    assert!(!premature.status.success());
    assert!(String::from_utf8_lossy(&premature.stderr).contains("screenaudit generate"));

    for stage in ["ingest", "generate", "evaluate", "score", "report"] {
        let out = run(&[stage]);
        assert!(out.status.success(), "{stage} failed: {}", String::from_utf8_lossy(&out.stderr));
    }
    let summary = dir.path().join("out/report/summary.md");
    assert!(summary.exists());

    // A broken document flips ingest to a failing exit code but still
    // persists the valid remainder.
    std::fs::write(jobs_dir.join("broken.json"), "{").unwrap();
    let partial = run(&["ingest"]);
    assert!(!partial.status.success());
    assert!(String::from_utf8_lossy(&partial.stdout).contains("rejected"));

    let diff = Command::new(bin)
        .args(["diff"])
        .arg(dir.path().join("out"))
        .arg(dir.path().join("out"))
        .output()
        .expect("diff runs");
    assert!(diff.status.success());
    assert!(String::from_utf8_lossy(&diff.stdout).contains("Drift summary"));
}

#[test]
fn ingest_document_is_deterministic_in_ids() {
    let lexicon = screenaudit::model::SkillKindLexicon::default();
    let a = ingest_document(sample_document("det"), &lexicon).unwrap();
    let b = ingest_document(sample_document("det"), &lexicon).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
