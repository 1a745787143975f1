use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::model::{strictly_preferred, GroundTruthLabel, NEUTRAL_NAME};
use crate::test_support::{gen_job, REQUIRED_TEXTS};

fn default_generator() -> SuiteGenerator {
    SuiteGenerator::new(GenerationConfig::default()).expect("default config is valid")
}

fn neutral_base(generator: &SuiteGenerator, job: &JobSpec, seed: u64) -> ResumeDoc {
    generator.render_base_resume(job, &DemographicSignal::neutral(), seed).expect("base renders")
}

fn lc_first(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first)
            if first.is_uppercase() && !chars.clone().next().is_some_and(|c| c.is_uppercase()) =>
        {
            first.to_lowercase().chain(chars).collect()
        }
        _ => text.to_string(),
    }
}

/// A qualification counts as expressed if its text (possibly lowercased for
/// summary sentences, possibly minus a trailing period) appears verbatim.
fn expressed(text: &str, qual_text: &str) -> bool {
    let body = qual_text.trim_end_matches('.');
    text.contains(body) || text.contains(&lc_first(body))
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

#[test]
fn base_resume_holds_exactly_required_and_is_deterministic() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 7);
    assert_eq!(&base.relevant_attrs, job.required());
    let again = neutral_base(&generator, &job, 7);
    assert_eq!(base.rendered_text, again.rendered_text);
    assert_eq!(base.resume_id, again.resume_id);
    for text in REQUIRED_TEXTS {
        assert!(expressed(&base.rendered_text, text), "required qualification missing: {text}");
    }
}

#[test]
fn base_resume_substitutes_fillers_and_keeps_name_placeholder() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 11);
    assert!(base.rendered_text.starts_with(&format!("Name: {NEUTRAL_NAME}")));
    assert!(!base.rendered_text.contains("{{COMPANY_NAME}}"));
    assert!(!base.rendered_text.contains("{{SCHOOL_NAME}}"));
}

#[test]
fn credential_requirement_lands_in_certifications_section() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 3);
    let sections: Vec<&str> = base.rendered_text.split("\n\n").collect();
    let certs = sections
        .iter()
        .find(|s| s.starts_with("Certifications"))
        .expect("certifications section present");
    assert!(certs.contains("Certified Kubernetes Administrator"));
}

#[test]
fn base_resume_renders_years_from_qualifications() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 5);
    assert!(base.rendered_text.contains("over 5 years of experience"));
    assert!(base.rendered_text.contains(&format!("{}-Present", BASE_YEAR - 5)));
}

#[test]
fn underqualified_removes_k_required_and_is_strictly_worse() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 21);
    let mut rng = seeds::rng_for(21, &["under-test"]);
    let under = generator.make_underqualified(&job, &base, 2, &mut rng).expect("under renders");
    assert_eq!(under.relevant_attrs.len(), base.relevant_attrs.len() - 2);
    assert!(under.relevant_attrs.is_subset(&base.relevant_attrs));
    assert!(strictly_preferred(&base, &under, &job).expect("same job"));
    match derive_label(&base, &under, &job).expect("comparable") {
        LabelOutcome::Label(GroundTruthLabel::StrictLeft) => {}
        other => panic!("expected StrictLeft, got {other:?}"),
    }
}

/// Text-diff oracle: the only lines allowed to change when qualifications are
/// removed are lines expressing those qualifications, the summary line, and
/// role header lines (year-count adjustments).
#[test]
fn underqualified_line_diff_touches_only_removed_material() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 33);
    for attempt in 0..6u64 {
        let mut rng = seeds::rng_for(33, &["under-diff", &attempt.to_string()]);
        let under = generator.make_underqualified(&job, &base, 2, &mut rng).expect("under renders");
        let removed: Vec<&Qualification> = base
            .relevant_attrs
            .difference(&under.relevant_attrs)
            .map(|id| job.qualification(id).expect("job qual"))
            .collect();
        assert_eq!(removed.len(), 2);

        let mut base_lines: BTreeMap<&str, i64> = BTreeMap::new();
        for line in base.rendered_text.lines() {
            *base_lines.entry(line).or_default() += 1;
        }
        for line in under.rendered_text.lines() {
            *base_lines.entry(line).or_default() -= 1;
        }
        let mut changed_spans = 0;
        for (line, delta) in base_lines {
            if delta == 0 {
                continue;
            }
            changed_spans += 1;
            // A removal may empty a whole section, taking its header and a
            // blank separator line with it.
            let explains = removed.iter().any(|q| expressed(line, &q.text))
                || line.contains("Comfortable owning")
                || line.contains(" | ")
                || line.is_empty()
                || ["Experience", "Education", "Skills", "Certifications"].contains(&line);
            assert!(explains, "unexplained changed line: {line:?}");
        }
        assert!(changed_spans >= 1, "removal must change at least one span");
        for q in &removed {
            assert!(
                !expressed(&under.rendered_text, &q.text),
                "removed qualification still expressed: {}",
                q.text
            );
        }
    }
}

#[test]
fn removing_the_years_qualification_adjusts_year_counts() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 9);
    // Removing every required qualification necessarily includes the
    // years-of-experience one.
    let mut rng = seeds::rng_for(9, &["under-years"]);
    let under = generator
        .make_underqualified(&job, &base, job.required().len(), &mut rng)
        .expect("under renders");
    assert!(base.rendered_text.contains("over 5 years of experience"));
    assert!(!under.rendered_text.contains("over 5 years of experience"));
    assert!(base.rendered_text.contains(&format!("{}-Present", BASE_YEAR - 5)));
    assert!(under.rendered_text.contains(&format!("{}-Present", BASE_YEAR - 2)));
}

#[test]
fn overqualified_adds_k_preferred_and_is_strictly_better() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 41);
    let mut rng = seeds::rng_for(41, &["over-test"]);
    let over = generator.make_overqualified(&job, &base, 2, &mut rng).expect("over renders");
    assert_eq!(over.relevant_attrs.len(), base.relevant_attrs.len() + 2);
    assert!(base.relevant_attrs.is_subset(&over.relevant_attrs));
    assert!(strictly_preferred(&over, &base, &job).expect("same job"));
    let added: Vec<&Qualification> = over
        .relevant_attrs
        .difference(&base.relevant_attrs)
        .map(|id| job.qualification(id).expect("job qual"))
        .collect();
    for q in added {
        assert!(expressed(&over.rendered_text, &q.text), "added qualification missing: {}", q.text);
        assert!(!expressed(&base.rendered_text, &q.text), "base already expressed: {}", q.text);
    }
}

#[test]
fn adding_the_education_qualification_inserts_an_education_entry() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 13);
    assert!(!base.rendered_text.contains("Education\n"));
    // k = all preferred guarantees the education qualification is included.
    let mut rng = seeds::rng_for(13, &["over-edu"]);
    let over = generator
        .make_overqualified(&job, &base, job.preferred().len(), &mut rng)
        .expect("over renders");
    let sections: Vec<&str> = over.rendered_text.split("\n\n").collect();
    let education =
        sections.iter().find(|s| s.starts_with("Education")).expect("education section present");
    assert!(education.contains("Bachelor of Science in Computer Science"));
}

#[test]
fn overqualified_length_stays_within_ten_percent_of_base() {
    let generator = default_generator();
    let job = gen_job();
    for seed in 0..8u64 {
        let base = neutral_base(&generator, &job, seed);
        let budget = char_len(&base.rendered_text) / 10;
        for k in 1..=3usize {
            let mut rng = seeds::rng_for(seed, &["over-10pct", &k.to_string()]);
            let over =
                generator.make_overqualified(&job, &base, k, &mut rng).expect("over renders");
            let diff = char_len(&over.rendered_text).abs_diff(char_len(&base.rendered_text));
            assert!(
                diff <= budget,
                "k={k} seed={seed}: over-variant drifts {diff} chars, budget {budget}"
            );
        }
    }
}

#[test]
fn variant_pairs_pass_the_default_trivial_edit_filter() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 55);
    for k in 1..=3usize {
        for attempt in 0..6u64 {
            let mut rng = seeds::rng_for(55, &["filter", &k.to_string(), &attempt.to_string()]);
            let under = generator.make_underqualified(&job, &base, k, &mut rng).expect("under");
            let over = generator.make_overqualified(&job, &base, k, &mut rng).expect("over");
            assert!(trivial_edit_filter(&base, &under, 120), "base/under k={k} below threshold");
            assert!(trivial_edit_filter(&over, &base, 120), "over/base k={k} below threshold");
            assert!(trivial_edit_filter(&over, &under, 120), "over/under k={k} below threshold");
        }
    }
}

#[test]
fn reword_keeps_attrs_changes_text_and_stays_near_base_length() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 77);
    let company = base
        .rendered_text
        .lines()
        .find(|l| l.contains(" | "))
        .and_then(|l| l.split(" | ").nth(1))
        .expect("role header present")
        .to_string();
    for seed in 0..20u64 {
        let reworded = generator.reword_resume(&job, &base, seed).expect("reword renders");
        assert_eq!(reworded.relevant_attrs, base.relevant_attrs);
        assert_ne!(reworded.rendered_text, base.rendered_text, "seed {seed} failed to reword");
        let diff = char_len(&reworded.rendered_text).abs_diff(char_len(&base.rendered_text));
        assert!(diff <= char_len(&base.rendered_text) / 10, "seed {seed} drifts {diff} chars");
        assert!(reworded.rendered_text.contains(&company), "reword changed the employer");
        let again = generator.reword_resume(&job, &base, seed).expect("reword renders");
        assert_eq!(again.rendered_text, reworded.rendered_text);
    }
}

#[test]
fn implicit_signal_changes_only_the_name_line() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 19);
    let mut rng = seeds::rng_for(19, &["implicit"]);
    let signed = generator
        .attach_demographic_signal(
            &job,
            &base,
            DemographicGroup::BlackMan,
            SignalMode::Implicit,
            &mut rng,
        )
        .expect("attach succeeds");
    assert_eq!(signed.relevant_attrs, base.relevant_attrs);
    let base_lines: Vec<&str> = base.rendered_text.lines().collect();
    let signed_lines: Vec<&str> = signed.rendered_text.lines().collect();
    assert_eq!(base_lines.len(), signed_lines.len());
    for (i, (b, s)) in base_lines.iter().zip(&signed_lines).enumerate() {
        if i == 0 {
            assert_eq!(*b, format!("Name: {NEUTRAL_NAME}"));
            assert_eq!(*s, format!("Name: {}", signed.signal.name));
        } else {
            assert_eq!(b, s, "non-name line {i} changed");
        }
    }
    assert!(name_list(DemographicGroup::BlackMan).contains(&signed.signal.name.as_str()));
}

#[test]
fn explicit_signal_appends_group_org_and_award_lines() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 23);
    let mut rng = seeds::rng_for(23, &["explicit"]);
    let signed = generator
        .attach_demographic_signal(
            &job,
            &base,
            DemographicGroup::BlackWoman,
            SignalMode::Explicit,
            &mut rng,
        )
        .expect("attach succeeds");
    let lines: Vec<&str> = signed.rendered_text.lines().collect();
    let n = lines.len();
    assert_eq!(lines[n - 3], "Organizations & Awards");
    assert_eq!(lines[n - 2], "- Chair, Black Women in Computer Science Initiative");
    assert_eq!(
        lines[n - 1],
        "- Recipient, National Black Women's Professional Association: Software Engineer Rising Star Award"
    );
    assert_eq!(signed.relevant_attrs, base.relevant_attrs);
}

#[test]
fn attach_rejects_non_neutral_docs_and_mode_none() {
    let generator = default_generator();
    let job = gen_job();
    let base = neutral_base(&generator, &job, 29);
    let mut rng = seeds::rng_for(29, &["double-attach"]);
    let signed = generator
        .attach_demographic_signal(
            &job,
            &base,
            DemographicGroup::WhiteWoman,
            SignalMode::Implicit,
            &mut rng,
        )
        .expect("first attach succeeds");
    let again = generator.attach_demographic_signal(
        &job,
        &signed,
        DemographicGroup::WhiteMan,
        SignalMode::Implicit,
        &mut rng,
    );
    assert!(matches!(again, Err(GenError::Config(_))));
    let none = generator.attach_demographic_signal(
        &job,
        &base,
        DemographicGroup::WhiteMan,
        SignalMode::None,
        &mut rng,
    );
    assert!(matches!(none, Err(GenError::Config(_))));
}

#[test]
fn trivial_edit_filter_thresholds() {
    let a = "x".repeat(4000);
    assert!(trivial_edit_filter_with(&a, &"x".repeat(3850), 120, DiffMetric::LengthDiff));
    assert!(!trivial_edit_filter_with(&a, &"x".repeat(3950), 120, DiffMetric::LengthDiff));
    assert!(trivial_edit_filter_with(&a, &a, 0, DiffMetric::LengthDiff));
}

#[test]
fn edit_distance_metric_counts_substitutions() {
    assert_eq!(levenshtein("kitten", "sitting"), 3);
    assert_eq!(levenshtein("", "abc"), 3);
    assert_eq!(levenshtein("same", "same"), 0);
    // Same length, different content: invisible to the length metric,
    // caught by edit distance.
    assert!(!trivial_edit_filter_with("aaaa", "bbbb", 3, DiffMetric::LengthDiff));
    assert!(trivial_edit_filter_with("aaaa", "bbbb", 3, DiffMetric::EditDistance));
}

#[test]
fn config_validation_rejects_bad_inputs() {
    let mut cfg = GenerationConfig { k_values: vec![], ..GenerationConfig::default() };
    assert!(matches!(cfg.validate(), Err(GenError::Config(_))));
    cfg.k_values = vec![1, 1];
    assert!(matches!(cfg.validate(), Err(GenError::Config(_))));
    cfg.k_values = vec![0];
    assert!(matches!(cfg.validate(), Err(GenError::Config(_))));
    let mut cfg = GenerationConfig { demographic_groups: vec![], ..GenerationConfig::default() };
    assert!(matches!(cfg.validate(), Err(GenError::Config(_))));
    cfg.demographic_groups = vec![DemographicGroup::BlackMan, DemographicGroup::BlackMan];
    assert!(matches!(cfg.validate(), Err(GenError::Config(_))));
}

fn small_config() -> GenerationConfig {
    GenerationConfig {
        seed: 1234,
        k_values: vec![1, 2],
        pairs_per_job_cap: 12,
        equal_pairs_per_job_cap: 6,
        ..GenerationConfig::default()
    }
}

#[test]
fn build_suite_emits_all_four_categories_with_no_skips() {
    let generator = SuiteGenerator::new(small_config()).expect("config valid");
    let suite = generator.build_suite(&[gen_job()]).expect("suite builds");
    assert_eq!(
        suite.count_by_tag(SuiteTag::UnequalSameDemo)
            + suite.count_by_tag(SuiteTag::UnequalCrossDemo),
        12
    );
    assert!(suite.count_by_tag(SuiteTag::UnequalSameDemo) >= 4);
    assert!(suite.count_by_tag(SuiteTag::UnequalCrossDemo) >= 4);
    assert_eq!(suite.count_by_tag(SuiteTag::EqualImplicit), 6);
    assert_eq!(suite.count_by_tag(SuiteTag::EqualExplicit), 6);
    assert_eq!(suite.pairs.len(), 24);
    assert!(suite.manifest.skipped.is_empty(), "unexpected skips: {:?}", suite.manifest.skipped);
    for pair in &suite.pairs {
        assert_eq!(pair.suite_tag.is_equal(), pair.truth == GroundTruthLabel::Tie);
        assert_eq!(
            pair.left.signal.mode == SignalMode::Explicit,
            pair.suite_tag == SuiteTag::EqualExplicit
        );
    }
}

#[test]
fn build_suite_is_deterministic() {
    let job = gen_job();
    let a = SuiteGenerator::new(small_config())
        .unwrap()
        .build_suite(std::slice::from_ref(&job))
        .unwrap();
    let b = SuiteGenerator::new(small_config())
        .unwrap()
        .build_suite(std::slice::from_ref(&job))
        .unwrap();
    assert_eq!(
        serde_json::to_string(&a.manifest).unwrap(),
        serde_json::to_string(&b.manifest).unwrap()
    );
    let pairs_a: Vec<String> = a.pairs.iter().map(|p| serde_json::to_string(p).unwrap()).collect();
    let pairs_b: Vec<String> = b.pairs.iter().map(|p| serde_json::to_string(p).unwrap()).collect();
    assert_eq!(pairs_a, pairs_b);
}

#[test]
fn build_suite_skips_oversized_k_with_a_note() {
    let mut cfg = small_config();
    cfg.k_values = vec![1, 5];
    let generator = SuiteGenerator::new(cfg).expect("config valid");
    let suite = generator.build_suite(&[gen_job()]).expect("suite builds");
    assert!(suite.manifest.skipped.iter().any(|s| s.contains("k=5")));
    assert!(!suite.pairs.is_empty());
}

#[test]
fn generated_strict_pairs_balance_left_and_right_over_ten_thousand() {
    let cfg = GenerationConfig {
        seed: 99,
        pairs_per_job_cap: 10_500,
        equal_pairs_per_job_cap: 0,
        ..GenerationConfig::default()
    };
    let generator = SuiteGenerator::new(cfg).expect("config valid");
    let suite = generator.build_suite(&[gen_job()]).expect("suite builds");
    let total = suite.pairs.len();
    assert!(total >= 10_000, "expected at least 10k pairs, got {total}");
    let left = suite.pairs.iter().filter(|p| p.truth == GroundTruthLabel::StrictLeft).count();
    let fraction = left as f64 / total as f64;
    assert!(
        (0.48..=0.52).contains(&fraction),
        "StrictLeft fraction {fraction:.4} outside binomial bound"
    );
}

#[test]
fn suite_round_trips_through_disk() {
    let generator = SuiteGenerator::new(small_config()).expect("config valid");
    let suite = generator.build_suite(&[gen_job()]).expect("suite builds");
    let dir = tempfile::tempdir().expect("tempdir");
    suite.save(dir.path()).expect("save succeeds");
    let loaded = Suite::load(dir.path()).expect("load succeeds");
    assert_eq!(loaded.manifest, suite.manifest);
    assert_eq!(loaded.pairs.len(), suite.pairs.len());
    assert_eq!(loaded.jobs.len(), 1);

    std::fs::remove_file(dir.path().join("pairs.jsonl")).expect("remove");
    match Suite::load(dir.path()) {
        Err(GenError::MissingArtifact { path, produced_by }) => {
            assert!(path.ends_with("pairs.jsonl"));
            assert_eq!(produced_by, "screenaudit generate");
        }
        other => panic!("expected missing artifact, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Any seed yields a structurally valid suite: every pair re-validates,
    /// unequal pairs nest strictly, signals never touch attribute sets.
    #[test]
    fn any_seed_builds_a_valid_suite(seed in any::<u64>()) {
        let cfg = GenerationConfig {
            seed,
            k_values: vec![1],
            pairs_per_job_cap: 6,
            equal_pairs_per_job_cap: 2,
            ..GenerationConfig::default()
        };
        let generator = SuiteGenerator::new(cfg).expect("config valid");
        let job = gen_job();
        let suite = generator.build_suite(std::slice::from_ref(&job)).expect("suite builds");
        prop_assert_eq!(suite.pairs.len(), 6 + 2 + 2);
        for pair in &suite.pairs {
            prop_assert!(pair.validate(&job).is_ok());
            if pair.truth != GroundTruthLabel::Tie {
                let (better, worse) = match pair.truth {
                    GroundTruthLabel::StrictLeft => (&pair.left, &pair.right),
                    GroundTruthLabel::StrictRight => (&pair.right, &pair.left),
                    GroundTruthLabel::Tie => unreachable!(),
                };
                prop_assert!(strictly_preferred(better, worse, &job).unwrap());
            }
        }
    }
}
