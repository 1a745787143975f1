//! Keyword classification of qualification texts into skill kinds.
//!
//! Used only for slicing metrics by the kind of qualification that was edited
//! in a pair; never for ground truth. Matching is case-insensitive on word
//! boundaries, with precedence soft > education > hard and `unclassified` as
//! the fallback. The shipped keyword lists are sensible defaults and can be
//! replaced wholesale through configuration.

use serde::{Deserialize, Serialize};

use super::SkillKind;

pub const DEFAULT_SOFT_KEYWORDS: &[&str] = &[
    "passion",
    "passionate",
    "curiosity",
    "curious",
    "communication",
    "communicator",
    "collaboration",
    "collaborative",
    "teamwork",
    "interpersonal",
    "leadership",
    "mentoring",
    "mentorship",
    "empathy",
    "adaptable",
    "adaptability",
    "self-starter",
    "work ethic",
    "problem-solving mindset",
];

pub const DEFAULT_EDUCATION_KEYWORDS: &[&str] = &[
    "bachelor",
    "bachelors",
    "master",
    "masters",
    "phd",
    "ph.d",
    "doctorate",
    "bs",
    "ms",
    "ba",
    "bsn",
    "msn",
    "mba",
    "degree",
    "diploma",
    "associate of applied science",
    "coursework",
];

pub const DEFAULT_HARD_KEYWORDS: &[&str] = &[
    // software and data systems
    "sql",
    "hive",
    "spark",
    "python",
    "java",
    "javascript",
    "typescript",
    "golang",
    "rust",
    "c++",
    "kubernetes",
    "docker",
    "terraform",
    "aws",
    "azure",
    "gcp",
    "linux",
    "kafka",
    "hadoop",
    "prometheus",
    "grafana",
    "git",
    "ci/cd",
    "api",
    "rest",
    "graphql",
    "microservices",
    "database",
    "databases",
    "distributed systems",
    "observability",
    "testing",
    "debugging",
    // clinical systems and procedures
    "epic",
    "cerner",
    "ehr",
    "emr",
    "triage",
    "acls",
    "bls",
    "cpr",
    "pharmacology",
    "immunization",
    "venipuncture",
    "suturing",
    "telehealth",
    "dea",
    // industrial and field service
    "turbine",
    "turbines",
    "hydraulic",
    "hydraulics",
    "electrical",
    "mechanical",
    "voltage",
    "multimeter",
    "torque",
    "schematics",
    "rigging",
    "osha",
    "lockout",
    "tagout",
    "scada",
    "plc",
    "crane",
    "gearbox",
    "composite",
];

/// Configurable keyword lists backing [`SkillKindLexicon::classify`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkillKindLexicon {
    pub soft: Vec<String>,
    pub education: Vec<String>,
    pub hard: Vec<String>,
}

impl Default for SkillKindLexicon {
    fn default() -> Self {
        let own = |list: &[&str]| list.iter().map(|s| s.to_string()).collect();
        SkillKindLexicon {
            soft: own(DEFAULT_SOFT_KEYWORDS),
            education: own(DEFAULT_EDUCATION_KEYWORDS),
            hard: own(DEFAULT_HARD_KEYWORDS),
        }
    }
}

impl SkillKindLexicon {
    /// Classifies a qualification text. Pure: equal inputs always yield equal
    /// outputs, and the text is never mutated.
    pub fn classify(&self, text: &str) -> SkillKind {
        let haystack = text.to_lowercase();
        if self.soft.iter().any(|kw| contains_word(&haystack, kw)) {
            SkillKind::Soft
        } else if self.education.iter().any(|kw| contains_word(&haystack, kw)) {
            SkillKind::Education
        } else if self.hard.iter().any(|kw| contains_word(&haystack, kw)) {
            SkillKind::Hard
        } else {
            SkillKind::Unclassified
        }
    }
}

/// Substring match bounded by non-alphanumeric characters, so "bs" matches
/// "BS/MS" but not "absurd". Keywords are expected lowercase.
fn contains_word(haystack: &str, keyword: &str) -> bool {
    let keyword = keyword.to_lowercase();
    if keyword.is_empty() {
        return false;
    }
    let mut start = 0;
    while let Some(pos) = haystack[start..].find(&keyword) {
        let begin = start + pos;
        let end = begin + keyword.len();
        let left_ok = begin == 0
            || !haystack[..begin].chars().next_back().is_some_and(|c| c.is_alphanumeric());
        let right_ok = end == haystack.len()
            || !haystack[end..].chars().next().is_some_and(|c| c.is_alphanumeric());
        if left_ok && right_ok {
            return true;
        }
        start = begin + 1;
    }
    false
}
