//! Build pairwise resume screening test suites with known ground truth, run
//! decision makers (remote chat endpoints or synthetic reference judges) over
//! them, and score the results for criterion validity, discriminant validity,
//! and demographic fairness.
//!
//! The crate is organized around one idea: a candidate is strictly preferable
//! for a job exactly when their job-relevant attributes are a proper superset
//! of the other candidate's. Suites are constructed so that this relation is
//! known for every pair, which turns screening evaluation into measurement
//! against ground truth instead of against other models.
//!
//! Modules:
//! - [`model`]: jobs, qualifications, resumes, pairs, and the preference axioms
//! - [`gensuite`]: deterministic suite construction and persistence
//! - [`judge`]: prompt assembly, verdict parsing, comparators, and the runner
//! - [`metrics`]: validity/fairness estimators with bootstrap intervals
//! - [`report`]: scoring plans, CSV/Markdown rendering, and run directories
//! - [`chat`]: minimal chat-completion client used by remote adapters

pub mod chat;
pub mod gensuite;
pub mod judge;
pub mod metrics;
pub mod model;
pub mod report;
pub mod seeds;

#[cfg(test)]
pub(crate) mod test_support;

/// Version stamp written into every persisted artifact so loaders can reject
/// documents from an incompatible layout.
pub const SCHEMA_VERSION: &str = "screenaudit.v1";
