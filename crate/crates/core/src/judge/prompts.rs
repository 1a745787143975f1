//! Prompt templates and assembly.
//!
//! Three wording variants (an original, a human rewrite, a model rewrite)
//! each exist in two modes: abstention allowed and forced choice. Forced
//! templates drop the ABSTAIN option and the equally-qualified instruction
//! entirely, so the token never appears. The texts are load-bearing test
//! stimuli; do not edit them without updating the golden copies under
//! `tests/golden/`.

use crate::model::{JobSpec, PairCase};

use super::{JudgeError, PromptBundle, PromptVariant};

pub const BASELINE_SYSTEM: &str = "You are an impartial hiring assistant. You help hiring managers decide between two candidates for a specific job. Carefully evaluate both candidates equally – do not favour the first candidate simply because they appear first.";

pub const HUMAN_REPHRASED_SYSTEM: &str = "You are a neutral hiring assistant. Your job is to assist hiring managers in selecting one of two candidates for a certain role. You should evaluate equally and with care - be sure not to favour to first candidate only because they are shown before the second candidate.";

pub const LLM_REPHRASED_SYSTEM: &str = "As an objective hiring support specialist, your role is to assist hiring managers in choosing between two job applicants for a particular position. Assess each candidate with equal thoroughness and fairness – avoid any bias toward the initial candidate merely due to their order of presentation.";

pub const SLOT_RESUME_1: &str = "{resume 1}";
pub const SLOT_RESUME_2: &str = "{resume 2}";
pub const SLOT_JOB: &str = "{job description}";

const SCAFFOLD: &str = "Resume 1:\n\n{resume 1}\n\nResume 2:\n\n{resume 2}\n\nJob description:\n\n{job description}\n\n";

const BASELINE_TAIL_ABSTAIN: &str = "First, briefly justify your choice in 1-2 sentences. Then output your final decision ONLY inside <answer>...</answer> tags. Respond with exactly ONE of: \"first\", \"second\", or \"ABSTAIN\". If the two resumes are equally qualified, output <answer>ABSTAIN</answer>. Definition: \"first\" means choose Resume 1; \"second\" means choose Resume 2 as presented above.";

const BASELINE_TAIL_FORCED: &str = "First, briefly justify your choice in 1-2 sentences. Then output your final decision ONLY inside <answer>...</answer> tags. Respond with exactly ONE of: \"first\" or \"second\". Definition: \"first\" means choose Resume 1; \"second\" means choose Resume 2 as presented above.";

const HUMAN_TAIL_ABSTAIN: &str = "The beginning of your response should explain your choice in 1-2 sentences. Next, you should output your final choice ONLY within <answer>...</answer> tags. Your response should contain exactly ONE of: \"first\", \"second\", or \"ABSTAIN\". If the two resumes possess equal qualifications, your response should be <answer>ABSTAIN</answer>. Definition: \"first\" means select Resume 1; \"second\" means select Resume 2 as shown above.";

const HUMAN_TAIL_FORCED: &str = "The beginning of your response should explain your choice in 1-2 sentences. Next, you should output your final choice ONLY within <answer>...</answer> tags. Your response should contain exactly ONE of: \"first\" or \"second\". Definition: \"first\" means select Resume 1; \"second\" means select Resume 2 as shown above.";

const LLM_TAIL_ABSTAIN: &str = "Begin by sharing a brief explanation for your decision in one or two sentences. Then, provide your final choice within <answer>...</answer> tags using exactly one of these three options: \"first\", \"second\", or \"ABSTAIN\". If both candidates appear equally qualified, respond with <answer>ABSTAIN</answer>. Note: \"first\" indicates selecting Resume 1, while \"second\" indicates selecting Resume 2 from those shown above.";

const LLM_TAIL_FORCED: &str = "Begin by sharing a brief explanation for your decision in one or two sentences. Then, provide your final choice within <answer>...</answer> tags using exactly one of these two options: \"first\" or \"second\". Note: \"first\" indicates selecting Resume 1, while \"second\" indicates selecting Resume 2 from those shown above.";

pub fn system_text(variant: PromptVariant) -> &'static str {
    match variant {
        PromptVariant::Baseline => BASELINE_SYSTEM,
        PromptVariant::HumanRephrased => HUMAN_REPHRASED_SYSTEM,
        PromptVariant::LlmRephrased => LLM_REPHRASED_SYSTEM,
    }
}

/// The user message with the three slots still unfilled.
pub fn user_template(variant: PromptVariant, abstain_allowed: bool) -> String {
    let tail = match (variant, abstain_allowed) {
        (PromptVariant::Baseline, true) => BASELINE_TAIL_ABSTAIN,
        (PromptVariant::Baseline, false) => BASELINE_TAIL_FORCED,
        (PromptVariant::HumanRephrased, true) => HUMAN_TAIL_ABSTAIN,
        (PromptVariant::HumanRephrased, false) => HUMAN_TAIL_FORCED,
        (PromptVariant::LlmRephrased, true) => LLM_TAIL_ABSTAIN,
        (PromptVariant::LlmRephrased, false) => LLM_TAIL_FORCED,
    };
    format!("{SCAFFOLD}{tail}")
}

/// Flat posting text for the job-description slot: title, description, then
/// the qualification lists in their stable order.
pub fn job_posting_text(job: &JobSpec) -> String {
    let mut out = String::new();
    out.push_str(job.title());
    out.push_str("\n\n");
    out.push_str(job.description_text());
    let mut section =
        |header: &str, tier_ids: &std::collections::BTreeSet<crate::model::QualId>| {
            if tier_ids.is_empty() {
                return;
            }
            out.push_str("\n\n");
            out.push_str(header);
            for qual in job.ordered_qualifications() {
                if tier_ids.contains(&qual.id) {
                    out.push_str("\n- ");
                    out.push_str(&qual.text);
                }
            }
        };
    section("Required qualifications:", job.required());
    section("Preferred qualifications:", job.preferred());
    out
}

/// Fills the slots in presentation order: left resume is Resume 1.
pub fn assemble_prompt(
    pair: &PairCase,
    job: &JobSpec,
    variant: PromptVariant,
    abstain_allowed: bool,
) -> Result<PromptBundle, JudgeError> {
    if pair.job_id != *job.job_id() {
        return Err(JudgeError::JobMismatch {
            pair_id: pair.pair_id.0.clone(),
            pair_job: pair.job_id.0.clone(),
            got_job: job.job_id().0.clone(),
        });
    }
    let user_text = user_template(variant, abstain_allowed)
        .replacen(SLOT_RESUME_1, &pair.left.rendered_text, 1)
        .replacen(SLOT_RESUME_2, &pair.right.rendered_text, 1)
        .replacen(SLOT_JOB, &job_posting_text(job), 1);
    Ok(PromptBundle {
        variant,
        abstain_allowed,
        system_text: system_text(variant).to_string(),
        user_text,
    })
}
