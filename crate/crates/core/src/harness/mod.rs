//! Scenario generation, end-to-end runs and scoring.

mod eval;
mod generate;
mod pipeline;

pub use eval::{evaluate, EvalReport, Scores};
pub use generate::{
    default_intrinsics, generate_scenario, generate_suite, gold_answer, question_text, GroundTruth, GtObject, GtPair,
    QAItem, Scenario, ScenarioKind, ScenarioSpec, CAMERA_HEIGHT,
};
pub use pipeline::{
    eval_dir, load_questions, run_pipeline, run_scenario, scenario_dirs, PipelineConfig, PipelineOutput, QuestionResult,
    ScenarioRun, Session, Stage, StageError, ANNOTATION_FILE, QA_FILE, SPEC_FILE, TRUTH_FILE,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),
    #[error("{questions} questions but {answers} answers")]
    LengthMismatch { questions: usize, answers: usize },
}
