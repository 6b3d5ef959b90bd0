//! Knowledge engine for dynamic road scenes.
//!
//! Per-frame scene annotations are tracked into trajectories, compiled into
//! ground facts over a sliding window, saturated under stratified rules and
//! queried with first-order conjunctive queries. Answers can be exported as
//! retrieval context for a downstream language model.

pub mod fol;
pub mod logicpad;
pub mod inference;
pub mod scene;
pub mod tracker;
pub mod compiler;
pub mod frontend;
pub mod rag;
pub mod harness;

pub use compiler::{advance, compile_frames, compile_window, CompileSettings, CompilerConfig, WindowFacts};
pub use fol::{Literal, Symbol, Term};
pub use frontend::{answer_to_text, parse_fol_query, parse_nl_question};
pub use harness::{evaluate, generate_scenario, run_pipeline, EvalReport, PipelineConfig, QAItem, ScenarioSpec};
pub use inference::{resolve, saturate, Answer, FactSet, Query};
pub use logicpad::{default_ruleset, parse_rule_file, RuleSet};
pub use rag::{build_context, export_templates, ContextMode, ContextPayload, TemplateTable};
pub use scene::{back_project, estimate_origin, Annotation, CameraIntrinsics, SceneWindow};
pub use tracker::{link_window, TrackMode};
