//! Annotation file in, answers and scores out.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{evaluate, EvalReport, QAItem, Scenario};
use crate::compiler::{compile_window, CompileSettings, CompilerConfig, WindowFacts};
use crate::frontend::{answer_to_text, parse_fol_query, parse_nl_question};
use crate::inference::{resolve, saturate, Answer, Query};
use crate::logicpad::{default_ruleset, parse_rule_file_named, RuleSet};
use crate::rag::{build_context, ContextMode, ContextPayload, TemplateTable};
use crate::scene::{Annotation, OriginConfig, SceneWindow};
use crate::tracker::{link_window, TrackMode, TrackerConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Track,
    Compile,
    Saturate,
    Parse,
    Resolve,
    Report,
    Export,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage name");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

impl StageError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        StageError { stage, message: message.to_string() }
    }

    /// Distinct per stage, for process exit codes.
    pub fn exit_code(&self) -> i32 {
        10 + self.stage as i32
    }
}

fn at<E: fmt::Display>(stage: Stage) -> impl Fn(E) -> StageError {
    move |e| StageError::new(stage, e)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Frames per window.
    pub window: usize,
    pub track_mode: TrackMode,
    pub origin: OriginConfig,
    pub tracker: TrackerConfig,
    pub compiler: CompilerConfig,
    /// Rule file; the bundled one when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rules: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window: 10,
            track_mode: TrackMode::Oracle,
            origin: OriginConfig::default(),
            tracker: TrackerConfig::default(),
            compiler: CompilerConfig::default(),
            rules: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_yaml(text: &str) -> Result<Self, StageError> {
        let cfg: PipelineConfig = serde_yaml::from_str(text).map_err(at(Stage::Config))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StageError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| StageError::new(Stage::Config, format!("{}: {e}", path.as_ref().display())))?;
        Self::from_yaml(&text)
    }

    pub fn validate(&self) -> Result<(), StageError> {
        if self.window < 2 {
            return Err(StageError::new(Stage::Config, "window must span at least 2 frames"));
        }
        self.compiler.validate().map_err(at(Stage::Config))
    }

    pub fn settings(&self) -> CompileSettings {
        CompileSettings {
            origin: self.origin.clone(),
            tracker: self.tracker,
            track_mode: self.track_mode,
            compiler: self.compiler.clone(),
        }
    }

    pub fn ruleset(&self) -> Result<RuleSet, StageError> {
        match &self.rules {
            None => Ok(default_ruleset()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| StageError::new(Stage::Config, format!("{}: {e}", p.display())))?;
                parse_rule_file_named(&text, &p.display().to_string()).map_err(at(Stage::Config))
            }
        }
    }
}

/// One annotation file with its windows compiled on demand.
pub struct Session {
    pub annotation: Annotation,
    pub rules: RuleSet,
    pub config: PipelineConfig,
    windows: BTreeMap<u64, WindowFacts>,
}

impl Session {
    pub fn open(path: impl AsRef<Path>, rules: RuleSet, config: PipelineConfig) -> Result<Session, StageError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(StageError::new(Stage::Ingest, format!("file not found: {}", path.display())));
        }
        let annotation = Annotation::load(path).map_err(|e| StageError::new(Stage::Ingest, format!("{}: {e}", path.display())))?;
        Session::new(annotation, rules, config)
    }

    pub fn new(annotation: Annotation, rules: RuleSet, config: PipelineConfig) -> Result<Session, StageError> {
        config.validate()?;
        annotation.validate().map_err(at(Stage::Ingest))?;
        annotation.check_categories(&rules).map_err(at(Stage::Ingest))?;
        if annotation.frames.is_empty() {
            return Err(StageError::new(Stage::Ingest, "annotation has no frames"));
        }
        // inferred tracking sees no instance ids anywhere
        let annotation = match config.track_mode {
            TrackMode::Oracle => annotation,
            TrackMode::Inferred => annotation.without_ids(),
        };
        Ok(Session { annotation, rules, config, windows: BTreeMap::new() })
    }

    fn span(&self) -> usize {
        self.config.window.min(self.annotation.frames.len())
    }

    /// Window `i` covers frames `i .. i + window`.
    pub fn window_ids(&self) -> Vec<u64> {
        (0..=(self.annotation.frames.len() - self.span()) as u64).collect()
    }

    /// The window ending at the newest frame.
    pub fn latest_window(&self) -> u64 {
        *self.window_ids().last().expect("at least one window")
    }

    pub fn facts(&mut self, window_id: u64) -> Result<&WindowFacts, StageError> {
        if !self.windows.contains_key(&window_id) {
            if !self.window_ids().contains(&window_id) {
                return Err(StageError::new(Stage::Track, format!("no window {window_id}")));
            }
            let settings = self.config.settings();
            let w = self
                .annotation
                .window(window_id as usize, self.span(), window_id, &settings.origin)
                .map_err(at(Stage::Track))?;
            let tracks = link_window(&w, settings.track_mode, &settings.tracker).map_err(at(Stage::Track))?;
            let kb = compile_window(&w, &tracks, &settings.compiler, &self.rules).map_err(at(Stage::Compile))?;
            saturate(&kb.facts, &self.rules).map_err(at(Stage::Saturate))?;
            self.windows.insert(window_id, kb);
        }
        Ok(&self.windows[&window_id])
    }

    pub fn window(&mut self, window_id: u64) -> Result<&SceneWindow, StageError> {
        Ok(&self.facts(window_id)?.window)
    }

    pub fn parse(&self, question: &str, fol: bool) -> Result<Query, StageError> {
        if fol {
            parse_fol_query(question, &self.rules).map_err(at(Stage::Parse))
        } else {
            parse_nl_question(question, &self.rules).map(|p| p.query).map_err(at(Stage::Parse))
        }
    }

    pub fn ask(&mut self, question: &str, window_id: u64, fol: bool) -> Result<(Query, Answer), StageError> {
        let q = self.parse(question, fol)?;
        self.facts(window_id)?;
        let a = resolve(&self.windows[&window_id].facts, &self.rules, &q).map_err(at(Stage::Resolve))?;
        Ok((q, a))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub question: String,
    pub window_id: u64,
    pub fol: String,
    pub answer: bool,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub results: Vec<QuestionResult>,
    pub report: EvalReport,
    pub contexts: Vec<ContextPayload>,
}

/// Ingests `annotation`, answers every question in its window and scores the
/// answers against the gold labels.
pub fn run_pipeline(
    annotation: impl AsRef<Path>,
    rules: &RuleSet,
    questions: &[QAItem],
    config: &PipelineConfig,
    export: Option<ContextMode>,
) -> Result<PipelineOutput, StageError> {
    let mut s = Session::open(annotation, rules.clone(), config.clone())?;
    answer_all(&mut s, questions, export)
}

fn answer_all(s: &mut Session, questions: &[QAItem], export: Option<ContextMode>) -> Result<PipelineOutput, StageError> {
    let table = match export {
        Some(_) => {
            let t = TemplateTable::from_rules(&s.rules);
            t.check(&s.rules).map_err(at(Stage::Export))?;
            Some(t)
        }
        None => None,
    };
    let mut results = Vec::new();
    let mut contexts = Vec::new();
    for item in questions {
        let (q, a) = s.ask(&item.question, item.window_id, false)?;
        if let (Some(mode), Some(t)) = (export, &table) {
            let kb = s.facts(item.window_id)?;
            contexts.push(build_context(&item.question, &q, &a, &kb.facts, mode, t).map_err(at(Stage::Export))?);
        }
        results.push(QuestionResult {
            question: item.question.clone(),
            window_id: item.window_id,
            fol: q.to_string(),
            answer: a.truth,
            text: answer_to_text(&a, &q),
        });
    }
    let answers: Vec<bool> = results.iter().map(|r| r.answer).collect();
    let mut report = evaluate(questions, &answers).map_err(at(Stage::Report))?;
    report.config = Some(serde_json::to_value(&s.config).map_err(at(Stage::Report))?);
    Ok(PipelineOutput { results, report, contexts })
}

/// The pipeline on an in-memory scenario, skipping the file round trip.
pub fn run_scenario(
    sc: &Scenario,
    rules: &RuleSet,
    config: &PipelineConfig,
    export: Option<ContextMode>,
) -> Result<PipelineOutput, StageError> {
    let mut s = Session::new(sc.annotation.clone(), rules.clone(), config.clone())?;
    answer_all(&mut s, &sc.qa, export)
}

pub const ANNOTATION_FILE: &str = "annotation.json";
pub const QA_FILE: &str = "qa.json";
pub const TRUTH_FILE: &str = "truth.json";
pub const SPEC_FILE: &str = "spec.json";

impl Scenario {
    /// Writes the annotation, questions, ground truth and spec into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> std::io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(ANNOTATION_FILE), self.annotation.to_json())?;
        std::fs::write(dir.join(QA_FILE), json(&self.qa))?;
        std::fs::write(dir.join(TRUTH_FILE), json(&self.truth))?;
        std::fs::write(dir.join(SPEC_FILE), json(&self.spec))?;
        Ok(())
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

pub fn load_questions(path: impl AsRef<Path>) -> Result<Vec<QAItem>, StageError> {
    let p = path.as_ref();
    let text = std::fs::read_to_string(p).map_err(|e| StageError::new(Stage::Ingest, format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| StageError::new(Stage::Ingest, format!("{}: {e}", p.display())))
}

/// Directories under `root` (or `root` itself) holding an annotation and a
/// question file, sorted by path.
pub fn scenario_dirs(root: impl AsRef<Path>) -> Result<Vec<PathBuf>, StageError> {
    let root = root.as_ref();
    let holds = |d: &Path| d.join(ANNOTATION_FILE).is_file() && d.join(QA_FILE).is_file();
    if !root.is_dir() {
        return Err(StageError::new(Stage::Ingest, format!("file not found: {}", root.display())));
    }
    if holds(root) {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(at(Stage::Ingest))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && holds(p))
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(StageError::new(Stage::Ingest, format!("no scenarios under {}", root.display())));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub dir: PathBuf,
    pub output: PipelineOutput,
}

/// Runs every scenario under `root` and pools the scores. Scenarios run
/// on separate threads; pooling happens afterwards in path order.
pub fn eval_dir(
    root: impl AsRef<Path>,
    rules: &RuleSet,
    config: &PipelineConfig,
    export: Option<ContextMode>,
) -> Result<(EvalReport, Vec<ScenarioRun>), StageError> {
    let dirs = scenario_dirs(root)?;
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(dirs.len());
    let chunk = dirs.len().div_ceil(workers);
    let runs: Vec<ScenarioRun> = std::thread::scope(|s| {
        let handles: Vec<_> = dirs
            .chunks(chunk)
            .map(|c| {
                s.spawn(move || {
                    c.iter()
                        .map(|d| {
                            let qa = load_questions(d.join(QA_FILE))?;
                            let output = run_pipeline(d.join(ANNOTATION_FILE), rules, &qa, config, export)?;
                            Ok(ScenarioRun { dir: d.clone(), output })
                        })
                        .collect::<Result<Vec<_>, StageError>>()
                })
            })
            .collect();
        let mut out = Vec::new();
        for h in handles {
            out.extend(h.join().expect("eval thread")?);
        }
        Ok::<_, StageError>(out)
    })?;
    let reports: Vec<EvalReport> = runs.iter().map(|r| r.output.report.clone()).collect();
    Ok((EvalReport::merge(&reports), runs))
}
