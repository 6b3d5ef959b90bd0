use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use roadlogic::frontend::answer_to_text;
use roadlogic::harness::{
    eval_dir, generate_scenario, generate_suite, PipelineConfig, ScenarioKind, ScenarioSpec, Session, StageError,
};
use roadlogic::rag::ContextMode;
use roadlogic::tracker::TrackMode;

#[derive(Parser)]
#[command(name = "roadlogic", version, about = "Logic queries over road-scene annotations")]
struct Cli {
    /// YAML file with window size, tracker and compiler settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured window size.
    #[arg(long, global = true)]
    window_size: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Tracking {
    /// oracle (annotated ids) or inferred (frame-to-frame matching).
    #[arg(long)]
    track_mode: Option<TrackMode>,
    /// Window to use; the newest one by default.
    #[arg(long)]
    window: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenarios with questions and gold answers.
    Gen {
        /// Scenario kind; a suite cycling all kinds when omitted.
        #[arg(long)]
        kind: Option<ScenarioKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Scenarios in a suite.
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Extra road users per scenario.
        #[arg(long)]
        objects: Option<usize>,
    },
    /// Load an annotation file and report or dump what it compiles to.
    Ingest {
        file: PathBuf,
        #[arg(long, conflicts_with = "dump_facts")]
        dump_tracks: bool,
        #[arg(long)]
        dump_facts: bool,
        #[command(flatten)]
        tracking: Tracking,
    },
    /// Answer one question.
    Query {
        file: PathBuf,
        #[arg(long = "q")]
        question: String,
        /// The question is a FOL conjunction rather than English.
        #[arg(long)]
        fol: bool,
        #[command(flatten)]
        tracking: Tracking,
    },
    /// Interactive questions over one annotation file.
    Repl {
        file: PathBuf,
        #[command(flatten)]
        tracking: Tracking,
    },
    /// Answer and score every generated scenario under a directory.
    Eval {
        dir: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Also write retrieval context: c2 (verdict and support) or c3 (all facts).
        #[arg(long)]
        export_context: Option<ContextMode>,
        #[arg(long)]
        track_mode: Option<TrackMode>,
    },
}

fn config(cli: &Cli, track_mode: Option<TrackMode>) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(n) = cli.window_size {
        cfg.window = n;
    }
    if let Some(m) = track_mode {
        cfg.track_mode = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn session(cli: &Cli, file: &Path, t: &Tracking) -> Result<(Session, u64)> {
    let cfg = config(cli, t.track_mode)?;
    let rules = cfg.ruleset()?;
    let s = Session::open(file, rules, cfg)?;
    let w = t.window.unwrap_or_else(|| s.latest_window());
    Ok((s, w))
}

fn gen(kind: Option<ScenarioKind>, seed: u64, out: &Path, count: usize, objects: Option<usize>, cfg: &PipelineConfig) -> Result<()> {
    let rules = cfg.ruleset()?;
    let scenarios = match kind {
        Some(k) => {
            let mut spec = ScenarioSpec::new(k, seed);
            spec.n = cfg.window;
            if let Some(o) = objects {
                spec.objects = o;
            }
            vec![generate_scenario(&spec, &rules)?]
        }
        None => generate_suite(seed, count, &rules)?,
    };
    for sc in &scenarios {
        let dir = out.join(sc.spec.slug());
        sc.save(&dir).with_context(|| format!("writing {}", dir.display()))?;
        println!("{}: {} questions", dir.display(), sc.qa.len());
    }
    Ok(())
}

fn ingest(mut s: Session, w: u64, dump_tracks: bool, dump_facts: bool) -> Result<()> {
    let mut o = std::io::stdout().lock();
    let kb = s.facts(w)?;
    if dump_facts {
        write!(o, "{}", kb.facts.to_text())?;
    } else if dump_tracks {
        let tracks: Vec<serde_json::Value> = kb
            .tracks
            .iter()
            .map(|t| {
                serde_json::json!({
                    "id": t.instance_id,
                    "category": t.category,
                    "frames": t.observations.keys().collect::<Vec<_>>(),
                    "attributes": t.attributes,
                })
            })
            .collect();
        writeln!(o, "{}", serde_json::to_string_pretty(&tracks)?)?;
    } else {
        let frames = s.annotation.frames.len();
        let windows = s.window_ids().len();
        let kb = s.facts(w)?;
        writeln!(o, "frames: {frames}")?;
        writeln!(o, "windows: {windows}")?;
        writeln!(o, "window {w}: {} tracks, {} facts", kb.tracks.len(), kb.facts.len())?;
    }
    Ok(())
}

fn query(mut s: Session, w: u64, question: &str, fol: bool) -> Result<()> {
    let (q, a) = s.ask(question, w, fol)?;
    println!("Query: {q}");
    println!("{}", answer_to_text(&a, &q));
    Ok(())
}

const REPL_HELP: &str = "questions in English, or:\n  :fol <conjunction>   FOL query\n  :facts               window facts\n  :tracks              tracked objects\n  :quit";

fn repl(mut s: Session, w: u64) -> Result<()> {
    let stdin = std::io::stdin();
    let mut out = std::io::stdout();
    writeln!(out, "window {w}; :help for commands")?;
    loop {
        write!(out, "> ")?;
        out.flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            break;
        }
        let line = line.trim();
        let reply: Result<String, StageError> = match line {
            "" => continue,
            ":quit" | ":q" => break,
            ":help" => Ok(REPL_HELP.to_string()),
            ":facts" => s.facts(w).map(|kb| kb.facts.to_text().trim_end().to_string()),
            ":tracks" => s.facts(w).map(|kb| kb.tracks.iter().map(|t| t.instance_id.as_str()).collect::<Vec<_>>().join(" ")),
            _ => {
                let (text, fol) = match line.strip_prefix(":fol ") {
                    Some(rest) => (rest, true),
                    None => (line, false),
                };
                s.ask(text, w, fol).map(|(q, a)| {
                    let mut r = format!("Query: {q}\n{}", answer_to_text(&a, &q));
                    if a.bindings.len() > 1 || (a.truth && !q.vars().is_empty()) {
                        let all: Vec<String> = a
                            .bindings
                            .iter()
                            .map(|b| b.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", "))
                            .collect();
                        r.push_str(&format!("\nBindings: {}", all.join("; ")));
                    }
                    r
                })
            }
        };
        match reply {
            Ok(r) => writeln!(out, "{r}")?,
            Err(e) => writeln!(out, "error: {e}")?,
        }
    }
    Ok(())
}

fn eval(dir: &Path, report: &Path, export: Option<ContextMode>, cfg: &PipelineConfig) -> Result<()> {
    let rules = cfg.ruleset()?;
    let (rep, runs) = eval_dir(dir, &rules, cfg, export)?;
    if let Some(parent) = report.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(report, rep.to_json() + "\n").with_context(|| format!("writing {}", report.display()))?;
    if let Some(mode) = export {
        let tag = match mode {
            ContextMode::WithInference => "c2",
            ContextMode::FactsOnly => "c3",
        };
        let base = report.parent().unwrap_or(Path::new(".")).join(format!("context-{tag}"));
        std::fs::create_dir_all(&base)?;
        for r in &runs {
            let name = r.dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into());
            let text: Vec<String> = r.output.contexts.iter().map(|c| c.to_text()).collect();
            std::fs::write(base.join(format!("{name}.txt")), text.join("\n---\n"))?;
            std::fs::write(base.join(format!("{name}.json")), serde_json::to_string_pretty(&r.output.contexts)? + "\n")?;
        }
    }
    println!("{:<8} {:>6} {:>9} {:>6}", "category", "n", "accuracy", "F1");
    for (c, s) in &rep.per_category {
        println!("{:<8} {:>6} {:>9.3} {:>6.3}", c.to_string(), s.total, s.accuracy, s.f1);
    }
    let o = &rep.overall;
    println!("{:<8} {:>6} {:>9.3} {:>6.3}", "all", o.total, o.accuracy, o.f1);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen { kind, seed, out, count, objects } => gen(*kind, *seed, out, *count, *objects, &config(cli, None)?),
        Command::Ingest { file, dump_tracks, dump_facts, tracking } => {
            let (s, w) = session(cli, file, tracking)?;
            ingest(s, w, *dump_tracks, *dump_facts)
        }
        Command::Query { file, question, fol, tracking } => {
            let (s, w) = session(cli, file, tracking)?;
            query(s, w, question, *fol)
        }
        Command::Repl { file, tracking } => {
            let (s, w) = session(cli, file, tracking)?;
            repl(s, w)
        }
        Command::Eval { dir, report, export_context, track_mode } => {
            eval(dir, report, *export_context, &config(cli, *track_mode)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<StageError>().map(|s| s.exit_code()).unwrap_or(1);
            ExitCode::from(u8::try_from(code).unwrap_or(1))
        }
    }
}
