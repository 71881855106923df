//! The `scm` command line.
//!
//! Exit status depends only on the kind of outcome: 0 success, 1 violations
//! or a failed query, 2 usage error, 3 unreadable or unparsable input.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use scm_core::document::{envelope, parse_frames, parse_metamodel, parse_model, to_canonical_string};
use scm_core::temporal::event;
use scm_core::{
    check_temporal_consistency, classify_anchoring_level, is_at, is_in, object_distance, resolve_scene,
    serialize_document, shortest_path, validate_metamodel, validate_model, when, within_radius, Context,
    Document, EdgeWeight, FrameTree, Metamodel, ModelInstance, Scene,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "scm", version, about = "Spatial conceptual modeling engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a metamodel against the metamodeling rules.
    ValidateMetamodel { metamodel: PathBuf },
    /// Check a model against its metamodel.
    ValidateModel {
        model: PathBuf,
        #[arg(long)]
        metamodel: PathBuf,
    },
    /// Report the anchoring level of a model.
    ClassifyLevel {
        model: PathBuf,
        #[arg(long)]
        metamodel: PathBuf,
    },
    /// Answer a spatial or temporal question about a model.
    Query {
        model: PathBuf,
        #[arg(long)]
        metamodel: PathBuf,
        #[arg(long, value_enum)]
        op: Op,
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        b: Option<String>,
        /// Proximity tolerance in meters for is-at.
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
        /// Search radius in meters around object `a`.
        #[arg(long)]
        radius: Option<f64>,
        /// Edge attribute holding the cost, or `euclidean`.
        #[arg(long, default_value = "euclidean")]
        weight: String,
        /// Frame tree; without it only `world` is known.
        #[arg(long)]
        frames: Option<PathBuf>,
    },
    /// Place every anchored element in world coordinates.
    ResolveScene {
        model: PathBuf,
        #[arg(long)]
        metamodel: PathBuf,
        #[arg(long)]
        context: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        /// Output file; the scene goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Op {
    IsAt,
    IsIn,
    Distance,
    WithinRadius,
    ShortestPath,
    When,
}

impl Op {
    fn name(self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Failure {
    status: i32,
    message: String,
}

impl Failure {
    fn parse(path: &Path, message: impl std::fmt::Display) -> Self {
        Failure { status: EXIT_PARSE, message: format!("{}: {message}", path.display()) }
    }

    fn usage(message: impl Into<String>) -> Self {
        Failure { status: EXIT_USAGE, message: message.into() }
    }

    fn failed(message: impl std::fmt::Display) -> Self {
        Failure { status: EXIT_VIOLATIONS, message: message.to_string() }
    }
}

type Run = Result<(i32, String), Failure>;

/// Run one invocation. `argv[0]` is the program name.
pub fn run_command<I, S>(argv: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Output { status: EXIT_USAGE, stdout: String::new(), stderr: text }
            } else {
                Output { status: EXIT_OK, stdout: text, stderr: String::new() }
            };
        }
    };
    match dispatch(cli.command) {
        Ok((status, stdout)) => Output { status, stdout, stderr: String::new() },
        Err(f) => Output { status: f.status, stdout: String::new(), stderr: format!("{}\n", f.message) },
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::parse(path, e))
}

fn load_metamodel(path: &Path) -> Result<Metamodel, Failure> {
    parse_metamodel(&read(path)?).map_err(|e| Failure::parse(path, e))
}

fn load_model(path: &Path) -> Result<ModelInstance, Failure> {
    parse_model(&read(path)?).map_err(|e| Failure::parse(path, e))
}

fn load_frames(path: Option<&Path>) -> Result<FrameTree, Failure> {
    match path {
        Some(p) => parse_frames(&read(p)?).map_err(|e| Failure::parse(p, e)),
        None => Ok(FrameTree::new()),
    }
}

fn load_context(path: &Path) -> Result<Context, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::parse(path, e))
}

fn report(payload: Json, clean: bool) -> Run {
    let status = if clean { EXIT_OK } else { EXIT_VIOLATIONS };
    Ok((status, to_canonical_string(&envelope("report", &payload))))
}

fn result(payload: Json) -> Run {
    Ok((EXIT_OK, to_canonical_string(&envelope("result", &payload))))
}

/// Both models must conform before anything else is computed.
fn checked(mm_path: &Path, model_path: &Path) -> Result<Result<(Metamodel, ModelInstance), Run>, Failure> {
    let mm = load_metamodel(mm_path)?;
    let model = load_model(model_path)?;
    let mm_violations = validate_metamodel(&mm);
    if !mm_violations.is_empty() {
        return Ok(Err(report(json!({ "metamodel": mm.id, "violations": mm_violations }), false)));
    }
    let violations = validate_model(&model, &mm).map_err(Failure::failed)?;
    if !violations.is_empty() {
        return Ok(Err(report(json!({ "model": model.id, "violations": violations }), false)));
    }
    Ok(Ok((mm, model)))
}

fn dispatch(command: Command) -> Run {
    match command {
        Command::ValidateMetamodel { metamodel } => {
            let mm = load_metamodel(&metamodel)?;
            let violations = validate_metamodel(&mm);
            report(json!({ "metamodel": mm.id, "violations": violations }), violations.is_empty())
        }
        Command::ValidateModel { model, metamodel } => {
            let (mm, model) = match checked(&metamodel, &model)? {
                Ok(pair) => pair,
                Err(run) => return run,
            };
            let temporal = check_temporal_consistency(&model, &mm).map_err(Failure::failed)?;
            report(json!({ "model": model.id, "violations": [], "temporal": temporal }), temporal.is_empty())
        }
        Command::ClassifyLevel { model, metamodel } => {
            let (mm, model) = match checked(&metamodel, &model)? {
                Ok(pair) => pair,
                Err(run) => return run,
            };
            let level = classify_anchoring_level(&model, &mm).map_err(Failure::failed)?;
            result(json!({ "model": model.id, "level": level as u8, "name": level.to_string() }))
        }
        Command::Query { model, metamodel, op, a, b, tol, radius, weight, frames } => {
            let tree = load_frames(frames.as_deref())?;
            let (mm, model) = match checked(&metamodel, &model)? {
                Ok(pair) => pair,
                Err(run) => return run,
            };
            let need = |v: &Option<String>, flag: &str| {
                v.clone().ok_or_else(|| Failure::usage(format!("--op {} requires --{flag}", op.name())))
            };
            let mut out = json!({ "op": op.name() });
            let fields = out.as_object_mut().expect("object literal");
            match op {
                Op::IsAt | Op::IsIn | Op::Distance => {
                    let (a, b) = (need(&a, "a")?, need(&b, "b")?);
                    let value = match op {
                        Op::IsAt => json!(is_at(&model, &tree, &a, &b, tol).map_err(Failure::failed)?),
                        Op::IsIn => json!(is_in(&model, &tree, &a, &b).map_err(Failure::failed)?),
                        _ => json!(object_distance(&model, &tree, &a, &b).map_err(Failure::failed)?),
                    };
                    fields.insert("a".into(), json!(a));
                    fields.insert("b".into(), json!(b));
                    fields.insert("value".into(), value);
                }
                Op::WithinRadius => {
                    let a = need(&a, "a")?;
                    let r = radius.ok_or_else(|| Failure::usage("--op within-radius requires --radius"))?;
                    let center = model
                        .require(&a)
                        .map_err(Failure::failed)?
                        .coordinate()
                        .ok_or_else(|| Failure::failed(format!("NO_POSITION: object {a} has no coordinate")))?;
                    let found = within_radius(&model, &tree, &center, r).map_err(Failure::failed)?;
                    fields.insert("a".into(), json!(a));
                    fields.insert("radius".into(), json!(r));
                    fields.insert("objects".into(), json!(found));
                }
                Op::ShortestPath => {
                    let (a, b) = (need(&a, "a")?, need(&b, "b")?);
                    let path = shortest_path(&model, &mm, &tree, &a, &b, &EdgeWeight::parse(&weight))
                        .map_err(Failure::failed)?;
                    fields.insert("a".into(), json!(a));
                    fields.insert("b".into(), json!(b));
                    fields.insert("weight".into(), json!(weight));
                    match path {
                        Some(p) => {
                            fields.insert("path".into(), json!(p.path));
                            fields.insert("length".into(), json!(p.length));
                        }
                        None => {
                            fields.insert("status".into(), json!("NO_PATH"));
                        }
                    }
                }
                Op::When => {
                    let a = need(&a, "a")?;
                    let ev = event(&model, &mm, &a).map_err(Failure::failed)?;
                    fields.insert("a".into(), json!(a));
                    fields.insert("start".into(), json!(when(&ev).map_err(Failure::failed)?));
                    fields.insert("duration".into(), json!(ev.duration));
                }
            }
            result(out)
        }
        Command::ResolveScene { model, metamodel, context, frames, out } => {
            let tree = load_frames(Some(&frames))?;
            let ctx = load_context(&context)?;
            let (mm, model) = match checked(&metamodel, &model)? {
                Ok(pair) => pair,
                Err(run) => return run,
            };
            let placements = resolve_scene(&model, &mm, &tree, &ctx).map_err(Failure::failed)?;
            let text = serialize_document(&Document::Scene(Scene { model: model.id.clone(), placements }));
            match out {
                Some(path) => {
                    std::fs::write(&path, &text)
                        .map_err(|e| Failure::failed(format!("{}: {e}", path.display())))?;
                    Ok((EXIT_OK, String::new()))
                }
                None => Ok((EXIT_OK, text)),
            }
        }
    }
}
