//! Command-line entry points. Exit codes: 0 success, 1 validation failure,
//! 2 runtime abort, 3 usage error.

use std::collections::VecDeque;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::check::check_library;
use crate::dot::to_dot;
use crate::interp::{ActivityRegistry, Engine, PauseReason, RunStatus, SteeringCommand};
use crate::library::{Catalog, GraphLibrary};
use crate::ocs::{self, register_stub_activities, Fixtures};
use crate::service::{serve, AppState};
use crate::synth::{materialize, synthesize, SynthesisSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_ABORT: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

/// Per-invocation event budget for `run`.
const DEFAULT_MAX_EVENTS: usize = 100_000;

#[derive(Debug, Parser)]
#[command(name = "hopm", version, about = "Check, run, synthesize and serve higher-order process models")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and type-check a library; prints one JSON diagnostic per line.
    Check { lib: PathBuf },
    /// Execute a service graph headlessly and print its trace as JSON lines.
    Run {
        lib: PathBuf,
        graph_id: String,
        /// Graph input as `name=value`; values are JSON, or plain strings.
        #[arg(long = "input", value_name = "NAME=VALUE")]
        inputs: Vec<String>,
        /// JSON list of steering commands, consumed one per pause.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Fixture data for the bundled activity stubs.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_EVENTS)]
        max_events: usize,
    },
    /// Solve a synthesis spec and print the solution and materialized graph.
    Synth {
        spec: PathBuf,
        /// Library providing the interface and activities (defaults to the bundled example).
        #[arg(long)]
        lib: Option<PathBuf>,
        #[arg(long, default_value = "synthesized")]
        graph_id: String,
    },
    /// Print a service graph in DOT format.
    ExportDot { lib: PathBuf, graph_id: String },
    /// Serve the HTTP API.
    Serve {
        lib: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
}

/// Runs the CLI with explicit output streams and returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

struct Failure(i32, String);

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(EXIT_INVALID, msg.into())
}

fn io(e: std::io::Error) -> Failure {
    Failure(EXIT_ABORT, format!("write failed: {e}"))
}

fn load(path: &Path) -> Result<GraphLibrary, Failure> {
    GraphLibrary::load_path(path).map_err(|e| invalid(e.to_string()))
}

fn registry(fixtures: Option<&Path>) -> Result<ActivityRegistry, Failure> {
    let f = match fixtures {
        Some(p) => Fixtures::load(p).map_err(usage)?,
        None => Fixtures::default_set(),
    };
    let mut r = ActivityRegistry::new();
    register_stub_activities(&mut r, f).map_err(|e| invalid(e.to_string()))?;
    Ok(r)
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::Check { lib } => {
            let lib = match GraphLibrary::load_path(&lib) {
                Ok(lib) => lib,
                Err(errs) => {
                    for e in &errs.0 {
                        let line = serde_json::json!({ "kind": "load-error", "message": e.to_string() });
                        writeln!(out, "{line}").map_err(io)?;
                    }
                    return Ok(EXIT_INVALID);
                }
            };
            let diags = check_library(&lib);
            for d in &diags {
                writeln!(out, "{}", d.to_json_line()).map_err(io)?;
            }
            Ok(if diags.is_empty() { EXIT_OK } else { EXIT_INVALID })
        }
        Command::Run { lib, graph_id, inputs, script, fixtures, max_events } => {
            let lib = Arc::new(load(&lib)?);
            let g = lib.service(&graph_id).cloned().ok_or_else(|| invalid(format!("unknown service graph `{graph_id}`")))?;
            let mut values = vec![serde_json::Value::Null; g.signature.inputs.len()];
            let mut given = vec![false; values.len()];
            for arg in &inputs {
                let (name, raw) = arg.split_once('=').ok_or_else(|| usage(format!("--input `{arg}` is not name=value")))?;
                let pos = g
                    .signature
                    .inputs
                    .iter()
                    .position(|p| p.name == name)
                    .ok_or_else(|| usage(format!("`{graph_id}` has no input `{name}`")))?;
                values[pos] = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
                given[pos] = true;
            }
            if let Some(i) = given.iter().position(|g| !g) {
                return Err(usage(format!("missing --input {}=...", g.signature.inputs[i].name)));
            }
            let mut script: VecDeque<SteeringCommand> = match script {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
                    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
                }
                None => VecDeque::new(),
            };
            let engine = Engine::new(lib, Arc::new(registry(fixtures.as_deref())?));
            let mut run = match engine.start_json(&graph_id, &values) {
                Ok(run) => run,
                Err(e) if e.is_type_error() => return Err(invalid(e.to_string())),
                Err(e) => return Err(usage(e.to_string())),
            };
            for e in run.trace() {
                writeln!(out, "{}", e.to_json_line()).map_err(io)?;
            }
            let mut printed = run.trace().len();
            loop {
                let budget = max_events.saturating_sub(printed);
                if budget == 0 {
                    let _ = run.submit(SteeringCommand::Abort {});
                    writeln!(err, "event budget of {max_events} exhausted").map_err(io)?;
                }
                if run.status().is_running() {
                    run.run_until_blocked(budget);
                }
                if let RunStatus::Paused { reason, .. } = run.status().clone() {
                    let cmd = match script.pop_front() {
                        Some(cmd) => cmd,
                        None if matches!(reason, PauseReason::Interactive { .. }) => SteeringCommand::Resume {},
                        None => {
                            writeln!(err, "steering script exhausted at a pause that needs a decision").map_err(io)?;
                            SteeringCommand::Abort {}
                        }
                    };
                    if let Err(rej) = run.submit(cmd) {
                        writeln!(err, "steering command rejected: {rej}").map_err(io)?;
                        for d in &rej.diagnostics {
                            writeln!(err, "  {d}").map_err(io)?;
                        }
                        let _ = run.submit(SteeringCommand::Abort {});
                    }
                }
                for e in &run.trace()[printed..] {
                    writeln!(out, "{}", e.to_json_line()).map_err(io)?;
                }
                printed = run.trace().len();
                match run.status() {
                    RunStatus::Finished { .. } => return Ok(EXIT_OK),
                    RunStatus::Aborted { error } => {
                        writeln!(err, "run aborted: {error}").map_err(io)?;
                        return Ok(EXIT_ABORT);
                    }
                    _ => {}
                }
            }
        }
        Command::Synth { spec, lib, graph_id } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| usage(format!("{}: {e}", spec.display())))?;
            let spec = SynthesisSpec::from_json(&text).map_err(|e| invalid(format!("{}: {e}", spec.display())))?;
            let lib = match lib {
                Some(p) => load(&p)?,
                None => ocs::library(),
            };
            let solution = synthesize(&spec).map_err(|e| invalid(e.to_string()))?;
            let graph = materialize(&solution.sequences[0], &spec, &lib, &graph_id).map_err(|e| invalid(e.to_string()))?;
            let doc = serde_json::json!({ "solution": solution, "graph": graph });
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serializable")).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::ExportDot { lib, graph_id } => {
            let lib = load(&lib)?;
            let g = lib.service(&graph_id).ok_or_else(|| invalid(format!("unknown service graph `{graph_id}`")))?;
            write!(out, "{}", to_dot(g)).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Serve { lib, port, host, snapshot_dir, fixtures } => {
            let lib = Arc::new(load(&lib)?);
            let engine = Engine::new(lib, Arc::new(registry(fixtures.as_deref())?));
            let state = AppState::new(engine, snapshot_dir);
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure(EXIT_ABORT, e.to_string()))?;
            rt.block_on(serve(state, (host, port).into())).map_err(|e| Failure(EXIT_ABORT, e.to_string()))?;
            Ok(EXIT_OK)
        }
    }
}
