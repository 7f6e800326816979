//! Shared test helpers: an independent finite-trace evaluator, trace shape
//! checks and engine fixtures.
#![allow(dead_code)]

use std::sync::Arc;

use hopm::interp::{ActivityRegistry, Engine, EventKind, PauseReason, Run, RunStatus, SteeringCommand, TraceEvent};
use hopm::logic::{Formula, Letter};
use hopm::ocs::{self, register_stub_activities, Fixtures};

/// Reference semantics over trace suffixes. Written from the textbook
/// definitions, not from the engine's evaluator: F is `true U f`, G is
/// `!F !f`, and `f WU g` is `(f U g) | G f`.
pub fn holds(f: &Formula, suffix: &[Letter]) -> bool {
    use Formula::*;
    assert!(!suffix.is_empty());
    match f {
        True => true,
        Atom(p) => suffix[0].contains(p),
        Not(g) => !holds(g, suffix),
        And(a, b) => holds(a, suffix) && holds(b, suffix),
        Or(a, b) => holds(a, suffix) || holds(b, suffix),
        Next(g) => suffix.len() > 1 && holds(g, &suffix[1..]),
        Finally(g) => holds(&Formula::until(Formula::True, (**g).clone()), suffix),
        Globally(g) => !holds(&Formula::finally(Formula::not((**g).clone())), suffix),
        Until(a, b) => (0..suffix.len()).any(|k| holds(b, &suffix[k..]) && (0..k).all(|j| holds(a, &suffix[j..]))),
        WeakUntil(a, b) => {
            holds(&Formula::until((**a).clone(), (**b).clone()), suffix)
                || holds(&Formula::globally((**a).clone()), suffix)
        }
    }
}

/// Enter/exit events pair up like brackets, and a finished trace closes them all.
pub fn balanced(trace: &[TraceEvent]) -> Result<(), String> {
    let mut stack: Vec<(String, u64)> = Vec::new();
    for e in trace {
        match &e.kind {
            EventKind::EnterGraph { graph_id, instance } => stack.push((graph_id.clone(), *instance)),
            EventKind::ExitGraph { graph_id, instance, .. } => match stack.pop() {
                Some(top) if top == (graph_id.clone(), *instance) => {}
                other => return Err(format!("seq {}: exit of {graph_id}#{instance} while top is {other:?}", e.seq)),
            },
            EventKind::RunFinished { .. } if !stack.is_empty() => {
                return Err(format!("seq {}: finished with open frames {stack:?}", e.seq))
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn engine_with(fixtures: Fixtures) -> Engine {
    let mut r = ActivityRegistry::new();
    register_stub_activities(&mut r, fixtures).unwrap();
    Engine::new(Arc::new(ocs::library()), Arc::new(r))
}

pub fn engine() -> Engine {
    engine_with(Fixtures::default_set())
}

/// Feeds `script` at pauses; interactive pauses with no script left are resumed.
pub fn drive(run: &mut Run, script: &[SteeringCommand]) {
    let mut script = script.iter().cloned();
    loop {
        run.run_until_blocked(100_000);
        let RunStatus::Paused { reason, .. } = run.status().clone() else { return };
        let cmd = match script.next() {
            Some(c) => c,
            None if matches!(reason, PauseReason::Interactive { .. }) => SteeringCommand::Resume {},
            None => return,
        };
        run.submit(cmd).expect("scripted command accepted");
    }
}

pub fn read_script(name: &str) -> Vec<SteeringCommand> {
    let path = format!("{}/corpus/ocs/scripts/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn jsonl(trace: &[TraceEvent]) -> String {
    trace.iter().map(|e| e.to_json_line() + "\n").collect()
}
