//! The run state machine: one trace event per step, frames for nested
//! process instances, pause points and steering.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::check::{check_graph, check_swap, Diagnostic, DiagnosticKind};
use crate::interp::events::{CommandRejected, EventKind, PauseReason, RejectKind, RunStatus, SteeringCommand, TraceEvent};
use crate::interp::overlay::Overlay;
use crate::interp::registry::{ActivityCall, ActivityRegistry};
use crate::library::{recursion_cycles, validate_graph, Catalog, GraphLibrary};
use crate::model::{Binding, Ident, InstanceSource, LooseEdge, Node, SemanticType, Slg, Successor, START_BRANCH};
use crate::runtime::{instantiate, lock, ContextError, InstanceIds, PrimValue, ProcRef, ProcStatus, Value};
use crate::synth::{materialize, synthesize};
use crate::types::{conforms, is_subtype};

/// Nesting limit; acyclic libraries stay far below it.
const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("unknown service graph `{0}`")]
    UnknownGraph(Ident),
    #[error("graph `{graph}` does not type-check: {}", join(.diagnostics))]
    Unchecked { graph: Ident, diagnostics: Vec<Diagnostic> },
    #[error("`{graph}` expects {expected} inputs, got {found}")]
    InputArity { graph: Ident, expected: usize, found: usize },
    #[error("input `{name}` of `{graph}` expects {expected}, got {found}")]
    InputType { graph: Ident, name: Ident, expected: String, found: String },
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error("no implementation registered for activity `{activity}`{}", instance_note(.instance_type))]
    NoImplementation { activity: Ident, instance_type: Option<Ident> },
    #[error("activity `{activity}` failed: {message}")]
    ActivityFailed { activity: Ident, message: String },
    #[error("activity `{activity}` took undeclared branch `{branch}`")]
    UndeclaredBranch { activity: Ident, branch: Ident },
    #[error("activity `{activity}` returned {found} on branch `{branch}`, expected {expected}")]
    OutputMismatch { activity: Ident, branch: Ident, expected: String, found: String },
    #[error("instance of `{graph}` does not conform to {expected}")]
    Nonconforming { graph: Ident, expected: String },
    #[error("graph `{0}` is already executing in this run")]
    Recursion(Ident),
    #[error("malformed graph `{graph}`: {message}")]
    Structure { graph: Ident, message: String },
    #[error("synthesized graph rejected: {0}")]
    Synthesis(String),
    #[error("run is {0}")]
    NotRunning(&'static str),
}

fn join(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn instance_note(t: &Option<Ident>) -> String {
    t.as_ref().map(|t| format!(" on {t}")).unwrap_or_default()
}

impl RunError {
    /// Errors a checker-approved graph must never produce at runtime.
    pub fn is_type_error(&self) -> bool {
        matches!(
            self,
            RunError::Context(
                ContextError::TypeMismatch { .. }
                    | ContextError::UnassignedRead(_)
                    | ContextError::UndeclaredVar(_)
                    | ContextError::InputType { .. }
                    | ContextError::Arity { .. }
            ) | RunError::OutputMismatch { .. }
                | RunError::Nonconforming { .. }
                | RunError::InputArity { .. }
                | RunError::InputType { .. }
                | RunError::Unchecked { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Pc {
    Node(Ident),
    Loose { node: Ident, branch: Ident },
}

#[derive(Debug)]
struct Frame {
    instance: ProcRef,
    graph: Arc<Slg>,
    pc: Pc,
}

/// Where a steering command writes its instance.
enum Slot {
    Var { var: Ident, interface_id: Ident },
    Site { key: SiteKey, interface_id: Ident },
}

type SiteKey = (Ident, Ident, Ident);

/// A summary of one frame for status displays.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FrameView {
    pub graph_id: Ident,
    pub instance: u64,
    pub node_id: Ident,
    pub context: serde_json::Value,
}

/// One execution of a service graph.
pub struct Run {
    id: String,
    cat: Overlay,
    registry: Arc<ActivityRegistry>,
    ids: InstanceIds,
    frames: Vec<Frame>,
    trace: Vec<TraceEvent>,
    status: RunStatus,
    root: ProcRef,
    /// Set once the root frame returned; `RunFinished` is the next event.
    outcome: Option<(Ident, Vec<Value>)>,
    /// The interactive pause at the current node was acknowledged.
    cleared: bool,
    loose: BTreeMap<SiteKey, ProcRef>,
    synthesized: u64,
    checked: BTreeSet<Ident>,
    /// The engine error that aborted the run, if one did.
    cause: Option<RunError>,
}

impl std::fmt::Debug for Run {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Run").field("id", &self.id).field("status", &self.status).field("events", &self.trace.len()).finish()
    }
}

impl Run {
    /// Creates the root instance, delivers `inputs` at its start node and
    /// records the first `enterGraph` event. No activity runs yet.
    pub fn start(
        id: impl Into<String>,
        lib: Arc<GraphLibrary>,
        registry: Arc<ActivityRegistry>,
        graph_id: &str,
        inputs: Vec<Value>,
    ) -> Result<Run, RunError> {
        let cat = Overlay::new(lib);
        let g = cat.service(graph_id).cloned().ok_or_else(|| RunError::UnknownGraph(graph_id.to_string()))?;
        let diagnostics = check_graph(&g, &cat);
        if !diagnostics.is_empty() {
            return Err(RunError::Unchecked { graph: g.id.clone(), diagnostics });
        }
        check_inputs(&g, &inputs, &cat)?;
        let mut ids = InstanceIds::default();
        let root = instantiate(graph_id, Vec::new(), &cat, &mut ids)?;
        let mut run = Run {
            id: id.into(),
            cat,
            registry,
            ids,
            frames: Vec::new(),
            trace: Vec::new(),
            status: RunStatus::Running {},
            root: root.clone(),
            outcome: None,
            cleared: false,
            loose: BTreeMap::new(),
            synthesized: 0,
            checked: BTreeSet::from([g.id.clone()]),
            cause: None,
        };
        let ev = run.enter(root, inputs, None)?;
        run.emit(ev);
        Ok(run)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> &RunStatus {
        &self.status
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    /// Events with `seq > since`.
    pub fn trace_since(&self, since: u64) -> &[TraceEvent] {
        let from = self.trace.partition_point(|e| e.seq <= since);
        &self.trace[from..]
    }

    /// The error behind an abort; `None` for steering aborts and live runs.
    pub fn abort_cause(&self) -> Option<&RunError> {
        self.cause.as_ref()
    }

    pub fn root_instance(&self) -> &ProcRef {
        &self.root
    }

    pub fn catalog(&self) -> &Overlay {
        &self.cat
    }

    pub fn frames(&self) -> Vec<FrameView> {
        self.frames
            .iter()
            .map(|f| {
                let inst = lock(&f.instance);
                FrameView {
                    graph_id: f.graph.id.clone(),
                    instance: inst.id,
                    node_id: match &f.pc {
                        Pc::Node(n) => n.clone(),
                        Pc::Loose { node, branch } => format!("{node}#{branch}"),
                    },
                    context: inst.context.to_json(),
                }
            })
            .collect()
    }

    fn emit(&mut self, kind: EventKind) -> TraceEvent {
        let ev = TraceEvent { seq: self.trace.len() as u64 + 1, kind };
        self.trace.push(ev.clone());
        ev
    }

    /// Advances the run by exactly one event.
    pub fn step(&mut self) -> Result<TraceEvent, RunError> {
        if !self.status.is_running() {
            return Err(RunError::NotRunning(self.status.label()));
        }
        let kind = match self.micro_step() {
            Ok(kind) => kind,
            Err(e) => {
                let kind = self.abort_with(e.to_string());
                self.cause = Some(e);
                kind
            }
        };
        Ok(self.emit(kind))
    }

    /// Steps until the run pauses, finishes, aborts, or `limit` events were produced.
    pub fn run_until_blocked(&mut self, limit: usize) -> Vec<TraceEvent> {
        let mut out = Vec::new();
        while out.len() < limit && self.status.is_running() {
            match self.step() {
                Ok(e) => out.push(e),
                Err(_) => break,
            }
        }
        out
    }

    fn abort_with(&mut self, error: String) -> EventKind {
        for f in &self.frames {
            let _ = lock(&f.instance).set_status(ProcStatus::Aborted);
        }
        self.frames.clear();
        self.status = RunStatus::Aborted { error: error.clone() };
        EventKind::RunAborted { error }
    }

    fn pause(&mut self, node_id: Ident, reason: PauseReason) -> EventKind {
        for f in &self.frames {
            let _ = lock(&f.instance).set_status(ProcStatus::Paused);
        }
        self.status = RunStatus::Paused { node_id: node_id.clone(), reason: reason.clone() };
        EventKind::Paused { node_id, reason }
    }

    fn micro_step(&mut self) -> Result<EventKind, RunError> {
        if self.frames.is_empty() {
            let (branch, outputs) = self.outcome.take().ok_or(RunError::NotRunning("empty"))?;
            self.status = RunStatus::Finished { branch: branch.clone(), outputs: outputs.iter().map(Value::to_json).collect() };
            return Ok(EventKind::RunFinished { branch });
        }
        let top = self.frames.last().expect("nonempty");
        let graph = top.graph.clone();
        let pc = top.pc.clone();
        let ev = match pc {
            Pc::Node(node_id) => {
                let node = graph.nodes.get(&node_id).ok_or_else(|| RunError::Structure {
                    graph: graph.id.clone(),
                    message: format!("no node `{node_id}`"),
                })?;
                match node {
                    Node::Start {} => {
                        return Err(RunError::Structure { graph: graph.id.clone(), message: "re-entered start node".into() })
                    }
                    Node::End { branch, outputs } => self.exec_end(branch, outputs)?,
                    Node::Atomic { activity_id, instance_var, inputs, output_targets } => {
                        let desc = self.cat.activity(activity_id).cloned().ok_or_else(|| RunError::Structure {
                            graph: graph.id.clone(),
                            message: format!("unknown activity `{activity_id}`"),
                        })?;
                        if desc.interactive && !self.cleared {
                            return Ok(self.pause(node_id, PauseReason::Interactive { activity_id: activity_id.clone() }));
                        }
                        let inputs = self.eval_bindings(inputs, &desc.signature.inputs)?;
                        let instance = match instance_var {
                            Some(v) => Some(self.read(v)?),
                            None => None,
                        };
                        let (branch, outputs) = self.exec_atomic(&desc, inputs, instance)?;
                        let targets = output_targets.get(&branch).cloned().unwrap_or_default();
                        self.write_all(&targets, outputs)?;
                        self.advance(&node_id, &branch)?;
                        EventKind::ExecActivity { node_id, activity_id: activity_id.clone(), branch }
                    }
                    Node::GraphSib { graph_type, instance_source, inputs, .. } => {
                        let sig = match graph_type {
                            SemanticType::Graph { graph_id, kind } => self.cat.graph_signature(graph_id, *kind).cloned(),
                            _ => None,
                        }
                        .ok_or_else(|| RunError::Structure { graph: graph.id.clone(), message: format!("unresolved {graph_type}") })?;
                        let instance = match instance_source {
                            InstanceSource::Fresh {} => {
                                let SemanticType::Graph { graph_id, .. } = graph_type else { unreachable!() };
                                instantiate(graph_id, Vec::new(), &self.cat, &mut self.ids)?
                            }
                            InstanceSource::FromContext { var } => {
                                let ctx_has = lock(&self.frames.last().expect("nonempty").instance).context.is_assigned(var);
                                if !ctx_has {
                                    if let Some(i) = graph.context_decls.get(var).and_then(SemanticType::as_interface) {
                                        let reason = PauseReason::AwaitingSelection { var: var.clone(), interface_id: i.to_string() };
                                        return Ok(self.pause(node_id, reason));
                                    }
                                }
                                let v = self.read(var)?;
                                v.as_process().cloned().ok_or_else(|| RunError::Nonconforming {
                                    graph: v.type_label(),
                                    expected: graph_type.to_string(),
                                })?
                            }
                        };
                        let inputs = self.eval_bindings(inputs, &sig.inputs)?;
                        self.enter(instance, inputs, Some(graph_type))?
                    }
                    Node::Constructor { service_graph_id, init_inputs, target_var } => {
                        let target = self
                            .cat
                            .service(service_graph_id)
                            .cloned()
                            .ok_or_else(|| RunError::UnknownGraph(service_graph_id.clone()))?;
                        let values = if init_inputs.is_empty() {
                            Vec::new()
                        } else {
                            self.eval_bindings(init_inputs, &target.signature.inputs)?
                        };
                        let inst = instantiate(service_graph_id, values, &self.cat, &mut self.ids)?;
                        let instance = lock(&inst).id;
                        self.write(target_var, Value::Process(inst))?;
                        self.advance(&node_id, crate::model::CREATED_BRANCH)?;
                        EventKind::InstanceCreated {
                            node_id,
                            graph_id: service_graph_id.clone(),
                            instance,
                            var: target_var.clone(),
                        }
                    }
                }
            }
            Pc::Loose { node, branch } => {
                let edge = graph.loose_edge(&node, &branch).cloned().ok_or_else(|| RunError::Structure {
                    graph: graph.id.clone(),
                    message: format!("no loose edge at `{node}#{branch}`"),
                })?;
                let key = (graph.id.clone(), node.clone(), branch.clone());
                match self.loose.get(&key).cloned() {
                    Some(instance) => {
                        let iface = self.cat.interface(&edge.spec.interface_id).cloned().ok_or_else(|| {
                            RunError::Structure { graph: graph.id.clone(), message: "unknown interface".into() }
                        })?;
                        let inputs = self.eval_bindings(&edge.inputs, &iface.signature.inputs)?;
                        self.enter(instance, inputs, Some(&SemanticType::interface(iface.id.clone())))?
                    }
                    None => match self.resolve_loose_branch(&key, &edge) {
                        Ok(ev) => ev,
                        Err(paused) => return Ok(paused),
                    },
                }
            }
        };
        self.cleared = false;
        Ok(ev)
    }

    /// Synthesizes and instantiates the completion of a loose edge. A search
    /// without result pauses the run instead of failing it.
    fn resolve_loose_branch(&mut self, key: &SiteKey, edge: &LooseEdge) -> Result<EventKind, EventKind> {
        let site = format!("{}#{}", key.1, key.2);
        let sol = match synthesize(&edge.spec) {
            Ok(sol) => sol,
            Err(e) => {
                let reason = PauseReason::SynthesisFailed {
                    site: site.clone(),
                    interface_id: edge.spec.interface_id.clone(),
                    message: e.to_string(),
                };
                return Err(self.pause(site, reason));
            }
        };
        let seq = sol.sequences[0].clone();
        self.synthesized += 1;
        let graph_id = format!("synth-{}-{}", self.id, self.synthesized);
        let installed = materialize(&seq, &edge.spec, &self.cat, &graph_id)
            .map_err(|e| e.to_string())
            .and_then(|g| self.cat.insert(g).map_err(|id| format!("graph id `{id}` already taken")))
            .and_then(|g| instantiate(&g.id, Vec::new(), &self.cat, &mut self.ids).map_err(|e| e.to_string()));
        match installed {
            Ok(inst) => {
                self.loose.insert(key.clone(), inst);
                Ok(EventKind::Synthesized { site, activities: seq, graph_id })
            }
            Err(message) => {
                let e = RunError::Synthesis(message);
                let kind = self.abort_with(e.to_string());
                self.cause = Some(e);
                Err(kind)
            }
        }
    }

    fn exec_end(&mut self, branch: &Ident, outputs: &[Binding]) -> Result<EventKind, RunError> {
        let top = self.frames.last().expect("nonempty");
        let sig = top.graph.signature.branches.get(branch).cloned().ok_or_else(|| RunError::Structure {
            graph: top.graph.id.clone(),
            message: format!("end on undeclared branch `{branch}`"),
        })?;
        let values = self.eval_bindings(outputs, &sig)?;
        let frame = self.frames.pop().expect("nonempty");
        let (graph_id, instance) = {
            let mut inst = lock(&frame.instance);
            inst.set_status(ProcStatus::Finished(branch.clone()))?;
            (inst.graph_id.clone(), inst.id)
        };
        match self.frames.last() {
            None => self.outcome = Some((branch.clone(), values)),
            Some(parent) => {
                let (targets, next) = match &parent.pc {
                    Pc::Node(id) => match parent.graph.nodes.get(id) {
                        Some(Node::GraphSib { output_targets, .. }) => {
                            (output_targets.get(branch).cloned().unwrap_or_default(), None)
                        }
                        _ => {
                            return Err(RunError::Structure {
                                graph: parent.graph.id.clone(),
                                message: format!("`{id}` did not call a graph"),
                            })
                        }
                    },
                    Pc::Loose { node, branch: b } => {
                        let edge = parent.graph.loose_edge(node, b).expect("loose pc has an edge");
                        let next = edge.next.get(branch).cloned().ok_or_else(|| RunError::Structure {
                            graph: parent.graph.id.clone(),
                            message: format!("loose edge has no successor for `{branch}`"),
                        })?;
                        (edge.output_targets.get(branch).cloned().unwrap_or_default(), Some(next))
                    }
                };
                self.write_all(&targets, values)?;
                let parent = self.frames.last_mut().expect("nonempty");
                match (&parent.pc, next) {
                    (_, Some(next)) => parent.pc = Pc::Node(next),
                    (Pc::Node(id), None) => {
                        let id = id.clone();
                        self.advance(&id, branch)?;
                    }
                    (Pc::Loose { .. }, None) => unreachable!(),
                }
            }
        }
        Ok(EventKind::ExitGraph { graph_id, instance, branch: branch.clone() })
    }

    fn exec_atomic(
        &mut self,
        desc: &crate::model::ActivityDescriptor,
        inputs: Vec<Value>,
        instance: Option<Value>,
    ) -> Result<(Ident, Vec<Value>), RunError> {
        let instance_type = match &instance {
            Some(Value::Service(s)) => Some(lock(s).type_name.clone()),
            Some(Value::Domain(d)) => Some(d.type_name.clone()),
            _ => None,
        };
        if let (Some(bound), Some(v)) = (&desc.instance_type, &instance) {
            if !v.fits(bound, &self.cat) {
                return Err(RunError::Nonconforming { graph: v.type_label(), expected: bound.to_string() });
            }
        }
        let imp = self.registry.resolve(&desc.id, instance_type.as_deref(), &self.cat).ok_or_else(|| {
            RunError::NoImplementation { activity: desc.id.clone(), instance_type: instance_type.clone() }
        })?;
        let mut call = ActivityCall { activity_id: &desc.id, inputs, instance, cat: &self.cat, ids: &mut self.ids };
        let out = imp
            .execute(&mut call)
            .map_err(|e| RunError::ActivityFailed { activity: desc.id.clone(), message: e.0 })?;
        let params = desc.signature.branches.get(&out.branch).ok_or_else(|| RunError::UndeclaredBranch {
            activity: desc.id.clone(),
            branch: out.branch.clone(),
        })?;
        let fits = out.outputs.len() == params.len() && out.outputs.iter().zip(params).all(|(v, p)| v.fits(&p.ty, &self.cat));
        if !fits {
            return Err(RunError::OutputMismatch {
                activity: desc.id.clone(),
                branch: out.branch.clone(),
                expected: params.iter().map(|p| p.ty.to_string()).collect::<Vec<_>>().join(", "),
                found: out.outputs.iter().map(Value::type_label).collect::<Vec<_>>().join(", "),
            });
        }
        Ok((out.branch, out.outputs))
    }

    /// Concretization: pushes a frame for `instance` and delivers its inputs.
    fn enter(&mut self, instance: ProcRef, inputs: Vec<Value>, expected: Option<&SemanticType>) -> Result<EventKind, RunError> {
        let graph_id = lock(&instance).graph_id.clone();
        let g = self.cat.service(&graph_id).cloned().ok_or_else(|| RunError::UnknownGraph(graph_id.clone()))?;
        if let Some(expected) = expected {
            // Ad-hoc and synthesized graphs arrive after load time; re-check here.
            let ok = is_subtype(&SemanticType::service(g.id.clone()), expected, &self.cat)
                && expected.as_interface().and_then(|i| self.cat.interface(i)).is_none_or(|i| conforms(&g, i, &self.cat).is_ok());
            if !ok {
                return Err(RunError::Nonconforming { graph: g.id.clone(), expected: expected.to_string() });
            }
        }
        if !self.checked.contains(&g.id) {
            let diagnostics = check_graph(&g, &self.cat);
            if !diagnostics.is_empty() {
                return Err(RunError::Unchecked { graph: g.id.clone(), diagnostics });
            }
            self.checked.insert(g.id.clone());
        }
        if self.frames.iter().any(|f| f.graph.id == g.id || Arc::ptr_eq(&f.instance, &instance)) || self.frames.len() >= MAX_DEPTH {
            return Err(RunError::Recursion(g.id.clone()));
        }
        let inputs = {
            let mut inst = lock(&instance);
            let pending = std::mem::take(&mut inst.pending_inputs);
            // Call-site inputs win over values retained by a constructor.
            if inputs.is_empty() && !g.signature.inputs.is_empty() {
                pending
            } else {
                inputs
            }
        };
        check_inputs(&g, &inputs, &self.cat)?;
        let start = g.start_node().ok_or_else(|| RunError::Structure { graph: g.id.clone(), message: "no start node".into() })?;
        let id = {
            let mut inst = lock(&instance);
            inst.set_status(ProcStatus::Running)?;
            for (p, v) in g.signature.inputs.iter().zip(inputs) {
                inst.context.write(&p.name, v, &self.cat)?;
            }
            inst.id
        };
        let pc = match g.successor(start, START_BRANCH) {
            Some(Successor::Node(n)) => Pc::Node(n.to_string()),
            Some(Successor::Loose(l)) => Pc::Loose { node: l.src_node_id.clone(), branch: l.branch.clone() },
            None => return Err(RunError::Structure { graph: g.id.clone(), message: "start node has no successor".into() }),
        };
        self.frames.push(Frame { instance, graph: g.clone(), pc });
        Ok(EventKind::EnterGraph { graph_id: g.id.clone(), instance: id })
    }

    fn advance(&mut self, node: &str, branch: &str) -> Result<(), RunError> {
        let top = self.frames.last_mut().expect("nonempty");
        top.pc = match top.graph.successor(node, branch) {
            Some(Successor::Node(n)) => Pc::Node(n.to_string()),
            Some(Successor::Loose(l)) => Pc::Loose { node: l.src_node_id.clone(), branch: l.branch.clone() },
            None => {
                return Err(RunError::Structure {
                    graph: top.graph.id.clone(),
                    message: format!("`{node}` has no successor on `{branch}`"),
                })
            }
        };
        Ok(())
    }

    fn read(&self, var: &str) -> Result<Value, RunError> {
        let top = self.frames.last().expect("nonempty");
        Ok(lock(&top.instance).context.read(var)?)
    }

    fn write(&self, var: &str, v: Value) -> Result<(), RunError> {
        let top = self.frames.last().expect("nonempty");
        Ok(lock(&top.instance).context.write(var, v, &self.cat)?)
    }

    fn write_all(&self, targets: &[Ident], values: Vec<Value>) -> Result<(), RunError> {
        for (var, v) in targets.iter().zip(values) {
            self.write(var, v)?;
        }
        Ok(())
    }

    fn eval_bindings(&self, bindings: &[Binding], params: &[crate::model::Param]) -> Result<Vec<Value>, RunError> {
        bindings
            .iter()
            .zip(params)
            .map(|(b, p)| match b {
                Binding::Static { literal } => PrimValue::from_json(literal, &p.ty).map(Value::Prim).map_err(|e| {
                    RunError::Structure { graph: self.frames.last().map(|f| f.graph.id.clone()).unwrap_or_default(), message: e }
                }),
                Binding::FromContext { var } => self.read(var),
            })
            .collect()
    }

    /// Applies a steering command. Only a paused run accepts commands.
    pub fn submit(&mut self, cmd: SteeringCommand) -> Result<TraceEvent, CommandRejected> {
        let RunStatus::Paused { reason, .. } = self.status.clone() else {
            return Err(CommandRejected::new(
                RejectKind::WrongState,
                format!("run is {}; commands are accepted only while paused", self.status.label()),
            ));
        };
        let kind = match cmd {
            SteeringCommand::Resume {} => {
                if let PauseReason::AwaitingSelection { var, .. } = &reason {
                    let assigned = self.frames.last().is_some_and(|f| lock(&f.instance).context.is_assigned(var));
                    if !assigned {
                        return Err(CommandRejected::new(
                            RejectKind::WrongState,
                            format!("`{var}` is still unassigned; select a variant first"),
                        ));
                    }
                }
                for f in &self.frames {
                    let _ = lock(&f.instance).set_status(ProcStatus::Running);
                }
                self.status = RunStatus::Running {};
                self.cleared = matches!(reason, PauseReason::Interactive { .. });
                EventKind::Resumed {}
            }
            SteeringCommand::Abort {} => self.abort_with("aborted by steering command".into()),
            SteeringCommand::SelectVariant { var, graph_id } => {
                let (slot, instance) = self.install(&var, &graph_id, &reason)?;
                let _ = slot;
                EventKind::VariantSelected { var, graph_id, instance }
            }
            SteeringCommand::ApplyEdit { var, replacement_graph_id } => {
                let (slot, instance) = self.install(&var, &replacement_graph_id, &reason)?;
                let interface_id = match slot {
                    Slot::Var { interface_id, .. } | Slot::Site { interface_id, .. } => interface_id,
                };
                EventKind::EditApplied { var, interface_id, new_graph_id: replacement_graph_id, instance }
            }
        };
        Ok(self.emit(kind))
    }

    fn slot(&self, var: &str, reason: &PauseReason) -> Result<Slot, CommandRejected> {
        if let PauseReason::SynthesisFailed { site, interface_id, .. } = reason {
            if site == var {
                let top = self.frames.last().expect("paused runs have frames");
                let (node, branch) = site.split_once('#').expect("site labels are node#branch");
                return Ok(Slot::Site {
                    key: (top.graph.id.clone(), node.to_string(), branch.to_string()),
                    interface_id: interface_id.clone(),
                });
            }
        }
        let top = self.frames.last().expect("paused runs have frames");
        let declared = top
            .graph
            .context_decls
            .get(var)
            .ok_or_else(|| CommandRejected::new(RejectKind::UnknownVar, format!("`{var}` is not declared in `{}`", top.graph.id)))?;
        let interface_id = declared.as_interface().ok_or_else(|| {
            CommandRejected::new(RejectKind::UnknownVar, format!("`{var}` is {declared}, not an interface-typed variable"))
        })?;
        Ok(Slot::Var { var: var.to_string(), interface_id: interface_id.to_string() })
    }

    /// Instantiates `graph_id` into the slot named `var` after the swap check.
    fn install(&mut self, var: &str, graph_id: &str, reason: &PauseReason) -> Result<(Slot, u64), CommandRejected> {
        let slot = self.slot(var, reason)?;
        let interface_id = match &slot {
            Slot::Var { interface_id, .. } | Slot::Site { interface_id, .. } => interface_id.clone(),
        };
        let g = self
            .cat
            .service(graph_id)
            .cloned()
            .ok_or_else(|| CommandRejected::new(RejectKind::UnknownGraph, format!("unknown service graph `{graph_id}`")))?;
        if let Err(diagnostics) = check_swap(&interface_id, &g, &self.cat) {
            return Err(CommandRejected {
                kind: RejectKind::Nonconforming,
                reason: format!("`{graph_id}` cannot stand in for `{interface_id}`"),
                diagnostics,
            });
        }
        let inst = instantiate(graph_id, Vec::new(), &self.cat, &mut self.ids)
            .map_err(|e| CommandRejected::new(RejectKind::UnknownGraph, e.to_string()))?;
        let id = lock(&inst).id;
        match &slot {
            Slot::Var { var, .. } => {
                let top = self.frames.last().expect("paused runs have frames");
                lock(&top.instance)
                    .context
                    .write(var, Value::Process(inst), &self.cat)
                    .map_err(|e| CommandRejected::new(RejectKind::Nonconforming, e.to_string()))?;
            }
            Slot::Site { key, .. } => {
                self.loose.insert(key.clone(), inst);
            }
        }
        self.checked.insert(g.id.clone());
        Ok((slot, id))
    }

    /// Adds an ad-hoc graph to this run's overlay. It must implement an
    /// interface, validate structurally, type-check and conform.
    pub fn add_graph(&mut self, g: Slg) -> Result<Arc<Slg>, Vec<Diagnostic>> {
        let diag = |kind, message: String| Diagnostic { graph_id: g.id.clone(), node_id: None, kind, message };
        let Some(interface_id) = g.implements_id.clone() else {
            return Err(vec![diag(DiagnosticKind::NotImplementing, "ad-hoc graphs must declare implementsId".into())]);
        };
        if self.cat.contains(&g.id) {
            return Err(vec![diag(DiagnosticKind::Structural, format!("graph id `{}` is already taken", g.id))]);
        }
        check_swap(&interface_id, &g, &self.cat)?;
        let mut probe = self.cat.clone();
        probe.insert(g.clone()).expect("id checked above");
        let mut errs: Vec<Diagnostic> = validate_graph(&g, &probe)
            .into_iter()
            .chain(recursion_cycles(&probe))
            .map(|e| diag(DiagnosticKind::Structural, e.to_string()))
            .collect();
        if !errs.is_empty() {
            errs.sort();
            return Err(errs);
        }
        self.cat = probe;
        Ok(self.cat.service(&g.id).cloned().expect("just inserted"))
    }
}

fn check_inputs(g: &Slg, inputs: &[Value], cat: &dyn Catalog) -> Result<(), RunError> {
    if inputs.len() != g.signature.inputs.len() {
        return Err(RunError::InputArity { graph: g.id.clone(), expected: g.signature.inputs.len(), found: inputs.len() });
    }
    for (v, p) in inputs.iter().zip(&g.signature.inputs) {
        if !v.fits(&p.ty, cat) {
            return Err(RunError::InputType {
                graph: g.id.clone(),
                name: p.name.clone(),
                expected: p.ty.to_string(),
                found: v.type_label(),
            });
        }
    }
    Ok(())
}
