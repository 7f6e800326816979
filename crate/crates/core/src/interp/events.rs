//! Observable trace events, run status and steering commands.

use serde::{Deserialize, Serialize};

use crate::check::Diagnostic;
use crate::model::Ident;
use crate::runtime::InstanceId;

/// One entry of a run's append-only trace. `seq` starts at 1 and increases by one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl TraceEvent {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "camelCase")]
pub enum EventKind {
    #[serde(rename_all = "camelCase")]
    EnterGraph { graph_id: Ident, instance: InstanceId },
    #[serde(rename_all = "camelCase")]
    ExecActivity { node_id: Ident, activity_id: Ident, branch: Ident },
    #[serde(rename_all = "camelCase")]
    ExitGraph { graph_id: Ident, instance: InstanceId, branch: Ident },
    #[serde(rename_all = "camelCase")]
    InstanceCreated { node_id: Ident, graph_id: Ident, instance: InstanceId, var: Ident },
    #[serde(rename_all = "camelCase")]
    Paused { node_id: Ident, reason: PauseReason },
    Resumed {},
    #[serde(rename_all = "camelCase")]
    VariantSelected { var: Ident, graph_id: Ident, instance: InstanceId },
    #[serde(rename_all = "camelCase")]
    EditApplied { var: Ident, interface_id: Ident, new_graph_id: Ident, instance: InstanceId },
    #[serde(rename_all = "camelCase")]
    Synthesized { site: String, activities: Vec<Ident>, graph_id: Ident },
    RunFinished { branch: Ident },
    RunAborted { error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum PauseReason {
    /// An interactive activity is about to run.
    #[serde(rename_all = "camelCase")]
    Interactive { activity_id: Ident },
    /// An interface-typed instance variable is about to be read while unassigned.
    #[serde(rename_all = "camelCase")]
    AwaitingSelection { var: Ident, interface_id: Ident },
    /// A loose edge could not be completed; a variant may be selected for `site`.
    #[serde(rename_all = "camelCase")]
    SynthesisFailed { site: String, interface_id: Ident, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "camelCase")]
pub enum RunStatus {
    Running {},
    #[serde(rename_all = "camelCase")]
    Paused { node_id: Ident, reason: PauseReason },
    Finished { branch: Ident, outputs: Vec<serde_json::Value> },
    Aborted { error: String },
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Running {} => "running",
            RunStatus::Paused { .. } => "paused",
            RunStatus::Finished { .. } => "finished",
            RunStatus::Aborted { .. } => "aborted",
        }
    }

    pub fn is_running(&self) -> bool {
        matches!(self, RunStatus::Running {})
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, RunStatus::Finished { .. } | RunStatus::Aborted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "camelCase", deny_unknown_fields)]
pub enum SteeringCommand {
    Resume {},
    #[serde(rename_all = "camelCase")]
    SelectVariant { var: Ident, graph_id: Ident },
    #[serde(rename_all = "camelCase")]
    ApplyEdit { var: Ident, replacement_graph_id: Ident },
    Abort {},
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum RejectKind {
    WrongState,
    UnknownGraph,
    UnknownVar,
    Nonconforming,
}

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[serde(rename_all = "camelCase")]
#[error("{reason}")]
pub struct CommandRejected {
    pub kind: RejectKind,
    pub reason: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
}

impl CommandRejected {
    pub fn new(kind: RejectKind, reason: impl Into<String>) -> Self {
        CommandRejected { kind, reason: reason.into(), diagnostics: Vec::new() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_formats() {
        let e = TraceEvent {
            seq: 3,
            kind: EventKind::ExecActivity { node_id: "n".into(), activity_id: "a".into(), branch: "yes".into() },
        };
        assert_eq!(e.to_json_line(), r#"{"seq":3,"event":"execActivity","nodeId":"n","activityId":"a","branch":"yes"}"#);
        let back: TraceEvent = serde_json::from_str(&e.to_json_line()).unwrap();
        assert_eq!(back, e);

        let c: SteeringCommand =
            serde_json::from_str(r#"{"command":"selectVariant","var":"paymentProcess","graphId":"InvoicePayment"}"#).unwrap();
        assert_eq!(c, SteeringCommand::SelectVariant { var: "paymentProcess".into(), graph_id: "InvoicePayment".into() });
        assert!(serde_json::from_str::<SteeringCommand>(r#"{"command":"resume","x":1}"#).is_err());
    }
}
