//! The interpreter: step-wise execution of service graphs with pause points
//! and runtime steering.

mod events;
mod overlay;
mod registry;
mod run;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use events::{CommandRejected, EventKind, PauseReason, RejectKind, RunStatus, SteeringCommand, TraceEvent};
pub use overlay::Overlay;
pub use registry::{Activity, ActivityCall, ActivityError, ActivityRegistry, Outcome, RegistryError};
pub use run::{FrameView, Run, RunError};

use crate::library::{Catalog, GraphLibrary};
use crate::runtime::Value;

/// Starts runs over one library with one set of activity implementations.
#[derive(Debug)]
pub struct Engine {
    lib: Arc<GraphLibrary>,
    registry: Arc<ActivityRegistry>,
    counter: AtomicU64,
}

impl Engine {
    pub fn new(lib: Arc<GraphLibrary>, registry: Arc<ActivityRegistry>) -> Self {
        Engine { lib, registry, counter: AtomicU64::new(0) }
    }

    pub fn library(&self) -> &Arc<GraphLibrary> {
        &self.lib
    }

    pub fn registry(&self) -> &Arc<ActivityRegistry> {
        &self.registry
    }

    /// Starts `graph_id` with ready-made values. Run ids are `run-1`, `run-2`, ...
    pub fn start(&self, graph_id: &str, inputs: Vec<Value>) -> Result<Run, RunError> {
        let n = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
        Run::start(format!("run-{n}"), self.lib.clone(), self.registry.clone(), graph_id, inputs)
    }

    /// Starts `graph_id` with inputs given as JSON, read against the graph's
    /// input types.
    pub fn start_json(&self, graph_id: &str, inputs: &[serde_json::Value]) -> Result<Run, RunError> {
        let g = self.lib.service(graph_id).ok_or_else(|| RunError::UnknownGraph(graph_id.to_string()))?;
        if inputs.len() != g.signature.inputs.len() {
            return Err(RunError::InputArity { graph: g.id.clone(), expected: g.signature.inputs.len(), found: inputs.len() });
        }
        let values = g
            .signature
            .inputs
            .iter()
            .zip(inputs)
            .map(|(p, v)| {
                Value::from_input_json(v, &p.ty).map_err(|found| RunError::InputType {
                    graph: g.id.clone(),
                    name: p.name.clone(),
                    expected: p.ty.to_string(),
                    found,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.start(graph_id, values)
    }
}
