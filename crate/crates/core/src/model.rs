//! Process-graph data model: semantic types, signatures, bindings, nodes,
//! service logic graphs and interface graphs.
//!
//! The serde representation of every type here is the on-disk library
//! document format. Unknown keys are rejected everywhere.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::synth::SynthesisSpec;

/// Identifier of a graph, activity, node, context variable or domain type.
pub type Ident = String;

/// Whether a graph type names an interface graph or an executable service graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GraphKind {
    Interface,
    Service,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphKind::Interface => f.write_str("interface"),
            GraphKind::Service => f.write_str("service"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrimitiveKind {
    String,
    Int,
    Bool,
    Real,
    FileHandle,
    Enum { name: Ident, literals: Vec<String> },
}

/// The type lattice shared by data and processes.
///
/// Domain types are nominal; their supertype lives in the library's domain
/// declarations, not in the reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawType", into = "RawType")]
pub enum SemanticType {
    Primitive(PrimitiveKind),
    Domain { name: Ident },
    Graph { graph_id: Ident, kind: GraphKind },
}

impl SemanticType {
    pub fn bool() -> Self {
        SemanticType::Primitive(PrimitiveKind::Bool)
    }

    pub fn string() -> Self {
        SemanticType::Primitive(PrimitiveKind::String)
    }

    pub fn int() -> Self {
        SemanticType::Primitive(PrimitiveKind::Int)
    }

    pub fn domain(name: impl Into<Ident>) -> Self {
        SemanticType::Domain { name: name.into() }
    }

    pub fn interface(id: impl Into<Ident>) -> Self {
        SemanticType::Graph { graph_id: id.into(), kind: GraphKind::Interface }
    }

    pub fn service(id: impl Into<Ident>) -> Self {
        SemanticType::Graph { graph_id: id.into(), kind: GraphKind::Service }
    }

    pub fn is_primitive(&self) -> bool {
        matches!(self, SemanticType::Primitive(_))
    }

    pub fn as_interface(&self) -> Option<&str> {
        match self {
            SemanticType::Graph { graph_id, kind: GraphKind::Interface } => Some(graph_id),
            _ => None,
        }
    }
}

impl fmt::Display for SemanticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemanticType::Primitive(p) => match p {
                PrimitiveKind::String => f.write_str("string"),
                PrimitiveKind::Int => f.write_str("int"),
                PrimitiveKind::Bool => f.write_str("bool"),
                PrimitiveKind::Real => f.write_str("real"),
                PrimitiveKind::FileHandle => f.write_str("fileHandle"),
                PrimitiveKind::Enum { name, .. } => write!(f, "enum {name}"),
            },
            SemanticType::Domain { name } => write!(f, "{name}"),
            SemanticType::Graph { graph_id, kind } => write!(f, "{kind} graph {graph_id}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
enum RawType {
    String {},
    Int {},
    Bool {},
    Real {},
    FileHandle {},
    Enum { name: Ident, literals: Vec<String> },
    Domain { name: Ident },
    Graph {
        #[serde(rename = "graphId")]
        graph_id: Ident,
        kind: GraphKind,
    },
}

impl TryFrom<RawType> for SemanticType {
    type Error = String;

    fn try_from(raw: RawType) -> Result<Self, Self::Error> {
        Ok(match raw {
            RawType::String {} => SemanticType::Primitive(PrimitiveKind::String),
            RawType::Int {} => SemanticType::Primitive(PrimitiveKind::Int),
            RawType::Bool {} => SemanticType::Primitive(PrimitiveKind::Bool),
            RawType::Real {} => SemanticType::Primitive(PrimitiveKind::Real),
            RawType::FileHandle {} => SemanticType::Primitive(PrimitiveKind::FileHandle),
            RawType::Enum { name, literals } => {
                if literals.is_empty() {
                    return Err(format!("enum {name} declares no literals"));
                }
                SemanticType::Primitive(PrimitiveKind::Enum { name, literals })
            }
            RawType::Domain { name } => SemanticType::Domain { name },
            RawType::Graph { graph_id, kind } => SemanticType::Graph { graph_id, kind },
        })
    }
}

impl From<SemanticType> for RawType {
    fn from(t: SemanticType) -> Self {
        match t {
            SemanticType::Primitive(p) => match p {
                PrimitiveKind::String => RawType::String {},
                PrimitiveKind::Int => RawType::Int {},
                PrimitiveKind::Bool => RawType::Bool {},
                PrimitiveKind::Real => RawType::Real {},
                PrimitiveKind::FileHandle => RawType::FileHandle {},
                PrimitiveKind::Enum { name, literals } => RawType::Enum { name, literals },
            },
            SemanticType::Domain { name } => RawType::Domain { name },
            SemanticType::Graph { graph_id, kind } => RawType::Graph { graph_id, kind },
        }
    }
}

/// A named, typed parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Param {
    pub name: Ident,
    #[serde(rename = "type")]
    pub ty: SemanticType,
}

impl Param {
    pub fn new(name: impl Into<Ident>, ty: SemanticType) -> Self {
        Param { name: name.into(), ty }
    }
}

/// Inputs plus one output list per outgoing branch.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Signature {
    #[serde(default)]
    pub inputs: Vec<Param>,
    pub branches: BTreeMap<Ident, Vec<Param>>,
}

impl Signature {
    pub fn branch_names(&self) -> BTreeSet<&str> {
        self.branches.keys().map(String::as_str).collect()
    }

    pub fn outputs(&self, branch: &str) -> Option<&[Param]> {
        self.branches.get(branch).map(Vec::as_slice)
    }

    /// Name-uniqueness and non-emptiness problems, as messages.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.branches.is_empty() {
            out.push("signature declares no branches".to_string());
        }
        let mut seen = BTreeSet::new();
        for p in &self.inputs {
            if !seen.insert(&p.name) {
                out.push(format!("duplicate input name `{}`", p.name));
            }
        }
        for (branch, outputs) in &self.branches {
            let mut seen = BTreeSet::new();
            for p in outputs {
                if !seen.insert(&p.name) {
                    out.push(format!("duplicate output name `{}` on branch `{branch}`", p.name));
                }
            }
        }
        out
    }
}

/// Where an input value comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum Binding {
    /// A modeling-time literal; legal only for primitive parameter types.
    Static { literal: serde_json::Value },
    FromContext { var: Ident },
}

impl Binding {
    pub fn var(name: impl Into<Ident>) -> Self {
        Binding::FromContext { var: name.into() }
    }

    pub fn literal(v: impl Into<serde_json::Value>) -> Self {
        Binding::Static { literal: v.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ActivityDescriptor {
    pub id: Ident,
    pub signature: Signature,
    /// Present for virtual activities dispatched on a service instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_type: Option<SemanticType>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub taxonomy_tags: BTreeSet<Ident>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub interactive: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub docs: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum InstanceSource {
    FromContext { var: Ident },
    /// A new process instance per execution; service graph types only.
    Fresh {},
}

/// Output variables per branch, matched positionally to the branch outputs.
/// A branch that is absent discards its outputs.
pub type OutputTargets = BTreeMap<Ident, Vec<Ident>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum Node {
    Start {},
    End {
        branch: Ident,
        #[serde(default)]
        outputs: Vec<Binding>,
    },
    #[serde(rename_all = "camelCase")]
    Atomic {
        activity_id: Ident,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        instance_var: Option<Ident>,
        #[serde(default)]
        inputs: Vec<Binding>,
        #[serde(default)]
        output_targets: OutputTargets,
    },
    #[serde(rename_all = "camelCase")]
    GraphSib {
        graph_type: SemanticType,
        instance_source: InstanceSource,
        #[serde(default)]
        inputs: Vec<Binding>,
        #[serde(default)]
        output_targets: OutputTargets,
    },
    #[serde(rename_all = "camelCase")]
    Constructor {
        service_graph_id: Ident,
        #[serde(default)]
        init_inputs: Vec<Binding>,
        target_var: Ident,
    },
}

/// The single branch leaving a start node.
pub const START_BRANCH: &str = "start";
/// The single branch leaving a constructor node.
pub const CREATED_BRANCH: &str = "created";

impl Node {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Node::Start {} => "start",
            Node::End { .. } => "end",
            Node::Atomic { .. } => "atomic",
            Node::GraphSib { .. } => "graphSib",
            Node::Constructor { .. } => "constructor",
        }
    }

    /// Every binding the node evaluates, in document order.
    pub fn bindings(&self) -> Vec<&Binding> {
        match self {
            Node::Start {} => Vec::new(),
            Node::End { outputs, .. } => outputs.iter().collect(),
            Node::Atomic { inputs, .. } | Node::GraphSib { inputs, .. } => inputs.iter().collect(),
            Node::Constructor { init_inputs, .. } => init_inputs.iter().collect(),
        }
    }

    pub fn bindings_mut(&mut self) -> Vec<&mut Binding> {
        match self {
            Node::Start {} => Vec::new(),
            Node::End { outputs, .. } => outputs.iter_mut().collect(),
            Node::Atomic { inputs, .. } | Node::GraphSib { inputs, .. } => inputs.iter_mut().collect(),
            Node::Constructor { init_inputs, .. } => init_inputs.iter_mut().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Edge {
    pub src_node_id: Ident,
    pub branch: Ident,
    pub dst_node_id: Ident,
}

impl Edge {
    pub fn new(src: impl Into<Ident>, branch: impl Into<Ident>, dst: impl Into<Ident>) -> Self {
        Edge { src_node_id: src.into(), branch: branch.into(), dst_node_id: dst.into() }
    }
}

/// An underspecified branch, completed at runtime by synthesis.
///
/// The completion is invoked like an interface-typed graph SIB: `inputs` feed
/// the synthesized graph, `output_targets` receive its outputs, and `next`
/// maps each branch of the spec's interface to the successor node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LooseEdge {
    pub src_node_id: Ident,
    pub branch: Ident,
    pub spec: SynthesisSpec,
    #[serde(default)]
    pub inputs: Vec<Binding>,
    #[serde(default)]
    pub output_targets: OutputTargets,
    pub next: BTreeMap<Ident, Ident>,
}

/// An executable service logic graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Slg {
    pub id: Ident,
    pub signature: Signature,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implements_id: Option<Ident>,
    #[serde(default)]
    pub context_decls: BTreeMap<Ident, SemanticType>,
    pub nodes: BTreeMap<Ident, Node>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loose_edges: Vec<LooseEdge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icon: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub docs: String,
}

/// Where control goes after a node leaves on a branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Successor<'a> {
    Node(&'a str),
    Loose(&'a LooseEdge),
}

impl Slg {
    pub fn start_node(&self) -> Option<&str> {
        self.nodes
            .iter()
            .find(|(_, n)| matches!(n, Node::Start {}))
            .map(|(id, _)| id.as_str())
    }

    pub fn successor(&self, node: &str, branch: &str) -> Option<Successor<'_>> {
        if let Some(e) = self.edges.iter().find(|e| e.src_node_id == node && e.branch == branch) {
            return Some(Successor::Node(&e.dst_node_id));
        }
        self.loose_edge(node, branch).map(Successor::Loose)
    }

    pub fn loose_edge(&self, node: &str, branch: &str) -> Option<&LooseEdge> {
        self.loose_edges.iter().find(|l| l.src_node_id == node && l.branch == branch)
    }

    /// Graph ids this graph invokes or constructs directly.
    pub fn referenced_graphs(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for node in self.nodes.values() {
            match node {
                Node::GraphSib { graph_type: SemanticType::Graph { graph_id, .. }, .. } => {
                    out.insert(graph_id.as_str());
                }
                Node::Constructor { service_graph_id, .. } => {
                    out.insert(service_graph_id.as_str());
                }
                _ => {}
            }
        }
        for l in &self.loose_edges {
            out.insert(l.spec.interface_id.as_str());
        }
        out
    }
}

/// A signature-only graph type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct InterfaceGraph {
    pub id: Ident,
    pub signature: Signature,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub docs: String,
}

/// Declaration of a nominal domain type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DomainDecl {
    pub name: Ident,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supertype: Option<Ident>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub docs: String,
}
