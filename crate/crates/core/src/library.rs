//! Graph libraries: loading, merging, structural validation, and the
//! [`Catalog`] lookup trait shared by the checker and the interpreter.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ActivityDescriptor, DomainDecl, GraphKind, Ident, InstanceSource, InterfaceGraph, Node, OutputTargets,
    Param, SemanticType, Signature, Slg, CREATED_BRANCH, START_BRANCH,
};
use crate::types::{domain_chain, ensure_resolves};

/// Read access to graphs, activities and domain types.
///
/// Implemented by [`GraphLibrary`] and by run-scoped overlays that layer
/// synthesized or uploaded graphs over a loaded library.
pub trait Catalog {
    fn interface(&self, id: &str) -> Option<&InterfaceGraph>;
    fn service(&self, id: &str) -> Option<&Arc<Slg>>;
    fn activity(&self, id: &str) -> Option<&ActivityDescriptor>;
    fn domain(&self, name: &str) -> Option<&DomainDecl>;
    /// Ids of every service graph visible through this catalog, sorted.
    fn service_ids(&self) -> Vec<Ident>;

    fn graph_signature(&self, id: &str, kind: GraphKind) -> Option<&Signature> {
        match kind {
            GraphKind::Interface => self.interface(id).map(|i| &i.signature),
            GraphKind::Service => self.service(id).map(|s| &s.signature),
        }
    }

    /// The underlying whole library, when this catalog is one.
    fn as_library(&self) -> Option<&GraphLibrary> {
        None
    }

    /// Service graphs declaring `implementsId = interface`, sorted by id.
    fn implementations(&self, interface: &str) -> Vec<Ident> {
        self.service_ids()
            .into_iter()
            .filter(|id| self.service(id).and_then(|g| g.implements_id.as_deref()) == Some(interface))
            .collect()
    }
}

/// The serialized form of a library (or of one fragment of a library
/// directory).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LibraryDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u64>,
    #[serde(default)]
    pub domain_types: Vec<DomainDecl>,
    #[serde(default)]
    pub activities: Vec<ActivityDescriptor>,
    #[serde(default)]
    pub interfaces: Vec<InterfaceGraph>,
    #[serde(default)]
    pub graphs: Vec<Slg>,
}

impl LibraryDocument {
    pub fn named(name: &str) -> Self {
        LibraryDocument { name: Some(name.to_string()), version: Some(1), ..Default::default() }
    }

    pub fn from_json(text: &str) -> Result<Self, LibraryError> {
        serde_json::from_str(text).map_err(|e| LibraryError::Parse { file: None, message: e.to_string() })
    }

    /// Appends another fragment. Duplicate ids survive the merge and are
    /// reported by validation.
    pub fn merge(&mut self, other: LibraryDocument) -> Result<(), LibraryError> {
        match (&self.name, other.name) {
            (None, n) => self.name = n,
            (Some(a), Some(b)) if *a != b => {
                return Err(LibraryError::Parse {
                    file: None,
                    message: format!("library fragments disagree on name: `{a}` vs `{b}`"),
                })
            }
            _ => {}
        }
        match (self.version, other.version) {
            (None, v) => self.version = v,
            (Some(a), Some(b)) if a != b => {
                return Err(LibraryError::Parse {
                    file: None,
                    message: format!("library fragments disagree on version: {a} vs {b}"),
                })
            }
            _ => {}
        }
        self.domain_types.extend(other.domain_types);
        self.activities.extend(other.activities);
        self.interfaces.extend(other.interfaces);
        self.graphs.extend(other.graphs);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LibraryError {
    #[error("parse error{}: {message}", file.as_ref().map(|s| format!(" in {s}")).unwrap_or_default())]
    Parse { file: Option<String>, message: String },
    #[error("duplicate id: {kind} `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("dangling reference: {location} refers to unknown {target}")]
    DanglingReference { location: String, target: String },
    #[error("recursion cycle: {}", cycle.join(" -> "))]
    RecursionCycle { cycle: Vec<String> },
    #[error("invalid structure in {location}: {message}")]
    Structure { location: String, message: String },
}

/// Every problem found while loading, not just the first.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct LoadErrors(pub Vec<LibraryError>);

impl fmt::Display for LoadErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} library error(s)", self.0.len())?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

/// A validated, immutable graph library.
#[derive(Debug, Clone)]
pub struct GraphLibrary {
    pub name: String,
    pub version: u64,
    interfaces: BTreeMap<Ident, InterfaceGraph>,
    services: BTreeMap<Ident, Arc<Slg>>,
    activities: BTreeMap<Ident, ActivityDescriptor>,
    domains: BTreeMap<Ident, DomainDecl>,
}

impl Catalog for GraphLibrary {
    fn interface(&self, id: &str) -> Option<&InterfaceGraph> {
        self.interfaces.get(id)
    }

    fn service(&self, id: &str) -> Option<&Arc<Slg>> {
        self.services.get(id)
    }

    fn activity(&self, id: &str) -> Option<&ActivityDescriptor> {
        self.activities.get(id)
    }

    fn domain(&self, name: &str) -> Option<&DomainDecl> {
        self.domains.get(name)
    }

    fn service_ids(&self) -> Vec<Ident> {
        self.services.keys().cloned().collect()
    }

    fn as_library(&self) -> Option<&GraphLibrary> {
        Some(self)
    }
}

impl GraphLibrary {
    pub fn from_document(doc: LibraryDocument) -> Result<Self, LoadErrors> {
        let mut errors = Vec::new();
        let mut lib = GraphLibrary {
            name: doc.name.clone().unwrap_or_else(|| "unnamed".to_string()),
            version: doc.version.unwrap_or(1),
            interfaces: BTreeMap::new(),
            services: BTreeMap::new(),
            activities: BTreeMap::new(),
            domains: BTreeMap::new(),
        };
        for d in doc.domain_types {
            if lib.domains.contains_key(&d.name) {
                errors.push(LibraryError::DuplicateId { kind: "domain type", id: d.name.clone() });
            }
            lib.domains.insert(d.name.clone(), d);
        }
        for a in doc.activities {
            if lib.activities.contains_key(&a.id) {
                errors.push(LibraryError::DuplicateId { kind: "activity", id: a.id.clone() });
            }
            lib.activities.insert(a.id.clone(), a);
        }
        for i in doc.interfaces {
            if lib.interfaces.contains_key(&i.id) {
                errors.push(LibraryError::DuplicateId { kind: "interface graph", id: i.id.clone() });
            }
            lib.interfaces.insert(i.id.clone(), i);
        }
        for g in doc.graphs {
            if lib.services.contains_key(&g.id) || lib.interfaces.contains_key(&g.id) {
                errors.push(LibraryError::DuplicateId { kind: "graph", id: g.id.clone() });
            }
            lib.services.insert(g.id.clone(), Arc::new(g));
        }

        errors.extend(validate_catalog(&lib));
        if errors.is_empty() {
            Ok(lib)
        } else {
            Err(LoadErrors(errors))
        }
    }

    pub fn from_json(text: &str) -> Result<Self, LoadErrors> {
        let doc = LibraryDocument::from_json(text).map_err(|e| LoadErrors(vec![e]))?;
        Self::from_document(doc)
    }

    /// Loads a single JSON document, or every `*.json` file of a directory
    /// merged by id (files visited in name order).
    pub fn load_path(path: &Path) -> Result<Self, LoadErrors> {
        read_document(path).map_err(|e| LoadErrors(vec![e])).and_then(Self::from_document)
    }

    pub fn to_document(&self) -> LibraryDocument {
        LibraryDocument {
            name: Some(self.name.clone()),
            version: Some(self.version),
            domain_types: self.domains.values().cloned().collect(),
            activities: self.activities.values().cloned().collect(),
            interfaces: self.interfaces.values().cloned().collect(),
            graphs: self.services.values().map(|g| (**g).clone()).collect(),
        }
    }

    /// A new library version with `edit` applied to this one's document.
    pub fn revised(&self, edit: impl FnOnce(&mut LibraryDocument)) -> Result<Self, LoadErrors> {
        let mut doc = self.to_document();
        edit(&mut doc);
        doc.version = Some(self.version + 1);
        Self::from_document(doc)
    }

    pub fn interfaces(&self) -> impl Iterator<Item = &InterfaceGraph> {
        self.interfaces.values()
    }

    pub fn services(&self) -> impl Iterator<Item = &Arc<Slg>> {
        self.services.values()
    }

    pub fn activities(&self) -> impl Iterator<Item = &ActivityDescriptor> {
        self.activities.values()
    }

    pub fn domain_types(&self) -> impl Iterator<Item = &DomainDecl> {
        self.domains.values()
    }
}

pub fn read_document(path: &Path) -> Result<LibraryDocument, LibraryError> {
    let parse = |p: &Path| -> Result<LibraryDocument, LibraryError> {
        let text = std::fs::read_to_string(p)
            .map_err(|e| LibraryError::Parse { file: Some(p.display().to_string()), message: e.to_string() })?;
        serde_json::from_str(&text)
            .map_err(|e| LibraryError::Parse { file: Some(p.display().to_string()), message: e.to_string() })
    };
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| LibraryError::Parse { file: Some(path.display().to_string()), message: e.to_string() })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut doc = LibraryDocument::default();
        for f in files {
            doc.merge(parse(&f)?).map_err(|e| match e {
                LibraryError::Parse { message, .. } => {
                    LibraryError::Parse { file: Some(f.display().to_string()), message }
                }
                other => other,
            })?;
        }
        Ok(doc)
    } else {
        parse(path)
    }
}

/// The signature a node exposes to its successors.
///
/// Start nodes leave on [`START_BRANCH`]; constructors leave on
/// [`CREATED_BRANCH`] carrying the new instance.
pub fn resolved_signature(node: &Node, cat: &dyn Catalog) -> Result<Signature, LibraryError> {
    match node {
        Node::Start {} => Ok(Signature { inputs: vec![], branches: BTreeMap::from([(START_BRANCH.to_string(), vec![])]) }),
        Node::End { .. } => Err(LibraryError::Structure {
            location: "end node".into(),
            message: "end nodes have no outgoing signature".into(),
        }),
        Node::Atomic { activity_id, .. } => cat.activity(activity_id).map(|a| a.signature.clone()).ok_or_else(|| {
            LibraryError::DanglingReference { location: "atomic node".into(), target: format!("activity `{activity_id}`") }
        }),
        Node::GraphSib { graph_type, .. } => match graph_type {
            SemanticType::Graph { graph_id, kind } => cat.graph_signature(graph_id, *kind).cloned().ok_or_else(|| {
                LibraryError::DanglingReference { location: "graph SIB".into(), target: format!("{kind} graph `{graph_id}`") }
            }),
            other => Err(LibraryError::Structure {
                location: "graph SIB".into(),
                message: format!("graph type expected, found {other}"),
            }),
        },
        Node::Constructor { service_graph_id, .. } => {
            if cat.service(service_graph_id).is_none() {
                return Err(LibraryError::DanglingReference {
                    location: "constructor".into(),
                    target: format!("service graph `{service_graph_id}`"),
                });
            }
            Ok(Signature {
                inputs: vec![],
                branches: BTreeMap::from([(
                    CREATED_BRANCH.to_string(),
                    vec![Param::new("instance", SemanticType::service(service_graph_id.clone()))],
                )]),
            })
        }
    }
}

/// Signature of the graph a node calls, for arity checks on its inputs.
fn callee_inputs<'a>(node: &Node, cat: &'a dyn Catalog) -> Option<&'a [Param]> {
    match node {
        Node::Atomic { activity_id, .. } => cat.activity(activity_id).map(|a| a.signature.inputs.as_slice()),
        Node::GraphSib { graph_type: SemanticType::Graph { graph_id, kind }, .. } => {
            cat.graph_signature(graph_id, *kind).map(|s| s.inputs.as_slice())
        }
        Node::Constructor { service_graph_id, .. } => cat.service(service_graph_id).map(|s| s.signature.inputs.as_slice()),
        _ => None,
    }
}

/// Structural validation of everything visible through `cat`.
pub fn validate_catalog(cat: &dyn Catalog) -> Vec<LibraryError> {
    let mut errors = validate_declarations(cat);
    for id in cat.service_ids() {
        errors.extend(validate_graph(cat.service(&id).expect("listed service"), cat));
    }
    errors.extend(recursion_cycles(cat));
    errors
}

/// Domain, activity and interface declarations. Overlays expose no
/// declarations of their own, so this only runs for whole libraries.
fn validate_declarations(cat: &dyn Catalog) -> Vec<LibraryError> {
    let Some(lib) = cat.as_library() else { return Vec::new() };
    let mut errors = Vec::new();
    for d in lib.domains.values() {
        if let Some(sup) = &d.supertype {
            if lib.domain(sup).is_none() {
                errors.push(LibraryError::DanglingReference {
                    location: format!("domain type `{}`", d.name),
                    target: format!("supertype `{sup}`"),
                });
                continue;
            }
            let chain = domain_chain(&d.name, cat);
            let last = chain.last().expect("chain has the start");
            if lib.domain(last).and_then(|x| x.supertype.as_ref()).is_some() {
                errors.push(LibraryError::Structure {
                    location: format!("domain type `{}`", d.name),
                    message: format!("supertype chain is cyclic: {}", chain.join(" -> ")),
                });
            }
        }
    }
    for a in lib.activities.values() {
        let loc = format!("activity `{}`", a.id);
        for p in a.signature.problems() {
            errors.push(LibraryError::Structure { location: loc.clone(), message: p });
        }
        errors.extend(signature_types(&a.signature, &loc, cat));
        match &a.instance_type {
            None => {}
            Some(t @ SemanticType::Domain { .. }) => {
                if let Err(e) = ensure_resolves(t, cat) {
                    errors.push(dangling(&loc, &e.to_string()));
                }
            }
            Some(other) => errors.push(LibraryError::Structure {
                location: loc,
                message: format!("instance type must be a domain type, found {other}"),
            }),
        }
    }
    for i in lib.interfaces.values() {
        let loc = format!("interface graph `{}`", i.id);
        for p in i.signature.problems() {
            errors.push(LibraryError::Structure { location: loc.clone(), message: p });
        }
        errors.extend(signature_types(&i.signature, &loc, cat));
    }
    errors
}

fn dangling(location: &str, what: &str) -> LibraryError {
    LibraryError::DanglingReference {
        location: location.to_string(),
        target: what.trim_start_matches("unresolved type: ").to_string(),
    }
}

fn signature_types(sig: &Signature, loc: &str, cat: &dyn Catalog) -> Vec<LibraryError> {
    sig.inputs
        .iter()
        .chain(sig.branches.values().flatten())
        .filter_map(|p| ensure_resolves(&p.ty, cat).err())
        .map(|e| dangling(loc, &e.to_string()))
        .collect()
}

fn check_targets(
    targets: &OutputTargets,
    sig: &Signature,
    loc: &str,
    errors: &mut Vec<LibraryError>,
) {
    for (branch, vars) in targets {
        match sig.branches.get(branch) {
            None => errors.push(LibraryError::Structure {
                location: loc.to_string(),
                message: format!("output targets name unknown branch `{branch}`"),
            }),
            Some(outs) if outs.len() != vars.len() => errors.push(LibraryError::Structure {
                location: loc.to_string(),
                message: format!(
                    "branch `{branch}` has {} outputs but {} target variables",
                    outs.len(),
                    vars.len()
                ),
            }),
            _ => {}
        }
    }
}

/// Structural invariants of one service graph.
pub fn validate_graph(g: &Slg, cat: &dyn Catalog) -> Vec<LibraryError> {
    let mut errors = Vec::new();
    let gloc = format!("graph `{}`", g.id);
    for p in g.signature.problems() {
        errors.push(LibraryError::Structure { location: gloc.clone(), message: p });
    }
    errors.extend(signature_types(&g.signature, &gloc, cat));
    if let Some(i) = &g.implements_id {
        if cat.interface(i).is_none() {
            errors.push(LibraryError::DanglingReference {
                location: gloc.clone(),
                target: format!("interface graph `{i}`"),
            });
        }
    }
    for (var, t) in &g.context_decls {
        if let Err(e) = ensure_resolves(t, cat) {
            errors.push(dangling(&format!("{gloc}, context variable `{var}`"), &e.to_string()));
        }
    }

    let starts: Vec<&str> =
        g.nodes.iter().filter(|(_, n)| matches!(n, Node::Start {})).map(|(id, _)| id.as_str()).collect();
    if starts.len() != 1 {
        errors.push(LibraryError::Structure {
            location: gloc.clone(),
            message: format!("expected exactly one start node, found {}", starts.len()),
        });
    }

    // Outgoing branch coverage.
    let mut outgoing: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for e in &g.edges {
        *outgoing.entry((e.src_node_id.as_str(), e.branch.as_str())).or_default() += 1;
        for end in [&e.src_node_id, &e.dst_node_id] {
            if !g.nodes.contains_key(end) {
                errors.push(LibraryError::DanglingReference {
                    location: format!("{gloc}, edge {} -[{}]-> {}", e.src_node_id, e.branch, e.dst_node_id),
                    target: format!("node `{end}`"),
                });
            }
        }
    }
    for l in &g.loose_edges {
        *outgoing.entry((l.src_node_id.as_str(), l.branch.as_str())).or_default() += 1;
        let lloc = format!("{gloc}, loose edge {}#{}", l.src_node_id, l.branch);
        if !g.nodes.contains_key(&l.src_node_id) {
            errors.push(LibraryError::DanglingReference { location: lloc.clone(), target: format!("node `{}`", l.src_node_id) });
        }
        match cat.interface(&l.spec.interface_id) {
            None => errors.push(LibraryError::DanglingReference {
                location: lloc.clone(),
                target: format!("interface graph `{}`", l.spec.interface_id),
            }),
            Some(i) => {
                let want: BTreeSet<&str> = i.signature.branch_names();
                let have: BTreeSet<&str> = l.next.keys().map(String::as_str).collect();
                if want != have {
                    errors.push(LibraryError::Structure {
                        location: lloc.clone(),
                        message: format!("continuations {have:?} do not match interface branches {want:?}"),
                    });
                }
                if l.inputs.len() != i.signature.inputs.len() {
                    errors.push(LibraryError::Structure {
                        location: lloc.clone(),
                        message: format!("expected {} inputs, found {}", i.signature.inputs.len(), l.inputs.len()),
                    });
                }
                check_targets(&l.output_targets, &i.signature, &lloc, &mut errors);
            }
        }
        for dst in l.next.values() {
            if !g.nodes.contains_key(dst) {
                errors.push(LibraryError::DanglingReference { location: lloc.clone(), target: format!("node `{dst}`") });
            }
        }
        for p in l.spec.problems() {
            errors.push(LibraryError::Structure { location: lloc.clone(), message: p });
        }
        for a in &l.spec.candidate_activities {
            if cat.activity(&a.activity_id).is_none() {
                errors.push(LibraryError::DanglingReference {
                    location: lloc.clone(),
                    target: format!("activity `{}`", a.activity_id),
                });
            }
        }
    }

    let mut end_branches = BTreeSet::new();
    for (id, node) in &g.nodes {
        let nloc = format!("{gloc}, node `{id}`");
        if let Node::End { branch, outputs } = node {
            end_branches.insert(branch.as_str());
            match g.signature.branches.get(branch) {
                None => errors.push(LibraryError::Structure {
                    location: nloc.clone(),
                    message: format!("end branch `{branch}` is not in the graph signature"),
                }),
                Some(outs) if outs.len() != outputs.len() => errors.push(LibraryError::Structure {
                    location: nloc.clone(),
                    message: format!("branch `{branch}` has {} outputs, end binds {}", outs.len(), outputs.len()),
                }),
                _ => {}
            }
            if outgoing.keys().any(|(s, _)| *s == id) {
                errors.push(LibraryError::Structure { location: nloc, message: "end node has outgoing edges".into() });
            }
            continue;
        }

        match node {
            Node::GraphSib { graph_type, instance_source, .. } => {
                if !matches!(graph_type, SemanticType::Graph { .. }) {
                    errors.push(LibraryError::Structure {
                        location: nloc.clone(),
                        message: format!("graph SIB type must be a graph type, found {graph_type}"),
                    });
                }
                if matches!(instance_source, InstanceSource::Fresh {})
                    && matches!(graph_type, SemanticType::Graph { kind: GraphKind::Interface, .. })
                {
                    errors.push(LibraryError::Structure {
                        location: nloc.clone(),
                        message: "a fresh instance needs a service graph type, not an interface".into(),
                    });
                }
            }
            Node::Atomic { activity_id, instance_var, .. } => {
                if let Some(a) = cat.activity(activity_id) {
                    if instance_var.is_some() && a.instance_type.is_none() {
                        errors.push(LibraryError::Structure {
                            location: nloc.clone(),
                            message: format!("activity `{activity_id}` is not virtual but an instance variable is given"),
                        });
                    }
                }
            }
            _ => {}
        }

        let sig = match resolved_signature(node, cat) {
            Ok(s) => s,
            Err(LibraryError::DanglingReference { target, .. }) => {
                errors.push(LibraryError::DanglingReference { location: nloc, target });
                continue;
            }
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        if let Some(inputs) = callee_inputs(node, cat) {
            let given = node.bindings().len();
            let arity_ok = match node {
                Node::Constructor { .. } => given == 0 || given == inputs.len(),
                _ => given == inputs.len(),
            };
            if !arity_ok {
                errors.push(LibraryError::Structure {
                    location: nloc.clone(),
                    message: format!("expected {} inputs, found {given}", inputs.len()),
                });
            }
        }
        if let Node::Atomic { output_targets, .. } | Node::GraphSib { output_targets, .. } = node {
            check_targets(output_targets, &sig, &nloc, &mut errors);
        }
        for branch in sig.branches.keys() {
            match outgoing.get(&(id.as_str(), branch.as_str())).copied().unwrap_or(0) {
                1 => {}
                0 => errors.push(LibraryError::Structure {
                    location: nloc.clone(),
                    message: format!("branch `{branch}` has no outgoing edge"),
                }),
                n => errors.push(LibraryError::Structure {
                    location: nloc.clone(),
                    message: format!("branch `{branch}` has {n} outgoing edges"),
                }),
            }
        }
        for (src, branch) in outgoing.keys() {
            if *src == id && !sig.branches.contains_key(*branch) {
                errors.push(LibraryError::Structure {
                    location: nloc.clone(),
                    message: format!("edge on unknown branch `{branch}`"),
                });
            }
        }
    }

    let declared: BTreeSet<&str> = g.signature.branch_names();
    if end_branches != declared {
        errors.push(LibraryError::Structure {
            location: gloc.clone(),
            message: format!("end node branches {end_branches:?} differ from signature branches {declared:?}"),
        });
    }

    if let [start] = starts.as_slice() {
        let reach = reachable(g, start);
        let unreachable: Vec<&str> =
            g.nodes.keys().map(String::as_str).filter(|n| !reach.contains(n)).collect();
        if !unreachable.is_empty() {
            errors.push(LibraryError::Structure {
                location: gloc,
                message: format!("nodes unreachable from start: {unreachable:?}"),
            });
        }
    }
    errors
}

fn reachable<'a>(g: &'a Slg, start: &'a str) -> BTreeSet<&'a str> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        let succ = g
            .edges
            .iter()
            .filter(|e| e.src_node_id == n)
            .map(|e| e.dst_node_id.as_str())
            .chain(g.loose_edges.iter().filter(|l| l.src_node_id == n).flat_map(|l| l.next.values().map(String::as_str)));
        for m in succ {
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    seen
}

/// Graph-level call edges: a service graph points at each graph it invokes
/// or constructs; an interface points at every implementing service graph.
fn call_graph(cat: &dyn Catalog) -> BTreeMap<Ident, BTreeSet<Ident>> {
    let mut out: BTreeMap<Ident, BTreeSet<Ident>> = BTreeMap::new();
    for id in cat.service_ids() {
        let g = cat.service(&id).expect("listed service");
        out.entry(id.clone()).or_default().extend(g.referenced_graphs().into_iter().map(str::to_string));
        if let Some(i) = &g.implements_id {
            out.entry(i.clone()).or_default().insert(id.clone());
        }
    }
    out
}

/// Every elementary cycle's first discovery in the inter-graph call relation.
pub fn recursion_cycles(cat: &dyn Catalog) -> Vec<LibraryError> {
    let calls = call_graph(cat);
    let mut errors = Vec::new();
    let mut reported: BTreeSet<BTreeSet<Ident>> = BTreeSet::new();
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();

    fn visit<'a>(
        n: &'a str,
        calls: &'a BTreeMap<Ident, BTreeSet<Ident>>,
        marks: &mut BTreeMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
        found: &mut Vec<Vec<String>>,
    ) {
        marks.insert(n, Mark::Active);
        stack.push(n);
        if let Some(succ) = calls.get(n) {
            for m in succ {
                match marks.get(m.as_str()) {
                    Some(Mark::Active) => {
                        let from = stack.iter().position(|s| *s == m).expect("active node on stack");
                        let mut cycle: Vec<String> = stack[from..].iter().map(|s| s.to_string()).collect();
                        cycle.push(m.clone());
                        found.push(cycle);
                    }
                    Some(Mark::Done) => {}
                    None => visit(m, calls, marks, stack, found),
                }
            }
        }
        stack.pop();
        marks.insert(n, Mark::Done);
    }

    let mut found = Vec::new();
    for n in calls.keys() {
        if !marks.contains_key(n.as_str()) {
            visit(n, &calls, &mut marks, &mut Vec::new(), &mut found);
        }
    }
    for cycle in found {
        let key: BTreeSet<Ident> = cycle.iter().cloned().collect();
        if reported.insert(key) {
            errors.push(LibraryError::RecursionCycle { cycle });
        }
    }
    errors
}

/// Checks the bindings of `node` for static literals against the expected
/// parameter types. Exposed for the checker.
pub fn static_literal_fits(literal: &serde_json::Value, ty: &SemanticType) -> bool {
    crate::runtime::PrimValue::from_json(literal, ty).is_ok()
}
