//! Static, flow-sensitive type checking of service graphs.
//!
//! A forward dataflow pass computes, for every node, the set of context
//! variables definitely assigned on all paths from the start node (meet is
//! set intersection, back edges iterate to a fixed point). Each binding,
//! instance reference and output target is then checked against the
//! declared context types.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::library::{resolved_signature, validate_graph, Catalog};
use crate::model::{Binding, GraphKind, Ident, InstanceSource, Node, OutputTargets, SemanticType, Signature, Slg};
use crate::runtime::PrimValue;
use crate::types::{conforms, is_subtype, ConformanceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    UnassignedRead,
    TypeMismatch,
    InstanceMismatch,
    UndeclaredVar,
    StaticIllegal,
    BranchSetMismatch,
    ArityMismatch,
    VarianceViolation,
    NotImplementing,
    Structural,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit enum serializes");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Diagnostic {
    pub graph_id: Ident,
    /// `None` for graph-level findings such as conformance.
    pub node_id: Option<Ident>,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node_id {
            Some(n) => write!(f, "{} [{}] {}: {}", self.graph_id, n, self.kind, self.message),
            None => write!(f, "{} {}: {}", self.graph_id, self.kind, self.message),
        }
    }
}

impl Diagnostic {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("diagnostics serialize")
    }

    fn from_conformance(graph_id: &str, e: &ConformanceError) -> Self {
        let kind = match e {
            ConformanceError::BranchSetMismatch { .. } => DiagnosticKind::BranchSetMismatch,
            ConformanceError::ArityMismatch { .. } => DiagnosticKind::ArityMismatch,
            ConformanceError::VarianceViolation { .. } => DiagnosticKind::VarianceViolation,
            ConformanceError::NotImplementing { .. } => DiagnosticKind::NotImplementing,
        };
        Diagnostic { graph_id: graph_id.to_string(), node_id: None, kind, message: e.to_string() }
    }
}

/// A program point: a node, or the synthesized call standing in for a loose edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Point<'g> {
    Node(&'g str),
    Loose(usize),
}

struct Flow<'g> {
    from: Point<'g>,
    assigns: Vec<&'g str>,
    to: Point<'g>,
}

fn writes_on<'g>(targets: &'g OutputTargets, branch: &str) -> Vec<&'g str> {
    targets.get(branch).map(|v| v.iter().map(String::as_str).collect()).unwrap_or_default()
}

fn flows<'g>(g: &'g Slg, cat: &dyn Catalog) -> Vec<Flow<'g>> {
    let mut out = Vec::new();
    let loose_index = |node: &str, branch: &str| {
        g.loose_edges.iter().position(|l| l.src_node_id == node && l.branch == branch)
    };
    for (id, node) in &g.nodes {
        let Ok(sig) = resolved_signature(node, cat) else { continue };
        for branch in sig.branches.keys() {
            let assigns: Vec<&str> = match node {
                Node::Start {} => g.signature.inputs.iter().map(|p| p.name.as_str()).collect(),
                Node::Atomic { output_targets, .. } | Node::GraphSib { output_targets, .. } => {
                    writes_on(output_targets, branch)
                }
                Node::Constructor { target_var, .. } => vec![target_var.as_str()],
                Node::End { .. } => continue,
            };
            let to = if let Some(e) = g.edges.iter().find(|e| &e.src_node_id == id && &e.branch == branch) {
                Point::Node(&e.dst_node_id)
            } else if let Some(ix) = loose_index(id, branch) {
                Point::Loose(ix)
            } else {
                continue;
            };
            out.push(Flow { from: Point::Node(id), assigns, to });
        }
    }
    for (ix, l) in g.loose_edges.iter().enumerate() {
        for (branch, dst) in &l.next {
            out.push(Flow { from: Point::Loose(ix), assigns: writes_on(&l.output_targets, branch), to: Point::Node(dst) });
        }
    }
    out
}

/// Definitely-assigned variables on entry to every reachable program point.
fn definite_assignment<'g>(g: &'g Slg, cat: &dyn Catalog) -> BTreeMap<Point<'g>, BTreeSet<&'g str>> {
    let flows = flows(g, cat);
    let Some(start) = g.start_node() else { return BTreeMap::new() };
    let mut state: BTreeMap<Point<'g>, BTreeSet<&'g str>> = BTreeMap::new();
    state.insert(Point::Node(start), BTreeSet::new());
    let mut work = VecDeque::from([Point::Node(start)]);
    while let Some(p) = work.pop_front() {
        let here = state[&p].clone();
        for f in flows.iter().filter(|f| f.from == p) {
            let mut out = here.clone();
            out.extend(f.assigns.iter().copied());
            let changed = match state.get_mut(&f.to) {
                None => {
                    state.insert(f.to, out);
                    true
                }
                Some(existing) => {
                    let meet: BTreeSet<&str> = existing.intersection(&out).copied().collect();
                    if meet.len() != existing.len() {
                        *existing = meet;
                        true
                    } else {
                        false
                    }
                }
            };
            if changed && !work.contains(&f.to) {
                work.push_back(f.to);
            }
        }
    }
    state
}

struct Checker<'a> {
    g: &'a Slg,
    cat: &'a dyn Catalog,
    diags: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn push(&mut self, node: &str, kind: DiagnosticKind, message: String) {
        self.diags.push(Diagnostic { graph_id: self.g.id.clone(), node_id: Some(node.to_string()), kind, message });
    }

    fn binding(&mut self, node: &str, what: &str, b: &Binding, expected: &SemanticType, assigned: &BTreeSet<&str>) {
        match b {
            Binding::Static { literal } => {
                if !expected.is_primitive() {
                    self.push(
                        node,
                        DiagnosticKind::StaticIllegal,
                        format!("{what}: static literal for non-primitive type {expected}"),
                    );
                } else if let Err(e) = PrimValue::from_json(literal, expected) {
                    self.push(node, DiagnosticKind::TypeMismatch, format!("{what}: {e}"));
                }
            }
            Binding::FromContext { var } => {
                let Some(declared) = self.g.context_decls.get(var) else {
                    self.push(node, DiagnosticKind::UndeclaredVar, format!("{what}: `{var}` is not declared"));
                    return;
                };
                if !assigned.contains(var.as_str()) {
                    self.push(
                        node,
                        DiagnosticKind::UnassignedRead,
                        format!("{what}: `{var}` may be unassigned here"),
                    );
                }
                if !is_subtype(declared, expected, self.cat) {
                    self.push(
                        node,
                        DiagnosticKind::TypeMismatch,
                        format!("{what}: `{var}` is {declared}, expected {expected}"),
                    );
                }
            }
        }
    }

    fn write(&mut self, node: &str, var: &str, value_type: &SemanticType) {
        match self.g.context_decls.get(var) {
            None => self.push(node, DiagnosticKind::UndeclaredVar, format!("output target `{var}` is not declared")),
            Some(declared) if !is_subtype(value_type, declared, self.cat) => self.push(
                node,
                DiagnosticKind::TypeMismatch,
                format!("writes {value_type} into `{var}` declared {declared}"),
            ),
            _ => {}
        }
    }

    fn inputs(&mut self, node: &str, bindings: &[Binding], sig: &Signature, assigned: &BTreeSet<&str>) {
        for (i, (b, p)) in bindings.iter().zip(&sig.inputs).enumerate() {
            self.binding(node, &format!("input {i} (`{}`)", p.name), b, &p.ty, assigned);
        }
    }

    fn targets(&mut self, node: &str, targets: &OutputTargets, sig: &Signature) {
        for (branch, vars) in targets {
            let Some(outs) = sig.branches.get(branch) else { continue };
            for (var, p) in vars.iter().zip(outs) {
                self.write(node, var, &p.ty);
            }
        }
    }

    fn instance_var(&mut self, node: &str, var: &str, bound: &SemanticType, assigned: &BTreeSet<&str>, may_pause: bool) {
        let Some(declared) = self.g.context_decls.get(var) else {
            self.push(node, DiagnosticKind::UndeclaredVar, format!("instance variable `{var}` is not declared"));
            return;
        };
        if !is_subtype(declared, bound, self.cat) {
            self.push(
                node,
                DiagnosticKind::InstanceMismatch,
                format!("instance `{var}` is {declared}, expected {bound}"),
            );
        }
        // An unassigned interface-typed instance is a manual selection point.
        let selectable = may_pause && declared.as_interface().is_some();
        if !assigned.contains(var) && !selectable {
            self.push(node, DiagnosticKind::UnassignedRead, format!("instance `{var}` may be unassigned here"));
        }
    }

    fn node(&mut self, id: &str, node: &Node, assigned: &BTreeSet<&str>) {
        let g = self.g;
        match node {
            Node::Start {} => {
                for p in &g.signature.inputs {
                    self.write(id, &p.name, &p.ty);
                }
            }
            Node::End { branch, outputs } => {
                let Some(outs) = g.signature.branches.get(branch) else { return };
                for (i, (b, p)) in outputs.iter().zip(outs).enumerate() {
                    self.binding(id, &format!("output {i} (`{}`) of `{branch}`", p.name), b, &p.ty, assigned);
                }
            }
            Node::Atomic { activity_id, instance_var, inputs, output_targets } => {
                let Some(a) = self.cat.activity(activity_id) else { return };
                match (&a.instance_type, instance_var) {
                    (Some(t), Some(var)) => self.instance_var(id, var, t, assigned, false),
                    (Some(t), None) => self.push(
                        id,
                        DiagnosticKind::InstanceMismatch,
                        format!("virtual activity `{activity_id}` needs an instance of {t}"),
                    ),
                    (None, Some(var)) => self.push(
                        id,
                        DiagnosticKind::InstanceMismatch,
                        format!("activity `{activity_id}` is not virtual, instance `{var}` given"),
                    ),
                    (None, None) => {}
                }
                self.inputs(id, inputs, &a.signature, assigned);
                self.targets(id, output_targets, &a.signature);
            }
            Node::GraphSib { graph_type, instance_source, inputs, output_targets } => {
                let SemanticType::Graph { graph_id, kind } = graph_type else { return };
                let Some(sig) = self.cat.graph_signature(graph_id, *kind) else { return };
                if let InstanceSource::FromContext { var } = instance_source {
                    self.instance_var(id, var, graph_type, assigned, true);
                }
                self.inputs(id, inputs, sig, assigned);
                self.targets(id, output_targets, sig);
            }
            Node::Constructor { service_graph_id, init_inputs, target_var } => {
                let Some(target) = self.cat.service(service_graph_id) else { return };
                if !init_inputs.is_empty() {
                    self.inputs(id, init_inputs, &target.signature, assigned);
                }
                self.write(id, target_var, &SemanticType::service(service_graph_id.clone()));
            }
        }
    }
}

/// Type-checks one structurally valid graph. Never fails; returns findings.
pub fn check_graph(g: &Slg, cat: &dyn Catalog) -> Vec<Diagnostic> {
    let assigned = definite_assignment(g, cat);
    let mut c = Checker { g, cat, diags: Vec::new() };
    let empty = BTreeSet::new();
    for (id, node) in &g.nodes {
        let here = assigned.get(&Point::Node(id)).unwrap_or(&empty);
        c.node(id, node, here);
    }
    for (ix, l) in g.loose_edges.iter().enumerate() {
        let site = format!("{}#{}", l.src_node_id, l.branch);
        let Some(i) = cat.interface(&l.spec.interface_id) else { continue };
        let here = assigned.get(&Point::Loose(ix)).unwrap_or(&empty);
        c.inputs(&site, &l.inputs, &i.signature, here);
        c.targets(&site, &l.output_targets, &i.signature);
    }
    c.diags.sort();
    c.diags
}

pub fn check_library(cat: &dyn Catalog) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for id in cat.service_ids() {
        let g = cat.service(&id).expect("listed service");
        out.extend(check_graph(g, cat));
        if let Some(iid) = &g.implements_id {
            if let Some(i) = cat.interface(iid) {
                if let Err(errs) = conforms(g, i, cat) {
                    out.extend(errs.iter().map(|e| Diagnostic::from_conformance(&g.id, e)));
                }
            }
        }
    }
    out
}

/// The gate for runtime swaps: `replacement` must type-check on its own and
/// conform to `interface_id`.
pub fn check_swap(interface_id: &str, replacement: &Slg, cat: &dyn Catalog) -> Result<(), Vec<Diagnostic>> {
    let structural: Vec<Diagnostic> = validate_graph(replacement, cat)
        .into_iter()
        .map(|e| Diagnostic {
            graph_id: replacement.id.clone(),
            node_id: None,
            kind: DiagnosticKind::Structural,
            message: e.to_string(),
        })
        .collect();
    if !structural.is_empty() {
        return Err(structural);
    }
    let own = check_graph(replacement, cat);
    if !own.is_empty() {
        return Err(own);
    }
    let Some(i) = cat.interface(interface_id) else {
        return Err(vec![Diagnostic {
            graph_id: replacement.id.clone(),
            node_id: None,
            kind: DiagnosticKind::NotImplementing,
            message: format!("unknown interface graph `{interface_id}`"),
        }]);
    };
    conforms(replacement, i, cat)
        .map_err(|errs| errs.iter().map(|e| Diagnostic::from_conformance(&replacement.id, e)).collect())
}

/// Whether `declared` is a graph type a steering command can fill.
pub fn steerable_interface(declared: &SemanticType) -> Option<&str> {
    match declared {
        SemanticType::Graph { graph_id, kind: GraphKind::Interface } => Some(graph_id),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Edge;
    use crate::ocs;

    fn kinds(d: &[Diagnostic]) -> Vec<DiagnosticKind> {
        d.iter().map(|d| d.kind).collect()
    }

    #[test]
    fn corpus_register_to_conference_is_clean() {
        let lib = ocs::library();
        let g = lib.service("register-to-conference").unwrap();
        assert_eq!(check_graph(g, &lib), vec![]);
    }

    #[test]
    fn diamond_join_loses_assignment() {
        let lib = ocs::library();
        // Route "fill registration info" around the branch that writes
        // registrationInfo by making the payment read happen on a path
        // where only one predecessor assigns it.
        let mut g = (**lib.service("register-to-conference").unwrap()).clone();
        if let Some(Node::Atomic { output_targets, .. }) = g.nodes.get_mut("fill registration info") {
            output_targets.clear();
        }
        let d = check_graph(&g, &lib);
        assert_eq!(kinds(&d), vec![DiagnosticKind::UnassignedRead]);
        assert_eq!(d[0].node_id.as_deref(), Some("pay conference fee"));
    }

    #[test]
    fn instance_var_of_wrong_type() {
        let lib = ocs::library();
        let mut g = (**lib.service("register-to-conference").unwrap()).clone();
        g.context_decls.insert("paymentProcess".into(), SemanticType::domain("User"));
        let d = check_graph(&g, &lib);
        assert!(kinds(&d).contains(&DiagnosticKind::InstanceMismatch), "{d:?}");
    }

    #[test]
    fn static_literal_rules() {
        let lib = ocs::library();
        let mut g = (**lib.service("validate-payment").unwrap()).clone();
        for n in g.nodes.values_mut() {
            if let Node::Atomic { inputs, .. } = n {
                inputs[0] = Binding::literal("p1");
            }
        }
        assert_eq!(kinds(&check_graph(&g, &lib)), vec![DiagnosticKind::StaticIllegal]);

        let mut g = (**lib.service("validate-payment").unwrap()).clone();
        for n in g.nodes.values_mut() {
            if let Node::End { outputs, .. } = n {
                outputs[0] = Binding::literal("yes");
            }
        }
        let d = check_graph(&g, &lib);
        assert_eq!(kinds(&d), vec![DiagnosticKind::TypeMismatch, DiagnosticKind::TypeMismatch]);
    }

    #[test]
    fn back_edges_reach_fixed_point() {
        let lib = ocs::library();
        let g = lib.service("simple-proceedings-validation").unwrap();
        assert!(g.edges.iter().any(|e: &Edge| e.dst_node_id == "iterate papers in proceedings" && e.src_node_id == "margins?"));
        assert_eq!(check_graph(g, &lib), vec![]);
    }

    #[test]
    fn unused_declaration_is_harmless() {
        let lib = ocs::library();
        for g in lib.services() {
            let mut h = (**g).clone();
            h.context_decls.insert("zzUnused".into(), SemanticType::domain("Paper"));
            assert_eq!(check_graph(&h, &lib), check_graph(g, &lib), "{}", g.id);
        }
    }

    #[test]
    fn library_check_and_swap() {
        let lib = ocs::library();
        assert_eq!(check_library(&lib), vec![]);
        let adhoc = lib.service("validate-payment-flight-hotel").unwrap();
        assert!(check_swap("PaperValidation", adhoc, &lib).is_ok());
        let other = lib.service("CreditCardPayment").unwrap();
        let d = check_swap("PaperValidation", other, &lib).unwrap_err();
        assert!(kinds(&d).contains(&DiagnosticKind::NotImplementing));

        let mut broken = (**adhoc).clone();
        broken.context_decls.insert("paper".into(), SemanticType::domain("User"));
        let d = check_swap("PaperValidation", &broken, &lib).unwrap_err();
        assert!(kinds(&d).contains(&DiagnosticKind::TypeMismatch));
    }

    #[test]
    fn payment_output_change_breaks_both_payment_graphs() {
        let lib = ocs::library();
        let changed = lib
            .revised(|doc| {
                let p = doc.interfaces.iter_mut().find(|i| i.id == "Payment").unwrap();
                p.signature.branches.get_mut("paid").unwrap()[0].ty = SemanticType::bool();
            })
            .unwrap();
        let d = check_library(&changed);
        let graphs: BTreeSet<&str> = d
            .iter()
            .filter(|d| d.kind == DiagnosticKind::VarianceViolation)
            .map(|d| d.graph_id.as_str())
            .collect();
        assert_eq!(graphs, BTreeSet::from(["CreditCardPayment", "InvoicePayment"]));
    }

    #[test]
    fn empty_library_is_clean() {
        let lib = crate::library::GraphLibrary::from_document(crate::library::LibraryDocument::named("empty")).unwrap();
        assert!(check_library(&lib).is_empty());
    }

    #[test]
    fn diagnostics_are_json_lines() {
        let d = Diagnostic {
            graph_id: "g".into(),
            node_id: Some("n".into()),
            kind: DiagnosticKind::UnassignedRead,
            message: "m".into(),
        };
        assert_eq!(d.to_json_line(), r#"{"graphId":"g","nodeId":"n","kind":"unassigned-read","message":"m"}"#);
    }
}
