//! Kripke transition systems `(S, Act, T, I)`, the translation from service
//! graphs, and bounded checking of linear formulas over their paths.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::library::{resolved_signature, Catalog};
use crate::logic::formula::{eval, Formula, Letter, Trace};
use crate::model::{Node, SemanticType, Slg};

/// Action on the self-loop that keeps terminal states total.
pub const TAU: &str = "τ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Kts {
    pub states: BTreeSet<String>,
    pub actions: BTreeSet<String>,
    pub transitions: BTreeSet<(String, String, String)>,
    pub labels: BTreeMap<String, Letter>,
    pub initial: String,
}

impl Kts {
    pub fn successors<'a>(&'a self, s: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.transitions.iter().filter(move |(src, _, _)| src == s).map(|(_, a, d)| (a.as_str(), d.as_str()))
    }

    /// Every state has an outgoing transition.
    pub fn is_total(&self) -> bool {
        self.states.iter().all(|s| self.transitions.iter().any(|(src, _, _)| src == s))
    }

    /// Adds a `τ` self-loop to every state without successors.
    pub fn close(&mut self) {
        let stuck: Vec<String> =
            self.states.iter().filter(|s| !self.transitions.iter().any(|(src, _, _)| src == *s)).cloned().collect();
        for s in stuck {
            self.actions.insert(TAU.to_string());
            self.transitions.insert((s.clone(), TAU.to_string(), s));
        }
    }

    pub fn label(&self, s: &str) -> Letter {
        self.labels.get(s).cloned().unwrap_or_default()
    }
}

/// State standing for the runtime completion of a loose edge.
pub fn loose_state(node: &str, branch: &str) -> String {
    format!("?{node}#{branch}")
}

/// Translates a structurally valid graph. States are node ids; each state is
/// labeled with its node kind and the activity or graph it runs.
pub fn slg_to_kts(g: &Slg, cat: &dyn Catalog) -> Kts {
    let mut k = Kts {
        states: BTreeSet::new(),
        actions: BTreeSet::new(),
        transitions: BTreeSet::new(),
        labels: BTreeMap::new(),
        initial: g.start_node().unwrap_or_default().to_string(),
    };
    for (id, node) in &g.nodes {
        let mut props = BTreeSet::from([node.kind_name().to_string()]);
        match node {
            Node::Start {} => {}
            Node::End { branch, .. } => {
                props.insert(format!("end:{branch}"));
            }
            Node::Atomic { activity_id, .. } => {
                props.insert(activity_id.clone());
                if let Some(a) = cat.activity(activity_id) {
                    props.extend(a.taxonomy_tags.iter().cloned());
                }
            }
            Node::GraphSib { graph_type: SemanticType::Graph { graph_id, .. }, .. } => {
                props.insert(graph_id.clone());
            }
            Node::GraphSib { .. } => {}
            Node::Constructor { service_graph_id, .. } => {
                props.insert(service_graph_id.clone());
            }
        }
        k.states.insert(id.clone());
        k.labels.insert(id.clone(), props);
        if matches!(node, Node::End { .. }) {
            continue;
        }
        let Ok(sig) = resolved_signature(node, cat) else { continue };
        for branch in sig.branches.keys() {
            if let Some(e) = g.edges.iter().find(|e| &e.src_node_id == id && &e.branch == branch) {
                k.actions.insert(branch.clone());
                k.transitions.insert((id.clone(), branch.clone(), e.dst_node_id.clone()));
            }
        }
    }
    for l in &g.loose_edges {
        let site = loose_state(&l.src_node_id, &l.branch);
        k.states.insert(site.clone());
        k.labels.insert(site.clone(), BTreeSet::from(["loose".to_string(), l.spec.interface_id.clone()]));
        k.actions.insert(l.branch.clone());
        k.transitions.insert((l.src_node_id.clone(), l.branch.clone(), site.clone()));
        for (branch, dst) in &l.next {
            k.actions.insert(branch.clone());
            k.transitions.insert((site.clone(), branch.clone(), dst.clone()));
        }
    }
    k.close();
    k
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", tag = "verdict")]
pub enum CheckResult {
    /// No counterexample among the explored paths; a bounded verdict only.
    Holds { paths: usize, bound: usize },
    Counterexample { states: Vec<String>, trace: Trace },
}

impl CheckResult {
    pub fn holds(&self) -> bool {
        matches!(self, CheckResult::Holds { .. })
    }
}

/// Checks `f` at the initial state of every maximal simple path of at most
/// `bound` states, in sorted (action, target) order. A counterexample is
/// cut to the shortest prefix on which `f` still fails.
pub fn check_kts(k: &Kts, f: &Formula, bound: usize) -> CheckResult {
    let bound = bound.max(1);
    let mut paths = 0;
    let mut path = vec![k.initial.as_str()];
    match explore(k, f, bound, &mut path, &mut paths) {
        Some(states) => {
            let trace: Trace = states.iter().map(|s| k.label(s)).collect();
            let cut = (1..=trace.len())
                .find(|&n| !eval(f, &trace[..n], 0).unwrap_or(false))
                .unwrap_or(trace.len());
            CheckResult::Counterexample {
                states: states[..cut].to_vec(),
                trace: trace[..cut].to_vec(),
            }
        }
        None => CheckResult::Holds { paths, bound },
    }
}

fn explore<'a>(k: &'a Kts, f: &Formula, bound: usize, path: &mut Vec<&'a str>, paths: &mut usize) -> Option<Vec<String>> {
    let last = *path.last().expect("path starts at the initial state");
    let mut extended = false;
    if path.len() < bound {
        let mut next: Vec<(&str, &str)> = k.successors(last).filter(|(_, d)| !path.contains(d)).collect();
        next.sort();
        for (_, d) in next {
            extended = true;
            path.push(d);
            let found = explore(k, f, bound, path, paths);
            path.pop();
            if found.is_some() {
                return found;
            }
        }
    }
    if extended {
        return None;
    }
    *paths += 1;
    let trace: Trace = path.iter().map(|s| k.label(s)).collect();
    if eval(f, &trace, 0).unwrap_or(false) {
        None
    } else {
        Some(path.iter().map(|s| s.to_string()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Binding, Edge, Signature};
    use crate::ocs;

    fn trivial() -> Slg {
        Slg {
            id: "t".into(),
            signature: Signature { inputs: vec![], branches: BTreeMap::from([("done".to_string(), vec![])]) },
            implements_id: None,
            context_decls: BTreeMap::new(),
            nodes: BTreeMap::from([
                ("s".to_string(), Node::Start {}),
                ("e".to_string(), Node::End { branch: "done".into(), outputs: Vec::<Binding>::new() }),
            ]),
            edges: vec![Edge::new("s", "start", "e")],
            loose_edges: vec![],
            icon: None,
            docs: String::new(),
        }
    }

    #[test]
    fn two_node_graph() {
        let lib = ocs::library();
        let k = slg_to_kts(&trivial(), &lib);
        assert_eq!(k.states.len(), 2);
        assert_eq!(k.transitions.len(), 2);
        assert!(k.transitions.contains(&("e".into(), TAU.into(), "e".into())));
        assert!(k.is_total());
    }

    #[test]
    fn corpus_graphs_are_total_and_cover_nodes() {
        let lib = ocs::library();
        for g in lib.services() {
            let k = slg_to_kts(g, &lib);
            assert!(k.is_total(), "{}", g.id);
            let nodes: BTreeSet<String> = g.nodes.keys().cloned().collect();
            if g.loose_edges.is_empty() {
                assert_eq!(k.states, nodes, "{}", g.id);
            } else {
                assert!(k.states.is_superset(&nodes));
            }
        }
    }

    #[test]
    fn bounded_verdicts() {
        let lib = ocs::library();
        let g = lib.service("validate-payment").unwrap();
        let k = slg_to_kts(g, &lib);
        let r = check_kts(&k, &Formula::parse("F end").unwrap(), 10);
        assert!(r.holds(), "{r:?}");
        match check_kts(&k, &Formula::globally(Formula::falsum()), 10) {
            CheckResult::Counterexample { states, .. } => assert_eq!(states.len(), 1),
            other => panic!("{other:?}"),
        }
    }
}
