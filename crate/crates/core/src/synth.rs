//! Completion of loose branches: search for the shortest activity sequences
//! that satisfy the goals and the derived dataflow constraints, and
//! materialization of a sequence into an interface-conforming service graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::check_graph;
use crate::library::{validate_graph, Catalog};
use crate::logic::{derive_dataflow_constraints, eval, Formula, Letter, Trace};
use crate::model::{Binding, Edge, Ident, Node, Param, PrimitiveKind, SemanticType, Slg};
use crate::types::{conforms, is_subtype};

/// Branch a validation activity takes when its check passes.
pub const YES: &str = "yes";
pub const NO: &str = "no";
/// Branches of an interface the linear-chain template can implement.
pub const VALID: &str = "valid";
pub const INVALID: &str = "invalid";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ActivityProfile {
    pub activity_id: Ident,
    #[serde(default)]
    pub requires: BTreeSet<String>,
    #[serde(default)]
    pub provides: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub taxonomy_tags: BTreeSet<Ident>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SynthesisSpec {
    pub interface_id: Ident,
    pub candidate_activities: Vec<ActivityProfile>,
    #[serde(default)]
    pub initially_available: BTreeSet<String>,
    pub goals: Vec<Formula>,
    pub max_length: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_repeats: bool,
}

impl SynthesisSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.max_length == 0 {
            out.push("maxLength must be at least 1".to_string());
        }
        if self.goals.is_empty() {
            out.push("at least one goal formula is required".to_string());
        }
        let mut seen = BTreeSet::new();
        for p in &self.candidate_activities {
            if !seen.insert(&p.activity_id) {
                out.push(format!("candidate `{}` listed twice", p.activity_id));
            }
        }
        out
    }

    fn profile(&self, id: &str) -> Option<&ActivityProfile> {
        self.candidate_activities.iter().find(|p| p.activity_id == id)
    }

    /// The trace a sequence denotes: each position holds its activity id and tags.
    pub fn trace_of<S: AsRef<str>>(&self, seq: &[S]) -> Trace {
        seq.iter()
            .map(|a| {
                let mut letter = Letter::from([a.as_ref().to_string()]);
                if let Some(p) = self.profile(a.as_ref()) {
                    letter.extend(p.taxonomy_tags.iter().cloned());
                }
                letter
            })
            .collect()
    }

    /// Goals followed by the derived dataflow constraints.
    pub fn constraints(&self) -> Vec<Formula> {
        let mut all = self.goals.clone();
        all.extend(derive_dataflow_constraints(&self.candidate_activities, &self.initially_available).formulas);
        all
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Solution {
    pub length: usize,
    /// All satisfying sequences of the minimal length, in lexicographic order.
    pub sequences: Vec<Vec<Ident>>,
    pub derived_constraints: Vec<Formula>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("malformed synthesis spec: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("no solution within length {max_length}{}", unproducible_note(.unproducible))]
    NoSolution { max_length: usize, unproducible: Vec<(String, String)> },
    #[error("cannot materialize: {0}")]
    Materialize(String),
}

fn unproducible_note(u: &[(String, String)]) -> String {
    if u.is_empty() {
        return String::new();
    }
    let parts: Vec<String> = u.iter().map(|(a, d)| format!("`{a}` needs `{d}`")).collect();
    format!(" (nothing provides: {})", parts.join(", "))
}

/// Iterative deepening over sequence length `1..=maxLength`. An activity may
/// be placed only once everything it requires is available.
pub fn synthesize(spec: &SynthesisSpec) -> Result<Solution, SynthError> {
    let problems = spec.problems();
    if !problems.is_empty() {
        return Err(SynthError::Invalid(problems));
    }
    let derived = derive_dataflow_constraints(&spec.candidate_activities, &spec.initially_available);
    let mut all = spec.goals.clone();
    all.extend(derived.formulas.iter().cloned());

    let mut candidates: Vec<&ActivityProfile> = spec.candidate_activities.iter().collect();
    candidates.sort_by(|a, b| a.activity_id.cmp(&b.activity_id));

    for length in 1..=spec.max_length {
        let mut found = Vec::new();
        let mut prefix = Vec::with_capacity(length);
        extend(spec, &candidates, &all, length, &mut prefix, &spec.initially_available, &mut found);
        if !found.is_empty() {
            return Ok(Solution { length, sequences: found, derived_constraints: derived.formulas });
        }
    }
    Err(SynthError::NoSolution { max_length: spec.max_length, unproducible: derived.unproducible })
}

fn extend<'a>(
    spec: &SynthesisSpec,
    candidates: &[&'a ActivityProfile],
    constraints: &[Formula],
    length: usize,
    prefix: &mut Vec<&'a ActivityProfile>,
    available: &BTreeSet<String>,
    found: &mut Vec<Vec<Ident>>,
) {
    if prefix.len() == length {
        let seq: Vec<&str> = prefix.iter().map(|p| p.activity_id.as_str()).collect();
        let trace = spec.trace_of(&seq);
        if constraints.iter().all(|f| eval(f, &trace, 0).unwrap_or(false)) {
            found.push(seq.into_iter().map(String::from).collect());
        }
        return;
    }
    for &c in candidates {
        if !spec.allow_repeats && prefix.iter().any(|p| p.activity_id == c.activity_id) {
            continue;
        }
        if !c.requires.is_subset(available) {
            continue;
        }
        let mut next = available.clone();
        next.extend(c.provides.iter().cloned());
        prefix.push(c);
        extend(spec, candidates, constraints, length, prefix, &next, found);
        prefix.pop();
    }
}

/// Re-evaluates every goal and derived constraint on `seq`, independently
/// of the search. Returns the first violated formula.
pub fn validate_solution<S: AsRef<str>>(seq: &[S], spec: &SynthesisSpec) -> Result<(), Formula> {
    if seq.is_empty() {
        return match spec.constraints().into_iter().next() {
            Some(f) => Err(f),
            None => Ok(()),
        };
    }
    let trace = spec.trace_of(seq);
    for f in spec.constraints() {
        if !eval(&f, &trace, 0).unwrap_or(false) {
            return Err(f);
        }
    }
    Ok(())
}

/// Builds the linear chain `start -> a1 -yes-> a2 -yes-> ... -yes-> valid`,
/// with every `no` branch ending in `invalid`.
///
/// Inputs of each activity are bound to the most recent variable whose type
/// fits; graph inputs come first, then `yes` outputs in order. Boolean
/// outputs of the interface are `true` on `valid` and `false` on `invalid`.
pub fn materialize<S: AsRef<str>>(seq: &[S], spec: &SynthesisSpec, cat: &dyn Catalog, graph_id: &str) -> Result<Slg, SynthError> {
    let fail = |m: String| SynthError::Materialize(m);
    if seq.is_empty() {
        return Err(fail("empty activity sequence".into()));
    }
    let iface = cat
        .interface(&spec.interface_id)
        .ok_or_else(|| fail(format!("unknown interface graph `{}`", spec.interface_id)))?;
    let branches: BTreeSet<&str> = iface.signature.branch_names();
    if branches != BTreeSet::from([VALID, INVALID]) {
        return Err(fail(format!(
            "interface `{}` must have exactly the branches `{VALID}` and `{INVALID}`",
            iface.id
        )));
    }
    let end_outputs = |value: bool, outs: &[Param]| -> Result<Vec<Binding>, SynthError> {
        outs.iter()
            .map(|p| match &p.ty {
                SemanticType::Primitive(PrimitiveKind::Bool) => Ok(Binding::literal(value)),
                other => Err(fail(format!("interface output `{}` has non-boolean type {other}", p.name))),
            })
            .collect()
    };

    let mut g = Slg {
        id: graph_id.to_string(),
        signature: iface.signature.clone(),
        implements_id: Some(iface.id.clone()),
        context_decls: BTreeMap::new(),
        nodes: BTreeMap::new(),
        edges: Vec::new(),
        loose_edges: Vec::new(),
        icon: None,
        docs: format!("synthesized chain: {}", seq.iter().map(|s| s.as_ref()).collect::<Vec<_>>().join(" -> ")),
    };
    // Variables in the order they become available; searched newest first.
    let mut vars: Vec<(Ident, SemanticType)> = Vec::new();
    for p in &iface.signature.inputs {
        g.context_decls.insert(p.name.clone(), p.ty.clone());
        vars.push((p.name.clone(), p.ty.clone()));
    }
    g.nodes.insert("start".into(), Node::Start {});
    g.nodes.insert(VALID.into(), Node::End { branch: VALID.into(), outputs: end_outputs(true, &iface.signature.branches[VALID])? });
    g.nodes.insert(
        INVALID.into(),
        Node::End { branch: INVALID.into(), outputs: end_outputs(false, &iface.signature.branches[INVALID])? },
    );

    let mut prev = ("start".to_string(), crate::model::START_BRANCH.to_string());
    for (k, a) in seq.iter().enumerate() {
        let a = a.as_ref();
        let desc = cat.activity(a).ok_or_else(|| fail(format!("unknown activity `{a}`")))?;
        if desc.signature.branch_names() != BTreeSet::from([YES, NO]) {
            return Err(fail(format!("activity `{a}` does not have exactly the branches `{YES}` and `{NO}`")));
        }
        if desc.instance_type.is_some() {
            return Err(fail(format!("activity `{a}` is virtual and needs a service instance")));
        }
        let mut inputs = Vec::new();
        for p in &desc.signature.inputs {
            let var = vars
                .iter()
                .rev()
                .find(|(_, t)| is_subtype(t, &p.ty, cat))
                .ok_or_else(|| fail(format!("no value of type {} available for input `{}` of `{a}`", p.ty, p.name)))?;
            inputs.push(Binding::var(var.0.clone()));
        }
        let mut targets = Vec::new();
        for p in &desc.signature.branches[YES] {
            match g.context_decls.get(&p.name) {
                Some(t) if *t != p.ty => {
                    return Err(fail(format!("output `{}` of `{a}` clashes with an earlier {t}", p.name)));
                }
                _ => {}
            }
            g.context_decls.insert(p.name.clone(), p.ty.clone());
            vars.push((p.name.clone(), p.ty.clone()));
            targets.push(p.name.clone());
        }
        let node_id = if g.nodes.contains_key(a) { format!("{a}#{}", k + 1) } else { a.to_string() };
        g.nodes.insert(
            node_id.clone(),
            Node::Atomic {
                activity_id: a.to_string(),
                instance_var: None,
                inputs,
                output_targets: BTreeMap::from([(YES.to_string(), targets)]),
            },
        );
        g.edges.push(Edge::new(prev.0, prev.1, node_id.clone()));
        g.edges.push(Edge::new(node_id.clone(), NO, INVALID));
        prev = (node_id, YES.to_string());
    }
    g.edges.push(Edge::new(prev.0, prev.1, VALID));

    let structural = validate_graph(&g, cat);
    if !structural.is_empty() {
        let msgs: Vec<String> = structural.iter().map(ToString::to_string).collect();
        return Err(fail(msgs.join("; ")));
    }
    let diags = check_graph(&g, cat);
    if !diags.is_empty() {
        let msgs: Vec<String> = diags.iter().map(ToString::to_string).collect();
        return Err(fail(msgs.join("; ")));
    }
    conforms(&g, iface, cat).map_err(|errs| {
        fail(errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
    })?;
    Ok(g)
}
