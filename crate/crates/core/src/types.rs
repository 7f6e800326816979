//! Subtyping over the semantic type lattice and interface conformance.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::library::Catalog;
use crate::model::{GraphKind, InterfaceGraph, SemanticType, Slg};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unresolved type: {0}")]
    Unresolved(String),
}

/// `a ≤ b` in the type lattice.
///
/// Domain types follow the declared supertype chain; a service graph type
/// is below the interface it implements; primitives relate only to themselves.
pub fn subtype_of(a: &SemanticType, b: &SemanticType, cat: &dyn Catalog) -> Result<bool, TypeError> {
    ensure_resolves(a, cat)?;
    ensure_resolves(b, cat)?;
    Ok(match (a, b) {
        (SemanticType::Primitive(x), SemanticType::Primitive(y)) => x == y,
        (SemanticType::Domain { name: sub }, SemanticType::Domain { name: sup }) => {
            domain_chain(sub, cat).iter().any(|n| n == sup)
        }
        (
            SemanticType::Graph { graph_id: g, kind: ka },
            SemanticType::Graph { graph_id: h, kind: kb },
        ) => match (ka, kb) {
            _ if ka == kb => g == h,
            (GraphKind::Service, GraphKind::Interface) => cat
                .service(g)
                .and_then(|s| s.implements_id.as_deref())
                .is_some_and(|i| i == h),
            _ => false,
        },
        _ => false,
    })
}

/// `subtype_of` with unresolved types treated as unrelated.
pub fn is_subtype(a: &SemanticType, b: &SemanticType, cat: &dyn Catalog) -> bool {
    subtype_of(a, b, cat).unwrap_or(false)
}

/// The domain type followed by its supertypes, nearest first.
///
/// Stops on a repeated name so a malformed declaration set cannot loop.
pub fn domain_chain(name: &str, cat: &dyn Catalog) -> Vec<String> {
    let mut chain = vec![name.to_string()];
    let mut cur = cat.domain(name).and_then(|d| d.supertype.clone());
    while let Some(next) = cur {
        if chain.contains(&next) {
            break;
        }
        cur = cat.domain(&next).and_then(|d| d.supertype.clone());
        chain.push(next);
    }
    chain
}

pub fn ensure_resolves(t: &SemanticType, cat: &dyn Catalog) -> Result<(), TypeError> {
    match t {
        SemanticType::Primitive(_) => Ok(()),
        SemanticType::Domain { name } => cat
            .domain(name)
            .map(|_| ())
            .ok_or_else(|| TypeError::Unresolved(format!("domain type `{name}`"))),
        SemanticType::Graph { graph_id, kind: GraphKind::Interface } => cat
            .interface(graph_id)
            .map(|_| ())
            .ok_or_else(|| TypeError::Unresolved(format!("interface graph `{graph_id}`"))),
        SemanticType::Graph { graph_id, kind: GraphKind::Service } => cat
            .service(graph_id)
            .map(|_| ())
            .ok_or_else(|| TypeError::Unresolved(format!("service graph `{graph_id}`"))),
    }
}

/// Where a conformance check failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum ConformanceError {
    #[serde(rename_all = "camelCase")]
    BranchSetMismatch { missing: Vec<String>, extra: Vec<String> },
    #[serde(rename_all = "camelCase")]
    ArityMismatch { branch: Option<String>, expected: usize, found: usize },
    /// `branch` is `None` for inputs.
    #[serde(rename_all = "camelCase")]
    VarianceViolation { branch: Option<String>, position: usize, service: String, interface: String },
    NotImplementing { expected: String, found: Option<String> },
}

impl fmt::Display for ConformanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConformanceError::BranchSetMismatch { missing, extra } => {
                write!(f, "branch-set mismatch: missing {missing:?}, extra {extra:?}")
            }
            ConformanceError::ArityMismatch { branch: None, expected, found } => {
                write!(f, "arity mismatch on inputs: interface has {expected}, graph has {found}")
            }
            ConformanceError::ArityMismatch { branch: Some(b), expected, found } => {
                write!(f, "arity mismatch on branch `{b}`: interface has {expected} outputs, graph has {found}")
            }
            ConformanceError::VarianceViolation { branch: None, position, service, interface } => write!(
                f,
                "variance violation at input {position}: interface type {interface} is not a subtype of graph type {service}"
            ),
            ConformanceError::VarianceViolation { branch: Some(b), position, service, interface } => write!(
                f,
                "variance violation at output {position} of branch `{b}`: graph type {service} is not a subtype of interface type {interface}"
            ),
            ConformanceError::NotImplementing { expected, found } => match found {
                Some(found) => write!(f, "graph implements `{found}`, not `{expected}`"),
                None => write!(f, "graph implements no interface, expected `{expected}`"),
            },
        }
    }
}

/// Checks that `g` may stand in for `i`: equal branch sets, contravariant
/// inputs, covariant outputs, positions matched by index.
pub fn conforms(g: &Slg, i: &InterfaceGraph, cat: &dyn Catalog) -> Result<(), Vec<ConformanceError>> {
    let mut errs = Vec::new();
    if g.implements_id.as_deref() != Some(i.id.as_str()) {
        errs.push(ConformanceError::NotImplementing { expected: i.id.clone(), found: g.implements_id.clone() });
    }

    let gs = &g.signature;
    let is = &i.signature;
    if gs.inputs.len() != is.inputs.len() {
        errs.push(ConformanceError::ArityMismatch { branch: None, expected: is.inputs.len(), found: gs.inputs.len() });
    } else {
        for (pos, (gp, ip)) in gs.inputs.iter().zip(&is.inputs).enumerate() {
            if !is_subtype(&ip.ty, &gp.ty, cat) {
                errs.push(ConformanceError::VarianceViolation {
                    branch: None,
                    position: pos,
                    service: gp.ty.to_string(),
                    interface: ip.ty.to_string(),
                });
            }
        }
    }

    let missing: Vec<String> = is.branches.keys().filter(|b| !gs.branches.contains_key(*b)).cloned().collect();
    let extra: Vec<String> = gs.branches.keys().filter(|b| !is.branches.contains_key(*b)).cloned().collect();
    if !missing.is_empty() || !extra.is_empty() {
        errs.push(ConformanceError::BranchSetMismatch { missing, extra });
    }
    for (branch, iouts) in &is.branches {
        let Some(gouts) = gs.branches.get(branch) else { continue };
        if gouts.len() != iouts.len() {
            errs.push(ConformanceError::ArityMismatch {
                branch: Some(branch.clone()),
                expected: iouts.len(),
                found: gouts.len(),
            });
            continue;
        }
        for (pos, (gp, ip)) in gouts.iter().zip(iouts).enumerate() {
            if !is_subtype(&gp.ty, &ip.ty, cat) {
                errs.push(ConformanceError::VarianceViolation {
                    branch: Some(branch.clone()),
                    position: pos,
                    service: gp.ty.to_string(),
                    interface: ip.ty.to_string(),
                });
            }
        }
    }

    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::GraphLibrary;
    use crate::model::{DomainDecl, Node, Param, Signature};
    use std::collections::BTreeMap;

    fn lib() -> GraphLibrary {
        let mut doc = crate::library::LibraryDocument::named("t");
        doc.domain_types = vec![
            DomainDecl { name: "Payment".into(), supertype: None, docs: String::new() },
            DomainDecl { name: "CreditCardPayment".into(), supertype: Some("Payment".into()), docs: String::new() },
            DomainDecl { name: "Visa".into(), supertype: Some("CreditCardPayment".into()), docs: String::new() },
        ];
        let sig = Signature {
            inputs: vec![Param::new("x", SemanticType::domain("CreditCardPayment"))],
            branches: BTreeMap::from([("ok".to_string(), vec![Param::new("y", SemanticType::domain("CreditCardPayment"))])]),
        };
        doc.interfaces = vec![InterfaceGraph { id: "I".into(), signature: sig.clone(), docs: String::new() }];
        let mut nodes = BTreeMap::new();
        nodes.insert("s".to_string(), Node::Start {});
        nodes.insert("e".to_string(), Node::End { branch: "ok".into(), outputs: vec![crate::model::Binding::var("x")] });
        doc.graphs = vec![Slg {
            id: "G".into(),
            signature: sig,
            implements_id: Some("I".into()),
            context_decls: BTreeMap::from([("x".to_string(), SemanticType::domain("CreditCardPayment"))]),
            nodes,
            edges: vec![crate::model::Edge::new("s", "start", "e")],
            loose_edges: vec![],
            icon: None,
            docs: String::new(),
        }];
        GraphLibrary::from_document(doc).unwrap()
    }

    #[test]
    fn domain_chain_subtyping() {
        let l = lib();
        let visa = SemanticType::domain("Visa");
        let pay = SemanticType::domain("Payment");
        assert!(subtype_of(&visa, &pay, &l).unwrap());
        assert!(!subtype_of(&pay, &visa, &l).unwrap());
        assert!(subtype_of(&pay, &pay, &l).unwrap());
        assert!(subtype_of(&SemanticType::domain("Nope"), &pay, &l).is_err());
    }

    #[test]
    fn graph_subtyping() {
        let l = lib();
        assert!(subtype_of(&SemanticType::service("G"), &SemanticType::interface("I"), &l).unwrap());
        assert!(!subtype_of(&SemanticType::interface("I"), &SemanticType::service("G"), &l).unwrap());
        assert!(!subtype_of(&SemanticType::bool(), &SemanticType::int(), &l).unwrap());
    }

    #[test]
    fn conformance_variance() {
        let l = lib();
        let g = l.service("G").unwrap();
        let i = l.interface("I").unwrap();
        assert!(conforms(g, i, &l).is_ok());

        // Narrowing an input on the graph side breaks contravariance.
        let mut narrowed = (**g).clone();
        narrowed.signature.inputs[0].ty = SemanticType::domain("Visa");
        let errs = conforms(&narrowed, i, &l).unwrap_err();
        assert!(matches!(errs[0], ConformanceError::VarianceViolation { branch: None, position: 0, .. }));

        // Narrowing an output is fine, widening is not.
        let mut out = (**g).clone();
        out.signature.branches.get_mut("ok").unwrap()[0].ty = SemanticType::domain("Visa");
        assert!(conforms(&out, i, &l).is_ok());
        out.signature.branches.get_mut("ok").unwrap()[0].ty = SemanticType::domain("Payment");
        assert!(conforms(&out, i, &l).is_err());

        let mut missing = (**g).clone();
        missing.signature.branches.clear();
        missing.signature.branches.insert("other".into(), vec![]);
        let errs = conforms(&missing, i, &l).unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, ConformanceError::BranchSetMismatch { .. })));
        assert!(errs[0].to_string().contains("branch-set mismatch"));
    }
}
