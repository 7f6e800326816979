//! Graphviz rendering of service graphs.

use std::fmt::Write;

use crate::model::{InstanceSource, Node, SemanticType, Slg};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

fn label(id: &str, node: &Node) -> (String, &'static str) {
    match node {
        Node::Start {} => ("start".into(), "circle"),
        Node::End { branch, .. } => (branch.clone(), "doublecircle"),
        Node::Atomic { activity_id, .. } => (activity_id.clone(), "box"),
        Node::GraphSib { graph_type, instance_source, .. } => {
            let target = match graph_type {
                SemanticType::Graph { graph_id, .. } => graph_id.clone(),
                other => other.to_string(),
            };
            let shape = match instance_source {
                InstanceSource::Fresh {} => "box3d",
                InstanceSource::FromContext { .. } => "component",
            };
            (if target == id { target } else { format!("{id}\n[{target}]") }, shape)
        }
        Node::Constructor { service_graph_id, .. } => (format!("new {service_graph_id}"), "house"),
    }
}

/// DOT source for one graph. Node labels are activity or graph ids, edge
/// labels branch names; loose edges point to a dashed `?` node.
pub fn to_dot(g: &Slg) -> String {
    let mut out = String::new();
    writeln!(out, "digraph {} {{", quote(&g.id)).unwrap();
    writeln!(out, "  rankdir=TB;").unwrap();
    for (id, node) in &g.nodes {
        let (text, shape) = label(id, node);
        writeln!(out, "  {} [label={}, shape={shape}];", quote(id), quote(&text)).unwrap();
    }
    for e in &g.edges {
        writeln!(out, "  {} -> {} [label={}];", quote(&e.src_node_id), quote(&e.dst_node_id), quote(&e.branch)).unwrap();
    }
    for (i, l) in g.loose_edges.iter().enumerate() {
        let hole = format!("?{i}");
        writeln!(out, "  {} [label=\"?\", shape=diamond, style=dashed];", quote(&hole)).unwrap();
        writeln!(out, "  {} -> {} [label={}, style=dashed];", quote(&l.src_node_id), quote(&hole), quote(&l.branch)).unwrap();
        for (branch, dst) in &l.next {
            writeln!(out, "  {} -> {} [label={}, style=dashed];", quote(&hole), quote(dst), quote(branch)).unwrap();
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::Catalog;
    use crate::ocs;

    #[test]
    fn labels_and_loose_edges() {
        let lib = ocs::library();
        let dot = to_dot(lib.service("loose-proceedings-validation").unwrap());
        assert!(dot.starts_with("digraph \"loose-proceedings-validation\" {"));
        assert!(dot.contains("\"iterate papers in proceedings\" -> \"?0\" [label=\"next\", style=dashed];"));
        assert!(dot.contains("[label=\"?\", shape=diamond, style=dashed]"));
        assert!(dot.contains("label=\"open paper iterator\""));

        let dot = to_dot(lib.service("validate-payment").unwrap());
        assert!(dot.contains("-> \"valid\" [label=\"yes\"]"));
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("a\"b\\c"), "\"a\\\"b\\\\c\"");
    }
}
