// SPDX-License-Identifier: Apache-2.0

//! Graphviz export. Entailment edges are solid, rebase edges dashed; rebased
//! nodes are drawn dashed and cancelled ones with a double border.

use std::fmt::Write;

use crate::graph::EntailmentGraph;
use crate::ids::OpId;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn to_dot(g: &EntailmentGraph, name: &str) -> String {
    let mut out = String::new();
    writeln!(out, "digraph {} {{", quote(name)).unwrap();
    out.push_str("  rankdir=TB;\n  node [shape=box, fontname=\"monospace\"];\n");
    let mut any_tombstone = false;
    for op in g.nodes() {
        let id = op.id.to_string();
        let label = format!("{}\\n{}", id, op.summary().replace('"', "\\\""));
        let mut attrs = format!("label=\"{label}\"");
        if g.is_tombstoned(&op.id) {
            attrs.push_str(", style=dashed, peripheries=2");
            any_tombstone = true;
        } else if g.is_rebased(&op.id) {
            attrs.push_str(", style=dashed");
        }
        writeln!(out, "  {} [{attrs}];", quote(&id)).unwrap();
    }
    if any_tombstone {
        writeln!(
            out,
            "  {} [label=\"∅\", shape=circle];",
            quote(&OpId::tombstone().to_string())
        )
        .unwrap();
    }
    for op in g.nodes() {
        for p in &op.premises {
            writeln!(
                out,
                "  {} -> {} [label=\"⊢\"];",
                quote(&p.to_string()),
                quote(&op.id.to_string())
            )
            .unwrap();
        }
    }
    for (op, targets) in g.rebases() {
        for t in targets {
            writeln!(
                out,
                "  {} -> {} [style=dashed, label=\"⊢̂\"];",
                quote(&t.to_string()),
                quote(&op.to_string())
            )
            .unwrap();
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::register::{LwwPolicy, RegisterKind, Schema};
    use crate::sync::{Manual, ReplayAll, Replica};
    use crate::{ActionDesc, ReplicaId};
    use std::sync::Arc;

    #[test]
    fn marks_rebases_and_tombstones() {
        let schema = Arc::new(Schema::of_kinds(&[RegisterKind::Plain], LwwPolicy::Strict));
        let mut a = Replica::new(ReplicaId::new("a").unwrap(), schema.clone());
        let mut b = Replica::new(ReplicaId::new("b").unwrap(), schema);
        a.issue(vec![ActionDesc::mov(0, 1)]).unwrap();
        let y = b.issue(vec![ActionDesc::mov(0, 2)]).unwrap();
        a.sync(&b.publish(), &Manual).unwrap();
        a.resolve(&y, None, Some(&ReplayAll)).unwrap();
        let dot = to_dot(a.graph(), "a");
        assert!(dot.starts_with("digraph \"a\" {"));
        assert!(dot.contains("\"$c:0\" -> \"a:1\" [label=\"⊢\"];"));
        assert!(dot.contains("style=dashed, label=\"⊢̂\""));
        assert!(!dot.contains("peripheries=2"));
    }
}
