//! Graphviz DOT rendering of reachability graphs.

use std::fmt::Write as _;

use super::compress::CompressedGraph;
use super::explore::ReachGraph;
use crate::petri::NetDefinition;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn header(out: &mut String, net: &NetDefinition, suffix: &str) {
    let _ = writeln!(out, "digraph \"{}{}\" {{", escape(net.name()), suffix);
    out.push_str("  rankdir=LR;\n  node [shape=box, fontname=\"monospace\"];\n");
}

fn node(out: &mut String, net: &NetDefinition, graph: &ReachGraph, n: usize) {
    let state = graph.node(n);
    let style = if n == graph.root { ", style=bold" } else { "" };
    let _ = writeln!(
        out,
        "  m{n} [label=\"M{n}\\n{}\"{style}];",
        escape(&state.describe(net))
    );
}

/// Full reachability graph; node labels list nonzero marking entries.
pub fn reach_to_dot(net: &NetDefinition, graph: &ReachGraph) -> String {
    let mut out = String::new();
    header(&mut out, net, "");
    for n in 0..graph.node_count() {
        node(&mut out, net, graph, n);
    }
    for e in &graph.edges {
        let _ = writeln!(
            out,
            "  m{} -> m{} [label=\"{}\"];",
            e.from,
            e.to,
            escape(net.transition_id(e.transition))
        );
    }
    out.push_str("}\n");
    out
}

/// Compressed graph; edges show single, starred or Parikh-class labels.
pub fn compressed_to_dot(net: &NetDefinition, graph: &ReachGraph, compressed: &CompressedGraph) -> String {
    let mut out = String::new();
    header(&mut out, net, " (compressed)");
    for &n in &compressed.nodes {
        node(&mut out, net, graph, n);
    }
    for e in &compressed.edges {
        let _ = writeln!(
            out,
            "  m{} -> m{} [label=\"{}\"];",
            e.from,
            e.to,
            escape(&e.label.render(net))
        );
    }
    out.push_str("}\n");
    out
}
