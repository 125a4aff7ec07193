//! Reachability graph compression by repeated-transition chains and
//! homogeneous (equal Parikh vector) path bundles.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::explore::ReachGraph;
use crate::petri::NetDefinition;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EdgeLabel {
    Transition {
        transition: usize,
    },
    /// `count >= 2` consecutive firings of one transition.
    Star {
        transition: usize,
        count: u32,
    },
    /// Homogeneous class: per-transition occurrence counts, sorted by index.
    Parikh {
        counts: Vec<(usize, u32)>,
    },
}

impl EdgeLabel {
    pub fn parikh(&self) -> BTreeMap<usize, u32> {
        match self {
            EdgeLabel::Transition { transition } => BTreeMap::from([(*transition, 1)]),
            EdgeLabel::Star { transition, count } => BTreeMap::from([(*transition, *count)]),
            EdgeLabel::Parikh { counts } => counts.iter().copied().collect(),
        }
    }

    pub fn render(&self, net: &NetDefinition) -> String {
        match self {
            EdgeLabel::Transition { transition } => net.transition_id(*transition).to_string(),
            EdgeLabel::Star { transition, .. } => format!("{}*", net.transition_id(*transition)),
            EdgeLabel::Parikh { counts } => {
                let parts: Vec<String> = counts
                    .iter()
                    .map(|(t, c)| format!("{}:{}", net.transition_id(*t), c))
                    .collect();
                format!("({})", parts.join(" "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressedEdge {
    pub from: usize,
    pub to: usize,
    pub label: EdgeLabel,
}

/// Nodes keep their indices from the source [`ReachGraph`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressedGraph {
    pub nodes: Vec<usize>,
    pub edges: Vec<CompressedEdge>,
    pub root: usize,
}

impl fmt::Display for CompressedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} nodes, {} edges", self.nodes.len(), self.edges.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompressError {
    #[error("cannot compress a truncated reachability graph")]
    Truncated,
}

pub fn compress(graph: &ReachGraph) -> Result<CompressedGraph, CompressError> {
    if graph.truncated {
        return Err(CompressError::Truncated);
    }
    let edges = graph
        .edges
        .iter()
        .map(|e| CompressedEdge {
            from: e.from,
            to: e.to,
            label: EdgeLabel::Transition {
                transition: e.transition,
            },
        })
        .collect();
    Ok(compress_edges(graph.node_count(), graph.root, edges))
}

struct Work {
    alive: Vec<bool>,
    edges: Vec<Option<CompressedEdge>>,
    root: usize,
}

impl Work {
    fn adjacency(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let mut out = vec![Vec::new(); self.alive.len()];
        let mut inc = vec![Vec::new(); self.alive.len()];
        for (i, e) in self.edges.iter().enumerate() {
            if let Some(e) = e {
                out[e.from].push(i);
                inc[e.to].push(i);
            }
        }
        (out, inc)
    }

    fn edge(&self, i: usize) -> &CompressedEdge {
        self.edges[i].as_ref().expect("live edge")
    }

    fn pass_through(&self, n: usize, out: &[Vec<usize>], inc: &[Vec<usize>]) -> bool {
        n != self.root && out[n].len() == 1 && inc[n].len() == 1
    }
}

/// Compress an arbitrary labelled multigraph; exposed for graphs built by hand.
pub fn compress_edges(node_count: usize, root: usize, edges: Vec<CompressedEdge>) -> CompressedGraph {
    let mut w = Work {
        alive: vec![true; node_count],
        edges: edges.into_iter().map(Some).collect(),
        root,
    };
    star_pass(&mut w);
    homogeneous_pass(&mut w);

    CompressedGraph {
        nodes: (0..node_count).filter(|&n| w.alive[n]).collect(),
        edges: w.edges.into_iter().flatten().collect(),
        root,
    }
}

fn single_transition(label: &EdgeLabel) -> Option<usize> {
    match label {
        EdgeLabel::Transition { transition } => Some(*transition),
        _ => None,
    }
}

/// Collapse maximal runs `a -t-> x1 -t-> ... -t-> b` whose intermediates have
/// a single incoming and a single outgoing edge into one `t*` edge.
fn star_pass(w: &mut Work) {
    let (out, inc) = w.adjacency();
    let inner = |w: &Work, n: usize, t: usize| {
        w.pass_through(n, &out, &inc)
            && single_transition(&w.edge(inc[n][0]).label) == Some(t)
            && single_transition(&w.edge(out[n][0]).label) == Some(t)
    };
    let mut consumed = vec![false; w.edges.len()];
    let mut added = Vec::new();
    for head in 0..w.edges.len() {
        if consumed[head] {
            continue;
        }
        let Some(t) = single_transition(&w.edge(head).label) else {
            continue;
        };
        let start = w.edge(head).from;
        if inner(w, start, t) {
            continue;
        }
        let mut chain = vec![head];
        let mut middle = Vec::new();
        let mut cur = w.edge(head).to;
        while cur != start && inner(w, cur, t) && !middle.contains(&cur) {
            middle.push(cur);
            let next = out[cur][0];
            chain.push(next);
            cur = w.edge(next).to;
        }
        if chain.len() < 2 {
            continue;
        }
        for &e in &chain {
            consumed[e] = true;
        }
        for &n in &middle {
            w.alive[n] = false;
        }
        added.push(CompressedEdge {
            from: start,
            to: cur,
            label: EdgeLabel::Star {
                transition: t,
                count: chain.len() as u32,
            },
        });
    }
    for (i, c) in consumed.into_iter().enumerate() {
        if c {
            w.edges[i] = None;
        }
    }
    w.edges.extend(added.into_iter().map(Some));
}

struct Path {
    edges: Vec<usize>,
    middle: Vec<usize>,
    end: usize,
}

/// Endpoints, Parikh vector and member paths of one bundle.
type Bundle = (usize, usize, Vec<(usize, u32)>, Vec<Path>);

/// Collapse bundles of at least two paths between the same pair of nodes,
/// through single-in/single-out intermediates, that share a Parikh vector.
fn homogeneous_pass(w: &mut Work) {
    let (out, inc) = w.adjacency();
    let mut bundles: Vec<Bundle> = Vec::new();
    for u in 0..w.alive.len() {
        if !w.alive[u] || w.pass_through(u, &out, &inc) {
            continue;
        }
        let mut groups: HashMap<(usize, Vec<(usize, u32)>), usize> = HashMap::new();
        for &e in &out[u] {
            let mut parikh = w.edge(e).label.parikh();
            let mut path = Path {
                edges: vec![e],
                middle: Vec::new(),
                end: w.edge(e).to,
            };
            while path.end != u && w.pass_through(path.end, &out, &inc) && !path.middle.contains(&path.end) {
                let next = out[path.end][0];
                for (t, c) in w.edge(next).label.parikh() {
                    *parikh.entry(t).or_default() += c;
                }
                path.middle.push(path.end);
                path.edges.push(next);
                path.end = w.edge(next).to;
            }
            let key: Vec<(usize, u32)> = parikh.into_iter().collect();
            match groups.get(&(path.end, key.clone())) {
                Some(&b) => bundles[b].3.push(path),
                None => {
                    groups.insert((path.end, key.clone()), bundles.len());
                    bundles.push((u, path.end, key, vec![path]));
                }
            }
        }
    }

    for (u, v, counts, paths) in bundles {
        if paths.len() < 2 {
            continue;
        }
        for p in paths {
            for e in p.edges {
                w.edges[e] = None;
            }
            for n in p.middle {
                w.alive[n] = false;
            }
        }
        w.edges.push(Some(CompressedEdge {
            from: u,
            to: v,
            label: EdgeLabel::Parikh { counts },
        }));
    }
}

/// Reachability matrix restricted to `nodes`, for checking that compression
/// preserves reachability among surviving nodes.
pub fn reachability_among(
    node_count: usize,
    edges: impl Iterator<Item = (usize, usize)> + Clone,
    nodes: &[usize],
) -> Vec<Vec<bool>> {
    let mut adj = vec![Vec::new(); node_count];
    for (a, b) in edges {
        adj[a].push(b);
    }
    nodes
        .iter()
        .map(|&s| {
            let mut seen = vec![false; node_count];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(n) = stack.pop() {
                for &m in &adj[n] {
                    if !seen[m] {
                        seen[m] = true;
                        stack.push(m);
                    }
                }
            }
            nodes.iter().map(|&d| seen[d]).collect()
        })
        .collect()
}
