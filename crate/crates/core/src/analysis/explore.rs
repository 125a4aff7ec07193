//! Breadth-first reachability graph construction.

use indexmap::IndexSet;
use thiserror::Error;

use crate::par::{self, Exec};
use crate::petri::{Capacity, NetDefinition, NetState};

/// Default cap on the number of explored states.
pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: usize,
    pub transition: usize,
    pub to: usize,
}

/// A pair of states on one firing path where `descendant` strictly covers
/// `ancestor` with equal residual counters, so the path between them can be
/// pumped forever.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OmegaWitness {
    pub ancestor: usize,
    pub descendant: usize,
}

#[derive(Debug, Clone)]
pub struct ReachGraph {
    nodes: IndexSet<NetState>,
    pub edges: Vec<Edge>,
    pub root: usize,
    pub truncated: bool,
    pub omega_witness: Option<OmegaWitness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("exploration budget must be at least 1")]
    ZeroBudget,
}

impl ReachGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, index: usize) -> &NetState {
        &self.nodes[index]
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &NetState> {
        self.nodes.iter()
    }

    pub fn index_of(&self, state: &NetState) -> Option<usize> {
        self.nodes.get_index_of(state)
    }

    /// Forward adjacency lists (edge indices) per node.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.node_count()];
        for (i, e) in self.edges.iter().enumerate() {
            out[e.from].push(i);
        }
        out
    }

    /// Reverse adjacency lists (source nodes) per node.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.node_count()];
        for e in &self.edges {
            out[e.to].push(e.from);
        }
        out
    }

    /// Nodes from which some node in `targets` is reachable.
    pub fn backward_closure(&self, preds: &[Vec<usize>], targets: &[bool]) -> Vec<bool> {
        let mut seen = targets.to_vec();
        let mut stack: Vec<usize> = (0..seen.len()).filter(|&i| seen[i]).collect();
        while let Some(n) = stack.pop() {
            for &p in &preds[n] {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        seen
    }
}

/// Explore with the default execution strategy.
pub fn explore(net: &NetDefinition, budget: usize) -> Result<ReachGraph, ExploreError> {
    explore_with(net, budget, Exec::default())
}

/// Level-synchronous BFS. Successor computation for a whole level may run in
/// parallel; merging is sequential in (node, transition) order, so node
/// numbering is identical to a plain sequential BFS.
pub fn explore_with(net: &NetDefinition, budget: usize, exec: Exec) -> Result<ReachGraph, ExploreError> {
    if budget == 0 {
        return Err(ExploreError::ZeroBudget);
    }
    let mut nodes = IndexSet::new();
    nodes.insert(net.initial_state());
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut edges = Vec::new();
    let mut truncated = false;
    let mut omega_witness = None;

    let mut level_start = 0;
    while level_start < nodes.len() && !truncated {
        let level_end = nodes.len();
        let level: Vec<&NetState> = (level_start..level_end).map(|i| &nodes[i]).collect();
        let expanded = par::map_slice(exec, &level, |s| net.successors(s));
        drop(level);

        'merge: for (offset, succs) in expanded.into_iter().enumerate() {
            let from = level_start + offset;
            for (t, s) in succs {
                let to = match nodes.get_index_of(&s) {
                    Some(i) => i,
                    None => {
                        if nodes.len() >= budget {
                            truncated = true;
                            break 'merge;
                        }
                        if omega_witness.is_none() {
                            omega_witness =
                                find_domination(net, &nodes, &parent, from, &s).map(|ancestor| OmegaWitness {
                                    ancestor,
                                    descendant: nodes.len(),
                                });
                        }
                        nodes.insert(s);
                        parent.push(Some(from));
                        nodes.len() - 1
                    }
                };
                edges.push(Edge {
                    from,
                    transition: t,
                    to,
                });
            }
        }
        level_start = level_end;
    }

    Ok(ReachGraph {
        nodes,
        edges,
        root: 0,
        truncated,
        omega_witness,
    })
}

/// First ancestor (walking the BFS tree upward from `from`) that `state`
/// strictly dominates on unbounded-capacity places only.
fn find_domination(
    net: &NetDefinition,
    nodes: &IndexSet<NetState>,
    parent: &[Option<usize>],
    from: usize,
    state: &NetState,
) -> Option<usize> {
    let mut cursor = Some(from);
    while let Some(a) = cursor {
        let anc = &nodes[a];
        if state.strictly_dominates(anc)
            && state
                .marking
                .iter()
                .zip(&anc.marking)
                .zip(net.places())
                .all(|((x, y), p)| x == y || p.capacity == Capacity::Unbounded)
        {
            return Some(a);
        }
        cursor = parent[a];
    }
    None
}
