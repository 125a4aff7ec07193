//! Boundedness, liveness and workflow soundness over a reachability graph.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::explore::{explore_with, ExploreError, ReachGraph};
use crate::par::{self, Exec};
use crate::petri::{workflow_views, NetDefinition, NetState, WorkflowError, WorkflowInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Bound {
    Finite(u32),
    Unbounded,
    Unknown,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(b) => write!(f, "{b}"),
            Bound::Unbounded => f.write_str("unbounded"),
            Bound::Unknown => f.write_str("unknown"),
        }
    }
}

/// Per-place bound, indexed like the net's places.
pub fn bounds(net: &NetDefinition, graph: &ReachGraph) -> Vec<Bound> {
    let n = net.place_count();
    if let Some(w) = graph.omega_witness {
        let (lo, hi) = (graph.node(w.ancestor), graph.node(w.descendant));
        return (0..n)
            .map(|p| {
                if hi.marking[p] > lo.marking[p] {
                    Bound::Unbounded
                } else {
                    Bound::Unknown
                }
            })
            .collect();
    }
    if graph.truncated {
        return vec![Bound::Unknown; n];
    }
    let mut max = vec![0u32; n];
    for s in graph.nodes() {
        for (m, &v) in max.iter_mut().zip(&s.marking) {
            *m = (*m).max(v);
        }
    }
    max.into_iter().map(Bound::Finite).collect()
}

/// Liveness per transition, `None` when the graph is incomplete.
pub fn liveness(net: &NetDefinition, graph: &ReachGraph) -> Vec<Option<bool>> {
    liveness_with(net, graph, Exec::default())
}

pub fn liveness_with(net: &NetDefinition, graph: &ReachGraph, exec: Exec) -> Vec<Option<bool>> {
    if graph.truncated {
        return vec![None; net.transition_count()];
    }
    let preds = graph.predecessors();
    let mut enabling = vec![vec![false; graph.node_count()]; net.transition_count()];
    for e in &graph.edges {
        enabling[e.transition][e.from] = true;
    }
    par::map_slice(exec, &enabling, |targets| {
        Some(graph.backward_closure(&preds, targets).into_iter().all(|b| b))
    })
}

/// Violated soundness clause with a witness state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// 1: option to complete, 2: proper completion, 3: no dead transitions.
    pub clause: u8,
    pub reason: String,
    /// Nonzero marking entries of the witness state.
    pub witness: Option<String>,
    pub witness_marking: Option<Vec<u32>>,
    pub dead_transitions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Soundness {
    Sound,
    Unsound(Violation),
    Unknown { reason: String },
}

impl Soundness {
    pub fn is_sound(&self) -> bool {
        matches!(self, Soundness::Sound)
    }

    pub fn is_decided(&self) -> bool {
        !matches!(self, Soundness::Unknown { .. })
    }
}

impl fmt::Display for Soundness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Soundness::Sound => f.write_str("sound"),
            Soundness::Unsound(v) => {
                write!(f, "unsound (clause {}): {}", v.clause, v.reason)?;
                if let Some(w) = &v.witness {
                    write!(f, "; witness [{w}]")?;
                }
                Ok(())
            }
            Soundness::Unknown { reason } => write!(f, "unknown: {reason}"),
        }
    }
}

/// Direct check of the three soundness clauses on the graph of the
/// unextended workflow net.
pub fn soundness(net: &NetDefinition, workflow: &WorkflowInfo, graph: &ReachGraph) -> Result<Soundness, WorkflowError> {
    let end = workflow
        .end_place
        .as_deref()
        .and_then(|e| net.place_index(e))
        .filter(|_| workflow.is_workflow)
        .ok_or_else(|| WorkflowError::NotAWorkflow(net.name().to_string()))?;

    let is_end = |s: &NetState| {
        s.marking
            .iter()
            .enumerate()
            .all(|(p, &m)| if p == end { m == 1 } else { m == 0 })
    };
    let covers_end = |s: &NetState| s.marking[end] >= 1;
    let violation = |clause: u8, reason: String, s: Option<&NetState>| {
        Soundness::Unsound(Violation {
            clause,
            reason,
            witness: s.map(|s| s.describe(net)),
            witness_marking: s.map(|s| s.marking.clone()),
            dead_transitions: Vec::new(),
        })
    };

    if graph.truncated {
        // Proper completion can still be refuted on the explored part.
        if let Some(s) = graph.nodes().find(|s| covers_end(s) && !is_end(s)) {
            return Ok(violation(
                2,
                "reachable marking strictly covers the end marking".into(),
                Some(s),
            ));
        }
        return Ok(Soundness::Unknown {
            reason: format!("state budget exhausted after {} states", graph.node_count()),
        });
    }

    let preds = graph.predecessors();
    let targets: Vec<bool> = graph.nodes().map(covers_end).collect();
    let can_complete = graph.backward_closure(&preds, &targets);
    if let Some(i) = can_complete.iter().position(|ok| !ok) {
        return Ok(violation(
            1,
            "end marking unreachable from a reachable marking".into(),
            Some(graph.node(i)),
        ));
    }
    if let Some(s) = graph.nodes().find(|s| covers_end(s) && !is_end(s)) {
        return Ok(violation(
            2,
            "reachable marking strictly covers the end marking".into(),
            Some(s),
        ));
    }
    let mut fired = vec![false; net.transition_count()];
    for e in &graph.edges {
        fired[e.transition] = true;
    }
    let dead: Vec<String> = fired
        .iter()
        .enumerate()
        .filter(|(_, f)| !**f)
        .map(|(t, _)| net.transition_id(t).to_string())
        .collect();
    if !dead.is_empty() {
        return Ok(Soundness::Unsound(Violation {
            clause: 3,
            reason: format!("transitions never fire: {}", dead.join(", ")),
            witness: None,
            witness_marking: None,
            dead_transitions: dead,
        }));
    }
    Ok(Soundness::Sound)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Theorem1 {
    Holds,
    Fails { reason: String },
    Unknown { reason: String },
}

impl Theorem1 {
    pub fn is_decided(&self) -> bool {
        !matches!(self, Theorem1::Unknown { .. })
    }
}

impl fmt::Display for Theorem1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theorem1::Holds => f.write_str("extended net live and bounded"),
            Theorem1::Fails { reason } => write!(f, "fails: {reason}"),
            Theorem1::Unknown { reason } => write!(f, "unknown: {reason}"),
        }
    }
}

/// Liveness-and-boundedness verdict on an already explored extended net.
pub fn theorem1_from_graph(extended: &NetDefinition, graph: &ReachGraph, exec: Exec) -> Theorem1 {
    let bounds = bounds(extended, graph);
    if let Some(p) = bounds.iter().position(|b| *b == Bound::Unbounded) {
        return Theorem1::Fails {
            reason: format!("place {} is unbounded", extended.place_id(p)),
        };
    }
    if graph.truncated {
        return Theorem1::Unknown {
            reason: format!("state budget exhausted after {} states", graph.node_count()),
        };
    }
    let live = liveness_with(extended, graph, exec);
    let dead: Vec<&str> = live
        .iter()
        .enumerate()
        .filter(|(_, l)| **l == Some(false))
        .map(|(t, _)| extended.transition_id(t))
        .collect();
    if !dead.is_empty() {
        return Theorem1::Fails {
            reason: format!("not live: {}", dead.join(", ")),
        };
    }
    Theorem1::Holds
}

/// Soundness decided through liveness and boundedness of the extended net.
pub fn soundness_via_theorem1(net: &NetDefinition, budget: usize) -> Result<Theorem1, VerifyError> {
    let (_, extended, _) = workflow_views(net)?;
    let graph = explore_with(&extended, budget, Exec::default())?;
    Ok(theorem1_from_graph(&extended, &graph, Exec::default()))
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub truncated: bool,
    /// Omitted from deterministic reports.
    pub wall_time_ms: Option<f64>,
}

/// Full analysis of a workflow net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub net: String,
    pub workflow: WorkflowInfo,
    pub restore_on_reset: bool,
    pub budget: usize,
    /// Bounds of the extended net, keyed by place id.
    pub bounds: BTreeMap<String, Bound>,
    /// Liveness of the extended net; `null` when undecided.
    pub live: BTreeMap<String, Option<bool>>,
    pub sound: Soundness,
    pub theorem1: Theorem1,
    pub workflow_stats: GraphStats,
    pub extended_stats: GraphStats,
}

impl AnalysisReport {
    /// Whether the two soundness routes reach the same decided answer.
    pub fn routes_agree(&self) -> Option<bool> {
        if !self.sound.is_decided() || !self.theorem1.is_decided() {
            return None;
        }
        Some(self.sound.is_sound() == matches!(self.theorem1, Theorem1::Holds))
    }
}

/// Classify, explore both views of the workflow and run every check.
pub fn analyze(net: &NetDefinition, budget: usize, exec: Exec, timing: bool) -> Result<AnalysisReport, VerifyError> {
    let (plain, extended, info) = workflow_views(net)?;

    let started = std::time::Instant::now();
    let plain_graph = explore_with(&plain, budget, exec)?;
    let sound = soundness(&plain, &info, &plain_graph)?;
    let plain_ms = started.elapsed().as_secs_f64() * 1e3;

    let started = std::time::Instant::now();
    let ext_graph = explore_with(&extended, budget, exec)?;
    let ext_bounds = bounds(&extended, &ext_graph);
    let ext_live = liveness_with(&extended, &ext_graph, exec);
    let theorem1 = theorem1_from_graph(&extended, &ext_graph, exec);
    let ext_ms = started.elapsed().as_secs_f64() * 1e3;

    Ok(AnalysisReport {
        net: net.name().to_string(),
        workflow: crate::petri::classify_workflow(net),
        restore_on_reset: net.restore_on_reset(),
        budget,
        bounds: ext_bounds
            .into_iter()
            .enumerate()
            .map(|(p, b)| (extended.place_id(p).to_string(), b))
            .collect(),
        live: ext_live
            .into_iter()
            .enumerate()
            .map(|(t, l)| (extended.transition_id(t).to_string(), l))
            .collect(),
        sound,
        theorem1,
        workflow_stats: GraphStats {
            nodes: plain_graph.node_count(),
            edges: plain_graph.edge_count(),
            truncated: plain_graph.truncated,
            wall_time_ms: timing.then_some(plain_ms),
        },
        extended_stats: GraphStats {
            nodes: ext_graph.node_count(),
            edges: ext_graph.edge_count(),
            truncated: ext_graph.truncated,
            wall_time_ms: timing.then_some(ext_ms),
        },
    })
}
