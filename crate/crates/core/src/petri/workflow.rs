//! Workflow-net classification and extension.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::net::{ArcDef, NetDefinition, NetError, TransitionDef};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowInfo {
    pub start_place: Option<String>,
    pub end_place: Option<String>,
    pub is_workflow: bool,
    /// Transition consuming from `end` and producing into `start`, if any.
    pub extension_transition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkflowError {
    #[error("net `{0}` is not a workflow net")]
    NotAWorkflow(String),
    #[error("net already has extension transition `{0}`")]
    AlreadyExtended(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Unique source and sink places of the net, ignoring transition `skip`.
fn source_and_sink(net: &NetDefinition, skip: Option<usize>) -> (Option<usize>, Option<usize>) {
    let (producers, consumers) = net.place_neighbourhood();
    let unique = |sets: &[Vec<usize>]| {
        let mut found = None;
        for (p, ts) in sets.iter().enumerate() {
            if ts.iter().all(|&t| Some(t) == skip) {
                if found.is_some() {
                    return None;
                }
                found = Some(p);
            }
        }
        found
    };
    (unique(&producers), unique(&consumers))
}

/// Classify the net as a workflow net, detecting an extension transition.
pub fn classify_workflow(net: &NetDefinition) -> WorkflowInfo {
    let info = |start: usize, end: usize, ext: Option<usize>| WorkflowInfo {
        start_place: Some(net.place_id(start).to_string()),
        end_place: Some(net.place_id(end).to_string()),
        is_workflow: start != end,
        extension_transition: ext.map(|t| net.transition_id(t).to_string()),
    };

    if let (Some(start), Some(end)) = source_and_sink(net, None) {
        return info(start, end, None);
    }
    let mut fallback = None;
    for t in 0..net.transition_count() {
        let (pre, post) = (net.preset(t), net.postset(t));
        if pre.len() != 1 || post.len() != 1 || pre == post {
            continue;
        }
        if let (Some(start), Some(end)) = source_and_sink(net, Some(t)) {
            if start == post[0] && end == pre[0] {
                // A plain `start -> t -> end` net looks symmetric once
                // extended; the marked place decides which side is start.
                if net.places()[start].initial_tokens > 0 {
                    return info(start, end, Some(t));
                }
                fallback.get_or_insert((start, end, t));
            }
        }
    }
    if let Some((start, end, t)) = fallback {
        return info(start, end, Some(t));
    }
    WorkflowInfo {
        start_place: None,
        end_place: None,
        is_workflow: false,
        extension_transition: None,
    }
}

/// Add a fresh transition consuming from `end` and producing into `start`.
pub fn extend_workflow(net: &NetDefinition) -> Result<NetDefinition, WorkflowError> {
    let info = classify_workflow(net);
    if !info.is_workflow {
        return Err(WorkflowError::NotAWorkflow(net.name().to_string()));
    }
    if let Some(t) = info.extension_transition {
        return Err(WorkflowError::AlreadyExtended(t));
    }
    let id = fresh_transition_id(net);
    let start = info.start_place.expect("workflow has a start place");
    let end = info.end_place.expect("workflow has an end place");
    Ok(net.with_additions(
        vec![TransitionDef::new(id.clone()).with_label("reset")],
        vec![ArcDef::new(end, id.clone()), ArcDef::new(id, start)],
    )?)
}

fn fresh_transition_id(net: &NetDefinition) -> String {
    let taken = |id: &str| net.place_index(id).is_some() || net.transition_index(id).is_some();
    let mut id = "t_reset".to_string();
    let mut n = 1;
    while taken(&id) {
        id = format!("t_reset{n}");
        n += 1;
    }
    id
}

/// The workflow without and with its extension transition.
///
/// Nets that already carry an extension are split by removing it; plain
/// workflow nets are extended with a fresh transition.
pub fn workflow_views(net: &NetDefinition) -> Result<(NetDefinition, NetDefinition, WorkflowInfo), WorkflowError> {
    let info = classify_workflow(net);
    if !info.is_workflow {
        return Err(WorkflowError::NotAWorkflow(net.name().to_string()));
    }
    match &info.extension_transition {
        Some(t) => {
            let plain = net.without_transition(t)?;
            let plain_info = classify_workflow(&plain);
            Ok((plain, net.clone(), plain_info))
        }
        None => {
            let extended = extend_workflow(net)?;
            Ok((net.clone(), extended, info))
        }
    }
}
