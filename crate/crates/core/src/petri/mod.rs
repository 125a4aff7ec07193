//! Edge-rewritable Petri nets: structure, concrete syntax and token game.

mod net;
mod parse;
mod state;
mod workflow;

pub use net::{ArcDef, ArcDirection, Capacity, NetDefinition, NetError, PlaceDef, ResolvedArc, TransitionDef};
pub use parse::{parse_net, ParseError};
pub use state::{FireError, NetState};
pub use workflow::{classify_workflow, extend_workflow, workflow_views, WorkflowError, WorkflowInfo};

/// The bundled solid-state fermentation collection workflow.
pub const SSF_NET: &str = include_str!("../../nets/ssf.net");
