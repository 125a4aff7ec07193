//! Token game: markings, residual rewrite counters, enabling and firing.

use std::fmt;

use thiserror::Error;

use super::net::{ArcDirection, NetDefinition, NetError};

/// Dynamic state of an edge-rewritable net.
///
/// `residual[i]` counts how many more firings the `i`-th rewritable arc
/// (see [`NetDefinition::rewritable_arcs`]) survives. An arc whose counter is
/// zero is absent from the flow relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetState {
    pub marking: Vec<u32>,
    pub residual: Vec<u32>,
}

impl NetState {
    pub fn tokens(&self, place: usize) -> u32 {
        self.marking[place]
    }

    /// Componentwise `self >= other` on markings with at least one strict
    /// place, and identical residuals.
    pub fn strictly_dominates(&self, other: &NetState) -> bool {
        self.residual == other.residual
            && self.marking != other.marking
            && self.marking.iter().zip(&other.marking).all(|(a, b)| a >= b)
    }

    /// Nonzero entries as `id:count`, in place order.
    pub fn describe(&self, net: &NetDefinition) -> String {
        let parts: Vec<String> = self
            .marking
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(p, n)| format!("{}:{}", net.place_id(p), n))
            .collect();
        if parts.is_empty() {
            "(empty)".to_string()
        } else {
            parts.join(", ")
        }
    }
}

impl fmt::Display for NetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.marking)?;
        if !self.residual.is_empty() {
            write!(f, " residual {:?}", self.residual)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FireError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("transition `{0}` is not enabled")]
    NotEnabled(String),
}

impl NetDefinition {
    pub fn initial_state(&self) -> NetState {
        NetState {
            marking: self.places().iter().map(|p| p.initial_tokens).collect(),
            residual: self
                .rewritable_arcs()
                .iter()
                .map(|&a| self.arcs()[a].rewrite_limit.unwrap_or(0))
                .collect(),
        }
    }

    fn arc_live(&self, state: &NetState, arc: usize) -> bool {
        match self.resolved_arcs()[arc].rewrite_slot {
            Some(slot) => state.residual[slot] > 0,
            None => true,
        }
    }

    /// Post-firing marking if `t` is enabled, computed over live arcs.
    pub(crate) fn successor_marking(&self, state: &NetState, t: usize) -> Option<Vec<u32>> {
        let arcs = self.arcs_of(t);
        let mut next = state.marking.clone();
        for &a in arcs {
            let arc = self.resolved_arcs()[a];
            if arc.direction == ArcDirection::Input && self.arc_live(state, a) {
                let have = next[arc.place];
                if have < arc.weight {
                    return None;
                }
                next[arc.place] = have - arc.weight;
            }
        }
        for &a in arcs {
            let arc = self.resolved_arcs()[a];
            if arc.direction == ArcDirection::Output && self.arc_live(state, a) {
                let after = next[arc.place].checked_add(arc.weight)?;
                if !self.places()[arc.place].capacity.admits(after) {
                    return None;
                }
                next[arc.place] = after;
            }
        }
        Some(next)
    }

    pub fn is_enabled(&self, state: &NetState, t: usize) -> bool {
        self.successor_marking(state, t).is_some()
    }

    pub fn enabled(&self, state: &NetState, t: &str) -> Result<bool, NetError> {
        let t = self.require_transition(t)?;
        Ok(self.is_enabled(state, t))
    }

    /// Fire transition index `t`, or `None` when it is not enabled.
    pub fn try_fire(&self, state: &NetState, t: usize) -> Option<NetState> {
        let marking = self.successor_marking(state, t)?;
        let mut residual = state.residual.clone();
        if self.restore_on_reset() && marking.iter().zip(self.places()).all(|(&m, p)| m == p.initial_tokens) {
            return Some(self.initial_state_with(marking));
        }
        for &a in self.arcs_of(t) {
            if let Some(slot) = self.resolved_arcs()[a].rewrite_slot {
                residual[slot] = residual[slot].saturating_sub(1);
            }
        }
        Some(NetState { marking, residual })
    }

    fn initial_state_with(&self, marking: Vec<u32>) -> NetState {
        NetState {
            marking,
            residual: self.initial_state().residual,
        }
    }

    pub fn fire(&self, state: &NetState, t: &str) -> Result<NetState, FireError> {
        let ti = self.require_transition(t)?;
        self.try_fire(state, ti)
            .ok_or_else(|| FireError::NotEnabled(t.to_string()))
    }

    /// All enabled transitions and their successors, in declaration order.
    pub fn successors(&self, state: &NetState) -> Vec<(usize, NetState)> {
        (0..self.transition_count())
            .filter_map(|t| self.try_fire(state, t).map(|s| (t, s)))
            .collect()
    }

    /// Live preset/post-set places of `t` in `state`.
    pub fn live_sides(&self, state: &NetState, t: usize) -> (Vec<usize>, Vec<usize>) {
        let mut pre = Vec::new();
        let mut post = Vec::new();
        for &a in self.arcs_of(t) {
            if !self.arc_live(state, a) {
                continue;
            }
            let arc = self.resolved_arcs()[a];
            match arc.direction {
                ArcDirection::Input => pre.push(arc.place),
                ArcDirection::Output => post.push(arc.place),
            }
        }
        (pre, post)
    }

    /// Whether every finite-capacity place respects its bound.
    pub fn respects_capacities(&self, state: &NetState) -> bool {
        state
            .marking
            .iter()
            .zip(self.places())
            .all(|(&m, p)| p.capacity.admits(m))
    }
}
