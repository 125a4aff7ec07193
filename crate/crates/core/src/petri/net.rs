//! Structural definition of an edge-rewritable Petri net.
//!
//! A [`NetDefinition`] is immutable once validated. Symbolic ids are kept for
//! reporting, while firing works over dense indices precomputed at
//! construction time.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Token capacity of a place.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Capacity {
    #[default]
    Unbounded,
    Finite(u32),
}

impl Capacity {
    pub fn admits(self, tokens: u32) -> bool {
        match self {
            Capacity::Unbounded => true,
            Capacity::Finite(k) => tokens <= k,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Capacity::Finite(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaceDef {
    pub id: String,
    pub capacity: Capacity,
    pub initial_tokens: u32,
    pub label: String,
}

impl PlaceDef {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            capacity: Capacity::Unbounded,
            initial_tokens: 0,
            label: String::new(),
        }
    }

    pub fn with_tokens(mut self, tokens: u32) -> Self {
        self.initial_tokens = tokens;
        self
    }

    pub fn with_capacity(mut self, capacity: u32) -> Self {
        self.capacity = Capacity::Finite(capacity);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionDef {
    pub id: String,
    pub label: String,
}

impl TransitionDef {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: String::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcDef {
    pub source: String,
    pub target: String,
    pub weight: u32,
    /// Number of firings of the incident transition after which the arc
    /// disappears from the flow relation.
    pub rewrite_limit: Option<u32>,
}

impl ArcDef {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            weight: 1,
            rewrite_limit: None,
        }
    }

    pub fn with_weight(mut self, weight: u32) -> Self {
        self.weight = weight;
        self
    }

    pub fn rewritable(mut self, limit: u32) -> Self {
        self.rewrite_limit = Some(limit);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("arc {from} -> {to}: unknown node `{missing}`")]
    DanglingArc { from: String, to: String, missing: String },
    #[error("arc {from} -> {to} connects two places")]
    PlaceToPlace { from: String, to: String },
    #[error("arc {from} -> {to} connects two transitions")]
    TransitionToTransition { from: String, to: String },
    #[error("duplicate arc {from} -> {to}")]
    DuplicateArc { from: String, to: String },
    #[error("arc {from} -> {to} has zero weight")]
    ZeroWeight { from: String, to: String },
    #[error("arc {from} -> {to} has rewritable limit 0")]
    ZeroRewriteLimit { from: String, to: String },
    #[error("place `{place}` starts with {tokens} tokens but capacity is {capacity}")]
    InitialExceedsCapacity { place: String, tokens: u32, capacity: u32 },
    #[error("place `{0}` has capacity 0")]
    ZeroCapacity(String),
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
}

/// Which side of the transition an arc sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArcDirection {
    /// place -> transition
    Input,
    /// transition -> place
    Output,
}

/// Arc resolved to dense indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedArc {
    pub place: usize,
    pub transition: usize,
    pub direction: ArcDirection,
    pub weight: u32,
    /// Slot in [`crate::petri::NetState::residual`] when rewritable.
    pub rewrite_slot: Option<usize>,
}

/// A validated edge-rewritable Petri net.
#[derive(Debug, Clone)]
pub struct NetDefinition {
    name: String,
    places: Vec<PlaceDef>,
    transitions: Vec<TransitionDef>,
    arcs: Vec<ArcDef>,
    resolved: Vec<ResolvedArc>,
    /// Arc indices per transition, inputs and outputs in declaration order.
    transition_arcs: Vec<Vec<usize>>,
    /// Arc index for each residual slot.
    rewritable: Vec<usize>,
    place_index: HashMap<String, usize>,
    transition_index: HashMap<String, usize>,
    restore_on_reset: bool,
}

impl NetDefinition {
    pub fn new(
        name: impl Into<String>,
        places: Vec<PlaceDef>,
        transitions: Vec<TransitionDef>,
        arcs: Vec<ArcDef>,
    ) -> Result<Self, NetError> {
        let mut place_index = HashMap::with_capacity(places.len());
        for (i, p) in places.iter().enumerate() {
            if place_index.insert(p.id.clone(), i).is_some() {
                return Err(NetError::DuplicateId(p.id.clone()));
            }
            if let Capacity::Finite(k) = p.capacity {
                if k == 0 {
                    return Err(NetError::ZeroCapacity(p.id.clone()));
                }
                if p.initial_tokens > k {
                    return Err(NetError::InitialExceedsCapacity {
                        place: p.id.clone(),
                        tokens: p.initial_tokens,
                        capacity: k,
                    });
                }
            }
        }
        let mut transition_index = HashMap::with_capacity(transitions.len());
        for (i, t) in transitions.iter().enumerate() {
            if place_index.contains_key(&t.id) || transition_index.insert(t.id.clone(), i).is_some() {
                return Err(NetError::DuplicateId(t.id.clone()));
            }
        }

        let mut seen = HashSet::with_capacity(arcs.len());
        let mut resolved = Vec::with_capacity(arcs.len());
        let mut transition_arcs = vec![Vec::new(); transitions.len()];
        let mut rewritable = Vec::new();
        for (ai, arc) in arcs.iter().enumerate() {
            let src = node_kind(&arc.source, &place_index, &transition_index);
            let dst = node_kind(&arc.target, &place_index, &transition_index);
            let (place, transition, direction) = match (src, dst) {
                (None, _) => return Err(dangling(arc, &arc.source)),
                (_, None) => return Err(dangling(arc, &arc.target)),
                (Some(Node::Place(p)), Some(Node::Transition(t))) => (p, t, ArcDirection::Input),
                (Some(Node::Transition(t)), Some(Node::Place(p))) => (p, t, ArcDirection::Output),
                (Some(Node::Place(_)), Some(Node::Place(_))) => {
                    return Err(NetError::PlaceToPlace {
                        from: arc.source.clone(),
                        to: arc.target.clone(),
                    })
                }
                (Some(Node::Transition(_)), Some(Node::Transition(_))) => {
                    return Err(NetError::TransitionToTransition {
                        from: arc.source.clone(),
                        to: arc.target.clone(),
                    })
                }
            };
            if !seen.insert((arc.source.as_str(), arc.target.as_str())) {
                return Err(NetError::DuplicateArc {
                    from: arc.source.clone(),
                    to: arc.target.clone(),
                });
            }
            if arc.weight == 0 {
                return Err(NetError::ZeroWeight {
                    from: arc.source.clone(),
                    to: arc.target.clone(),
                });
            }
            let rewrite_slot = match arc.rewrite_limit {
                Some(0) => {
                    return Err(NetError::ZeroRewriteLimit {
                        from: arc.source.clone(),
                        to: arc.target.clone(),
                    })
                }
                Some(_) => {
                    rewritable.push(ai);
                    Some(rewritable.len() - 1)
                }
                None => None,
            };
            transition_arcs[transition].push(ai);
            resolved.push(ResolvedArc {
                place,
                transition,
                direction,
                weight: arc.weight,
                rewrite_slot,
            });
        }

        Ok(Self {
            name: name.into(),
            places,
            transitions,
            arcs,
            resolved,
            transition_arcs,
            rewritable,
            place_index,
            transition_index,
            restore_on_reset: false,
        })
    }

    /// Residual counters are reset to their limits whenever a firing brings
    /// the marking back to the initial marking.
    pub fn with_restore_on_reset(mut self, restore: bool) -> Self {
        self.restore_on_reset = restore;
        self
    }

    pub fn restore_on_reset(&self) -> bool {
        self.restore_on_reset
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn places(&self) -> &[PlaceDef] {
        &self.places
    }

    pub fn transitions(&self) -> &[TransitionDef] {
        &self.transitions
    }

    pub fn arcs(&self) -> &[ArcDef] {
        &self.arcs
    }

    pub fn resolved_arcs(&self) -> &[ResolvedArc] {
        &self.resolved
    }

    pub fn place_count(&self) -> usize {
        self.places.len()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn place_index(&self, id: &str) -> Option<usize> {
        self.place_index.get(id).copied()
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transition_index.get(id).copied()
    }

    pub fn require_transition(&self, id: &str) -> Result<usize, NetError> {
        self.transition_index(id)
            .ok_or_else(|| NetError::UnknownTransition(id.to_string()))
    }

    pub fn place_id(&self, index: usize) -> &str {
        &self.places[index].id
    }

    pub fn transition_id(&self, index: usize) -> &str {
        &self.transitions[index].id
    }

    /// Arc indices incident to transition `t`.
    pub fn arcs_of(&self, t: usize) -> &[usize] {
        &self.transition_arcs[t]
    }

    /// Arc index for every residual slot, in slot order.
    pub fn rewritable_arcs(&self) -> &[usize] {
        &self.rewritable
    }

    /// Structural preset of a transition (all declared arcs).
    pub fn preset(&self, t: usize) -> Vec<usize> {
        self.side_of(t, ArcDirection::Input)
    }

    /// Structural post-set of a transition (all declared arcs).
    pub fn postset(&self, t: usize) -> Vec<usize> {
        self.side_of(t, ArcDirection::Output)
    }

    fn side_of(&self, t: usize, direction: ArcDirection) -> Vec<usize> {
        self.transition_arcs[t]
            .iter()
            .map(|&a| self.resolved[a])
            .filter(|a| a.direction == direction)
            .map(|a| a.place)
            .collect()
    }

    /// Transitions producing into each place, and consuming from each place.
    pub(crate) fn place_neighbourhood(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let mut producers = vec![Vec::new(); self.places.len()];
        let mut consumers = vec![Vec::new(); self.places.len()];
        for a in &self.resolved {
            match a.direction {
                ArcDirection::Output => producers[a.place].push(a.transition),
                ArcDirection::Input => consumers[a.place].push(a.transition),
            }
        }
        (producers, consumers)
    }

    /// Copy of the net without transition `id` and its arcs.
    pub fn without_transition(&self, id: &str) -> Result<Self, NetError> {
        self.require_transition(id)?;
        let transitions = self.transitions.iter().filter(|t| t.id != id).cloned().collect();
        let arcs = self
            .arcs
            .iter()
            .filter(|a| a.source != id && a.target != id)
            .cloned()
            .collect();
        Ok(Self::new(self.name.clone(), self.places.clone(), transitions, arcs)?
            .with_restore_on_reset(self.restore_on_reset))
    }

    /// Copy with extra nodes and arcs appended.
    pub fn with_additions(&self, transitions: Vec<TransitionDef>, arcs: Vec<ArcDef>) -> Result<Self, NetError> {
        let mut all_t = self.transitions.clone();
        all_t.extend(transitions);
        let mut all_a = self.arcs.clone();
        all_a.extend(arcs);
        Ok(Self::new(self.name.clone(), self.places.clone(), all_t, all_a)?
            .with_restore_on_reset(self.restore_on_reset))
    }

    /// Copy with every rewritable limit replaced by `limit`.
    pub fn with_rewrite_limits(&self, limit: u32) -> Result<Self, NetError> {
        let arcs = self
            .arcs
            .iter()
            .cloned()
            .map(|mut a| {
                if a.rewrite_limit.is_some() {
                    a.rewrite_limit = Some(limit);
                }
                a
            })
            .collect();
        Ok(
            Self::new(self.name.clone(), self.places.clone(), self.transitions.clone(), arcs)?
                .with_restore_on_reset(self.restore_on_reset),
        )
    }

    /// Copy where every input arc of the given transitions gets `weight`.
    pub fn with_input_weights(&self, transitions: &[&str], weight: u32) -> Result<Self, NetError> {
        for t in transitions {
            self.require_transition(t)?;
        }
        let arcs = self
            .arcs
            .iter()
            .cloned()
            .map(|mut a| {
                if transitions.contains(&a.target.as_str()) {
                    a.weight = weight;
                }
                a
            })
            .collect();
        Ok(
            Self::new(self.name.clone(), self.places.clone(), self.transitions.clone(), arcs)?
                .with_restore_on_reset(self.restore_on_reset),
        )
    }
}

impl fmt::Display for NetDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "net {} ({} places, {} transitions, {} arcs, {} rewritable)",
            self.name,
            self.places.len(),
            self.transitions.len(),
            self.arcs.len(),
            self.rewritable.len()
        )
    }
}

enum Node {
    Place(usize),
    Transition(usize),
}

fn node_kind(id: &str, places: &HashMap<String, usize>, transitions: &HashMap<String, usize>) -> Option<Node> {
    places
        .get(id)
        .map(|&p| Node::Place(p))
        .or_else(|| transitions.get(id).map(|&t| Node::Transition(t)))
}

fn dangling(arc: &ArcDef, missing: &str) -> NetError {
    NetError::DanglingArc {
        from: arc.source.clone(),
        to: arc.target.clone(),
        missing: missing.to_string(),
    }
}
