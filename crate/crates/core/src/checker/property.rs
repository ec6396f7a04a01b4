use serde::{Deserialize, Serialize};

use crate::kernel::{Event, Expr, ModelError, Store};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Max,
    Min,
}

impl Direction {
    pub fn better(self, candidate: i64, best: i64) -> bool {
        match self {
            Direction::Max => candidate > best,
            Direction::Min => candidate < best,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropertySpec {
    /// `G p`
    GlobalInvariant(Expr),
    /// `G (p -> F q)` over finite maximal traces.
    Response { trigger: Expr, goal: Expr },
    /// `G (e -> G p)`: `p` must hold from the state right after an `e` event onwards.
    AfterEventAlways { event: String, pred: Expr },
    ReachExtremum { expr: Expr, direction: Direction },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: String,
    pub spec: PropertySpec,
}

impl Property {
    pub fn new(name: impl Into<String>, spec: PropertySpec) -> Self {
        Self {
            name: name.into(),
            spec,
        }
    }
}

/// Monitor bits carried alongside each state and folded into its key.
pub(crate) type Bits = u8;

impl PropertySpec {
    pub(crate) fn initial_bits(&self, store: &Store) -> Result<Bits, ModelError> {
        match self {
            PropertySpec::Response { trigger, goal } => {
                Ok((!goal.holds(store, &[])? && trigger.holds(store, &[])?) as Bits)
            }
            _ => Ok(0),
        }
    }

    pub(crate) fn next_bits(&self, bits: Bits, events: &[Event], store: &Store) -> Result<Bits, ModelError> {
        match self {
            PropertySpec::Response { trigger, goal } => {
                let pending = bits != 0 || trigger.holds(store, &[])?;
                Ok((pending && !goal.holds(store, &[])?) as Bits)
            }
            PropertySpec::AfterEventAlways { event, .. } => {
                Ok((bits != 0 || events.iter().any(|e| &e.name == event)) as Bits)
            }
            _ => Ok(0),
        }
    }

    /// Whether a state with these monitor bits violates the property by itself.
    pub(crate) fn violated(&self, bits: Bits, store: &Store) -> Result<bool, ModelError> {
        match self {
            PropertySpec::GlobalInvariant(p) => Ok(!p.holds(store, &[])?),
            PropertySpec::AfterEventAlways { pred, .. } => Ok(bits != 0 && !pred.holds(store, &[])?),
            _ => Ok(false),
        }
    }

    /// Whether a maximal trace ending in a state with these bits is a violation.
    pub(crate) fn violated_at_end(&self, bits: Bits) -> bool {
        matches!(self, PropertySpec::Response { .. }) && bits != 0
    }

    pub(crate) fn value(&self, store: &Store) -> Result<Option<i64>, ModelError> {
        match self {
            PropertySpec::ReachExtremum { expr, .. } => expr.eval(store, &[]).map(Some),
            _ => Ok(None),
        }
    }
}

/// Evaluates a state predicate of `property`: the invariant of a
/// `GlobalInvariant`, or the guarded predicate of an activated `AfterEventAlways`.
pub fn check_state(store: &Store, property: &PropertySpec) -> Result<bool, ModelError> {
    match property {
        PropertySpec::GlobalInvariant(p) | PropertySpec::AfterEventAlways { pred: p, .. } => p.holds(store, &[]),
        PropertySpec::Response { goal, .. } => goal.holds(store, &[]),
        PropertySpec::ReachExtremum { .. } => Ok(true),
    }
}
