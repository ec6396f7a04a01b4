use serde::{Deserialize, Serialize};

use super::{CheckError, PropertySpec};
use crate::kernel::{Action, System, SystemState, TransitionLabel};

/// A run from the system's initial state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Trace {
    /// Digest of the initial state the labels start from.
    pub initial_hash: u64,
    pub labels: Vec<TransitionLabel>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn actions(&self) -> Vec<Action> {
        self.labels.iter().map(TransitionLabel::action).collect()
    }
}

/// Re-executes `actions` from the initial state.
pub fn replay_actions(system: &System, actions: &[Action]) -> Result<(Trace, SystemState), CheckError> {
    let mut state = system.initial_state();
    let initial_hash = state.canonical_hash();
    let mut labels = Vec::with_capacity(actions.len());
    for (i, a) in actions.iter().enumerate() {
        let (label, next) = system
            .apply_action(&state, *a)
            .map_err(|e| CheckError::Replay(format!("step {i}: {e}")))?;
        labels.push(label);
        state = next;
    }
    Ok((Trace { initial_hash, labels }, state))
}

/// Re-executes a saved trace, checking that every step reproduces its
/// recorded label exactly. Returns the final state.
pub fn replay(system: &System, trace: &Trace) -> Result<SystemState, CheckError> {
    let (fresh, state) = replay_actions(system, &trace.actions())?;
    if fresh.initial_hash != trace.initial_hash {
        return Err(CheckError::Replay("initial state differs from the recorded one".into()));
    }
    for (i, (got, want)) in fresh.labels.iter().zip(&trace.labels).enumerate() {
        if got != want {
            return Err(CheckError::Replay(format!(
                "step {i} diverged: recorded `{}`, replayed `{}`",
                want.process, got.process
            )));
        }
    }
    Ok(state)
}

/// Replays `trace` and reports whether its final state violates `spec`
/// (for a response property: ends with the trigger still pending).
pub fn violates(system: &System, spec: &PropertySpec, trace: &Trace) -> Result<bool, CheckError> {
    let end = replay(system, trace)?;
    let mut state = system.initial_state();
    let mut bits = spec.initial_bits(&state.store)?;
    for label in &trace.labels {
        let (l, next) = system.apply_action(&state, label.action())?;
        bits = spec.next_bits(bits, &l.events, &next.store)?;
        state = next;
    }
    debug_assert_eq!(state, end);
    let terminal = system.enabled_actions(&state)?.is_empty();
    Ok(spec.violated(bits, &state.store)? || (terminal && spec.violated_at_end(bits)))
}
