//! Interleaved user programs over one store.
//!
//! Each user behaviour is a finite sequence of atomic steps; a step may offer
//! several alternatives (one per entry of an amount menu). The state of a user
//! is just a program counter, so a system state is the store plus one counter
//! per user.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use super::expr::Expr;
use super::store::{Schema, Store};
use super::term::{run_atomic, AtomicOutcome, Event, ProcessTable, ProcessTerm};
use super::ModelError;

#[derive(Debug, Clone)]
pub struct Alternative {
    pub label: String,
    /// Top-level guard; the alternative is not enabled while it is false.
    pub guard: Option<Expr>,
    pub body: ProcessTerm,
    /// The `Reverting()` continuation run (as its own atomic step) after
    /// `body` reverts. `None` ends the program immediately.
    pub reverting: Option<ProcessTerm>,
}

impl Alternative {
    pub fn new(label: impl Into<String>, body: ProcessTerm) -> Self {
        Self {
            label: label.into(),
            guard: None,
            body,
            reverting: None,
        }
    }

    pub fn with_guard(mut self, guard: Expr) -> Self {
        self.guard = Some(guard);
        self
    }

    pub fn with_reverting(mut self, handler: ProcessTerm) -> Self {
        self.reverting = Some(handler);
        self
    }
}

#[derive(Debug, Clone)]
pub struct Step {
    pub alternatives: Vec<Alternative>,
}

impl Step {
    pub fn single(alt: Alternative) -> Self {
        Self {
            alternatives: vec![alt],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Program {
    pub name: String,
    pub steps: Vec<Step>,
}

impl Program {
    pub fn new(name: impl Into<String>, steps: Vec<Step>) -> Self {
        Self {
            name: name.into(),
            steps,
        }
    }

    /// Flattens a sequential composition of atomic pieces into steps.
    /// `STOP` becomes a step that is never enabled.
    pub fn from_term(name: impl Into<String>, term: &ProcessTerm) -> Result<Self, ModelError> {
        let mut steps = Vec::new();
        lower(term, &mut steps)?;
        Ok(Self::new(name, steps))
    }
}

fn lower(term: &ProcessTerm, steps: &mut Vec<Step>) -> Result<(), ModelError> {
    match term {
        ProcessTerm::Skip => Ok(()),
        ProcessTerm::Seq(a, b) => {
            lower(a, steps)?;
            lower(b, steps)
        }
        ProcessTerm::Stop => {
            steps.push(Step::single(
                Alternative::new("STOP", ProcessTerm::Skip).with_guard(Expr::Const(0)),
            ));
            Ok(())
        }
        ProcessTerm::Prefix {
            event,
            updates,
            then,
        } => {
            let label = event
                .as_ref()
                .map_or_else(|| "tau".to_string(), |e| e.name.clone());
            steps.push(Step::single(Alternative::new(
                label,
                ProcessTerm::Prefix {
                    event: event.clone(),
                    updates: updates.clone(),
                    then: Box::new(ProcessTerm::Skip),
                },
            )));
            lower(then, steps)
        }
        ProcessTerm::Call { name, .. } => {
            steps.push(Step::single(Alternative::new(name.clone(), term.clone())));
            Ok(())
        }
        ProcessTerm::Atomic(body) => {
            let label = match body.as_ref() {
                ProcessTerm::Call { name, .. } => name.clone(),
                _ => "atomic".to_string(),
            };
            steps.push(Step::single(Alternative::new(label, term.clone())));
            Ok(())
        }
        ProcessTerm::If { .. } => {
            steps.push(Step::single(Alternative::new("if", term.clone())));
            Ok(())
        }
        ProcessTerm::Interleave(_) => Err(ModelError::Unsupported(
            "nested interleaving inside a user program".into(),
        )),
        ProcessTerm::Revert => Err(ModelError::Unsupported(
            "REVERT outside an atomic block".into(),
        )),
    }
}

/// Per-user program counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pc {
    At(u32),
    /// The step `step`/`alt` reverted and its `Reverting()` handler is next.
    Reverting { step: u32, alt: u32 },
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub user: usize,
    pub alt: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionLabel {
    pub user: usize,
    pub alt: usize,
    pub process: String,
    pub events: Vec<Event>,
    pub reverted: bool,
}

impl TransitionLabel {
    pub fn action(&self) -> Action {
        Action {
            user: self.user,
            alt: self.alt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemState {
    pub store: Store,
    pub pcs: Vec<Pc>,
}

#[derive(Serialize)]
struct CanonicalRef<'a> {
    block: u64,
    pcs: &'a [Pc],
    values: &'a [i64],
}

#[derive(Deserialize)]
struct CanonicalOwned {
    block: u64,
    pcs: Vec<Pc>,
    values: Vec<i64>,
}

impl SystemState {
    /// Order-stable serialization used as the visited-set key.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        postcard::to_allocvec(&CanonicalRef {
            block: self.store.block_number(),
            pcs: &self.pcs,
            values: self.store.values(),
        })
        .expect("serializing integers cannot fail")
    }

    pub fn canonical_hash(&self) -> u64 {
        xxh3_64(&self.canonical_bytes())
    }

    pub fn from_canonical(schema: Arc<Schema>, bytes: &[u8]) -> Result<Self, ModelError> {
        let (owned, rest): (CanonicalOwned, _) =
            postcard::take_from_bytes(bytes).map_err(|e| ModelError::Decode(e.to_string()))?;
        if !rest.is_empty() {
            return Err(ModelError::Decode(format!("{} trailing bytes", rest.len())));
        }
        if owned.values.len() != schema.width() {
            return Err(ModelError::Decode(format!(
                "expected {} values, found {}",
                schema.width(),
                owned.values.len()
            )));
        }
        let store_bytes = postcard::to_allocvec(&(owned.block, owned.values))
            .expect("serializing integers cannot fail");
        Ok(Self {
            store: Store::from_canonical(schema, &store_bytes)?,
            pcs: owned.pcs,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.pcs.iter().all(|pc| *pc == Pc::Done)
    }
}

/// A closed system: the store layout, the named processes and one program per user.
#[derive(Debug, Clone)]
pub struct System {
    pub schema: Arc<Schema>,
    pub procs: ProcessTable,
    pub programs: Vec<Program>,
}

impl System {
    pub fn new(schema: Arc<Schema>, procs: ProcessTable, programs: Vec<Program>) -> Self {
        Self {
            schema,
            procs,
            programs,
        }
    }

    /// Builds a system from `P1 ||| P2 ||| ...`; a non-interleave term is a single user.
    pub fn from_term(
        schema: Arc<Schema>,
        procs: ProcessTable,
        term: &ProcessTerm,
    ) -> Result<Self, ModelError> {
        let users: Vec<&ProcessTerm> = match term {
            ProcessTerm::Interleave(ts) => ts.iter().collect(),
            t => vec![t],
        };
        let programs = users
            .into_iter()
            .enumerate()
            .map(|(i, t)| Program::from_term(format!("P{i}"), t))
            .collect::<Result<_, _>>()?;
        Ok(Self::new(schema, procs, programs))
    }

    pub fn initial_state(&self) -> SystemState {
        SystemState {
            store: Store::new(self.schema.clone()),
            pcs: self
                .programs
                .iter()
                .map(|p| if p.steps.is_empty() { Pc::Done } else { Pc::At(0) })
                .collect(),
        }
    }

    fn alternative(&self, user: usize, step: u32, alt: u32) -> &Alternative {
        &self.programs[user].steps[step as usize].alternatives[alt as usize]
    }

    fn guard_holds(alt: &Alternative, store: &Store) -> Result<bool, ModelError> {
        match &alt.guard {
            None => Ok(true),
            Some(g) => g.holds(store, &[]),
        }
    }

    /// Actions enabled in `state`, ordered by user then alternative.
    pub fn enabled_actions(&self, state: &SystemState) -> Result<Vec<Action>, ModelError> {
        let mut out = Vec::new();
        for (user, pc) in state.pcs.iter().enumerate() {
            match *pc {
                Pc::Done => {}
                Pc::Reverting { .. } => out.push(Action { user, alt: 0 }),
                Pc::At(step) => {
                    let alts = &self.programs[user].steps[step as usize].alternatives;
                    for (alt, a) in alts.iter().enumerate() {
                        if Self::guard_holds(a, &state.store)? {
                            out.push(Action { user, alt });
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn next_pc(&self, user: usize, step: u32) -> Pc {
        if step as usize + 1 >= self.programs[user].steps.len() {
            Pc::Done
        } else {
            Pc::At(step + 1)
        }
    }

    /// Runs one atomic step of one user. Reverts are ordinary transitions:
    /// the store is left untouched and the user's program ends (after its
    /// `Reverting()` handler, if it has one).
    pub fn apply_action(
        &self,
        state: &SystemState,
        action: Action,
    ) -> Result<(TransitionLabel, SystemState), ModelError> {
        let not_enabled = ModelError::NotEnabled {
            user: action.user,
            alt: action.alt,
        };
        let pc = *state.pcs.get(action.user).ok_or(not_enabled.clone())?;
        let (process, body, next_ok, next_reverted) = match pc {
            Pc::Done => return Err(not_enabled),
            Pc::Reverting { step, alt } => {
                if action.alt != 0 {
                    return Err(not_enabled);
                }
                let a = self.alternative(action.user, step, alt);
                let handler = a.reverting.as_ref().ok_or(not_enabled)?;
                (format!("Reverting({})", a.label), handler, Pc::Done, Pc::Done)
            }
            Pc::At(step) => {
                let alts = &self.programs[action.user].steps[step as usize].alternatives;
                let a = alts.get(action.alt).ok_or(not_enabled.clone())?;
                if !Self::guard_holds(a, &state.store)? {
                    return Err(not_enabled);
                }
                let on_revert = if a.reverting.is_some() {
                    Pc::Reverting {
                        step,
                        alt: action.alt as u32,
                    }
                } else {
                    Pc::Done
                };
                (a.label.clone(), &a.body, self.next_pc(action.user, step), on_revert)
            }
        };

        let outcome = run_atomic(&self.procs, state.store.clone(), body)?;
        let mut pcs = state.pcs.clone();
        let (store, events, reverted) = match outcome {
            AtomicOutcome::Committed { store, events } => {
                pcs[action.user] = next_ok;
                (store, events, false)
            }
            AtomicOutcome::Reverted { store, event, .. } => {
                pcs[action.user] = next_reverted;
                (store, vec![event], true)
            }
        };
        let label = TransitionLabel {
            user: action.user,
            alt: action.alt,
            process,
            events,
            reverted,
        };
        Ok((label, SystemState { store, pcs }))
    }
}
