//! Explicit-state breadth-first model checking of a [`System`].
//!
//! Exploration is level-synchronous. Each frontier chunk is expanded
//! (successors, keys, monitor bits, predicates) possibly in parallel, then
//! merged into the visited set sequentially in frontier order. The merge
//! order alone decides ids, witnesses and extremum ties, so results do not
//! depend on the number of workers.

mod graph;
mod property;
mod trace;

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{rngs::StdRng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use xxhash_rust::xxh3::xxh3_64;

use crate::kernel::{Action, ModelError, System, SystemState};
use graph::{Graph, Node, ROOT};
use property::Bits;

pub use property::{check_state, Direction, Property, PropertySpec};
pub use trace::{replay, replay_actions, violates, Trace};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("trace replay failed: {0}")]
    Replay(String),
    #[error("could not start worker pool: {0}")]
    Workers(String),
}

#[derive(Debug, Clone)]
pub struct ExploreConfig {
    pub workers: usize,
    /// Stop with an inconclusive verdict after this many distinct states.
    pub state_budget: Option<usize>,
    /// Keep hashes only; collisions then merge distinct states.
    pub bitstate: bool,
    /// Permutes how frontier chunks are handed to workers.
    pub seed: Option<u64>,
    /// Stop at the first violation instead of finishing the space.
    pub early_stop: bool,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            state_budget: None,
            bitstate: false,
            seed: None,
            early_stop: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Stats {
    pub states_visited: u64,
    pub transitions_taken: u64,
    #[serde(serialize_with = "secs")]
    pub wall_time: Duration,
    pub depth: u32,
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Valid,
    Invalid { trace: Trace },
    Extremum { value: i64, trace: Trace },
    Inconclusive { reason: String },
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::Valid => "Valid",
            Status::Invalid { .. } => "Invalid",
            Status::Extremum { .. } => "Extremum",
            Status::Inconclusive { .. } => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub property: String,
    pub status: Status,
    pub stats: Stats,
}

impl Verdict {
    pub fn trace(&self) -> Option<&Trace> {
        match &self.status {
            Status::Invalid { trace } | Status::Extremum { trace, .. } => Some(trace),
            _ => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.status == Status::Valid
    }

    pub fn is_invalid(&self) -> bool {
        matches!(self.status, Status::Invalid { .. })
    }
}

struct Entry {
    id: u32,
    state: SystemState,
    bits: Bits,
}

struct Succ {
    action: Action,
    state: SystemState,
    bits: Bits,
    key: Vec<u8>,
    hash: u64,
    violated: bool,
    value: Option<i64>,
}

struct Expansion {
    succs: Vec<Succ>,
    ends_badly: bool,
}

fn key_of(state: &SystemState, bits: Bits) -> Vec<u8> {
    let mut key = state.canonical_bytes();
    key.push(bits);
    key
}

fn expand(system: &System, spec: &PropertySpec, e: &Entry) -> Result<Expansion, ModelError> {
    let actions = system.enabled_actions(&e.state)?;
    let ends_badly = actions.is_empty() && spec.violated_at_end(e.bits);
    let mut succs = Vec::with_capacity(actions.len());
    for action in actions {
        let (label, state) = system.apply_action(&e.state, action)?;
        let bits = spec.next_bits(e.bits, &label.events, &state.store)?;
        let key = key_of(&state, bits);
        succs.push(Succ {
            action,
            hash: xxh3_64(&key),
            key,
            violated: spec.violated(bits, &state.store)?,
            value: spec.value(&state.store)?,
            bits,
            state,
        });
    }
    Ok(Expansion { succs, ends_badly })
}

const CHUNK: usize = 1024;

/// One exploration of `system` against a single property.
struct Run<'a> {
    system: &'a System,
    property: &'a Property,
    config: &'a ExploreConfig,
    pool: Option<rayon::ThreadPool>,
    rng: Option<StdRng>,
    graph: Graph,
    transitions: u64,
    depth: u32,
    /// First violating node in merge order.
    violation: Option<u32>,
    best: Option<(i64, u32)>,
}

enum Outcome {
    Done,
    Stopped,
    OverBudget,
}

impl<'a> Run<'a> {
    fn new(system: &'a System, property: &'a Property, config: &'a ExploreConfig) -> Result<Self, CheckError> {
        let pool = if config.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.workers)
                    .build()
                    .map_err(|e| CheckError::Workers(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self {
            system,
            property,
            config,
            pool,
            rng: config.seed.map(StdRng::seed_from_u64),
            graph: Graph::new(config.bitstate),
            transitions: 0,
            depth: 0,
            violation: None,
            best: None,
        })
    }

    fn expand_chunk(&mut self, chunk: &[Entry]) -> Result<Vec<Expansion>, ModelError> {
        let (system, spec) = (self.system, &self.property.spec);
        let Some(pool) = &self.pool else {
            return chunk.iter().map(|e| expand(system, spec, e)).collect();
        };
        let mut order: Vec<usize> = (0..chunk.len()).collect();
        if let Some(rng) = &mut self.rng {
            order.shuffle(rng);
        }
        let mut results: Vec<(usize, Result<Expansion, ModelError>)> = pool.install(|| {
            order
                .par_iter()
                .map(|&i| (i, expand(system, spec, &chunk[i])))
                .collect()
        });
        results.sort_unstable_by_key(|(i, _)| *i);
        results.into_iter().map(|(_, r)| r).collect()
    }

    fn over_budget(&self) -> bool {
        self.config.state_budget.is_some_and(|b| self.graph.len() > b)
    }

    fn note_violation(&mut self, id: u32) -> bool {
        if self.violation.is_none() {
            self.violation = Some(id);
        }
        self.config.early_stop
    }

    fn note_value(&mut self, value: Option<i64>, id: u32) {
        let (Some(v), PropertySpec::ReachExtremum { direction, .. }) = (value, &self.property.spec) else {
            return;
        };
        match self.best {
            Some((b, _)) if !direction.better(v, b) => {}
            _ => self.best = Some((v, id)),
        }
    }

    fn explore(&mut self) -> Result<Outcome, CheckError> {
        let spec = &self.property.spec;
        let init = self.system.initial_state();
        let bits = spec.initial_bits(&init.store)?;
        let key = key_of(&init, bits);
        let root = Node {
            parent: ROOT,
            action: Action { user: 0, alt: 0 },
        };
        let id = self.graph.insert(xxh3_64(&key), &key, root).expect("empty graph");
        self.note_value(spec.value(&init.store)?, id);
        if spec.violated(bits, &init.store)? && self.note_violation(id) {
            return Ok(Outcome::Stopped);
        }
        let mut frontier = vec![Entry { id, state: init, bits }];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for chunk in frontier.chunks(CHUNK) {
                let expansions = self.expand_chunk(chunk)?;
                for (entry, exp) in chunk.iter().zip(expansions) {
                    self.transitions += exp.succs.len() as u64;
                    if exp.ends_badly && self.note_violation(entry.id) {
                        return Ok(Outcome::Stopped);
                    }
                    for s in exp.succs {
                        let node = Node {
                            parent: entry.id,
                            action: s.action,
                        };
                        let Some(id) = self.graph.insert(s.hash, &s.key, node) else {
                            continue;
                        };
                        if self.over_budget() {
                            return Ok(Outcome::OverBudget);
                        }
                        self.note_value(s.value, id);
                        if s.violated && self.note_violation(id) {
                            return Ok(Outcome::Stopped);
                        }
                        next.push(Entry {
                            id,
                            state: s.state,
                            bits: s.bits,
                        });
                    }
                }
            }
            if !next.is_empty() {
                self.depth += 1;
            }
            frontier = next;
        }
        Ok(Outcome::Done)
    }

    /// Replays the path to `id` and checks that it lands on the recorded
    /// state and, for a violation, that the property really fails there.
    fn witness(&self, id: u32, violation: bool) -> Result<Trace, CheckError> {
        let spec = &self.property.spec;
        let mut state = self.system.initial_state();
        let initial_hash = state.canonical_hash();
        let mut bits = spec.initial_bits(&state.store)?;
        let mut labels = Vec::new();
        for action in self.graph.path(id) {
            let (label, next) = self.system.apply_action(&state, action)?;
            bits = spec.next_bits(bits, &label.events, &next.store)?;
            labels.push(label);
            state = next;
        }
        if let Some(stored) = self.graph.key(id) {
            if stored != key_of(&state, bits).as_slice() {
                return Err(CheckError::Replay("witness does not reproduce the explored state".into()));
            }
        }
        if violation {
            let terminal = self.system.enabled_actions(&state)?.is_empty();
            if !spec.violated(bits, &state.store)? && !(terminal && spec.violated_at_end(bits)) {
                return Err(CheckError::Replay("witness state satisfies the property".into()));
            }
        }
        Ok(Trace { initial_hash, labels })
    }

    fn stats(&self, started: Instant) -> Stats {
        Stats {
            states_visited: self.graph.len() as u64,
            transitions_taken: self.transitions,
            wall_time: started.elapsed(),
            depth: self.depth,
        }
    }
}

/// Checks one property. Safety-style properties stop at the first
/// violation (when `early_stop` is set); response and extremum queries
/// need the whole space.
pub fn check(system: &System, property: &Property, config: &ExploreConfig) -> Result<Verdict, CheckError> {
    let started = Instant::now();
    let mut run = Run::new(system, property, config)?;
    let outcome = run.explore()?;
    let status = match (outcome, run.violation, run.best) {
        (_, Some(id), _) => Status::Invalid {
            trace: run.witness(id, true)?,
        },
        (Outcome::OverBudget, None, _) => Status::Inconclusive {
            reason: format!("state budget of {} exceeded", config.state_budget.unwrap_or(0)),
        },
        (_, None, Some((value, id))) => Status::Extremum {
            value,
            trace: run.witness(id, false)?,
        },
        _ => Status::Valid,
    };
    Ok(Verdict {
        property: property.name.clone(),
        status,
        stats: run.stats(started),
    })
}

/// Checks each property with its own exploration.
pub fn explore(system: &System, properties: &[Property], config: &ExploreConfig) -> Result<Vec<Verdict>, CheckError> {
    properties.iter().map(|p| check(system, p, config)).collect()
}

/// The extreme value of `expr` over every reachable state, with a shortest witness.
pub fn reach_extremum(
    system: &System,
    expr: crate::kernel::Expr,
    direction: Direction,
    config: &ExploreConfig,
) -> Result<Verdict, CheckError> {
    let name = match direction {
        Direction::Max => "max",
        Direction::Min => "min",
    };
    let property = Property::new(name, PropertySpec::ReachExtremum { expr, direction });
    check(system, &property, config)
}

/// Distinct reachable states and transitions, with no property attached.
pub fn state_space(system: &System, config: &ExploreConfig) -> Result<Stats, CheckError> {
    let property = Property::new("true", PropertySpec::GlobalInvariant(crate::kernel::Expr::Const(1)));
    check(system, &property, config).map(|v| v.stats)
}
