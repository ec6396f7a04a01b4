//! Process terms and their execution inside an atomic block.

use std::fmt;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::store::{ArrayId, CellId, MatrixId, Store};
use super::ModelError;

/// Observable event: a channel name followed by integer payload, e.g.
/// `transfer.USDC.0.4.5`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub name: String,
    pub payload: Vec<i64>,
}

pub const REVERT_EVENT: &str = "REVERT";

impl Event {
    pub fn new(name: impl Into<String>, payload: Vec<i64>) -> Self {
        Self {
            name: name.into(),
            payload,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for p in &self.payload {
            write!(f, ".{p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTemplate {
    pub name: String,
    pub payload: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    Name(String),
    Cell(CellId),
    Elem(ArrayId, Expr),
    MatrixElem(MatrixId, Expr, Expr),
    Block,
    Local(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assign {
    pub target: LValue,
    pub op: AssignOp,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProcessTerm {
    Skip,
    Stop,
    /// `e{updates} -> P`; a `None` event is a silent `tau` step.
    Prefix {
        event: Option<EventTemplate>,
        updates: Vec<Assign>,
        then: Box<ProcessTerm>,
    },
    Seq(Box<ProcessTerm>, Box<ProcessTerm>),
    If {
        cond: Expr,
        then: Box<ProcessTerm>,
        otherwise: Box<ProcessTerm>,
    },
    Atomic(Box<ProcessTerm>),
    Interleave(Vec<ProcessTerm>),
    Call {
        name: String,
        args: Vec<Expr>,
    },
    Revert,
}

impl ProcessTerm {
    pub fn atomic(body: ProcessTerm) -> Self {
        ProcessTerm::Atomic(Box::new(body))
    }

    pub fn call(name: impl Into<String>, args: Vec<Expr>) -> Self {
        ProcessTerm::Call {
            name: name.into(),
            args,
        }
    }

    pub fn if_else(cond: Expr, then: ProcessTerm, otherwise: ProcessTerm) -> Self {
        ProcessTerm::If {
            cond,
            then: Box::new(then),
            otherwise: Box::new(otherwise),
        }
    }

    pub fn event(name: impl Into<String>, payload: Vec<Expr>, updates: Vec<Assign>, then: ProcessTerm) -> Self {
        ProcessTerm::Prefix {
            event: Some(EventTemplate {
                name: name.into(),
                payload,
            }),
            updates,
            then: Box::new(then),
        }
    }

    pub fn tau(updates: Vec<Assign>, then: ProcessTerm) -> Self {
        ProcessTerm::Prefix {
            event: None,
            updates,
            then: Box::new(then),
        }
    }

    /// Right-nested sequential composition; empty input is `Skip`.
    pub fn seq(terms: impl IntoIterator<Item = ProcessTerm>) -> Self {
        let mut terms: Vec<_> = terms.into_iter().collect();
        let Some(mut acc) = terms.pop() else {
            return ProcessTerm::Skip;
        };
        while let Some(t) = terms.pop() {
            acc = ProcessTerm::Seq(Box::new(t), Box::new(acc));
        }
        acc
    }

    /// Syntactic check; named calls are checked again when executed.
    pub fn contains_interleave(&self) -> bool {
        match self {
            ProcessTerm::Interleave(_) => true,
            ProcessTerm::Prefix { then, .. } | ProcessTerm::Atomic(then) => then.contains_interleave(),
            ProcessTerm::Seq(a, b) => a.contains_interleave() || b.contains_interleave(),
            ProcessTerm::If {
                then, otherwise, ..
            } => then.contains_interleave() || otherwise.contains_interleave(),
            ProcessTerm::Skip
            | ProcessTerm::Stop
            | ProcessTerm::Call { .. }
            | ProcessTerm::Revert => false,
        }
    }
}

/// Why an atomic body stopped early.
#[derive(Debug, Clone, PartialEq)]
pub enum Abort {
    /// Transaction failure: roll back and emit `REVERT`.
    Revert(String),
    /// Model bug: abort the whole run.
    Fault(ModelError),
}

impl From<ModelError> for Abort {
    fn from(e: ModelError) -> Self {
        Abort::Fault(e)
    }
}

pub type TxResult<T> = Result<T, Abort>;

pub fn revert<T>(reason: impl Into<String>) -> TxResult<T> {
    Err(Abort::Revert(reason.into()))
}

pub type NativeFn = Arc<dyn Fn(&mut Tx<'_>, &[i64]) -> TxResult<()> + Send + Sync>;

#[derive(Clone)]
pub enum ProcessDef {
    Term {
        params: usize,
        locals: usize,
        body: ProcessTerm,
    },
    Native {
        params: usize,
        run: NativeFn,
    },
}

impl fmt::Debug for ProcessDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessDef::Term { params, locals, .. } => {
                write!(f, "Term(params={params}, locals={locals})")
            }
            ProcessDef::Native { params, .. } => write!(f, "Native(params={params})"),
        }
    }
}

/// Named process definitions reachable through [`ProcessTerm::Call`].
#[derive(Debug, Clone, Default)]
pub struct ProcessTable {
    defs: FxHashMap<String, ProcessDef>,
}

impl ProcessTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn define(&mut self, name: impl Into<String>, params: usize, locals: usize, body: ProcessTerm) {
        self.defs.insert(
            name.into(),
            ProcessDef::Term {
                params,
                locals,
                body,
            },
        );
    }

    pub fn native<F>(&mut self, name: impl Into<String>, params: usize, run: F)
    where
        F: Fn(&mut Tx<'_>, &[i64]) -> TxResult<()> + Send + Sync + 'static,
    {
        self.defs.insert(
            name.into(),
            ProcessDef::Native {
                params,
                run: Arc::new(run),
            },
        );
    }

    pub fn get(&self, name: &str) -> Option<&ProcessDef> {
        self.defs.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.defs.contains_key(name)
    }
}

/// The live side of an atomic block: a mutable store plus the events emitted
/// so far. Protocol code runs against this.
pub struct Tx<'a> {
    pub store: Store,
    events: Vec<Event>,
    table: &'a ProcessTable,
}

impl<'a> Tx<'a> {
    pub fn new(store: Store, table: &'a ProcessTable) -> Self {
        Self {
            store,
            events: Vec::new(),
            table,
        }
    }

    pub fn emit(&mut self, name: impl Into<String>, payload: Vec<i64>) {
        self.events.push(Event::new(name, payload));
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_parts(self) -> (Store, Vec<Event>) {
        (self.store, self.events)
    }

    pub fn call(&mut self, name: &str, args: &[i64]) -> TxResult<()> {
        let table: &'a ProcessTable = self.table;
        let def = table
            .get(name)
            .ok_or_else(|| ModelError::UndefinedProcess(name.to_string()))?;
        match def {
            ProcessDef::Native { params, run } => {
                check_arity(name, *params, args.len())?;
                run(self, args)
            }
            ProcessDef::Term {
                params,
                locals,
                body,
            } => {
                check_arity(name, *params, args.len())?;
                let mut frame = args.to_vec();
                frame.resize(params + locals, 0);
                self.exec(body, &mut frame)
            }
        }
    }

    /// Runs a term to completion with no interleaving.
    pub fn exec(&mut self, term: &ProcessTerm, frame: &mut Vec<i64>) -> TxResult<()> {
        match term {
            ProcessTerm::Skip => Ok(()),
            ProcessTerm::Stop => Err(ModelError::StopInAtomic.into()),
            ProcessTerm::Revert => revert(REVERT_EVENT),
            ProcessTerm::Interleave(_) => Err(ModelError::InterleaveInAtomic.into()),
            ProcessTerm::Atomic(body) => self.exec(body, frame),
            ProcessTerm::Seq(a, b) => {
                self.exec(a, frame)?;
                self.exec(b, frame)
            }
            ProcessTerm::If {
                cond,
                then,
                otherwise,
            } => {
                if cond.holds(&self.store, frame)? {
                    self.exec(then, frame)
                } else {
                    self.exec(otherwise, frame)
                }
            }
            ProcessTerm::Prefix {
                event,
                updates,
                then,
            } => {
                let fired = match event {
                    Some(t) => Some(Event {
                        name: t.name.clone(),
                        payload: t
                            .payload
                            .iter()
                            .map(|e| e.eval(&self.store, frame))
                            .collect::<Result<_, _>>()?,
                    }),
                    None => None,
                };
                for u in updates {
                    self.assign(u, frame)?;
                }
                if let Some(e) = fired {
                    self.events.push(e);
                }
                self.exec(then, frame)
            }
            ProcessTerm::Call { name, args } => {
                let values = args
                    .iter()
                    .map(|e| e.eval(&self.store, frame))
                    .collect::<Result<Vec<_>, _>>()?;
                self.call(name, &values)
            }
        }
    }

    fn assign(&mut self, a: &Assign, frame: &mut [i64]) -> Result<(), ModelError> {
        let rhs = a.value.eval(&self.store, frame)?;
        let combine = |old: i64| -> Result<i64, ModelError> {
            match a.op {
                AssignOp::Set => Ok(rhs),
                AssignOp::Add => old.checked_add(rhs).ok_or(ModelError::Overflow),
                AssignOp::Sub => old.checked_sub(rhs).ok_or(ModelError::Overflow),
            }
        };
        match &a.target {
            LValue::Name(n) => {
                let c = self.store.schema().cell(n)?;
                let v = combine(self.store.get(c))?;
                self.store.set(c, v);
            }
            LValue::Cell(c) => {
                let v = combine(self.store.get(*c))?;
                self.store.set(*c, v);
            }
            LValue::Elem(arr, i) => {
                let i = i.eval(&self.store, frame)?;
                let v = combine(self.store.elem(*arr, i)?)?;
                self.store.set_elem(*arr, i, v)?;
            }
            LValue::MatrixElem(m, r, c) => {
                let r = r.eval(&self.store, frame)?;
                let c = c.eval(&self.store, frame)?;
                let v = combine(self.store.matrix_elem(*m, r, c)?)?;
                self.store.set_matrix_elem(*m, r, c, v)?;
            }
            LValue::Block => {
                let v = combine(self.store.block_number() as i64)?;
                if v < 0 {
                    return Err(ModelError::NegativeBlock);
                }
                self.store.set_block_number(v as u64);
            }
            LValue::Local(i) => {
                let slot = frame.get_mut(*i).ok_or(ModelError::UndefinedLocal(*i))?;
                *slot = combine(*slot)?;
            }
        }
        Ok(())
    }
}

fn check_arity(name: &str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected != got {
        return Err(ModelError::Arity {
            name: name.to_string(),
            expected,
            got,
        });
    }
    Ok(())
}

/// Result of running one atomic step.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomicOutcome {
    Committed { store: Store, events: Vec<Event> },
    Reverted { store: Store, event: Event, reason: String },
}

impl AtomicOutcome {
    pub fn store(&self) -> &Store {
        match self {
            AtomicOutcome::Committed { store, .. } | AtomicOutcome::Reverted { store, .. } => store,
        }
    }

    pub fn is_reverted(&self) -> bool {
        matches!(self, AtomicOutcome::Reverted { .. })
    }
}

/// Executes `body` without interruption. A revert anywhere inside discards
/// every write made by the body and every event it emitted.
pub fn run_atomic(
    table: &ProcessTable,
    store: Store,
    body: &ProcessTerm,
) -> Result<AtomicOutcome, ModelError> {
    if body.contains_interleave() {
        return Err(ModelError::InterleaveInAtomic);
    }
    let snapshot = store.snapshot();
    let mut tx = Tx::new(store, table);
    match tx.exec(body, &mut Vec::new()) {
        Ok(()) => {
            let (store, events) = tx.into_parts();
            Ok(AtomicOutcome::Committed { store, events })
        }
        Err(Abort::Revert(reason)) => Ok(AtomicOutcome::Reverted {
            store: snapshot.restore(),
            event: Event::new(REVERT_EVENT, Vec::new()),
            reason,
        }),
        Err(Abort::Fault(e)) => Err(e),
    }
}
