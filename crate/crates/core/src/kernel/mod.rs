//! Process-algebra kernel: a shared global store, process terms, atomic
//! execution with rollback, and interleaving of user programs at atomic-step
//! boundaries.

mod expr;
mod store;
mod system;
mod term;

pub use expr::{BinOp, Expr};
pub use store::{ArrayId, CellId, Entry, MatrixId, Schema, SchemaBuilder, Snapshot, Store, BLOCK_NUMBER};
pub use system::{Action, Alternative, Pc, Program, Step, System, SystemState, TransitionLabel};
pub use term::{
    revert, run_atomic, Abort, Assign, AssignOp, AtomicOutcome, Event, EventTemplate, LValue,
    NativeFn, ProcessDef, ProcessTable, ProcessTerm, Tx, TxResult, REVERT_EVENT,
};

use thiserror::Error;

/// A defect in the model itself (never a protocol-level revert).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("undefined cell `{0}`")]
    UndefinedCell(String),
    #[error("undefined process `{0}`")]
    UndefinedProcess(String),
    #[error("undefined local slot {0}")]
    UndefinedLocal(usize),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: i64, len: usize },
    #[error("arithmetic overflow")]
    Overflow,
    #[error("division by zero")]
    DivisionByZero,
    #[error("process `{name}` expects {expected} arguments, got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("interleaving inside an atomic block")]
    InterleaveInAtomic,
    #[error("STOP reached inside an atomic block")]
    StopInAtomic,
    #[error("block number would become negative")]
    NegativeBlock,
    #[error("action user={user} alt={alt} is not enabled")]
    NotEnabled { user: usize, alt: usize },
    #[error("{0}")]
    Numeric(String),
    #[error("malformed canonical state: {0}")]
    Decode(String),
    #[error("unsupported term in a user program: {0}")]
    Unsupported(String),
}
