//! Integer expressions over the store. Booleans are encoded as 0/1.

use super::store::{ArrayId, CellId, Entry, MatrixId, Schema, Store, BLOCK_NUMBER};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(i64),
    /// Unresolved scalar name; looked up in the schema on every evaluation.
    Name(String),
    Cell(CellId),
    Elem(ArrayId, Box<Expr>),
    MatrixElem(MatrixId, Box<Expr>, Box<Expr>),
    Sum(ArrayId),
    Block,
    /// Slot in the current call frame (parameters first, then locals).
    Local(usize),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

fn truth(b: bool) -> i64 {
    i64::from(b)
}

fn floor_div(a: i64, b: i64) -> Result<i64, ModelError> {
    let q = a.checked_div(b).ok_or(ModelError::Overflow)?;
    if a % b != 0 && ((a < 0) != (b < 0)) {
        Ok(q - 1)
    } else {
        Ok(q)
    }
}

impl Expr {
    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn elem(array: ArrayId, index: Expr) -> Expr {
        Expr::Elem(array, Box::new(index))
    }

    pub fn name(n: impl Into<String>) -> Expr {
        Expr::Name(n.into())
    }

    pub fn eval(&self, store: &Store, frame: &[i64]) -> Result<i64, ModelError> {
        Ok(match self {
            Expr::Const(v) => *v,
            Expr::Name(n) => store.get_named(n)?,
            Expr::Cell(c) => store.get(*c),
            Expr::Elem(a, i) => store.elem(*a, i.eval(store, frame)?)?,
            Expr::MatrixElem(m, r, c) => {
                store.matrix_elem(*m, r.eval(store, frame)?, c.eval(store, frame)?)?
            }
            Expr::Sum(a) => store.sum(*a)?,
            Expr::Block => store.block_number() as i64,
            Expr::Local(i) => *frame.get(*i).ok_or(ModelError::UndefinedLocal(*i))?,
            Expr::Not(e) => truth(e.eval(store, frame)? == 0),
            Expr::Neg(e) => e
                .eval(store, frame)?
                .checked_neg()
                .ok_or(ModelError::Overflow)?,
            Expr::Bin(op, l, r) => {
                let a = l.eval(store, frame)?;
                match op {
                    BinOp::And if a == 0 => return Ok(0),
                    BinOp::Or if a != 0 => return Ok(1),
                    _ => {}
                }
                let b = r.eval(store, frame)?;
                match op {
                    BinOp::Add => a.checked_add(b).ok_or(ModelError::Overflow)?,
                    BinOp::Sub => a.checked_sub(b).ok_or(ModelError::Overflow)?,
                    BinOp::Mul => a.checked_mul(b).ok_or(ModelError::Overflow)?,
                    BinOp::Div => {
                        if b == 0 {
                            return Err(ModelError::DivisionByZero);
                        }
                        floor_div(a, b)?
                    }
                    BinOp::Eq => truth(a == b),
                    BinOp::Ne => truth(a != b),
                    BinOp::Lt => truth(a < b),
                    BinOp::Le => truth(a <= b),
                    BinOp::Gt => truth(a > b),
                    BinOp::Ge => truth(a >= b),
                    BinOp::And | BinOp::Or => truth(b != 0),
                }
            }
        })
    }

    pub fn holds(&self, store: &Store, frame: &[i64]) -> Result<bool, ModelError> {
        Ok(self.eval(store, frame)? != 0)
    }

    /// Replaces every `Name` with a direct slot reference.
    pub fn resolve(self, schema: &Schema) -> Result<Expr, ModelError> {
        Ok(match self {
            Expr::Name(n) if n == BLOCK_NUMBER => Expr::Block,
            Expr::Name(n) => match schema.lookup(&n) {
                Some(Entry::Cell(c)) => Expr::Cell(c),
                _ => return Err(ModelError::UndefinedCell(n)),
            },
            Expr::Elem(a, i) => Expr::Elem(a, Box::new(i.resolve(schema)?)),
            Expr::MatrixElem(m, r, c) => Expr::MatrixElem(
                m,
                Box::new(r.resolve(schema)?),
                Box::new(c.resolve(schema)?),
            ),
            Expr::Not(e) => Expr::Not(Box::new(e.resolve(schema)?)),
            Expr::Neg(e) => Expr::Neg(Box::new(e.resolve(schema)?)),
            Expr::Bin(op, l, r) => {
                Expr::Bin(op, Box::new(l.resolve(schema)?), Box::new(r.resolve(schema)?))
            }
            other => other,
        })
    }
}
