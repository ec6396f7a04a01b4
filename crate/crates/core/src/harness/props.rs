//! Property formulas:
//!
//! ```text
//! G <pred>                     global invariant
//! G (<pred> -> F <pred>)       response
//! G (<Event> -> G <pred>)      invariant from the first matching event on
//! max <expr> | min <expr>      extremum query
//! ```
//!
//! `□ ◇ → ≤ ≥ ≠ ∧ ∨ ¬` are accepted as aliases. Positions in errors are
//! 1-based character columns.

use std::collections::BTreeMap;

use super::HarnessError;
use crate::checker::{Direction, PropertySpec};
use crate::kernel::{BinOp, Entry, Expr, Schema, BLOCK_NUMBER};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, HarnessError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, msg: String| HarnessError::Property { pos: pos + 1, msg };
    while i < chars.len() {
        let ch = chars[i];
        let start = i;
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        if ch.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().filter(|c| **c != '_').collect();
            let v = s
                .parse()
                .map_err(|_| err(start, format!("integer literal `{s}` out of range")))?;
            out.push((start, Tok::Int(v)));
            continue;
        }
        if ch.is_alphabetic() || ch == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let op2 = ["->", "==", "!=", "<=", ">=", "&&", "||"].into_iter().find(|o| *o == two);
        if let Some(o) = op2 {
            out.push((start, Tok::Op(o)));
            i += 2;
            continue;
        }
        let tok = match ch {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            '<' => Tok::Op("<"),
            '>' => Tok::Op(">"),
            '!' | '¬' => Tok::Op("!"),
            '+' => Tok::Op("+"),
            '-' => Tok::Op("-"),
            '*' => Tok::Op("*"),
            '/' => Tok::Op("/"),
            '→' => Tok::Op("->"),
            '≤' => Tok::Op("<="),
            '≥' => Tok::Op(">="),
            '≠' => Tok::Op("!="),
            '∧' => Tok::Op("&&"),
            '∨' => Tok::Op("||"),
            '□' => Tok::Ident("G".into()),
            '◇' => Tok::Ident("F".into()),
            _ => return Err(err(start, format!("unexpected character `{ch}`"))),
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

/// Unresolved syntax tree.
#[derive(Debug, Clone)]
enum Ast {
    Int(i64),
    Ident(usize, String),
    Sum(usize, String),
    Index(usize, String, Vec<Ast>),
    Not(Box<Ast>),
    Neg(Box<Ast>),
    Bin(BinOp, Box<Ast>, Box<Ast>),
    Implies(Box<Ast>, Box<Ast>),
    Always(usize, Box<Ast>),
    Eventually(usize, Box<Ast>),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, HarnessError> {
        Err(HarnessError::Property {
            pos: self.pos() + 1,
            msg: msg.into(),
        })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        t
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == Some(want) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), HarnessError> {
        if self.eat(&want) {
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn eat_op(&mut self, ops: &[&'static str]) -> Option<&'static str> {
        match self.peek() {
            Some(Tok::Op(o)) if ops.contains(o) => {
                let o = *o;
                self.at += 1;
                Some(o)
            }
            _ => None,
        }
    }

    /// `G`/`F` prefixes only count when an operand follows.
    fn temporal_prefix(&self) -> Option<char> {
        let Some(Tok::Ident(s)) = self.peek() else { return None };
        let op = match s.as_str() {
            "G" => 'G',
            "F" => 'F',
            _ => return None,
        };
        match self.toks.get(self.at + 1).map(|(_, t)| t) {
            Some(Tok::LParen | Tok::Ident(_) | Tok::Int(_)) | Some(Tok::Op("!" | "-")) => Some(op),
            _ => None,
        }
    }

    fn implies(&mut self) -> Result<Ast, HarnessError> {
        if let Some(op) = self.temporal_prefix() {
            let pos = self.pos();
            self.at += 1;
            let inner = Box::new(self.implies()?);
            return Ok(if op == 'G' {
                Ast::Always(pos, inner)
            } else {
                Ast::Eventually(pos, inner)
            });
        }
        let lhs = self.or()?;
        if self.eat_op(&["->"]).is_some() {
            let rhs = self.implies()?;
            return Ok(Ast::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Ast, HarnessError> {
        let mut lhs = self.and()?;
        while self.eat_op(&["||"]).is_some() {
            lhs = Ast::Bin(BinOp::Or, Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Ast, HarnessError> {
        let mut lhs = self.cmp()?;
        while self.eat_op(&["&&"]).is_some() {
            lhs = Ast::Bin(BinOp::And, Box::new(lhs), Box::new(self.cmp()?));
        }
        Ok(lhs)
    }

    fn cmp(&mut self) -> Result<Ast, HarnessError> {
        let lhs = self.add()?;
        let Some(op) = self.eat_op(&["==", "!=", "<", "<=", ">", ">="]) else {
            return Ok(lhs);
        };
        let op = match op {
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            _ => BinOp::Ge,
        };
        let rhs = self.add()?;
        if self.eat_op(&["==", "!=", "<", "<=", ">", ">="]).is_some() {
            self.at -= 1;
            return self.err("comparisons do not chain; add parentheses");
        }
        Ok(Ast::Bin(op, Box::new(lhs), Box::new(rhs)))
    }

    fn add(&mut self) -> Result<Ast, HarnessError> {
        let mut lhs = self.mul()?;
        while let Some(op) = self.eat_op(&["+", "-"]) {
            let op = if op == "+" { BinOp::Add } else { BinOp::Sub };
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(self.mul()?));
        }
        Ok(lhs)
    }

    fn mul(&mut self) -> Result<Ast, HarnessError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&["*", "/"]) {
            let op = if op == "*" { BinOp::Mul } else { BinOp::Div };
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ast, HarnessError> {
        match self.eat_op(&["!", "-"]) {
            Some("!") => Ok(Ast::Not(Box::new(self.unary()?))),
            Some(_) => Ok(Ast::Neg(Box::new(self.unary()?))),
            None => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Ast, HarnessError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Int(v)) => Ok(Ast::Int(v)),
            Some(Tok::LParen) => {
                let e = self.implies()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) if name == "sum" && self.peek() == Some(&Tok::LParen) => {
                self.at += 1;
                let apos = self.pos();
                let Some(Tok::Ident(arr)) = self.bump() else {
                    self.at -= 1;
                    return self.err("expected an array name inside sum()");
                };
                self.expect(Tok::RParen, "`)`")?;
                Ok(Ast::Sum(apos, arr))
            }
            Some(Tok::Ident(name)) => {
                let mut idx = Vec::new();
                while self.eat(&Tok::LBracket) {
                    idx.push(self.add()?);
                    self.expect(Tok::RBracket, "`]`")?;
                }
                Ok(if idx.is_empty() {
                    Ast::Ident(pos, name)
                } else {
                    Ast::Index(pos, name, idx)
                })
            }
            Some(_) => {
                self.at -= 1;
                self.err("expected an expression")
            }
            None => self.err("unexpected end of formula"),
        }
    }
}

/// Names a formula may mention, besides store cells.
pub struct Scope<'a> {
    pub schema: &'a Schema,
    pub constants: &'a BTreeMap<String, i64>,
    pub events: &'a [String],
}

impl Scope<'_> {
    fn unknown(&self, pos: usize, name: &str, what: &str) -> HarnessError {
        let candidates = self
            .schema
            .names()
            .map(|(n, _)| n.to_string())
            .chain(self.constants.keys().cloned())
            .chain(self.events.iter().cloned())
            .chain([BLOCK_NUMBER.to_string(), "true".into(), "false".into()]);
        let best = candidates
            .map(|c| (strsim::jaro_winkler(name, &c), c))
            .filter(|(s, _)| *s > 0.8)
            .max_by(|a, b| a.0.total_cmp(&b.0));
        let hint = best.map_or(String::new(), |(_, c)| format!(" (did you mean `{c}`?)"));
        HarnessError::Property {
            pos: pos + 1,
            msg: format!("unknown {what} `{name}`{hint}"),
        }
    }

    fn resolve(&self, ast: &Ast) -> Result<Expr, HarnessError> {
        let b = |a: &Ast| self.resolve(a).map(Box::new);
        Ok(match ast {
            Ast::Int(v) => Expr::Const(*v),
            Ast::Ident(_, n) if n == "true" => Expr::Const(1),
            Ast::Ident(_, n) if n == "false" => Expr::Const(0),
            Ast::Ident(_, n) if n == BLOCK_NUMBER => Expr::Block,
            Ast::Ident(pos, n) => match (self.schema.lookup(n), self.constants.get(n)) {
                (Some(Entry::Cell(c)), _) => Expr::Cell(c),
                (Some(_), _) => {
                    return Err(HarnessError::Property {
                        pos: pos + 1,
                        msg: format!("`{n}` is an array; index it or use sum({n})"),
                    })
                }
                (None, Some(v)) => Expr::Const(*v),
                (None, None) if self.events.contains(n) => {
                    return Err(HarnessError::Property {
                        pos: pos + 1,
                        msg: format!("event `{n}` may only appear as `G ({n} -> G p)`"),
                    })
                }
                (None, None) => return Err(self.unknown(*pos, n, "identifier")),
            },
            Ast::Sum(pos, n) => match self.schema.lookup(n) {
                Some(Entry::Array(a)) => Expr::Sum(a),
                _ => return Err(self.unknown(*pos, n, "array")),
            },
            Ast::Index(pos, n, idx) => match (self.schema.lookup(n), idx.as_slice()) {
                (Some(Entry::Array(a)), [i]) => Expr::Elem(a, b(i)?),
                (Some(Entry::Matrix(m)), [i, j]) => Expr::MatrixElem(m, b(i)?, b(j)?),
                (Some(_), _) => {
                    return Err(HarnessError::Property {
                        pos: pos + 1,
                        msg: format!("wrong number of indices for `{n}`"),
                    })
                }
                (None, _) => return Err(self.unknown(*pos, n, "array")),
            },
            Ast::Not(e) => Expr::Not(b(e)?),
            Ast::Neg(e) => Expr::Neg(b(e)?),
            Ast::Bin(op, l, r) => Expr::Bin(*op, b(l)?, b(r)?),
            Ast::Implies(l, r) => Expr::bin(BinOp::Or, Expr::Not(b(l)?), self.resolve(r)?),
            Ast::Always(pos, _) | Ast::Eventually(pos, _) => {
                return Err(HarnessError::Property {
                    pos: pos + 1,
                    msg: "temporal operator not allowed here; supported shapes are `G p`, \
                          `G (p -> F q)` and `G (Event -> G p)`"
                        .into(),
                })
            }
        })
    }

    pub fn parse_expr(&self, text: &str) -> Result<Expr, HarnessError> {
        let mut p = parser(text)?;
        let ast = p.implies()?;
        finish(&p)?;
        self.resolve(&ast)
    }

    pub fn parse_property(&self, text: &str) -> Result<PropertySpec, HarnessError> {
        let mut p = parser(text)?;
        let direction = match p.peek() {
            Some(Tok::Ident(s)) if s == "max" => Some(Direction::Max),
            Some(Tok::Ident(s)) if s == "min" => Some(Direction::Min),
            _ => None,
        };
        if let Some(direction) = direction {
            p.at += 1;
            let ast = p.implies()?;
            finish(&p)?;
            return Ok(PropertySpec::ReachExtremum {
                expr: self.resolve(&ast)?,
                direction,
            });
        }
        if p.temporal_prefix() != Some('G') {
            return p.err("a property starts with `G`, `max` or `min`");
        }
        p.at += 1;
        let body = p.implies()?;
        finish(&p)?;
        if let Ast::Implies(lhs, rhs) = &body {
            match (lhs.as_ref(), rhs.as_ref()) {
                (_, Ast::Eventually(_, goal)) => {
                    return Ok(PropertySpec::Response {
                        trigger: self.resolve(lhs)?,
                        goal: self.resolve(goal)?,
                    })
                }
                (Ast::Ident(pos, e), Ast::Always(_, pred)) => {
                    if !self.events.contains(e) {
                        return Err(self.unknown(*pos, e, "event"));
                    }
                    return Ok(PropertySpec::AfterEventAlways {
                        event: e.clone(),
                        pred: self.resolve(pred)?,
                    });
                }
                _ => {}
            }
        }
        Ok(PropertySpec::GlobalInvariant(self.resolve(&body)?))
    }
}

fn parser(text: &str) -> Result<Parser, HarnessError> {
    Ok(Parser {
        toks: lex(text)?,
        at: 0,
        end: text.chars().count(),
    })
}

fn finish(p: &Parser) -> Result<(), HarnessError> {
    if p.at < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(())
}
