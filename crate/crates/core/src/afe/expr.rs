//! Feature expressions over original columns.
//!
//! Text grammar (also the canonical key):
//!
//! ```text
//! E := xI | sin(E) | expc(E) | sqrtabs(E) | mul(E,E)
//! ```
//!
//! `I` is the 1-based column index. Operands of `mul` are ordered by their own
//! keys, so `mul(a,b)` and `mul(b,a)` share one key.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Argument ceiling of the clamped exponential.
pub const EXP_CLAMP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryOp {
    Sin,
    #[serde(rename = "expc")]
    ExpClamped,
    #[serde(rename = "sqrtabs")]
    SqrtAbs,
}

impl UnaryOp {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            UnaryOp::Sin => v.sin(),
            UnaryOp::ExpClamped => v.min(EXP_CLAMP).exp(),
            UnaryOp::SqrtAbs => v.abs().sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Sin => "sin",
            UnaryOp::ExpClamped => "expc",
            UnaryOp::SqrtAbs => "sqrtabs",
        }
    }
}

/// A transformation available to the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Sin,
    #[serde(rename = "expc")]
    ExpClamped,
    #[serde(rename = "sqrtabs")]
    SqrtAbs,
    Mul,
}

impl Transform {
    pub const ALL: [Transform; 4] = [
        Transform::Sin,
        Transform::ExpClamped,
        Transform::SqrtAbs,
        Transform::Mul,
    ];

    pub fn arity(self) -> usize {
        match self {
            Transform::Mul => 2,
            _ => 1,
        }
    }

    pub fn unary(self) -> Option<UnaryOp> {
        match self {
            Transform::Sin => Some(UnaryOp::Sin),
            Transform::ExpClamped => Some(UnaryOp::ExpClamped),
            Transform::SqrtAbs => Some(UnaryOp::SqrtAbs),
            Transform::Mul => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Transform::Mul => "mul",
            t => t.unary().unwrap().name(),
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Transform::ALL
            .into_iter()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown transformation {s:?}")))
    }
}

#[derive(Debug)]
pub enum ExprKind {
    /// 0-based original column index.
    Leaf(usize),
    Unary(UnaryOp, Expr),
    Mul(Expr, Expr),
}

#[derive(Debug)]
struct Inner {
    kind: ExprKind,
    key: String,
}

/// Immutable, cheaply clonable expression tree in canonical form.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl Expr {
    pub fn leaf(column: usize) -> Self {
        Self(Arc::new(Inner {
            key: format!("x{}", column + 1),
            kind: ExprKind::Leaf(column),
        }))
    }

    pub fn unary(op: UnaryOp, child: Expr) -> Self {
        Self(Arc::new(Inner {
            key: format!("{}({})", op.name(), child.key()),
            kind: ExprKind::Unary(op, child),
        }))
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        let (a, b) = if a.key() <= b.key() { (a, b) } else { (b, a) };
        Self(Arc::new(Inner {
            key: format!("mul({},{})", a.key(), b.key()),
            kind: ExprKind::Mul(a, b),
        }))
    }

    pub fn kind(&self) -> &ExprKind {
        &self.0.kind
    }

    /// Canonical key; equal keys mean equal expressions up to `mul` operand order.
    pub fn key(&self) -> &str {
        &self.0.key
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.0.kind, ExprKind::Leaf(_))
    }

    /// Largest original column index referenced.
    pub fn max_column(&self) -> usize {
        match self.kind() {
            ExprKind::Leaf(c) => *c,
            ExprKind::Unary(_, e) => e.max_column(),
            ExprKind::Mul(a, b) => a.max_column().max(b.max_column()),
        }
    }

    pub fn evaluate_row(&self, row: &[f64]) -> f64 {
        match self.kind() {
            ExprKind::Leaf(c) => row[*c],
            ExprKind::Unary(op, e) => op.apply(e.evaluate_row(row)),
            ExprKind::Mul(a, b) => a.evaluate_row(row) * b.evaluate_row(row),
        }
    }

    /// Column-wise evaluation on every row of `x`.
    pub fn evaluate(&self, x: &DMatrix<f64>) -> DVector<f64> {
        assert!(self.max_column() < x.ncols(), "expression references missing column");
        match self.kind() {
            ExprKind::Leaf(c) => x.column(*c).into_owned(),
            ExprKind::Unary(op, e) => e.evaluate(x).map(|v| op.apply(v)),
            ExprKind::Mul(a, b) => a.evaluate(x).component_mul(&b.evaluate(x)),
        }
    }
}

pub fn canonical_key(expr: &Expr) -> &str {
    expr.key()
}

pub fn evaluate_expression(expr: &Expr, x: &DMatrix<f64>) -> DVector<f64> {
    expr.evaluate(x)
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(other.key())
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self.key())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let text: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut parser = Parser {
            src: &text,
            pos: 0,
            original: s,
        };
        let expr = parser.expr()?;
        if parser.pos != text.len() {
            return Err(parser.error("trailing input"));
        }
        Ok(expr)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.key())
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    original: &'a str,
}

impl Parser<'_> {
    fn error(&self, reason: &str) -> Error {
        Error::Parse {
            text: self.original.to_string(),
            reason: format!("{reason} at offset {}", self.pos),
        }
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn eat(&mut self, token: &str) -> bool {
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(&format!("expected {token:?}")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        for op in [UnaryOp::Sin, UnaryOp::ExpClamped, UnaryOp::SqrtAbs] {
            if self.eat(&format!("{}(", op.name())) {
                let child = self.expr()?;
                self.expect(")")?;
                return Ok(Expr::unary(op, child));
            }
        }
        if self.eat("mul(") {
            let a = self.expr()?;
            self.expect(",")?;
            let b = self.expr()?;
            self.expect(")")?;
            return Ok(Expr::mul(a, b));
        }
        if self.eat("x") {
            let digits: String = self.rest().chars().take_while(|c| c.is_ascii_digit()).collect();
            self.pos += digits.len();
            let index: usize = digits.parse().map_err(|_| self.error("expected column index"))?;
            if index == 0 {
                return Err(self.error("column indices are 1-based"));
            }
            return Ok(Expr::leaf(index - 1));
        }
        Err(self.error("expected expression"))
    }
}
