// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::Span;

/// Stable statement identity, assigned in lexical pre-order across the whole
/// program starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StmtId(pub u32);

/// Dense guard identity; one per `if`/`while` condition, lexical order from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GuardId(pub u32);

impl GuardId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for GuardId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "g{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ty {
    Int,
    Bytes,
}

impl std::fmt::Display for Ty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ty::Int => "int",
            Ty::Bytes => "bytes",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: Ty,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub id: StmtId,
    pub span: Span,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Let {
        name: String,
        value: Rhs,
    },
    /// `let name = [init; size];`
    LetArray {
        name: String,
        init: Expr,
        size: u32,
    },
    Assign {
        name: String,
        value: Rhs,
    },
    /// `name[index] = value;`
    Store {
        name: String,
        index: Expr,
        value: Expr,
    },
    If {
        guard: GuardId,
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Option<Vec<Stmt>>,
    },
    While {
        guard: GuardId,
        cond: Expr,
        body: Vec<Stmt>,
    },
    Crash {
        label: String,
    },
    Return {
        value: Option<Expr>,
    },
    Call(Call),
}

/// Right-hand side of `let`/assignment. Calls are only allowed here and as
/// statements, which keeps every expression (and so every guard condition)
/// free of side effects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rhs {
    Expr(Expr),
    Call(Call),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Call {
    pub func: String,
    pub args: Vec<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Int(i64),
    Str(Vec<u8>),
    Var(String),
    Index { base: String, index: Box<Expr> },
    Len(Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
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
            BinOp::Rem => "%",
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

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    fn clear_spans(&mut self) {
        self.span = Span::default();
        match &mut self.kind {
            ExprKind::Int(_) | ExprKind::Str(_) | ExprKind::Var(_) => {}
            ExprKind::Index { index, .. } => index.clear_spans(),
            ExprKind::Len(e) | ExprKind::Unary(_, e) => e.clear_spans(),
            ExprKind::Binary(_, l, r) => {
                l.clear_spans();
                r.clear_spans();
            }
        }
    }
}

impl Call {
    fn clear_spans(&mut self) {
        self.span = Span::default();
        self.args.iter_mut().for_each(Expr::clear_spans);
    }
}

impl Rhs {
    fn clear_spans(&mut self) {
        match self {
            Rhs::Expr(e) => e.clear_spans(),
            Rhs::Call(c) => c.clear_spans(),
        }
    }
}

impl Stmt {
    pub(crate) fn clear_spans(&mut self) {
        self.span = Span::default();
        match &mut self.kind {
            StmtKind::Let { value, .. } | StmtKind::Assign { value, .. } => value.clear_spans(),
            StmtKind::LetArray { init, .. } => init.clear_spans(),
            StmtKind::Store { index, value, .. } => {
                index.clear_spans();
                value.clear_spans();
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                cond.clear_spans();
                then_body.iter_mut().for_each(Stmt::clear_spans);
                if let Some(body) = else_body {
                    body.iter_mut().for_each(Stmt::clear_spans);
                }
            }
            StmtKind::While { cond, body, .. } => {
                cond.clear_spans();
                body.iter_mut().for_each(Stmt::clear_spans);
            }
            StmtKind::Crash { .. } | StmtKind::Return { value: None } => {}
            StmtKind::Return { value: Some(e) } => e.clear_spans(),
            StmtKind::Call(c) => c.clear_spans(),
        }
    }
}

/// Pre-order walk over a statement list, descending into nested bodies.
pub fn walk_stmts<'a>(body: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for stmt in body {
        f(stmt);
        match &stmt.kind {
            StmtKind::If {
                then_body, else_body, ..
            } => {
                walk_stmts(then_body, f);
                if let Some(body) = else_body {
                    walk_stmts(body, f);
                }
            }
            StmtKind::While { body, .. } => walk_stmts(body, f),
            _ => {}
        }
    }
}
