// SPDX-License-Identifier: Apache-2.0

//! GuardLang: a small structured imperative language used as the fuzz target.
//!
//! A program is a set of functions; exactly one of them, the entry, takes a
//! single byte-string parameter named `input`. Control flow is limited to
//! `if`/`else` and `while`, and every such condition is a guard. See
//! `docs/guardlang.md` for the grammar.

pub mod ast;
pub mod cfg;
pub mod gen;
mod lexer;
mod parser;
pub mod pretty;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{GuardId, StmtId, Ty};
pub use cfg::{BlockId, Edge, ProgramCfg};
pub use pretty::pretty;

use ast::{FunctionDef, Stmt, StmtKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    Syntax,
    DuplicateFunction,
    MissingEntry,
    Name,
    Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            kind,
            span,
            message: message.into(),
        }
    }

    pub fn syntax(span: Span, message: impl Into<String>) -> Self {
        Self::new(DiagnosticKind::Syntax, span, message)
    }

    /// `file:line:col: message`
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{}:{}: {}", self.span.line, self.span.col, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuardKind {
    If,
    While,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardSite {
    pub id: GuardId,
    pub stmt: StmtId,
    pub kind: GuardKind,
    pub span: Span,
    /// Index of the enclosing function.
    pub function: usize,
}

/// A parsed and checked GuardLang unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub functions: Vec<FunctionDef>,
    pub entry: usize,
    pub guards: Vec<GuardSite>,
    pub stmt_count: u32,
}

/// Parses and checks `source`.
pub fn parse(source: &str) -> Result<Program, Diagnostic> {
    let tokens = lexer::tokenize(source)?;
    let parsed = parser::parse_tokens(tokens)?;
    let mut names = std::collections::HashSet::new();
    for f in &parsed.functions {
        if !names.insert(f.name.as_str()) {
            return Err(Diagnostic::new(
                DiagnosticKind::DuplicateFunction,
                f.span,
                format!("duplicate function `{}`", f.name),
            ));
        }
    }
    let entries: Vec<usize> = parsed
        .functions
        .iter()
        .enumerate()
        .filter(|(_, f)| f.params.len() == 1 && f.params[0].name == "input")
        .map(|(i, _)| i)
        .collect();
    let entry = match entries.as_slice() {
        [] => {
            let span = parsed.functions.first().map(|f| f.span).unwrap_or(Span::new(1, 1));
            return Err(Diagnostic::new(
                DiagnosticKind::MissingEntry,
                span,
                "missing entry function",
            ));
        }
        [one] => *one,
        [_, second, ..] => {
            return Err(Diagnostic::new(
                DiagnosticKind::MissingEntry,
                parsed.functions[*second].span,
                "multiple entry functions (each takes only `input`)",
            ))
        }
    };
    let entry_param = &parsed.functions[entry].params[0];
    if entry_param.ty != Ty::Bytes {
        return Err(Diagnostic::new(
            DiagnosticKind::Type,
            entry_param.span,
            "entry parameter `input` must be bytes",
        ));
    }
    let program = Program {
        functions: parsed.functions,
        entry,
        guards: parsed.guards,
        stmt_count: parsed.stmt_count,
    };
    cfg::lower(&program)?;
    Ok(program)
}

/// Builds the control-flow graph of every function. Block ids follow source
/// order; the result is a pure function of the program.
pub fn build_cfg(program: &Program) -> ProgramCfg {
    cfg::lower(program).expect("program was checked by parse")
}

impl Program {
    pub fn entry_function(&self) -> &FunctionDef {
        &self.functions[self.entry]
    }

    pub fn guard(&self, g: GuardId) -> &GuardSite {
        &self.guards[g.index()]
    }

    /// Finds a statement by id.
    pub fn stmt(&self, id: StmtId) -> Option<&Stmt> {
        let mut found = None;
        for f in &self.functions {
            ast::walk_stmts(&f.body, &mut |s| {
                if s.id == id {
                    found = Some(s);
                }
            });
        }
        found
    }

    /// The condition expression of guard `g`.
    pub fn guard_condition(&self, g: GuardId) -> &ast::Expr {
        match self.stmt(self.guard(g).stmt).map(|s| &s.kind) {
            Some(StmtKind::If { cond, .. }) | Some(StmtKind::While { cond, .. }) => cond,
            _ => unreachable!("guard statement is an if or while"),
        }
    }

    /// Copy with all source positions cleared, for structural comparison.
    pub fn normalized(&self) -> Program {
        let mut p = self.clone();
        for f in &mut p.functions {
            f.span = Span::default();
            for param in &mut f.params {
                param.span = Span::default();
            }
            f.body.iter_mut().for_each(Stmt::clear_spans);
        }
        for g in &mut p.guards {
            g.span = Span::default();
        }
        p
    }
}
