// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;

use super::ast::*;
use super::Program;

/// Canonical source rendering. Re-parsing the output yields a structurally
/// identical program with the same statement and guard ids.
pub fn pretty(program: &Program) -> String {
    render(program, &|_| None)
}

/// Renders `program` with an inserted toggle test in front of every guard for
/// which `toggle_name` returns a name, e.g. `if (TOG_1 || x > 1)`. The output
/// is for display; toggle names are not GuardLang identifiers.
pub fn render(program: &Program, toggle_name: &dyn Fn(GuardId) -> Option<String>) -> String {
    let mut p = Printer {
        out: String::new(),
        toggle_name,
    };
    for (i, f) in program.functions.iter().enumerate() {
        if i > 0 {
            p.out.push('\n');
        }
        p.function(f);
    }
    p.out
}

struct Printer<'a> {
    out: String,
    toggle_name: &'a dyn Fn(GuardId) -> Option<String>,
}

impl Printer<'_> {
    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("    ");
        }
    }

    fn function(&mut self, f: &FunctionDef) {
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| match (p.name.as_str(), p.ty) {
                ("input", Ty::Bytes) => "input".to_string(),
                (_, Ty::Int) if p.name != "input" => p.name.clone(),
                (name, ty) => format!("{name}: {ty}"),
            })
            .collect();
        let _ = writeln!(self.out, "fn {}({}) {{", f.name, params.join(", "));
        self.body(&f.body, 1);
        self.out.push_str("}\n");
    }

    fn body(&mut self, stmts: &[Stmt], depth: usize) {
        for s in stmts {
            self.stmt(s, depth);
        }
    }

    fn stmt(&mut self, s: &Stmt, depth: usize) {
        self.indent(depth);
        match &s.kind {
            StmtKind::Let { name, value } => {
                let _ = writeln!(self.out, "let {name} = {};", rhs(value));
            }
            StmtKind::LetArray { name, init, size } => {
                let _ = writeln!(self.out, "let {name} = [{}; {size}];", expr(init, 0));
            }
            StmtKind::Assign { name, value } => {
                let _ = writeln!(self.out, "{name} = {};", rhs(value));
            }
            StmtKind::Store { name, index, value } => {
                let _ = writeln!(self.out, "{name}[{}] = {};", expr(index, 0), expr(value, 0));
            }
            StmtKind::Crash { label } => {
                let _ = writeln!(self.out, "crash({});", string_lit(label.as_bytes()));
            }
            StmtKind::Return { value: None } => self.out.push_str("return;\n"),
            StmtKind::Return { value: Some(e) } => {
                let _ = writeln!(self.out, "return {};", expr(e, 0));
            }
            StmtKind::Call(c) => {
                let _ = writeln!(self.out, "{};", call(c));
            }
            StmtKind::If { .. } => {
                self.if_chain(s, depth);
                self.out.push('\n');
            }
            StmtKind::While { guard, cond, body } => {
                let c = self.condition(*guard, cond);
                let _ = writeln!(self.out, "while ({c}) {{");
                self.body(body, depth + 1);
                self.indent(depth);
                self.out.push_str("}\n");
            }
        }
    }

    /// Prints an `if` and its `else if` continuation without the trailing
    /// newline. The caller has already indented.
    fn if_chain(&mut self, s: &Stmt, depth: usize) {
        let StmtKind::If {
            guard,
            cond,
            then_body,
            else_body,
        } = &s.kind
        else {
            unreachable!()
        };
        let c = self.condition(*guard, cond);
        let _ = writeln!(self.out, "if ({c}) {{");
        self.body(then_body, depth + 1);
        self.indent(depth);
        self.out.push('}');
        match else_body.as_deref() {
            None => {}
            Some([only]) if matches!(only.kind, StmtKind::If { .. }) => {
                self.out.push_str(" else ");
                self.if_chain(only, depth);
            }
            Some(body) => {
                self.out.push_str(" else {\n");
                self.body(body, depth + 1);
                self.indent(depth);
                self.out.push('}');
            }
        }
    }

    fn condition(&self, guard: GuardId, cond: &Expr) -> String {
        match (self.toggle_name)(guard) {
            // right operand of `||`: parenthesize anything at `||` strength
            Some(tog) => format!("{tog} || {}", expr(cond, BinOp::Or.precedence() + 1)),
            None => expr(cond, 0),
        }
    }
}

fn rhs(r: &Rhs) -> String {
    match r {
        Rhs::Expr(e) => expr(e, 0),
        Rhs::Call(c) => call(c),
    }
}

fn call(c: &Call) -> String {
    let args: Vec<String> = c.args.iter().map(|a| expr(a, 0)).collect();
    format!("{}({})", c.func, args.join(", "))
}

const UNARY_PREC: u8 = 7;

fn expr(e: &Expr, min_prec: u8) -> String {
    match &e.kind {
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Str(bytes) => string_lit(bytes),
        ExprKind::Var(name) => name.clone(),
        ExprKind::Index { base, index } => format!("{base}[{}]", expr(index, 0)),
        ExprKind::Len(inner) => format!("len({})", expr(inner, 0)),
        ExprKind::Unary(op, inner) => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            };
            let operand = expr(inner, UNARY_PREC);
            // keep `- -x` from lexing as two minus signs glued together
            if operand.starts_with('-') {
                format!("{sym}({operand})")
            } else {
                format!("{sym}{operand}")
            }
        }
        ExprKind::Binary(op, l, r) => {
            let prec = op.precedence();
            let text = format!("{} {} {}", expr(l, prec), op.symbol(), expr(r, prec + 1));
            if prec < min_prec {
                format!("({text})")
            } else {
                text
            }
        }
    }
}

fn string_lit(bytes: &[u8]) -> String {
    let mut s = String::from("\"");
    for &b in bytes {
        match b {
            b'"' => s.push_str("\\\""),
            b'\\' => s.push_str("\\\\"),
            b'\n' => s.push_str("\\n"),
            b'\t' => s.push_str("\\t"),
            0x20..=0x7e => s.push(b as char),
            _ => {
                let _ = write!(s, "\\x{b:02x}");
            }
        }
    }
    s.push('"');
    s
}
