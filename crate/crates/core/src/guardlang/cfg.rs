// SPDX-License-Identifier: Apache-2.0

//! Lowering from the AST to an executable control-flow graph.
//!
//! Lowering doubles as the semantic checker: name resolution and typing happen
//! while blocks are laid out, so a program that lowers is a valid program.
//! Blocks are numbered in source order across the whole program. Coverage
//! edges are the intra-function CFG edges plus three kinds of virtual edges:
//! the start edge into the entry block, call edges into callee entry blocks,
//! and crash edges into a per-label sink.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::{Diagnostic, DiagnosticKind, Program, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u32);

impl BlockId {
    /// Virtual source of the edge into the entry block.
    pub const START: BlockId = BlockId(u32::MAX);

    /// Virtual sink reached by `crash(label)` for the label with index `label`.
    pub fn sink(label: u32) -> BlockId {
        BlockId(u32::MAX - 1 - label)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: BlockId,
    pub to: BlockId,
}

pub type Slot = u32;
pub type EdgeIdx = u32;

const UNRESOLVED: EdgeIdx = EdgeIdx::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Jump {
    pub target: BlockId,
    pub edge: EdgeIdx,
}

impl Jump {
    fn to(target: BlockId) -> Self {
        Jump {
            target,
            edge: UNRESOLVED,
        }
    }
}

/// Lowered, resolved expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CExpr {
    Int(i64),
    Bytes(Arc<[u8]>),
    Local(Slot),
    /// Byte read from a byte string; out-of-range reads yield 0.
    ByteAt(Box<CExpr>, Box<CExpr>),
    /// Integer array read; out-of-range reads fault.
    ArrayAt(Slot, Box<CExpr>),
    LenBytes(Box<CExpr>),
    Neg(Box<CExpr>),
    Not(Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Set {
        slot: Slot,
        value: CExpr,
    },
    InitArray {
        slot: Slot,
        init: CExpr,
        size: u32,
    },
    Store {
        slot: Slot,
        index: CExpr,
        value: CExpr,
    },
    Call {
        dst: Option<Slot>,
        func: usize,
        args: Vec<CExpr>,
        edge: EdgeIdx,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminator {
    Goto(Jump),
    Branch {
        guard: GuardId,
        cond: CExpr,
        then_: Jump,
        else_: Jump,
    },
    /// Inserted toggle test: `on` is the guarded block, `off` the block that
    /// evaluates the original condition.
    Toggle {
        guard: GuardId,
        on: Jump,
        off: Jump,
    },
    /// `exit` is `None` when this block is itself the function exit.
    Return {
        value: Option<CExpr>,
        exit: Option<Jump>,
    },
    Crash {
        label: u32,
        edge: EdgeIdx,
    },
    /// Falling off the end of the function.
    Exit,
}

impl Terminator {
    pub fn jumps(&self) -> Vec<Jump> {
        match self {
            Terminator::Goto(j) => vec![*j],
            Terminator::Branch { then_, else_, .. } => vec![*then_, *else_],
            Terminator::Toggle { on, off, .. } => vec![*on, *off],
            Terminator::Return { exit, .. } => exit.iter().copied().collect(),
            Terminator::Crash { .. } | Terminator::Exit => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub id: BlockId,
    pub func: usize,
    pub ops: Vec<Op>,
    pub term: Terminator,
    /// Present on blocks added by toggle insertion.
    pub instrumentation: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionCfg {
    pub name: String,
    pub param_slots: Vec<Slot>,
    pub slot_count: u32,
    pub entry: BlockId,
    pub exit: BlockId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramCfg {
    pub functions: Vec<FunctionCfg>,
    pub blocks: Vec<Block>,
    /// Every coverage edge, sorted; an edge's index is its position here.
    pub edges: Vec<Edge>,
    pub labels: Vec<String>,
    pub entry: usize,
    /// For each guard, the block whose terminator evaluates its condition.
    pub guard_blocks: Vec<BlockId>,
}

impl ProgramCfg {
    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.index()]
    }

    pub fn edge_index(&self, edge: Edge) -> Option<EdgeIdx> {
        self.edges.binary_search(&edge).ok().map(|i| i as EdgeIdx)
    }

    pub fn start_edge(&self) -> EdgeIdx {
        let entry = self.functions[self.entry].entry;
        self.edge_index(Edge {
            from: BlockId::START,
            to: entry,
        })
        .expect("start edge is always present")
    }

    /// Blocks belonging to function `func`, in id order.
    pub fn function_blocks(&self, func: usize) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(move |b| b.func == func)
    }

    /// Intra-function edges of `func` (no virtual start, call or crash edges).
    pub fn function_edges(&self, func: usize) -> Vec<Edge> {
        let mut out: Vec<Edge> = self
            .function_blocks(func)
            .flat_map(|b| {
                b.term.jumps().into_iter().map(move |j| Edge {
                    from: b.id,
                    to: j.target,
                })
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// The condition of guard `g` as lowered.
    pub fn guard_condition(&self, g: GuardId) -> &CExpr {
        match &self.block(self.guard_blocks[g.index()]).term {
            Terminator::Branch { cond, .. } => cond,
            other => unreachable!("guard block must end in a branch, found {other:?}"),
        }
    }

    /// Recomputes the edge table from the blocks and patches every jump with
    /// its dense edge index.
    pub(crate) fn finalize_edges(&mut self) {
        let mut edges = Vec::new();
        let entry = self.functions[self.entry].entry;
        edges.push(Edge {
            from: BlockId::START,
            to: entry,
        });
        for b in &self.blocks {
            for j in b.term.jumps() {
                edges.push(Edge {
                    from: b.id,
                    to: j.target,
                });
            }
            if let Terminator::Crash { label, .. } = b.term {
                edges.push(Edge {
                    from: b.id,
                    to: BlockId::sink(label),
                });
            }
            for op in &b.ops {
                if let Op::Call { func, .. } = op {
                    edges.push(Edge {
                        from: b.id,
                        to: self.functions[*func].entry,
                    });
                }
            }
        }
        edges.sort();
        edges.dedup();
        let index = |from: BlockId, to: BlockId| -> EdgeIdx {
            edges.binary_search(&Edge { from, to }).expect("edge collected above") as EdgeIdx
        };
        for b in &mut self.blocks {
            let from = b.id;
            let fix = |j: &mut Jump| j.edge = index(from, j.target);
            match &mut b.term {
                Terminator::Goto(j) => fix(j),
                Terminator::Branch { then_, else_, .. } => {
                    fix(then_);
                    fix(else_);
                }
                Terminator::Toggle { on, off, .. } => {
                    fix(on);
                    fix(off);
                }
                Terminator::Return { exit: Some(j), .. } => fix(j),
                Terminator::Crash { label, edge } => *edge = index(from, BlockId::sink(*label)),
                Terminator::Return { exit: None, .. } | Terminator::Exit => {}
            }
            for op in &mut b.ops {
                if let Op::Call { func, edge, .. } = op {
                    *edge = index(from, self.functions[*func].entry);
                }
            }
        }
        self.edges = edges;
    }
}

/// Resolves, type-checks and lowers `program`. Any error is a semantic error
/// in the source.
pub(crate) fn lower(program: &Program) -> Result<ProgramCfg, Diagnostic> {
    let mut sigs: HashMap<&str, usize> = HashMap::new();
    for (i, f) in program.functions.iter().enumerate() {
        if sigs.insert(f.name.as_str(), i).is_some() {
            return Err(Diagnostic::new(
                DiagnosticKind::DuplicateFunction,
                f.span,
                format!("duplicate function `{}`", f.name),
            ));
        }
    }
    let mut lw = Lowerer {
        program,
        sigs,
        blocks: Vec::new(),
        labels: Vec::new(),
        guard_blocks: vec![BlockId(u32::MAX); program.guards.len()],
    };
    let mut functions = Vec::with_capacity(program.functions.len());
    // entry blocks are needed for call edges, which are patched afterwards
    for (i, f) in program.functions.iter().enumerate() {
        functions.push(lw.function(i, f)?);
    }
    let mut cfg = ProgramCfg {
        functions,
        blocks: lw.blocks,
        edges: Vec::new(),
        labels: lw.labels,
        entry: program.entry,
        guard_blocks: lw.guard_blocks,
    };
    cfg.finalize_edges();
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarTy {
    Int,
    Bytes,
    Array(u32),
}

impl From<Ty> for VarTy {
    fn from(t: Ty) -> Self {
        match t {
            Ty::Int => VarTy::Int,
            Ty::Bytes => VarTy::Bytes,
        }
    }
}

impl std::fmt::Display for VarTy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VarTy::Int => f.write_str("int"),
            VarTy::Bytes => f.write_str("bytes"),
            VarTy::Array(n) => write!(f, "[int; {n}]"),
        }
    }
}

struct Lowerer<'a> {
    program: &'a Program,
    sigs: HashMap<&'a str, usize>,
    blocks: Vec<Block>,
    labels: Vec<String>,
    guard_blocks: Vec<BlockId>,
}

struct FnCtx {
    func: usize,
    scopes: Vec<HashMap<String, (Slot, VarTy)>>,
    slot_count: u32,
    /// Block currently receiving statements; `None` after return/crash.
    cursor: Option<BlockId>,
    /// Blocks ending in `return` that must jump to the exit block.
    pending_returns: Vec<BlockId>,
}

fn type_error(span: Span, message: impl Into<String>) -> Diagnostic {
    Diagnostic::new(DiagnosticKind::Type, span, message)
}

fn name_error(span: Span, message: impl Into<String>) -> Diagnostic {
    Diagnostic::new(DiagnosticKind::Name, span, message)
}

impl<'a> Lowerer<'a> {
    fn new_block(&mut self, func: usize) -> BlockId {
        let id = BlockId(self.blocks.len() as u32);
        self.blocks.push(Block {
            id,
            func,
            ops: Vec::new(),
            term: Terminator::Exit,
            instrumentation: false,
        });
        id
    }

    fn block_mut(&mut self, id: BlockId) -> &mut Block {
        &mut self.blocks[id.index()]
    }

    fn function(&mut self, index: usize, f: &'a FunctionDef) -> Result<FunctionCfg, Diagnostic> {
        let entry = self.new_block(index);
        let mut ctx = FnCtx {
            func: index,
            scopes: vec![HashMap::new()],
            slot_count: 0,
            cursor: Some(entry),
            pending_returns: Vec::new(),
        };
        let mut param_slots = Vec::new();
        for p in &f.params {
            param_slots.push(ctx.declare(&p.name, p.ty.into(), p.span)?);
        }
        self.body(&mut ctx, &f.body)?;

        let returns = count_returns(&f.body);
        let last_is_return = matches!(f.body.last().map(|s| &s.kind), Some(StmtKind::Return { .. }));
        let exit = if returns == 1 && last_is_return {
            // a single trailing return makes its block the exit
            ctx.pending_returns.pop().expect("trailing return recorded")
        } else if let (0, Some(cur)) = (returns, ctx.cursor) {
            cur
        } else {
            let exit = self.new_block(index);
            if let Some(cur) = ctx.cursor {
                self.block_mut(cur).term = Terminator::Goto(Jump::to(exit));
            }
            for b in std::mem::take(&mut ctx.pending_returns) {
                if let Terminator::Return { exit: e, .. } = &mut self.block_mut(b).term {
                    *e = Some(Jump::to(exit));
                }
            }
            exit
        };
        Ok(FunctionCfg {
            name: f.name.clone(),
            param_slots,
            slot_count: ctx.slot_count,
            entry,
            exit,
        })
    }

    /// Lowers a statement list in a fresh lexical scope.
    fn body(&mut self, ctx: &mut FnCtx, stmts: &'a [Stmt]) -> Result<(), Diagnostic> {
        ctx.scopes.push(HashMap::new());
        for s in stmts {
            self.stmt(ctx, s)?;
        }
        ctx.scopes.pop();
        Ok(())
    }

    /// Block to append straight-line code to, opening an unreachable block
    /// when the previous statement ended control flow.
    fn cursor(&mut self, ctx: &mut FnCtx) -> BlockId {
        match ctx.cursor {
            Some(b) => b,
            None => {
                let b = self.new_block(ctx.func);
                ctx.cursor = Some(b);
                b
            }
        }
    }

    fn stmt(&mut self, ctx: &mut FnCtx, s: &'a Stmt) -> Result<(), Diagnostic> {
        match &s.kind {
            StmtKind::Let { name, value } => {
                let (value, ty) = self.rhs(ctx, value)?;
                let op_value = value;
                let slot = ctx.declare(name, ty, s.span)?;
                let cur = self.cursor(ctx);
                self.push_rhs(cur, slot, op_value);
            }
            StmtKind::LetArray { name, init, size } => {
                let init = self.int_expr(ctx, init, "array initializer")?;
                let slot = ctx.declare(name, VarTy::Array(*size), s.span)?;
                let cur = self.cursor(ctx);
                self.block_mut(cur).ops.push(Op::InitArray {
                    slot,
                    init,
                    size: *size,
                });
            }
            StmtKind::Assign { name, value } => {
                let (slot, ty) = ctx.lookup(name, s.span)?;
                if let VarTy::Array(_) = ty {
                    return Err(type_error(s.span, format!("cannot assign to array `{name}`")));
                }
                let (value, vty) = self.rhs(ctx, value)?;
                if vty != ty {
                    return Err(type_error(
                        s.span,
                        format!("cannot assign {vty} value to `{name}` of type {ty}"),
                    ));
                }
                let cur = self.cursor(ctx);
                self.push_rhs(cur, slot, value);
            }
            StmtKind::Store { name, index, value } => {
                let (slot, ty) = ctx.lookup(name, s.span)?;
                if !matches!(ty, VarTy::Array(_)) {
                    return Err(type_error(
                        s.span,
                        format!("cannot store into `{name}` of type {ty}; only arrays are writable"),
                    ));
                }
                let index = self.int_expr(ctx, index, "array index")?;
                let value = self.int_expr(ctx, value, "stored value")?;
                let cur = self.cursor(ctx);
                self.block_mut(cur).ops.push(Op::Store { slot, index, value });
            }
            StmtKind::Call(call) => {
                let (func, args) = self.call(ctx, call)?;
                let cur = self.cursor(ctx);
                self.block_mut(cur).ops.push(Op::Call {
                    dst: None,
                    func,
                    args,
                    edge: UNRESOLVED,
                });
            }
            StmtKind::Crash { label } => {
                let idx = match self.labels.iter().position(|l| l == label) {
                    Some(i) => i,
                    None => {
                        self.labels.push(label.clone());
                        self.labels.len() - 1
                    }
                } as u32;
                let cur = self.cursor(ctx);
                self.block_mut(cur).term = Terminator::Crash {
                    label: idx,
                    edge: UNRESOLVED,
                };
                ctx.cursor = None;
            }
            StmtKind::Return { value } => {
                let value = match value {
                    Some(e) => Some(self.int_expr(ctx, e, "return value")?),
                    None => None,
                };
                let cur = self.cursor(ctx);
                self.block_mut(cur).term = Terminator::Return { value, exit: None };
                ctx.pending_returns.push(cur);
                ctx.cursor = None;
            }
            StmtKind::If {
                guard,
                cond,
                then_body,
                else_body,
            } => {
                let cond = self.int_expr(ctx, cond, "condition")?;
                let head = self.cursor(ctx);
                let then_first = self.new_block(ctx.func);
                ctx.cursor = Some(then_first);
                self.body(ctx, then_body)?;
                let then_end = ctx.cursor;
                let (else_first, else_end) = match else_body {
                    Some(body) => {
                        let first = self.new_block(ctx.func);
                        ctx.cursor = Some(first);
                        self.body(ctx, body)?;
                        (Some(first), ctx.cursor)
                    }
                    None => (None, None),
                };
                let join = self.new_block(ctx.func);
                for end in [then_end, else_end].into_iter().flatten() {
                    self.block_mut(end).term = Terminator::Goto(Jump::to(join));
                }
                self.block_mut(head).term = Terminator::Branch {
                    guard: *guard,
                    cond,
                    then_: Jump::to(then_first),
                    else_: Jump::to(else_first.unwrap_or(join)),
                };
                self.guard_blocks[guard.index()] = head;
                ctx.cursor = Some(join);
            }
            StmtKind::While { guard, cond, body } => {
                let cond = self.int_expr(ctx, cond, "condition")?;
                let pre = self.cursor(ctx);
                let header = self.new_block(ctx.func);
                self.block_mut(pre).term = Terminator::Goto(Jump::to(header));
                let body_first = self.new_block(ctx.func);
                ctx.cursor = Some(body_first);
                self.body(ctx, body)?;
                if let Some(end) = ctx.cursor {
                    self.block_mut(end).term = Terminator::Goto(Jump::to(header));
                }
                let after = self.new_block(ctx.func);
                self.block_mut(header).term = Terminator::Branch {
                    guard: *guard,
                    cond,
                    then_: Jump::to(body_first),
                    else_: Jump::to(after),
                };
                self.guard_blocks[guard.index()] = header;
                ctx.cursor = Some(after);
            }
        }
        Ok(())
    }

    fn push_rhs(&mut self, block: BlockId, slot: Slot, value: LoweredRhs) {
        let op = match value {
            LoweredRhs::Expr(value) => Op::Set { slot, value },
            LoweredRhs::Call(func, args) => Op::Call {
                dst: Some(slot),
                func,
                args,
                edge: UNRESOLVED,
            },
        };
        self.block_mut(block).ops.push(op);
    }

    fn rhs(&mut self, ctx: &FnCtx, rhs: &Rhs) -> Result<(LoweredRhs, VarTy), Diagnostic> {
        match rhs {
            Rhs::Expr(e) => {
                let (value, ty) = self.expr(ctx, e)?;
                Ok((LoweredRhs::Expr(value), ty))
            }
            Rhs::Call(call) => {
                let (func, args) = self.call(ctx, call)?;
                Ok((LoweredRhs::Call(func, args), VarTy::Int))
            }
        }
    }

    fn call(&mut self, ctx: &FnCtx, call: &Call) -> Result<(usize, Vec<CExpr>), Diagnostic> {
        let Some(&func) = self.sigs.get(call.func.as_str()) else {
            return Err(name_error(call.span, format!("unknown function `{}`", call.func)));
        };
        let params = &self.program.functions[func].params;
        if params.len() != call.args.len() {
            return Err(type_error(
                call.span,
                format!(
                    "`{}` takes {} argument(s) but {} were supplied",
                    call.func,
                    params.len(),
                    call.args.len()
                ),
            ));
        }
        let mut args = Vec::with_capacity(call.args.len());
        for (p, a) in params.iter().zip(&call.args) {
            let (value, ty) = self.expr(ctx, a)?;
            if ty != VarTy::from(p.ty) {
                return Err(type_error(
                    a.span,
                    format!("argument `{}` expects {} but got {ty}", p.name, p.ty),
                ));
            }
            args.push(value);
        }
        Ok((func, args))
    }

    fn int_expr(&mut self, ctx: &FnCtx, e: &Expr, what: &str) -> Result<CExpr, Diagnostic> {
        let (value, ty) = self.expr(ctx, e)?;
        if ty != VarTy::Int {
            return Err(type_error(e.span, format!("{what} must be int, found {ty}")));
        }
        Ok(value)
    }

    fn expr(&mut self, ctx: &FnCtx, e: &Expr) -> Result<(CExpr, VarTy), Diagnostic> {
        Ok(match &e.kind {
            ExprKind::Int(v) => (CExpr::Int(*v), VarTy::Int),
            ExprKind::Str(bytes) => (CExpr::Bytes(Arc::from(bytes.as_slice())), VarTy::Bytes),
            ExprKind::Var(name) => {
                let (slot, ty) = ctx.lookup(name, e.span)?;
                if let VarTy::Array(_) = ty {
                    return Err(type_error(e.span, format!("array `{name}` cannot be used as a value")));
                }
                (CExpr::Local(slot), ty)
            }
            ExprKind::Index { base, index } => {
                let (slot, ty) = ctx.lookup(base, e.span)?;
                let index = self.int_expr(ctx, index, "index")?;
                match ty {
                    VarTy::Bytes => (CExpr::ByteAt(Box::new(CExpr::Local(slot)), Box::new(index)), VarTy::Int),
                    VarTy::Array(_) => (CExpr::ArrayAt(slot, Box::new(index)), VarTy::Int),
                    VarTy::Int => return Err(type_error(e.span, format!("cannot index `{base}` of type int"))),
                }
            }
            ExprKind::Len(inner) => {
                if let ExprKind::Var(name) = &inner.kind {
                    if let Ok((_, VarTy::Array(n))) = ctx.lookup(name, inner.span) {
                        return Ok((CExpr::Int(i64::from(n)), VarTy::Int));
                    }
                }
                let (value, ty) = self.expr(ctx, inner)?;
                if ty != VarTy::Bytes {
                    return Err(type_error(inner.span, format!("len() expects bytes, found {ty}")));
                }
                (CExpr::LenBytes(Box::new(value)), VarTy::Int)
            }
            ExprKind::Unary(op, inner) => {
                let value = Box::new(self.int_expr(ctx, inner, "operand")?);
                match op {
                    UnOp::Neg => (CExpr::Neg(value), VarTy::Int),
                    UnOp::Not => (CExpr::Not(value), VarTy::Int),
                }
            }
            ExprKind::Binary(op, l, r) => {
                let what = format!("operand of `{}`", op.symbol());
                let l = self.int_expr(ctx, l, &what)?;
                let r = self.int_expr(ctx, r, &what)?;
                (CExpr::Bin(*op, Box::new(l), Box::new(r)), VarTy::Int)
            }
        })
    }
}

enum LoweredRhs {
    Expr(CExpr),
    Call(usize, Vec<CExpr>),
}

impl FnCtx {
    fn declare(&mut self, name: &str, ty: VarTy, span: Span) -> Result<Slot, Diagnostic> {
        if self.scopes.iter().any(|s| s.contains_key(name)) {
            return Err(name_error(span, format!("variable `{name}` is already declared")));
        }
        let slot = self.slot_count;
        self.slot_count += 1;
        self.scopes
            .last_mut()
            .expect("at least one scope")
            .insert(name.to_string(), (slot, ty));
        Ok(slot)
    }

    fn lookup(&self, name: &str, span: Span) -> Result<(Slot, VarTy), Diagnostic> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name).copied())
            .ok_or_else(|| name_error(span, format!("undeclared variable `{name}`")))
    }
}

fn count_returns(body: &[Stmt]) -> usize {
    let mut n = 0;
    walk_stmts(body, &mut |s| {
        if matches!(s.kind, StmtKind::Return { .. }) {
            n += 1;
        }
    });
    n
}
