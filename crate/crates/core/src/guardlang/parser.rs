// SPDX-License-Identifier: Apache-2.0

use super::ast::*;
use super::lexer::{Tok, Token};
use super::{Diagnostic, GuardKind, GuardSite, Span};

pub(super) struct Parsed {
    pub functions: Vec<FunctionDef>,
    pub guards: Vec<GuardSite>,
    pub stmt_count: u32,
}

/// Largest array a program may declare.
pub const MAX_ARRAY_LEN: i64 = 1 << 20;

pub(super) fn parse_tokens(tokens: Vec<Token>) -> Result<Parsed, Diagnostic> {
    let mut p = Parser {
        tokens,
        pos: 0,
        next_stmt: 0,
        guards: Vec::new(),
        current_fn: 0,
    };
    let mut functions = Vec::new();
    while p.peek() != &Tok::Eof {
        functions.push(p.function()?);
        p.current_fn += 1;
    }
    Ok(Parsed {
        functions,
        guards: p.guards,
        stmt_count: p.next_stmt,
    })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    next_stmt: u32,
    guards: Vec<GuardSite>,
    current_fn: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Span, Diagnostic> {
        if self.peek() == &tok {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn unexpected(&self, wanted: &str) -> Diagnostic {
        Diagnostic::syntax(
            self.span(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn ident(&mut self) -> Result<(String, Span), Diagnostic> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.advance().span;
                Ok((name, span))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn stmt_id(&mut self) -> StmtId {
        let id = StmtId(self.next_stmt);
        self.next_stmt += 1;
        id
    }

    fn function(&mut self) -> Result<FunctionDef, Diagnostic> {
        let span = self.expect(Tok::Fn)?;
        let (name, _) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let (pname, pspan) = self.ident()?;
                let ty = if self.eat(&Tok::Colon) {
                    match self.advance().tok {
                        Tok::IntTy => Ty::Int,
                        Tok::BytesTy => Ty::Bytes,
                        _ => {
                            self.pos -= 1;
                            return Err(self.unexpected("`int` or `bytes`"));
                        }
                    }
                } else if pname == "input" {
                    Ty::Bytes
                } else {
                    Ty::Int
                };
                params.push(Param {
                    name: pname,
                    ty,
                    span: pspan,
                });
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        let body = self.block()?;
        Ok(FunctionDef {
            name,
            params,
            body,
            span,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, Diagnostic> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if self.peek() == &Tok::Eof {
                return Err(self.unexpected("`}`"));
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn register_guard(&mut self, stmt: StmtId, kind: GuardKind, span: Span) -> GuardId {
        let id = GuardId(self.guards.len() as u32);
        self.guards.push(GuardSite {
            id,
            stmt,
            kind,
            span,
            function: self.current_fn,
        });
        id
    }

    fn stmt(&mut self) -> Result<Stmt, Diagnostic> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Let => {
                self.advance();
                let id = self.stmt_id();
                let (name, _) = self.ident()?;
                self.expect(Tok::Assign)?;
                let kind = if self.peek() == &Tok::LBracket {
                    self.advance();
                    let init = self.expr()?;
                    self.expect(Tok::Semi)?;
                    let size_span = self.span();
                    let size = match self.advance().tok {
                        Tok::Int(n) if n > 0 && n <= MAX_ARRAY_LEN => n as u32,
                        _ => {
                            return Err(Diagnostic::syntax(
                                size_span,
                                format!("array size must be an integer literal in 1..={MAX_ARRAY_LEN}"),
                            ))
                        }
                    };
                    self.expect(Tok::RBracket)?;
                    StmtKind::LetArray { name, init, size }
                } else {
                    StmtKind::Let {
                        name,
                        value: self.rhs()?,
                    }
                };
                self.expect(Tok::Semi)?;
                Ok(Stmt { id, span, kind })
            }
            Tok::If => self.if_stmt(),
            Tok::While => {
                self.advance();
                let id = self.stmt_id();
                let guard = self.register_guard(id, GuardKind::While, span);
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let body = self.block()?;
                Ok(Stmt {
                    id,
                    span,
                    kind: StmtKind::While { guard, cond, body },
                })
            }
            Tok::Crash => {
                self.advance();
                let id = self.stmt_id();
                self.expect(Tok::LParen)?;
                let label_span = self.span();
                let label = match self.advance().tok {
                    Tok::Str(bytes) => String::from_utf8(bytes)
                        .map_err(|_| Diagnostic::syntax(label_span, "crash label must be valid UTF-8"))?,
                    Tok::Ident(name) => name,
                    _ => return Err(Diagnostic::syntax(label_span, "expected crash label (string literal)")),
                };
                if label.is_empty() {
                    return Err(Diagnostic::syntax(label_span, "crash label must not be empty"));
                }
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                Ok(Stmt {
                    id,
                    span,
                    kind: StmtKind::Crash { label },
                })
            }
            Tok::Return => {
                self.advance();
                let id = self.stmt_id();
                let value = if self.peek() == &Tok::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(Tok::Semi)?;
                Ok(Stmt {
                    id,
                    span,
                    kind: StmtKind::Return { value },
                })
            }
            Tok::Ident(name) => {
                let id = self.stmt_id();
                let kind = match self.peek_at(1) {
                    Tok::LParen => StmtKind::Call(self.call()?),
                    Tok::LBracket => {
                        self.advance();
                        self.advance();
                        let index = self.expr()?;
                        self.expect(Tok::RBracket)?;
                        self.expect(Tok::Assign)?;
                        let value = self.expr()?;
                        StmtKind::Store { name, index, value }
                    }
                    Tok::Assign => {
                        self.advance();
                        self.advance();
                        StmtKind::Assign {
                            name,
                            value: self.rhs()?,
                        }
                    }
                    _ => {
                        self.advance();
                        return Err(self.unexpected("`=`, `[` or `(`"));
                    }
                };
                self.expect(Tok::Semi)?;
                Ok(Stmt { id, span, kind })
            }
            _ => Err(self.unexpected("statement")),
        }
    }

    fn if_stmt(&mut self) -> Result<Stmt, Diagnostic> {
        let span = self.expect(Tok::If)?;
        let id = self.stmt_id();
        let guard = self.register_guard(id, GuardKind::If, span);
        self.expect(Tok::LParen)?;
        let cond = self.expr()?;
        self.expect(Tok::RParen)?;
        let then_body = self.block()?;
        let else_body = if self.eat(&Tok::Else) {
            if self.peek() == &Tok::If {
                Some(vec![self.if_stmt()?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt {
            id,
            span,
            kind: StmtKind::If {
                guard,
                cond,
                then_body,
                else_body,
            },
        })
    }

    fn rhs(&mut self) -> Result<Rhs, Diagnostic> {
        if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::LParen {
            Ok(Rhs::Call(self.call()?))
        } else {
            Ok(Rhs::Expr(self.expr()?))
        }
    }

    fn call(&mut self) -> Result<Call, Diagnostic> {
        let (func, span) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                args.push(self.expr()?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        Ok(Call { func, args, span })
    }

    fn expr(&mut self) -> Result<Expr, Diagnostic> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, Diagnostic> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let span = self.advance().span;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        let op = match self.peek() {
            Tok::Minus => UnOp::Neg,
            Tok::Bang => UnOp::Not,
            _ => return self.primary(),
        };
        self.advance();
        let operand = self.unary()?;
        // fold `-literal` so negative constants print and re-parse identically
        if let (UnOp::Neg, ExprKind::Int(v)) = (op, &operand.kind) {
            return Ok(Expr::new(ExprKind::Int(v.wrapping_neg()), span));
        }
        Ok(Expr::new(ExprKind::Unary(op, Box::new(operand)), span))
    }

    fn primary(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr::new(ExprKind::Int(v), span))
            }
            Tok::Str(bytes) => {
                self.advance();
                Ok(Expr::new(ExprKind::Str(bytes), span))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Len => {
                self.advance();
                self.expect(Tok::LParen)?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::new(ExprKind::Len(Box::new(e)), span))
            }
            Tok::Ident(name) => {
                self.advance();
                match self.peek() {
                    Tok::LBracket => {
                        self.advance();
                        let index = self.expr()?;
                        self.expect(Tok::RBracket)?;
                        Ok(Expr::new(
                            ExprKind::Index {
                                base: name,
                                index: Box::new(index),
                            },
                            span,
                        ))
                    }
                    Tok::LParen => Err(Diagnostic::syntax(
                        span,
                        format!(
                            "call to `{name}` is only allowed as a statement or the right-hand side of an assignment"
                        ),
                    )),
                    _ => Ok(Expr::new(ExprKind::Var(name), span)),
                }
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}
