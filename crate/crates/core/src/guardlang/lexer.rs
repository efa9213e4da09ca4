// SPDX-License-Identifier: Apache-2.0

use super::{Diagnostic, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(Vec<u8>),
    // keywords
    Fn,
    Let,
    If,
    Else,
    While,
    Return,
    Crash,
    Len,
    IntTy,
    BytesTy,
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Bang,
    AndAnd,
    OrOr,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(name) => format!("identifier `{name}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Fn => "fn",
            Tok::Let => "let",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::While => "while",
            Tok::Return => "return",
            Tok::Crash => "crash",
            Tok::Len => "len",
            Tok::IntTy => "int",
            Tok::BytesTy => "bytes",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Assign => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::Bang => "!",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Ident(_) | Tok::Int(_) | Tok::Str(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut lx = Lexer {
        src: source.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        lx.skip_trivia();
        let span = lx.span();
        let Some(c) = lx.peek() else {
            out.push(Token { tok: Tok::Eof, span });
            return Ok(out);
        };
        let tok = match c {
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => lx.ident(),
            b'0'..=b'9' => lx.number(span)?,
            b'\'' => lx.char_lit(span)?,
            b'"' => lx.string_lit(span)?,
            _ => lx.punct(span)?,
        };
        out.push(Token { tok, span });
    }
}

impl Lexer<'_> {
    fn span(&self) -> Span {
        Span::new(self.line, self.col)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else if c & 0xC0 != 0x80 {
            // count columns in characters, not UTF-8 continuation bytes
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() {
                self.bump();
            } else if c == b'/' && self.peek2() == Some(b'/') {
                while let Some(c) = self.peek() {
                    if c == b'\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn ident(&mut self) -> Tok {
        let start = self.pos;
        while matches!(self.peek(), Some(b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'_')) {
            self.bump();
        }
        let word = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
        match word {
            "fn" => Tok::Fn,
            "let" => Tok::Let,
            "if" => Tok::If,
            "else" => Tok::Else,
            "while" => Tok::While,
            "return" => Tok::Return,
            "crash" => Tok::Crash,
            "len" => Tok::Len,
            "int" => Tok::IntTy,
            "bytes" => Tok::BytesTy,
            _ => Tok::Ident(word.to_string()),
        }
    }

    fn number(&mut self, span: Span) -> Result<Tok, Diagnostic> {
        let start = self.pos;
        let hex = self.peek() == Some(b'0') && matches!(self.peek2(), Some(b'x' | b'X'));
        if hex {
            self.bump();
            self.bump();
        }
        let digits_start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.bump();
        }
        let text = std::str::from_utf8(&self.src[digits_start..self.pos]).expect("ascii digits");
        let text = text.replace('_', "");
        let parsed = if hex {
            u64::from_str_radix(&text, 16)
        } else {
            text.parse::<u64>()
        };
        // 2^63 is accepted so that `-9223372036854775808` can be written.
        let parsed = parsed.ok().filter(|v| *v <= 1u64 << 63);
        parsed.map(|v| Tok::Int(v as i64)).ok_or_else(|| {
            let lit = String::from_utf8_lossy(&self.src[start..self.pos]);
            Diagnostic::syntax(span, format!("invalid integer literal `{lit}`"))
        })
    }

    fn escape(&mut self, span: Span) -> Result<u8, Diagnostic> {
        let Some(c) = self.bump() else {
            return Err(Diagnostic::syntax(span, "unterminated escape sequence"));
        };
        Ok(match c {
            b'n' => b'\n',
            b't' => b'\t',
            b'r' => b'\r',
            b'0' => 0,
            b'\\' => b'\\',
            b'\'' => b'\'',
            b'"' => b'"',
            b'x' => {
                let mut v = 0u8;
                for _ in 0..2 {
                    let d = self
                        .bump()
                        .and_then(|d| (d as char).to_digit(16))
                        .ok_or_else(|| Diagnostic::syntax(span, "malformed \\x escape"))?;
                    v = v * 16 + d as u8;
                }
                v
            }
            other => {
                return Err(Diagnostic::syntax(
                    span,
                    format!("unknown escape `\\{}`", other as char),
                ))
            }
        })
    }

    fn char_lit(&mut self, span: Span) -> Result<Tok, Diagnostic> {
        self.bump();
        let value = match self.bump() {
            Some(b'\\') => self.escape(span)?,
            Some(b'\'') | Some(b'\n') | None => {
                return Err(Diagnostic::syntax(span, "empty or unterminated character literal"))
            }
            Some(c) if c.is_ascii() => c,
            Some(_) => return Err(Diagnostic::syntax(span, "character literal must be ASCII")),
        };
        if self.bump() != Some(b'\'') {
            return Err(Diagnostic::syntax(span, "unterminated character literal"));
        }
        Ok(Tok::Int(i64::from(value)))
    }

    fn string_lit(&mut self, span: Span) -> Result<Tok, Diagnostic> {
        self.bump();
        let mut bytes = Vec::new();
        loop {
            match self.bump() {
                Some(b'"') => return Ok(Tok::Str(bytes)),
                Some(b'\\') => bytes.push(self.escape(span)?),
                Some(b'\n') | None => return Err(Diagnostic::syntax(span, "unterminated string literal")),
                Some(c) => bytes.push(c),
            }
        }
    }

    fn punct(&mut self, span: Span) -> Result<Tok, Diagnostic> {
        let c = self.bump().expect("caller checked for input");
        let next = self.peek();
        let two = |lx: &mut Self, tok: Tok| {
            lx.bump();
            tok
        };
        Ok(match (c, next) {
            (b'&', Some(b'&')) => two(self, Tok::AndAnd),
            (b'|', Some(b'|')) => two(self, Tok::OrOr),
            (b'=', Some(b'=')) => two(self, Tok::EqEq),
            (b'!', Some(b'=')) => two(self, Tok::NotEq),
            (b'<', Some(b'=')) => two(self, Tok::Le),
            (b'>', Some(b'=')) => two(self, Tok::Ge),
            (b'(', _) => Tok::LParen,
            (b')', _) => Tok::RParen,
            (b'{', _) => Tok::LBrace,
            (b'}', _) => Tok::RBrace,
            (b'[', _) => Tok::LBracket,
            (b']', _) => Tok::RBracket,
            (b',', _) => Tok::Comma,
            (b';', _) => Tok::Semi,
            (b':', _) => Tok::Colon,
            (b'=', _) => Tok::Assign,
            (b'+', _) => Tok::Plus,
            (b'-', _) => Tok::Minus,
            (b'*', _) => Tok::Star,
            (b'/', _) => Tok::Slash,
            (b'%', _) => Tok::Percent,
            (b'!', _) => Tok::Bang,
            (b'<', _) => Tok::Lt,
            (b'>', _) => Tok::Gt,
            _ => {
                let shown = if c.is_ascii_graphic() {
                    format!("`{}`", c as char)
                } else {
                    format!("byte 0x{c:02x}")
                };
                return Err(Diagnostic::syntax(span, format!("unexpected character {shown}")));
            }
        })
    }
}
