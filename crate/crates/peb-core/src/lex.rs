//! Tokenizer for `.peb` model files.
//!
//! Comments run from `---` to the end of the line. The lexer is
//! whitespace-insensitive; all layout is decided by keywords at parse time.

use crate::diag::{Diagnostic, FileId, SourceSpan};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    /// Raw decimal literal text (only legal as a probability after `@`).
    Dec(String),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Assign,   // :=
    At,       // @
    Dot,      // .
    DotDot,   // ..
    Bar,      // |
    MapsTo,   // |->
    RangeRestrict, // |>
    DomSubtract,   // <<|
    Override,      // <+
    And,      // /\
    Or,       // \/
    Eq,       // =
    Ne,       // /=
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("`{s}`"),
            TokenKind::Int(i) => format!("`{i}`"),
            TokenKind::Dec(s) => format!("`{s}`"),
            TokenKind::Str(s) => format!("\"{s}\""),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Assign => "`:=`".into(),
            TokenKind::At => "`@`".into(),
            TokenKind::Dot => "`.`".into(),
            TokenKind::DotDot => "`..`".into(),
            TokenKind::Bar => "`|`".into(),
            TokenKind::MapsTo => "`|->`".into(),
            TokenKind::RangeRestrict => "`|>`".into(),
            TokenKind::DomSubtract => "`<<|`".into(),
            TokenKind::Override => "`<+`".into(),
            TokenKind::And => "`/\\`".into(),
            TokenKind::Or => "`\\/`".into(),
            TokenKind::Eq => "`=`".into(),
            TokenKind::Ne => "`/=`".into(),
            TokenKind::Lt => "`<`".into(),
            TokenKind::Le => "`<=`".into(),
            TokenKind::Gt => "`>`".into(),
            TokenKind::Ge => "`>=`".into(),
            TokenKind::Plus => "`+`".into(),
            TokenKind::Minus => "`-`".into(),
            TokenKind::Star => "`*`".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
}

struct Lexer<'s> {
    src: &'s [u8],
    pos: usize,
    line: u32,
    col: u32,
    file: FileId,
}

impl<'s> Lexer<'s> {
    fn span(&self, start_line: u32, start_col: u32, len: usize) -> SourceSpan {
        SourceSpan::new(self.file, start_line, start_col, len as u32)
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn peek3(&self) -> Option<u8> {
        self.src.get(self.pos + 2).copied()
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'-') if self.peek2() == Some(b'-') && self.peek3() == Some(b'-') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, Diagnostic> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let Some(c) = self.peek() else {
            return Ok(Token { kind: TokenKind::Eof, span: self.span(line, col, 0) });
        };

        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                self.bump();
            }
            let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return Ok(Token {
                kind: TokenKind::Ident(text.into()),
                span: self.span(line, col, self.pos - start),
            });
        }

        if c.is_ascii_digit() {
            let start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.bump();
            }
            // a single dot followed by a digit makes a decimal; `..` is an interval
            if self.peek() == Some(b'.') && matches!(self.peek2(), Some(d) if d.is_ascii_digit()) {
                self.bump();
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.bump();
                }
                let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
                return Ok(Token {
                    kind: TokenKind::Dec(text.into()),
                    span: self.span(line, col, self.pos - start),
                });
            }
            let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let value: i64 = text.parse().map_err(|_| {
                Diagnostic::error(
                    format!("integer literal `{text}` out of range"),
                    self.span(line, col, self.pos - start),
                )
            })?;
            return Ok(Token {
                kind: TokenKind::Int(value),
                span: self.span(line, col, self.pos - start),
            });
        }

        if c == b'"' {
            self.bump();
            let start = self.pos;
            loop {
                match self.peek() {
                    Some(b'"') => break,
                    Some(b'\n') | None => {
                        return Err(Diagnostic::error(
                            "unterminated string literal",
                            self.span(line, col, self.pos - start + 1),
                        ));
                    }
                    _ => {
                        self.bump();
                    }
                }
            }
            let text = core::str::from_utf8(&self.src[start..self.pos])
                .map_err(|_| {
                    Diagnostic::error("invalid UTF-8 in string literal", self.span(line, col, 1))
                })?
                .into();
            self.bump(); // closing quote
            return Ok(Token {
                kind: TokenKind::Str(text),
                span: self.span(line, col, self.pos - start + 2),
            });
        }

        // punctuation and operators, longest match first
        let two = |a: u8, b: u8, s: &Self| s.peek() == Some(a) && s.peek2() == Some(b);
        let kind_len: (TokenKind, usize) = if two(b'|', b'-', self) && self.peek3() == Some(b'>') {
            (TokenKind::MapsTo, 3)
        } else if two(b'<', b'<', self) && self.peek3() == Some(b'|') {
            (TokenKind::DomSubtract, 3)
        } else if two(b'|', b'>', self) {
            (TokenKind::RangeRestrict, 2)
        } else if two(b'<', b'+', self) {
            (TokenKind::Override, 2)
        } else if two(b'<', b'=', self) {
            (TokenKind::Le, 2)
        } else if two(b'>', b'=', self) {
            (TokenKind::Ge, 2)
        } else if two(b':', b'=', self) {
            (TokenKind::Assign, 2)
        } else if two(b'/', b'\\', self) {
            (TokenKind::And, 2)
        } else if two(b'\\', b'/', self) {
            (TokenKind::Or, 2)
        } else if two(b'/', b'=', self) {
            (TokenKind::Ne, 2)
        } else if two(b'.', b'.', self) {
            (TokenKind::DotDot, 2)
        } else {
            let kind = match c {
                b'{' => TokenKind::LBrace,
                b'}' => TokenKind::RBrace,
                b'(' => TokenKind::LParen,
                b')' => TokenKind::RParen,
                b',' => TokenKind::Comma,
                b':' => TokenKind::Colon,
                b'@' => TokenKind::At,
                b'.' => TokenKind::Dot,
                b'|' => TokenKind::Bar,
                b'=' => TokenKind::Eq,
                b'<' => TokenKind::Lt,
                b'>' => TokenKind::Gt,
                b'+' => TokenKind::Plus,
                b'-' => TokenKind::Minus,
                b'*' => TokenKind::Star,
                other => {
                    return Err(Diagnostic::error(
                        format!("unexpected character `{}`", other as char),
                        self.span(line, col, 1),
                    ));
                }
            };
            (kind, 1)
        };
        for _ in 0..kind_len.1 {
            self.bump();
        }
        Ok(Token { kind: kind_len.0, span: self.span(line, col, kind_len.1) })
    }
}

/// Tokenizes a whole file; the trailing token is always [`TokenKind::Eof`].
pub fn tokenize(src: &str, file: FileId) -> Result<Vec<Token>, Diagnostic> {
    let mut lexer = Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1, file };
    let mut tokens = Vec::new();
    loop {
        let tok = lexer.next_token()?;
        let done = tok.kind == TokenKind::Eof;
        tokens.push(tok);
        if done {
            return Ok(tokens);
        }
    }
}
