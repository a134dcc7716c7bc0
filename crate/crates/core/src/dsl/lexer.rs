//! Tokenizer for migration scripts.
//!
//! Keywords are matched case-insensitively. Two regions are not tokenized
//! further and come out as a single [`TokenKind::SqlFragment`]:
//!
//! * the expression after `SQL:` up to the next top-level `TO` (or an
//!   unmatched `)`, or `;`);
//! * the parenthesised body following `WHERE` or `WHEN`.

use std::ops::Range;

use crate::diagnostic::{Diagnostic, DiagnosticCode};
use crate::span::{LineIndex, SourceSpan};

macro_rules! keywords {
    ($($variant:ident => $text:literal,)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Keyword {
            $($variant,)*
            /// `SQL:`
            Sql,
        }

        impl Keyword {
            pub fn from_word(word: &str) -> Option<Keyword> {
                $(if word.eq_ignore_ascii_case($text) { return Some(Keyword::$variant); })*
                None
            }

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Keyword::$variant => $text,)*
                    Keyword::Sql => "SQL:",
                }
            }
        }
    };
}

keywords! {
    Create => "CREATE",
    Product => "PRODUCT",
    Connection => "CONNECTION",
    Schema => "SCHEMA",
    From => "FROM",
    To => "TO",
    Map => "MAP",
    All => "ALL",
    Properties => "PROPERTIES",
    Except => "EXCEPT",
    Attribute => "ATTRIBUTE",
    Insert => "INSERT",
    Into => "INTO",
    Values => "VALUES",
    Select => "SELECT",
    Update => "UPDATE",
    Foreign => "FOREIGN",
    Key => "KEY",
    Table => "TABLE",
    Primary => "PRIMARY",
    Identified => "IDENTIFIED",
    With => "WITH",
    Identify => "IDENTIFY",
    Drop => "DROP",
    Generate => "GENERATE",
    Script => "SCRIPT",
    Save => "SAVE",
    Relation => "RELATION",
    As => "AS",
    Equals => "EQUALS",
    Where => "WHERE",
    Get => "GET",
    When => "WHEN",
    Dbname => "DBNAME",
    Host => "HOST",
    Port => "PORT",
    User => "USER",
    Pwd => "PWD",
}

impl Keyword {
    /// Soft keywords only carry meaning in specific positions and may also
    /// be used as table or column names.
    pub fn is_soft(self) -> bool {
        matches!(
            self,
            Keyword::Product
                | Keyword::Connection
                | Keyword::Schema
                | Keyword::All
                | Keyword::Properties
                | Keyword::Key
                | Keyword::Table
                | Keyword::Script
                | Keyword::Relation
                | Keyword::Dbname
                | Keyword::Host
                | Keyword::Port
                | Keyword::User
                | Keyword::Pwd
        )
    }
}

/// True when `word` can be written as a bare identifier.
pub fn is_plain_identifier(word: &str) -> bool {
    let mut chars = word.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && Keyword::from_word(word).is_none_or(Keyword::is_soft)
        && !word.eq_ignore_ascii_case("sql")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    Identifier,
    QualifiedName,
    StringLiteral,
    IntegerLiteral,
    SqlFragment,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Verbatim slice of the input.
    pub text: String,
    pub span: SourceSpan,
    pub range: Range<usize>,
}

impl Token {
    pub fn is_keyword(&self, kw: Keyword) -> bool {
        self.kind == TokenKind::Keyword(kw)
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punctuation && self.text == p
    }

    /// Value of a string literal with `''` escapes collapsed.
    pub fn string_value(&self) -> Option<String> {
        (self.kind == TokenKind::StringLiteral).then(|| {
            self.text[1..self.text.len() - 1].replace("''", "'")
        })
    }
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let (tokens, diagnostics) = tokenize_lossy(source);
    if diagnostics.is_empty() {
        Ok(tokens)
    } else {
        Err(diagnostics)
    }
}

/// Tokenizes as much as possible, returning tokens and diagnostics together
/// so the parser can keep reporting errors past a bad character.
pub(crate) fn tokenize_lossy(source: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut lexer = Lexer {
        src: source,
        bytes: source.as_bytes(),
        pos: 0,
        index: LineIndex::new(source),
        tokens: Vec::new(),
        diagnostics: Vec::new(),
    };
    lexer.run();
    (lexer.tokens, lexer.diagnostics)
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    index: LineIndex<'a>,
    tokens: Vec<Token>,
    diagnostics: Vec<Diagnostic>,
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

impl<'a> Lexer<'a> {
    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.pos + ahead).copied()
    }

    fn push(&mut self, kind: TokenKind, start: usize, end: usize) {
        self.tokens.push(Token {
            kind,
            text: self.src[start..end].to_string(),
            span: self.index.span(start, end),
            range: start..end,
        });
    }

    fn error(&mut self, code: DiagnosticCode, message: String, start: usize, end: usize) {
        let span = self.index.span(start, end);
        self.diagnostics.push(Diagnostic::new(code, message, span));
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek(0) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'-') if self.peek(1) == Some(b'-') => {
                    while let Some(b) = self.peek(0) {
                        if b == b'\n' {
                            break;
                        }
                        self.pos += 1;
                    }
                }
                _ => return,
            }
        }
    }

    fn run(&mut self) {
        loop {
            self.skip_trivia();
            let Some(b) = self.peek(0) else { return };
            let start = self.pos;
            match b {
                b if is_ident_start(b) => self.word(),
                b'0'..=b'9' => self.integer(start),
                b'-' if self.peek(1).is_some_and(|d| d.is_ascii_digit()) => {
                    self.pos += 1;
                    self.integer(start)
                }
                b'\'' => self.string(),
                b'(' | b')' | b',' | b';' | b'=' | b'.' => {
                    self.pos += 1;
                    self.push(TokenKind::Punctuation, start, self.pos);
                    if b == b'(' && self.follows_predicate_keyword() {
                        self.predicate();
                    }
                }
                _ => {
                    let ch = self.src[start..].chars().next().unwrap();
                    self.pos += ch.len_utf8();
                    self.error(
                        DiagnosticCode::IllegalChar,
                        format!("illegal character `{ch}`"),
                        start,
                        self.pos,
                    );
                }
            }
        }
    }

    fn follows_predicate_keyword(&self) -> bool {
        let n = self.tokens.len();
        n >= 2
            && matches!(
                self.tokens[n - 2].kind,
                TokenKind::Keyword(Keyword::Where) | TokenKind::Keyword(Keyword::When)
            )
    }

    fn scan_ident(&mut self) -> usize {
        while self.peek(0).is_some_and(is_ident_continue) {
            self.pos += 1;
        }
        self.pos
    }

    fn word(&mut self) {
        let start = self.pos;
        let end = self.scan_ident();
        let word = &self.src[start..end];

        if word.eq_ignore_ascii_case("sql") && self.peek(0) == Some(b':') {
            self.pos += 1;
            self.push(TokenKind::Keyword(Keyword::Sql), start, self.pos);
            self.sql_expression(start);
            return;
        }

        if self.peek(0) == Some(b'.') && self.peek(1).is_some_and(is_ident_start) {
            self.pos += 1;
            let end = self.scan_ident();
            self.push(TokenKind::QualifiedName, start, end);
            return;
        }

        let kind = match Keyword::from_word(word) {
            Some(kw) => TokenKind::Keyword(kw),
            None => TokenKind::Identifier,
        };
        self.push(kind, start, end);
    }

    fn integer(&mut self, start: usize) {
        while self.peek(0).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        self.push(TokenKind::IntegerLiteral, start, self.pos);
    }

    fn string(&mut self) {
        let start = self.pos;
        match skip_quoted(self.bytes, start) {
            Some(end) => {
                self.pos = end;
                self.push(TokenKind::StringLiteral, start, end);
            }
            None => {
                self.pos = self.bytes.len();
                let line_end = self.src[start..]
                    .find('\n')
                    .map_or(self.bytes.len(), |i| start + i);
                self.error(
                    DiagnosticCode::UnterminatedString,
                    "unterminated string literal".to_string(),
                    start,
                    line_end,
                );
            }
        }
    }

    /// Captures the expression after `SQL:`.
    fn sql_expression(&mut self, keyword_start: usize) {
        self.skip_trivia();
        let start = self.pos;
        let mut depth = 0usize;
        let mut i = start;
        let stop = loop {
            let Some(&b) = self.bytes.get(i) else { break i };
            match b {
                b'\'' | b'"' => match skip_quoted(self.bytes, i) {
                    Some(end) => i = end,
                    None => break self.bytes.len(),
                },
                b'(' => {
                    depth += 1;
                    i += 1;
                }
                b')' if depth == 0 => break i,
                b')' => {
                    depth -= 1;
                    i += 1;
                }
                b';' if depth == 0 => break i,
                b if is_ident_start(b) => {
                    let word_start = i;
                    while self.bytes.get(i).copied().is_some_and(is_ident_continue) {
                        i += 1;
                    }
                    let boundary = word_start == 0 || !is_ident_continue(self.bytes[word_start - 1]);
                    if depth == 0 && boundary && self.src[word_start..i].eq_ignore_ascii_case("to")
                    {
                        break word_start;
                    }
                }
                _ => i += self.src[i..].chars().next().map_or(1, char::len_utf8),
            }
        };
        if depth > 0 {
            self.error(
                DiagnosticCode::UnbalancedParens,
                "unbalanced parentheses in SQL expression".to_string(),
                keyword_start,
                keyword_start + 4,
            );
        }
        let end = start + self.src[start..stop].trim_end().len();
        if end > start {
            self.push(TokenKind::SqlFragment, start, end);
        }
        self.pos = stop;
    }

    /// Captures the body of `WHERE (...)` / `WHEN (...)`; the opening paren
    /// has already been pushed.
    fn predicate(&mut self) {
        let open = self.pos - 1;
        let mut depth = 0usize;
        let mut i = self.pos;
        let close = loop {
            let Some(&b) = self.bytes.get(i) else { break None };
            match b {
                b'\'' | b'"' => match skip_quoted(self.bytes, i) {
                    Some(end) => i = end,
                    None => break None,
                },
                b'(' => {
                    depth += 1;
                    i += 1;
                }
                b')' if depth == 0 => break Some(i),
                b')' => {
                    depth -= 1;
                    i += 1;
                }
                _ => i += self.src[i..].chars().next().map_or(1, char::len_utf8),
            }
        };
        let stop = close.unwrap_or(self.bytes.len());
        let inner = &self.src[self.pos..stop];
        let start = self.pos + (inner.len() - inner.trim_start().len());
        let end = self.pos + inner.trim_end().len();
        if end > start {
            self.push(TokenKind::SqlFragment, start, end);
        }
        match close {
            Some(close) => {
                self.pos = close + 1;
                self.push(TokenKind::Punctuation, close, close + 1);
            }
            None => {
                self.pos = stop;
                self.error(
                    DiagnosticCode::UnbalancedParens,
                    "unclosed `(`".to_string(),
                    open,
                    open + 1,
                );
            }
        }
    }
}

/// Returns the offset just past a quoted run starting at `start`, honouring
/// doubled-quote escapes.
fn skip_quoted(bytes: &[u8], start: usize) -> Option<usize> {
    let quote = bytes[start];
    let mut i = start + 1;
    while i < bytes.len() {
        if bytes[i] == quote {
            if bytes.get(i + 1) == Some(&quote) {
                i += 2;
                continue;
            }
            return Some(i + 1);
        }
        i += 1;
    }
    None
}
