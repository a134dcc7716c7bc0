//! Source positions.

use std::fmt;

use serde::Serialize;

/// A 1-based line/column position plus a length in characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl SourceSpan {
    pub fn new(line: u32, column: u32, length: u32) -> Self {
        Self {
            line: line.max(1),
            column: column.max(1),
            length: length.max(1),
        }
    }

    /// Span used for diagnostics that have no better anchor (empty input).
    pub fn start() -> Self {
        Self::new(1, 1, 1)
    }
}

impl Default for SourceSpan {
    fn default() -> Self {
        Self::start()
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// Maps byte offsets of a source text to line/column spans.
#[derive(Debug, Clone)]
pub(crate) struct LineIndex<'a> {
    text: &'a str,
    line_starts: Vec<usize>,
}

impl<'a> LineIndex<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        let mut line_starts = vec![0];
        line_starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        Self { text, line_starts }
    }

    /// Span covering `text[start..end]`. Empty ranges get length 1.
    pub(crate) fn span(&self, start: usize, end: usize) -> SourceSpan {
        let line = match self.line_starts.binary_search(&start) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let line_start = self.line_starts[line];
        let column = self.text[line_start..start].chars().count() + 1;
        let length = self.text[start..end.max(start)].chars().count();
        SourceSpan::new(line as u32 + 1, column as u32, length as u32)
    }

    /// Span of the last non-whitespace character, or the start for blank input.
    pub(crate) fn end_span(&self) -> SourceSpan {
        match self.text.char_indices().rev().find(|(_, c)| !c.is_whitespace()) {
            Some((i, c)) => self.span(i, i + c.len_utf8()),
            None => SourceSpan::start(),
        }
    }
}
