//! Source locations and diagnostics.

use alloc::string::String;
use core::fmt;

/// Index of a source file in the loader's file table. Single-file entry
/// points use [`FileId::MAIN`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FileId(pub u16);

impl FileId {
    pub const MAIN: FileId = FileId(0);
}

/// A half-open source region; `line` and `col` are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: FileId,
    pub line: u32,
    pub col: u32,
    pub len: u32,
}

impl SourceSpan {
    pub fn new(file: FileId, line: u32, col: u32, len: u32) -> Self {
        SourceSpan { file, line, col, len }
    }

    /// A zero-width span for synthesized nodes (e.g. default weights).
    pub fn synthetic(file: FileId) -> Self {
        SourceSpan { file, line: 1, col: 1, len: 0 }
    }

    /// Covers both spans; assumes `self` starts no later than `other` ends.
    pub fn to(self, other: SourceSpan) -> SourceSpan {
        SourceSpan { len: other.len.max(1), ..self }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => f.write_str("error"),
            Severity::Warning => f.write_str("warning"),
        }
    }
}

/// A parse or check finding, always anchored to a source span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: SourceSpan,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>, span: SourceSpan) -> Self {
        Diagnostic { severity: Severity::Error, message: message.into(), span }
    }

    pub fn warning(message: impl Into<String>, span: SourceSpan) -> Self {
        Diagnostic { severity: Severity::Warning, message: message.into(), span }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.span.line, self.span.col, self.severity, self.message)
    }
}
