//! Diagnostics shared by the lexer, the parsers and the validator.
//!
//! Every diagnostic carries a code from [`DiagnosticCode`]. The registry is
//! closed and append-only: codes are never renamed or reused (see
//! `docs/diagnostics.md`).

use std::fmt;

use serde::Serialize;

use crate::span::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

macro_rules! registry {
    ($($variant:ident => $code:literal, $severity:ident;)*) => {
        /// Registry of stable diagnostic codes (version 1).
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum DiagnosticCode {
            $($variant,)*
        }

        impl DiagnosticCode {
            pub const ALL: &'static [DiagnosticCode] = &[$(DiagnosticCode::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(DiagnosticCode::$variant => $code,)*
                }
            }

            pub fn severity(self) -> Severity {
                match self {
                    $(DiagnosticCode::$variant => Severity::$severity,)*
                }
            }
        }
    };
}

registry! {
    // lexer / DSL parser
    IllegalChar => "E-ILLEGAL-CHAR", Error;
    UnterminatedString => "E-UNTERMINATED-STRING", Error;
    UnbalancedParens => "E-UNBALANCED-PARENS", Error;
    Syntax => "E-SYNTAX", Error;
    IntegerRange => "E-INTEGER-RANGE", Error;
    PortRange => "E-PORT-RANGE", Error;
    ConnectionParam => "E-CONNECTION-PARAM", Error;
    DuplicateProduct => "E-DUPLICATE-PRODUCT", Error;
    DuplicateSaveRelation => "E-DUPLICATE-SAVE-RELATION", Error;
    DuplicatePkClause => "E-DUPLICATE-PK-CLAUSE", Error;
    GenerateNotLast => "E-GENERATE-NOT-LAST", Error;
    // DDL
    DdlSyntax => "E-DDL-SYNTAX", Error;
    DdlUnsupported => "E-DDL-UNSUPPORTED", Error;
    DdlDuplicateTable => "E-DDL-DUPLICATE-TABLE", Error;
    DdlDuplicateColumn => "E-DDL-DUPLICATE-COLUMN", Error;
    DdlUnknownColumn => "E-DDL-UNKNOWN-COLUMN", Error;
    DdlDuplicatePrimaryKey => "E-DDL-DUPLICATE-PK", Error;
    DdlForeignKeyArity => "E-DDL-FK-ARITY", Error;
    DdlForeignKeyTarget => "E-DDL-FK-TARGET", Error;
    DdlSchemaMismatch => "E-DDL-SCHEMA-MISMATCH", Error;
    // validator
    MissingConnection => "E-MISSING-CONNECTION", Error;
    DuplicateConnection => "E-DUPLICATE-CONNECTION", Error;
    SchemaClash => "E-SCHEMA-CLASH", Error;
    UnknownTable => "E-UNKNOWN-TABLE", Error;
    UnknownColumn => "E-UNKNOWN-COLUMN", Error;
    AmbiguousColumn => "E-AMBIGUOUS-COLUMN", Error;
    TableNotInScope => "E-TABLE-NOT-IN-SCOPE", Error;
    DuplicateTarget => "E-DUPLICATE-TARGET", Error;
    DuplicateSource => "E-DUPLICATE-SOURCE", Error;
    UnmappedNotNull => "W-UNMAPPED-NOT-NULL", Warning;
    TypeMismatch => "W-TYPE-MISMATCH", Warning;
    AuxUndefined => "E-AUX-UNDEFINED", Error;
    AuxColumn => "E-AUX-COLUMN", Error;
    AuxConflict => "E-AUX-CONFLICT", Error;
    DuplicateAuxJoin => "E-DUPLICATE-AUX-JOIN", Error;
    AliasClash => "E-ALIAS-CLASH", Error;
    RelationScope => "E-RELATION-SCOPE", Error;
    NotPrimaryKey => "E-NOT-PRIMARY-KEY", Error;
    ForeignKeyUndefined => "E-FK-UNDEFINED", Error;
    ForeignKeyAmbiguous => "E-FK-AMBIGUOUS", Error;
    TableUnpopulated => "E-TABLE-UNPOPULATED", Error;
    InsertArity => "E-INSERT-ARITY", Error;
    EmptyMapping => "E-EMPTY-MAPPING", Error;
    UseAfterDrop => "E-USE-AFTER-DROP", Error;
    AlreadyDropped => "E-ALREADY-DROPPED", Error;
    UnknownSchema => "E-UNKNOWN-SCHEMA", Error;
    DropTargetSchema => "E-DROP-TARGET-SCHEMA", Error;
    NoGenerateScript => "E-NO-GENERATE-SCRIPT", Error;
    // driver
    Io => "E-IO", Error;
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for DiagnosticCode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    pub message: String,
    pub span: SourceSpan,
}

impl Diagnostic {
    /// Creates a diagnostic with the registry's severity for `code`.
    pub fn new(code: DiagnosticCode, message: impl Into<String>, span: SourceSpan) -> Self {
        Self {
            severity: code.severity(),
            code,
            message: message.into(),
            span,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// `file:line:col: severity CODE: message`
    pub fn to_text(&self, file: &str) -> String {
        format!(
            "{}:{}:{}: {} {}: {}",
            file, self.span.line, self.span.column, self.severity, self.code, self.message
        )
    }

    /// One JSON object on a single line.
    pub fn to_record(&self, file: &str) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            file: &'a str,
            line: u32,
            column: u32,
            length: u32,
            severity: Severity,
            code: DiagnosticCode,
            message: &'a str,
        }
        serde_json::to_string(&Record {
            file,
            line: self.span.line,
            column: self.span.column,
            length: self.span.length,
            severity: self.severity,
            code: self.code,
            message: &self.message,
        })
        .expect("diagnostic records always serialize")
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} {}: {}", self.span, self.severity, self.code, self.message)
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(Diagnostic::is_error)
}
