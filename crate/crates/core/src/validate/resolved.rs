//! Statements after name resolution, in the shape the code generator needs.
//!
//! All table and column names use the catalog spelling.

use crate::catalog::SchemaCatalog;
use crate::diagnostic::Diagnostic;
use crate::dsl::{ConnectionSpec, Literal, MigrationScript};
use crate::span::SourceSpan;

/// A primary-key equivalence table in the aux schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxTable {
    /// Named after the target table whose keys it records.
    pub table: String,
    /// `<table>_<pk_column>`, holds the new key.
    pub value_column: String,
    pub pk_column: String,
    pub pk_type: String,
    /// Holds the legacy key.
    pub alias: String,
    pub alias_type: String,
}

/// A column reference inside an INSERT ... SELECT.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnExpr {
    pub schema: String,
    pub table: String,
    pub column: String,
    /// Spell as `schema.table.column` because the bare name is ambiguous in
    /// the FROM list.
    pub qualified: bool,
}

impl ColumnExpr {
    pub fn to_sql(&self) -> String {
        if self.qualified {
            format!("{}.{}.{}", self.schema, self.table, self.column)
        } else {
            self.column.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectExpr {
    Column(ColumnExpr),
    Literal(Literal),
    /// Opaque SQL, emitted verbatim.
    Sql(String),
}

impl SelectExpr {
    pub fn to_sql(&self) -> String {
        match self {
            SelectExpr::Column(c) => c.to_sql(),
            SelectExpr::Literal(l) => l.to_sql(),
            SelectExpr::Sql(s) => s.clone(),
        }
    }
}

/// An aux table joined into a SELECT: `... AND alias = legacy`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxJoin {
    pub aux: AuxTable,
    pub alias: ColumnExpr,
    pub legacy: ColumnExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsertSelect {
    pub target: String,
    pub columns: Vec<String>,
    /// Same length as `columns`.
    pub exprs: Vec<SelectExpr>,
    /// Legacy tables, in FROM order.
    pub sources: Vec<String>,
    pub joins: Vec<AuxJoin>,
    pub predicate: Option<String>,
    pub distinct: bool,
}

/// How a statement fills an aux table after its insert.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuxRecord {
    /// `SAVE RELATION`: the legacy key travels through a temporary column on
    /// the target table.
    Saved {
        aux: AuxTable,
        /// True when an earlier statement already filled this aux table.
        repeat: bool,
    },
    /// `PRIMARY KEY IDENTIFIED WITH`: legacy and new keys are equal.
    PrimaryKey { aux: AuxTable },
}

impl AuxRecord {
    pub fn aux(&self) -> &AuxTable {
        match self {
            AuxRecord::Saved { aux, .. } | AuxRecord::PrimaryKey { aux } => aux,
        }
    }
}

/// Nested `UPDATE ... TO column WHEN (condition)` of a MAP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedUpdate {
    pub table: String,
    pub column: String,
    pub value: String,
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedMap {
    pub insert: InsertSelect,
    pub record: Option<AuxRecord>,
    pub updates: Vec<NestedUpdate>,
}

/// Fills `table.column` from an aux table, matching `alias_column` against
/// `match_column` of the same target row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForeignKeyUpdate {
    pub table: String,
    pub column: String,
    pub aux: AuxTable,
    pub match_column: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolvedKind {
    /// CREATE PRODUCT and CREATE CONNECTION; connections feed the prologue.
    Declaration,
    CreateSchema(String),
    Map(ResolvedMap),
    MapAll(ResolvedMap),
    Attribute(InsertSelect),
    InsertValues {
        table: String,
        columns: Vec<String>,
        values: Vec<Literal>,
    },
    InsertQuery(InsertSelect),
    Identify(ResolvedMap),
    UpdateForeignKey(ForeignKeyUpdate),
    UpdateForeignTable(Vec<ForeignKeyUpdate>),
    DropConnection,
    DropSchema(String),
    GenerateScript,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedStatement {
    pub kind: ResolvedKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connection {
    pub spec: ConnectionSpec,
    pub span: SourceSpan,
}

/// A script that passed validation, ready for code generation.
#[derive(Debug, Clone)]
pub struct ResolvedScript {
    pub script: MigrationScript,
    pub source: SchemaCatalog,
    pub target: SchemaCatalog,
    pub from: Connection,
    pub to: Connection,
    pub aux_schema: String,
    /// One per script statement, same order.
    pub statements: Vec<ResolvedStatement>,
    pub warnings: Vec<Diagnostic>,
}

impl ResolvedScript {
    /// Name of the local schema the legacy tables are imported into.
    pub fn import_schema(&self) -> &str {
        &self.from.spec.schema
    }

    pub fn target_schema(&self) -> &str {
        &self.to.spec.schema
    }
}
