//! Typed syntax tree of a migration script.
//!
//! Spans are positional metadata: two trees are equal when they have the same
//! structure and spelling, wherever their nodes came from.

use std::fmt;

use crate::span::SourceSpan;

macro_rules! eq_ignoring_span {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl PartialEq for $ty {
            fn eq(&self, other: &Self) -> bool {
                true $(&& self.$field == other.$field)*
            }
        }
        impl Eq for $ty {}
    };
}

/// An identifier as written in the source.
#[derive(Debug, Clone)]
pub struct Name {
    pub text: String,
    pub span: SourceSpan,
}
eq_ignoring_span!(Name { text });

impl Name {
    pub fn new(text: impl Into<String>, span: SourceSpan) -> Self {
        Self {
            text: text.into(),
            span,
        }
    }

    /// Builds a name with a placeholder span.
    pub fn synthetic(text: impl Into<String>) -> Self {
        Self::new(text, SourceSpan::start())
    }

    pub fn matches(&self, other: &str) -> bool {
        self.text.eq_ignore_ascii_case(other)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// `column` or `table.column`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRef {
    pub table: Option<Name>,
    pub column: Name,
}

impl ColumnRef {
    pub fn bare(column: Name) -> Self {
        Self { table: None, column }
    }

    pub fn qualified(table: Name, column: Name) -> Self {
        Self {
            table: Some(table),
            column,
        }
    }

    pub fn span(&self) -> SourceSpan {
        self.table.as_ref().map_or(self.column.span, |t| t.span)
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.table {
            Some(t) => write!(f, "{}.{}", t, self.column),
            None => write!(f, "{}", self.column),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Literal {
    String(String),
    Integer(i64),
}

impl Literal {
    /// SQL spelling: strings single-quoted with `''` escapes.
    pub fn to_sql(&self) -> String {
        match self {
            Literal::String(s) => format!("'{}'", s.replace('\'', "''")),
            Literal::Integer(i) => i.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LiteralExpr {
    pub value: Literal,
    pub span: SourceSpan,
}
eq_ignoring_span!(LiteralExpr { value });

impl LiteralExpr {
    pub fn new(value: Literal, span: SourceSpan) -> Self {
        Self { value, span }
    }
}

/// Opaque SQL text (`SQL:` expressions and parenthesised predicates).
#[derive(Debug, Clone)]
pub struct SqlText {
    pub text: String,
    pub span: SourceSpan,
}
eq_ignoring_span!(SqlText { text });

impl SqlText {
    pub fn new(text: impl Into<String>, span: SourceSpan) -> Self {
        Self {
            text: text.into(),
            span,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    From,
    To,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::From => "FROM",
            Direction::To => "TO",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionSpec {
    pub direction: Direction,
    pub dbname: String,
    pub host: String,
    pub port: u16,
    pub user: String,
    pub pwd: String,
    pub schema: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapItem {
    /// `source TO target`
    Column { source: ColumnRef, target: Name },
    /// `'literal' TO target`
    Literal { value: LiteralExpr, target: Name },
    /// `SQL: expr TO target`
    Sql { expr: SqlText, target: Name },
    SaveRelation(SaveRelation),
}

impl MapItem {
    /// Target column written by the item; `None` for `SAVE RELATION`.
    pub fn target(&self) -> Option<&Name> {
        match self {
            MapItem::Column { target, .. }
            | MapItem::Literal { target, .. }
            | MapItem::Sql { target, .. } => Some(target),
            MapItem::SaveRelation(_) => None,
        }
    }
}

/// `SAVE RELATION src.pk AS alias type EQUALS tgt.pk type`
#[derive(Debug, Clone)]
pub struct SaveRelation {
    pub source_table: Name,
    pub source_column: Name,
    pub alias: Name,
    pub alias_type: String,
    pub target_table: Name,
    pub target_column: Name,
    pub target_type: String,
    pub span: SourceSpan,
}
eq_ignoring_span!(SaveRelation {
    source_table,
    source_column,
    alias,
    alias_type,
    target_table,
    target_column,
    target_type,
});

/// `GET fk FROM aux_table.pk WHEN alias=legacy`
#[derive(Debug, Clone)]
pub struct GetClause {
    pub target_column: Name,
    pub aux_table: Name,
    pub aux_column: Name,
    pub alias_column: Name,
    pub legacy: ColumnRef,
    pub span: SourceSpan,
}
eq_ignoring_span!(GetClause {
    target_column,
    aux_table,
    aux_column,
    alias_column,
    legacy,
});

/// `PRIMARY KEY IDENTIFIED WITH legacy TO target`
#[derive(Debug, Clone)]
pub struct PrimaryKeyClause {
    pub legacy: ColumnRef,
    pub target_column: Name,
    pub span: SourceSpan,
}
eq_ignoring_span!(PrimaryKeyClause { legacy, target_column });

/// `FOREIGN KEY TO table IDENTIFIED WITH legacy_table.column`
#[derive(Debug, Clone)]
pub struct ForeignKeyClause {
    pub target_table: Name,
    pub legacy: ColumnRef,
    pub span: SourceSpan,
}
eq_ignoring_span!(ForeignKeyClause { target_table, legacy });

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateValue {
    Literal(LiteralExpr),
    Sql(SqlText),
    Column(Name),
}

/// Nested `UPDATE value TO column WHEN (condition)` inside a MAP.
#[derive(Debug, Clone)]
pub struct UpdateClause {
    pub value: UpdateValue,
    pub target_column: Name,
    pub condition: SqlText,
    pub span: SourceSpan,
}
eq_ignoring_span!(UpdateClause {
    value,
    target_column,
    condition,
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyClause {
    PrimaryKey(PrimaryKeyClause),
    ForeignKey(ForeignKeyClause),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapStatement {
    pub sources: Vec<Name>,
    pub target: Name,
    pub items: Vec<MapItem>,
    pub primary_key: Option<PrimaryKeyClause>,
    pub foreign_keys: Vec<ForeignKeyClause>,
    pub updates: Vec<UpdateClause>,
    pub predicate: Option<SqlText>,
    pub gets: Vec<GetClause>,
}

impl MapStatement {
    pub fn save_relation(&self) -> Option<&SaveRelation> {
        self.items.iter().find_map(|item| match item {
            MapItem::SaveRelation(rel) => Some(rel),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapAllStatement {
    pub source: Name,
    pub target: Name,
    pub exclusions: Vec<Name>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeStatement {
    pub source_table: Name,
    pub source_column: Name,
    pub transform: Option<SqlText>,
    pub target_table: Name,
    pub target_column: Name,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InsertValue {
    Literal(LiteralExpr),
    Column(Name),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InsertSource {
    Values(Vec<LiteralExpr>),
    Query { table: Name, values: Vec<InsertValue> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsertStatement {
    pub target: Name,
    pub columns: Vec<Name>,
    pub source: InsertSource,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentifyStatement {
    pub join_table: Name,
    pub target: Name,
    pub clauses: Vec<KeyClause>,
}

/// `UPDATE FOREIGN KEY table.column FROM aux.pk WHEN alias=column`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateForeignKey {
    pub table: Name,
    pub column: Name,
    pub lookup: GetClause,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateForeignTable {
    pub table: Name,
    pub lookups: Vec<GetClause>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatementKind {
    CreateProduct(Name),
    CreateConnection(ConnectionSpec),
    CreateSchema(Name),
    Map(MapStatement),
    MapAllProperties(MapAllStatement),
    Attribute(AttributeStatement),
    Insert(InsertStatement),
    Identify(IdentifyStatement),
    UpdateForeignKey(UpdateForeignKey),
    UpdateForeignTable(UpdateForeignTable),
    DropConnection,
    DropSchema(Name),
    GenerateScript,
}

impl StatementKind {
    /// Leading keywords, for messages.
    pub fn phrase(&self) -> &'static str {
        match self {
            StatementKind::CreateProduct(_) => "CREATE PRODUCT",
            StatementKind::CreateConnection(_) => "CREATE CONNECTION",
            StatementKind::CreateSchema(_) => "CREATE SCHEMA",
            StatementKind::Map(_) => "MAP",
            StatementKind::MapAllProperties(_) => "MAP ALL PROPERTIES",
            StatementKind::Attribute(_) => "ATTRIBUTE",
            StatementKind::Insert(_) => "INSERT INTO",
            StatementKind::Identify(_) => "IDENTIFY",
            StatementKind::UpdateForeignKey(_) => "UPDATE FOREIGN KEY",
            StatementKind::UpdateForeignTable(_) => "UPDATE FOREIGN TABLE",
            StatementKind::DropConnection => "DROP CONNECTION",
            StatementKind::DropSchema(_) => "DROP SCHEMA",
            StatementKind::GenerateScript => "GENERATE SCRIPT",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Statement {
    pub kind: StatementKind,
    /// Span of the statement's first token.
    pub span: SourceSpan,
}
eq_ignoring_span!(Statement { kind });

impl Statement {
    pub fn new(kind: StatementKind, span: SourceSpan) -> Self {
        Self { kind, span }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MigrationScript {
    pub statements: Vec<Statement>,
}
