//! Semantic checks of a parsed script against the source and target catalogs.
//!
//! Validation walks the statements in order, because several rules depend on
//! what earlier statements did: aux tables exist only after the statement
//! that saves them, foreign keys can be updated only in populated tables, and
//! nothing may touch a schema after it is dropped.

mod resolved;

use std::collections::{HashMap, HashSet};
use std::fmt::Display;

pub use resolved::*;

use crate::catalog::{ColumnDef, SchemaCatalog, TableDef, TypeFamily};
use crate::diagnostic::{has_errors, Diagnostic, DiagnosticCode as Code};
use crate::dsl::*;
use crate::span::SourceSpan;

pub const DEFAULT_AUX_SCHEMA: &str = "aux";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidateOptions {
    pub aux_schema: String,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            aux_schema: DEFAULT_AUX_SCHEMA.to_string(),
        }
    }
}

/// A column reference bound to a catalog column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnBinding {
    pub table: String,
    pub column: String,
    pub sql_type: String,
}

/// Binds `table.column` directly, and a bare `column` only when exactly one
/// table in scope has it.
pub fn resolve_column(col: &ColumnRef, scope: &[&TableDef]) -> Result<ColumnBinding, Diagnostic> {
    let bind = |t: &TableDef, c: &ColumnDef| ColumnBinding {
        table: t.name.clone(),
        column: c.name.clone(),
        sql_type: c.sql_type.clone(),
    };
    match &col.table {
        Some(name) => {
            let Some(table) = scope.iter().find(|t| name.matches(&t.name)) else {
                return Err(Diagnostic::new(
                    Code::TableNotInScope,
                    format!("table `{name}` is not one of the tables of this statement"),
                    name.span,
                ));
            };
            match table.column(&col.column.text) {
                Some(c) => Ok(bind(table, c)),
                None => Err(Diagnostic::new(
                    Code::UnknownColumn,
                    format!("table `{}` has no column `{}`", table.name, col.column),
                    col.column.span,
                )),
            }
        }
        None => {
            let hits: Vec<_> = scope
                .iter()
                .filter_map(|t| t.column(&col.column.text).map(|c| (*t, c)))
                .collect();
            match hits.as_slice() {
                [(t, c)] => Ok(bind(t, c)),
                [] => Err(Diagnostic::new(
                    Code::UnknownColumn,
                    format!(
                        "no column `{}` in {}",
                        col.column,
                        scope.iter().map(|t| format!("`{}`", t.name)).collect::<Vec<_>>().join(", ")
                    ),
                    col.column.span,
                )),
                _ => Err(Diagnostic::new(
                    Code::AmbiguousColumn,
                    format!(
                        "column `{}` exists in {}; qualify it with a table name",
                        col.column,
                        hits.iter().map(|(t, _)| format!("`{}`", t.name)).collect::<Vec<_>>().join(" and ")
                    ),
                    col.column.span,
                )),
            }
        }
    }
}

/// Validates with the default aux schema name.
pub fn validate(
    script: &MigrationScript,
    source: &SchemaCatalog,
    target: &SchemaCatalog,
) -> Result<ResolvedScript, Vec<Diagnostic>> {
    validate_with(script, source, target, &ValidateOptions::default())
}

/// Runs every check and returns either the resolved script (carrying any
/// warnings) or all diagnostics, warnings included, in statement order.
pub fn validate_with(
    script: &MigrationScript,
    source: &SchemaCatalog,
    target: &SchemaCatalog,
    options: &ValidateOptions,
) -> Result<ResolvedScript, Vec<Diagnostic>> {
    let mut v = Validator {
        source,
        target,
        aux_schema: &options.aux_schema,
        diags: Vec::new(),
        from: None,
        to: None,
        missing_reported: false,
        aux: HashMap::new(),
        filled: HashSet::new(),
        populated: HashSet::new(),
        dropped: HashMap::new(),
        connection_dropped: false,
        created: Vec::new(),
    };
    let mut statements = Vec::with_capacity(script.statements.len());
    for stmt in &script.statements {
        let kind = v.statement(stmt).unwrap_or(ResolvedKind::Declaration);
        statements.push(ResolvedStatement { kind, span: stmt.span });
    }
    let end = script.statements.last().map_or(SourceSpan::start(), |s| s.span);
    if (v.from.is_none() || v.to.is_none()) && !v.missing_reported {
        v.missing_connections(end);
    }
    if !script.statements.iter().any(|s| matches!(s.kind, StatementKind::GenerateScript)) {
        v.err(Code::NoGenerateScript, "the script must end with GENERATE SCRIPT", end);
    }

    if has_errors(&v.diags) {
        return Err(v.diags);
    }
    Ok(ResolvedScript {
        script: script.clone(),
        source: source.clone(),
        target: target.clone(),
        from: v.from.unwrap(),
        to: v.to.unwrap(),
        aux_schema: options.aux_schema.clone(),
        statements,
        warnings: v.diags,
    })
}

struct Validator<'a> {
    source: &'a SchemaCatalog,
    target: &'a SchemaCatalog,
    aux_schema: &'a str,
    diags: Vec<Diagnostic>,
    from: Option<Connection>,
    to: Option<Connection>,
    missing_reported: bool,
    /// Registered aux tables by lower-cased name.
    aux: HashMap<String, AuxTable>,
    /// Aux tables some earlier statement already filled.
    filled: HashSet<String>,
    /// Lower-cased target tables written by earlier statements.
    populated: HashSet<String>,
    /// Lower-cased schema name to the span of the statement that dropped it.
    dropped: HashMap<String, SourceSpan>,
    connection_dropped: bool,
    /// Schemas made by CREATE SCHEMA, lower-cased.
    created: Vec<String>,
}

/// Output column of an INSERT being assembled.
struct OutColumn {
    name: String,
    expr: SelectExpr,
}

impl<'a> Validator<'a> {
    fn err(&mut self, code: Code, message: impl Into<String>, span: SourceSpan) {
        self.diags.push(Diagnostic::new(code, message, span));
    }

    fn push(&mut self, d: Diagnostic) {
        self.diags.push(d);
    }

    fn import_schema(&self) -> String {
        self.from.as_ref().map_or_else(|| "legacy".into(), |c| c.spec.schema.clone())
    }

    fn target_schema(&self) -> String {
        self.to.as_ref().map_or_else(|| "target".into(), |c| c.spec.schema.clone())
    }

    fn missing_connections(&mut self, span: SourceSpan) {
        self.missing_reported = true;
        let missing: Vec<_> = [("FROM", self.from.is_none()), ("TO", self.to.is_none())]
            .into_iter()
            .filter_map(|(d, m)| m.then_some(d))
            .collect();
        self.err(
            Code::MissingConnection,
            format!(
                "CREATE CONNECTION {} must be declared before any data statement",
                missing.join(" and CREATE CONNECTION ")
            ),
            span,
        );
    }

    fn statement(&mut self, stmt: &Statement) -> Option<ResolvedKind> {
        let span = stmt.span;
        let is_data = !matches!(
            stmt.kind,
            StatementKind::CreateProduct(_)
                | StatementKind::CreateConnection(_)
                | StatementKind::GenerateScript
        );
        if is_data && (self.from.is_none() || self.to.is_none()) {
            if self.missing_reported {
                return None;
            }
            self.missing_connections(span);
            return None;
        }
        match &stmt.kind {
            StatementKind::CreateProduct(_) | StatementKind::GenerateScript => Some(match stmt.kind {
                StatementKind::GenerateScript => ResolvedKind::GenerateScript,
                _ => ResolvedKind::Declaration,
            }),
            StatementKind::CreateConnection(spec) => {
                self.connection(spec, span);
                Some(ResolvedKind::Declaration)
            }
            StatementKind::CreateSchema(name) => self.create_schema(name),
            StatementKind::Map(m) => self.map(m, span).map(ResolvedKind::Map),
            StatementKind::MapAllProperties(m) => self.map_all(m, span),
            StatementKind::Attribute(a) => self.attribute(a, span),
            StatementKind::Insert(i) => self.insert(i, span),
            StatementKind::Identify(i) => self.identify(i, span),
            StatementKind::UpdateForeignKey(u) => {
                self.update_foreign_key(u, span).map(ResolvedKind::UpdateForeignKey)
            }
            StatementKind::UpdateForeignTable(u) => self.update_foreign_table(u, span),
            StatementKind::DropConnection => self.drop_connection(span),
            StatementKind::DropSchema(name) => self.drop_schema(name),
        }
    }

    fn connection(&mut self, spec: &ConnectionSpec, span: SourceSpan) {
        let slot = match spec.direction {
            Direction::From => &self.from,
            Direction::To => &self.to,
        };
        if let Some(prev) = slot {
            let msg = format!(
                "CREATE CONNECTION {} is already declared at {}",
                spec.direction, prev.span
            );
            self.err(Code::DuplicateConnection, msg, span);
            return;
        }
        let conn = Some(Connection { spec: spec.clone(), span });
        match spec.direction {
            Direction::From => self.from = conn,
            Direction::To => self.to = conn,
        }
        let mut names = vec![("aux", self.aux_schema.to_string())];
        if let Some(c) = &self.from {
            names.push(("source", c.spec.schema.clone()));
        }
        if let Some(c) = &self.to {
            names.push(("target", c.spec.schema.clone()));
        }
        let mine = spec.schema.as_str();
        let role = match spec.direction {
            Direction::From => "source",
            Direction::To => "target",
        };
        if let Some((other, _)) = names
            .iter()
            .find(|(r, n)| *r != role && n.eq_ignore_ascii_case(mine))
        {
            let msg = format!("schema `{mine}` of the {role} connection is also the {other} schema");
            self.err(Code::SchemaClash, msg, span);
        }
    }

    fn create_schema(&mut self, name: &Name) -> Option<ResolvedKind> {
        if name.matches(&self.import_schema()) || name.matches(self.aux_schema) {
            self.err(
                Code::SchemaClash,
                format!("schema `{name}` is reserved for the migration's temporary data"),
                name.span,
            );
            return None;
        }
        if !self.created.iter().any(|c| name.matches(c)) {
            self.created.push(name.text.to_ascii_lowercase());
        }
        Some(ResolvedKind::CreateSchema(name.text.clone()))
    }

    fn drop_connection(&mut self, span: SourceSpan) -> Option<ResolvedKind> {
        if self.connection_dropped {
            self.err(Code::AlreadyDropped, "the source connection is already dropped", span);
            return None;
        }
        self.connection_dropped = true;
        self.dropped.entry(self.import_schema().to_ascii_lowercase()).or_insert(span);
        Some(ResolvedKind::DropConnection)
    }

    fn drop_schema(&mut self, name: &Name) -> Option<ResolvedKind> {
        if name.matches(&self.target_schema()) {
            self.err(
                Code::DropTargetSchema,
                format!("`{name}` is the target schema; dropping it would discard the migrated data"),
                name.span,
            );
            return None;
        }
        let known = name.matches(&self.import_schema())
            || name.matches(self.aux_schema)
            || self.created.iter().any(|c| name.matches(c));
        if !known {
            self.err(Code::UnknownSchema, format!("no schema `{name}` was created by this script"), name.span);
            return None;
        }
        let key = name.text.to_ascii_lowercase();
        if let Some(prev) = self.dropped.get(&key) {
            let msg = format!("schema `{name}` is already dropped at {prev}");
            self.err(Code::AlreadyDropped, msg, name.span);
            return None;
        }
        self.dropped.insert(key, name.span);
        Some(ResolvedKind::DropSchema(name.text.clone()))
    }

    fn require_schema(&mut self, schema: &str, what: &str, span: SourceSpan) -> bool {
        match self.dropped.get(&schema.to_ascii_lowercase()) {
            Some(at) => {
                let msg = format!("{what} uses schema `{schema}`, which was dropped at {at}");
                self.err(Code::UseAfterDrop, msg, span);
                false
            }
            None => true,
        }
    }

    fn require_legacy(&mut self, what: &str, span: SourceSpan) -> bool {
        let s = self.import_schema();
        self.require_schema(&s, what, span)
    }

    fn require_aux(&mut self, what: &str, span: SourceSpan) -> bool {
        let s = self.aux_schema.to_string();
        self.require_schema(&s, what, span)
    }

    fn source_table(&mut self, name: &Name) -> Option<&'a TableDef> {
        let found = self.source.table(&name.text);
        if found.is_none() {
            self.err(Code::UnknownTable, format!("source schema has no table `{name}`"), name.span);
        }
        found
    }

    fn target_table(&mut self, name: &Name) -> Option<&'a TableDef> {
        let found = self.target.table(&name.text);
        if found.is_none() {
            self.err(Code::UnknownTable, format!("target schema has no table `{name}`"), name.span);
        }
        found
    }

    fn target_column(&mut self, table: &'a TableDef, name: &Name) -> Option<&'a ColumnDef> {
        let found = table.column(&name.text);
        if found.is_none() {
            self.err(
                Code::UnknownColumn,
                format!("target table `{}` has no column `{name}`", table.name),
                name.span,
            );
        }
        found
    }

    fn bind(&mut self, col: &ColumnRef, scope: &[&TableDef]) -> Option<ColumnBinding> {
        match resolve_column(col, scope) {
            Ok(b) => Some(b),
            Err(d) => {
                self.push(d);
                None
            }
        }
    }

    fn check_types(&mut self, from_type: &str, to: &ColumnDef, what: impl Display, span: SourceSpan) {
        if !TypeFamily::of(from_type).compatible_with(to.family()) {
            let msg = format!(
                "{what} of type `{from_type}` is mapped to `{}` of type `{}`",
                to.name, to.sql_type
            );
            self.err(Code::TypeMismatch, msg, span);
        }
    }

    fn check_literal(&mut self, lit: &LiteralExpr, to: &ColumnDef) {
        let family = to.family();
        let bad = match lit.value {
            Literal::String(_) => matches!(
                family,
                TypeFamily::Integer | TypeFamily::Numeric | TypeFamily::Boolean
            ),
            Literal::Integer(_) => matches!(family, TypeFamily::Text | TypeFamily::Temporal),
        };
        if bad {
            let msg = format!(
                "literal {} is mapped to `{}` of type `{}`",
                lit.value.to_sql(),
                to.name,
                to.sql_type
            );
            self.err(Code::TypeMismatch, msg, lit.span);
        }
    }

    /// Records a target column as written, reporting duplicates.
    fn claim(&mut self, seen: &mut Vec<String>, column: &ColumnDef, at: &Name) -> bool {
        if seen.iter().any(|c| c.eq_ignore_ascii_case(&column.name)) {
            self.err(
                Code::DuplicateTarget,
                format!("target column `{}` is written more than once", column.name),
                at.span,
            );
            return false;
        }
        seen.push(column.name.clone());
        true
    }

    fn check_not_null(&mut self, table: &TableDef, written: &[String], span: SourceSpan) {
        let missing: Vec<_> = table
            .columns
            .iter()
            .filter(|c| !c.nullable && !c.has_default())
            .filter(|c| !written.iter().any(|w| w.eq_ignore_ascii_case(&c.name)))
            .map(|c| format!("`{}`", c.name))
            .collect();
        if !missing.is_empty() {
            let msg = format!(
                "NOT NULL column(s) {} of `{}` are not mapped and have no default",
                missing.join(", "),
                table.name
            );
            self.err(Code::UnmappedNotNull, msg, span);
        }
    }

    fn mark_populated(&mut self, table: &TableDef) {
        self.populated.insert(table.name.to_ascii_lowercase());
    }

    fn legacy_expr(&self, b: &ColumnBinding) -> ColumnExpr {
        ColumnExpr {
            schema: self.import_schema(),
            table: b.table.clone(),
            column: b.column.clone(),
            qualified: false,
        }
    }

    fn aux_expr(&self, aux: &AuxTable, column: &str) -> ColumnExpr {
        ColumnExpr {
            schema: self.aux_schema.to_string(),
            table: aux.table.clone(),
            column: column.to_string(),
            qualified: false,
        }
    }

    /// Registers an aux table, or checks that an earlier registration has the
    /// same shape.
    fn register_aux(&mut self, aux: AuxTable, span: SourceSpan) -> bool {
        let key = aux.table.to_ascii_lowercase();
        match self.aux.get(&key) {
            Some(prev) if !same_aux(prev, &aux) => {
                let msg = format!(
                    "aux table `{}` is already defined with columns ({} {}, {} {})",
                    prev.table, prev.value_column, prev.pk_type, prev.alias, prev.alias_type
                );
                self.err(Code::AuxConflict, msg, span);
                false
            }
            _ => {
                self.aux.insert(key, aux);
                true
            }
        }
    }

    fn lookup_aux(&mut self, name: &Name) -> Option<AuxTable> {
        let found = self.aux.get(&name.text.to_ascii_lowercase()).cloned();
        if found.is_none() {
            self.err(
                Code::AuxUndefined,
                format!(
                    "no earlier statement saves key equivalences for `{name}`; add SAVE RELATION or PRIMARY KEY IDENTIFIED WITH to a preceding MAP into `{name}`"
                ),
                name.span,
            );
        }
        found
    }

    /// Checks the aux-side names of a GET clause.
    fn check_get_columns(&mut self, get: &GetClause, aux: &AuxTable) -> bool {
        let mut ok = true;
        if !get.aux_column.matches(&aux.pk_column) {
            let msg = format!(
                "aux table `{}` records keys of column `{}`, not `{}`",
                aux.table, aux.pk_column, get.aux_column
            );
            self.err(Code::AuxColumn, msg, get.aux_column.span);
            ok = false;
        }
        if !get.alias_column.matches(&aux.alias) {
            let msg = format!(
                "aux table `{}` stores the legacy key as `{}`, not `{}`",
                aux.table, aux.alias, get.alias_column
            );
            self.err(Code::AuxColumn, msg, get.alias_column.span);
            ok = false;
        }
        ok
    }

    fn scope_tables(&mut self, names: &[Name]) -> Option<Vec<&'a TableDef>> {
        let mut tables = Vec::new();
        let mut ok = true;
        for (i, name) in names.iter().enumerate() {
            if names[..i].iter().any(|n| n.matches(&name.text)) {
                self.err(
                    Code::DuplicateSource,
                    format!("source table `{name}` is listed more than once"),
                    name.span,
                );
                ok = false;
                continue;
            }
            match self.source_table(name) {
                Some(t) => tables.push(t),
                None => ok = false,
            }
        }
        ok.then_some(tables)
    }

    fn map(&mut self, m: &MapStatement, span: SourceSpan) -> Option<ResolvedMap> {
        let legacy_ok = self.require_legacy("MAP", span);
        let scope = self.scope_tables(&m.sources);
        let target = self.target_table(&m.target);
        let (Some(scope), Some(target)) = (scope, target) else {
            if let Some(t) = target {
                self.mark_populated(t);
                self.register_only(m, t);
            }
            return None;
        };
        let errors_before = self.error_count();
        if !legacy_ok {
            self.mark_populated(target);
            return None;
        }

        let mut seen = Vec::new();
        let mut out = Vec::new();
        let mut joins: Vec<AuxJoin> = Vec::new();
        let mut record = None;

        for item in &m.items {
            match item {
                MapItem::Column { source, target: to } => {
                    let b = self.bind(source, &scope);
                    let c = self.target_column(target, to);
                    if let (Some(b), Some(c)) = (b, c) {
                        if self.claim(&mut seen, c, to) {
                            self.check_types(&b.sql_type, c, format_args!("`{source}`"), source.span());
                            out.push(OutColumn {
                                name: c.name.clone(),
                                expr: SelectExpr::Column(self.legacy_expr(&b)),
                            });
                        }
                    }
                }
                MapItem::Literal { value, target: to } => {
                    if let Some(c) = self.target_column(target, to) {
                        if self.claim(&mut seen, c, to) {
                            self.check_literal(value, c);
                            out.push(OutColumn {
                                name: c.name.clone(),
                                expr: SelectExpr::Literal(value.value.clone()),
                            });
                        }
                    }
                }
                MapItem::Sql { expr, target: to } => {
                    if let Some(c) = self.target_column(target, to) {
                        if self.claim(&mut seen, c, to) {
                            out.push(OutColumn {
                                name: c.name.clone(),
                                expr: SelectExpr::Sql(collapse_whitespace(&expr.text)),
                            });
                        }
                    }
                }
                MapItem::SaveRelation(rel) => {
                    if m.primary_key.is_some() {
                        self.err(
                            Code::AuxConflict,
                            "SAVE RELATION and PRIMARY KEY IDENTIFIED WITH both define the aux table of this MAP",
                            rel.span,
                        );
                        continue;
                    }
                    if let Some((aux, legacy)) = self.save_relation(rel, &scope, target, &m.sources) {
                        out.push(OutColumn {
                            name: aux.alias.clone(),
                            expr: SelectExpr::Column(legacy),
                        });
                        let repeat = self.filled.contains(&aux.table.to_ascii_lowercase());
                        record = Some(AuxRecord::Saved { aux, repeat });
                    }
                }
            }
        }

        if let Some(pk) = &m.primary_key {
            if let Some((column, aux)) = self.primary_key_clause(pk, &scope, target, &mut seen) {
                out.push(column);
                if m.save_relation().is_none() {
                    record = Some(AuxRecord::PrimaryKey { aux });
                }
            }
        }

        for fk in &m.foreign_keys {
            if let Some((column, join)) = self.foreign_key_clause(fk, &scope, target, &mut seen) {
                self.add_join(&mut joins, join, fk.target_table.span);
                out.push(column);
            }
        }

        for get in &m.gets {
            if let Some((column, join)) = self.get_clause(get, &scope, target, &mut seen) {
                self.add_join(&mut joins, join, get.aux_table.span);
                out.push(column);
            }
        }

        let mut updates = Vec::new();
        for u in &m.updates {
            if let Some(c) = self.target_column(target, &u.target_column) {
                let value = match &u.value {
                    UpdateValue::Literal(l) => {
                        self.check_literal(l, c);
                        Some(l.value.to_sql())
                    }
                    UpdateValue::Sql(s) => Some(collapse_whitespace(&s.text)),
                    UpdateValue::Column(n) => self.target_column(target, n).map(|v| {
                        self.check_types(&v.sql_type.clone(), c, format_args!("`{n}`"), n.span);
                        v.name.clone()
                    }),
                };
                if let Some(value) = value {
                    updates.push(NestedUpdate {
                        table: target.name.clone(),
                        column: c.name.clone(),
                        value,
                        condition: collapse_whitespace(&u.condition.text),
                    });
                }
            }
        }

        self.check_not_null(target, &seen, span);
        self.mark_populated(target);
        if let Some(r) = &record {
            self.filled.insert(r.aux().table.to_ascii_lowercase());
        }
        if self.error_count() > errors_before {
            return None;
        }

        let mut insert = InsertSelect {
            target: target.name.clone(),
            columns: out.iter().map(|c| c.name.clone()).collect(),
            exprs: out.into_iter().map(|c| c.expr).collect(),
            sources: scope.iter().map(|t| t.name.clone()).collect(),
            joins,
            predicate: m.predicate.as_ref().map(|p| collapse_whitespace(&p.text)),
            distinct: false,
        };
        qualify(&mut insert, &scope);
        Some(ResolvedMap {
            insert,
            record,
            updates,
        })
    }

    fn error_count(&self) -> usize {
        self.diags.iter().filter(|d| d.is_error()).count()
    }

    /// Keeps aux registrations of a MAP whose tables did not resolve, so later
    /// GET clauses are not reported as well.
    fn register_only(&mut self, m: &MapStatement, target: &TableDef) {
        if let Some(rel) = m.save_relation() {
            if let Some(aux) = saved_aux(rel, target) {
                self.aux.entry(aux.table.to_ascii_lowercase()).or_insert(aux);
            }
        } else if m.primary_key.is_some() {
            if let Some(aux) = primary_key_aux(target) {
                self.aux.entry(aux.table.to_ascii_lowercase()).or_insert(aux);
            }
        }
    }

    fn add_join(&mut self, joins: &mut Vec<AuxJoin>, join: AuxJoin, span: SourceSpan) {
        if joins.iter().any(|j| j.aux.table.eq_ignore_ascii_case(&join.aux.table)) {
            let msg = format!("aux table `{}` is joined more than once in one statement", join.aux.table);
            self.err(Code::DuplicateAuxJoin, msg, span);
        } else {
            joins.push(join);
        }
    }

    fn save_relation(
        &mut self,
        rel: &SaveRelation,
        scope: &[&'a TableDef],
        target: &'a TableDef,
        sources: &[Name],
    ) -> Option<(AuxTable, ColumnExpr)> {
        let aux_ok = self.require_aux("SAVE RELATION", rel.span);
        let mut ok = aux_ok;
        let legacy = if sources.iter().any(|s| s.matches(&rel.source_table.text)) {
            let col = ColumnRef::qualified(rel.source_table.clone(), rel.source_column.clone());
            self.bind(&col, scope)
        } else {
            let msg = format!("SAVE RELATION source `{}` is not a source table of this MAP", rel.source_table);
            self.err(Code::RelationScope, msg, rel.source_table.span);
            None
        };
        ok &= legacy.is_some();
        if !rel.target_table.matches(&target.name) {
            let msg = format!("SAVE RELATION must equal a key of the MAP target `{}`", target.name);
            self.err(Code::RelationScope, msg, rel.target_table.span);
            ok = false;
        } else if !is_sole_pk(target, &rel.target_column.text) {
            let msg = format!(
                "`{}` is not the single-column primary key of `{}`",
                rel.target_column, target.name
            );
            self.err(Code::NotPrimaryKey, msg, rel.target_column.span);
            ok = false;
        }
        if target.column(&rel.alias.text).is_some() {
            let msg = format!(
                "alias `{}` is already a column of `{}`; choose another name",
                rel.alias, target.name
            );
            self.err(Code::AliasClash, msg, rel.alias.span);
            ok = false;
        }
        let legacy = legacy?;
        if !TypeFamily::of(&legacy.sql_type).compatible_with(TypeFamily::of(&rel.alias_type)) {
            let msg = format!(
                "`{}.{}` has type `{}` but the alias is declared `{}`",
                legacy.table, legacy.column, legacy.sql_type, rel.alias_type
            );
            self.err(Code::TypeMismatch, msg, rel.alias.span);
        }
        if let Some(pk) = target.column(&rel.target_column.text) {
            if !TypeFamily::of(&pk.sql_type).compatible_with(TypeFamily::of(&rel.target_type)) {
                let msg = format!(
                    "`{}.{}` has type `{}` but is declared `{}`",
                    target.name, pk.name, pk.sql_type, rel.target_type
                );
                self.err(Code::TypeMismatch, msg, rel.target_column.span);
            }
        }
        if !ok {
            return None;
        }
        let aux = saved_aux(rel, target)?;
        self.register_aux(aux.clone(), rel.span).then(|| (aux, self.legacy_expr(&legacy)))
    }

    fn primary_key_clause(
        &mut self,
        pk: &PrimaryKeyClause,
        scope: &[&'a TableDef],
        target: &'a TableDef,
        seen: &mut Vec<String>,
    ) -> Option<(OutColumn, AuxTable)> {
        let aux_ok = self.require_aux("PRIMARY KEY IDENTIFIED WITH", pk.span);
        let legacy = self.bind(&pk.legacy, scope);
        let column = self.target_column(target, &pk.target_column)?;
        if !is_sole_pk(target, &column.name) {
            let msg = format!(
                "`{}` is not the single-column primary key of `{}`",
                column.name, target.name
            );
            self.err(Code::NotPrimaryKey, msg, pk.target_column.span);
            return None;
        }
        let legacy = legacy?;
        if !self.claim(seen, column, &pk.target_column) || !aux_ok {
            return None;
        }
        self.check_types(&legacy.sql_type, column, format_args!("`{}`", pk.legacy), pk.legacy.span());
        let aux = primary_key_aux(target)?;
        if !self.register_aux(aux.clone(), pk.span) {
            return None;
        }
        Some((
            OutColumn {
                name: column.name.clone(),
                expr: SelectExpr::Column(self.legacy_expr(&legacy)),
            },
            aux,
        ))
    }

    fn foreign_key_clause(
        &mut self,
        fk: &ForeignKeyClause,
        scope: &[&'a TableDef],
        target: &'a TableDef,
        seen: &mut Vec<String>,
    ) -> Option<(OutColumn, AuxJoin)> {
        if !self.require_aux("FOREIGN KEY TO", fk.span) {
            return None;
        }
        let legacy = self.bind(&fk.legacy, scope);
        let aux = self.lookup_aux(&fk.target_table)?;
        let defs = target.foreign_keys_to(&aux.table);
        let column = match defs.as_slice() {
            [def] => target.column(&def.columns[0])?,
            [] => {
                let msg = format!("`{}` has no foreign key referencing `{}`", target.name, aux.table);
                self.err(Code::ForeignKeyUndefined, msg, fk.target_table.span);
                return None;
            }
            _ => {
                let msg = format!(
                    "`{}` has several foreign keys referencing `{}`; use GET to name the column",
                    target.name, aux.table
                );
                self.err(Code::ForeignKeyAmbiguous, msg, fk.target_table.span);
                return None;
            }
        };
        let legacy = legacy?;
        let at = Name::new(column.name.clone(), fk.target_table.span);
        if !self.claim(seen, column, &at) {
            return None;
        }
        self.check_types(&aux.pk_type, column, format_args!("key of `{}`", aux.table), fk.span);
        self.check_types(&legacy.sql_type, &alias_def(&aux), format_args!("`{}`", fk.legacy), fk.legacy.span());
        Some(self.lookup_column_pair(column, aux, &legacy))
    }

    fn get_clause(
        &mut self,
        get: &GetClause,
        scope: &[&'a TableDef],
        target: &'a TableDef,
        seen: &mut Vec<String>,
    ) -> Option<(OutColumn, AuxJoin)> {
        if !self.require_aux("GET", get.span) {
            return None;
        }
        let column = self.target_column(target, &get.target_column);
        let aux = self.lookup_aux(&get.aux_table)?;
        let columns_ok = self.check_get_columns(get, &aux);
        let legacy = self.bind(&get.legacy, scope);
        let (column, legacy) = (column?, legacy?);
        if !columns_ok || !self.claim(seen, column, &get.target_column) {
            return None;
        }
        self.check_types(&aux.pk_type, column, format_args!("key of `{}`", aux.table), get.target_column.span);
        self.check_types(&legacy.sql_type, &alias_def(&aux), format_args!("`{}`", get.legacy), get.legacy.span());
        Some(self.lookup_column_pair(column, aux, &legacy))
    }

    fn lookup_column_pair(&self, column: &ColumnDef, aux: AuxTable, legacy: &ColumnBinding) -> (OutColumn, AuxJoin) {
        let out = OutColumn {
            name: column.name.clone(),
            expr: SelectExpr::Column(self.aux_expr(&aux, &aux.value_column)),
        };
        let join = AuxJoin {
            alias: self.aux_expr(&aux, &aux.alias),
            legacy: self.legacy_expr(legacy),
            aux,
        };
        (out, join)
    }

    fn map_all(&mut self, m: &MapAllStatement, span: SourceSpan) -> Option<ResolvedKind> {
        let legacy_ok = self.require_legacy("MAP ALL PROPERTIES", span);
        let source = self.source_table(&m.source);
        let target = self.target_table(&m.target);
        if let Some(t) = target {
            self.mark_populated(t);
        }
        let (source, target) = (source?, target?);
        if !legacy_ok {
            return None;
        }
        let mut ok = true;
        for ex in &m.exclusions {
            if source.column(&ex.text).is_none() && target.column(&ex.text).is_none() {
                let msg = format!("excluded column `{ex}` is in neither `{}` nor `{}`", source.name, target.name);
                self.err(Code::UnknownColumn, msg, ex.span);
                ok = false;
            }
        }
        let mut columns = Vec::new();
        let mut exprs = Vec::new();
        for sc in &source.columns {
            if m.exclusions.iter().any(|e| e.matches(&sc.name)) {
                continue;
            }
            if let Some(tc) = target.column(&sc.name) {
                self.check_types(&sc.sql_type, tc, format_args!("`{}.{}`", source.name, sc.name), m.source.span);
                columns.push(tc.name.clone());
                exprs.push(SelectExpr::Column(ColumnExpr {
                    schema: self.import_schema(),
                    table: source.name.clone(),
                    column: sc.name.clone(),
                    qualified: false,
                }));
            }
        }
        if columns.is_empty() {
            let msg = format!("`{}` and `{}` share no column names to map", source.name, target.name);
            self.err(Code::EmptyMapping, msg, span);
            return None;
        }
        self.check_not_null(target, &columns, span);
        ok.then(|| {
            ResolvedKind::MapAll(ResolvedMap {
                insert: InsertSelect {
                    target: target.name.clone(),
                    columns,
                    exprs,
                    sources: vec![source.name.clone()],
                    joins: Vec::new(),
                    predicate: None,
                    distinct: false,
                },
                record: None,
                updates: Vec::new(),
            })
        })
    }

    fn attribute(&mut self, a: &AttributeStatement, span: SourceSpan) -> Option<ResolvedKind> {
        let legacy_ok = self.require_legacy("ATTRIBUTE", span);
        let source = self.source_table(&a.source_table);
        let target = self.target_table(&a.target_table);
        if let Some(t) = target {
            self.mark_populated(t);
        }
        let (source, target) = (source?, target?);
        let sc = source.column(&a.source_column.text);
        if sc.is_none() {
            let msg = format!("source table `{}` has no column `{}`", source.name, a.source_column);
            self.err(Code::UnknownColumn, msg, a.source_column.span);
        }
        let tc = self.target_column(target, &a.target_column);
        let (sc, tc) = (sc?, tc?);
        let expr = match &a.transform {
            Some(t) => SelectExpr::Sql(collapse_whitespace(&t.text)),
            None => {
                self.check_types(&sc.sql_type, tc, format_args!("`{}.{}`", source.name, sc.name), a.source_column.span);
                SelectExpr::Column(ColumnExpr {
                    schema: self.import_schema(),
                    table: source.name.clone(),
                    column: sc.name.clone(),
                    qualified: false,
                })
            }
        };
        self.check_not_null(target, std::slice::from_ref(&tc.name), span);
        legacy_ok.then(|| {
            ResolvedKind::Attribute(InsertSelect {
                target: target.name.clone(),
                columns: vec![tc.name.clone()],
                exprs: vec![expr],
                sources: vec![source.name.clone()],
                joins: Vec::new(),
                predicate: None,
                distinct: true,
            })
        })
    }

    fn insert(&mut self, i: &InsertStatement, span: SourceSpan) -> Option<ResolvedKind> {
        let target = self.target_table(&i.target)?;
        self.mark_populated(target);
        let errors_before = self.error_count();
        let mut seen = Vec::new();
        let mut columns = Vec::new();
        for name in &i.columns {
            if let Some(c) = self.target_column(target, name) {
                if self.claim(&mut seen, c, name) {
                    columns.push(Some(c));
                    continue;
                }
            }
            columns.push(None);
        }
        let given = match &i.source {
            InsertSource::Values(v) => v.len(),
            InsertSource::Query { values, .. } => values.len(),
        };
        if given != i.columns.len() {
            let msg = format!("{} column(s) but {} value(s)", i.columns.len(), given);
            self.err(Code::InsertArity, msg, span);
            return None;
        }
        self.check_not_null(target, &seen, span);
        let resolved = match &i.source {
            InsertSource::Values(values) => {
                for (lit, c) in values.iter().zip(&columns) {
                    if let Some(c) = c {
                        self.check_literal(lit, c);
                    }
                }
                ResolvedKind::InsertValues {
                    table: target.name.clone(),
                    columns: seen.clone(),
                    values: values.iter().map(|l| l.value.clone()).collect(),
                }
            }
            InsertSource::Query { table, values } => {
                let legacy_ok = self.require_legacy("INSERT INTO ... SELECT", span);
                let source = self.source_table(table)?;
                let mut exprs = Vec::new();
                for (value, c) in values.iter().zip(&columns) {
                    match value {
                        InsertValue::Literal(lit) => {
                            if let Some(c) = c {
                                self.check_literal(lit, c);
                            }
                            exprs.push(SelectExpr::Literal(lit.value.clone()));
                        }
                        InsertValue::Column(name) => match source.column(&name.text) {
                            Some(sc) => {
                                if let Some(c) = c {
                                    self.check_types(&sc.sql_type, c, format_args!("`{}.{}`", source.name, sc.name), name.span);
                                }
                                exprs.push(SelectExpr::Column(ColumnExpr {
                                    schema: self.import_schema(),
                                    table: source.name.clone(),
                                    column: sc.name.clone(),
                                    qualified: false,
                                }));
                            }
                            None => {
                                let msg = format!("source table `{}` has no column `{name}`", source.name);
                                self.err(Code::UnknownColumn, msg, name.span);
                            }
                        },
                    }
                }
                if !legacy_ok {
                    return None;
                }
                ResolvedKind::InsertQuery(InsertSelect {
                    target: target.name.clone(),
                    columns: seen.clone(),
                    exprs,
                    sources: vec![source.name.clone()],
                    joins: Vec::new(),
                    predicate: None,
                    distinct: true,
                })
            }
        };
        (self.error_count() == errors_before).then_some(resolved)
    }

    fn identify(&mut self, i: &IdentifyStatement, span: SourceSpan) -> Option<ResolvedKind> {
        let mut map = MapStatement {
            sources: vec![i.join_table.clone()],
            target: i.target.clone(),
            items: Vec::new(),
            primary_key: None,
            foreign_keys: Vec::new(),
            updates: Vec::new(),
            predicate: None,
            gets: Vec::new(),
        };
        for clause in &i.clauses {
            match clause {
                KeyClause::PrimaryKey(pk) => map.primary_key = Some(pk.clone()),
                KeyClause::ForeignKey(fk) => map.foreign_keys.push(fk.clone()),
            }
        }
        self.map(&map, span).map(ResolvedKind::Identify)
    }

    fn foreign_key_update(&mut self, table: &'a TableDef, get: &GetClause) -> Option<ForeignKeyUpdate> {
        let column = self.target_column(table, &get.target_column);
        let aux = self.lookup_aux(&get.aux_table)?;
        let columns_ok = self.check_get_columns(get, &aux);
        let matched = self.bind(&get.legacy, &[table]);
        let (column, matched) = (column?, matched?);
        if !columns_ok {
            return None;
        }
        self.check_types(&aux.pk_type, column, format_args!("key of `{}`", aux.table), get.target_column.span);
        self.check_types(&matched.sql_type, &alias_def(&aux), format_args!("`{}`", get.legacy), get.legacy.span());
        Some(ForeignKeyUpdate {
            table: table.name.clone(),
            column: column.name.clone(),
            aux,
            match_column: matched.column,
        })
    }

    fn populated_table(&mut self, name: &Name, what: &str) -> Option<&'a TableDef> {
        let table = self.target_table(name)?;
        if !self.populated.contains(&table.name.to_ascii_lowercase()) {
            let msg = format!(
                "{what} needs `{}` to be populated by an earlier MAP, INSERT, ATTRIBUTE or IDENTIFY",
                table.name
            );
            self.err(Code::TableUnpopulated, msg, name.span);
        }
        Some(table)
    }

    fn update_foreign_key(&mut self, u: &UpdateForeignKey, span: SourceSpan) -> Option<ForeignKeyUpdate> {
        if !self.require_aux("UPDATE FOREIGN KEY", span) {
            return None;
        }
        let before = self.error_count();
        let table = self.populated_table(&u.table, "UPDATE FOREIGN KEY")?;
        let update = self.foreign_key_update(table, &u.lookup);
        update.filter(|_| self.error_count() == before)
    }

    fn update_foreign_table(&mut self, u: &UpdateForeignTable, span: SourceSpan) -> Option<ResolvedKind> {
        if !self.require_aux("UPDATE FOREIGN TABLE", span) {
            return None;
        }
        let before = self.error_count();
        let table = self.populated_table(&u.table, "UPDATE FOREIGN TABLE")?;
        let mut ok = self.error_count() == before;
        let mut seen: Vec<String> = Vec::new();
        let mut out = Vec::new();
        for get in &u.lookups {
            if seen.iter().any(|s| get.target_column.matches(s)) {
                let msg = format!("foreign key `{}` is updated more than once", get.target_column);
                self.err(Code::DuplicateTarget, msg, get.target_column.span);
                ok = false;
                continue;
            }
            seen.push(get.target_column.text.clone());
            match self.foreign_key_update(table, get) {
                Some(f) => out.push(f),
                None => ok = false,
            }
        }
        ok.then_some(ResolvedKind::UpdateForeignTable(out))
    }
}

fn same_aux(a: &AuxTable, b: &AuxTable) -> bool {
    let eq = |x: &str, y: &str| x.eq_ignore_ascii_case(y);
    eq(&a.pk_column, &b.pk_column)
        && eq(&a.alias, &b.alias)
        && eq(&a.pk_type, &b.pk_type)
        && eq(&a.alias_type, &b.alias_type)
}

fn is_sole_pk(table: &TableDef, column: &str) -> bool {
    table.primary_key.len() == 1 && table.primary_key[0].eq_ignore_ascii_case(column)
}

fn saved_aux(rel: &SaveRelation, target: &TableDef) -> Option<AuxTable> {
    let pk = target.column(&rel.target_column.text)?;
    Some(AuxTable {
        table: target.name.clone(),
        value_column: format!("{}_{}", target.name, pk.name),
        pk_column: pk.name.clone(),
        pk_type: rel.target_type.clone(),
        alias: rel.alias.text.clone(),
        alias_type: rel.alias_type.clone(),
    })
}

/// Aux table for a key that is copied unchanged: both columns hold the same
/// value, the legacy side under `id_<table>`.
fn primary_key_aux(target: &TableDef) -> Option<AuxTable> {
    let [pk] = target.primary_key.as_slice() else {
        return None;
    };
    let pk = target.column(pk)?;
    let ty = TypeFamily::storage_type(&pk.sql_type);
    Some(AuxTable {
        table: target.name.clone(),
        value_column: format!("{}_{}", target.name, pk.name),
        pk_column: pk.name.clone(),
        pk_type: ty.clone(),
        alias: format!("id_{}", target.name),
        alias_type: ty,
    })
}

/// The aux alias column as a column definition, for type checks.
fn alias_def(aux: &AuxTable) -> ColumnDef {
    ColumnDef::new(aux.alias.clone(), aux.alias_type.clone())
}

/// Marks column references whose bare name is ambiguous in the FROM list.
fn qualify(insert: &mut InsertSelect, scope: &[&TableDef]) {
    let mut counts: HashMap<String, usize> = HashMap::new();
    let names = scope
        .iter()
        .flat_map(|t| t.columns.iter().map(|c| c.name.as_str()))
        .chain(insert.joins.iter().flat_map(|j| [j.aux.value_column.as_str(), j.aux.alias.as_str()]));
    for n in names {
        *counts.entry(n.to_ascii_lowercase()).or_default() += 1;
    }
    let fix = |c: &mut ColumnExpr| c.qualified = counts[&c.column.to_ascii_lowercase()] > 1;
    for e in &mut insert.exprs {
        if let SelectExpr::Column(c) = e {
            fix(c);
        }
    }
    for j in &mut insert.joins {
        fix(&mut j.alias);
        fix(&mut j.legacy);
    }
}

/// Collapses runs of whitespace outside string literals to one space.
pub(crate) fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut pending_space = false;
    for ch in text.trim().chars() {
        if in_string {
            out.push(ch);
            in_string = ch != '\'';
        } else if ch.is_whitespace() {
            pending_space = true;
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(ch);
            in_string = ch == '\'';
        }
    }
    out
}
