//! Emission of the PostgreSQL migration script from a validated script.
//!
//! The output has three parts. The prologue attaches the legacy database
//! through postgres_fdw and creates the working schemas. The body holds one
//! group of statements per DSL statement. The epilogue drops whatever the
//! prologue created that the script did not drop itself.

mod dialect;

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

pub use dialect::{Dialect, Postgres};

use crate::dsl::ConnectionSpec;
use crate::span::SourceSpan;
use crate::validate::*;

/// Environment variable named in place of the password under
/// [`Credentials::Placeholder`] by default.
pub const PASSWORD_PLACEHOLDER: &str = "DAMI_SOURCE_PASSWORD";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Credentials {
    /// Copy the password from the script.
    #[default]
    Inline,
    /// Write `${NAME}` instead, for substitution at deployment.
    Placeholder(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EmitOptions {
    pub credentials: Credentials,
}

impl EmitOptions {
    pub fn redacted() -> Self {
        Self {
            credentials: Credentials::Placeholder(PASSWORD_PLACEHOLDER.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Prologue,
    Body,
    Epilogue,
}

/// One SQL statement and the DSL statement it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub sql: String,
    pub origin: SourceSpan,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GeneratedScript {
    pub fragments: Vec<Fragment>,
}

impl GeneratedScript {
    /// The script text: one statement per fragment, with a blank line
    /// wherever the originating DSL statement changes.
    pub fn to_sql(&self) -> String {
        let mut out = String::new();
        let mut last = None;
        for f in &self.fragments {
            if last.is_some_and(|l| l != (f.origin, f.phase)) {
                out.push('\n');
            }
            out.push_str(&f.sql);
            out.push('\n');
            last = Some((f.origin, f.phase));
        }
        out
    }

    /// Sidecar lines `<statement index> <file>:<line>:<col>`, 1-based.
    pub fn provenance(&self, file: &str) -> String {
        let mut out = String::new();
        for (i, f) in self.fragments.iter().enumerate() {
            writeln!(out, "{} {file}:{}:{}", i + 1, f.origin.line, f.origin.column).unwrap();
        }
        out
    }

    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &Fragment> {
        self.fragments.iter().filter(move |f| f.phase == phase)
    }
}

/// State threaded through emission.
#[derive(Debug, Clone)]
pub struct EmitContext {
    pub source: ConnectionSpec,
    pub target: ConnectionSpec,
    pub aux_schema: String,
    pub import_schema: String,
    /// Aux tables created so far, by lower-cased name.
    pub registered: BTreeMap<String, AuxTable>,
    pub options: EmitOptions,
    import_dropped: bool,
    aux_dropped: bool,
    connection_dropped: bool,
}

impl EmitContext {
    pub fn new(source: ConnectionSpec, target: ConnectionSpec, aux_schema: &str, options: EmitOptions) -> Self {
        Self {
            import_schema: source.schema.clone(),
            source,
            target,
            aux_schema: aux_schema.to_string(),
            registered: BTreeMap::new(),
            options,
            import_dropped: false,
            aux_dropped: false,
            connection_dropped: false,
        }
    }

    fn from_script(script: &ResolvedScript, options: &EmitOptions) -> Self {
        Self::new(script.from.spec.clone(), script.to.spec.clone(), &script.aux_schema, options.clone())
    }

    pub fn server(&self) -> String {
        format!("{}_database_server", self.source.dbname)
    }

    fn target_table(&self, table: &str) -> String {
        format!("{}.{table}", self.target.schema)
    }

    fn password(&self) -> String {
        match &self.options.credentials {
            Credentials::Inline => self.source.pwd.clone(),
            Credentials::Placeholder(var) => format!("${{{var}}}"),
        }
    }
}

struct Out {
    fragments: Vec<Fragment>,
    origin: SourceSpan,
    phase: Phase,
}

impl Out {
    fn new(origin: SourceSpan, phase: Phase) -> Self {
        Self {
            fragments: Vec::new(),
            origin,
            phase,
        }
    }

    fn push(&mut self, sql: String) {
        debug_assert!(sql.ends_with(';'), "{sql}");
        self.fragments.push(Fragment {
            sql,
            origin: self.origin,
            phase: self.phase,
        });
    }
}

const SQL: Postgres = Postgres;

/// Extension, foreign server, user mapping, imported legacy schema, then the
/// target and aux schemas.
pub fn emit_prologue(ctx: &EmitContext, from: SourceSpan, to: SourceSpan) -> Vec<Fragment> {
    let server = ctx.server();
    let mut out = Out::new(from, Phase::Prologue);
    out.push(SQL.create_extension());
    out.push(SQL.create_server(&server, &ctx.source.host, &ctx.source.dbname, ctx.source.port));
    out.push(SQL.create_user_mapping(&server, &ctx.source.user, &ctx.password()));
    out.push(SQL.create_schema(&ctx.import_schema));
    out.push(SQL.import_foreign_schema(&ctx.source.schema, &server, &ctx.import_schema));
    out.origin = to;
    out.push(SQL.create_schema_if_missing(&ctx.target.schema, &ctx.target.user));
    out.push(SQL.create_schema_if_missing(&ctx.aux_schema, &ctx.target.user));
    out.fragments
}

/// MAP with `SAVE RELATION`: add the alias column, create the aux table,
/// insert, record the key pairs, drop the alias column. Without aux
/// bookkeeping only the insert remains.
pub fn emit_map(ctx: &mut EmitContext, map: &ResolvedMap, origin: SourceSpan) -> Vec<Fragment> {
    let mut out = Out::new(origin, Phase::Body);
    let target = ctx.target_table(&map.insert.target);
    for j in &map.insert.joins {
        assert!(
            ctx.registered.contains_key(&j.aux.table.to_ascii_lowercase()),
            "aux table {} used before it was created",
            j.aux.table
        );
    }
    match &map.record {
        Some(AuxRecord::Saved { aux, .. }) => {
            out.push(SQL.add_column(&target, &aux.alias, &aux.alias_type));
            out.push(SQL.create_aux_table(&ctx.aux_schema, aux));
        }
        Some(AuxRecord::PrimaryKey { aux }) => out.push(SQL.create_aux_table(&ctx.aux_schema, aux)),
        None => {}
    }
    out.push(SQL.insert_select(&target, &ctx.import_schema, &ctx.aux_schema, &map.insert));
    for u in &map.updates {
        out.push(SQL.update(&ctx.target_table(&u.table), &u.column, &u.value, &u.condition));
    }
    match &map.record {
        Some(AuxRecord::Saved { aux, repeat }) => {
            // Rows from earlier statements have a NULL alias after the column
            // was dropped and added again.
            let filter = repeat.then(|| format!("{} IS NOT NULL", aux.alias));
            out.push(SQL.record_aux(&ctx.aux_schema, aux, &target, &aux.pk_column, &aux.alias, filter.as_deref()));
            out.push(SQL.drop_column(&target, &aux.alias));
        }
        Some(AuxRecord::PrimaryKey { aux }) => {
            let filter = format!(
                "{} NOT IN (SELECT {} FROM {}.{})",
                aux.pk_column, aux.value_column, ctx.aux_schema, aux.table
            );
            out.push(SQL.record_aux(&ctx.aux_schema, aux, &target, &aux.pk_column, &aux.pk_column, Some(&filter)));
        }
        None => {}
    }
    if let Some(r) = &map.record {
        ctx.registered.insert(r.aux().table.to_ascii_lowercase(), r.aux().clone());
    }
    out.fragments
}

/// MAP ALL PROPERTIES, already expanded to column mappings.
pub fn emit_map_all(ctx: &mut EmitContext, map: &ResolvedMap, origin: SourceSpan) -> Vec<Fragment> {
    emit_map(ctx, map, origin)
}

/// IDENTIFY: one insert from the join table, with key lookups through aux
/// tables.
pub fn emit_identify(ctx: &mut EmitContext, map: &ResolvedMap, origin: SourceSpan) -> Vec<Fragment> {
    emit_map(ctx, map, origin)
}

/// ATTRIBUTE: distinct values of one legacy column.
pub fn emit_attribute(ctx: &EmitContext, insert: &InsertSelect, origin: SourceSpan) -> Vec<Fragment> {
    let mut out = Out::new(origin, Phase::Body);
    out.push(SQL.insert_select(&ctx.target_table(&insert.target), &ctx.import_schema, &ctx.aux_schema, insert));
    out.fragments
}

/// INSERT INTO ... VALUES.
pub fn emit_insert_values(
    ctx: &EmitContext,
    table: &str,
    columns: &[String],
    values: &[crate::dsl::Literal],
    origin: SourceSpan,
) -> Vec<Fragment> {
    let mut out = Out::new(origin, Phase::Body);
    let values: Vec<_> = values.iter().map(|v| v.to_sql()).collect();
    out.push(SQL.insert_values(&ctx.target_table(table), columns, &values));
    out.fragments
}

/// INSERT INTO ... SELECT DISTINCT from one legacy table.
pub fn emit_insert_query(ctx: &EmitContext, insert: &InsertSelect, origin: SourceSpan) -> Vec<Fragment> {
    emit_attribute(ctx, insert, origin)
}

/// UPDATE FOREIGN KEY: fill the key from the aux table, then fail if any
/// row found no match.
pub fn emit_update_fk(ctx: &EmitContext, update: &ForeignKeyUpdate, origin: SourceSpan) -> Vec<Fragment> {
    let mut out = Out::new(origin, Phase::Body);
    push_fk_update(ctx, &mut out, update);
    out.fragments
}

/// UPDATE FOREIGN TABLE: the UPDATE FOREIGN KEY pattern for each lookup.
pub fn emit_update_ftable(ctx: &EmitContext, updates: &[ForeignKeyUpdate], origin: SourceSpan) -> Vec<Fragment> {
    let mut out = Out::new(origin, Phase::Body);
    for u in updates {
        push_fk_update(ctx, &mut out, u);
    }
    out.fragments
}

fn push_fk_update(ctx: &EmitContext, out: &mut Out, u: &ForeignKeyUpdate) {
    assert!(
        ctx.registered.contains_key(&u.aux.table.to_ascii_lowercase()),
        "aux table {} used before it was created",
        u.aux.table
    );
    let table = ctx.target_table(&u.table);
    out.push(SQL.update_from_aux(&table, &u.column, &ctx.aux_schema, &u.aux, &u.match_column));
    let message = format!(
        "foreign key {}.{} has rows without a match in {}.{}",
        u.table, u.column, ctx.aux_schema, u.aux.table
    );
    out.push(SQL.null_guard(&table, &u.column, &message));
}

fn emit_drop_connection(ctx: &mut EmitContext, origin: SourceSpan) -> Vec<Fragment> {
    let mut out = Out::new(origin, Phase::Body);
    if !ctx.import_dropped {
        out.push(SQL.drop_schema(&ctx.import_schema));
        ctx.import_dropped = true;
    }
    out.push(SQL.drop_user_mapping(&ctx.server()));
    out.push(SQL.drop_server(&ctx.server()));
    ctx.connection_dropped = true;
    out.fragments
}

fn emit_drop_schema(ctx: &mut EmitContext, schema: &str, origin: SourceSpan) -> Vec<Fragment> {
    if schema.eq_ignore_ascii_case(&ctx.import_schema) {
        ctx.import_dropped = true;
    }
    if schema.eq_ignore_ascii_case(&ctx.aux_schema) {
        ctx.aux_dropped = true;
    }
    let mut out = Out::new(origin, Phase::Body);
    out.push(SQL.drop_schema(schema));
    out.fragments
}

/// Drops, in reverse creation order, the resources the script has not
/// already dropped. The target schema stays.
pub fn emit_epilogue(ctx: &EmitContext, origin: SourceSpan) -> Vec<Fragment> {
    let mut out = Out::new(origin, Phase::Epilogue);
    if !ctx.aux_dropped {
        out.push(SQL.drop_schema(&ctx.aux_schema));
    }
    if !ctx.import_dropped {
        out.push(SQL.drop_schema(&ctx.import_schema));
    }
    if !ctx.connection_dropped {
        out.push(SQL.drop_user_mapping(&ctx.server()));
        out.push(SQL.drop_server(&ctx.server()));
    }
    out.fragments
}

/// Prologue, then each statement's SQL in script order, then the epilogue.
pub fn compile(script: &ResolvedScript, options: &EmitOptions) -> GeneratedScript {
    let mut ctx = EmitContext::from_script(script, options);
    let mut fragments = emit_prologue(&ctx, script.from.span, script.to.span);
    for stmt in &script.statements {
        let span = stmt.span;
        let body = match &stmt.kind {
            ResolvedKind::Declaration => Vec::new(),
            ResolvedKind::CreateSchema(name) => {
                let mut out = Out::new(span, Phase::Body);
                out.push(SQL.create_schema_if_missing(name, &ctx.target.user));
                out.fragments
            }
            ResolvedKind::Map(m) => emit_map(&mut ctx, m, span),
            ResolvedKind::MapAll(m) => emit_map_all(&mut ctx, m, span),
            ResolvedKind::Identify(m) => emit_identify(&mut ctx, m, span),
            ResolvedKind::Attribute(i) => emit_attribute(&ctx, i, span),
            ResolvedKind::InsertValues { table, columns, values } => {
                emit_insert_values(&ctx, table, columns, values, span)
            }
            ResolvedKind::InsertQuery(i) => emit_insert_query(&ctx, i, span),
            ResolvedKind::UpdateForeignKey(u) => emit_update_fk(&ctx, u, span),
            ResolvedKind::UpdateForeignTable(us) => emit_update_ftable(&ctx, us, span),
            ResolvedKind::DropConnection => emit_drop_connection(&mut ctx, span),
            ResolvedKind::DropSchema(name) => emit_drop_schema(&mut ctx, name, span),
            ResolvedKind::GenerateScript => emit_epilogue(&ctx, span),
        };
        fragments.extend(body);
    }
    GeneratedScript { fragments }
}
