//! Reader for the DDL subset used to describe source and target schemas.
//!
//! Accepted: `CREATE TABLE` with column types, `NOT NULL`/`NULL`, `DEFAULT`,
//! `PRIMARY KEY`, `REFERENCES`, `GENERATED ... AS IDENTITY`, and table-level
//! `PRIMARY KEY (...)` / `FOREIGN KEY (...) REFERENCES t (...)` constraints.
//! Everything else is reported as unsupported.

use std::fmt::Write;

use crate::catalog::model::*;
use crate::diagnostic::{Diagnostic, DiagnosticCode};
use crate::span::{LineIndex, SourceSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Word,
    Number,
    Str,
    Punct,
}

#[derive(Debug, Clone)]
struct Tok {
    kind: Kind,
    text: String,
    span: SourceSpan,
}

impl Tok {
    fn is_word(&self, w: &str) -> bool {
        self.kind == Kind::Word && self.text.eq_ignore_ascii_case(w)
    }

    fn is_punct(&self, p: &str) -> bool {
        self.kind == Kind::Punct && self.text == p
    }
}

fn lex(src: &str, diags: &mut Vec<Diagnostic>) -> Vec<Tok> {
    let index = LineIndex::new(src);
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        if b.is_ascii_whitespace() {
            i += 1;
        } else if src[i..].starts_with("--") {
            i = src[i..].find('\n').map_or(bytes.len(), |n| i + n);
        } else if src[i..].starts_with("/*") {
            i = src[i + 2..].find("*/").map_or(bytes.len(), |n| i + n + 4);
        } else if b.is_ascii_alphabetic() || b == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push(Tok {
                kind: Kind::Word,
                text: src[start..i].to_string(),
                span: index.span(start, i),
            });
        } else if b == b'"' {
            match src[i + 1..].find('"') {
                Some(n) => {
                    i += n + 2;
                    toks.push(Tok {
                        kind: Kind::Word,
                        text: src[start + 1..i - 1].to_string(),
                        span: index.span(start, i),
                    });
                }
                None => {
                    diags.push(Diagnostic::new(
                        DiagnosticCode::DdlSyntax,
                        "unterminated quoted identifier",
                        index.span(start, start + 1),
                    ));
                    i = bytes.len();
                }
            }
        } else if b.is_ascii_digit() || (b == b'-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            toks.push(Tok {
                kind: Kind::Number,
                text: src[start..i].to_string(),
                span: index.span(start, i),
            });
        } else if b == b'\'' {
            i += 1;
            loop {
                match bytes.get(i) {
                    None => {
                        diags.push(Diagnostic::new(
                            DiagnosticCode::DdlSyntax,
                            "unterminated string literal",
                            index.span(start, start + 1),
                        ));
                        break;
                    }
                    Some(b'\'') if bytes.get(i + 1) == Some(&b'\'') => i += 2,
                    Some(b'\'') => {
                        i += 1;
                        toks.push(Tok {
                            kind: Kind::Str,
                            text: src[start..i].to_string(),
                            span: index.span(start, i),
                        });
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
        } else {
            let len = src[i..].chars().next().unwrap().len_utf8();
            i += len;
            toks.push(Tok {
                kind: Kind::Punct,
                text: src[start..i].to_string(),
                span: index.span(start, i),
            });
        }
    }
    toks
}

type PResult<T> = Result<T, Diagnostic>;

struct FkSite {
    table: usize,
    fk: usize,
    span: SourceSpan,
}

struct DdlParser {
    toks: Vec<Tok>,
    pos: usize,
    end: SourceSpan,
    schema: Option<(String, SourceSpan)>,
    diags: Vec<Diagnostic>,
    tables: Vec<TableDef>,
    fk_sites: Vec<FkSite>,
}

const COLUMN_OPTION_WORDS: &[&str] = &[
    "not", "null", "primary", "references", "generated", "default", "constraint", "unique",
    "check", "collate",
];

const TYPE_CONTINUATIONS: &[&str] = &["precision", "varying", "with", "without", "time", "zone"];

/// Parses DDL text into a catalog, or returns every problem found.
pub fn parse_ddl(text: &str) -> Result<SchemaCatalog, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let toks = lex(text, &mut diags);
    let mut p = DdlParser {
        toks,
        pos: 0,
        end: LineIndex::new(text).end_span(),
        schema: None,
        diags,
        tables: Vec::new(),
        fk_sites: Vec::new(),
    };
    while p.pos < p.toks.len() {
        let start = p.pos;
        if let Err(d) = p.statement() {
            p.diags.push(d);
            p.recover(start);
        }
    }
    p.resolve_foreign_keys();
    if p.diags.is_empty() {
        Ok(SchemaCatalog {
            schema_name: p.schema.map_or_else(|| DEFAULT_SCHEMA.to_string(), |(s, _)| s),
            tables: p.tables,
        })
    } else {
        p.diags.sort_by_key(|d| d.span);
        Err(p.diags)
    }
}

impl DdlParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> SourceSpan {
        self.peek()
            .or(self.toks.last())
            .map_or(self.end, |t| t.span)
    }

    fn unexpected(&self, what: &str) -> Diagnostic {
        let found = self.peek().map_or("end of input".to_string(), |t| format!("`{}`", t.text));
        Diagnostic::new(
            DiagnosticCode::DdlSyntax,
            format!("expected {what}, found {found}"),
            self.here(),
        )
    }

    fn at_word(&self, w: &str) -> bool {
        self.peek().is_some_and(|t| t.is_word(w))
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn eat_word(&mut self, w: &str) -> bool {
        let hit = self.at_word(w);
        self.pos += hit as usize;
        hit
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        let hit = self.at_punct(p);
        self.pos += hit as usize;
        hit
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.eat_word(w) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{}`", w.to_uppercase())))
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Tok> {
        match self.peek() {
            Some(t) if t.kind == Kind::Word => {
                let t = t.clone();
                self.pos += 1;
                Ok(t)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn ident_list(&mut self) -> PResult<Vec<String>> {
        self.expect_punct("(")?;
        let mut out = vec![self.ident("a column name")?.text];
        while self.eat_punct(",") {
            out.push(self.ident("a column name")?.text);
        }
        self.expect_punct(")")?;
        Ok(out)
    }

    fn recover(&mut self, start: usize) {
        if self.pos == start && !self.at_punct(";") {
            self.pos += 1;
        }
        while let Some(t) = self.peek() {
            let semi = t.is_punct(";");
            self.pos += 1;
            if semi {
                break;
            }
        }
    }

    fn unsupported(&self, span: SourceSpan, what: &str) -> Diagnostic {
        Diagnostic::new(
            DiagnosticCode::DdlUnsupported,
            format!("unsupported DDL construct: {what}"),
            span,
        )
    }

    fn statement(&mut self) -> PResult<()> {
        if self.eat_punct(";") {
            return Ok(());
        }
        let span = self.here();
        let first = self.peek().unwrap().text.clone();
        if !self.at_word("create") {
            return Err(self.unsupported(span, &format!("`{first}` statement")));
        }
        self.pos += 1;
        if !self.at_word("table") {
            let what = self.peek().map_or(String::new(), |t| t.text.clone());
            return Err(self.unsupported(span, &format!("`CREATE {what}`")));
        }
        self.pos += 1;
        if self.eat_word("if") {
            self.expect_word("not")?;
            self.expect_word("exists")?;
        }
        let name_tok = self.ident("a table name")?;
        let mut name = name_tok.text.clone();
        if self.eat_punct(".") {
            let table = self.ident("a table name")?;
            self.note_schema(&name, name_tok.span)?;
            name = table.text;
        }
        if self.tables.iter().any(|t| t.name.eq_ignore_ascii_case(&name)) {
            return Err(Diagnostic::new(
                DiagnosticCode::DdlDuplicateTable,
                format!("table `{name}` is defined more than once"),
                name_tok.span,
            ));
        }
        let table_index = self.tables.len();
        let mut table = TableDef::new(name);
        let mut pk_span = None;
        let mut fk_spans = Vec::new();
        self.expect_punct("(")?;
        loop {
            self.table_element(&mut table, &mut pk_span, &mut fk_spans)?;
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        if !self.at_punct(";") {
            let span = self.here();
            return Err(self.unsupported(span, "table options after the column list"));
        }
        self.pos += 1;
        self.finish_table(&mut table, pk_span.unwrap_or(name_tok.span))?;
        for (fk, span) in fk_spans.into_iter().enumerate() {
            self.fk_sites.push(FkSite {
                table: table_index,
                fk,
                span,
            });
        }
        self.tables.push(table);
        Ok(())
    }

    fn note_schema(&mut self, schema: &str, span: SourceSpan) -> PResult<()> {
        match &self.schema {
            Some((s, _)) if !s.eq_ignore_ascii_case(schema) => Err(Diagnostic::new(
                DiagnosticCode::DdlSchemaMismatch,
                format!("table qualified with schema `{schema}` but earlier tables use `{s}`"),
                span,
            )),
            Some(_) => Ok(()),
            None => {
                self.schema = Some((schema.to_string(), span));
                Ok(())
            }
        }
    }

    fn set_primary_key(
        &self,
        table: &mut TableDef,
        pk_span: &mut Option<SourceSpan>,
        columns: Vec<String>,
        span: SourceSpan,
    ) -> PResult<()> {
        if pk_span.is_some() {
            return Err(Diagnostic::new(
                DiagnosticCode::DdlDuplicatePrimaryKey,
                format!("table `{}` declares more than one primary key", table.name),
                span,
            ));
        }
        *pk_span = Some(span);
        table.primary_key = columns;
        Ok(())
    }

    fn references(&mut self) -> PResult<(String, Vec<String>)> {
        let first = self.ident("a referenced table")?;
        let mut table = first.text;
        if self.eat_punct(".") {
            self.note_schema(&table, first.span)?;
            table = self.ident("a referenced table")?.text;
        }
        let columns = if self.at_punct("(") {
            self.ident_list()?
        } else {
            Vec::new()
        };
        Ok((table, columns))
    }

    fn table_element(
        &mut self,
        table: &mut TableDef,
        pk_span: &mut Option<SourceSpan>,
        fk_spans: &mut Vec<SourceSpan>,
    ) -> PResult<()> {
        let span = self.here();
        if self.eat_word("constraint") {
            self.ident("a constraint name")?;
        }
        if self.eat_word("primary") {
            self.expect_word("key")?;
            let cols = self.ident_list()?;
            return self.set_primary_key(table, pk_span, cols, span);
        }
        if self.eat_word("foreign") {
            self.expect_word("key")?;
            let columns = self.ident_list()?;
            self.expect_word("references")?;
            let (referenced_table, referenced_columns) = self.references()?;
            table.foreign_keys.push(ForeignKeyDef {
                columns,
                referenced_table,
                referenced_columns,
            });
            fk_spans.push(span);
            return Ok(());
        }
        for word in ["unique", "check", "exclude"] {
            if self.at_word(word) {
                return Err(self.unsupported(span, &format!("`{}` constraint", word.to_uppercase())));
            }
        }

        let name = self.ident("a column name")?;
        if table.columns.iter().any(|c| c.name.eq_ignore_ascii_case(&name.text)) {
            return Err(Diagnostic::new(
                DiagnosticCode::DdlDuplicateColumn,
                format!("column `{}` is defined more than once in `{}`", name.text, table.name),
                name.span,
            ));
        }
        let mut column = ColumnDef::new(name.text.clone(), self.type_text()?);
        loop {
            let opt_span = self.here();
            if self.eat_word("not") {
                self.expect_word("null")?;
                column.nullable = false;
            } else if self.eat_word("null") {
                column.nullable = true;
            } else if self.eat_word("primary") {
                self.expect_word("key")?;
                self.set_primary_key(table, pk_span, vec![name.text.clone()], opt_span)?;
            } else if self.eat_word("references") {
                let (referenced_table, referenced_columns) = self.references()?;
                table.foreign_keys.push(ForeignKeyDef {
                    columns: vec![name.text.clone()],
                    referenced_table,
                    referenced_columns,
                });
                fk_spans.push(opt_span);
            } else if self.eat_word("generated") {
                if !self.eat_word("always") {
                    self.expect_word("by")?;
                    self.expect_word("default")?;
                }
                self.expect_word("as")?;
                self.expect_word("identity")?;
                column.identity = true;
            } else if self.eat_word("default") {
                column.default = Some(self.default_value()?);
            } else if self.at_punct(",") || self.at_punct(")") {
                break;
            } else {
                let what = self.peek().map_or("end of input".to_string(), |t| format!("column option `{}`", t.text));
                return Err(self.unsupported(opt_span, &what));
            }
        }
        table.columns.push(column);
        Ok(())
    }

    fn type_text(&mut self) -> PResult<String> {
        let first = self.peek();
        if first.is_none_or(|t| {
            t.kind != Kind::Word || COLUMN_OPTION_WORDS.iter().any(|w| t.is_word(w))
        }) {
            return Err(self.unexpected("a column type"));
        }
        let mut text = self.ident("a column type")?.text;
        loop {
            if self.eat_punct("(") {
                let mut args = Vec::new();
                loop {
                    match self.peek() {
                        Some(t) if t.kind == Kind::Number => {
                            args.push(t.text.clone());
                            self.pos += 1;
                        }
                        _ => return Err(self.unexpected("a type argument")),
                    }
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct(")")?;
                write!(text, "({})", args.join(",")).unwrap();
            } else if let Some(word) = TYPE_CONTINUATIONS.iter().find(|w| self.at_word(w)) {
                let _ = word;
                let t = self.ident("a type")?;
                text.push(' ');
                text.push_str(&t.text);
            } else {
                break;
            }
        }
        Ok(text)
    }

    fn default_value(&mut self) -> PResult<String> {
        let tok = match self.peek() {
            Some(t) if t.kind != Kind::Punct => t.clone(),
            _ => return Err(self.unexpected("a default value")),
        };
        self.pos += 1;
        let mut text = tok.text;
        if tok.kind == Kind::Word && self.at_punct("(") {
            self.pos += 1;
            self.expect_punct(")")?;
            text.push_str("()");
        }
        Ok(text)
    }

    fn finish_table(&self, table: &mut TableDef, pk_span: SourceSpan) -> PResult<()> {
        for pk in &table.primary_key {
            if table.column(pk).is_none() {
                return Err(Diagnostic::new(
                    DiagnosticCode::DdlUnknownColumn,
                    format!("primary key column `{pk}` is not a column of `{}`", table.name),
                    pk_span,
                ));
            }
        }
        let pk = table.primary_key.clone();
        for col in table.columns.iter_mut().filter(|c| pk.iter().any(|p| p.eq_ignore_ascii_case(&c.name))) {
            col.nullable = false;
        }
        table.pk_autogenerated = table
            .columns
            .iter()
            .any(|c| table.is_primary_key(&c.name) && (c.identity || c.is_serial()));
        Ok(())
    }

    fn resolve_foreign_keys(&mut self) {
        for site in std::mem::take(&mut self.fk_sites) {
            let fk = self.tables[site.table].foreign_keys[site.fk].clone();
            let owner = &self.tables[site.table];
            if let Some(c) = fk.columns.iter().find(|c| owner.column(c).is_none()) {
                self.diags.push(Diagnostic::new(
                    DiagnosticCode::DdlUnknownColumn,
                    format!("foreign key column `{c}` is not a column of `{}`", owner.name),
                    site.span,
                ));
                continue;
            }
            let mut referenced = fk.referenced_columns.clone();
            if referenced.is_empty() {
                match lookup_table_in(&self.tables, &fk.referenced_table) {
                    Some(t) if !t.primary_key.is_empty() => referenced = t.primary_key.clone(),
                    _ => {
                        self.diags.push(Diagnostic::new(
                            DiagnosticCode::DdlForeignKeyTarget,
                            format!(
                                "cannot infer referenced columns: `{}` is not defined with a primary key",
                                fk.referenced_table
                            ),
                            site.span,
                        ));
                        continue;
                    }
                }
            }
            if referenced.len() != fk.columns.len() {
                self.diags.push(Diagnostic::new(
                    DiagnosticCode::DdlForeignKeyArity,
                    format!(
                        "foreign key has {} column(s) but references {}",
                        fk.columns.len(),
                        referenced.len()
                    ),
                    site.span,
                ));
                continue;
            }
            self.tables[site.table].foreign_keys[site.fk].referenced_columns = referenced;
        }
    }
}

fn lookup_table_in<'a>(tables: &'a [TableDef], name: &str) -> Option<&'a TableDef> {
    tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
}

/// Renders a catalog as DDL accepted by [`parse_ddl`].
pub fn render_ddl(catalog: &SchemaCatalog) -> String {
    let prefix = if catalog.schema_name == DEFAULT_SCHEMA {
        String::new()
    } else {
        format!("{}.", catalog.schema_name)
    };
    let mut out = String::new();
    for table in &catalog.tables {
        let mut lines: Vec<String> = table
            .columns
            .iter()
            .map(|c| {
                let mut line = format!("{} {}", c.name, c.sql_type);
                if c.identity {
                    line.push_str(" GENERATED BY DEFAULT AS IDENTITY");
                }
                if let Some(d) = &c.default {
                    write!(line, " DEFAULT {d}").unwrap();
                }
                if !c.nullable {
                    line.push_str(" NOT NULL");
                }
                line
            })
            .collect();
        if !table.primary_key.is_empty() {
            lines.push(format!("PRIMARY KEY ({})", table.primary_key.join(", ")));
        }
        for fk in &table.foreign_keys {
            lines.push(format!(
                "FOREIGN KEY ({}) REFERENCES {}{} ({})",
                fk.columns.join(", "),
                prefix,
                fk.referenced_table,
                fk.referenced_columns.join(", ")
            ));
        }
        writeln!(out, "CREATE TABLE {prefix}{} (\n  {}\n);", table.name, lines.join(",\n  ")).unwrap();
    }
    out
}
