//! Shared helpers for the integration tests: fixture loading, a small SQL
//! tokenizer for whitespace-insensitive comparison, structural probes over
//! emitted SQL, a seeded generator of catalogs and valid scripts, and the
//! invariant checks run over the generated corpus.

#![allow(dead_code)]


use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use dami_core::catalog::{lookup_column, lookup_table, parse_ddl, SchemaCatalog};
use dami_core::codegen::{compile, EmitOptions, GeneratedScript, Phase};
use dami_core::dsl::{parse_script, render_script, tokenize, MigrationScript, StatementKind, TokenKind};
use dami_core::validate::{validate, ResolvedScript};
use dami_core::{Diagnostic, DiagnosticCode, SourceSpan};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- fixtures

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(name: &str) -> String {
    let path = fixtures_dir().join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn catalog(text: &str) -> SchemaCatalog {
    parse_ddl(text).unwrap_or_else(|d| panic!("DDL rejected: {d:?}"))
}

/// The legacy and target catalogs of the publications example.
pub fn fig1() -> (SchemaCatalog, SchemaCatalog) {
    (catalog(&fixture("legacy.ddl")), catalog(&fixture("target.ddl")))
}

pub fn resolve(script: &str, source: &SchemaCatalog, target: &SchemaCatalog) -> Result<ResolvedScript, Vec<Diagnostic>> {
    let ast = parse_script(script)?;
    validate(&ast, source, target)
}

pub fn compile_text(script: &str, source: &SchemaCatalog, target: &SchemaCatalog) -> GeneratedScript {
    let resolved = resolve(script, source, target).unwrap_or_else(|d| panic!("script rejected: {d:?}"));
    compile(&resolved, &EmitOptions::default())
}

pub fn compile_fixture(name: &str) -> GeneratedScript {
    let (source, target) = fig1();
    compile_text(&fixture(name), &source, &target)
}

// ---------------------------------------------------------------- SQL probes

/// Splits SQL into tokens: words, quoted strings, and single punctuation
/// characters. Whitespace and `--` comments are dropped.
pub fn sql_tokens(sql: &str) -> Vec<String> {
    let chars: Vec<char> = sql.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '\'' {
            let start = i;
            i += 1;
            while i < chars.len() {
                if chars[i] == '\'' {
                    if chars.get(i + 1) == Some(&'\'') {
                        i += 2;
                        continue;
                    }
                    break;
                }
                i += 1;
            }
            i = (i + 1).min(chars.len());
            out.push(chars[start..i].iter().collect());
        } else if c.is_alphanumeric() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else {
            out.push(c.to_string());
            i += 1;
        }
    }
    out
}

/// First position where two token lists differ, with some context.
pub fn token_difference(a: &[String], b: &[String]) -> Option<String> {
    let at = a.iter().zip(b).position(|(x, y)| x != y).or((a.len() != b.len()).then(|| a.len().min(b.len())))?;
    let lo = at.saturating_sub(5);
    Some(format!(
        "token {at}: generated {:?} vs expected {:?}",
        &a[lo..(at + 5).min(a.len())],
        &b[lo..(at + 5).min(b.len())]
    ))
}

fn is_word(tok: &str) -> bool {
    tok.chars().next().is_some_and(|c| c.is_alphanumeric() || c == '_')
}

fn kw(tok: &str, word: &str) -> bool {
    tok.eq_ignore_ascii_case(word)
}

/// Reads a dotted name starting at `i`; returns the parts and the index
/// after the name.
fn dotted(toks: &[String], mut i: usize) -> (Vec<String>, usize) {
    let mut parts = Vec::new();
    while i < toks.len() && is_word(&toks[i]) {
        parts.push(toks[i].clone());
        i += 1;
        if toks.get(i).map(String::as_str) == Some(".") {
            i += 1;
        } else {
            break;
        }
    }
    (parts, i)
}

/// Counts the comma-separated items at depth 0 in `toks[from..]` up to the
/// first depth-0 token accepted by `stop`. Returns the count and the stop index.
fn count_items(toks: &[String], from: usize, stop: impl Fn(&str) -> bool) -> (usize, usize) {
    let mut depth = 0i32;
    let mut items = 0;
    let mut seen_any = false;
    let mut i = from;
    while i < toks.len() {
        let t = toks[i].as_str();
        if depth == 0 && stop(t) {
            break;
        }
        match t {
            "(" => depth += 1,
            ")" => depth -= 1,
            "," if depth == 0 => {
                items += 1;
                seen_any = false;
                i += 1;
                continue;
            }
            _ => {}
        }
        seen_any = true;
        i += 1;
    }
    (items + usize::from(seen_any), i)
}

/// For an `INSERT INTO t(cols) SELECT|VALUES ...` statement, the number of
/// target columns and the number of produced expressions.
pub fn insert_arity(sql: &str) -> Option<(usize, usize)> {
    let toks = sql_tokens(sql);
    if toks.len() < 3 || !kw(&toks[0], "INSERT") || !kw(&toks[1], "INTO") {
        return None;
    }
    let (_, mut i) = dotted(&toks, 2);
    assert_eq!(toks.get(i).map(String::as_str), Some("("), "INSERT without column list: {sql}");
    let (columns, close) = count_items(&toks, i + 1, |t| t == ")");
    i = close + 1;
    let values = if kw(&toks[i], "SELECT") {
        i += 1;
        if kw(&toks[i], "DISTINCT") {
            i += 1;
        }
        count_items(&toks, i, |t| kw(t, "FROM")).0
    } else if kw(&toks[i], "VALUES") {
        count_items(&toks, i + 2, |t| t == ")").0
    } else {
        panic!("unexpected INSERT source: {sql}");
    };
    Some((columns, values))
}

/// Table references of one statement: the name after INTO, UPDATE, TABLE,
/// and each element of a FROM list. Statements about schemas, servers and
/// user mappings name no tables and yield nothing.
pub fn table_refs(sql: &str) -> Vec<Vec<String>> {
    let toks = sql_tokens(sql);
    let head: Vec<String> = toks.iter().take(3).map(|t| t.to_ascii_uppercase()).collect();
    let head: Vec<&str> = head.iter().map(String::as_str).collect();
    match head.as_slice() {
        ["CREATE", "SCHEMA", ..]
        | ["DROP", "SCHEMA", ..]
        | ["CREATE", "EXTENSION", ..]
        | ["CREATE", "SERVER", ..]
        | ["DROP", "SERVER", ..]
        | ["CREATE", "USER", ..]
        | ["DROP", "USER", ..]
        | ["IMPORT", ..] => return Vec::new(),
        _ => {}
    }
    let mut refs = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        if kw(t, "INTO") || kw(t, "UPDATE") || kw(t, "TABLE") {
            let mut j = i + 1;
            if kw(&toks[j], "IF") {
                j += 3;
            }
            let (name, next) = dotted(&toks, j);
            refs.push(name);
            i = next;
        } else if kw(t, "FROM") {
            let (name, mut next) = dotted(&toks, i + 1);
            refs.push(name);
            while toks.get(next).map(String::as_str) == Some(",") {
                let (name, after) = dotted(&toks, next + 1);
                refs.push(name);
                next = after;
            }
            i = next;
        } else {
            i += 1;
        }
    }
    refs
}

/// Splits a SQL text into statements at top-level semicolons, keeping
/// `$$`-quoted bodies intact.
pub fn split_statements(sql: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_string = false;
    let mut in_dollar = false;
    let mut chars = sql.chars().peekable();
    while let Some(c) = chars.next() {
        cur.push(c);
        match c {
            '\'' if !in_dollar => in_string = !in_string,
            '$' if !in_string && chars.peek() == Some(&'$') => {
                cur.push(chars.next().unwrap());
                in_dollar = !in_dollar;
            }
            ';' if !in_string && !in_dollar => {
                out.push(cur.trim().to_string());
                cur.clear();
            }
            _ => {}
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

// ---------------------------------------------------------------- generator

const SOURCE_TYPES: &[&str] = &["int", "bigint", "varchar(40)", "text", "date", "numeric(8,2)", "boolean"];
const TARGET_TYPES: &[&str] = &["int", "varchar(60)", "text", "date", "numeric(10,2)", "smallint"];
const SHARED: &[(&str, &str)] = &[("label", "varchar(30)"), ("note", "text")];
const IMPORT_SCHEMAS: &[&str] = &["legacy", "old", "src", "lgc"];
const TARGET_SCHEMAS: &[&str] = &["target", "new", "dst", "tgt"];
const EXTRA_SCHEMAS: &[&str] = &["staging", "scratch"];

#[derive(Debug, Clone)]
pub struct GenColumn {
    pub name: String,
    pub sql_type: String,
    pub not_null: bool,
}

#[derive(Debug, Clone)]
pub struct GenSource {
    pub name: String,
    pub id: String,
    pub columns: Vec<GenColumn>,
}

#[derive(Debug, Clone)]
pub struct GenTarget {
    pub name: String,
    pub pk: String,
    pub pk_type: String,
    /// Columns other than the primary key and foreign keys.
    pub columns: Vec<GenColumn>,
    /// Foreign key column and index of the referenced target table.
    pub fks: Vec<(String, usize)>,
}

impl GenTarget {
    fn alias(&self) -> String {
        format!("id_{}", self.name)
    }
}

/// A generated catalog pair and a script that validates against it.
#[derive(Debug, Clone)]
pub struct FuzzCase {
    pub seed: u64,
    pub sources: Vec<GenSource>,
    pub targets: Vec<GenTarget>,
    pub source_ddl: String,
    pub target_ddl: String,
    pub statements: Vec<String>,
    /// `(first, user)`: statement `user` reads the aux table that statement
    /// `first` registers, and nothing earlier registers it.
    pub dependencies: Vec<(usize, usize)>,
    pub import_schema: String,
    pub target_schema: String,
}

impl FuzzCase {
    pub fn script(&self) -> String {
        self.statements.join("\n")
    }

    pub fn catalogs(&self) -> (SchemaCatalog, SchemaCatalog) {
        (catalog(&self.source_ddl), catalog(&self.target_ddl))
    }

    /// The script with statement `user` moved to just before `first`.
    pub fn hoisted(&self, first: usize, user: usize) -> String {
        let mut stmts = self.statements.clone();
        let moved = stmts.remove(user);
        stmts.insert(first, moved);
        stmts.join("\n")
    }
}

struct Gen {
    rng: ChaCha8Rng,
    keyword_case: u8,
}

impl Gen {
    fn kw(&mut self, word: &str) -> String {
        match self.keyword_case {
            0 => word.to_ascii_uppercase(),
            1 => word.to_ascii_lowercase(),
            _ => word
                .chars()
                .map(|c| if self.rng.gen_bool(0.5) { c.to_ascii_uppercase() } else { c.to_ascii_lowercase() })
                .collect(),
        }
    }

    /// One of the separators between tokens.
    fn sep(&mut self) -> &'static str {
        [" ", " ", " ", "\n  ", "  "].choose(&mut self.rng).unwrap()
    }

    fn literal_for(&mut self, sql_type: &str) -> String {
        let t = sql_type.to_ascii_lowercase();
        if t.starts_with("int") || t.starts_with("bigint") || t.starts_with("smallint") || t.starts_with("numeric") {
            self.rng.gen_range(-50..500).to_string()
        } else if t == "date" {
            format!("'2021-0{}-1{}'", self.rng.gen_range(1..10), self.rng.gen_range(0..10))
        } else if t == "boolean" {
            "'true'".to_string()
        } else {
            let words = ["alpha", "it''s", "x y", "LEGACY", "ñandú", ""];
            format!("'{}'", words.choose(&mut self.rng).unwrap())
        }
    }
}

fn is_integer(sql_type: &str) -> bool {
    let t = sql_type.to_ascii_lowercase();
    t.starts_with("int") || t.starts_with("bigint") || t.starts_with("smallint") || t.starts_with("serial")
}

/// Builds one case from `seed`. The same seed always yields the same case.
pub fn fuzz_case(seed: u64) -> FuzzCase {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        keyword_case: 0,
    };
    g.keyword_case = g.rng.gen_range(0..3);

    let sources = gen_sources(&mut g);
    let targets = gen_targets(&mut g);
    let source_ddl = source_ddl(&sources);
    let target_ddl = target_ddl(&targets);
    let import_schema = IMPORT_SCHEMAS.choose(&mut g.rng).unwrap().to_string();
    let target_schema = TARGET_SCHEMAS.choose(&mut g.rng).unwrap().to_string();

    let mut b = ScriptBuilder {
        statements: Vec::new(),
        dependencies: Vec::new(),
        registered: BTreeMap::new(),
        populated: BTreeSet::new(),
        created: Vec::new(),
        retired: Vec::new(),
    };
    if g.rng.gen_bool(0.5) {
        let s = format!("{} {} p{};", g.kw("CREATE"), g.kw("PRODUCT"), seed % 100);
        b.statements.push(s);
    }
    for (dir, schema) in [("FROM", &import_schema), ("TO", &target_schema)] {
        let s = connection(&mut g, dir, schema);
        b.statements.push(s);
    }

    let count = g.rng.gen_range(3..12);
    for _ in 0..count {
        b.step(&mut g, &sources, &targets);
    }
    // Make sure the order-sensitivity property has something to permute in
    // most cases.
    if b.dependencies.is_empty() {
        b.force_dependency(&mut g, &sources, &targets);
    }
    b.finish(&mut g, &import_schema);

    FuzzCase {
        seed,
        sources,
        targets,
        source_ddl,
        target_ddl,
        statements: b.statements,
        dependencies: b.dependencies,
        import_schema,
        target_schema,
    }
}

fn gen_sources(g: &mut Gen) -> Vec<GenSource> {
    let n = g.rng.gen_range(2..5);
    (0..n)
        .map(|i| {
            let name = format!("s{i}");
            let id = format!("s{i}_id");
            let mut columns: Vec<GenColumn> = (0..g.rng.gen_range(1..5))
                .map(|j| GenColumn {
                    name: format!("s{i}_c{j}"),
                    sql_type: SOURCE_TYPES.choose(&mut g.rng).unwrap().to_string(),
                    not_null: g.rng.gen_bool(0.3),
                })
                .collect();
            for (shared, ty) in SHARED {
                if g.rng.gen_bool(0.5) {
                    columns.push(GenColumn {
                        name: shared.to_string(),
                        sql_type: ty.to_string(),
                        not_null: false,
                    });
                }
            }
            GenSource { name, id, columns }
        })
        .collect()
}

fn gen_targets(g: &mut Gen) -> Vec<GenTarget> {
    let n = g.rng.gen_range(2..5);
    let mut out: Vec<GenTarget> = Vec::new();
    for k in 0..n {
        let name = format!("t{k}");
        let (pk, pk_type) = if g.rng.gen_bool(0.6) {
            ("code".to_string(), "serial".to_string())
        } else {
            (format!("t{k}_key"), "int".to_string())
        };
        let mut columns: Vec<GenColumn> = (0..g.rng.gen_range(1..5))
            .map(|j| GenColumn {
                name: format!("t{k}_c{j}"),
                sql_type: TARGET_TYPES.choose(&mut g.rng).unwrap().to_string(),
                not_null: g.rng.gen_bool(0.3),
            })
            .collect();
        for (shared, ty) in SHARED {
            if g.rng.gen_bool(0.5) {
                columns.push(GenColumn {
                    name: shared.to_string(),
                    sql_type: ty.to_string(),
                    not_null: false,
                });
            }
        }
        let fks = (0..k).filter(|_| g.rng.gen_bool(0.6)).map(|m| (format!("t{k}_r{m}"), m)).collect();
        out.push(GenTarget {
            name,
            pk,
            pk_type,
            columns,
            fks,
        });
    }
    out
}

fn source_ddl(sources: &[GenSource]) -> String {
    let mut out = String::new();
    for s in sources {
        out.push_str(&format!("CREATE TABLE {} (\n  {} int PRIMARY KEY", s.name, s.id));
        for c in &s.columns {
            out.push_str(&format!(",\n  {} {}{}", c.name, c.sql_type, if c.not_null { " NOT NULL" } else { "" }));
        }
        out.push_str("\n);\n");
    }
    out
}

fn target_ddl(targets: &[GenTarget]) -> String {
    let mut out = String::new();
    for t in targets {
        out.push_str(&format!("CREATE TABLE {} (\n  {} {} PRIMARY KEY", t.name, t.pk, t.pk_type));
        for c in &t.columns {
            out.push_str(&format!(",\n  {} {}{}", c.name, c.sql_type, if c.not_null { " NOT NULL" } else { "" }));
        }
        for (col, m) in &t.fks {
            let r = &targets[*m];
            out.push_str(&format!(",\n  {col} int REFERENCES {}({})", r.name, r.pk));
        }
        out.push_str("\n);\n");
    }
    out
}

fn connection(g: &mut Gen, dir: &str, schema: &str) -> String {
    let mut params = [format!("{} db_{}", g.kw("dbname"), g.rng.gen_range(0..9)),
        format!("{} {}", g.kw("host"), ["localhost", "chronos", "'db.example.org'"].choose(&mut g.rng).unwrap()),
        format!("{} {}", g.kw("port"), g.rng.gen_range(1..=65535)),
        format!("{} u{}", g.kw("user"), g.rng.gen_range(0..9)),
        format!("{} {}", g.kw("pwd"), ["secret", "'p w'", "'it''s'"].choose(&mut g.rng).unwrap()),
        format!("{} {schema}", g.kw("schema"))];
    params.shuffle(&mut g.rng);
    let sep = g.sep();
    format!("{} {} {dir} ({});", g.kw("CREATE"), g.kw("CONNECTION"), params.join(&format!(",{sep}")))
}

/// Table index, its (foreign key column, referenced table) pairs, and the
/// column to match aliases against.
type Updatable = (usize, Vec<(String, usize)>, String);

struct ScriptBuilder {
    statements: Vec<String>,
    dependencies: Vec<(usize, usize)>,
    /// Target table index to the statement that first registered its aux table.
    registered: BTreeMap<usize, usize>,
    populated: BTreeSet<usize>,
    created: Vec<String>,
    retired: Vec<String>,
}

impl ScriptBuilder {
    fn push(&mut self, stmt: String, uses: &[usize]) {
        let at = self.statements.len();
        for m in uses {
            self.dependencies.push((self.registered[m], at));
        }
        self.statements.push(stmt);
    }

    fn step(&mut self, g: &mut Gen, sources: &[GenSource], targets: &[GenTarget]) {
        match g.rng.gen_range(0..20) {
            0..=7 => self.map(g, sources, targets, None),
            8..=9 => self.insert_values(g, targets),
            10 => self.insert_query(g, sources, targets),
            11 => self.attribute(g, sources, targets),
            12 => self.map_all(g, sources, targets),
            13..=14 => self.identify(g, sources, targets),
            15..=16 => self.update_foreign_key(g, targets),
            17 => self.update_foreign_table(g, targets),
            18 => self.create_schema(g),
            _ => self.drop_schema(g),
        }
    }

    /// Appends a MAP into a table that references an aux table, registering
    /// that aux table first if needed.
    fn force_dependency(&mut self, g: &mut Gen, sources: &[GenSource], targets: &[GenTarget]) {
        let Some(k) = targets.iter().position(|t| !t.fks.is_empty()) else {
            return;
        };
        let m = targets[k].fks[0].1;
        if !self.registered.contains_key(&m) {
            self.map(g, sources, targets, Some((m, true)));
        }
        self.map(g, sources, targets, Some((k, false)));
    }

    fn finish(&mut self, g: &mut Gen, import_schema: &str) {
        match g.rng.gen_range(0..4) {
            0 => self.statements.push(format!("{} {};", g.kw("DROP"), g.kw("CONNECTION"))),
            1 => self.statements.push(format!("{} {} {import_schema};", g.kw("DROP"), g.kw("SCHEMA"))),
            _ => {}
        }
        if g.rng.gen_bool(0.25) {
            self.statements.push(format!("{} {} aux;", g.kw("DROP"), g.kw("SCHEMA")));
        }
        self.statements.push(format!("{} {};", g.kw("GENERATE"), g.kw("SCRIPT")));
    }

    /// A reference to a source column; shared names are always qualified.
    fn column_ref(g: &mut Gen, s: &GenSource, c: &str) -> String {
        if SHARED.iter().any(|(n, _)| *n == c) || g.rng.gen_bool(0.25) {
            format!("{}.{c}", s.name)
        } else {
            c.to_string()
        }
    }

    fn sql_expr(g: &mut Gen, s: &GenSource, c: &GenColumn) -> String {
        let r = Self::column_ref(g, s, &c.name);
        match g.rng.gen_range(0..4) {
            0 => format!("upper(CAST({r} AS text))"),
            1 => format!("coalesce({r}, {r})"),
            2 => format!("({r})"),
            _ => format!("CASE WHEN {r} IS NULL THEN NULL ELSE {r} END"),
        }
    }

    /// `forced`: `(target, save)`; when `save` the MAP must register the
    /// target's aux table.
    fn map(&mut self, g: &mut Gen, sources: &[GenSource], targets: &[GenTarget], forced: Option<(usize, bool)>) {
        let k = forced.map_or_else(|| g.rng.gen_range(0..targets.len()), |(k, _)| k);
        let t = &targets[k];
        let n_src = g.rng.gen_range(1..=sources.len().min(3));
        let mut picked: Vec<&GenSource> = sources.choose_multiple(&mut g.rng, n_src).collect();
        picked.shuffle(&mut g.rng);

        let mut items: Vec<String> = Vec::new();
        let mut plain: Vec<&GenColumn> = t.columns.iter().collect();
        plain.shuffle(&mut g.rng);
        let keep = g.rng.gen_range(1..=plain.len());
        for c in &plain[..keep] {
            let s = *picked.choose(&mut g.rng).unwrap();
            let item = match g.rng.gen_range(0..6) {
                0 => format!("{} {}", g.literal_for(&c.sql_type), g.kw("TO")),
                1 => {
                    let src = s.columns.choose(&mut g.rng).unwrap();
                    format!("{} {} {}", g.kw("SQL:"), Self::sql_expr(g, s, src), g.kw("TO"))
                }
                _ => {
                    let src = s.columns.choose(&mut g.rng).unwrap().name.clone();
                    format!("{} {}", Self::column_ref(g, s, &src), g.kw("TO"))
                }
            };
            items.push(format!("{item} {}", c.name));
        }

        let save = match forced {
            Some((_, save)) => save,
            None => g.rng.gen_bool(0.45),
        };
        let pk_clause = !save && forced.is_none() && g.rng.gen_bool(0.15);
        let registers = save || pk_clause;
        let keyed = *picked.choose(&mut g.rng).unwrap();
        if save {
            let item = format!(
                "{} {} {}.{} {} {} int {} {}.{} int",
                g.kw("SAVE"),
                g.kw("RELATION"),
                keyed.name,
                keyed.id,
                g.kw("AS"),
                t.alias(),
                g.kw("EQUALS"),
                t.name,
                t.pk
            );
            let at = g.rng.gen_range(0..=items.len());
            items.insert(at, item);
        }
        if pk_clause {
            items.push(format!(
                "{} {} {} {} {}.{} {} {}",
                g.kw("PRIMARY"),
                g.kw("KEY"),
                g.kw("IDENTIFIED"),
                g.kw("WITH"),
                keyed.name,
                keyed.id,
                g.kw("TO"),
                t.pk
            ));
        }

        // Foreign keys: GET, FOREIGN KEY clause, or left out.
        let mut uses = Vec::new();
        let mut gets = Vec::new();
        let must_use = matches!(forced, Some((_, false)));
        for (i, (col, m)) in t.fks.iter().enumerate() {
            if !self.registered.contains_key(m) {
                continue;
            }
            let r = &targets[*m];
            let s = *picked.choose(&mut g.rng).unwrap();
            let choice = if must_use && i == 0 { 1 + g.rng.gen_range(0..2) } else { g.rng.gen_range(0..3) };
            match choice {
                1 => {
                    let legacy = Self::column_ref(g, s, &s.id);
                    gets.push(format!(
                        "{} {col} {} {}.{} {} {} = {legacy}",
                        g.kw("GET"),
                        g.kw("FROM"),
                        r.name,
                        r.pk,
                        g.kw("WHEN"),
                        r.alias()
                    ));
                    uses.push(*m);
                }
                2 => {
                    items.push(format!(
                        "{} {} {} {} {} {} {}.{}",
                        g.kw("FOREIGN"),
                        g.kw("KEY"),
                        g.kw("TO"),
                        r.name,
                        g.kw("IDENTIFIED"),
                        g.kw("WITH"),
                        s.name,
                        s.id
                    ));
                    uses.push(*m);
                }
                _ => {}
            }
        }

        if g.rng.gen_bool(0.2) {
            let c = t.columns.choose(&mut g.rng).unwrap();
            let value = if g.rng.gen_bool(0.5) {
                g.literal_for(&c.sql_type)
            } else {
                format!("{} coalesce({}, {})", g.kw("SQL:"), c.name, c.name)
            };
            items.push(format!(
                "{} {value} {} {} {} ({} IS NULL)",
                g.kw("UPDATE"),
                g.kw("TO"),
                c.name,
                g.kw("WHEN"),
                c.name
            ));
        }

        let mut stmt = format!(
            "{} {} {} {} (\n  {}\n)",
            g.kw("MAP"),
            picked.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(", "),
            g.kw("TO"),
            t.name,
            items.join(",\n  ")
        );
        if picked.len() > 1 || g.rng.gen_bool(0.3) {
            let a = picked[0];
            let b = picked[picked.len() - 1];
            let pred = if g.rng.gen_bool(0.2) {
                format!("{}.{} = {}.{} OR {}.{} > 3", a.name, a.id, b.name, b.id, a.name, a.id)
            } else {
                let conj: Vec<String> = picked.windows(2).map(|w| format!("{}={}", w[0].id, w[1].id)).collect();
                if conj.is_empty() {
                    format!("{} > 0", a.id)
                } else {
                    conj.join(" AND ")
                }
            };
            stmt.push_str(&format!(" {} ({pred})", g.kw("WHERE")));
        }
        for get in gets {
            stmt.push_str(&format!("{}{get}", g.sep()));
        }
        stmt.push(';');

        self.push(stmt, &uses);
        if registers {
            let at = self.statements.len() - 1;
            self.registered.entry(k).or_insert(at);
        }
        self.populated.insert(k);
    }

    fn insert_values(&mut self, g: &mut Gen, targets: &[GenTarget]) {
        let k = g.rng.gen_range(0..targets.len());
        let t = &targets[k];
        let n = g.rng.gen_range(1..=t.columns.len());
        let cols: Vec<&GenColumn> = t.columns.choose_multiple(&mut g.rng, n).collect();
        let values: Vec<String> = cols.iter().map(|c| g.literal_for(&c.sql_type)).collect();
        let names: Vec<&str> = cols.iter().map(|c| c.name.as_str()).collect();
        let stmt = format!(
            "{} {} {} ({}) {} ({});",
            g.kw("INSERT"),
            g.kw("INTO"),
            t.name,
            names.join(", "),
            g.kw("VALUES"),
            values.join(", ")
        );
        self.push(stmt, &[]);
        self.populated.insert(k);
    }

    fn insert_query(&mut self, g: &mut Gen, sources: &[GenSource], targets: &[GenTarget]) {
        let k = g.rng.gen_range(0..targets.len());
        let t = &targets[k];
        let s = sources.choose(&mut g.rng).unwrap();
        let n = g.rng.gen_range(1..=t.columns.len());
        let cols: Vec<&GenColumn> = t.columns.choose_multiple(&mut g.rng, n).collect();
        let values: Vec<String> = cols
            .iter()
            .map(|c| {
                if g.rng.gen_bool(0.7) {
                    s.columns.choose(&mut g.rng).unwrap().name.clone()
                } else {
                    g.literal_for(&c.sql_type)
                }
            })
            .collect();
        let names: Vec<&str> = cols.iter().map(|c| c.name.as_str()).collect();
        let stmt = format!(
            "{} {} {} ({}) {} {} {} {};",
            g.kw("INSERT"),
            g.kw("INTO"),
            t.name,
            names.join(", "),
            g.kw("SELECT"),
            values.join(", "),
            g.kw("FROM"),
            s.name
        );
        self.push(stmt, &[]);
        self.populated.insert(k);
    }

    fn attribute(&mut self, g: &mut Gen, sources: &[GenSource], targets: &[GenTarget]) {
        let k = g.rng.gen_range(0..targets.len());
        let t = &targets[k];
        let s = sources.choose(&mut g.rng).unwrap();
        let sc = s.columns.choose(&mut g.rng).unwrap();
        let tc = t.columns.choose(&mut g.rng).unwrap();
        let transform = if g.rng.gen_bool(0.4) {
            format!(" {} trim(CAST({} AS text))", g.kw("SQL:"), sc.name)
        } else {
            String::new()
        };
        let stmt = format!(
            "{} {}({}){transform} {} {}({});",
            g.kw("ATTRIBUTE"),
            s.name,
            sc.name,
            g.kw("TO"),
            t.name,
            tc.name
        );
        self.push(stmt, &[]);
        self.populated.insert(k);
    }

    fn map_all(&mut self, g: &mut Gen, sources: &[GenSource], targets: &[GenTarget]) {
        let mut pairs = Vec::new();
        for s in sources {
            for (k, t) in targets.iter().enumerate() {
                let shared: Vec<String> = s
                    .columns
                    .iter()
                    .filter(|c| t.columns.iter().any(|d| d.name == c.name))
                    .map(|c| c.name.clone())
                    .collect();
                if !shared.is_empty() {
                    pairs.push((s, k, shared));
                }
            }
        }
        let Some((s, k, shared)) = pairs.choose(&mut g.rng).cloned() else {
            return;
        };
        let t = &targets[k];
        let mut stmt = format!("{} {} {} {} {} {}", g.kw("MAP"), g.kw("ALL"), g.kw("PROPERTIES"), s.name, g.kw("TO"), t.name);
        if g.rng.gen_bool(0.4) {
            let excluded = if shared.len() > 1 {
                shared[0].clone()
            } else {
                s.columns[0].name.clone()
            };
            if excluded != shared[0] || shared.len() > 1 {
                stmt.push_str(&format!(" {} ({excluded})", g.kw("EXCEPT")));
            }
        }
        stmt.push(';');
        self.push(stmt, &[]);
        self.populated.insert(k);
    }

    fn identify(&mut self, g: &mut Gen, sources: &[GenSource], targets: &[GenTarget]) {
        let candidates: Vec<usize> = (0..targets.len())
            .filter(|k| targets[*k].fks.iter().any(|(_, m)| self.registered.contains_key(m)))
            .collect();
        let Some(&k) = candidates.choose(&mut g.rng) else {
            return;
        };
        let t = &targets[k];
        let s = sources.choose(&mut g.rng).unwrap();
        let mut clauses = Vec::new();
        let mut uses = Vec::new();
        for (_, m) in &t.fks {
            if self.registered.contains_key(m) && (uses.is_empty() || g.rng.gen_bool(0.5)) {
                let col = s.columns.iter().find(|c| is_integer(&c.sql_type)).map_or(&s.id, |c| &c.name);
                clauses.push(format!(
                    "{} {} {} {} {} {} {}.{col}",
                    g.kw("FOREIGN"),
                    g.kw("KEY"),
                    g.kw("TO"),
                    targets[*m].name,
                    g.kw("IDENTIFIED"),
                    g.kw("WITH"),
                    s.name
                ));
                uses.push(*m);
            }
        }
        let registers = g.rng.gen_bool(0.3);
        if registers {
            clauses.insert(
                0,
                format!(
                    "{} {} {} {} {}.{} {} {}",
                    g.kw("PRIMARY"),
                    g.kw("KEY"),
                    g.kw("IDENTIFIED"),
                    g.kw("WITH"),
                    s.name,
                    s.id,
                    g.kw("TO"),
                    t.pk
                ),
            );
        }
        let stmt = format!("{} {} {} {} ({});", g.kw("IDENTIFY"), s.name, g.kw("TO"), t.name, clauses.join(", "));
        self.push(stmt, &uses);
        if registers {
            let at = self.statements.len() - 1;
            self.registered.entry(k).or_insert(at);
        }
        self.populated.insert(k);
    }

    /// A populated table with a registered foreign key target, and an
    /// integer column of that table to match aliases against.
    fn updatable(&self, g: &mut Gen, targets: &[GenTarget]) -> Option<Updatable> {
        let candidates: Vec<usize> = self
            .populated
            .iter()
            .copied()
            .filter(|k| targets[*k].fks.iter().any(|(_, m)| self.registered.contains_key(m)))
            .collect();
        let &k = candidates.choose(&mut g.rng)?;
        let t = &targets[k];
        let fks: Vec<(String, usize)> = t.fks.iter().filter(|(_, m)| self.registered.contains_key(m)).cloned().collect();
        let matcher = t
            .columns
            .iter()
            .filter(|c| is_integer(&c.sql_type))
            .map(|c| c.name.clone())
            .chain(t.fks.iter().map(|(c, _)| c.clone()))
            .collect::<Vec<_>>();
        let m = matcher.choose(&mut g.rng)?.clone();
        Some((k, fks, m))
    }

    fn lookup(g: &mut Gen, targets: &[GenTarget], m: usize, matcher: &str) -> String {
        let r = &targets[m];
        format!("{} {}.{} {} {} = {matcher}", g.kw("FROM"), r.name, r.pk, g.kw("WHEN"), r.alias())
    }

    fn update_foreign_key(&mut self, g: &mut Gen, targets: &[GenTarget]) {
        let Some((k, fks, matcher)) = self.updatable(g, targets) else {
            return;
        };
        let (col, m) = fks.choose(&mut g.rng).unwrap().clone();
        let stmt = format!(
            "{} {} {} {}.{col} {};",
            g.kw("UPDATE"),
            g.kw("FOREIGN"),
            g.kw("KEY"),
            targets[k].name,
            Self::lookup(g, targets, m, &matcher)
        );
        self.push(stmt, &[m]);
    }

    fn update_foreign_table(&mut self, g: &mut Gen, targets: &[GenTarget]) {
        let Some((k, fks, matcher)) = self.updatable(g, targets) else {
            return;
        };
        let mut gets = Vec::new();
        let mut uses = Vec::new();
        for (col, m) in &fks {
            gets.push(format!("{} {col} {}", g.kw("GET"), Self::lookup(g, targets, *m, &matcher)));
            uses.push(*m);
        }
        let stmt = format!(
            "{} {} {} {} {};",
            g.kw("UPDATE"),
            g.kw("FOREIGN"),
            g.kw("TABLE"),
            targets[k].name,
            gets.join(g.sep())
        );
        self.push(stmt, &uses);
    }

    fn create_schema(&mut self, g: &mut Gen) {
        let name = EXTRA_SCHEMAS.choose(&mut g.rng).unwrap().to_string();
        if self.created.contains(&name) || self.retired.contains(&name) {
            return;
        }
        self.push(format!("{} {} {name};", g.kw("CREATE"), g.kw("SCHEMA")), &[]);
        self.created.push(name);
    }

    fn drop_schema(&mut self, g: &mut Gen) {
        if self.created.is_empty() {
            return;
        }
        let name = self.created.remove(g.rng.gen_range(0..self.created.len()));
        self.push(format!("{} {} {name};", g.kw("DROP"), g.kw("SCHEMA")), &[]);
        self.retired.push(name);
    }
}

// ---------------------------------------------------------------- invariants
//
// Each check returns a description of the first violation found.


/// parse(render(parse(S))) equals parse(S).
pub fn check_round_trip(text: &str) -> Result<(), String> {
    let first = parse_script(text).map_err(|d| format!("does not parse: {d:?}"))?;
    let printed = render_script(&first);
    let second = parse_script(&printed).map_err(|d| format!("printed form does not parse: {d:?}\n{printed}"))?;
    if first != second {
        return Err(format!("round trip changed the script:\n{text}\n---\n{printed}"));
    }
    Ok(())
}

/// Validation and compilation give identical results when repeated.
pub fn check_determinism(text: &str, source: &SchemaCatalog, target: &SchemaCatalog) -> Result<(), String> {
    let a = resolve(text, source, target).map_err(|d| format!("rejected: {d:?}"))?;
    let b = resolve(text, source, target).map_err(|d| format!("rejected: {d:?}"))?;
    if a.warnings != b.warnings {
        return Err("warnings differ between runs".into());
    }
    let sql_a = compile(&a, &EmitOptions::default()).to_sql();
    let sql_b = compile(&b, &EmitOptions::default()).to_sql();
    if sql_a != sql_b {
        return Err("compiled SQL differs between runs".into());
    }
    Ok(())
}

/// Every INSERT lists as many columns as it produces values.
pub fn check_arity(generated: &GeneratedScript) -> Result<(), String> {
    for f in &generated.fragments {
        if let Some((columns, values)) = insert_arity(&f.sql) {
            if columns != values {
                return Err(format!("{columns} columns but {values} values:\n{}", f.sql));
            }
        }
    }
    Ok(())
}

/// Every table reference is `schema.table` with a known schema, names a
/// table that exists at that point, and every written or fully qualified
/// column exists in its table. Nothing refers to a schema after its drop.
pub fn check_references(
    generated: &GeneratedScript,
    source: &SchemaCatalog,
    target: &SchemaCatalog,
    import_schema: &str,
    target_schema: &str,
    aux_schema: &str,
) -> Result<(), String> {
    let mut aux: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut added: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut dropped: BTreeSet<String> = BTreeSet::new();

    let columns_of = |schema: &str, table: &str, aux: &BTreeMap<String, Vec<String>>, added: &BTreeMap<String, Vec<String>>| -> Option<Vec<String>> {
        if schema == import_schema {
            lookup_table(source, table).map(|t| t.columns.iter().map(|c| c.name.to_ascii_lowercase()).collect())
        } else if schema == target_schema {
            lookup_table(target, table).map(|t| {
                let mut cols: Vec<String> = t.columns.iter().map(|c| c.name.to_ascii_lowercase()).collect();
                cols.extend(added.get(&table.to_ascii_lowercase()).cloned().unwrap_or_default());
                cols
            })
        } else if schema == aux_schema {
            aux.get(&table.to_ascii_lowercase()).cloned()
        } else {
            None
        }
    };

    for f in &generated.fragments {
        let sql = &f.sql;
        let toks = sql_tokens(sql);
        let upper: Vec<String> = toks.iter().map(|t| t.to_ascii_uppercase()).collect();

        if upper.starts_with(&["CREATE".into(), "TABLE".into()]) {
            let (name, next) = dotted(&toks, 5);
            if name.len() != 2 || name[0] != aux_schema {
                return Err(format!("table created outside the aux schema: {sql}"));
            }
            let mut cols = Vec::new();
            let mut i = next + 1;
            while i < toks.len() && toks[i] != ")" {
                cols.push(toks[i].to_ascii_lowercase());
                while i < toks.len() && toks[i] != "," && toks[i] != ")" {
                    i += 1;
                }
                if toks.get(i).map(String::as_str) == Some(",") {
                    i += 1;
                }
            }
            aux.entry(name[1].to_ascii_lowercase()).or_insert(cols);
        }
        if upper.starts_with(&["DROP".into(), "SCHEMA".into()]) {
            dropped.insert(toks[2].clone());
            continue;
        }

        for name in table_refs(sql) {
            if name.len() != 2 {
                return Err(format!("unqualified table reference {name:?}: {sql}"));
            }
            if dropped.contains(&name[0]) {
                return Err(format!("`{}` used after its schema was dropped: {sql}", name.join(".")));
            }
            if columns_of(&name[0], &name[1], &aux, &added).is_none() {
                return Err(format!("unknown table `{}`: {sql}", name.join(".")));
            }
        }

        // schema.table.column anywhere in the statement
        let mut i = 0;
        while i < toks.len() {
            let (parts, next) = dotted(&toks, i);
            if parts.len() == 3 {
                let cols = columns_of(&parts[0], &parts[1], &aux, &added)
                    .ok_or_else(|| format!("unknown table in `{}`: {sql}", parts.join(".")))?;
                if !cols.contains(&parts[2].to_ascii_lowercase()) {
                    return Err(format!("unknown column `{}`: {sql}", parts.join(".")));
                }
            }
            i = next.max(i + 1);
        }

        // columns written by INSERT, UPDATE and ALTER
        if upper.starts_with(&["INSERT".into(), "INTO".into()]) {
            let (name, next) = dotted(&toks, 2);
            let cols = columns_of(&name[0], &name[1], &aux, &added).unwrap_or_default();
            let mut i = next + 1;
            while toks[i] != ")" {
                if toks[i] != "," && !cols.contains(&toks[i].to_ascii_lowercase()) {
                    return Err(format!("INSERT into unknown column `{}`: {sql}", toks[i]));
                }
                i += 1;
            }
        } else if upper[0] == "UPDATE" {
            let (name, next) = dotted(&toks, 1);
            let cols = columns_of(&name[0], &name[1], &aux, &added).unwrap_or_default();
            if !cols.contains(&toks[next + 1].to_ascii_lowercase()) {
                return Err(format!("UPDATE of unknown column `{}`: {sql}", toks[next + 1]));
            }
        } else if upper.starts_with(&["ALTER".into(), "TABLE".into()]) {
            let (name, next) = dotted(&toks, 2);
            if name[0] != target_schema {
                return Err(format!("ALTER outside the target schema: {sql}"));
            }
            let table = name[1].to_ascii_lowercase();
            let column = toks[next + 1].to_ascii_lowercase();
            let list = added.entry(table).or_default();
            match upper[next].as_str() {
                "ADD" => {
                    if list.contains(&column) || lookup_column(lookup_table(target, &name[1]).unwrap(), &column).is_some() {
                        return Err(format!("column added twice: {sql}"));
                    }
                    list.push(column);
                }
                "DROP" => {
                    let Some(at) = list.iter().position(|c| *c == column) else {
                        return Err(format!("drop of a column that was not added: {sql}"));
                    };
                    list.remove(at);
                }
                other => return Err(format!("unexpected ALTER {other}: {sql}")),
            }
        }
    }
    if let Some((table, cols)) = added.iter().find(|(_, c)| !c.is_empty()) {
        return Err(format!("columns {cols:?} of `{table}` are never dropped"));
    }
    Ok(())
}

fn fragments_of(generated: &GeneratedScript, span: SourceSpan) -> Vec<&str> {
    generated
        .fragments
        .iter()
        .filter(|f| f.origin == span && f.phase == Phase::Body)
        .map(|f| f.sql.as_str())
        .collect()
}

/// For every SAVE RELATION: one ADD column, one aux CREATE TABLE, one aux
/// INSERT and one DROP column, in that order.
pub fn check_aux_lifecycle(script: &MigrationScript, generated: &GeneratedScript, aux_schema: &str) -> Result<(), String> {
    for stmt in &script.statements {
        let StatementKind::Map(map) = &stmt.kind else {
            continue;
        };
        let Some(rel) = map.save_relation() else {
            continue;
        };
        let frags = fragments_of(generated, stmt.span);
        let find = |pred: &dyn Fn(&str) -> bool| -> Result<usize, String> {
            let hits: Vec<usize> = frags.iter().enumerate().filter(|(_, f)| pred(f)).map(|(i, _)| i).collect();
            match hits.as_slice() {
                [one] => Ok(*one),
                _ => Err(format!("expected exactly one match, found {} in {frags:#?}", hits.len())),
            }
        };
        let alias = rel.alias.text.as_str();
        let table = map.target.text.as_str();
        let add = find(&|f| f.starts_with("ALTER TABLE") && f.contains(&format!(" ADD {alias} ")))?;
        let create = find(&|f| f.starts_with(&format!("CREATE TABLE IF NOT EXISTS {aux_schema}.{table}(")))?;
        let insert = find(&|f| f.starts_with(&format!("INSERT INTO {aux_schema}.{table}(")))?;
        let drop = find(&|f| f.starts_with("ALTER TABLE") && f.ends_with(&format!(" DROP {alias};")))?;
        if !(add < create && create < insert && insert < drop) {
            return Err(format!("aux lifecycle out of order at {}: {frags:#?}", stmt.span));
        }
    }
    Ok(())
}

fn count_matching(generated: &GeneratedScript, pred: impl Fn(&[String]) -> bool) -> usize {
    generated
        .fragments
        .iter()
        .filter(|f| pred(&sql_tokens(&f.sql).iter().map(|t| t.to_ascii_uppercase()).collect::<Vec<_>>()))
        .count()
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_ascii_uppercase).collect()
}

/// Servers, user mappings and the import and aux schemas are created once
/// and dropped once. Schemas created by the script are dropped only when
/// the script says so; the target schema is never dropped.
pub fn check_resource_balance(
    script: &MigrationScript,
    generated: &GeneratedScript,
    import_schema: &str,
    target_schema: &str,
    aux_schema: &str,
) -> Result<(), String> {
    let prefix = |p: &str| {
        let p = words(p);
        move |t: &[String]| t.starts_with(&p)
    };
    let pairs: Vec<(String, String, usize)> = {
        let mut v = vec![
            ("CREATE SERVER".to_string(), "DROP SERVER".to_string(), 1),
            ("CREATE USER MAPPING".to_string(), "DROP USER MAPPING".to_string(), 1),
            (format!("CREATE SCHEMA {import_schema}"), format!("DROP SCHEMA {import_schema}"), 1),
            (
                format!("CREATE SCHEMA IF NOT EXISTS {aux_schema}"),
                format!("DROP SCHEMA {aux_schema}"),
                1,
            ),
            (format!("CREATE SCHEMA IF NOT EXISTS {target_schema}"), format!("DROP SCHEMA {target_schema}"), 0),
        ];
        for stmt in &script.statements {
            if let StatementKind::CreateSchema(name) = &stmt.kind {
                let dropped = script
                    .statements
                    .iter()
                    .any(|s| matches!(&s.kind, StatementKind::DropSchema(n) if n.matches(&name.text)));
                v.push((
                    format!("CREATE SCHEMA IF NOT EXISTS {name}"),
                    format!("DROP SCHEMA {name}"),
                    usize::from(dropped),
                ));
            }
        }
        v
    };
    for (create, drop, drops) in pairs {
        let c = count_matching(generated, prefix(&create));
        let d = count_matching(generated, prefix(&drop));
        if c != 1 || d != drops {
            return Err(format!("`{create}` appears {c} times and `{drop}` {d} times (expected 1 and {drops})"));
        }
    }
    // Every aux table is created before its schema is dropped.
    let drop_aux = words(&format!("DROP SCHEMA {aux_schema}"));
    let at = generated
        .fragments
        .iter()
        .position(|f| sql_tokens(&f.sql).iter().map(|t| t.to_ascii_uppercase()).collect::<Vec<_>>().starts_with(&drop_aux));
    let last_aux_use = generated
        .fragments
        .iter()
        .rposition(|f| f.sql.contains(&format!("{aux_schema}.")));
    if let (Some(at), Some(last)) = (at, last_aux_use) {
        if last > at {
            return Err("aux table used after the aux schema was dropped".into());
        }
    }
    Ok(())
}

/// Moving each dependent statement ahead of the statement that first fills
/// its aux table yields E-AUX-UNDEFINED.
pub fn check_order_sensitivity(case: &FuzzCase, source: &SchemaCatalog, target: &SchemaCatalog) -> Result<(), String> {
    for &(first, user) in &case.dependencies {
        let text = case.hoisted(first, user);
        match resolve(&text, source, target) {
            Ok(_) => return Err(format!("hoisting statement {user} before {first} was accepted:\n{text}")),
            Err(d) => {
                if !d.iter().any(|d| d.code == DiagnosticCode::AuxUndefined) {
                    return Err(format!("hoisting statement {user} before {first} gave {d:?}"));
                }
            }
        }
    }
    Ok(())
}

/// Runs every corpus-level check on one case.
pub fn check_case(case: &FuzzCase) -> Result<(), String> {
    let text = case.script();
    let (source, target) = case.catalogs();
    check_round_trip(&text)?;
    check_determinism(&text, &source, &target)?;
    let ast = parse_script(&text).map_err(|d| format!("{d:?}"))?;
    let resolved = validate(&ast, &source, &target).map_err(|d| format!("{d:?}"))?;
    let generated = compile(&resolved, &EmitOptions::default());
    check_arity(&generated)?;
    check_references(&generated, &source, &target, &case.import_schema, &case.target_schema, "aux")?;
    check_aux_lifecycle(&ast, &generated, "aux")?;
    check_resource_balance(&ast, &generated, &case.import_schema, &case.target_schema, "aux")?;
    check_order_sensitivity(case, &source, &target)
}

// ---------------------------------------------------------------- text edits

/// Rewrites every keyword token in upper or lower case.
pub fn recase_keywords(text: &str, upper: bool) -> String {
    let tokens = tokenize(text).expect("tokenizes");
    let mut out = text.to_string();
    for tok in tokens.iter().rev() {
        if let TokenKind::Keyword(_) = tok.kind {
            let word = if upper { tok.text.to_ascii_uppercase() } else { tok.text.to_ascii_lowercase() };
            out.replace_range(tok.range.clone(), &word);
        }
    }
    out
}

/// True when `span` lies within `text`.
pub fn span_inside(text: &str, span: SourceSpan) -> bool {
    let lines: Vec<&str> = text.split('\n').collect();
    let Some(line) = lines.get(span.line as usize - 1) else {
        return false;
    };
    let width = line.chars().count() as u32;
    if span.column > width + 1 {
        return false;
    }
    let before: usize = lines[..span.line as usize - 1].iter().map(|l| l.chars().count() + 1).sum();
    let start = before + span.column as usize - 1;
    start + span.length as usize <= text.chars().count() + 1
}
