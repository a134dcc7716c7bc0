//! Recursive-descent parser producing a [`MigrationScript`].
//!
//! On a syntax error the parser records a diagnostic, skips past the next
//! `;` and resumes, so one call reports every malformed statement.

use crate::diagnostic::{Diagnostic, DiagnosticCode};
use crate::dsl::ast::*;
use crate::dsl::lexer::{tokenize_lossy, Keyword, Token, TokenKind};
use crate::span::{LineIndex, SourceSpan};

type PResult<T> = Result<T, Diagnostic>;

pub fn parse_script(source: &str) -> Result<MigrationScript, Vec<Diagnostic>> {
    let (tokens, mut diagnostics) = tokenize_lossy(source);
    let mut parser = Parser {
        tokens,
        pos: 0,
        end_span: LineIndex::new(source).end_span(),
        diagnostics: Vec::new(),
    };
    let script = parser.script();
    diagnostics.append(&mut parser.diagnostics);
    diagnostics.extend(script_shape_errors(&script));
    if diagnostics.is_empty() {
        Ok(script)
    } else {
        diagnostics.sort_by_key(|d| d.span);
        Err(diagnostics)
    }
}

/// At most one CREATE PRODUCT; GENERATE SCRIPT only as the final statement.
fn script_shape_errors(script: &MigrationScript) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen_product = false;
    let last = script.statements.len().saturating_sub(1);
    for (i, stmt) in script.statements.iter().enumerate() {
        match stmt.kind {
            StatementKind::CreateProduct(_) if seen_product => out.push(Diagnostic::new(
                DiagnosticCode::DuplicateProduct,
                "CREATE PRODUCT may appear only once",
                stmt.span,
            )),
            StatementKind::CreateProduct(_) => seen_product = true,
            StatementKind::GenerateScript if i != last => out.push(Diagnostic::new(
                DiagnosticCode::GenerateNotLast,
                "GENERATE SCRIPT must be the final statement",
                stmt.span,
            )),
            _ => {}
        }
    }
    out
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end_span: SourceSpan,
    diagnostics: Vec<Diagnostic>,
}

fn describe(tok: Option<&Token>) -> String {
    match tok {
        Some(t) => format!("`{}`", t.text),
        None => "end of input".to_string(),
    }
}

/// Splits a `table.column` token into two names with their own spans.
fn split_qualified(tok: &Token) -> (Name, Name) {
    let dot = tok.text.find('.').expect("qualified names contain a dot");
    let (left, right) = (&tok.text[..dot], &tok.text[dot + 1..]);
    let s = tok.span;
    (
        Name::new(left, SourceSpan::new(s.line, s.column, left.len() as u32)),
        Name::new(
            right,
            SourceSpan::new(s.line, s.column + dot as u32 + 1, right.len() as u32),
        ),
    )
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, ahead: usize) -> Option<&Token> {
        self.tokens.get(self.pos + ahead)
    }

    fn here(&self) -> SourceSpan {
        self.peek()
            .map(|t| t.span)
            .or_else(|| self.tokens.last().map(|t| t.span))
            .unwrap_or(self.end_span)
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        self.pos += 1;
        tok
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        Diagnostic::new(
            DiagnosticCode::Syntax,
            format!("expected {expected}, found {}", describe(self.peek())),
            self.here(),
        )
    }

    fn at_keyword(&self, kw: Keyword) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn eat_keyword(&mut self, kw: Keyword) -> bool {
        let hit = self.at_keyword(kw);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        let hit = self.at_punct(p);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect_keyword(&mut self, kw: Keyword) -> PResult<Token> {
        if self.at_keyword(kw) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&format!("`{}`", kw.as_str())))
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Token> {
        if self.at_punct(p) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    fn at_name(&self) -> bool {
        self.peek().is_some_and(|t| match t.kind {
            TokenKind::Identifier => true,
            TokenKind::Keyword(kw) => kw.is_soft(),
            _ => false,
        })
    }

    fn name(&mut self, what: &str) -> PResult<Name> {
        if self.at_name() {
            let tok = self.bump();
            Ok(Name::new(tok.text, tok.span))
        } else {
            Err(self.unexpected(what))
        }
    }

    fn qualified(&mut self, what: &str) -> PResult<(Name, Name)> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::QualifiedName => {
                let tok = self.bump();
                Ok(split_qualified(&tok))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn column_ref(&mut self, what: &str) -> PResult<ColumnRef> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::QualifiedName => {
                let (table, column) = self.qualified(what)?;
                Ok(ColumnRef::qualified(table, column))
            }
            _ => Ok(ColumnRef::bare(self.name(what)?)),
        }
    }

    fn at_literal(&self) -> bool {
        self.peek().is_some_and(|t| {
            matches!(t.kind, TokenKind::StringLiteral | TokenKind::IntegerLiteral)
        })
    }

    fn literal(&mut self) -> PResult<LiteralExpr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected("a literal"));
        };
        let value = match tok.kind {
            TokenKind::StringLiteral => Literal::String(tok.string_value().unwrap()),
            TokenKind::IntegerLiteral => match tok.text.parse::<i64>() {
                Ok(v) => Literal::Integer(v),
                Err(_) => {
                    return Err(Diagnostic::new(
                        DiagnosticCode::IntegerRange,
                        format!("integer literal `{}` is out of range", tok.text),
                        tok.span,
                    ))
                }
            },
            _ => return Err(self.unexpected("a literal")),
        };
        self.pos += 1;
        Ok(LiteralExpr::new(value, tok.span))
    }

    fn sql_fragment(&mut self, what: &str) -> PResult<SqlText> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::SqlFragment => {
                let tok = self.bump();
                Ok(SqlText::new(tok.text, tok.span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    /// `( fragment )` following WHERE / WHEN.
    fn predicate(&mut self) -> PResult<SqlText> {
        self.expect_punct("(")?;
        let text = self.sql_fragment("a condition")?;
        self.expect_punct(")")?;
        Ok(text)
    }

    fn comma_list<T>(&mut self, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut out = vec![item(self)?];
        while self.eat_punct(",") {
            out.push(item(self)?);
        }
        Ok(out)
    }

    fn script(&mut self) -> MigrationScript {
        let mut statements = Vec::new();
        while self.peek().is_some() {
            let start = self.pos;
            match self.statement() {
                Ok(stmt) => statements.push(stmt),
                Err(diag) => {
                    self.diagnostics.push(diag);
                    self.recover(start);
                }
            }
        }
        MigrationScript { statements }
    }

    /// Skips through the next `;`, always making progress.
    fn recover(&mut self, start: usize) {
        if self.pos == start && self.pos < self.tokens.len() && !self.at_punct(";") {
            self.pos += 1;
        }
        while let Some(tok) = self.peek() {
            let semi = tok.is_punct(";");
            self.pos += 1;
            if semi {
                break;
            }
        }
    }

    fn statement(&mut self) -> PResult<Statement> {
        let span = self.here();
        let tok = self.peek().cloned().unwrap();
        let kind = match tok.kind {
            TokenKind::Keyword(Keyword::Create) => {
                self.pos += 1;
                self.create()?
            }
            TokenKind::Keyword(Keyword::Map) => {
                self.pos += 1;
                let all = self.at_keyword(Keyword::All)
                    && self.peek_at(1).is_some_and(|t| t.is_keyword(Keyword::Properties));
                if all {
                    self.pos += 2;
                    StatementKind::MapAllProperties(self.map_all()?)
                } else {
                    StatementKind::Map(self.map()?)
                }
            }
            TokenKind::Keyword(Keyword::Attribute) => {
                self.pos += 1;
                StatementKind::Attribute(self.attribute()?)
            }
            TokenKind::Keyword(Keyword::Insert) => {
                self.pos += 1;
                self.expect_keyword(Keyword::Into)?;
                StatementKind::Insert(self.insert()?)
            }
            TokenKind::Keyword(Keyword::Identify) => {
                self.pos += 1;
                StatementKind::Identify(self.identify()?)
            }
            TokenKind::Keyword(Keyword::Update) => {
                self.pos += 1;
                self.expect_keyword(Keyword::Foreign)?;
                if self.eat_keyword(Keyword::Key) {
                    StatementKind::UpdateForeignKey(self.update_foreign_key()?)
                } else if self.eat_keyword(Keyword::Table) {
                    StatementKind::UpdateForeignTable(self.update_foreign_table()?)
                } else {
                    return Err(self.unexpected("`KEY` or `TABLE`"));
                }
            }
            TokenKind::Keyword(Keyword::Drop) => {
                self.pos += 1;
                if self.eat_keyword(Keyword::Connection) {
                    StatementKind::DropConnection
                } else if self.eat_keyword(Keyword::Schema) {
                    StatementKind::DropSchema(self.name("a schema name")?)
                } else {
                    return Err(self.unexpected("`CONNECTION` or `SCHEMA`"));
                }
            }
            TokenKind::Keyword(Keyword::Generate) => {
                self.pos += 1;
                self.expect_keyword(Keyword::Script)?;
                StatementKind::GenerateScript
            }
            _ => return Err(self.unexpected("a statement")),
        };
        self.expect_punct(";")?;
        Ok(Statement::new(kind, span))
    }

    fn create(&mut self) -> PResult<StatementKind> {
        if self.eat_keyword(Keyword::Product) {
            Ok(StatementKind::CreateProduct(self.name("a product name")?))
        } else if self.eat_keyword(Keyword::Connection) {
            Ok(StatementKind::CreateConnection(self.connection()?))
        } else if self.eat_keyword(Keyword::Schema) {
            Ok(StatementKind::CreateSchema(self.name("a schema name")?))
        } else {
            Err(self.unexpected("`PRODUCT`, `CONNECTION` or `SCHEMA`"))
        }
    }

    fn connection(&mut self) -> PResult<ConnectionSpec> {
        let direction = if self.eat_keyword(Keyword::From) {
            Direction::From
        } else if self.eat_keyword(Keyword::To) {
            Direction::To
        } else {
            return Err(self.unexpected("`FROM` or `TO`"));
        };
        let open = self.expect_punct("(")?;

        const PARAMS: [Keyword; 6] = [
            Keyword::Dbname,
            Keyword::Host,
            Keyword::Port,
            Keyword::User,
            Keyword::Pwd,
            Keyword::Schema,
        ];
        let mut values: [Option<String>; 6] = Default::default();
        let mut port = 0u16;
        loop {
            let key = match self.peek() {
                Some(Token {
                    kind: TokenKind::Keyword(kw),
                    ..
                }) if PARAMS.contains(kw) => *kw,
                _ => return Err(self.unexpected("a connection parameter (dbname, host, port, user, pwd, schema)")),
            };
            let key_tok = self.bump();
            let slot = PARAMS.iter().position(|k| *k == key).unwrap();
            if values[slot].is_some() {
                return Err(Diagnostic::new(
                    DiagnosticCode::ConnectionParam,
                    format!("duplicate connection parameter `{}`", key_tok.text),
                    key_tok.span,
                ));
            }
            if key == Keyword::Port {
                let tok = self.peek().cloned();
                match tok {
                    Some(t) if t.kind == TokenKind::IntegerLiteral => {
                        self.pos += 1;
                        match t.text.parse::<u32>() {
                            Ok(p) if (1..=65535).contains(&p) => port = p as u16,
                            _ => {
                                return Err(Diagnostic::new(
                                    DiagnosticCode::PortRange,
                                    format!("port `{}` is outside 1..=65535", t.text),
                                    t.span,
                                ))
                            }
                        }
                        values[slot] = Some(t.text);
                    }
                    _ => return Err(self.unexpected("a port number")),
                }
            } else {
                values[slot] = Some(self.connection_value()?);
            }
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;

        let missing: Vec<&str> = PARAMS
            .iter()
            .zip(&values)
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| k.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Diagnostic::new(
                DiagnosticCode::ConnectionParam,
                format!("missing connection parameter(s): {}", missing.join(", ").to_lowercase()),
                open.span,
            ));
        }
        let [dbname, host, _, user, pwd, schema] = values.map(Option::unwrap);
        Ok(ConnectionSpec {
            direction,
            dbname,
            host,
            port,
            user,
            pwd,
            schema,
        })
    }

    fn connection_value(&mut self) -> PResult<String> {
        if self.at_name() {
            return Ok(self.bump().text);
        }
        match self.peek() {
            Some(t) if t.kind == TokenKind::StringLiteral => {
                let tok = self.bump();
                Ok(tok.string_value().unwrap())
            }
            Some(t) if t.kind == TokenKind::IntegerLiteral => Ok(self.bump().text),
            _ => Err(self.unexpected("a parameter value")),
        }
    }

    fn map(&mut self) -> PResult<MapStatement> {
        let sources = self.comma_list(|p| p.name("a source table"))?;
        self.expect_keyword(Keyword::To)?;
        let target = self.name("a target table")?;
        self.expect_punct("(")?;

        let mut stmt = MapStatement {
            sources,
            target,
            items: Vec::new(),
            primary_key: None,
            foreign_keys: Vec::new(),
            updates: Vec::new(),
            predicate: None,
            gets: Vec::new(),
        };
        loop {
            self.map_entry(&mut stmt)?;
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        if stmt.items.is_empty() {
            return Err(Diagnostic::new(
                DiagnosticCode::Syntax,
                "MAP needs at least one attribute mapping",
                stmt.target.span,
            ));
        }
        if self.eat_keyword(Keyword::Where) {
            stmt.predicate = Some(self.predicate()?);
        }
        while self.at_keyword(Keyword::Get) {
            stmt.gets.push(self.get_clause()?);
        }
        Ok(stmt)
    }

    fn map_entry(&mut self, stmt: &mut MapStatement) -> PResult<()> {
        let span = self.here();
        if self.eat_keyword(Keyword::Save) {
            self.expect_keyword(Keyword::Relation)?;
            let (source_table, source_column) = self.qualified("`table.column` of the legacy key")?;
            self.expect_keyword(Keyword::As)?;
            let alias = self.name("an alias column name")?;
            let alias_type = self.type_name()?;
            self.expect_keyword(Keyword::Equals)?;
            let (target_table, target_column) = self.qualified("`table.column` of the target key")?;
            let target_type = self.type_name()?;
            if stmt.save_relation().is_some() {
                return Err(Diagnostic::new(
                    DiagnosticCode::DuplicateSaveRelation,
                    "a MAP may contain only one SAVE RELATION",
                    span,
                ));
            }
            stmt.items.push(MapItem::SaveRelation(SaveRelation {
                source_table,
                source_column,
                alias,
                alias_type,
                target_table,
                target_column,
                target_type,
                span,
            }));
        } else if self.at_keyword(Keyword::Primary) {
            let clause = self.primary_key_clause()?;
            if stmt.primary_key.is_some() {
                return Err(Diagnostic::new(
                    DiagnosticCode::DuplicatePkClause,
                    "a MAP may contain only one PRIMARY KEY clause",
                    span,
                ));
            }
            stmt.primary_key = Some(clause);
        } else if self.at_keyword(Keyword::Foreign) {
            stmt.foreign_keys.push(self.foreign_key_clause()?);
        } else if self.eat_keyword(Keyword::Update) {
            let value = if self.eat_keyword(Keyword::Sql) {
                UpdateValue::Sql(self.sql_fragment("an SQL expression")?)
            } else if self.at_literal() {
                UpdateValue::Literal(self.literal()?)
            } else {
                UpdateValue::Column(self.name("a value")?)
            };
            self.expect_keyword(Keyword::To)?;
            let target_column = self.name("a target column")?;
            self.expect_keyword(Keyword::When)?;
            let condition = self.predicate()?;
            stmt.updates.push(UpdateClause {
                value,
                target_column,
                condition,
                span,
            });
        } else if self.eat_keyword(Keyword::Sql) {
            let expr = self.sql_fragment("an SQL expression")?;
            self.expect_keyword(Keyword::To)?;
            let target = self.name("a target column")?;
            stmt.items.push(MapItem::Sql { expr, target });
        } else if self.at_literal() {
            let value = self.literal()?;
            self.expect_keyword(Keyword::To)?;
            let target = self.name("a target column")?;
            stmt.items.push(MapItem::Literal { value, target });
        } else {
            let source = self.column_ref("an attribute mapping")?;
            self.expect_keyword(Keyword::To)?;
            let target = self.name("a target column")?;
            stmt.items.push(MapItem::Column { source, target });
        }
        Ok(())
    }

    fn primary_key_clause(&mut self) -> PResult<PrimaryKeyClause> {
        let span = self.here();
        self.expect_keyword(Keyword::Primary)?;
        self.expect_keyword(Keyword::Key)?;
        self.expect_keyword(Keyword::Identified)?;
        self.expect_keyword(Keyword::With)?;
        let legacy = self.column_ref("the legacy key column")?;
        self.expect_keyword(Keyword::To)?;
        let target_column = self.name("the target key column")?;
        Ok(PrimaryKeyClause {
            legacy,
            target_column,
            span,
        })
    }

    fn foreign_key_clause(&mut self) -> PResult<ForeignKeyClause> {
        let span = self.here();
        self.expect_keyword(Keyword::Foreign)?;
        self.expect_keyword(Keyword::Key)?;
        self.expect_keyword(Keyword::To)?;
        let target_table = self.name("a target table")?;
        self.expect_keyword(Keyword::Identified)?;
        self.expect_keyword(Keyword::With)?;
        let (table, column) = self.qualified("`table.column` of the legacy foreign key")?;
        Ok(ForeignKeyClause {
            target_table,
            legacy: ColumnRef::qualified(table, column),
            span,
        })
    }

    /// `GET fk FROM aux.pk WHEN alias = legacy`
    fn get_clause(&mut self) -> PResult<GetClause> {
        let span = self.here();
        self.expect_keyword(Keyword::Get)?;
        let target_column = self.name("a foreign key column")?;
        self.lookup(target_column, span)
    }

    /// The `FROM aux.pk WHEN alias = legacy` tail shared by GET and
    /// UPDATE FOREIGN KEY.
    fn lookup(&mut self, target_column: Name, span: SourceSpan) -> PResult<GetClause> {
        self.expect_keyword(Keyword::From)?;
        let (aux_table, aux_column) = self.qualified("`table.column` of a saved relation")?;
        self.expect_keyword(Keyword::When)?;
        let alias_column = self.name("the saved alias column")?;
        self.expect_punct("=")?;
        let legacy = self.column_ref("a column")?;
        Ok(GetClause {
            target_column,
            aux_table,
            aux_column,
            alias_column,
            legacy,
            span,
        })
    }

    /// `ident` optionally followed by `(n)` or `(n, m)`.
    fn type_name(&mut self) -> PResult<String> {
        let mut text = self.name("a type name")?.text;
        if self.eat_punct("(") {
            let args = self.comma_list(|p| match p.peek() {
                Some(t) if t.kind == TokenKind::IntegerLiteral => Ok(p.bump().text),
                _ => Err(p.unexpected("a type argument")),
            })?;
            self.expect_punct(")")?;
            text.push('(');
            text.push_str(&args.join(","));
            text.push(')');
        }
        Ok(text)
    }

    fn map_all(&mut self) -> PResult<MapAllStatement> {
        let source = self.name("a source table")?;
        self.expect_keyword(Keyword::To)?;
        let target = self.name("a target table")?;
        let mut exclusions = Vec::new();
        if self.eat_keyword(Keyword::Except) {
            self.expect_punct("(")?;
            exclusions = self.comma_list(|p| p.name("a column name"))?;
            self.expect_punct(")")?;
        }
        Ok(MapAllStatement {
            source,
            target,
            exclusions,
        })
    }

    fn attribute(&mut self) -> PResult<AttributeStatement> {
        let source_table = self.name("a source table")?;
        self.expect_punct("(")?;
        let source_column = self.name("a source column")?;
        self.expect_punct(")")?;
        let transform = if self.eat_keyword(Keyword::Sql) {
            Some(self.sql_fragment("an SQL expression")?)
        } else {
            None
        };
        self.expect_keyword(Keyword::To)?;
        let target_table = self.name("a target table")?;
        self.expect_punct("(")?;
        let target_column = self.name("a target column")?;
        self.expect_punct(")")?;
        Ok(AttributeStatement {
            source_table,
            source_column,
            transform,
            target_table,
            target_column,
        })
    }

    fn insert(&mut self) -> PResult<InsertStatement> {
        let target = self.name("a target table")?;
        self.expect_punct("(")?;
        let columns = self.comma_list(|p| p.name("a column name"))?;
        self.expect_punct(")")?;
        let source = if self.eat_keyword(Keyword::Values) {
            self.expect_punct("(")?;
            let values = self.comma_list(|p| p.literal())?;
            self.expect_punct(")")?;
            InsertSource::Values(values)
        } else if self.eat_keyword(Keyword::Select) {
            let values = self.comma_list(|p| {
                if p.at_literal() {
                    p.literal().map(InsertValue::Literal)
                } else {
                    p.name("a column or literal").map(InsertValue::Column)
                }
            })?;
            self.expect_keyword(Keyword::From)?;
            let table = self.name("a source table")?;
            InsertSource::Query { table, values }
        } else {
            return Err(self.unexpected("`VALUES` or `SELECT`"));
        };
        Ok(InsertStatement {
            target,
            columns,
            source,
        })
    }

    fn identify(&mut self) -> PResult<IdentifyStatement> {
        let join_table = self.name("a join table")?;
        self.expect_keyword(Keyword::To)?;
        let target = self.name("a target table")?;
        self.expect_punct("(")?;
        let clauses = self.comma_list(|p| {
            if p.at_keyword(Keyword::Primary) {
                p.primary_key_clause().map(KeyClause::PrimaryKey)
            } else if p.at_keyword(Keyword::Foreign) {
                p.foreign_key_clause().map(KeyClause::ForeignKey)
            } else {
                Err(p.unexpected("`PRIMARY KEY` or `FOREIGN KEY`"))
            }
        })?;
        self.expect_punct(")")?;
        Ok(IdentifyStatement {
            join_table,
            target,
            clauses,
        })
    }

    fn update_foreign_key(&mut self) -> PResult<UpdateForeignKey> {
        let span = self.here();
        let (table, column) = self.qualified("`table.column` of the foreign key")?;
        let lookup = self.lookup(column.clone(), span)?;
        Ok(UpdateForeignKey {
            table,
            column,
            lookup,
        })
    }

    fn update_foreign_table(&mut self) -> PResult<UpdateForeignTable> {
        let table = self.name("a target table")?;
        let mut lookups = vec![self.get_clause()?];
        while self.at_keyword(Keyword::Get) {
            lookups.push(self.get_clause()?);
        }
        Ok(UpdateForeignTable { table, lookups })
    }
}
