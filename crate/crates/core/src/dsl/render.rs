//! Canonical pretty-printer; its output parses back to an equal tree.

use std::fmt::Write;

use crate::dsl::ast::*;
use crate::dsl::lexer::is_plain_identifier;

pub fn render_script(script: &MigrationScript) -> String {
    let mut out = String::new();
    for stmt in &script.statements {
        render_statement(&mut out, &stmt.kind);
        out.push_str(";\n");
    }
    out
}

fn literal(value: &Literal) -> String {
    value.to_sql()
}

fn connection_value(value: &str) -> String {
    if is_plain_identifier(value) {
        value.to_string()
    } else {
        literal(&Literal::String(value.to_string()))
    }
}

fn names(list: &[Name]) -> String {
    list.iter().map(|n| n.text.as_str()).collect::<Vec<_>>().join(", ")
}

fn get_tail(get: &GetClause) -> String {
    format!(
        "FROM {}.{} WHEN {}={}",
        get.aux_table, get.aux_column, get.alias_column, get.legacy
    )
}

fn primary_key(pk: &PrimaryKeyClause) -> String {
    format!("PRIMARY KEY IDENTIFIED WITH {} TO {}", pk.legacy, pk.target_column)
}

fn foreign_key(fk: &ForeignKeyClause) -> String {
    format!("FOREIGN KEY TO {} IDENTIFIED WITH {}", fk.target_table, fk.legacy)
}

fn render_statement(out: &mut String, kind: &StatementKind) {
    match kind {
        StatementKind::CreateProduct(name) => write!(out, "CREATE PRODUCT {name}").unwrap(),
        StatementKind::CreateConnection(c) => write!(
            out,
            "CREATE CONNECTION {} (dbname {}, host {}, port {}, user {}, pwd {}, schema {})",
            c.direction,
            connection_value(&c.dbname),
            connection_value(&c.host),
            c.port,
            connection_value(&c.user),
            connection_value(&c.pwd),
            connection_value(&c.schema),
        )
        .unwrap(),
        StatementKind::CreateSchema(name) => write!(out, "CREATE SCHEMA {name}").unwrap(),
        StatementKind::Map(map) => render_map(out, map),
        StatementKind::MapAllProperties(m) => {
            write!(out, "MAP ALL PROPERTIES {} TO {}", m.source, m.target).unwrap();
            if !m.exclusions.is_empty() {
                write!(out, " EXCEPT ({})", names(&m.exclusions)).unwrap();
            }
        }
        StatementKind::Attribute(a) => {
            write!(out, "ATTRIBUTE {}({})", a.source_table, a.source_column).unwrap();
            if let Some(t) = &a.transform {
                write!(out, " SQL: {}", t.text).unwrap();
            }
            write!(out, " TO {}({})", a.target_table, a.target_column).unwrap();
        }
        StatementKind::Insert(ins) => {
            write!(out, "INSERT INTO {} ({})", ins.target, names(&ins.columns)).unwrap();
            match &ins.source {
                InsertSource::Values(values) => {
                    let values: Vec<_> = values.iter().map(|v| literal(&v.value)).collect();
                    write!(out, " VALUES ({})", values.join(", ")).unwrap();
                }
                InsertSource::Query { table, values } => {
                    let values: Vec<_> = values
                        .iter()
                        .map(|v| match v {
                            InsertValue::Literal(l) => literal(&l.value),
                            InsertValue::Column(c) => c.text.clone(),
                        })
                        .collect();
                    write!(out, " SELECT {} FROM {}", values.join(", "), table).unwrap();
                }
            }
        }
        StatementKind::Identify(id) => {
            writeln!(out, "IDENTIFY {} TO {} (", id.join_table, id.target).unwrap();
            let clauses: Vec<_> = id
                .clauses
                .iter()
                .map(|c| match c {
                    KeyClause::PrimaryKey(pk) => primary_key(pk),
                    KeyClause::ForeignKey(fk) => foreign_key(fk),
                })
                .collect();
            write!(out, "  {}\n)", clauses.join(",\n  ")).unwrap();
        }
        StatementKind::UpdateForeignKey(u) => write!(
            out,
            "UPDATE FOREIGN KEY {}.{} {}",
            u.table,
            u.column,
            get_tail(&u.lookup)
        )
        .unwrap(),
        StatementKind::UpdateForeignTable(u) => {
            write!(out, "UPDATE FOREIGN TABLE {}", u.table).unwrap();
            for get in &u.lookups {
                write!(out, "\nGET {} {}", get.target_column, get_tail(get)).unwrap();
            }
        }
        StatementKind::DropConnection => out.push_str("DROP CONNECTION"),
        StatementKind::DropSchema(name) => write!(out, "DROP SCHEMA {name}").unwrap(),
        StatementKind::GenerateScript => out.push_str("GENERATE SCRIPT"),
    }
}

fn render_map(out: &mut String, map: &MapStatement) {
    writeln!(out, "MAP {} TO {} (", names(&map.sources), map.target).unwrap();
    let mut entries: Vec<String> = map
        .items
        .iter()
        .map(|item| match item {
            MapItem::Column { source, target } => format!("{source} TO {target}"),
            MapItem::Literal { value, target } => format!("{} TO {target}", literal(&value.value)),
            MapItem::Sql { expr, target } => format!("SQL: {} TO {target}", expr.text),
            MapItem::SaveRelation(rel) => format!(
                "SAVE RELATION {}.{} AS {} {} EQUALS {}.{} {}",
                rel.source_table,
                rel.source_column,
                rel.alias,
                rel.alias_type,
                rel.target_table,
                rel.target_column,
                rel.target_type
            ),
        })
        .collect();
    entries.extend(map.primary_key.iter().map(primary_key));
    entries.extend(map.foreign_keys.iter().map(foreign_key));
    entries.extend(map.updates.iter().map(|u| {
        let value = match &u.value {
            UpdateValue::Literal(l) => literal(&l.value),
            UpdateValue::Sql(s) => format!("SQL: {}", s.text),
            UpdateValue::Column(c) => c.text.clone(),
        };
        format!("UPDATE {value} TO {} WHEN ({})", u.target_column, u.condition.text)
    }));
    write!(out, "  {}\n)", entries.join(",\n  ")).unwrap();
    if let Some(pred) = &map.predicate {
        write!(out, " WHERE ({})", pred.text).unwrap();
    }
    for get in &map.gets {
        write!(out, "\nGET {} {}", get.target_column, get_tail(get)).unwrap();
    }
}
