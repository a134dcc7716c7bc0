//! SQL spelling of every statement the generator emits.

use crate::validate::{AuxTable, InsertSelect};

/// One method per statement shape; the generator never formats SQL itself.
pub trait Dialect {
    fn quote_literal(&self, text: &str) -> String {
        format!("'{}'", text.replace('\'', "''"))
    }

    fn create_extension(&self) -> String;
    fn create_server(&self, server: &str, host: &str, dbname: &str, port: u16) -> String;
    fn create_user_mapping(&self, server: &str, user: &str, password: &str) -> String;
    fn create_schema(&self, schema: &str) -> String;
    fn create_schema_if_missing(&self, schema: &str, owner: &str) -> String;
    fn import_foreign_schema(&self, remote: &str, server: &str, local: &str) -> String;
    fn add_column(&self, table: &str, column: &str, sql_type: &str) -> String;
    fn drop_column(&self, table: &str, column: &str) -> String;
    fn create_aux_table(&self, aux_schema: &str, aux: &AuxTable) -> String;
    /// `filter` is an extra WHERE condition on the target table.
    fn record_aux(&self, aux_schema: &str, aux: &AuxTable, source: &str, key: &str, alias: &str, filter: Option<&str>) -> String;
    fn insert_values(&self, table: &str, columns: &[String], values: &[String]) -> String;
    fn insert_select(&self, table: &str, import_schema: &str, aux_schema: &str, insert: &InsertSelect) -> String;
    fn update(&self, table: &str, column: &str, value: &str, condition: &str) -> String;
    fn update_from_aux(&self, table: &str, column: &str, aux_schema: &str, aux: &AuxTable, match_column: &str) -> String;
    /// Aborts the script if `column` is still NULL in any row.
    fn null_guard(&self, table: &str, column: &str, message: &str) -> String;
    fn drop_schema(&self, schema: &str) -> String;
    fn drop_user_mapping(&self, server: &str) -> String;
    fn drop_server(&self, server: &str) -> String;
}

/// PostgreSQL with postgres_fdw.
#[derive(Debug, Clone, Copy, Default)]
pub struct Postgres;

impl Dialect for Postgres {
    fn create_extension(&self) -> String {
        "CREATE EXTENSION IF NOT EXISTS postgres_fdw;".to_string()
    }

    fn create_server(&self, server: &str, host: &str, dbname: &str, port: u16) -> String {
        format!(
            "CREATE SERVER {server} FOREIGN DATA WRAPPER postgres_fdw\n  OPTIONS (host {}, dbname {}, port {});",
            self.quote_literal(host),
            self.quote_literal(dbname),
            self.quote_literal(&port.to_string())
        )
    }

    fn create_user_mapping(&self, server: &str, user: &str, password: &str) -> String {
        format!(
            "CREATE USER MAPPING FOR CURRENT_USER SERVER {server}\n  OPTIONS (user {}, password {});",
            self.quote_literal(user),
            self.quote_literal(password)
        )
    }

    fn create_schema(&self, schema: &str) -> String {
        format!("CREATE SCHEMA {schema};")
    }

    fn create_schema_if_missing(&self, schema: &str, owner: &str) -> String {
        format!("CREATE SCHEMA IF NOT EXISTS {schema} AUTHORIZATION {owner};")
    }

    fn import_foreign_schema(&self, remote: &str, server: &str, local: &str) -> String {
        format!("IMPORT FOREIGN SCHEMA {remote} FROM SERVER {server} INTO {local};")
    }

    fn add_column(&self, table: &str, column: &str, sql_type: &str) -> String {
        format!("ALTER TABLE {table} ADD {column} {sql_type};")
    }

    fn drop_column(&self, table: &str, column: &str) -> String {
        format!("ALTER TABLE {table} DROP {column};")
    }

    fn create_aux_table(&self, aux_schema: &str, aux: &AuxTable) -> String {
        format!(
            "CREATE TABLE IF NOT EXISTS {aux_schema}.{}(\n  {} {},\n  {} {});",
            aux.table, aux.value_column, aux.pk_type, aux.alias, aux.alias_type
        )
    }

    fn record_aux(&self, aux_schema: &str, aux: &AuxTable, source: &str, key: &str, alias: &str, filter: Option<&str>) -> String {
        let mut sql = format!(
            "INSERT INTO {aux_schema}.{}({},{})\n  SELECT {key},{alias}\n  FROM {source}",
            aux.table, aux.value_column, aux.alias
        );
        if let Some(f) = filter {
            sql.push_str("\n  WHERE ");
            sql.push_str(f);
        }
        sql.push(';');
        sql
    }

    fn insert_values(&self, table: &str, columns: &[String], values: &[String]) -> String {
        format!("INSERT INTO {table}({})\n  VALUES ({});", columns.join(", "), values.join(", "))
    }

    fn insert_select(&self, table: &str, import_schema: &str, aux_schema: &str, insert: &InsertSelect) -> String {
        let exprs: Vec<_> = insert.exprs.iter().map(|e| e.to_sql()).collect();
        let from: Vec<_> = insert
            .sources
            .iter()
            .map(|s| format!("{import_schema}.{s}"))
            .chain(insert.joins.iter().map(|j| format!("{aux_schema}.{}", j.aux.table)))
            .collect();
        let joins: Vec<_> = insert
            .joins
            .iter()
            .map(|j| format!("{}={}", j.alias.to_sql(), j.legacy.to_sql()))
            .collect();
        let condition = match (&insert.predicate, joins.is_empty()) {
            (None, true) => None,
            (None, false) => Some(joins.join(" AND ")),
            (Some(p), true) => Some(p.clone()),
            (Some(p), false) => {
                let p = if has_top_level_or(p) { format!("({p})") } else { p.clone() };
                Some(format!("{p} AND {}", joins.join(" AND ")))
            }
        };
        let mut sql = format!(
            "INSERT INTO {table}({})\n  SELECT {}{}\n  FROM {}",
            insert.columns.join(", "),
            if insert.distinct { "DISTINCT " } else { "" },
            exprs.join(", "),
            from.join(", ")
        );
        if let Some(c) = condition {
            sql.push_str("\n  WHERE ");
            sql.push_str(&c);
        }
        sql.push(';');
        sql
    }

    fn update(&self, table: &str, column: &str, value: &str, condition: &str) -> String {
        format!("UPDATE {table}\n  SET {column} = {value}\n  WHERE {condition};")
    }

    fn update_from_aux(&self, table: &str, column: &str, aux_schema: &str, aux: &AuxTable, match_column: &str) -> String {
        let aux_ref = format!("{aux_schema}.{}", aux.table);
        format!(
            "UPDATE {table}\n  SET {column} = (SELECT {aux_ref}.{} FROM {aux_ref}\n    WHERE {aux_ref}.{} = {table}.{match_column});",
            aux.value_column, aux.alias
        )
    }

    fn null_guard(&self, table: &str, column: &str, message: &str) -> String {
        format!(
            "DO $$\nBEGIN\n  IF EXISTS (SELECT 1 FROM {table} WHERE {column} IS NULL) THEN\n    RAISE EXCEPTION {};\n  END IF;\nEND $$;",
            self.quote_literal(message)
        )
    }

    fn drop_schema(&self, schema: &str) -> String {
        format!("DROP SCHEMA {schema} CASCADE;")
    }

    fn drop_user_mapping(&self, server: &str) -> String {
        format!("DROP USER MAPPING FOR CURRENT_USER SERVER {server};")
    }

    fn drop_server(&self, server: &str) -> String {
        format!("DROP SERVER {server};")
    }
}

/// Whether `OR` appears outside parentheses and string literals.
fn has_top_level_or(predicate: &str) -> bool {
    let mut depth = 0i32;
    let mut in_string = false;
    let mut word = String::new();
    for ch in predicate.chars().chain(std::iter::once(' ')) {
        if in_string {
            in_string = ch != '\'';
            continue;
        }
        if ch.is_ascii_alphanumeric() || ch == '_' {
            word.push(ch);
            continue;
        }
        if depth == 0 && word.eq_ignore_ascii_case("or") {
            return true;
        }
        word.clear();
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            '\'' => in_string = true,
            _ => {}
        }
    }
    false
}
