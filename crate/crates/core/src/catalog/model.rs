use crate::catalog::types::TypeFamily;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: String,
    /// Type as written, e.g. `int` or `varchar(255)`.
    pub sql_type: String,
    pub nullable: bool,
    /// Literal text of a `DEFAULT` clause.
    pub default: Option<String>,
    /// `GENERATED ... AS IDENTITY`
    pub identity: bool,
}

impl ColumnDef {
    pub fn new(name: impl Into<String>, sql_type: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            sql_type: sql_type.into(),
            nullable: true,
            default: None,
            identity: false,
        }
    }

    pub fn family(&self) -> TypeFamily {
        TypeFamily::of(&self.sql_type)
    }

    pub fn is_serial(&self) -> bool {
        let t = self.sql_type.to_ascii_lowercase();
        matches!(
            t.as_str(),
            "serial" | "bigserial" | "smallserial" | "serial2" | "serial4" | "serial8"
        )
    }

    /// True when the database fills the column if an INSERT omits it.
    pub fn has_default(&self) -> bool {
        self.default.is_some() || self.identity || self.is_serial()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForeignKeyDef {
    pub columns: Vec<String>,
    pub referenced_table: String,
    pub referenced_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableDef {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    pub primary_key: Vec<String>,
    pub foreign_keys: Vec<ForeignKeyDef>,
    /// The primary key is filled by a sequence or identity.
    pub pk_autogenerated: bool,
}

impl TableDef {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            columns: Vec::new(),
            primary_key: Vec::new(),
            foreign_keys: Vec::new(),
            pk_autogenerated: false,
        }
    }

    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        lookup_column(self, name)
    }

    pub fn is_primary_key(&self, column: &str) -> bool {
        self.primary_key.iter().any(|c| c.eq_ignore_ascii_case(column))
    }

    /// Single-column foreign keys of this table that reference `table`.
    pub fn foreign_keys_to(&self, table: &str) -> Vec<&ForeignKeyDef> {
        self.foreign_keys
            .iter()
            .filter(|fk| fk.referenced_table.eq_ignore_ascii_case(table) && fk.columns.len() == 1)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaCatalog {
    pub schema_name: String,
    /// In declaration order.
    pub tables: Vec<TableDef>,
}

pub const DEFAULT_SCHEMA: &str = "public";

impl Default for SchemaCatalog {
    fn default() -> Self {
        Self {
            schema_name: DEFAULT_SCHEMA.to_string(),
            tables: Vec::new(),
        }
    }
}

impl SchemaCatalog {
    pub fn table(&self, name: &str) -> Option<&TableDef> {
        lookup_table(self, name)
    }
}

/// Case-insensitive table lookup.
pub fn lookup_table<'a>(catalog: &'a SchemaCatalog, name: &str) -> Option<&'a TableDef> {
    catalog.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
}

/// Case-insensitive column lookup.
pub fn lookup_column<'a>(table: &'a TableDef, name: &str) -> Option<&'a ColumnDef> {
    table.columns.iter().find(|c| c.name.eq_ignore_ascii_case(name))
}
