//! Coarse type families used for mapping compatibility warnings.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TypeFamily {
    Integer,
    Numeric,
    Text,
    Temporal,
    Boolean,
    /// Anything unrecognised; never reported as a mismatch.
    Other,
}

impl TypeFamily {
    pub fn of(sql_type: &str) -> TypeFamily {
        let lower = sql_type.to_ascii_lowercase();
        let base = lower.split('(').next().unwrap_or("").trim();
        let head = base.split_whitespace().next().unwrap_or("");
        match head {
            "int" | "integer" | "int2" | "int4" | "int8" | "smallint" | "bigint" | "serial"
            | "bigserial" | "smallserial" | "serial2" | "serial4" | "serial8" => TypeFamily::Integer,
            "numeric" | "decimal" | "real" | "float" | "float4" | "float8" | "double" | "money" => {
                TypeFamily::Numeric
            }
            "char" | "character" | "varchar" | "text" | "bpchar" | "citext" | "nchar"
            | "nvarchar" => TypeFamily::Text,
            "date" | "time" | "timetz" | "timestamp" | "timestamptz" | "interval" | "datetime" => {
                TypeFamily::Temporal
            }
            "bool" | "boolean" => TypeFamily::Boolean,
            _ => TypeFamily::Other,
        }
    }

    /// Type to declare for a column that stores values of `sql_type`
    /// without generating them: serial pseudo-types become plain integers.
    pub fn storage_type(sql_type: &str) -> String {
        match sql_type.to_ascii_lowercase().as_str() {
            "serial" | "serial4" => "int".to_string(),
            "bigserial" | "serial8" => "bigint".to_string(),
            "smallserial" | "serial2" => "smallint".to_string(),
            _ => sql_type.to_string(),
        }
    }

    /// Whether values of `self` can be stored in `other` without a cast
    /// worth warning about.
    pub fn compatible_with(self, other: TypeFamily) -> bool {
        self == other
            || self == TypeFamily::Other
            || other == TypeFamily::Other
            || (self == TypeFamily::Integer && other == TypeFamily::Numeric)
    }
}
