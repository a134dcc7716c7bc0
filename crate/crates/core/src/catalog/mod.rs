//! Schema catalogs: tables, columns and key constraints of one database
//! schema, read from a DDL file.

pub mod ddl;
pub mod model;
pub mod types;

pub use ddl::{parse_ddl, render_ddl};
pub use model::*;
pub use types::TypeFamily;
