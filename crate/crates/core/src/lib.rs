//! Compiler for the DAMI data-migration language.
//!
//! A migration script is parsed ([`dsl::parse_script`]), checked against the
//! source and target schema catalogs ([`validate::validate`]) and compiled to
//! a PostgreSQL migration script ([`codegen::compile`]).

pub mod catalog;
pub mod codegen;
pub mod diagnostic;
pub mod dsl;
pub mod span;
pub mod stats;
pub mod validate;

pub use diagnostic::{Diagnostic, DiagnosticCode, Severity};
pub use span::SourceSpan;
