//! The migration language: tokens, syntax tree, parser and printer.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod render;

pub use ast::*;
pub use lexer::{tokenize, Keyword, Token, TokenKind};
pub use parser::parse_script;
pub use render::render_script;
