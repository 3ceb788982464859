//! Concrete syntax of module files: lexer, parser and normalized printer.

pub mod ast;
mod lexer;
mod parser;
pub mod printer;

pub use ast::{Dialect, Import, Indicator, ModuleSource, SAssertion, SClause, STerm};
pub use parser::{parse_module, parse_module_with, parse_query};
pub(crate) use parser::{parse_term, unfold_conj};
