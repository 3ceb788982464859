//! Modular logic programs with hidden functors, run-time assertion
//! checking, escaping-term inference and shallow interface checks.

pub mod assertion;
pub mod bench;
pub mod engine;
pub mod error;
pub mod escape;
pub mod par;
pub mod program;
pub mod regtype;
pub mod shallow;
pub mod subst;
pub mod syntax;
pub mod term;

pub use assertion::{AssertionCondition, Builtin, CondId, CondKindTag, PropLit, PropRef};
pub use engine::{solve, CheckConfig, Mode, Outcome, Semantics, SolveOptions, Verdict};
pub use error::{LoadError, LoadErrorKind};
pub use program::{FlatProgram, PredId, Query};
pub use term::{Name, Symbol, Term};
