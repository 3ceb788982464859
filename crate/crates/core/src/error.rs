use std::fmt;

use thiserror::Error;

/// Line/column in a source text, 1-based.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LoadErrorKind {
    ParseError,
    HiddenFunctorLeak,
    HiddenCollision,
    ImportNotExported,
    DuplicateDefinition,
    VisibilityViolation,
    MalformedAssertion,
    InvalidRegtype,
    UnknownModule,
}

impl fmt::Display for LoadErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LoadErrorKind::ParseError => "parse-error",
            LoadErrorKind::HiddenFunctorLeak => "hidden-functor-leak",
            LoadErrorKind::HiddenCollision => "hidden-collision",
            LoadErrorKind::ImportNotExported => "import-not-exported",
            LoadErrorKind::DuplicateDefinition => "duplicate-definition",
            LoadErrorKind::VisibilityViolation => "visibility-violation",
            LoadErrorKind::MalformedAssertion => "malformed-assertion",
            LoadErrorKind::InvalidRegtype => "invalid-regtype",
            LoadErrorKind::UnknownModule => "unknown-module",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{kind} in module {module} at {pos}: {message}")]
pub struct LoadError {
    pub kind: LoadErrorKind,
    pub module: String,
    pub pos: Pos,
    pub message: String,
}

impl LoadError {
    pub fn new(kind: LoadErrorKind, module: &str, pos: Pos, message: impl Into<String>) -> Self {
        LoadError { kind, module: module.to_string(), pos, message: message.into() }
    }
}
