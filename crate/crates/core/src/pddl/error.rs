use std::fmt;

/// 1-based source position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Loc {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ErrorKind {
    #[error("lexical error: {0}")]
    Lexical(String),
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unsupported requirement {0}")]
    UnsupportedRequirement(String),
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("undeclared item `{0}`")]
    UndeclaredItem(String),
    #[error("undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("predicate `{predicate}` expects {expected} arguments, found {found}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("`{name}` has type `{found}`, expected `{expected}`")]
    TypeMismatch {
        name: String,
        expected: String,
        found: String,
    },
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("problem is for domain `{found}`, expected `{expected}`")]
    DomainMismatch { expected: String, found: String },
    #[error("action `{action}` both adds and deletes {atom}")]
    EffectConflict { action: String, atom: String },
}

/// Error raised while reading or checking planning files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PddlError {
    pub kind: ErrorKind,
    pub loc: Option<Loc>,
}

impl PddlError {
    pub fn new(kind: ErrorKind, loc: Option<Loc>) -> Self {
        PddlError { kind, loc }
    }

    pub fn at(kind: ErrorKind, loc: Loc) -> Self {
        PddlError { kind, loc: Some(loc) }
    }

    /// True when an init or goal atom names an object missing from `:objects`.
    pub fn is_undeclared_item(&self) -> bool {
        matches!(self.kind, ErrorKind::UndeclaredItem(_))
    }
}

impl fmt::Display for PddlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.loc {
            Some(loc) => write!(f, "{} (at {loc})", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

impl std::error::Error for PddlError {}

impl From<ErrorKind> for PddlError {
    fn from(kind: ErrorKind) -> Self {
        PddlError { kind, loc: None }
    }
}
