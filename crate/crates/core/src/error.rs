use std::fmt;

use thiserror::Error;

/// Category of a script-visible error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    Lex,
    Parse,
    Runtime,
    KeyIsNil,
    NotCallable,
    ClassNotFound,
    InterfaceNotInstantiable,
    NoMatch,
    Ambiguous,
    HostException,
    NoSuchMember,
    TypeMismatch,
    IndexOutOfBounds,
    ReceiverMismatch,
    ReservedField,
    UnimplementedMethod,
    ReturnTypeMismatch,
    ProxyNotExportable,
    NoDefaultConstructor,
    StackOverflow,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Lex => "LexError",
            ErrorKind::Parse => "ParseError",
            ErrorKind::Runtime => "RuntimeError",
            ErrorKind::KeyIsNil => "KeyIsNil",
            ErrorKind::NotCallable => "NotCallable",
            ErrorKind::ClassNotFound => "ClassNotFound",
            ErrorKind::InterfaceNotInstantiable => "InterfaceNotInstantiable",
            ErrorKind::NoMatch => "NoMatch",
            ErrorKind::Ambiguous => "Ambiguous",
            ErrorKind::HostException => "HostException",
            ErrorKind::NoSuchMember => "NoSuchMember",
            ErrorKind::TypeMismatch => "TypeMismatch",
            ErrorKind::IndexOutOfBounds => "IndexOutOfBounds",
            ErrorKind::ReceiverMismatch => "ReceiverMismatch",
            ErrorKind::ReservedField => "ReservedField",
            ErrorKind::UnimplementedMethod => "UnimplementedMethod",
            ErrorKind::ReturnTypeMismatch => "ReturnTypeMismatch",
            ErrorKind::ProxyNotExportable => "ProxyNotExportable",
            ErrorKind::NoDefaultConstructor => "NoDefaultConstructor",
            ErrorKind::StackOverflow => "StackOverflow",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An error raised while lexing, parsing, or running a script.
///
/// Errors are plain values: scripts cannot catch them, the embedding
/// (REPL, CLI, host code) does.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ScriptError {
    pub kind: ErrorKind,
    pub message: String,
    pub line: Option<u32>,
}

impl fmt::Display for ScriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.kind, self.message),
            None => write!(f, "{}: {}", self.kind, self.message),
        }
    }
}

impl ScriptError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        ScriptError {
            kind,
            message: message.into(),
            line: None,
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Runtime, message)
    }

    pub fn lex(line: u32, message: impl Into<String>) -> Self {
        ScriptError {
            kind: ErrorKind::Lex,
            message: message.into(),
            line: Some(line),
        }
    }

    pub fn parse(line: u32, expected: &str, found: &str) -> Self {
        ScriptError {
            kind: ErrorKind::Parse,
            message: format!("expected {expected}, found {found}"),
            line: Some(line),
        }
    }

    /// Attaches `line` unless a more precise line is already recorded.
    pub fn at_line(mut self, line: u32) -> Self {
        if self.line.is_none() {
            self.line = Some(line);
        }
        self
    }
}

pub type Result<T, E = ScriptError> = std::result::Result<T, E>;
