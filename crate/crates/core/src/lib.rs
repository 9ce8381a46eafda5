//! A small embeddable scripting language with a reflective bridge to a host
//! object model.
//!
//! Scripts manipulate host objects through proxy tables built on the
//! language's own fallback mechanism, and the host calls back into scripts
//! through wrappers around script tables.
//!
//! ```
//! use bscript::{Interpreter, Value};
//!
//! let mut it = Interpreter::with_demo_classes();
//! let out = it
//!     .exec("p = hostNewInstance('Point') p:move(2, 3) return p.x, p.y")
//!     .unwrap();
//! assert_eq!(out, vec![Value::Number(2.0), Value::Number(3.0)]);
//! ```

pub mod ast;
pub mod bench;
mod builtins;
pub mod convert;
pub mod error;
pub mod host;
pub mod inbound;
pub mod interp;
pub mod lexer;
pub mod outbound;
pub mod parser;
pub mod value;

pub use error::{ErrorKind, Result, ScriptError};
pub use interp::{Env, Interpreter, SharedBuffer};
pub use parser::parse_source;
pub use value::{FallbackKind, Function, HostRef, Key, TableRef, Value};
