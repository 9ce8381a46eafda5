//! Runtime values of the script world.

use std::cell::{Ref, RefCell, RefMut};
use std::collections::HashMap;
use std::fmt;
use std::rc::{Rc, Weak};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::ast::FuncBody;
use crate::error::{ErrorKind, Result, ScriptError};
use crate::host::{ArrayRef, ObjRef};
use crate::inbound::WrapperRef;
use crate::interp::{Env, Interpreter};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Fresh identity for tables, host objects, and wrappers.
pub(crate) fn next_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Default)]
pub enum Value {
    #[default]
    Nil,
    Bool(bool),
    Number(f64),
    Str(Rc<str>),
    Table(TableRef),
    Function(Rc<Function>),
    /// Opaque reference into the host world. Proxies keep one under their
    /// reserved `__hostref` field.
    Host(HostRef),
}

/// What a host reference points at.
#[derive(Clone)]
pub enum HostRef {
    Object(ObjRef),
    Array(ArrayRef),
    Class(Rc<str>),
    Wrapper(WrapperRef),
}

impl PartialEq for HostRef {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (HostRef::Object(a), HostRef::Object(b)) => Rc::ptr_eq(a, b),
            (HostRef::Array(a), HostRef::Array(b)) => Rc::ptr_eq(a, b),
            (HostRef::Class(a), HostRef::Class(b)) => a == b,
            (HostRef::Wrapper(a), HostRef::Wrapper(b)) => Rc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Nil, Value::Nil) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Number(a), Value::Number(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Table(a), Value::Table(b)) => a == b,
            (Value::Function(a), Value::Function(b)) => Rc::ptr_eq(a, b),
            (Value::Host(a), Value::Host(b)) => a == b,
            _ => false,
        }
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.into())
    }
}

impl From<TableRef> for Value {
    fn from(t: TableRef) -> Self {
        Value::Table(t)
    }
}

impl Value {
    pub fn str(s: impl AsRef<str>) -> Self {
        Value::Str(s.as_ref().into())
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Value::Nil)
    }

    pub fn truthy(&self) -> bool {
        !matches!(self, Value::Nil | Value::Bool(false))
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_table(&self) -> Option<&TableRef> {
        match self {
            Value::Table(t) => Some(t),
            _ => None,
        }
    }

    /// Name reported by the `type` builtin.
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Nil => "nil",
            Value::Bool(_) => "boolean",
            Value::Number(_) => "number",
            Value::Str(_) => "string",
            Value::Table(t) if t.host_ref().is_some() => "hostobject",
            Value::Table(_) => "table",
            Value::Function(_) => "function",
            Value::Host(_) => "hostref",
        }
    }
}

/// Formats a number the way `%.14g` would.
pub fn format_number(n: f64) -> String {
    if n.is_nan() {
        return "nan".into();
    }
    if n.is_infinite() {
        return if n > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if n == n.trunc() && n.abs() < 1e15 {
        return format!("{}", n as i64);
    }
    let sci = format!("{n:.13e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..14).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (13 - exp).max(0) as usize;
        trim_zeros(&format!("{n:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nil => f.write_str("nil"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Number(n) => f.write_str(&format_number(*n)),
            Value::Str(s) => f.write_str(s),
            Value::Table(t) => match t.host_ref() {
                Some(HostRef::Object(o)) => write!(f, "hostobject: {}@{}", o.class, o.id),
                Some(HostRef::Array(a)) => write!(f, "hostarray: {}[{}]", a.element, a.len()),
                Some(HostRef::Class(c)) => write!(f, "hostclass: {c}"),
                Some(HostRef::Wrapper(w)) => write!(f, "hostwrapper: {}@{}", w.target, w.id),
                None => write!(f, "table: {:#x}", t.id()),
            },
            Value::Function(func) => write!(f, "function: {}", func.name()),
            Value::Host(HostRef::Object(o)) => write!(f, "hostref: {}@{}", o.class, o.id),
            Value::Host(HostRef::Array(a)) => write!(f, "hostref: {}[{}]", a.element, a.len()),
            Value::Host(HostRef::Class(c)) => write!(f, "hostref: class {c}"),
            Value::Host(HostRef::Wrapper(w)) => write!(f, "hostref: wrapper {}@{}", w.target, w.id),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => write!(f, "{s:?}"),
            other => write!(f, "{other}"),
        }
    }
}

/// A table key: strings and numbers only.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Key {
    Str(Rc<str>),
    Num(u64),
}

impl Key {
    pub fn from_value(v: &Value) -> Result<Key> {
        match v {
            Value::Str(s) => Ok(Key::Str(s.clone())),
            Value::Number(n) if n.is_nan() => Err(ScriptError::runtime("table index is NaN")),
            // Normalize -0.0 so it addresses the same slot as 0.0.
            Value::Number(n) => Ok(Key::Num((n + 0.0).to_bits())),
            Value::Nil => Err(ScriptError::new(ErrorKind::KeyIsNil, "table index is nil")),
            other => Err(ScriptError::runtime(format!(
                "invalid table key of type {}",
                other.type_name()
            ))),
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            Key::Str(s) => Value::Str(s.clone()),
            Key::Num(bits) => Value::Number(f64::from_bits(*bits)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FallbackKind {
    Index,
    NewIndex,
}

pub struct Table {
    id: u64,
    pub entries: HashMap<Key, Value>,
    pub index_handler: Option<Rc<Function>>,
    pub newindex_handler: Option<Rc<Function>>,
}

/// Shared handle to a table. Equality is identity.
#[derive(Clone)]
pub struct TableRef(Rc<RefCell<Table>>);

pub const HOSTREF_FIELD: &str = "__hostref";

impl TableRef {
    pub fn new() -> Self {
        TableRef(Rc::new(RefCell::new(Table {
            id: next_id(),
            entries: HashMap::new(),
            index_handler: None,
            newindex_handler: None,
        })))
    }

    pub fn id(&self) -> u64 {
        self.0.borrow().id
    }

    pub fn borrow(&self) -> Ref<'_, Table> {
        self.0.borrow()
    }

    pub fn borrow_mut(&self) -> RefMut<'_, Table> {
        self.0.borrow_mut()
    }

    pub fn downgrade(&self) -> WeakTableRef {
        WeakTableRef(Rc::downgrade(&self.0))
    }

    /// Reads an entry, never consulting a handler.
    pub fn raw_get(&self, key: &Key) -> Value {
        self.0.borrow().entries.get(key).cloned().unwrap_or_default()
    }

    pub fn raw_get_str(&self, key: &str) -> Value {
        self.raw_get(&Key::Str(key.into()))
    }

    /// Writes an entry, never consulting a handler. Nil removes the key.
    pub fn raw_set(&self, key: Key, value: Value) {
        let mut t = self.0.borrow_mut();
        if value.is_nil() {
            t.entries.remove(&key);
        } else {
            t.entries.insert(key, value);
        }
    }

    pub fn raw_set_str(&self, key: &str, value: Value) {
        self.raw_set(Key::Str(key.into()), value);
    }

    pub fn len(&self) -> usize {
        self.0.borrow().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn set_fallback(&self, kind: FallbackKind, handler: Option<Rc<Function>>) {
        let mut t = self.0.borrow_mut();
        match kind {
            FallbackKind::Index => t.index_handler = handler,
            FallbackKind::NewIndex => t.newindex_handler = handler,
        }
    }

    /// The host reference stored by a proxy, if this table is one.
    pub fn host_ref(&self) -> Option<HostRef> {
        match self.0.borrow().entries.get(&Key::Str(HOSTREF_FIELD.into())) {
            Some(Value::Host(h)) => Some(h.clone()),
            _ => None,
        }
    }
}

impl Default for TableRef {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for TableRef {
    fn eq(&self, other: &Self) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for TableRef {}

impl fmt::Debug for TableRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "table: {:#x}", self.id())
    }
}

#[derive(Clone)]
pub struct WeakTableRef(Weak<RefCell<Table>>);

impl WeakTableRef {
    pub fn upgrade(&self) -> Option<TableRef> {
        self.0.upgrade().map(TableRef)
    }
}

pub type NativeFn = dyn Fn(&mut Interpreter, Vec<Value>) -> Result<Vec<Value>>;

pub enum Function {
    Script(Closure),
    Native(NativeFunction),
}

impl Function {
    pub fn native(
        name: impl Into<String>,
        f: impl Fn(&mut Interpreter, Vec<Value>) -> Result<Vec<Value>> + 'static,
    ) -> Rc<Function> {
        Rc::new(Function::Native(NativeFunction {
            name: name.into(),
            f: Box::new(f),
        }))
    }

    pub fn name(&self) -> &str {
        match self {
            Function::Script(_) => "script",
            Function::Native(n) => &n.name,
        }
    }
}

pub struct Closure {
    pub body: Rc<FuncBody>,
    pub env: Env,
}

pub struct NativeFunction {
    pub name: String,
    pub f: Box<NativeFn>,
}
