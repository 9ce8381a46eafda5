//! The host side of the bridge: a reflective object model standing in for a
//! statically typed host language.
//!
//! Classes are described by [`ClassDescriptor`]s held in a [`Registry`].
//! Method bodies are native Rust callables. Once frozen, the registry is
//! immutable and can be shared between threads; host objects and arrays
//! themselves are single-threaded and owned by one interpreter.

pub mod demo;
pub mod manifest;
mod registry;

use std::cell::{Ref, RefCell};
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{ErrorKind, ScriptError};
use crate::inbound::WrapperRef;
use crate::value::next_id;

pub use registry::{
    overlay, ClassDescriptor, ClassKind, FieldSpec, MethodDescriptor, NativeBody, Registry,
    RegistryError,
};

/// Static type vocabulary of the host world.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeTag {
    Boolean,
    Integer,
    Float,
    Text,
    Class(String),
    Interface(String),
    Array(Box<TypeTag>),
    Void,
}

impl TypeTag {
    pub fn class(name: &str) -> Self {
        TypeTag::Class(name.to_string())
    }

    pub fn interface(name: &str) -> Self {
        TypeTag::Interface(name.to_string())
    }

    pub fn array(element: TypeTag) -> Self {
        TypeTag::Array(Box::new(element))
    }

    pub fn is_reference(&self) -> bool {
        matches!(self, TypeTag::Class(_) | TypeTag::Interface(_) | TypeTag::Array(_))
    }

    /// Default element value for arrays and uninitialized fields.
    pub fn zero(&self) -> HostValue {
        match self {
            TypeTag::Boolean => HostValue::Bool(false),
            TypeTag::Integer => HostValue::Int(0),
            TypeTag::Float => HostValue::Float(0.0),
            TypeTag::Text => HostValue::Text("".into()),
            _ => HostValue::Null,
        }
    }

    /// Every class or interface name mentioned by this tag.
    pub fn referenced_type(&self) -> Option<(&str, ClassKind)> {
        match self {
            TypeTag::Class(n) => Some((n, ClassKind::Class)),
            TypeTag::Interface(n) => Some((n, ClassKind::Interface)),
            TypeTag::Array(e) => e.referenced_type(),
            _ => None,
        }
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTag::Boolean => f.write_str("Boolean"),
            TypeTag::Integer => f.write_str("Integer"),
            TypeTag::Float => f.write_str("Float"),
            TypeTag::Text => f.write_str("Text"),
            TypeTag::Void => f.write_str("Void"),
            TypeTag::Class(n) => write!(f, "class {n}"),
            TypeTag::Interface(n) => write!(f, "interface {n}"),
            TypeTag::Array(e) => write!(f, "{e}[]"),
        }
    }
}

impl FromStr for TypeTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(elem) = s.strip_suffix("[]") {
            return Ok(TypeTag::array(elem.parse()?));
        }
        Ok(match s {
            "Boolean" => TypeTag::Boolean,
            "Integer" => TypeTag::Integer,
            "Float" => TypeTag::Float,
            "Text" => TypeTag::Text,
            "Void" => TypeTag::Void,
            _ => {
                if let Some(n) = s.strip_prefix("class ") {
                    TypeTag::Class(n.trim().to_string())
                } else if let Some(n) = s.strip_prefix("interface ") {
                    TypeTag::Interface(n.trim().to_string())
                } else {
                    return Err(format!("unknown type tag '{s}'"));
                }
            }
        })
    }
}

impl Serialize for TypeTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TypeTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Thread-safe constant used for field initial values in descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum Literal {
    #[default]
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl Literal {
    /// Converts to a host value of `tag`, widening integers for Float fields.
    pub fn to_host(&self, tag: &TypeTag) -> Option<HostValue> {
        let v = match (self, tag) {
            (Literal::Null, t) if t.is_reference() => HostValue::Null,
            (Literal::Null, t) => t.zero(),
            (Literal::Bool(b), TypeTag::Boolean) => HostValue::Bool(*b),
            (Literal::Int(i), TypeTag::Integer) => HostValue::Int(*i),
            (Literal::Int(i), TypeTag::Float) => HostValue::Float(*i as f64),
            (Literal::Float(x), TypeTag::Float) => HostValue::Float(*x),
            (Literal::Text(s), TypeTag::Text) => HostValue::Text(s.as_str().into()),
            _ => return None,
        };
        Some(v)
    }
}

impl From<f64> for Literal {
    fn from(x: f64) -> Self {
        Literal::Float(x)
    }
}

impl From<i64> for Literal {
    fn from(i: i64) -> Self {
        Literal::Int(i)
    }
}

impl From<&str> for Literal {
    fn from(s: &str) -> Self {
        Literal::Text(s.to_string())
    }
}

impl From<bool> for Literal {
    fn from(b: bool) -> Self {
        Literal::Bool(b)
    }
}

pub type ObjRef = Rc<HostObject>;
pub type ArrayRef = Rc<HostArray>;

/// A value living in the host world.
#[derive(Clone, Default)]
pub enum HostValue {
    #[default]
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(Rc<str>),
    Object(ObjRef),
    Array(ArrayRef),
    /// A host-side stand-in for a script table.
    Wrapper(WrapperRef),
}

impl PartialEq for HostValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (HostValue::Null, HostValue::Null) => true,
            (HostValue::Bool(a), HostValue::Bool(b)) => a == b,
            (HostValue::Int(a), HostValue::Int(b)) => a == b,
            (HostValue::Float(a), HostValue::Float(b)) => a == b,
            (HostValue::Text(a), HostValue::Text(b)) => a == b,
            (HostValue::Object(a), HostValue::Object(b)) => Rc::ptr_eq(a, b),
            (HostValue::Array(a), HostValue::Array(b)) => Rc::ptr_eq(a, b),
            (HostValue::Wrapper(a), HostValue::Wrapper(b)) => Rc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl fmt::Debug for HostValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HostValue::Null => f.write_str("null"),
            HostValue::Bool(b) => write!(f, "{b}"),
            HostValue::Int(i) => write!(f, "{i}"),
            HostValue::Float(x) => write!(f, "{x:?}"),
            HostValue::Text(s) => write!(f, "{s:?}"),
            HostValue::Object(o) => write!(f, "{}@{}", o.class, o.id),
            HostValue::Array(a) => write!(f, "{}[{}]@{}", a.element, a.len(), a.id),
            HostValue::Wrapper(w) => write!(f, "wrapper<{}>@{}", w.target, w.id),
        }
    }
}

impl From<&str> for HostValue {
    fn from(s: &str) -> Self {
        HostValue::Text(s.into())
    }
}

impl From<f64> for HostValue {
    fn from(x: f64) -> Self {
        HostValue::Float(x)
    }
}

impl From<i64> for HostValue {
    fn from(i: i64) -> Self {
        HostValue::Int(i)
    }
}

impl From<bool> for HostValue {
    fn from(b: bool) -> Self {
        HostValue::Bool(b)
    }
}

impl HostValue {
    pub fn as_float(&self) -> Option<f64> {
        match self {
            HostValue::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            HostValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            HostValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_object(&self) -> Option<&ObjRef> {
        match self {
            HostValue::Object(o) => Some(o),
            _ => None,
        }
    }

    /// Dynamic type name, for error messages.
    pub fn describe(&self) -> String {
        match self {
            HostValue::Null => "null".into(),
            HostValue::Bool(_) => "Boolean".into(),
            HostValue::Int(_) => "Integer".into(),
            HostValue::Float(_) => "Float".into(),
            HostValue::Text(_) => "Text".into(),
            HostValue::Object(o) => format!("class {}", o.class),
            HostValue::Array(a) => format!("{}[]", a.element),
            HostValue::Wrapper(w) => format!("wrapper of {}", w.target),
        }
    }
}

pub struct HostObject {
    pub class: Rc<str>,
    pub id: u64,
    fields: RefCell<HashMap<String, HostValue>>,
    /// Native-only state that is not a declared field (listener lists, children).
    pub attachments: RefCell<Vec<HostValue>>,
}

impl HostObject {
    pub(crate) fn new(class: &str, fields: HashMap<String, HostValue>) -> ObjRef {
        Rc::new(HostObject {
            class: class.into(),
            id: next_id(),
            fields: RefCell::new(fields),
            attachments: RefCell::new(Vec::new()),
        })
    }

    /// Unchecked field read for native method bodies.
    pub fn get(&self, field: &str) -> HostValue {
        self.fields.borrow().get(field).cloned().unwrap_or_default()
    }

    /// Unchecked field write for native method bodies. The caller keeps
    /// the value conforming to the field's tag.
    pub fn set(&self, field: &str, value: HostValue) {
        self.fields.borrow_mut().insert(field.to_string(), value);
    }

    pub fn fields(&self) -> Ref<'_, HashMap<String, HostValue>> {
        self.fields.borrow()
    }
}

pub struct HostArray {
    pub element: TypeTag,
    pub id: u64,
    elements: RefCell<Vec<HostValue>>,
}

impl HostArray {
    /// Creates a zero-initialized array.
    pub fn new(element: TypeTag, length: usize) -> ArrayRef {
        let zero = element.zero();
        Rc::new(HostArray {
            element,
            id: next_id(),
            elements: RefCell::new(vec![zero; length]),
        })
    }

    pub fn len(&self) -> usize {
        self.elements.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, index: usize) -> Result<HostValue, HostError> {
        let els = self.elements.borrow();
        els.get(index).cloned().ok_or(HostError::IndexOutOfBounds {
            index: index as i64,
            length: els.len(),
        })
    }

    pub fn set(&self, registry: &Registry, index: usize, value: HostValue) -> Result<(), HostError> {
        if !registry.conforms(&value, &self.element) {
            return Err(HostError::TypeMismatch {
                expected: self.element.to_string(),
                found: value.describe(),
            });
        }
        let mut els = self.elements.borrow_mut();
        let length = els.len();
        let slot = els.get_mut(index).ok_or(HostError::IndexOutOfBounds {
            index: index as i64,
            length,
        })?;
        *slot = value;
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<HostValue> {
        self.elements.borrow().clone()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HostError {
    #[error("class '{0}' not found")]
    ClassNotFound(String),
    #[error("'{0}' is an interface and cannot be instantiated")]
    InterfaceNotInstantiable(String),
    #[error("{class} has no field '{field}'")]
    NoSuchField { class: String, field: String },
    #[error("{class} has no member '{member}'")]
    NoSuchMember { class: String, member: String },
    #[error("expected {expected}, found {found}")]
    TypeMismatch { expected: String, found: String },
    #[error("index {index} out of bounds for length {length}")]
    IndexOutOfBounds { index: i64, length: usize },
    #[error("no overload of {0} matches the arguments")]
    NoMatch(String),
    #[error("ambiguous call to {0}")]
    Ambiguous(String),
    #[error("{0}")]
    Exception(String),
    /// A script error raised while the host was calling back into a script.
    #[error("{0}")]
    Script(Box<ScriptError>),
}

impl From<ScriptError> for HostError {
    fn from(e: ScriptError) -> Self {
        HostError::Script(Box::new(e))
    }
}

impl From<HostError> for ScriptError {
    fn from(e: HostError) -> Self {
        let kind = match &e {
            HostError::Script(inner) => return (**inner).clone(),
            HostError::ClassNotFound(_) => ErrorKind::ClassNotFound,
            HostError::InterfaceNotInstantiable(_) => ErrorKind::InterfaceNotInstantiable,
            HostError::NoSuchField { .. } | HostError::NoSuchMember { .. } => ErrorKind::NoSuchMember,
            HostError::TypeMismatch { .. } => ErrorKind::TypeMismatch,
            HostError::IndexOutOfBounds { .. } => ErrorKind::IndexOutOfBounds,
            HostError::NoMatch(_) => ErrorKind::NoMatch,
            HostError::Ambiguous(_) => ErrorKind::Ambiguous,
            HostError::Exception(_) => ErrorKind::HostException,
        };
        ScriptError::new(kind, e.to_string())
    }
}

impl From<RegistryError> for HostError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::ClassNotFound(n) => HostError::ClassNotFound(n),
            other => HostError::Exception(other.to_string()),
        }
    }
}

/// Per-interpreter host state: the shared registry plus mutable statics.
pub struct HostWorld {
    pub registry: Arc<Registry>,
    statics: HashMap<(String, String), HostValue>,
}

impl HostWorld {
    pub fn new(registry: Arc<Registry>) -> Self {
        HostWorld {
            registry,
            statics: HashMap::new(),
        }
    }
}

/// What native method bodies see of their surroundings.
pub trait HostContext {
    fn world(&mut self) -> &mut HostWorld;

    /// Virtual call on a host value. Wrappers forward to their script table.
    fn call_method(
        &mut self,
        target: &HostValue,
        name: &str,
        args: Vec<HostValue>,
    ) -> Result<HostValue, HostError>;
}

impl HostContext for HostWorld {
    fn world(&mut self) -> &mut HostWorld {
        self
    }

    fn call_method(
        &mut self,
        target: &HostValue,
        name: &str,
        args: Vec<HostValue>,
    ) -> Result<HostValue, HostError> {
        if let HostValue::Wrapper(_) = target {
            return Err(HostError::Exception(format!(
                "cannot call '{name}' on a script wrapper without an interpreter"
            )));
        }
        call_object_method(self, target, name, args)
    }
}

/// Virtual call on a host object: picks the conforming overload on the
/// object's dynamic class and runs it.
pub fn call_object_method(
    ctx: &mut dyn HostContext,
    target: &HostValue,
    name: &str,
    args: Vec<HostValue>,
) -> Result<HostValue, HostError> {
    match target {
        HostValue::Object(obj) => {
            let registry = ctx.world().registry.clone();
            let desc = registry.lookup_class(&obj.class)?;
            let method = select_host_method(&registry, &desc, name, &args)?.clone();
            invoke(ctx, &method, Some(target), args)
        }
        other => Err(HostError::TypeMismatch {
            expected: "object".into(),
            found: other.describe(),
        }),
    }
}

/// Finds the instance method `name` whose parameters the host arguments
/// conform to exactly.
pub fn select_host_method<'d>(
    registry: &Registry,
    desc: &'d ClassDescriptor,
    name: &str,
    args: &[HostValue],
) -> Result<&'d MethodDescriptor, HostError> {
    let cands = desc.methods.get(name).ok_or_else(|| HostError::NoSuchMember {
        class: desc.name.clone(),
        member: name.to_string(),
    })?;
    pick_conforming(registry, cands, args, || format!("{}.{name}", desc.name))
}

fn pick_conforming<'d>(
    registry: &Registry,
    cands: &'d [MethodDescriptor],
    args: &[HostValue],
    label: impl Fn() -> String,
) -> Result<&'d MethodDescriptor, HostError> {
    let mut viable = cands.iter().filter(|m| {
        m.params.len() == args.len()
            && m.params.iter().zip(args).all(|(t, a)| registry.conforms(a, t))
    });
    match (viable.next(), viable.next()) {
        (Some(m), None) => Ok(m),
        (None, _) => Err(HostError::NoMatch(label())),
        (Some(_), Some(_)) => Err(HostError::Ambiguous(label())),
    }
}

/// Creates an instance of `name` from host-side arguments.
pub fn instantiate(
    ctx: &mut dyn HostContext,
    name: &str,
    args: Vec<HostValue>,
) -> Result<ObjRef, HostError> {
    let registry = ctx.world().registry.clone();
    let desc = registry.lookup_class(name)?;
    if desc.kind == ClassKind::Interface {
        return Err(HostError::InterfaceNotInstantiable(name.to_string()));
    }
    let ctor = pick_conforming(&registry, &desc.constructors, &args, || format!("{name}.<init>"))?;
    construct(ctx, &desc, ctor, args)
}

/// Allocates an object with declared initial field values, then runs `ctor`.
pub fn construct(
    ctx: &mut dyn HostContext,
    desc: &ClassDescriptor,
    ctor: &MethodDescriptor,
    args: Vec<HostValue>,
) -> Result<ObjRef, HostError> {
    if desc.kind == ClassKind::Interface {
        return Err(HostError::InterfaceNotInstantiable(desc.name.clone()));
    }
    let fields = desc
        .fields
        .iter()
        .filter(|(_, f)| !f.is_static)
        .map(|(name, f)| (name.clone(), f.initial_value()))
        .collect();
    let obj = HostObject::new(&desc.name, fields);
    invoke(ctx, ctor, Some(&HostValue::Object(obj.clone())), args)?;
    Ok(obj)
}

/// Runs a method body. Arguments must already conform to the parameter tags.
pub fn invoke(
    ctx: &mut dyn HostContext,
    method: &MethodDescriptor,
    receiver: Option<&HostValue>,
    args: Vec<HostValue>,
) -> Result<HostValue, HostError> {
    let body = method.body.as_ref().ok_or_else(|| {
        HostError::Exception(format!("{}.{} has no body", method.owner, method.name))
    })?;
    if args.len() != method.params.len() {
        return Err(HostError::NoMatch(format!("{}.{}", method.owner, method.name)));
    }
    if method.is_static != receiver.is_none() {
        return Err(HostError::Exception(format!(
            "{}.{}: receiver {}",
            method.owner,
            method.name,
            if method.is_static { "given to a static method" } else { "missing" }
        )));
    }
    let result = body(ctx, receiver, &args)?;
    if cfg!(debug_assertions) {
        let registry = ctx.world().registry.clone();
        if let Some(HostValue::Object(obj)) = receiver {
            debug_assert!(
                registry.object_conforms(obj),
                "{} violates its descriptor after {}",
                obj.class,
                method.name
            );
        }
        debug_assert!(
            method.returns == TypeTag::Void || registry.conforms(&result, &method.returns),
            "{}.{} returned {} for {}",
            method.owner,
            method.name,
            result.describe(),
            method.returns
        );
    }
    if method.returns == TypeTag::Void {
        return Ok(HostValue::Null);
    }
    Ok(result)
}

/// Where a field lives: on an instance, or statically on a class.
#[derive(Clone, Copy)]
pub enum FieldOwner<'a> {
    Object(&'a ObjRef),
    Class(&'a str),
}

fn field_spec<'r>(
    registry: &'r Registry,
    owner: FieldOwner<'_>,
    field: &str,
) -> Result<(Arc<ClassDescriptor>, FieldSpec), HostError> {
    let (class, want_static) = match owner {
        FieldOwner::Object(o) => (&*o.class, false),
        FieldOwner::Class(c) => (c, true),
    };
    let desc = registry.lookup_class(class)?;
    let spec = desc
        .fields
        .get(field)
        .filter(|f| f.is_static == want_static)
        .cloned()
        .ok_or_else(|| HostError::NoSuchField {
            class: class.to_string(),
            field: field.to_string(),
        })?;
    Ok((desc, spec))
}

pub fn get_field(world: &mut HostWorld, owner: FieldOwner<'_>, field: &str) -> Result<HostValue, HostError> {
    let (desc, spec) = field_spec(&world.registry, owner, field)?;
    Ok(match owner {
        FieldOwner::Object(o) => o.get(field),
        FieldOwner::Class(_) => world
            .statics
            .entry((desc.name.clone(), field.to_string()))
            .or_insert_with(|| spec.initial_value())
            .clone(),
    })
}

pub fn set_field(
    world: &mut HostWorld,
    owner: FieldOwner<'_>,
    field: &str,
    value: HostValue,
) -> Result<(), HostError> {
    let (desc, spec) = field_spec(&world.registry, owner, field)?;
    if !world.registry.conforms(&value, &spec.tag) {
        return Err(HostError::TypeMismatch {
            expected: spec.tag.to_string(),
            found: value.describe(),
        });
    }
    match owner {
        FieldOwner::Object(o) => o.set(field, value),
        FieldOwner::Class(_) => {
            world.statics.insert((desc.name.clone(), field.to_string()), value);
        }
    }
    Ok(())
}
