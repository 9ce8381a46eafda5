use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::{HostContext, HostError, HostObject, HostValue, Literal, TypeTag};

pub type NativeBody = Arc<
    dyn Fn(&mut dyn HostContext, Option<&HostValue>, &[HostValue]) -> Result<HostValue, HostError>
        + Send
        + Sync,
>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    Class,
    Interface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub tag: TypeTag,
    pub is_static: bool,
    pub initial: Literal,
}

impl FieldSpec {
    pub fn initial_value(&self) -> HostValue {
        self.initial.to_host(&self.tag).unwrap_or_else(|| self.tag.zero())
    }
}

#[derive(Clone)]
pub struct MethodDescriptor {
    pub name: String,
    /// Class that declares this method.
    pub owner: String,
    pub params: Vec<TypeTag>,
    pub returns: TypeTag,
    pub is_static: bool,
    pub body: Option<NativeBody>,
}

impl MethodDescriptor {
    pub fn same_signature(&self, other: &MethodDescriptor) -> bool {
        self.name == other.name && self.params == other.params
    }

    pub fn signature(&self) -> String {
        let params: Vec<String> = self.params.iter().map(ToString::to_string).collect();
        format!("{}.{}({})", self.owner, self.name, params.join(", "))
    }
}

impl fmt::Debug for MethodDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.signature(), self.returns)?;
        if self.is_static {
            f.write_str(" [static]")?;
        }
        Ok(())
    }
}

impl PartialEq for MethodDescriptor {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.owner == other.owner
            && self.params == other.params
            && self.returns == other.returns
            && self.is_static == other.is_static
            && match (&self.body, &other.body) {
                (Some(a), Some(b)) => Arc::ptr_eq(a, b),
                (None, None) => true,
                _ => false,
            }
    }
}

/// Reflective description of a host class or interface.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDescriptor {
    pub name: String,
    pub kind: ClassKind,
    pub base: Option<String>,
    pub fields: BTreeMap<String, FieldSpec>,
    pub methods: BTreeMap<String, Vec<MethodDescriptor>>,
    pub constructors: Vec<MethodDescriptor>,
}

fn body<F>(f: F) -> NativeBody
where
    F: Fn(&mut dyn HostContext, Option<&HostValue>, &[HostValue]) -> Result<HostValue, HostError>
        + Send
        + Sync
        + 'static,
{
    Arc::new(f)
}

impl ClassDescriptor {
    pub fn class(name: &str) -> Self {
        Self::empty(name, ClassKind::Class)
    }

    pub fn interface(name: &str) -> Self {
        Self::empty(name, ClassKind::Interface)
    }

    fn empty(name: &str, kind: ClassKind) -> Self {
        ClassDescriptor {
            name: name.to_string(),
            kind,
            base: None,
            fields: BTreeMap::new(),
            methods: BTreeMap::new(),
            constructors: Vec::new(),
        }
    }

    pub fn extends(mut self, base: &str) -> Self {
        self.base = Some(base.to_string());
        self
    }

    pub fn field(mut self, name: &str, tag: TypeTag, initial: impl Into<Literal>) -> Self {
        self.fields.insert(
            name.to_string(),
            FieldSpec {
                tag,
                is_static: false,
                initial: initial.into(),
            },
        );
        self
    }

    pub fn static_field(mut self, name: &str, tag: TypeTag, initial: impl Into<Literal>) -> Self {
        self.fields.insert(
            name.to_string(),
            FieldSpec {
                tag,
                is_static: true,
                initial: initial.into(),
            },
        );
        self
    }

    fn push_method(mut self, name: &str, params: Vec<TypeTag>, returns: TypeTag, is_static: bool, b: Option<NativeBody>) -> Self {
        let m = MethodDescriptor {
            name: name.to_string(),
            owner: self.name.clone(),
            params,
            returns,
            is_static,
            body: b,
        };
        self.methods.entry(name.to_string()).or_default().push(m);
        self
    }

    pub fn method<F>(self, name: &str, params: Vec<TypeTag>, returns: TypeTag, f: F) -> Self
    where
        F: Fn(&mut dyn HostContext, Option<&HostValue>, &[HostValue]) -> Result<HostValue, HostError>
            + Send
            + Sync
            + 'static,
    {
        self.push_method(name, params, returns, false, Some(body(f)))
    }

    pub fn static_method<F>(self, name: &str, params: Vec<TypeTag>, returns: TypeTag, f: F) -> Self
    where
        F: Fn(&mut dyn HostContext, Option<&HostValue>, &[HostValue]) -> Result<HostValue, HostError>
            + Send
            + Sync
            + 'static,
    {
        self.push_method(name, params, returns, true, Some(body(f)))
    }

    /// Declares a method with an already-built descriptor body (or none, for interfaces).
    pub fn method_with(self, name: &str, params: Vec<TypeTag>, returns: TypeTag, is_static: bool, b: Option<NativeBody>) -> Self {
        self.push_method(name, params, returns, is_static, b)
    }

    /// Interface method: signature only.
    pub fn abstract_method(self, name: &str, params: Vec<TypeTag>, returns: TypeTag) -> Self {
        self.push_method(name, params, returns, false, None)
    }

    pub fn constructor<F>(mut self, params: Vec<TypeTag>, f: F) -> Self
    where
        F: Fn(&mut dyn HostContext, Option<&HostValue>, &[HostValue]) -> Result<HostValue, HostError>
            + Send
            + Sync
            + 'static,
    {
        self.constructors.push(MethodDescriptor {
            name: "<init>".into(),
            owner: self.name.clone(),
            params,
            returns: TypeTag::Void,
            is_static: false,
            body: Some(body(f)),
        });
        self
    }

    /// A no-argument constructor that leaves fields at their initial values.
    pub fn default_constructor(self) -> Self {
        self.constructor(vec![], |_, _, _| Ok(HostValue::Null))
    }

    pub fn constructor_with(mut self, params: Vec<TypeTag>, b: NativeBody) -> Self {
        self.constructors.push(MethodDescriptor {
            name: "<init>".into(),
            owner: self.name.clone(),
            params,
            returns: TypeTag::Void,
            is_static: false,
            body: Some(b),
        });
        self
    }

    pub fn has_default_constructor(&self) -> bool {
        self.constructors.iter().any(|c| c.params.is_empty())
    }

    /// Every instance and static method, flattened into one list.
    pub fn all_methods(&self) -> impl Iterator<Item = &MethodDescriptor> {
        self.methods.values().flatten()
    }
}

/// `derived` laid over `base`: derived fields and same-signature methods
/// shadow the base's. Identity (name, kind, base, constructors) comes from
/// `derived`.
pub fn overlay(derived: &ClassDescriptor, base: &ClassDescriptor) -> ClassDescriptor {
    let mut fields = base.fields.clone();
    for (name, spec) in &derived.fields {
        fields.insert(name.clone(), spec.clone());
    }
    let mut methods = base.methods.clone();
    for (name, overloads) in &derived.methods {
        let slot = methods.entry(name.clone()).or_default();
        for m in overloads {
            match slot.iter_mut().find(|existing| existing.same_signature(m)) {
                Some(existing) => *existing = m.clone(),
                None => slot.push(m.clone()),
            }
        }
    }
    ClassDescriptor {
        name: derived.name.clone(),
        kind: derived.kind,
        base: derived.base.clone(),
        fields,
        methods,
        constructors: derived.constructors.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("class '{0}' is already registered")]
    DuplicateClass(String),
    #[error("class '{class}' names unknown base '{base}'")]
    UnknownBase { class: String, base: String },
    #[error("'{member}' is both a field and a method of '{class}'")]
    FieldMethodNameCollision { class: String, member: String },
    #[error("registry is frozen")]
    RegistryFrozen,
    #[error("registry is not frozen yet")]
    NotFrozen,
    #[error("class '{0}' not found")]
    ClassNotFound(String),
    #[error("'{class}': unknown type '{name}'")]
    UnknownType { class: String, name: String },
    #[error("'{class}': {reason}")]
    Invalid { class: String, reason: String },
}

/// Catalog of host class descriptors.
///
/// Mutable until [`Registry::freeze`]; lookups are only served afterwards.
#[derive(Default)]
pub struct Registry {
    declared: HashMap<String, ClassDescriptor>,
    flat: HashMap<String, Arc<ClassDescriptor>>,
    frozen: bool,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn register_class(&mut self, d: ClassDescriptor) -> Result<(), RegistryError> {
        if self.frozen {
            return Err(RegistryError::RegistryFrozen);
        }
        if self.declared.contains_key(&d.name) {
            return Err(RegistryError::DuplicateClass(d.name));
        }
        let invalid = |reason: &str| RegistryError::Invalid {
            class: d.name.clone(),
            reason: reason.to_string(),
        };
        let flat_base = match &d.base {
            Some(base) => {
                let b = self.declared.get(base).ok_or_else(|| RegistryError::UnknownBase {
                    class: d.name.clone(),
                    base: base.clone(),
                })?;
                if d.kind == ClassKind::Interface && b.kind == ClassKind::Class {
                    return Err(invalid("an interface cannot extend a class"));
                }
                Some(self.flatten(base))
            }
            None => None,
        };

        match d.kind {
            ClassKind::Interface => {
                if !d.fields.is_empty() {
                    return Err(invalid("interfaces cannot declare fields"));
                }
                if !d.constructors.is_empty() {
                    return Err(invalid("interfaces cannot declare constructors"));
                }
                if d.all_methods().any(|m| m.body.is_some() || m.is_static) {
                    return Err(invalid("interface methods cannot have bodies"));
                }
            }
            ClassKind::Class => {
                if d.all_methods().chain(&d.constructors).any(|m| m.body.is_none()) {
                    return Err(invalid("class methods need a native body"));
                }
            }
        }

        for (name, overloads) in &d.methods {
            for (i, m) in overloads.iter().enumerate() {
                if &m.name != name {
                    return Err(invalid(&format!("method '{}' filed under '{name}'", m.name)));
                }
                if overloads[..i].iter().any(|o| o.same_signature(m)) {
                    return Err(invalid(&format!("duplicate overload {}", m.signature())));
                }
            }
        }
        for (i, c) in d.constructors.iter().enumerate() {
            if d.constructors[..i].iter().any(|o| o.params == c.params) {
                return Err(invalid("duplicate constructor signature"));
            }
        }

        // Field/method collisions are checked over the whole chain.
        let merged = match &flat_base {
            Some(b) => overlay(&d, b),
            None => d.clone(),
        };
        if let Some(member) = merged.fields.keys().find(|f| merged.methods.contains_key(*f)) {
            return Err(RegistryError::FieldMethodNameCollision {
                class: d.name.clone(),
                member: member.clone(),
            });
        }

        let tags = d
            .fields
            .values()
            .map(|f| &f.tag)
            .chain(d.all_methods().chain(&d.constructors).flat_map(|m| m.params.iter().chain([&m.returns])));
        for tag in tags {
            if let Some((name, kind)) = tag.referenced_type() {
                let known = if name == d.name {
                    Some(d.kind)
                } else {
                    self.declared.get(name).map(|c| c.kind)
                };
                if known != Some(kind) {
                    return Err(RegistryError::UnknownType {
                        class: d.name.clone(),
                        name: tag.to_string(),
                    });
                }
            }
        }
        for (name, f) in &d.fields {
            if f.initial != Literal::Null && f.initial.to_host(&f.tag).is_none() {
                return Err(invalid(&format!("initial value of '{name}' does not fit {}", f.tag)));
            }
        }

        self.declared.insert(d.name.clone(), d);
        Ok(())
    }

    /// Declared descriptor laid over its flattened base chain.
    fn flatten(&self, name: &str) -> ClassDescriptor {
        let d = &self.declared[name];
        match &d.base {
            Some(base) => overlay(d, &self.flatten(base)),
            None => d.clone(),
        }
    }

    /// Makes the registry read-only. Idempotent.
    pub fn freeze(&mut self) {
        if self.frozen {
            return;
        }
        self.flat = self
            .declared
            .keys()
            .map(|name| (name.clone(), Arc::new(self.flatten(name))))
            .collect();
        self.frozen = true;
    }

    /// Flattened descriptor of `name`.
    pub fn lookup_class(&self, name: &str) -> Result<Arc<ClassDescriptor>, RegistryError> {
        if !self.frozen {
            return Err(RegistryError::NotFrozen);
        }
        self.flat
            .get(name)
            .cloned()
            .ok_or_else(|| RegistryError::ClassNotFound(name.to_string()))
    }

    pub fn class_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.declared.keys().map(String::as_str).collect();
        names.sort_unstable();
        names
    }

    /// True when `sub` is `sup` or inherits from it.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        let mut cur = Some(sub);
        while let Some(name) = cur {
            if name == sup {
                return true;
            }
            cur = self.declared.get(name).and_then(|d| d.base.as_deref());
        }
        false
    }

    /// Number of inheritance steps from `sub` up to `sup`.
    pub fn distance(&self, sub: &str, sup: &str) -> Option<usize> {
        let mut cur = Some(sub);
        let mut steps = 0;
        while let Some(name) = cur {
            if name == sup {
                return Some(steps);
            }
            steps += 1;
            cur = self.declared.get(name).and_then(|d| d.base.as_deref());
        }
        None
    }

    /// Whether a host value may be stored in a slot of type `tag`.
    pub fn conforms(&self, value: &HostValue, tag: &TypeTag) -> bool {
        match (value, tag) {
            (HostValue::Null, t) => t.is_reference(),
            (HostValue::Bool(_), TypeTag::Boolean) => true,
            (HostValue::Int(_), TypeTag::Integer) => true,
            (HostValue::Float(_), TypeTag::Float) => true,
            (HostValue::Text(_), TypeTag::Text) => true,
            (HostValue::Object(o), TypeTag::Class(c) | TypeTag::Interface(c)) => self.is_subtype(&o.class, c),
            (HostValue::Wrapper(w), TypeTag::Class(c) | TypeTag::Interface(c)) => self.is_subtype(&w.target, c),
            (HostValue::Array(a), TypeTag::Array(e)) => a.element == **e,
            _ => false,
        }
    }

    /// The object's fields exactly match its class's instance fields, and
    /// every value conforms to its declared tag.
    pub fn object_conforms(&self, obj: &HostObject) -> bool {
        let Ok(desc) = self.lookup_class(&obj.class) else {
            return false;
        };
        let fields = obj.fields();
        let declared: Vec<_> = desc.fields.iter().filter(|(_, f)| !f.is_static).collect();
        declared.len() == fields.len()
            && declared.iter().all(|(name, spec)| {
                fields
                    .get(*name)
                    .is_some_and(|v| self.conforms(v, &spec.tag))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noop() -> impl Fn(&mut dyn HostContext, Option<&HostValue>, &[HostValue]) -> Result<HostValue, HostError>
           + Send
           + Sync
           + 'static {
        |_, _, _| Ok(HostValue::Null)
    }

    fn point() -> ClassDescriptor {
        ClassDescriptor::class("Point")
            .field("x", TypeTag::Float, 0.0)
            .field("y", TypeTag::Float, 0.0)
            .default_constructor()
            .method("move", vec![TypeTag::Float, TypeTag::Float], TypeTag::Void, noop())
    }

    #[test]
    fn register_point() {
        let mut r = Registry::new();
        r.register_class(point()).unwrap();
        assert_eq!(
            r.register_class(point()),
            Err(RegistryError::DuplicateClass("Point".into()))
        );
        let orphan = ClassDescriptor::class("Orphan").extends("Nope");
        assert!(matches!(r.register_class(orphan), Err(RegistryError::UnknownBase { .. })));
    }

    #[test]
    fn lifecycle() {
        let mut r = Registry::new();
        r.register_class(point()).unwrap();
        assert_eq!(r.lookup_class("Point").unwrap_err(), RegistryError::NotFrozen);
        r.freeze();
        r.freeze();
        assert!(r.is_frozen());
        assert_eq!(
            r.register_class(ClassDescriptor::class("Late")),
            Err(RegistryError::RegistryFrozen)
        );
        assert_eq!(r.lookup_class("Point").unwrap().name, "Point");
        assert_eq!(
            r.lookup_class("ghost.Class").unwrap_err(),
            RegistryError::ClassNotFound("ghost.Class".into())
        );
    }

    #[test]
    fn collisions_rejected_across_chain() {
        let mut r = Registry::new();
        let bad = ClassDescriptor::class("Bad")
            .field("size", TypeTag::Integer, 0i64)
            .method("size", vec![], TypeTag::Integer, noop());
        assert!(matches!(
            r.register_class(bad),
            Err(RegistryError::FieldMethodNameCollision { .. })
        ));
        r.register_class(point()).unwrap();
        let sub = ClassDescriptor::class("Sub")
            .extends("Point")
            .method("x", vec![], TypeTag::Float, noop());
        assert!(matches!(
            r.register_class(sub),
            Err(RegistryError::FieldMethodNameCollision { .. })
        ));
    }

    #[test]
    fn interface_rules() {
        let mut r = Registry::new();
        let with_field = ClassDescriptor::interface("I").field("f", TypeTag::Integer, 0i64);
        assert!(matches!(r.register_class(with_field), Err(RegistryError::Invalid { .. })));
        let with_body = ClassDescriptor::interface("I").method("m", vec![], TypeTag::Void, noop());
        assert!(matches!(r.register_class(with_body), Err(RegistryError::Invalid { .. })));
        let ok = ClassDescriptor::interface("I").abstract_method("m", vec![], TypeTag::Void);
        r.register_class(ok).unwrap();
    }

    #[test]
    fn duplicate_overload_rejected() {
        let mut r = Registry::new();
        let dup = ClassDescriptor::class("D")
            .method("f", vec![TypeTag::Integer], TypeTag::Void, noop())
            .method("f", vec![TypeTag::Integer], TypeTag::Void, noop());
        assert!(matches!(r.register_class(dup), Err(RegistryError::Invalid { .. })));
    }

    #[test]
    fn unknown_type_references() {
        let mut r = Registry::new();
        let d = ClassDescriptor::class("Holder").field("p", TypeTag::class("Point"), Literal::Null);
        assert!(matches!(r.register_class(d.clone()), Err(RegistryError::UnknownType { .. })));
        r.register_class(point()).unwrap();
        r.register_class(d).unwrap();
        // Naming a class where an interface is expected is also rejected.
        let wrong_kind = ClassDescriptor::class("W").field("p", TypeTag::interface("Point"), Literal::Null);
        assert!(matches!(r.register_class(wrong_kind), Err(RegistryError::UnknownType { .. })));
        // Self references are fine.
        let linked = ClassDescriptor::class("Node").field("next", TypeTag::class("Node"), Literal::Null);
        r.register_class(linked).unwrap();
    }

    #[test]
    fn lookup_flattens_two_level_chain() {
        let mut r = Registry::new();
        r.register_class(
            ClassDescriptor::class("B")
                .field("b", TypeTag::Integer, 1i64)
                .method("f", vec![], TypeTag::Integer, noop())
                .method("g", vec![], TypeTag::Integer, noop()),
        )
        .unwrap();
        r.register_class(
            ClassDescriptor::class("D")
                .extends("B")
                .field("d", TypeTag::Integer, 2i64)
                .method("g", vec![], TypeTag::Integer, noop())
                .method("h", vec![TypeTag::Text], TypeTag::Void, noop()),
        )
        .unwrap();
        r.freeze();
        let d = r.lookup_class("D").unwrap();
        assert!(d.fields.contains_key("b") && d.fields.contains_key("d"));
        assert_eq!(d.methods["f"][0].owner, "B");
        assert_eq!(d.methods["g"].len(), 1);
        assert_eq!(d.methods["g"][0].owner, "D");
        assert_eq!(d.methods["h"][0].owner, "D");
        assert!(r.is_subtype("D", "B"));
        assert!(!r.is_subtype("B", "D"));
        assert_eq!(r.distance("D", "B"), Some(1));
    }
}
