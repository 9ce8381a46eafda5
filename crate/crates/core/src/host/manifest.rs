//! Declarative class manifests.
//!
//! A manifest is a JSON array with one record per class. Signatures come
//! from the record; bodies are looked up by signature key in a
//! [`NativeLibrary`], since method bodies are always native code.
//!
//! ```json
//! [{"name": "Point", "kind": "class",
//!   "fields": [{"name": "x", "type": "Float", "initial": 0}],
//!   "constructors": [[]],
//!   "methods": [{"name": "move", "params": ["Float", "Float"], "returns": "Void"}]}]
//! ```

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ClassDescriptor, ClassKind, Literal, NativeBody, Registry, RegistryError, TypeTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub name: String,
    pub kind: ClassKind,
    #[serde(default)]
    pub base: Option<String>,
    #[serde(default)]
    pub fields: Vec<FieldRecord>,
    /// Parameter lists, one per constructor.
    #[serde(default)]
    pub constructors: Vec<Vec<TypeTag>>,
    #[serde(default)]
    pub methods: Vec<MethodRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub name: String,
    #[serde(rename = "type")]
    pub tag: TypeTag,
    #[serde(default, rename = "static")]
    pub is_static: bool,
    #[serde(default)]
    pub initial: Literal,
}

fn void() -> TypeTag {
    TypeTag::Void
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub name: String,
    #[serde(default)]
    pub params: Vec<TypeTag>,
    #[serde(default = "void")]
    pub returns: TypeTag,
    #[serde(default, rename = "static")]
    pub is_static: bool,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("malformed manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("no native body bound for {0}")]
    MissingBody(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

/// Key under which a native body is bound: `Class.method(T1,T2)`.
/// Constructors use the method name `<init>`.
pub fn signature_key(class: &str, method: &str, params: &[TypeTag]) -> String {
    let params: Vec<String> = params.iter().map(ToString::to_string).collect();
    format!("{class}.{method}({})", params.join(","))
}

/// Native bodies keyed by [`signature_key`].
#[derive(Default, Clone)]
pub struct NativeLibrary {
    bodies: HashMap<String, NativeBody>,
}

impl NativeLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, key: impl Into<String>, body: NativeBody) -> &mut Self {
        self.bodies.insert(key.into(), body);
        self
    }

    pub fn get(&self, key: &str) -> Option<&NativeBody> {
        self.bodies.get(key)
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }
}

pub fn parse_manifest(json: &str) -> Result<Vec<ClassRecord>, ManifestError> {
    Ok(serde_json::from_str(json)?)
}

/// Builds a descriptor from a record, binding bodies from `natives`.
pub fn build_descriptor(record: &ClassRecord, natives: &NativeLibrary) -> Result<ClassDescriptor, ManifestError> {
    let mut d = match record.kind {
        ClassKind::Class => ClassDescriptor::class(&record.name),
        ClassKind::Interface => ClassDescriptor::interface(&record.name),
    };
    if let Some(base) = &record.base {
        d = d.extends(base);
    }
    for f in &record.fields {
        let initial: Literal = f.initial.clone();
        d = if f.is_static {
            d.static_field(&f.name, f.tag.clone(), initial)
        } else {
            d.field(&f.name, f.tag.clone(), initial)
        };
    }
    let lookup = |method: &str, params: &[TypeTag]| {
        let key = signature_key(&record.name, method, params);
        natives.get(&key).cloned().ok_or(ManifestError::MissingBody(key))
    };
    for params in &record.constructors {
        d = d.constructor_with(params.clone(), lookup("<init>", params)?);
    }
    for m in &record.methods {
        let body = match record.kind {
            ClassKind::Interface => None,
            ClassKind::Class => Some(lookup(&m.name, &m.params)?),
        };
        d = d.method_with(&m.name, m.params.clone(), m.returns.clone(), m.is_static, body);
    }
    Ok(d)
}

/// Registers every class in the manifest, in order.
pub fn load_manifest(json: &str, natives: &NativeLibrary, registry: &mut Registry) -> Result<usize, ManifestError> {
    let records = parse_manifest(json)?;
    for record in &records {
        registry.register_class(build_descriptor(record, natives)?)?;
    }
    Ok(records.len())
}
