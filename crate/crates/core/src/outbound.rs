//! Script-side access to host objects.
//!
//! A proxy is an ordinary table whose only raw entry is the reserved
//! `__hostref` field, with index and newindex fallbacks shared by every proxy
//! of an interpreter. Reading an absent member asks the registry: fields are
//! read live each time, methods yield a dispatcher function that stores
//! itself on the proxy after its first call, so later lookups never reach
//! the fallback.

use std::collections::HashMap;
use std::rc::{Rc, Weak};
use std::sync::Arc;

use crate::builtins::{arg, bad_arg};
use crate::convert::{self, ConversionResult, OverloadDecision};
use crate::error::{ErrorKind, Result, ScriptError};
use crate::host::{self, ArrayRef, ClassDescriptor, FieldOwner, HostError, HostValue, MethodDescriptor, ObjRef, TypeTag};
use crate::interp::Interpreter;
use crate::value::{FallbackKind, Function, HostRef, NativeFunction, TableRef, Value, WeakTableRef, HOSTREF_FIELD};

/// Counters for observing the dispatch cache.
#[derive(Debug, Default, Clone)]
pub struct DispatchStats {
    fallbacks: HashMap<(u64, String), u64>,
    dispatches: u64,
}

impl DispatchStats {
    /// How often the index fallback fired for `name` on the given proxy.
    pub fn fallback_count(&self, proxy: &TableRef, name: &str) -> u64 {
        self.fallbacks.get(&(proxy.id(), name.to_string())).copied().unwrap_or(0)
    }

    pub fn total_fallbacks(&self) -> u64 {
        self.fallbacks.values().sum()
    }

    /// Number of dispatcher invocations.
    pub fn dispatches(&self) -> u64 {
        self.dispatches
    }
}

pub(crate) struct ProxyState {
    objects: HashMap<u64, WeakTableRef>,
    arrays: HashMap<u64, WeakTableRef>,
    classes: HashMap<Rc<str>, WeakTableRef>,
    /// Cache size after the last sweep of dead entries.
    swept_at: usize,
    pub(crate) stats: DispatchStats,
    index_handler: Rc<Function>,
    newindex_handler: Rc<Function>,
}

impl ProxyState {
    pub(crate) fn new() -> Self {
        ProxyState {
            objects: HashMap::new(),
            arrays: HashMap::new(),
            classes: HashMap::new(),
            swept_at: 64,
            stats: DispatchStats::default(),
            index_handler: Function::native("proxy index", |it, args| {
                let proxy = proxy_arg(&args)?;
                Ok(vec![proxy_index(it, &proxy, &arg(&args, 1))?])
            }),
            newindex_handler: Function::native("proxy newindex", |it, args| {
                let proxy = proxy_arg(&args)?;
                proxy_newindex(it, &proxy, &arg(&args, 1), arg(&args, 2))?;
                Ok(vec![])
            }),
        }
    }
}

fn proxy_arg(args: &[Value]) -> Result<TableRef> {
    match arg(args, 0) {
        Value::Table(t) => Ok(t),
        other => Err(bad_arg("proxy handler", 1, "table", &other)),
    }
}

impl Interpreter {
    pub fn dispatch_stats(&self) -> &DispatchStats {
        &self.proxies.stats
    }

    pub fn reset_dispatch_stats(&mut self) {
        self.proxies.stats = DispatchStats::default();
    }
}

pub(crate) fn install(it: &mut Interpreter) {
    for name in ["hostNewInstance", "javaNewInstance"] {
        it.register_native(name, |it, args| {
            let class = class_name_arg("hostNewInstance", &args)?;
            Ok(vec![Value::Table(host_new_instance(it, &class, &args[1..])?)])
        });
    }
    for name in ["hostBindClass", "javaBindClass"] {
        it.register_native(name, |it, args| {
            let class = class_name_arg("hostBindClass", &args)?;
            Ok(vec![Value::Table(host_bind_class(it, &class)?)])
        });
    }
}

fn class_name_arg(func: &str, args: &[Value]) -> Result<Rc<str>> {
    match arg(args, 0) {
        Value::Str(s) => Ok(s),
        other => Err(bad_arg(func, 1, "string", &other)),
    }
}

fn lookup(it: &Interpreter, class: &str) -> Result<Arc<ClassDescriptor>> {
    Ok(it.registry().lookup_class(class).map_err(HostError::from)?)
}

/// Instantiates `class` with the constructor chosen by overload resolution
/// and returns its proxy.
pub fn host_new_instance(it: &mut Interpreter, class: &str, args: &[Value]) -> Result<TableRef> {
    let desc = lookup(it, class)?;
    if desc.kind == host::ClassKind::Interface {
        return Err(HostError::InterfaceNotInstantiable(class.to_string()).into());
    }
    let label = format!("{class}.<init>");
    let (ctor, args) = resolve(it, &desc.constructors, args, &label)?;
    let obj = host::construct(it, &desc, &ctor, args)?;
    Ok(proxy_for(it, HostRef::Object(obj)))
}

/// Proxy exposing the static members of `class`.
pub fn host_bind_class(it: &mut Interpreter, class: &str) -> Result<TableRef> {
    let desc = lookup(it, class)?;
    Ok(proxy_for(it, HostRef::Class(desc.name.as_str().into())))
}

fn resolve(
    it: &mut Interpreter,
    cands: &[MethodDescriptor],
    args: &[Value],
    label: &str,
) -> Result<(MethodDescriptor, Vec<HostValue>)> {
    match convert::select_overload(it, cands, args)? {
        OverloadDecision::Selected { method, args } => Ok((method, args)),
        OverloadDecision::NoMatch => Err(ScriptError::new(
            ErrorKind::NoMatch,
            format!(
                "no overload of {label} accepts ({})",
                args.iter().map(Value::type_name).collect::<Vec<_>>().join(", ")
            ),
        )),
        OverloadDecision::Ambiguous(ms) => Err(ScriptError::new(
            ErrorKind::Ambiguous,
            format!(
                "ambiguous call to {label}: {}",
                ms.iter().map(MethodDescriptor::signature).collect::<Vec<_>>().join(" vs ")
            ),
        )),
    }
}

/// The proxy for a host entity, created on first use and cached by
/// identity so the same object always maps to the same table.
pub fn proxy_for(it: &mut Interpreter, href: HostRef) -> TableRef {
    let state = &mut it.proxies;
    let cached = match &href {
        HostRef::Object(o) => state.objects.get(&o.id),
        HostRef::Array(a) => state.arrays.get(&a.id),
        HostRef::Class(c) => state.classes.get(c),
        HostRef::Wrapper(w) => return w.script.clone(),
    };
    if let Some(t) = cached.and_then(WeakTableRef::upgrade) {
        return t;
    }
    let t = TableRef::new();
    t.set_fallback(FallbackKind::Index, Some(state.index_handler.clone()));
    t.set_fallback(FallbackKind::NewIndex, Some(state.newindex_handler.clone()));
    let weak = t.downgrade();
    match &href {
        HostRef::Object(o) => {
            state.objects.insert(o.id, weak);
        }
        HostRef::Array(a) => {
            state.arrays.insert(a.id, weak);
        }
        HostRef::Class(c) => {
            state.classes.insert(c.clone(), weak);
        }
        HostRef::Wrapper(_) => unreachable!(),
    }
    let size = state.objects.len() + state.arrays.len();
    if size > 2 * state.swept_at {
        state.objects.retain(|_, w| w.upgrade().is_some());
        state.arrays.retain(|_, w| w.upgrade().is_some());
        state.swept_at = (state.objects.len() + state.arrays.len()).max(64);
    }
    t.raw_set_str(HOSTREF_FIELD, Value::Host(href));
    t
}

fn no_member(class: &str, member: &Value) -> ScriptError {
    HostError::NoSuchMember {
        class: class.to_string(),
        member: member.to_string(),
    }
    .into()
}

fn host_ref(proxy: &TableRef) -> Result<HostRef> {
    proxy
        .host_ref()
        .ok_or_else(|| ScriptError::runtime("table is not a host proxy"))
}

/// Index fallback: resolves an absent member of a proxy.
pub fn proxy_index(it: &mut Interpreter, proxy: &TableRef, key: &Value) -> Result<Value> {
    let href = host_ref(proxy)?;
    if let Value::Str(name) = key {
        *it.proxies
            .stats
            .fallbacks
            .entry((proxy.id(), name.to_string()))
            .or_default() += 1;
    }
    match href {
        HostRef::Array(a) => array_index(it, &a, key),
        HostRef::Object(o) => member(it, proxy, &o.class.clone(), Some(&o), key),
        HostRef::Class(c) => member(it, proxy, &c, None, key),
        HostRef::Wrapper(_) => Err(ScriptError::runtime("wrapper handles have no members")),
    }
}

fn member(it: &mut Interpreter, proxy: &TableRef, class: &str, obj: Option<&ObjRef>, key: &Value) -> Result<Value> {
    let Value::Str(name) = key else {
        return Err(no_member(class, key));
    };
    let want_static = obj.is_none();
    let desc = lookup(it, class)?;
    if desc.fields.get(&**name).is_some_and(|f| f.is_static == want_static) {
        let owner = match obj {
            Some(o) => FieldOwner::Object(o),
            None => FieldOwner::Class(class),
        };
        let h = host::get_field(&mut it.world, owner, name)?;
        return Ok(convert::to_script(it, &h));
    }
    let cands: Vec<MethodDescriptor> = desc
        .methods
        .get(&**name)
        .map(|ms| ms.iter().filter(|m| m.is_static == want_static).cloned().collect())
        .unwrap_or_default();
    if cands.is_empty() {
        return Err(no_member(class, key));
    }
    Ok(Value::Function(dispatcher(proxy, class, name.clone(), cands, want_static)))
}

/// Builds the function that forwards calls of `name` on `proxy` to the host.
fn dispatcher(proxy: &TableRef, class: &str, name: Rc<str>, cands: Vec<MethodDescriptor>, is_static: bool) -> Rc<Function> {
    let proxy = proxy.downgrade();
    let label = format!("{class}.{name}");
    let class: Rc<str> = class.into();
    Rc::new_cyclic(move |me: &Weak<Function>| {
        let me = me.clone();
        Function::Native(NativeFunction {
            name: label.clone(),
            f: Box::new(move |it, args| {
                let result = dispatch(it, &class, &label, &cands, is_static, args);
                // Cache on the proxy whether or not the call succeeded.
                if let (Some(p), Some(f)) = (proxy.upgrade(), me.upgrade()) {
                    p.raw_set_str(&name, Value::Function(f));
                }
                result
            }),
        })
    })
}

fn dispatch(
    it: &mut Interpreter,
    class: &str,
    label: &str,
    cands: &[MethodDescriptor],
    is_static: bool,
    mut args: Vec<Value>,
) -> Result<Vec<Value>> {
    it.proxies.stats.dispatches += 1;
    let receiver = if is_static {
        // `Class:method(...)` passes the class proxy itself first.
        if let Some(Value::Table(t)) = args.first() {
            if matches!(t.host_ref(), Some(HostRef::Class(c)) if &*c == class) {
                args.remove(0);
            }
        }
        None
    } else {
        let recv = if args.is_empty() { Value::Nil } else { args.remove(0) };
        match recv.as_table().and_then(TableRef::host_ref) {
            Some(HostRef::Object(o)) if it.registry().is_subtype(&o.class, class) => Some(HostValue::Object(o)),
            _ => {
                return Err(ScriptError::new(
                    ErrorKind::ReceiverMismatch,
                    format!("{label} needs a {class} receiver, got {} (use ':' to call methods)", recv.type_name()),
                ))
            }
        }
    };
    let registry = it.registry().clone();
    let (method, host_args) = match cands {
        [only] if convert::score_candidate(&registry, &only.params, &args).is_some() => {
            (only.clone(), convert::convert_args(it, &only.params, &args)?)
        }
        _ => resolve(it, cands, &args, label)?,
    };
    let out = host::invoke(it, &method, receiver.as_ref(), host_args)?;
    if method.returns == TypeTag::Void {
        return Ok(vec![]);
    }
    Ok(vec![convert::to_script(it, &out)])
}

fn array_slot(a: &ArrayRef, key: &Value) -> Result<usize> {
    let out_of_bounds = |index: i64| -> ScriptError {
        HostError::IndexOutOfBounds {
            index,
            length: a.len(),
        }
        .into()
    };
    match key {
        Value::Number(n) if n.fract() == 0.0 => {
            if *n >= 1.0 && *n <= a.len() as f64 {
                Ok(*n as usize - 1)
            } else {
                Err(out_of_bounds(*n as i64))
            }
        }
        Value::Number(_) => Err(ScriptError::new(ErrorKind::IndexOutOfBounds, format!("non-integral index {key}"))),
        other => Err(no_member(&format!("{}[]", a.element), other)),
    }
}

fn array_index(it: &mut Interpreter, a: &ArrayRef, key: &Value) -> Result<Value> {
    if key.as_str() == Some("length") {
        return Ok(Value::Number(a.len() as f64));
    }
    let slot = array_slot(a, key)?;
    let h = a.get(slot)?;
    Ok(convert::to_script(it, &h))
}

/// Newindex fallback: every script write to a proxy lands here.
pub fn proxy_newindex(it: &mut Interpreter, proxy: &TableRef, key: &Value, value: Value) -> Result<()> {
    if key.as_str() == Some(HOSTREF_FIELD) {
        return Err(ScriptError::new(
            ErrorKind::ReservedField,
            format!("'{HOSTREF_FIELD}' is reserved on host proxies"),
        ));
    }
    let href = host_ref(proxy)?;
    let (class, obj): (Rc<str>, Option<ObjRef>) = match href {
        HostRef::Array(a) => {
            let slot = array_slot(&a, key)?;
            let h = convert_for_slot(it, &value, &a.element)?;
            let registry = it.registry().clone();
            return Ok(a.set(&registry, slot, h)?);
        }
        HostRef::Object(o) => (o.class.clone(), Some(o)),
        HostRef::Class(c) => (c, None),
        HostRef::Wrapper(_) => return Err(ScriptError::runtime("wrapper handles have no members")),
    };
    let Value::Str(name) = key else {
        return Err(no_member(&class, key));
    };
    let want_static = obj.is_none();
    let desc = lookup(it, &class)?;
    if let Some(f) = desc.fields.get(&**name).filter(|f| f.is_static == want_static) {
        let h = convert_for_slot(it, &value, &f.tag)?;
        let owner = match &obj {
            Some(o) => FieldOwner::Object(o),
            None => FieldOwner::Class(&class),
        };
        return Ok(host::set_field(&mut it.world, owner, name, h)?);
    }
    if desc.methods.contains_key(&**name) {
        return Err(ScriptError::new(
            ErrorKind::TypeMismatch,
            format!("cannot assign to method {class}.{name}"),
        ));
    }
    Err(no_member(&class, key))
}

fn convert_for_slot(it: &mut Interpreter, value: &Value, tag: &TypeTag) -> Result<HostValue> {
    match convert::to_host(it, value, tag)? {
        ConversionResult::Converted(h, _) => Ok(h),
        ConversionResult::Incompatible(why) => Err(ScriptError::new(ErrorKind::TypeMismatch, why)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::host::HostArray;

    fn demo() -> Interpreter {
        Interpreter::with_demo_classes()
    }

    fn kind(it: &mut Interpreter, src: &str) -> ErrorKind {
        it.exec(src).unwrap_err().kind
    }

    #[test]
    fn point_script_against_host_object() {
        let mut it = demo();
        let out = it
            .exec(
                "point = hostNewInstance('Point')
                 point:move(2,3)
                 point.x = point.x+1
                 point.y = point.y+1
                 return point.x, point.y",
            )
            .unwrap();
        assert_eq!(out, vec![3.0.into(), 4.0.into()]);
    }

    #[test]
    fn proxy_has_only_the_reserved_entry() {
        let mut it = demo();
        let p = host_new_instance(&mut it, "Point", &[]).unwrap();
        assert_eq!(p.len(), 1);
        assert!(matches!(p.host_ref(), Some(HostRef::Object(_))));
        assert_eq!(it.exec("p = hostNewInstance('Point') return type(p)").unwrap(), vec![Value::str("hostobject")]);
    }

    #[test]
    fn fields_are_read_live() {
        let mut it = demo();
        it.exec("p = hostNewInstance('Point') local _ = p.x").unwrap();
        let p = it.global("p");
        let Some(HostRef::Object(o)) = p.as_table().unwrap().host_ref() else { panic!() };
        o.set("x", HostValue::Float(9.0));
        assert_eq!(it.exec("return p.x").unwrap(), vec![9.0.into()]);
        assert_eq!(p.as_table().unwrap().len(), 1);
    }

    #[test]
    fn dispatcher_is_cached_after_first_call() {
        let mut it = demo();
        it.exec("p = hostNewInstance('Point')").unwrap();
        let p = it.global("p").as_table().unwrap().clone();
        it.exec("p:move(1, 1)").unwrap();
        assert_eq!(it.dispatch_stats().fallback_count(&p, "move"), 1);
        for _ in 0..5 {
            it.exec("p:move(1, 1)").unwrap();
        }
        assert_eq!(it.dispatch_stats().fallback_count(&p, "move"), 1);
        assert_eq!(it.dispatch_stats().dispatches(), 6);
        assert_eq!(it.exec("return p.x").unwrap(), vec![6.0.into()]);
        assert!(matches!(p.raw_get_str("move"), Value::Function(_)));
    }

    #[test]
    fn proxy_identity() {
        let mut it = demo();
        let out = it
            .exec(
                "b = hostNewInstance('demo.Button')
                 l = {}
                 function l:actionPerformed(e) seen = e end
                 b:addActionListener(l)
                 b:press()
                 first = seen
                 b:press()
                 return first == seen, hostBindClass('Point') == hostBindClass('Point')",
            )
            .unwrap();
        // A fresh event each press, but one class proxy per class.
        assert_eq!(out, vec![false.into(), true.into()]);
        let p = host_new_instance(&mut it, "Point", &[]).unwrap();
        let Some(HostRef::Object(o)) = p.host_ref() else { panic!() };
        assert_eq!(proxy_for(&mut it, HostRef::Object(o)), p);
    }

    #[test]
    fn statics_through_class_proxy() {
        let mut it = demo();
        let out = it
            .exec(
                "M = hostBindClass('demo.MathUtil')
                 B = hostBindClass('demo.BorderLayout')
                 return M.twice(4), M:twice(5), B.NORTH, M.describe(2), M.describe(true)",
            )
            .unwrap();
        assert_eq!(
            out,
            vec![8.0.into(), 10.0.into(), Value::str("North"), Value::str("float"), Value::str("boolean")]
        );
        it.exec("M.calls = 3").unwrap();
        assert_eq!(it.exec("return M.calls").unwrap(), vec![3.0.into()]);
    }

    #[test]
    fn overload_errors_surface() {
        let mut it = demo();
        it.exec("M = hostBindClass('demo.MathUtil')").unwrap();
        assert_eq!(kind(&mut it, "M.pick(1, 1)"), ErrorKind::Ambiguous);
        assert_eq!(kind(&mut it, "M.half(1.5)"), ErrorKind::NoMatch);
        assert_eq!(kind(&mut it, "M.twice('x')"), ErrorKind::NoMatch);
        assert_eq!(kind(&mut it, "M.fail('boom')"), ErrorKind::HostException);
        assert_eq!(it.exec("return M.pick(1, 1.5)").unwrap(), vec![Value::str("int-float")]);
    }

    #[test]
    fn member_errors() {
        let mut it = demo();
        it.exec("p = hostNewInstance('Point')").unwrap();
        assert_eq!(kind(&mut it, "return p.nothing"), ErrorKind::NoSuchMember);
        assert_eq!(kind(&mut it, "p.nothing = 1"), ErrorKind::NoSuchMember);
        assert_eq!(kind(&mut it, "p.x = 'abc'"), ErrorKind::TypeMismatch);
        assert_eq!(kind(&mut it, "p.move = 1"), ErrorKind::TypeMismatch);
        assert_eq!(kind(&mut it, "p.__hostref = 1"), ErrorKind::ReservedField);
        assert_eq!(kind(&mut it, "rawset(p, '__hostref', 1)"), ErrorKind::ReservedField);
        assert_eq!(kind(&mut it, "p.move(1, 2)"), ErrorKind::ReceiverMismatch);
        assert_eq!(kind(&mut it, "f = hostNewInstance('demo.Frame') p.move(f, 1, 2)"), ErrorKind::ReceiverMismatch);
        assert_eq!(kind(&mut it, "hostNewInstance('ghost')"), ErrorKind::ClassNotFound);
        assert_eq!(kind(&mut it, "hostNewInstance('demo.ActionListener')"), ErrorKind::InterfaceNotInstantiable);
        assert_eq!(kind(&mut it, "hostBindClass('ghost')"), ErrorKind::ClassNotFound);
        assert_eq!(kind(&mut it, "return hostBindClass('Point').x"), ErrorKind::NoSuchMember);
        assert_eq!(kind(&mut it, "return p.twice"), ErrorKind::NoSuchMember);
    }

    #[test]
    fn subclass_proxies_see_inherited_members() {
        let mut it = demo();
        let out = it
            .exec("p = hostNewInstance('demo.Point3') p:move(1, 2) p:lift(3) return p.x, p.y, p.z")
            .unwrap();
        assert_eq!(out, vec![1.0.into(), 2.0.into(), 3.0.into()]);
    }

    #[test]
    fn arrays_are_one_based() {
        let mut it = demo();
        let out = it
            .exec(
                "A = hostBindClass('demo.Arrays')
                 a = A.newIntArray(3)
                 a[1] = 4 a[3] = 5
                 return a.length, a[1], a[2], a[3], A.sum(a)",
            )
            .unwrap();
        assert_eq!(out, vec![3.0.into(), 4.0.into(), 0.0.into(), 5.0.into(), 9.0.into()]);
        assert_eq!(kind(&mut it, "return a[0]"), ErrorKind::IndexOutOfBounds);
        assert_eq!(kind(&mut it, "return a[4]"), ErrorKind::IndexOutOfBounds);
        assert_eq!(kind(&mut it, "a[4] = 1"), ErrorKind::IndexOutOfBounds);
        assert_eq!(kind(&mut it, "a[1] = 1.5"), ErrorKind::TypeMismatch);
        let arr = HostArray::new(TypeTag::Integer, 2);
        let p1 = proxy_for(&mut it, HostRef::Array(arr.clone()));
        let p2 = proxy_for(&mut it, HostRef::Array(arr));
        assert_eq!(p1, p2);
    }

    #[test]
    fn object_arrays_hold_proxies() {
        let mut it = demo();
        let out = it
            .exec(
                "a = hostBindClass('demo.Arrays').newPointArray(2)
                 p = hostNewInstance('Point')
                 a[2] = p
                 return a[1], a[2] == p",
            )
            .unwrap();
        assert_eq!(out, vec![Value::Nil, true.into()]);
    }

    #[test]
    fn constructors_use_overloads() {
        let mut it = demo();
        let out = it
            .exec("t = hostNewInstance('demo.TextArea', 'hi') u = hostNewInstance('demo.TextArea') return t:getText(), u:getText()")
            .unwrap();
        assert_eq!(out, vec![Value::str("hi"), Value::str("")]);
        assert_eq!(kind(&mut it, "hostNewInstance('demo.TextArea', 1)"), ErrorKind::NoMatch);
    }
}
