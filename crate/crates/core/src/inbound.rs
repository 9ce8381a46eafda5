//! Host-side access to script tables.
//!
//! Exporting a table as a host interface or class yields a wrapper the host
//! can hold and call. Every call looks the method up on the table afresh, so
//! later script edits to the table take effect immediately.

use std::collections::HashMap;
use std::rc::{Rc, Weak};

use crate::builtins::{arg, bad_arg};
use crate::convert::{self, ConversionResult};
use crate::error::{ErrorKind, Result, ScriptError};
use crate::host::{self, ClassKind, HostError, HostValue, ObjRef, TypeTag};
use crate::interp::Interpreter;
use crate::value::{HostRef, TableRef, Value};

/// Name under which a class wrapper exposes its backing host instance.
pub const BASE_FIELD: &str = "__base";

/// A script table presented to the host as an instance of `target`.
pub struct ScriptWrapper {
    pub target: Rc<str>,
    pub script: TableRef,
    /// Host instance supplying inherited behaviour for class targets.
    pub backing: Option<ObjRef>,
    pub id: u64,
}

pub type WrapperRef = Rc<ScriptWrapper>;

#[derive(Default)]
pub(crate) struct WrapperCache {
    map: HashMap<(u64, Rc<str>), Weak<ScriptWrapper>>,
}

pub(crate) fn install(it: &mut Interpreter) {
    for name in ["hostExport", "javaExport"] {
        it.register_native(name, |it, args| {
            let t = match arg(&args, 0) {
                Value::Table(t) => t,
                other => return Err(bad_arg("hostExport", 1, "table", &other)),
            };
            let target = match arg(&args, 1) {
                Value::Str(s) => s,
                other => return Err(bad_arg("hostExport", 2, "string", &other)),
            };
            let w = host_export(it, &t, &target)?;
            Ok(vec![Value::Host(HostRef::Wrapper(w))])
        });
    }
}

/// Wraps `t` as an instance of the host interface or class `target`.
/// Repeated exports of the same table to the same type share one wrapper.
pub fn host_export(it: &mut Interpreter, t: &TableRef, target: &str) -> Result<WrapperRef> {
    let desc = it.registry().lookup_class(target).map_err(HostError::from)?;
    if t.host_ref().is_some() {
        return Err(ScriptError::new(
            ErrorKind::ProxyNotExportable,
            "a host proxy already is a host object and cannot be exported",
        ));
    }
    let key = (t.id(), Rc::<str>::from(desc.name.as_str()));
    if let Some(w) = it.wrappers.map.get(&key).and_then(Weak::upgrade) {
        return Ok(w);
    }
    let backing = match desc.kind {
        ClassKind::Interface => None,
        ClassKind::Class => {
            let ctor = desc
                .constructors
                .iter()
                .find(|c| c.params.is_empty())
                .ok_or_else(|| {
                    ScriptError::new(
                        ErrorKind::NoDefaultConstructor,
                        format!("{target} has no no-argument constructor to back the export"),
                    )
                })?
                .clone();
            let obj = host::construct(it, &desc, &ctor, vec![])?;
            let base = crate::outbound::proxy_for(it, HostRef::Object(obj.clone()));
            t.raw_set_str(BASE_FIELD, Value::Table(base));
            Some(obj)
        }
    };
    let w = Rc::new(ScriptWrapper {
        target: key.1.clone(),
        script: t.clone(),
        backing,
        id: crate::value::next_id(),
    });
    it.wrappers.map.retain(|_, w| w.strong_count() > 0);
    it.wrappers.map.insert(key, Rc::downgrade(&w));
    Ok(w)
}

/// Host call of `name` on a wrapper: forwards to the script table's method
/// of the same name, or to the inherited host implementation when the
/// table lacks one.
pub fn wrapper_invoke(it: &mut Interpreter, w: &WrapperRef, name: &str, args: Vec<HostValue>) -> Result<HostValue> {
    let registry = it.registry().clone();
    let desc = registry.lookup_class(&w.target).map_err(HostError::from)?;
    let method = host::select_host_method(&registry, &desc, name, &args)?.clone();
    let f = it.table_get(&w.script, &Value::str(name))?;
    match f {
        Value::Function(_) => {
            let mut script_args = Vec::with_capacity(args.len() + 1);
            script_args.push(Value::Table(w.script.clone()));
            for a in &args {
                script_args.push(convert::to_script(it, a));
            }
            let results = it.call(&f, script_args)?;
            if method.returns == TypeTag::Void {
                return Ok(HostValue::Null);
            }
            let first = results.into_iter().next().unwrap_or_default();
            match convert::to_host(it, &first, &method.returns)? {
                ConversionResult::Converted(h, _) => Ok(h),
                ConversionResult::Incompatible(_) => Err(ScriptError::new(
                    ErrorKind::ReturnTypeMismatch,
                    format!(
                        "{}.{name} must return {}, script returned {}",
                        w.target,
                        method.returns,
                        first.type_name()
                    ),
                )),
            }
        }
        Value::Nil => match &w.backing {
            Some(obj) => Ok(host::invoke(it, &method, Some(&HostValue::Object(obj.clone())), args)?),
            None => Err(ScriptError::new(
                ErrorKind::UnimplementedMethod,
                format!("script table does not implement {}.{name}", w.target),
            )),
        },
        other => Err(ScriptError::new(
            ErrorKind::NotCallable,
            format!("{}.{name} is a {} value in the script table", w.target, other.type_name()),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::host::HostContext;

    fn demo() -> Interpreter {
        Interpreter::with_demo_classes()
    }

    fn export(it: &mut Interpreter, src: &str, global: &str, target: &str) -> WrapperRef {
        it.exec(src).unwrap();
        let t = it.global(global).as_table().unwrap().clone();
        host_export(it, &t, target).unwrap()
    }

    #[test]
    fn listener_receives_events() {
        let mut it = demo();
        it.exec(
            "got = nil
             l = {}
             function l:actionPerformed(e) got = e:getActionCommand() end
             b = hostNewInstance('demo.Button', 'Run')
             b:addActionListener(l)
             b:press()",
        )
        .unwrap();
        assert_eq!(it.global("got"), Value::str("Run"));
    }

    #[test]
    fn edits_after_export_take_effect() {
        let mut it = demo();
        let w = export(
            &mut it,
            "n = 0 l = {} function l:actionPerformed(e) n = n + 1 end",
            "l",
            "demo.ActionListener",
        );
        let ev = host::instantiate(&mut it, "demo.ActionEvent", vec!["x".into()]).unwrap();
        let target = HostValue::Wrapper(w);
        it.call_method(&target, "actionPerformed", vec![HostValue::Object(ev.clone())]).unwrap();
        it.exec("function l:actionPerformed(e) n = n + 10 end").unwrap();
        it.call_method(&target, "actionPerformed", vec![HostValue::Object(ev)]).unwrap();
        assert_eq!(it.global("n"), 11.0.into());
    }

    #[test]
    fn export_is_cached_per_table_and_type() {
        let mut it = demo();
        it.exec("l = {}").unwrap();
        let t = it.global("l").as_table().unwrap().clone();
        let a = host_export(&mut it, &t, "demo.ActionListener").unwrap();
        let b = host_export(&mut it, &t, "demo.ActionListener").unwrap();
        let c = host_export(&mut it, &t, "bench.Callback").unwrap();
        assert!(Rc::ptr_eq(&a, &b));
        assert!(!Rc::ptr_eq(&a, &c));
        assert_eq!(convert::to_script(&mut it, &HostValue::Wrapper(a)), Value::Table(t));
    }

    #[test]
    fn missing_interface_method() {
        let mut it = demo();
        let w = export(&mut it, "l = {}", "l", "bench.Callback");
        let err = it.call_method(&HostValue::Wrapper(w), "empty", vec![]).unwrap_err();
        assert_eq!(ScriptError::from(err).kind, ErrorKind::UnimplementedMethod);
    }

    #[test]
    fn non_function_member_is_not_callable() {
        let mut it = demo();
        let w = export(&mut it, "l = {empty = 3}", "l", "bench.Callback");
        let err = it.call_method(&HostValue::Wrapper(w), "empty", vec![]).unwrap_err();
        assert_eq!(ScriptError::from(err).kind, ErrorKind::NotCallable);
    }

    #[test]
    fn class_export_falls_back_to_base() {
        let mut it = demo();
        it.exec(
            "g = {}
             function g:hello() return 'hi from script' end
             function g:bye() return self.__base:bye() .. '!' end
             S = hostBindClass('demo.Stage')",
        )
        .unwrap();
        let out = it.exec("return S.perform(g)").unwrap();
        assert_eq!(out, vec![Value::str("hi from script | bye, world! | abab")]);
    }

    #[test]
    fn return_type_is_checked() {
        let mut it = demo();
        it.exec("g = {} function g:hello() return 42 end S = hostBindClass('demo.Stage')").unwrap();
        assert_eq!(it.exec("return S.call(g, 'hello')").unwrap_err().kind, ErrorKind::ReturnTypeMismatch);
    }

    #[test]
    fn export_errors() {
        let mut it = demo();
        let kind = |it: &mut Interpreter, src: &str| it.exec(src).unwrap_err().kind;
        assert_eq!(kind(&mut it, "hostExport({}, 'ghost')"), ErrorKind::ClassNotFound);
        assert_eq!(
            kind(&mut it, "hostExport(hostNewInstance('Point'), 'demo.ActionListener')"),
            ErrorKind::ProxyNotExportable
        );
        assert_eq!(kind(&mut it, "hostExport({}, 'demo.ActionEvent')"), ErrorKind::NoDefaultConstructor);
    }

    #[test]
    fn explicit_export_handle_is_accepted_by_host() {
        let mut it = demo();
        let out = it
            .exec(
                "n = 0
                 l = {}
                 function l:actionPerformed(e) n = n + 1 end
                 h = hostExport(l, 'demo.ActionListener')
                 s = hostNewInstance('demo.EventSource')
                 s:addActionListener(h)
                 s:addActionListener(l)
                 s:fire('go')
                 return n, type(h), s:listenerCount()",
            )
            .unwrap();
        assert_eq!(out, vec![2.0.into(), Value::str("hostref"), 2.0.into()]);
    }
}
