//! Core library functions available to every script.

use crate::error::{ErrorKind, Result, ScriptError};
use crate::interp::Interpreter;
use crate::value::{FallbackKind, Key, TableRef, Value, HOSTREF_FIELD};

pub(crate) fn install(it: &mut Interpreter) {
    it.register_native("print", |it, args| {
        it.print_values(&args)?;
        Ok(vec![])
    });
    it.register_native("type", |_, args| {
        Ok(vec![Value::str(arg(&args, 0).type_name())])
    });
    it.register_native("tostring", |_, args| Ok(vec![Value::str(arg(&args, 0).to_string())]));
    it.register_native("tonumber", |_, args| {
        Ok(vec![match arg(&args, 0) {
            Value::Number(n) => Value::Number(n),
            Value::Str(s) => s.trim().parse::<f64>().map(Value::Number).unwrap_or_default(),
            _ => Value::Nil,
        }])
    });
    it.register_native("dostring", |it, args| {
        let src = match arg(&args, 0) {
            Value::Str(s) => s,
            other => return Err(bad_arg("dostring", 1, "string", &other)),
        };
        it.exec(&src)
    });
    it.register_native("setfallback", |it, args| {
        let t = table_arg("setfallback", &args, 0)?;
        let kind = match arg(&args, 1).as_str() {
            Some("index") => FallbackKind::Index,
            Some("newindex") => FallbackKind::NewIndex,
            _ => {
                return Err(ScriptError::runtime(
                    "setfallback: kind must be 'index' or 'newindex'",
                ))
            }
        };
        match arg(&args, 2) {
            Value::Function(f) => it.set_fallback(&t, kind, f),
            Value::Nil => t.set_fallback(kind, None),
            other => return Err(bad_arg("setfallback", 3, "function", &other)),
        }
        Ok(vec![])
    });
    it.register_native("rawget", |_, args| {
        let t = table_arg("rawget", &args, 0)?;
        Ok(vec![t.raw_get(&Key::from_value(&arg(&args, 1))?)])
    });
    it.register_native("rawset", |it, args| {
        let t = table_arg("rawset", &args, 0)?;
        let key = arg(&args, 1);
        if t.host_ref().is_some() && key.as_str() == Some(HOSTREF_FIELD) {
            return Err(ScriptError::new(
                ErrorKind::ReservedField,
                format!("'{HOSTREF_FIELD}' is reserved on host proxies"),
            ));
        }
        it.raw_set(&t, key, arg(&args, 2))?;
        Ok(vec![Value::Table(t)])
    });
    it.register_native("error", |_, args| {
        Err(ScriptError::runtime(arg(&args, 0).to_string()))
    });
}

pub(crate) fn arg(args: &[Value], i: usize) -> Value {
    args.get(i).cloned().unwrap_or_default()
}

pub(crate) fn table_arg(func: &str, args: &[Value], i: usize) -> Result<TableRef> {
    match arg(args, i) {
        Value::Table(t) => Ok(t),
        other => Err(bad_arg(func, i + 1, "table", &other)),
    }
}

pub(crate) fn bad_arg(func: &str, pos: usize, expected: &str, got: &Value) -> ScriptError {
    ScriptError::runtime(format!(
        "bad argument #{pos} to '{func}' ({expected} expected, got {})",
        got.type_name()
    ))
}
