//! Demo host classes: a point, line-based stand-ins for a small GUI toolkit,
//! an event source with listeners, a greeter for class-wrapper tests, and
//! the benchmark counter.
//!
//! Signatures live in `demo_classes.json`; this module binds the bodies.

use std::sync::Arc;

use super::manifest::{load_manifest, signature_key, NativeLibrary};
use super::{instantiate, HostArray, HostContext, HostError, HostValue, ObjRef, Registry, TypeTag};

pub const MANIFEST: &str = include_str!("demo_classes.json");

type Outcome = Result<HostValue, HostError>;

fn this(recv: Option<&HostValue>) -> Result<&ObjRef, HostError> {
    match recv {
        Some(HostValue::Object(o)) => Ok(o),
        _ => Err(HostError::Exception("method needs an object receiver".into())),
    }
}

fn float(args: &[HostValue], i: usize) -> f64 {
    args[i].as_float().expect("argument converted to Float")
}

fn int(args: &[HostValue], i: usize) -> i64 {
    args[i].as_int().expect("argument converted to Integer")
}

fn text(args: &[HostValue], i: usize) -> &str {
    args[i].as_text().expect("argument converted to Text")
}

fn text_field(obj: &ObjRef, field: &str) -> String {
    obj.get(field).as_text().unwrap_or_default().to_string()
}

struct Binder<'a> {
    lib: &'a mut NativeLibrary,
}

impl Binder<'_> {
    fn bind<F>(&mut self, class: &str, method: &str, params: &[&str], f: F) -> &mut Self
    where
        F: Fn(&mut dyn HostContext, Option<&HostValue>, &[HostValue]) -> Outcome + Send + Sync + 'static,
    {
        let tags: Vec<TypeTag> = params
            .iter()
            .map(|p| p.parse().expect("demo tag"))
            .collect();
        self.lib.bind(signature_key(class, method, &tags), Arc::new(f));
        self
    }

    fn noop_ctor(&mut self, class: &str) -> &mut Self {
        self.bind(class, "<init>", &[], |_, _, _| Ok(HostValue::Null))
    }
}

fn add_listener(recv: Option<&HostValue>, args: &[HostValue]) -> Outcome {
    let obj = this(recv)?;
    if matches!(args[0], HostValue::Null) {
        return Err(HostError::Exception("listener is null".into()));
    }
    obj.attachments.borrow_mut().push(args[0].clone());
    Ok(HostValue::Null)
}

/// Delivers an action event to every registered listener, in order.
fn fire_event(ctx: &mut dyn HostContext, obj: &ObjRef, command: &str) -> Outcome {
    let event = instantiate(ctx, "demo.ActionEvent", vec![command.into()])?;
    let listeners = obj.attachments.borrow().clone();
    for listener in &listeners {
        ctx.call_method(listener, "actionPerformed", vec![HostValue::Object(event.clone())])?;
    }
    Ok(HostValue::Null)
}

fn listener_count(recv: Option<&HostValue>) -> Outcome {
    Ok(HostValue::Int(this(recv)?.attachments.borrow().len() as i64))
}

/// Native bodies for every class in [`MANIFEST`].
pub fn natives() -> NativeLibrary {
    let mut lib = NativeLibrary::new();
    let mut b = Binder { lib: &mut lib };

    b.noop_ctor("Point")
        .bind("Point", "move", &["Float", "Float"], |_, recv, args| {
            let p = this(recv)?;
            let x = p.get("x").as_float().unwrap_or_default();
            let y = p.get("y").as_float().unwrap_or_default();
            p.set("x", HostValue::Float(x + float(args, 0)));
            p.set("y", HostValue::Float(y + float(args, 1)));
            Ok(HostValue::Null)
        });

    b.noop_ctor("demo.Point3")
        .bind("demo.Point3", "lift", &["Float"], |_, recv, args| {
            let p = this(recv)?;
            let z = p.get("z").as_float().unwrap_or_default();
            p.set("z", HostValue::Float(z + float(args, 0)));
            Ok(HostValue::Null)
        });

    b.noop_ctor("demo.Component");

    b.noop_ctor("demo.TextArea")
        .bind("demo.TextArea", "<init>", &["Text"], |_, recv, args| {
            this(recv)?.set("contents", args[0].clone());
            Ok(HostValue::Null)
        })
        .bind("demo.TextArea", "setText", &["Text"], |_, recv, args| {
            this(recv)?.set("contents", args[0].clone());
            Ok(HostValue::Null)
        })
        .bind("demo.TextArea", "getText", &[], |_, recv, _| Ok(this(recv)?.get("contents")))
        .bind("demo.TextArea", "append", &["Text"], |_, recv, args| {
            let area = this(recv)?;
            let joined = text_field(area, "contents") + text(args, 0);
            area.set("contents", joined.as_str().into());
            Ok(HostValue::Null)
        });

    b.bind("demo.ActionEvent", "<init>", &["Text"], |_, recv, args| {
        this(recv)?.set("command", args[0].clone());
        Ok(HostValue::Null)
    })
    .bind("demo.ActionEvent", "getActionCommand", &[], |_, recv, _| {
        Ok(this(recv)?.get("command"))
    });

    b.noop_ctor("demo.Button")
        .bind("demo.Button", "<init>", &["Text"], |_, recv, args| {
            this(recv)?.set("label", args[0].clone());
            Ok(HostValue::Null)
        })
        .bind("demo.Button", "addActionListener", &["interface demo.ActionListener"], |_, recv, args| {
            add_listener(recv, args)
        })
        .bind("demo.Button", "press", &[], |ctx, recv, _| {
            let button = this(recv)?;
            fire_event(ctx, button, &text_field(button, "label"))
        })
        .bind("demo.Button", "listenerCount", &[], |_, recv, _| listener_count(recv));

    b.noop_ctor("demo.EventSource")
        .bind("demo.EventSource", "addActionListener", &["interface demo.ActionListener"], |_, recv, args| {
            add_listener(recv, args)
        })
        .bind("demo.EventSource", "fire", &["Text"], |ctx, recv, args| {
            fire_event(ctx, this(recv)?, text(args, 0))
        })
        .bind("demo.EventSource", "listenerCount", &[], |_, recv, _| listener_count(recv));

    b.noop_ctor("demo.Frame")
        .bind("demo.Frame", "<init>", &["Text"], |_, recv, args| {
            this(recv)?.set("title", args[0].clone());
            Ok(HostValue::Null)
        })
        .bind("demo.Frame", "add", &["class demo.Component", "Text"], |_, recv, args| {
            let frame = this(recv)?;
            if matches!(args[0], HostValue::Null) {
                return Err(HostError::Exception("cannot add a null component".into()));
            }
            let mut children = frame.attachments.borrow_mut();
            children.push(args[0].clone());
            children.push(args[1].clone());
            Ok(HostValue::Null)
        })
        .bind("demo.Frame", "pack", &[], |_, recv, _| {
            this(recv)?.set("packed", HostValue::Bool(true));
            Ok(HostValue::Null)
        })
        .bind("demo.Frame", "show", &[], |_, recv, _| {
            this(recv)?.set("visible", HostValue::Bool(true));
            Ok(HostValue::Null)
        })
        .bind("demo.Frame", "componentCount", &[], |_, recv, _| {
            Ok(HostValue::Int(this(recv)?.attachments.borrow().len() as i64 / 2))
        })
        .bind("demo.Frame", "describe", &[], |_, recv, _| {
            let frame = this(recv)?;
            let children = frame.attachments.borrow();
            let parts: Vec<String> = children
                .chunks(2)
                .map(|pair| {
                    let class = match &pair[0] {
                        HostValue::Object(o) => o.class.to_string(),
                        HostValue::Wrapper(w) => w.target.to_string(),
                        other => other.describe(),
                    };
                    format!("{}: {class}", pair[1].as_text().unwrap_or("?"))
                })
                .collect();
            Ok(format!("{} [{}]", text_field(frame, "title"), parts.join(", ")).as_str().into())
        });

    b.noop_ctor("demo.BorderLayout");

    b.noop_ctor("demo.Greeter")
        .bind("demo.Greeter", "hello", &[], |_, recv, _| {
            Ok(format!("hello, {}", text_field(this(recv)?, "name")).as_str().into())
        })
        .bind("demo.Greeter", "bye", &[], |_, recv, _| {
            Ok(format!("bye, {}", text_field(this(recv)?, "name")).as_str().into())
        })
        .bind("demo.Greeter", "repeat", &["Text", "Integer"], |_, _, args| {
            let n = int(args, 1).clamp(0, 10_000) as usize;
            Ok(text(args, 0).repeat(n).as_str().into())
        });

    // Virtual calls on a greeter, so class wrappers are exercised from the host side.
    b.bind("demo.Stage", "perform", &["class demo.Greeter"], |ctx, _, args| {
        let g = &args[0];
        let hello = ctx.call_method(g, "hello", vec![])?;
        let bye = ctx.call_method(g, "bye", vec![])?;
        let rep = ctx.call_method(g, "repeat", vec!["ab".into(), HostValue::Int(2)])?;
        let parts = [hello, bye, rep].map(|v| v.as_text().unwrap_or("?").to_string());
        Ok(parts.join(" | ").as_str().into())
    })
    .bind("demo.Stage", "call", &["class demo.Greeter", "Text"], |ctx, _, args| {
        let result = match text(args, 1) {
            "repeat" => ctx.call_method(&args[0], "repeat", vec!["ab".into(), HostValue::Int(2)])?,
            name => ctx.call_method(&args[0], name, vec![])?,
        };
        Ok(result)
    });

    b.bind("demo.MathUtil", "twice", &["Float"], |_, _, args| Ok(HostValue::Float(float(args, 0) * 2.0)))
        .bind("demo.MathUtil", "describe", &["Integer"], |_, _, _| Ok("integer".into()))
        .bind("demo.MathUtil", "describe", &["Float"], |_, _, _| Ok("float".into()))
        .bind("demo.MathUtil", "describe", &["Text"], |_, _, _| Ok("text".into()))
        .bind("demo.MathUtil", "describe", &["Boolean"], |_, _, _| Ok("boolean".into()))
        .bind("demo.MathUtil", "describe", &["class Point"], |_, _, args| {
            Ok(match &args[0] {
                HostValue::Null => "null point".into(),
                _ => "point".into(),
            })
        })
        .bind("demo.MathUtil", "pick", &["Integer", "Float"], |_, _, _| Ok("int-float".into()))
        .bind("demo.MathUtil", "pick", &["Float", "Integer"], |_, _, _| Ok("float-int".into()))
        .bind("demo.MathUtil", "half", &["Integer"], |_, _, args| Ok(HostValue::Int(int(args, 0) / 2)))
        .bind("demo.MathUtil", "fail", &["Text"], |_, _, args| {
            Err(HostError::Exception(text(args, 0).to_string()))
        });

    let new_array = |tag: TypeTag| {
        move |_: &mut dyn HostContext, _: Option<&HostValue>, args: &[HostValue]| -> Outcome {
            let n = int(args, 0);
            if n < 0 {
                return Err(HostError::Exception(format!("negative array size {n}")));
            }
            Ok(HostValue::Array(HostArray::new(tag.clone(), n as usize)))
        }
    };
    b.bind("demo.Arrays", "newIntArray", &["Integer"], new_array(TypeTag::Integer))
        .bind("demo.Arrays", "newTextArray", &["Integer"], new_array(TypeTag::Text))
        .bind("demo.Arrays", "newPointArray", &["Integer"], new_array(TypeTag::class("Point")))
        .bind("demo.Arrays", "sum", &["Integer[]"], |_, _, args| {
            let HostValue::Array(a) = &args[0] else {
                return Err(HostError::Exception("null array".into()));
            };
            let total = a.to_vec().iter().filter_map(HostValue::as_int).sum();
            Ok(HostValue::Int(total))
        });

    b.noop_ctor("bench.Counter")
        .bind("bench.Counter", "inc", &[], |_, recv, _| {
            let c = this(recv)?;
            let n = c.get("count").as_int().unwrap_or_default();
            c.set("count", HostValue::Int(n + 1));
            Ok(HostValue::Null)
        })
        .bind("bench.Counter", "empty", &[], |_, _, _| Ok(HostValue::Null));

    lib
}

/// Demo classes registered but not yet frozen, so callers can add more.
pub fn unfrozen_registry() -> Registry {
    let mut reg = Registry::new();
    load_manifest(MANIFEST, &natives(), &mut reg).expect("demo manifest is valid");
    reg
}

/// Frozen registry holding the demo classes.
pub fn registry() -> Registry {
    let mut reg = unfrozen_registry();
    reg.freeze();
    reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::host::{ClassKind, HostWorld};

    #[test]
    fn manifest_loads_completely() {
        let reg = registry();
        for name in [
            "Point",
            "demo.TextArea",
            "demo.Button",
            "demo.Frame",
            "demo.BorderLayout",
            "demo.EventSource",
            "demo.ActionListener",
            "demo.Greeter",
            "bench.Counter",
        ] {
            reg.lookup_class(name).unwrap();
        }
        assert_eq!(
            reg.lookup_class("demo.ActionListener").unwrap().kind,
            ClassKind::Interface
        );
        let greeter = reg.lookup_class("demo.Greeter").unwrap();
        assert_eq!(greeter.methods.len(), 3);
    }

    #[test]
    fn text_area_buffer() {
        let mut w = HostWorld::new(Arc::new(registry()));
        let area = instantiate(&mut w, "demo.TextArea", vec![]).unwrap();
        let recv = HostValue::Object(area.clone());
        w.call_method(&recv, "setText", vec!["x=".into()]).unwrap();
        w.call_method(&recv, "append", vec!["42".into()]).unwrap();
        assert_eq!(w.call_method(&recv, "getText", vec![]).unwrap(), "x=42".into());
    }

    #[test]
    fn frame_layout_description() {
        let mut w = HostWorld::new(Arc::new(registry()));
        let frame = instantiate(&mut w, "demo.Frame", vec!["Console".into()]).unwrap();
        let area = instantiate(&mut w, "demo.TextArea", vec![]).unwrap();
        let f = HostValue::Object(frame);
        w.call_method(&f, "add", vec![HostValue::Object(area), "North".into()]).unwrap();
        assert_eq!(w.call_method(&f, "componentCount", vec![]).unwrap(), HostValue::Int(1));
        assert_eq!(
            w.call_method(&f, "describe", vec![]).unwrap(),
            "Console [North: demo.TextArea]".into()
        );
    }
}
