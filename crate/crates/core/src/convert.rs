//! Value conversion between script and host, and overload resolution.
//!
//! Each argument scores 2 for an exact match, 1 for a coercion, or is
//! rejected. A candidate's score is the sum over its arguments; the unique
//! highest-scoring candidate wins, ties are ambiguous.

use crate::error::{ErrorKind, Result, ScriptError};
use crate::host::{ClassKind, HostValue, MethodDescriptor, Registry, TypeTag};
use crate::interp::Interpreter;
use crate::value::{HostRef, Value};
use crate::{inbound, outbound};

pub const EXACT: u32 = 2;
pub const COERCED: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ConversionResult {
    Converted(HostValue, u32),
    Incompatible(String),
}

/// Outcome of ranking candidates by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ranking {
    Selected(usize),
    NoMatch,
    Ambiguous(Vec<usize>),
}

#[derive(Debug, Clone)]
pub enum OverloadDecision {
    Selected {
        method: MethodDescriptor,
        args: Vec<HostValue>,
    },
    NoMatch,
    Ambiguous(Vec<MethodDescriptor>),
}

/// The host entity a script value refers to, if any.
fn host_ref_of(v: &Value) -> Option<HostRef> {
    match v {
        Value::Table(t) => t.host_ref(),
        Value::Host(h) => Some(h.clone()),
        _ => None,
    }
}

fn reference_score(registry: &Registry, class: &str, target: &str) -> Option<u32> {
    if class == target {
        Some(EXACT)
    } else if registry.is_subtype(class, target) {
        Some(COERCED)
    } else {
        None
    }
}

/// Scores one argument against one parameter tag. Pure: never wraps.
pub fn score_arg(registry: &Registry, v: &Value, tag: &TypeTag) -> Option<u32> {
    match (v, tag) {
        (Value::Number(_), TypeTag::Float) => Some(EXACT),
        (Value::Number(n), TypeTag::Integer) => integral(*n).map(|_| COERCED),
        (Value::Str(_), TypeTag::Text) => Some(EXACT),
        (Value::Bool(_), TypeTag::Boolean) => Some(EXACT),
        (Value::Nil, t) if t.is_reference() => Some(COERCED),
        (Value::Table(_) | Value::Host(_), TypeTag::Class(target) | TypeTag::Interface(target)) => {
            match host_ref_of(v) {
                Some(HostRef::Object(o)) => reference_score(registry, &o.class, target),
                Some(HostRef::Wrapper(w)) => reference_score(registry, &w.target, target),
                Some(_) => None,
                None => {
                    // A plain table can be wrapped as the target type.
                    let desc = registry.lookup_class(target).ok()?;
                    match desc.kind {
                        ClassKind::Interface => Some(COERCED),
                        ClassKind::Class if desc.has_default_constructor() => Some(COERCED),
                        ClassKind::Class => None,
                    }
                }
            }
        }
        (Value::Table(_) | Value::Host(_), TypeTag::Array(elem)) => match host_ref_of(v) {
            Some(HostRef::Array(a)) if a.element == **elem => Some(EXACT),
            _ => None,
        },
        _ => None,
    }
}

fn integral(n: f64) -> Option<i64> {
    // 2^63 is exactly representable; anything at or above it overflows.
    if n.fract() == 0.0 && n >= -9.223_372_036_854_775_808e18 && n < 9.223_372_036_854_775_808e18 {
        Some(n as i64)
    } else {
        None
    }
}

/// Total score of a candidate, or `None` when any argument is rejected or
/// the arity differs.
pub fn score_candidate(registry: &Registry, params: &[TypeTag], args: &[Value]) -> Option<u32> {
    if params.len() != args.len() {
        return None;
    }
    params
        .iter()
        .zip(args)
        .try_fold(0, |acc, (t, a)| score_arg(registry, a, t).map(|s| acc + s))
}

/// Ranks candidates by score without converting anything.
pub fn rank(registry: &Registry, cands: &[MethodDescriptor], args: &[Value]) -> Ranking {
    let scores: Vec<Option<u32>> = cands
        .iter()
        .map(|m| score_candidate(registry, &m.params, args))
        .collect();
    let Some(best) = scores.iter().flatten().max().copied() else {
        return Ranking::NoMatch;
    };
    let top: Vec<usize> = (0..cands.len()).filter(|&i| scores[i] == Some(best)).collect();
    if top.len() == 1 {
        Ranking::Selected(top[0])
    } else {
        Ranking::Ambiguous(top)
    }
}

/// Picks the overload for a script call and converts the arguments for it.
pub fn select_overload(
    it: &mut Interpreter,
    cands: &[MethodDescriptor],
    args: &[Value],
) -> Result<OverloadDecision> {
    let registry = it.registry().clone();
    match rank(&registry, cands, args) {
        Ranking::NoMatch => Ok(OverloadDecision::NoMatch),
        Ranking::Ambiguous(ix) => Ok(OverloadDecision::Ambiguous(
            ix.into_iter().map(|i| cands[i].clone()).collect(),
        )),
        Ranking::Selected(i) => {
            let method = cands[i].clone();
            let args = convert_args(it, &method.params, args)?;
            Ok(OverloadDecision::Selected { method, args })
        }
    }
}

/// Converts arguments that are known to score against `params`.
pub fn convert_args(it: &mut Interpreter, params: &[TypeTag], args: &[Value]) -> Result<Vec<HostValue>> {
    params
        .iter()
        .zip(args)
        .map(|(t, a)| match to_host(it, a, t)? {
            ConversionResult::Converted(h, _) => Ok(h),
            ConversionResult::Incompatible(why) => Err(ScriptError::new(ErrorKind::TypeMismatch, why)),
        })
        .collect()
}

/// Converts a script value to a host value of type `tag`. Plain tables
/// headed for a class or interface slot are wrapped.
pub fn to_host(it: &mut Interpreter, v: &Value, tag: &TypeTag) -> Result<ConversionResult> {
    let registry = it.registry().clone();
    let Some(score) = score_arg(&registry, v, tag) else {
        return Ok(ConversionResult::Incompatible(format!(
            "cannot convert {} to {tag}",
            v.type_name()
        )));
    };
    let h = match (v, tag) {
        (Value::Number(n), TypeTag::Float) => HostValue::Float(*n),
        (Value::Number(n), TypeTag::Integer) => HostValue::Int(integral(*n).expect("scored as integral")),
        (Value::Str(s), _) => HostValue::Text(s.clone()),
        (Value::Bool(b), _) => HostValue::Bool(*b),
        (Value::Nil, _) => HostValue::Null,
        _ => match host_ref_of(v) {
            Some(HostRef::Object(o)) => HostValue::Object(o),
            Some(HostRef::Array(a)) => HostValue::Array(a),
            Some(HostRef::Wrapper(w)) => HostValue::Wrapper(w),
            Some(HostRef::Class(_)) => unreachable!("class proxies never score"),
            None => {
                let (Value::Table(t), Some((name, _))) = (v, tag.referenced_type()) else {
                    unreachable!("only plain tables reach the wrapping case")
                };
                HostValue::Wrapper(inbound::host_export(it, t, name)?)
            }
        },
    };
    Ok(ConversionResult::Converted(h, score))
}

/// Converts a host value into the script world. Objects and arrays become
/// (cached) proxies; wrappers unwrap to their original table.
pub fn to_script(it: &mut Interpreter, h: &HostValue) -> Value {
    match h {
        HostValue::Null => Value::Nil,
        HostValue::Bool(b) => Value::Bool(*b),
        HostValue::Int(i) => Value::Number(*i as f64),
        HostValue::Float(f) => Value::Number(*f),
        HostValue::Text(s) => Value::Str(s.clone()),
        HostValue::Object(o) => Value::Table(outbound::proxy_for(it, HostRef::Object(o.clone()))),
        HostValue::Array(a) => Value::Table(outbound::proxy_for(it, HostRef::Array(a.clone()))),
        HostValue::Wrapper(w) => Value::Table(w.script.clone()),
    }
}
