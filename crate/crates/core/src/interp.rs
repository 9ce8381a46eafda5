//! Tree-walking evaluator.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::{self, Write};
use std::rc::Rc;
use std::sync::Arc;

use crate::ast::{BinOp, Block, Chunk, Expr, FuncBody, Stmt, TableItem, UnOp};
use crate::error::{ErrorKind, Result, ScriptError};
use crate::host::{HostContext, HostError, HostValue, HostWorld, Registry};
use crate::inbound::WrapperCache;
use crate::outbound::ProxyState;
use crate::parser::parse_source;
use crate::value::{Closure, FallbackKind, Function, Key, TableRef, Value};
use crate::{builtins, inbound, outbound};

/// Maximum nesting of script and native calls.
pub const MAX_CALL_DEPTH: usize = 200;

/// One lexical scope. Closures hold on to the scope they were created in,
/// so captured locals are shared by reference.
pub struct Scope {
    vars: RefCell<Vec<(Rc<str>, Value)>>,
    parent: Env,
}

/// Chain of scopes; an empty chain means only globals are visible.
#[derive(Clone, Default)]
pub struct Env(Option<Rc<Scope>>);

impl Env {
    pub fn globals() -> Self {
        Env(None)
    }

    fn child_with(&self, vars: Vec<(Rc<str>, Value)>) -> Env {
        Env(Some(Rc::new(Scope {
            vars: RefCell::new(vars),
            parent: self.clone(),
        })))
    }

    pub fn child(&self) -> Env {
        self.child_with(Vec::new())
    }

    /// Declares a local in the innermost scope.
    fn declare(&self, name: Rc<str>, value: Value) {
        let scope = self.0.as_ref().expect("locals need a scope");
        scope.vars.borrow_mut().push((name, value));
    }

    fn lookup(&self, name: &str) -> Option<Value> {
        let mut cur = self.0.as_ref();
        while let Some(scope) = cur {
            if let Some((_, v)) = scope.vars.borrow().iter().rev().find(|(n, _)| &**n == name) {
                return Some(v.clone());
            }
            cur = scope.parent.0.as_ref();
        }
        None
    }

    /// Assigns to an existing local; returns the value back if none exists.
    fn assign(&self, name: &str, value: Value) -> Option<Value> {
        let mut cur = self.0.as_ref();
        while let Some(scope) = cur {
            if let Some((_, slot)) = scope
                .vars
                .borrow_mut()
                .iter_mut()
                .rev()
                .find(|(n, _)| &**n == name)
            {
                *slot = value;
                return None;
            }
            cur = scope.parent.0.as_ref();
        }
        Some(value)
    }
}

enum Flow {
    Normal,
    Return(Vec<Value>),
}

enum Place {
    Name(Rc<str>),
    Index(Value, Value, u32),
}

/// Cloneable in-memory sink for `print`, handy for capturing output.
#[derive(Clone, Default)]
pub struct SharedBuffer(Rc<RefCell<Vec<u8>>>);

impl SharedBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contents(&self) -> String {
        String::from_utf8_lossy(&self.0.borrow()).into_owned()
    }

    pub fn take(&self) -> String {
        let bytes = std::mem::take(&mut *self.0.borrow_mut());
        String::from_utf8_lossy(&bytes).into_owned()
    }
}

impl Write for SharedBuffer {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.borrow_mut().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// A single-threaded interpreter instance.
pub struct Interpreter {
    globals: HashMap<Rc<str>, Value>,
    pub(crate) world: HostWorld,
    pub(crate) proxies: ProxyState,
    pub(crate) wrappers: WrapperCache,
    out: Box<dyn Write>,
    receivers: Vec<Value>,
    depth: usize,
}

impl Default for Interpreter {
    fn default() -> Self {
        Self::new()
    }
}

impl Interpreter {
    /// Interpreter with an empty host registry.
    pub fn new() -> Self {
        let mut reg = Registry::new();
        reg.freeze();
        Self::with_registry(Arc::new(reg))
    }

    /// Interpreter bridged to `registry`, which must be frozen.
    pub fn with_registry(registry: Arc<Registry>) -> Self {
        assert!(registry.is_frozen(), "registry must be frozen before use");
        let mut interp = Interpreter {
            globals: HashMap::new(),
            world: HostWorld::new(registry),
            proxies: ProxyState::new(),
            wrappers: WrapperCache::default(),
            out: Box::new(io::stdout()),
            receivers: Vec::new(),
            depth: 0,
        };
        builtins::install(&mut interp);
        outbound::install(&mut interp);
        inbound::install(&mut interp);
        interp
    }

    /// Interpreter bridged to the demo host classes.
    pub fn with_demo_classes() -> Self {
        Self::with_registry(Arc::new(crate::host::demo::registry()))
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.world.registry
    }

    pub fn set_output(&mut self, out: impl Write + 'static) {
        self.out = Box::new(out);
    }

    /// Writes values the way `print` does: tab-separated, one line.
    pub fn print_values(&mut self, values: &[Value]) -> Result<()> {
        let line: Vec<String> = values.iter().map(ToString::to_string).collect();
        writeln!(self.out, "{}", line.join("\t"))
            .and_then(|_| self.out.flush())
            .map_err(|e| ScriptError::runtime(format!("print: {e}")))
    }

    pub fn global(&self, name: &str) -> Value {
        self.globals.get(name).cloned().unwrap_or_default()
    }

    pub fn set_global(&mut self, name: &str, value: Value) {
        if value.is_nil() {
            self.globals.remove(name);
        } else {
            self.globals.insert(name.into(), value);
        }
    }

    pub fn register_native(
        &mut self,
        name: &str,
        f: impl Fn(&mut Interpreter, Vec<Value>) -> Result<Vec<Value>> + 'static,
    ) {
        self.set_global(name, Value::Function(Function::native(name, f)));
    }

    /// Tokenizes, parses, and runs `source` against the globals.
    pub fn exec(&mut self, source: &str) -> Result<Vec<Value>> {
        let chunk = parse_source(source)?;
        self.eval(&chunk)
    }

    pub fn eval(&mut self, chunk: &Chunk) -> Result<Vec<Value>> {
        self.eval_in(chunk, &Env::globals())
    }

    pub fn eval_in(&mut self, chunk: &Chunk, env: &Env) -> Result<Vec<Value>> {
        let saved = self.receivers.len();
        let flow = self.exec_block(&chunk.block, env);
        self.receivers.truncate(saved);
        match flow? {
            Flow::Return(values) => Ok(values),
            Flow::Normal => Ok(Vec::new()),
        }
    }

    // ---- tables ----------------------------------------------------------

    /// Reads `t[key]`, consulting the index fallback for absent keys.
    pub fn table_get(&mut self, t: &TableRef, key: &Value) -> Result<Value> {
        let k = Key::from_value(key)?;
        let handler = {
            let table = t.borrow();
            if let Some(v) = table.entries.get(&k) {
                return Ok(v.clone());
            }
            table.index_handler.clone()
        };
        match handler {
            Some(h) => {
                let out = self.call_function(&h, vec![Value::Table(t.clone()), key.clone()])?;
                Ok(out.into_iter().next().unwrap_or_default())
            }
            None => Ok(Value::Nil),
        }
    }

    /// Writes `t[key] = value` as script code would: through the newindex
    /// fallback when one is installed.
    pub fn table_set(&mut self, t: &TableRef, key: Value, value: Value) -> Result<()> {
        let k = Key::from_value(&key)?;
        let handler = t.borrow().newindex_handler.clone();
        match handler {
            Some(h) => {
                self.call_function(&h, vec![Value::Table(t.clone()), key, value])?;
            }
            None => t.raw_set(k, value),
        }
        Ok(())
    }

    pub fn raw_set(&mut self, t: &TableRef, key: Value, value: Value) -> Result<()> {
        t.raw_set(Key::from_value(&key)?, value);
        Ok(())
    }

    pub fn set_fallback(&mut self, t: &TableRef, kind: FallbackKind, handler: Rc<Function>) {
        t.set_fallback(kind, Some(handler));
    }

    // ---- calls -----------------------------------------------------------

    pub fn call(&mut self, f: &Value, args: Vec<Value>) -> Result<Vec<Value>> {
        match f {
            Value::Function(func) => self.call_function(func, args),
            other => Err(ScriptError::new(
                ErrorKind::NotCallable,
                format!("attempt to call a {} value", other.type_name()),
            )),
        }
    }

    pub fn call_function(&mut self, func: &Rc<Function>, args: Vec<Value>) -> Result<Vec<Value>> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(ScriptError::new(ErrorKind::StackOverflow, "call depth limit exceeded"));
        }
        self.depth += 1;
        let result = match &**func {
            Function::Native(n) => (n.f)(self, args),
            Function::Script(c) => self.call_closure(c, args),
        };
        self.depth -= 1;
        result
    }

    fn call_closure(&mut self, closure: &Closure, args: Vec<Value>) -> Result<Vec<Value>> {
        let mut args = args.into_iter();
        let vars = closure
            .body
            .params
            .iter()
            .map(|p| (p.clone(), args.next().unwrap_or_default()))
            .collect();
        let env = closure.env.child_with(vars);
        match self.exec_statements(&closure.body.body.statements, &env)? {
            Flow::Return(values) => Ok(values),
            Flow::Normal => Ok(Vec::new()),
        }
    }

    // ---- statements ------------------------------------------------------

    fn exec_block(&mut self, block: &Block, env: &Env) -> Result<Flow> {
        if block.declares_locals {
            self.exec_statements(&block.statements, &env.child())
        } else {
            self.exec_statements(&block.statements, env)
        }
    }

    fn exec_statements(&mut self, stmts: &[Stmt], env: &Env) -> Result<Flow> {
        for stmt in stmts {
            if let Flow::Return(values) = self.exec_stmt(stmt, env)? {
                return Ok(Flow::Return(values));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_stmt(&mut self, stmt: &Stmt, env: &Env) -> Result<Flow> {
        match stmt {
            Stmt::Call { call, line } => {
                self.eval_multi(call, env).map_err(|e| e.at_line(*line))?;
            }
            Stmt::Assign {
                targets,
                values,
                line,
            } => self.assign(targets, values, env).map_err(|e| e.at_line(*line))?,
            Stmt::Local { names, values, line } => {
                let mut vals = self.eval_list(values, env).map_err(|e| e.at_line(*line))?;
                vals.resize(names.len(), Value::Nil);
                for (name, v) in names.iter().zip(vals) {
                    env.declare(name.clone(), v);
                }
            }
            Stmt::LocalFunction { name, func, .. } => {
                env.declare(name.clone(), Value::Nil);
                let f = self.closure(func, env);
                env.assign(name, f);
            }
            Stmt::If {
                arms, otherwise, ..
            } => {
                for (cond, body) in arms {
                    if self.eval_expr(cond, env)?.truthy() {
                        return self.exec_block(body, env);
                    }
                }
                if let Some(body) = otherwise {
                    return self.exec_block(body, env);
                }
            }
            Stmt::While { cond, body, .. } => {
                while self.eval_expr(cond, env)?.truthy() {
                    if let Flow::Return(v) = self.exec_block(body, env)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            Stmt::NumericFor {
                var,
                start,
                limit,
                step,
                body,
                line,
            } => {
                let num = |v: Value, what: &str| {
                    v.as_number().ok_or_else(|| {
                        ScriptError::runtime(format!("'for' {what} must be a number")).at_line(*line)
                    })
                };
                let start = num(self.eval_expr(start, env)?, "initial value")?;
                let limit = num(self.eval_expr(limit, env)?, "limit")?;
                let step = match step {
                    Some(s) => num(self.eval_expr(s, env)?, "step")?,
                    None => 1.0,
                };
                if step == 0.0 {
                    return Err(ScriptError::runtime("'for' step is zero").at_line(*line));
                }
                let mut i = start;
                while (step > 0.0 && i <= limit) || (step < 0.0 && i >= limit) {
                    let scope = env.child_with(vec![(var.clone(), Value::Number(i))]);
                    if let Flow::Return(v) = self.exec_statements(&body.statements, &scope)? {
                        return Ok(Flow::Return(v));
                    }
                    i += step;
                }
            }
            Stmt::Return { values, line } => {
                let vals = self.eval_list(values, env).map_err(|e| e.at_line(*line))?;
                return Ok(Flow::Return(vals));
            }
        }
        Ok(Flow::Normal)
    }

    fn assign(&mut self, targets: &[Expr], values: &[Expr], env: &Env) -> Result<()> {
        let mut places = Vec::with_capacity(targets.len());
        for target in targets {
            places.push(match target {
                Expr::Name(n) => Place::Name(n.clone()),
                Expr::Index { obj, key, line } => {
                    let o = self.eval_expr(obj, env)?;
                    let k = self.eval_expr(key, env)?;
                    Place::Index(o, k, *line)
                }
                _ => unreachable!("parser only produces assignable targets"),
            });
        }
        let mut vals = self.eval_list(values, env)?;
        vals.resize(places.len(), Value::Nil);
        for (place, v) in places.into_iter().zip(vals) {
            match place {
                Place::Name(n) => {
                    if let Some(v) = env.assign(&n, v) {
                        self.set_global(&n, v);
                    }
                }
                Place::Index(obj, key, line) => self.index_set(&obj, key, v).map_err(|e| e.at_line(line))?,
            }
        }
        Ok(())
    }

    fn index_set(&mut self, obj: &Value, key: Value, v: Value) -> Result<()> {
        match obj {
            Value::Table(t) => self.table_set(t, key, v),
            other => Err(ScriptError::runtime(format!(
                "attempt to index a {} value",
                other.type_name()
            ))),
        }
    }

    fn index_get(&mut self, obj: &Value, key: &Value) -> Result<Value> {
        match obj {
            Value::Table(t) => self.table_get(t, key),
            other => Err(ScriptError::runtime(format!(
                "attempt to index a {} value",
                other.type_name()
            ))),
        }
    }

    // ---- expressions -----------------------------------------------------

    fn closure(&self, body: &Rc<FuncBody>, env: &Env) -> Value {
        Value::Function(Rc::new(Function::Script(Closure {
            body: body.clone(),
            env: env.clone(),
        })))
    }

    /// Evaluates an expression list, expanding a trailing multi-value expression.
    fn eval_list(&mut self, exprs: &[Expr], env: &Env) -> Result<Vec<Value>> {
        let mut out = Vec::with_capacity(exprs.len());
        if let Some((last, init)) = exprs.split_last() {
            for e in init {
                out.push(self.eval_expr(e, env)?);
            }
            if last.is_multi() {
                out.extend(self.eval_multi(last, env)?);
            } else {
                out.push(self.eval_expr(last, env)?);
            }
        }
        Ok(out)
    }

    fn eval_multi(&mut self, e: &Expr, env: &Env) -> Result<Vec<Value>> {
        match e {
            Expr::Call { callee, args, line } => {
                let f = self.eval_expr(callee, env)?;
                let args = self.eval_list(args, env)?;
                self.call(&f, args).map_err(|err| err.at_line(*line))
            }
            Expr::BindReceiver { value, body } => {
                let recv = self.eval_expr(value, env)?;
                self.receivers.push(recv);
                let result = self.eval_multi(body, env);
                self.receivers.pop();
                result
            }
            other => Ok(vec![self.eval_expr(other, env)?]),
        }
    }

    fn eval_expr(&mut self, e: &Expr, env: &Env) -> Result<Value> {
        Ok(match e {
            Expr::Nil => Value::Nil,
            Expr::True => Value::Bool(true),
            Expr::False => Value::Bool(false),
            Expr::Number(n) => Value::Number(*n),
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::Name(n) => match env.lookup(n) {
                Some(v) => v,
                None => self.global(n),
            },
            Expr::Receiver => self.receivers.last().cloned().unwrap_or_default(),
            Expr::Index { obj, key, line } => {
                let o = self.eval_expr(obj, env)?;
                let k = self.eval_expr(key, env)?;
                self.index_get(&o, &k).map_err(|err| err.at_line(*line))?
            }
            Expr::Call { .. } | Expr::BindReceiver { .. } => {
                self.eval_multi(e, env)?.into_iter().next().unwrap_or_default()
            }
            Expr::Paren(inner) => self.eval_expr(inner, env)?,
            Expr::Function(body) => self.closure(body, env),
            Expr::Table(items) => self.table_constructor(items, env)?,
            Expr::Binary { op, lhs, rhs, line } => self.binary(*op, lhs, rhs, env).map_err(|err| err.at_line(*line))?,
            Expr::Unary { op, operand, line } => {
                let v = self.eval_expr(operand, env)?;
                match op {
                    UnOp::Not => Value::Bool(!v.truthy()),
                    UnOp::Neg => match v {
                        Value::Number(n) => Value::Number(-n),
                        other => {
                            return Err(ScriptError::runtime(format!(
                                "attempt to perform arithmetic on a {} value",
                                other.type_name()
                            ))
                            .at_line(*line))
                        }
                    },
                }
            }
        })
    }

    fn table_constructor(&mut self, items: &[TableItem], env: &Env) -> Result<Value> {
        let t = TableRef::new();
        let mut next_index = 1.0;
        for (i, item) in items.iter().enumerate() {
            match item {
                TableItem::Keyed(k, v) => {
                    let k = self.eval_expr(k, env)?;
                    let v = self.eval_expr(v, env)?;
                    t.raw_set(Key::from_value(&k)?, v);
                }
                TableItem::Positional(v) => {
                    let is_last = i + 1 == items.len();
                    let vals = if is_last && v.is_multi() {
                        self.eval_multi(v, env)?
                    } else {
                        vec![self.eval_expr(v, env)?]
                    };
                    for v in vals {
                        t.raw_set(Key::from_value(&Value::Number(next_index))?, v);
                        next_index += 1.0;
                    }
                }
            }
        }
        Ok(Value::Table(t))
    }

    fn binary(&mut self, op: BinOp, lhs: &Expr, rhs: &Expr, env: &Env) -> Result<Value> {
        match op {
            BinOp::And => {
                let l = self.eval_expr(lhs, env)?;
                return if l.truthy() { self.eval_expr(rhs, env) } else { Ok(l) };
            }
            BinOp::Or => {
                let l = self.eval_expr(lhs, env)?;
                return if l.truthy() { Ok(l) } else { self.eval_expr(rhs, env) };
            }
            _ => {}
        }
        let l = self.eval_expr(lhs, env)?;
        let r = self.eval_expr(rhs, env)?;
        arith(op, &l, &r)
    }
}

fn arith(op: BinOp, l: &Value, r: &Value) -> Result<Value> {
    use Value::{Number as N, Str as S};
    let v = match (op, l, r) {
        (BinOp::Add, N(a), N(b)) => N(a + b),
        (BinOp::Sub, N(a), N(b)) => N(a - b),
        (BinOp::Mul, N(a), N(b)) => N(a * b),
        (BinOp::Div, N(a), N(b)) => N(a / b),
        (BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div, a, b) => {
            let bad = if matches!(a, N(_)) { b } else { a };
            return Err(ScriptError::runtime(format!(
                "attempt to perform arithmetic on a {} value",
                bad.type_name()
            )));
        }
        (BinOp::Concat, a @ (N(_) | S(_)), b @ (N(_) | S(_))) => Value::str(format!("{a}{b}")),
        (BinOp::Concat, a, b) => {
            let bad = if matches!(a, N(_) | S(_)) { b } else { a };
            return Err(ScriptError::runtime(format!(
                "attempt to concatenate a {} value",
                bad.type_name()
            )));
        }
        (BinOp::Eq, a, b) => Value::Bool(a == b),
        (BinOp::Ne, a, b) => Value::Bool(a != b),
        (BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge, a, b) => {
            let ord = match (a, b) {
                (N(x), N(y)) => x.partial_cmp(y),
                (S(x), S(y)) => Some(x.cmp(y)),
                _ => {
                    return Err(ScriptError::runtime(format!(
                        "attempt to compare {} with {}",
                        a.type_name(),
                        b.type_name()
                    )))
                }
            };
            let holds = match ord {
                None => false,
                Some(o) => match op {
                    BinOp::Lt => o.is_lt(),
                    BinOp::Le => o.is_le(),
                    BinOp::Gt => o.is_gt(),
                    _ => o.is_ge(),
                },
            };
            Value::Bool(holds)
        }
        (BinOp::And | BinOp::Or, _, _) => unreachable!("short-circuit operators handled earlier"),
    };
    Ok(v)
}

impl HostContext for Interpreter {
    fn world(&mut self) -> &mut HostWorld {
        &mut self.world
    }

    fn call_method(
        &mut self,
        target: &HostValue,
        name: &str,
        args: Vec<HostValue>,
    ) -> std::result::Result<HostValue, HostError> {
        match target {
            HostValue::Wrapper(w) => Ok(inbound::wrapper_invoke(self, w, name, args)?),
            _ => crate::host::call_object_method(self, target, name, args),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str) -> Vec<Value> {
        Interpreter::new().exec(src).unwrap_or_else(|e| panic!("{src}: {e}"))
    }

    fn run_err(src: &str) -> ScriptError {
        Interpreter::new().exec(src).unwrap_err()
    }

    #[test]
    fn constant_arithmetic() {
        assert_eq!(run("return 1+2"), vec![Value::Number(3.0)]);
        assert_eq!(run("return nil"), vec![Value::Nil]);
        assert_eq!(run("return 7 / 2, 2 * 3 - 1"), vec![3.5.into(), 5.0.into()]);
        assert!(run("x = 1").is_empty());
    }

    #[test]
    fn point_script_on_native_table() {
        let src = "point = {x=0, y=0}
            function point:move (dx,dy)
              self.x = self.x + dx
              self.y = self.y + dy
            end
            point:move(2,3)
            point.x = point.x+1
            point.y = point.y+1
            return point.x, point.y";
        assert_eq!(run(src), vec![3.0.into(), 4.0.into()]);
    }

    #[test]
    fn arithmetic_on_text_is_a_runtime_error() {
        let err = run_err("x = 1\ny = 'a' + 1");
        assert_eq!(err.kind, ErrorKind::Runtime);
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn calling_a_number_is_not_callable() {
        let mut it = Interpreter::new();
        let err = it.call(&Value::Number(3.0), vec![]).unwrap_err();
        assert_eq!(err.kind, ErrorKind::NotCallable);
        let err = run_err("t = {}\nt.f()");
        assert_eq!(err.kind, ErrorKind::NotCallable);
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn arity_rules() {
        let mut it = Interpreter::new();
        it.exec("function id(a) return a end function two(a, b) return a, b end").unwrap();
        let id = it.global("id");
        assert_eq!(it.call(&id, vec![5.0.into()]).unwrap(), vec![5.0.into()]);
        assert_eq!(it.call(&id, vec![5.0.into(), 6.0.into()]).unwrap(), vec![5.0.into()]);
        let two = it.global("two");
        assert_eq!(it.call(&two, vec![1.0.into()]).unwrap(), vec![1.0.into(), Value::Nil]);
    }

    #[test]
    fn closures_capture_upvalues() {
        assert_eq!(
            run("local n = 10 local function f() return n + 1 end return f()"),
            vec![11.0.into()]
        );
    }

    #[test]
    fn captured_locals_are_shared_both_ways() {
        // Caller mutates after capture: the closure sees it.
        let src = "local n = 1
            local function get() return n end
            n = 5
            return get()";
        assert_eq!(run(src), vec![5.0.into()]);
        // Closure mutates: the enclosing scope sees it.
        let src = "local n = 1
            local function bump() n = n + 1 end
            bump() bump()
            return n";
        assert_eq!(run(src), vec![3.0.into()]);
        // A fresh loop variable per iteration.
        let src = "fs = {}
            for i = 1, 3 do fs[i] = function() return i end end
            return fs[1](), fs[3]()";
        assert_eq!(run(src), vec![1.0.into(), 3.0.into()]);
    }

    #[test]
    fn unknown_name_assignment_creates_global() {
        let mut it = Interpreter::new();
        it.exec("function f() g = 9 end f()").unwrap();
        assert_eq!(it.global("g"), 9.0.into());
        it.exec("local l = 1").unwrap();
        assert!(it.global("l").is_nil());
    }

    #[test]
    fn control_flow() {
        assert_eq!(
            run("local s = 0 for i = 1, 10 do s = s + i end return s"),
            vec![55.0.into()]
        );
        assert_eq!(
            run("local s = 0 for i = 10, 1, -2 do s = s + i end return s"),
            vec![30.0.into()]
        );
        assert_eq!(
            run("local n = 0 while n < 5 do n = n + 1 end return n"),
            vec![5.0.into()]
        );
        assert_eq!(
            run("local function sign(x) if x < 0 then return -1 elseif x == 0 then return 0 else return 1 end end
                 return sign(-3), sign(0), sign(8)"),
            vec![(-1.0).into(), 0.0.into(), 1.0.into()]
        );
        assert_eq!(run_err("for i = 1, 2, 0 do end").kind, ErrorKind::Runtime);
    }

    #[test]
    fn logic_and_comparison() {
        assert_eq!(
            run("return 1 < 2, 'a' < 'b', 1 == 1, {} == {}, nil or 4, false and 1, not nil"),
            vec![
                true.into(),
                true.into(),
                true.into(),
                false.into(),
                4.0.into(),
                false.into(),
                true.into()
            ]
        );
        assert_eq!(run_err("return 1 < 'a'").kind, ErrorKind::Runtime);
    }

    #[test]
    fn concatenation() {
        assert_eq!(run("return 'x=' .. 42 .. '!'"), vec![Value::str("x=42!")]);
        assert_eq!(run_err("return 'a' .. nil").kind, ErrorKind::Runtime);
    }

    #[test]
    fn multiple_results_expand_only_in_last_position() {
        let src = "function two() return 1, 2 end
            local a, b, c = two(), two()
            return a, b, c, (two())";
        assert_eq!(run(src), vec![1.0.into(), 1.0.into(), 2.0.into(), 1.0.into()]);
        assert_eq!(run("function two() return 1, 2 end t = {two()} return t[2]"), vec![2.0.into()]);
    }

    #[test]
    fn colon_call_evaluates_receiver_once() {
        let src = "count = 0
            obj = {}
            function obj:f(a) return a + 1 end
            function g() count = count + 1 return obj end
            r = g():f(1)
            return r, count";
        assert_eq!(run(src), vec![2.0.into(), 1.0.into()]);
    }

    #[test]
    fn table_get_and_set_with_fallbacks() {
        let mut it = Interpreter::new();
        let t = TableRef::new();
        t.raw_set_str("x", 0.0.into());
        assert_eq!(it.table_get(&t, &"x".into()).unwrap(), 0.0.into());
        assert_eq!(it.table_get(&t, &"z".into()).unwrap(), Value::Nil);
        let seven = Function::native("seven", |_, _| Ok(vec![7.0.into()]));
        it.set_fallback(&t, FallbackKind::Index, seven);
        assert_eq!(it.table_get(&t, &"anything".into()).unwrap(), 7.0.into());
        assert_eq!(it.table_get(&t, &"x".into()).unwrap(), 0.0.into());
        assert_eq!(it.table_get(&t, &Value::Nil).unwrap_err().kind, ErrorKind::KeyIsNil);
        assert_eq!(
            it.table_set(&t, Value::Nil, 1.0.into()).unwrap_err().kind,
            ErrorKind::KeyIsNil
        );
        it.table_set(&t, "x".into(), Value::Nil).unwrap();
        assert!(t.raw_get_str("x").is_nil());
    }

    #[test]
    fn newindex_fallback_records_writes() {
        let mut it = Interpreter::new();
        it.exec(
            "seen = {}
             n = 0
             t = {a = 1}
             setfallback(t, 'newindex', function(tbl, k, v) n = n + 1 seen[n] = k .. '=' .. v end)
             t.a = 5
             t.b = 6",
        )
        .unwrap();
        let out = it.exec("return n, seen[1], seen[2], t.a, rawget(t, 'b')").unwrap();
        assert_eq!(
            out,
            vec![2.0.into(), Value::str("a=5"), Value::str("b=6"), 1.0.into(), Value::Nil]
        );
    }

    #[test]
    fn raw_set_bypasses_newindex() {
        let mut it = Interpreter::new();
        it.exec("t = {} setfallback(t, 'newindex', function() end) rawset(t, 'k', 3) t.k = 4")
            .unwrap();
        assert_eq!(it.exec("return t.k").unwrap(), vec![3.0.into()]);
    }

    #[test]
    fn reinstalled_fallback_replaces_previous() {
        let mut it = Interpreter::new();
        it.exec(
            "a = 0 b = 0 t = {}
             setfallback(t, 'index', function() a = a + 1 end)
             setfallback(t, 'index', function() b = b + 1 end)
             local _ = t.q",
        )
        .unwrap();
        assert_eq!(it.exec("return a, b").unwrap(), vec![0.0.into(), 1.0.into()]);
    }

    #[test]
    fn deep_recursion_is_reported() {
        let err = run_err("local function f(n) return f(n + 1) end return f(1)");
        assert_eq!(err.kind, ErrorKind::StackOverflow);
    }

    #[test]
    fn index_non_table() {
        assert_eq!(run_err("x = 1 return x.y").kind, ErrorKind::Runtime);
        assert_eq!(run_err("x = 'a' x.y = 1").kind, ErrorKind::Runtime);
    }
}
