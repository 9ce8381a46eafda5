//! Syntax tree produced by the parser.
//!
//! The tree is already desugared: method definitions are plain assignments
//! of a function whose first parameter is `self`, and colon calls are plain
//! calls that pass the receiver explicitly. A receiver that is not a simple
//! name is evaluated once into [`Expr::BindReceiver`] and read back through
//! [`Expr::Receiver`].

use std::fmt::{self, Write};
use std::rc::Rc;

use crate::lexer::KEYWORDS;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chunk {
    pub block: Block,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Block {
    pub statements: Vec<Stmt>,
    /// Set when some statement of this block (not a nested one) declares a local.
    pub declares_locals: bool,
}

impl Block {
    pub fn new(statements: Vec<Stmt>) -> Self {
        let declares_locals = statements
            .iter()
            .any(|s| matches!(s, Stmt::Local { .. } | Stmt::LocalFunction { .. }));
        Block {
            statements,
            declares_locals,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign {
        targets: Vec<Expr>,
        values: Vec<Expr>,
        line: u32,
    },
    Local {
        names: Vec<Rc<str>>,
        values: Vec<Expr>,
        line: u32,
    },
    LocalFunction {
        name: Rc<str>,
        func: Rc<FuncBody>,
        line: u32,
    },
    Call {
        call: Expr,
        line: u32,
    },
    If {
        arms: Vec<(Expr, Block)>,
        otherwise: Option<Block>,
        line: u32,
    },
    While {
        cond: Expr,
        body: Block,
        line: u32,
    },
    NumericFor {
        var: Rc<str>,
        start: Expr,
        limit: Expr,
        step: Option<Expr>,
        body: Block,
        line: u32,
    },
    Return {
        values: Vec<Expr>,
        line: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuncBody {
    pub params: Vec<Rc<str>>,
    pub body: Block,
    pub line: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Concat,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Concat => "..",
            BinOp::Eq => "==",
            BinOp::Ne => "~=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableItem {
    Keyed(Expr, Expr),
    Positional(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Nil,
    True,
    False,
    Number(f64),
    Str(Rc<str>),
    Name(Rc<str>),
    Index {
        obj: Box<Expr>,
        key: Box<Expr>,
        line: u32,
    },
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
        line: u32,
    },
    /// Evaluates `value` once, makes it readable as [`Expr::Receiver`]
    /// inside `body`, then evaluates `body`.
    BindReceiver {
        value: Box<Expr>,
        body: Box<Expr>,
    },
    /// The innermost value bound by an enclosing [`Expr::BindReceiver`].
    Receiver,
    Function(Rc<FuncBody>),
    Table(Vec<TableItem>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        line: u32,
    },
    Unary {
        op: UnOp,
        operand: Box<Expr>,
        line: u32,
    },
    /// Parenthesized multi-value expression, truncated to one value.
    Paren(Box<Expr>),
}

impl Expr {
    pub fn is_multi(&self) -> bool {
        matches!(self, Expr::Call { .. } | Expr::BindReceiver { .. })
    }

    /// Rewrites `recv:name(args)` into an explicit call passing the receiver.
    pub fn colon_call(recv: Expr, name: &str, args: Vec<Expr>, line: u32) -> Expr {
        let method_call = |r: Expr| {
            let mut full = Vec::with_capacity(args.len() + 1);
            full.push(r.clone());
            full.extend(args.iter().cloned());
            Expr::Call {
                callee: Box::new(Expr::Index {
                    obj: Box::new(r),
                    key: Box::new(Expr::Str(name.into())),
                    line,
                }),
                args: full,
                line,
            }
        };
        match recv {
            Expr::Name(_) => method_call(recv),
            other => Expr::BindReceiver {
                value: Box::new(other),
                body: Box::new(method_call(Expr::Receiver)),
            },
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&s)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\0' => out.push_str("\\0"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn number_literal(n: f64) -> String {
    if n.is_infinite() {
        "1e999".to_string()
    } else {
        format!("{n:?}")
    }
}

/// Source printer. Output re-parses to a structurally identical tree.
struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn block(&mut self, block: &Block) {
        self.indent += 1;
        for stmt in &block.statements {
            self.stmt(stmt);
        }
        self.indent -= 1;
    }

    fn list(&self, exprs: &[Expr]) -> String {
        exprs.iter().map(|e| self.expr(e)).collect::<Vec<_>>().join(", ")
    }

    fn stmt(&mut self, stmt: &Stmt) {
        match stmt {
            Stmt::Assign {
                targets, values, ..
            } => {
                let text = format!("{} = {};", self.list(targets), self.list(values));
                self.line(&text);
            }
            Stmt::Local { names, values, .. } => {
                let names = names.iter().map(|n| &**n).collect::<Vec<_>>().join(", ");
                if values.is_empty() {
                    self.line(&format!("local {names};"));
                } else {
                    let text = format!("local {names} = {};", self.list(values));
                    self.line(&text);
                }
            }
            Stmt::LocalFunction { name, func, .. } => {
                self.line(&format!("local function {name}({})", params(func)));
                self.block(&func.body);
                self.line("end;");
            }
            Stmt::Call { call, .. } => {
                let text = format!("{};", self.expr(call));
                self.line(&text);
            }
            Stmt::If {
                arms, otherwise, ..
            } => {
                for (i, (cond, body)) in arms.iter().enumerate() {
                    let kw = if i == 0 { "if" } else { "elseif" };
                    let text = format!("{kw} {} then", self.expr(cond));
                    self.line(&text);
                    self.block(body);
                }
                if let Some(body) = otherwise {
                    self.line("else");
                    self.block(body);
                }
                self.line("end;");
            }
            Stmt::While { cond, body, .. } => {
                let text = format!("while {} do", self.expr(cond));
                self.line(&text);
                self.block(body);
                self.line("end;");
            }
            Stmt::NumericFor {
                var,
                start,
                limit,
                step,
                body,
                ..
            } => {
                let mut text = format!("for {var} = {}, {}", self.expr(start), self.expr(limit));
                if let Some(step) = step {
                    let _ = write!(text, ", {}", self.expr(step));
                }
                text.push_str(" do");
                self.line(&text);
                self.block(body);
                self.line("end;");
            }
            Stmt::Return { values, .. } => {
                let text = if values.is_empty() {
                    "return;".to_string()
                } else {
                    format!("return {};", self.list(values))
                };
                self.line(&text);
            }
        }
    }

    /// Prints an expression in a position that requires a prefix expression
    /// (callee, indexed object, colon receiver).
    fn prefix(&self, e: &Expr) -> String {
        match e {
            Expr::Name(_) | Expr::Index { .. } | Expr::Call { .. } | Expr::Paren(_) => self.expr(e),
            Expr::BindReceiver { .. } => self.expr(e),
            other => format!("({})", self.expr(other)),
        }
    }

    fn expr(&self, e: &Expr) -> String {
        match e {
            Expr::Nil => "nil".into(),
            Expr::True => "true".into(),
            Expr::False => "false".into(),
            Expr::Number(n) => number_literal(*n),
            Expr::Str(s) => quote(s),
            Expr::Name(n) => n.to_string(),
            Expr::Receiver => "(receiver)".into(),
            Expr::Index { obj, key, .. } => match &**key {
                Expr::Str(s) if is_identifier(s) => format!("{}.{s}", self.prefix(obj)),
                key => format!("{}[{}]", self.prefix(obj), self.expr(key)),
            },
            Expr::Call { callee, args, .. } => {
                format!("{}({})", self.prefix(callee), self.list(args))
            }
            Expr::BindReceiver { value, body } => {
                // Only produced by colon-call desugaring; print it back in that form.
                if let Expr::Call { callee, args, .. } = &**body {
                    if let Expr::Index { key, .. } = &**callee {
                        if let Expr::Str(name) = &**key {
                            return format!(
                                "{}:{name}({})",
                                self.prefix(value),
                                self.list(&args[1..])
                            );
                        }
                    }
                }
                unreachable!("BindReceiver without a method call body")
            }
            Expr::Function(func) => {
                let mut p = Printer {
                    out: String::new(),
                    indent: self.indent,
                };
                p.block(&func.body);
                let pad = "  ".repeat(self.indent);
                format!("function({})\n{}{pad}end", params(func), p.out)
            }
            Expr::Table(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|item| match item {
                        TableItem::Keyed(Expr::Str(k), v) if is_identifier(k) => {
                            format!("{k} = {}", self.expr(v))
                        }
                        TableItem::Keyed(k, v) => format!("[{}] = {}", self.expr(k), self.expr(v)),
                        TableItem::Positional(v) => self.expr(v),
                    })
                    .collect();
                format!("{{{}}}", parts.join(", "))
            }
            Expr::Binary { op, lhs, rhs, .. } => {
                format!("({} {} {})", self.expr(lhs), op.symbol(), self.expr(rhs))
            }
            Expr::Unary { op, operand, .. } => match op {
                UnOp::Neg => format!("(-{})", self.expr(operand)),
                UnOp::Not => format!("(not {})", self.expr(operand)),
            },
            Expr::Paren(inner) => format!("({})", self.expr(inner)),
        }
    }
}

fn params(func: &FuncBody) -> String {
    func.params.iter().map(|p| &**p).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for Chunk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut p = Printer {
            out: String::new(),
            indent: 0,
        };
        for stmt in &self.block.statements {
            p.stmt(stmt);
        }
        f.write_str(&p.out)
    }
}
