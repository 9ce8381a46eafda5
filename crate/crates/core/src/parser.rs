//! Recursive-descent parser. Method definitions and colon calls are
//! desugared while parsing, so the resulting tree never contains them.

use std::rc::Rc;

use crate::ast::{BinOp, Block, Chunk, Expr, FuncBody, Stmt, TableItem, UnOp};
use crate::error::{Result, ScriptError};
use crate::lexer::{tokenize, Token, TokenKind};

/// Tokenizes and parses `source`.
pub fn parse_source(source: &str) -> Result<Chunk> {
    parse(&tokenize(source)?)
}

pub fn parse(tokens: &[Token]) -> Result<Chunk> {
    let mut p = Parser { tokens, pos: 0 };
    let block = p.block()?;
    if let Some(tok) = p.peek() {
        return Err(ScriptError::parse(tok.line, "<eof>", &tok.to_string()));
    }
    Ok(Chunk { block })
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

// Binary precedence, lowest first. `..` is right associative.
fn binary_op(tok: &Token) -> Option<(BinOp, u8)> {
    let op = match (tok.kind, tok.lexeme.as_str()) {
        (TokenKind::Keyword, "or") => (BinOp::Or, 1),
        (TokenKind::Keyword, "and") => (BinOp::And, 2),
        (TokenKind::Operator, "==") => (BinOp::Eq, 3),
        (TokenKind::Operator, "~=") => (BinOp::Ne, 3),
        (TokenKind::Operator, "<") => (BinOp::Lt, 3),
        (TokenKind::Operator, "<=") => (BinOp::Le, 3),
        (TokenKind::Operator, ">") => (BinOp::Gt, 3),
        (TokenKind::Operator, ">=") => (BinOp::Ge, 3),
        (TokenKind::Operator, "..") => (BinOp::Concat, 4),
        (TokenKind::Operator, "+") => (BinOp::Add, 5),
        (TokenKind::Operator, "-") => (BinOp::Sub, 5),
        (TokenKind::Operator, "*") => (BinOp::Mul, 6),
        (TokenKind::Operator, "/") => (BinOp::Div, 6),
        _ => return None,
    };
    Some(op)
}

const UNARY_PRECEDENCE: u8 = 7;

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_is(&self, kind: TokenKind, lexeme: &str) -> bool {
        self.peek().is_some_and(|t| t.is(kind, lexeme))
    }

    fn line(&self) -> u32 {
        self.peek()
            .or_else(|| self.tokens.last())
            .map_or(1, |t| t.line)
    }

    fn found(&self) -> String {
        self.peek().map_or_else(|| "<eof>".to_string(), Token::to_string)
    }

    fn advance(&mut self) -> Option<&'a Token> {
        let tok = self.tokens.get(self.pos);
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn accept(&mut self, kind: TokenKind, lexeme: &str) -> bool {
        if self.peek_is(kind, lexeme) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind, lexeme: &str) -> Result<&'a Token> {
        if self.peek_is(kind, lexeme) {
            Ok(self.advance().unwrap())
        } else {
            Err(ScriptError::parse(self.line(), &format!("'{lexeme}'"), &self.found()))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<&'a Token> {
        self.expect(TokenKind::Keyword, kw)
    }

    fn expect_punct(&mut self, p: &str) -> Result<&'a Token> {
        self.expect(TokenKind::Punctuation, p)
    }

    fn name(&mut self) -> Result<Rc<str>> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.pos += 1;
                Ok(t.lexeme.as_str().into())
            }
            _ => Err(ScriptError::parse(self.line(), "identifier", &self.found())),
        }
    }

    fn block_ends(&self) -> bool {
        match self.peek() {
            None => true,
            Some(t) => {
                t.kind == TokenKind::Keyword && matches!(t.lexeme.as_str(), "end" | "else" | "elseif")
            }
        }
    }

    fn block(&mut self) -> Result<Block> {
        let mut statements = Vec::new();
        while !self.block_ends() {
            if self.accept(TokenKind::Punctuation, ";") {
                continue;
            }
            let is_return = self.peek_is(TokenKind::Keyword, "return");
            statements.push(self.statement()?);
            if is_return {
                while self.accept(TokenKind::Punctuation, ";") {}
                if !self.block_ends() {
                    return Err(ScriptError::parse(self.line(), "end of block after return", &self.found()));
                }
            }
        }
        Ok(Block::new(statements))
    }

    fn statement(&mut self) -> Result<Stmt> {
        let line = self.line();
        let tok = self.peek().unwrap();
        if tok.kind == TokenKind::Keyword {
            match tok.lexeme.as_str() {
                "local" => return self.local_statement(),
                "function" => return self.function_statement(),
                "if" => return self.if_statement(),
                "while" => {
                    self.pos += 1;
                    let cond = self.expr()?;
                    self.expect_keyword("do")?;
                    let body = self.block()?;
                    self.expect_keyword("end")?;
                    return Ok(Stmt::While { cond, body, line });
                }
                "for" => return self.for_statement(),
                "return" => {
                    self.pos += 1;
                    let values = if self.block_ends() || self.peek_is(TokenKind::Punctuation, ";") {
                        Vec::new()
                    } else {
                        self.expr_list()?
                    };
                    return Ok(Stmt::Return { values, line });
                }
                _ => {}
            }
        }
        self.assignment_or_call()
    }

    fn local_statement(&mut self) -> Result<Stmt> {
        let line = self.line();
        self.expect_keyword("local")?;
        if self.accept(TokenKind::Keyword, "function") {
            let name = self.name()?;
            let func = self.function_body(false)?;
            return Ok(Stmt::LocalFunction { name, func, line });
        }
        let mut names = vec![self.name()?];
        while self.accept(TokenKind::Punctuation, ",") {
            names.push(self.name()?);
        }
        let values = if self.accept(TokenKind::Operator, "=") {
            self.expr_list()?
        } else {
            Vec::new()
        };
        Ok(Stmt::Local {
            names,
            values,
            line,
        })
    }

    /// `function a.b.c(...)` or `function a.b:m(...)`, desugared to an assignment.
    fn function_statement(&mut self) -> Result<Stmt> {
        let line = self.line();
        self.expect_keyword("function")?;
        let mut target = Expr::Name(self.name()?);
        let mut is_method = false;
        loop {
            if self.accept(TokenKind::Punctuation, ".") {
                let key = self.name()?;
                target = Expr::Index {
                    obj: Box::new(target),
                    key: Box::new(Expr::Str(key)),
                    line,
                };
            } else if self.accept(TokenKind::Punctuation, ":") {
                let key = self.name()?;
                target = Expr::Index {
                    obj: Box::new(target),
                    key: Box::new(Expr::Str(key)),
                    line,
                };
                is_method = true;
                break;
            } else {
                break;
            }
        }
        let func = self.function_body(is_method)?;
        Ok(Stmt::Assign {
            targets: vec![target],
            values: vec![Expr::Function(func)],
            line,
        })
    }

    fn function_body(&mut self, with_self: bool) -> Result<Rc<FuncBody>> {
        let line = self.line();
        self.expect_punct("(")?;
        let mut params: Vec<Rc<str>> = Vec::new();
        if with_self {
            params.push("self".into());
        }
        if !self.peek_is(TokenKind::Punctuation, ")") {
            params.push(self.name()?);
            while self.accept(TokenKind::Punctuation, ",") {
                params.push(self.name()?);
            }
        }
        self.expect_punct(")")?;
        let body = self.block()?;
        self.expect_keyword("end")?;
        Ok(Rc::new(FuncBody { params, body, line }))
    }

    fn if_statement(&mut self) -> Result<Stmt> {
        let line = self.line();
        self.expect_keyword("if")?;
        let mut arms = Vec::new();
        let cond = self.expr()?;
        self.expect_keyword("then")?;
        arms.push((cond, self.block()?));
        let mut otherwise = None;
        loop {
            if self.accept(TokenKind::Keyword, "elseif") {
                let cond = self.expr()?;
                self.expect_keyword("then")?;
                arms.push((cond, self.block()?));
            } else if self.accept(TokenKind::Keyword, "else") {
                otherwise = Some(self.block()?);
                self.expect_keyword("end")?;
                break;
            } else {
                self.expect_keyword("end")?;
                break;
            }
        }
        Ok(Stmt::If {
            arms,
            otherwise,
            line,
        })
    }

    fn for_statement(&mut self) -> Result<Stmt> {
        let line = self.line();
        self.expect_keyword("for")?;
        let var = self.name()?;
        self.expect(TokenKind::Operator, "=")?;
        let start = self.expr()?;
        self.expect_punct(",")?;
        let limit = self.expr()?;
        let step = if self.accept(TokenKind::Punctuation, ",") {
            Some(self.expr()?)
        } else {
            None
        };
        self.expect_keyword("do")?;
        let body = self.block()?;
        self.expect_keyword("end")?;
        Ok(Stmt::NumericFor {
            var,
            start,
            limit,
            step,
            body,
            line,
        })
    }

    fn assignment_or_call(&mut self) -> Result<Stmt> {
        let line = self.line();
        let first = self.suffixed_expr()?;
        if self.peek_is(TokenKind::Operator, "=") || self.peek_is(TokenKind::Punctuation, ",") {
            let mut targets = vec![first];
            while self.accept(TokenKind::Punctuation, ",") {
                targets.push(self.suffixed_expr()?);
            }
            for t in &targets {
                if !matches!(t, Expr::Name(_) | Expr::Index { .. }) {
                    return Err(ScriptError::parse(line, "assignable expression", "call or literal"));
                }
            }
            self.expect(TokenKind::Operator, "=")?;
            let values = self.expr_list()?;
            return Ok(Stmt::Assign {
                targets,
                values,
                line,
            });
        }
        if first.is_multi() {
            Ok(Stmt::Call { call: first, line })
        } else {
            Err(ScriptError::parse(self.line(), "'=' or call", &self.found()))
        }
    }

    fn expr_list(&mut self) -> Result<Vec<Expr>> {
        let mut list = vec![self.expr()?];
        while self.accept(TokenKind::Punctuation, ",") {
            list.push(self.expr()?);
        }
        Ok(list)
    }

    fn expr(&mut self) -> Result<Expr> {
        self.binary(0)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some((op, prec)) = self.peek().and_then(binary_op) {
            if prec <= min_prec {
                break;
            }
            let line = self.line();
            self.pos += 1;
            let next_min = if op == BinOp::Concat { prec - 1 } else { prec };
            let rhs = self.binary(next_min)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                line,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        let line = self.line();
        let op = if self.accept(TokenKind::Operator, "-") {
            Some(UnOp::Neg)
        } else if self.accept(TokenKind::Keyword, "not") {
            Some(UnOp::Not)
        } else {
            None
        };
        match op {
            Some(op) => {
                let operand = self.binary(UNARY_PRECEDENCE - 1)?;
                // binary() above stops before any operator of lower precedence
                // than unary, so only the operand itself is consumed.
                Ok(Expr::Unary {
                    op,
                    operand: Box::new(operand),
                    line,
                })
            }
            None => self.simple(),
        }
    }

    fn simple(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek() else {
            return Err(ScriptError::parse(self.line(), "expression", "<eof>"));
        };
        let e = match (tok.kind, tok.lexeme.as_str()) {
            (TokenKind::Number, text) => {
                self.pos += 1;
                Expr::Number(text.parse().expect("lexer validated number"))
            }
            (TokenKind::Str, _) => {
                self.pos += 1;
                Expr::Str(tok.value.as_deref().unwrap_or_default().into())
            }
            (TokenKind::Keyword, "nil") => {
                self.pos += 1;
                Expr::Nil
            }
            (TokenKind::Keyword, "true") => {
                self.pos += 1;
                Expr::True
            }
            (TokenKind::Keyword, "false") => {
                self.pos += 1;
                Expr::False
            }
            (TokenKind::Keyword, "function") => {
                self.pos += 1;
                Expr::Function(self.function_body(false)?)
            }
            (TokenKind::Punctuation, "{") => self.table()?,
            _ => self.suffixed_expr()?,
        };
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr> {
        if self.accept(TokenKind::Punctuation, "(") {
            let inner = self.expr()?;
            self.expect_punct(")")?;
            return Ok(if inner.is_multi() {
                Expr::Paren(Box::new(inner))
            } else {
                inner
            });
        }
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => Ok(Expr::Name(self.name()?)),
            _ => Err(ScriptError::parse(self.line(), "expression", &self.found())),
        }
    }

    fn suffixed_expr(&mut self) -> Result<Expr> {
        let mut e = self.primary()?;
        loop {
            let line = self.line();
            let Some(tok) = self.peek() else { break };
            match (tok.kind, tok.lexeme.as_str()) {
                (TokenKind::Punctuation, ".") => {
                    self.pos += 1;
                    let key = self.name()?;
                    e = Expr::Index {
                        obj: Box::new(e),
                        key: Box::new(Expr::Str(key)),
                        line,
                    };
                }
                (TokenKind::Punctuation, "[") => {
                    self.pos += 1;
                    let key = self.expr()?;
                    self.expect_punct("]")?;
                    e = Expr::Index {
                        obj: Box::new(e),
                        key: Box::new(key),
                        line,
                    };
                }
                (TokenKind::Punctuation, ":") => {
                    self.pos += 1;
                    let name = self.name()?;
                    let args = self.call_args()?;
                    e = Expr::colon_call(e, &name, args, line);
                }
                (TokenKind::Punctuation, "(" | "{") | (TokenKind::Str, _) => {
                    let args = self.call_args()?;
                    e = Expr::Call {
                        callee: Box::new(e),
                        args,
                        line,
                    };
                }
                _ => break,
            }
        }
        Ok(e)
    }

    fn call_args(&mut self) -> Result<Vec<Expr>> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Str => {
                self.pos += 1;
                Ok(vec![Expr::Str(t.value.as_deref().unwrap_or_default().into())])
            }
            Some(t) if t.is(TokenKind::Punctuation, "{") => Ok(vec![self.table()?]),
            _ => {
                self.expect_punct("(")?;
                if self.accept(TokenKind::Punctuation, ")") {
                    return Ok(Vec::new());
                }
                let args = self.expr_list()?;
                self.expect_punct(")")?;
                Ok(args)
            }
        }
    }

    fn table(&mut self) -> Result<Expr> {
        self.expect_punct("{")?;
        let mut items = Vec::new();
        while !self.peek_is(TokenKind::Punctuation, "}") {
            if self.accept(TokenKind::Punctuation, "[") {
                let key = self.expr()?;
                self.expect_punct("]")?;
                self.expect(TokenKind::Operator, "=")?;
                items.push(TableItem::Keyed(key, self.expr()?));
            } else if self.peek().is_some_and(|t| t.kind == TokenKind::Identifier)
                && self
                    .tokens
                    .get(self.pos + 1)
                    .is_some_and(|t| t.is(TokenKind::Operator, "="))
            {
                let key = self.name()?;
                self.pos += 1;
                items.push(TableItem::Keyed(Expr::Str(key), self.expr()?));
            } else {
                items.push(TableItem::Positional(self.expr()?));
            }
            if !self.accept(TokenKind::Punctuation, ",") && !self.accept(TokenKind::Punctuation, ";") {
                break;
            }
        }
        self.expect_punct("}")?;
        Ok(Expr::Table(items))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ErrorKind;

    fn parse_ok(src: &str) -> Chunk {
        parse_source(src).unwrap_or_else(|e| panic!("{src}: {e}"))
    }

    #[test]
    fn point_table_constructor() {
        let chunk = parse_ok("point = {x=0, y=0}");
        assert_eq!(
            chunk.block.statements,
            vec![Stmt::Assign {
                targets: vec![Expr::Name("point".into())],
                values: vec![Expr::Table(vec![
                    TableItem::Keyed(Expr::Str("x".into()), Expr::Number(0.0)),
                    TableItem::Keyed(Expr::Str("y".into()), Expr::Number(0.0)),
                ])],
                line: 1,
            }]
        );
    }

    #[test]
    fn method_definition_gets_explicit_self() {
        let chunk = parse_ok("function point:move (dx,dy)\n self.x = self.x + dx\nend");
        let Stmt::Assign { targets, values, .. } = &chunk.block.statements[0] else {
            panic!("expected assignment");
        };
        assert!(matches!(&targets[0], Expr::Index { obj, key, .. }
            if **obj == Expr::Name("point".into()) && **key == Expr::Str("move".into())));
        let Expr::Function(f) = &values[0] else {
            panic!("expected function");
        };
        let params: Vec<&str> = f.params.iter().map(|p| &**p).collect();
        assert_eq!(params, ["self", "dx", "dy"]);
    }

    #[test]
    fn colon_call_on_name_passes_receiver() {
        let sugar = parse_ok("point:move(2,3)");
        let plain = parse_ok("point[\"move\"](point,2,3)");
        assert_eq!(sugar, plain);
        assert_eq!(parse_ok("t:f()"), parse_ok("t[\"f\"](t)"));
    }

    #[test]
    fn colon_call_on_expression_binds_once() {
        let chunk = parse_ok("g():f(1)");
        let Stmt::Call { call, .. } = &chunk.block.statements[0] else {
            panic!()
        };
        let Expr::BindReceiver { value, body } = call else {
            panic!("expected a receiver binding, got {call:?}")
        };
        assert!(matches!(**value, Expr::Call { .. }));
        let Expr::Call { callee, args, .. } = &**body else {
            panic!()
        };
        assert!(matches!(&**callee, Expr::Index { obj, .. } if **obj == Expr::Receiver));
        assert_eq!(args[0], Expr::Receiver);
        assert_eq!(args[1], Expr::Number(1.0));
    }

    #[test]
    fn unbalanced_end_is_a_parse_error() {
        let err = parse_source("x = 1\nend").unwrap_err();
        assert_eq!(err.kind, ErrorKind::Parse);
        assert_eq!(err.line, Some(2));
        assert!(parse_source("(((").is_err());
        assert!(parse_source("if x then y = 1").is_err());
        assert!(parse_source("x").is_err());
        assert!(parse_source("f() = 1").is_err());
    }

    #[test]
    fn precedence() {
        let chunk = parse_ok("return 1 + 2 * 3 == 7 and -2 < 1");
        let printed = chunk.to_string();
        assert_eq!(printed.trim(), "return (((1.0 + (2.0 * 3.0)) == 7.0) and ((-2.0) < 1.0));");
        let concat = parse_ok("return 'a' .. 'b' .. 'c'").to_string();
        assert_eq!(concat.trim(), r#"return ("a" .. ("b" .. "c"));"#);
        let left = parse_ok("return 1 - 2 - 3").to_string();
        assert_eq!(left.trim(), "return ((1.0 - 2.0) - 3.0);");
    }

    #[test]
    fn return_must_end_block() {
        assert!(parse_source("return 1 x = 2").is_err());
        assert!(parse_source("if a then return end").is_ok());
        assert!(parse_source("return;").is_ok());
    }

    #[test]
    fn control_flow_forms() {
        parse_ok("for i = 1, 10 do x = i end");
        parse_ok("for i = 10, 1, -1 do end");
        parse_ok("while x < 3 do x = x + 1 end");
        parse_ok("if a then b() elseif c then d() else e() end");
        parse_ok("local a, b = 1, 2 local function f(n) return n end");
    }
}
