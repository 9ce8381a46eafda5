//! Tokenizer for the script language.

use std::fmt;

use crate::error::ScriptError;

pub const KEYWORDS: &[&str] = &[
    "and", "do", "else", "elseif", "end", "false", "for", "function", "if", "local", "nil", "not",
    "or", "return", "then", "true", "while",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Identifier,
    Number,
    Str,
    Keyword,
    Operator,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Exact source text of the token, quotes included for strings.
    pub lexeme: String,
    pub line: u32,
    /// Decoded contents of a string literal.
    pub value: Option<String>,
}

impl Token {
    pub fn is(&self, kind: TokenKind, lexeme: &str) -> bool {
        self.kind == kind && self.lexeme == lexeme
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TokenKind::Str => write!(f, "string {}", self.lexeme),
            TokenKind::Number => write!(f, "number {}", self.lexeme),
            _ => write!(f, "'{}'", self.lexeme),
        }
    }
}

const OPERATORS: &[&str] = &[
    "..", "==", "~=", "<=", ">=", "=", "<", ">", "+", "-", "*", "/",
];
const PUNCTUATION: &[char] = &['(', ')', '{', '}', '[', ']', ',', ';', ':', '.'];

pub fn tokenize(source: &str) -> Result<Vec<Token>, ScriptError> {
    let mut lexer = Lexer {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        out: Vec::new(),
    };
    lexer.run()?;
    Ok(lexer.out)
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    out: Vec<Token>,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn push(&mut self, kind: TokenKind, lexeme: String, line: u32) {
        self.out.push(Token {
            kind,
            lexeme,
            line,
            value: None,
        });
    }

    fn run(&mut self) -> Result<(), ScriptError> {
        while let Some(c) = self.peek() {
            match c {
                '\n' => {
                    self.line += 1;
                    self.pos += 1;
                }
                c if c.is_whitespace() => self.pos += 1,
                '-' if self.peek_at(1) == Some('-') => self.skip_comment(),
                '"' | '\'' => self.string(c)?,
                c if c.is_ascii_digit() => self.number()?,
                '.' if self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) => self.number()?,
                c if c.is_alphabetic() || c == '_' => self.word(),
                _ => self.symbol(c)?,
            }
        }
        Ok(())
    }

    fn skip_comment(&mut self) {
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            self.pos += 1;
        }
    }

    fn word(&mut self) {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_alphanumeric() || c == '_')
        {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let kind = if KEYWORDS.contains(&text.as_str()) {
            TokenKind::Keyword
        } else {
            TokenKind::Identifier
        };
        self.push(kind, text, self.line);
    }

    fn number(&mut self) -> Result<(), ScriptError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        if text.parse::<f64>().is_err() {
            return Err(ScriptError::lex(self.line, format!("malformed number '{text}'")));
        }
        if self.peek().is_some_and(|c| c.is_alphabetic() || c == '_') {
            return Err(ScriptError::lex(self.line, format!("malformed number near '{text}'")));
        }
        self.push(TokenKind::Number, text, self.line);
        Ok(())
    }

    fn string(&mut self, quote: char) -> Result<(), ScriptError> {
        let line = self.line;
        let start = self.pos;
        self.pos += 1;
        let mut text = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(ScriptError::lex(line, "unterminated string"));
            };
            self.pos += 1;
            match c {
                '\n' => return Err(ScriptError::lex(line, "unterminated string")),
                c if c == quote => break,
                '\\' => {
                    let Some(e) = self.peek() else {
                        return Err(ScriptError::lex(line, "unterminated string"));
                    };
                    self.pos += 1;
                    text.push(match e {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        '0' => '\0',
                        '\\' | '"' | '\'' => e,
                        other => {
                            return Err(ScriptError::lex(
                                line,
                                format!("invalid escape sequence '\\{other}'"),
                            ))
                        }
                    });
                }
                c => text.push(c),
            }
        }
        let lexeme = self.chars[start..self.pos].iter().collect();
        self.out.push(Token {
            kind: TokenKind::Str,
            lexeme,
            line,
            value: Some(text),
        });
        Ok(())
    }

    fn symbol(&mut self, c: char) -> Result<(), ScriptError> {
        for op in OPERATORS {
            let len = op.chars().count();
            if self.chars[self.pos..].iter().take(len).copied().eq(op.chars()) {
                self.pos += len;
                self.push(TokenKind::Operator, (*op).to_string(), self.line);
                return Ok(());
            }
        }
        if PUNCTUATION.contains(&c) {
            self.pos += 1;
            self.push(TokenKind::Punctuation, c.to_string(), self.line);
            return Ok(());
        }
        Err(ScriptError::lex(self.line, format!("unexpected character '{c}'")))
    }
}
