//! Edge guard expressions.
//!
//! ```text
//! expr    := and ("||" and)*
//! and     := unary ("&&" unary)*
//! unary   := "!" unary | "(" expr ")" | operand (("==" | "!=") operand)?
//! operand := field | "string" | number | true | false | null
//! ```
//!
//! A bare field is true when it is present and neither `false`, `null`,
//! an empty string nor an empty list.

use std::fmt;

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("guard {source_text:?}: {message} at offset {offset}")]
pub struct GuardError {
    pub source_text: String,
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Operand {
    Field(String),
    Literal(Value),
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Or(Box<Node>, Box<Node>),
    And(Box<Node>, Box<Node>),
    Not(Box<Node>),
    Eq(Operand, Operand),
    Ne(Operand, Operand),
    Truthy(Operand),
}

/// A parsed guard.
#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    text: String,
    root: Node,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    And,
    Or,
    Not,
    EqEq,
    NotEq,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, GuardError> {
    let err = |offset, message: &str| GuardError {
        source_text: text.to_string(),
        offset,
        message: message.to_string(),
    };
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (at, c) = chars[i];
        let next = chars.get(i + 1).map(|(_, c)| *c);
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                toks.push((at, Tok::LParen));
                i += 1;
            }
            ')' => {
                toks.push((at, Tok::RParen));
                i += 1;
            }
            '&' if next == Some('&') => {
                toks.push((at, Tok::And));
                i += 2;
            }
            '|' if next == Some('|') => {
                toks.push((at, Tok::Or));
                i += 2;
            }
            '=' if next == Some('=') => {
                toks.push((at, Tok::EqEq));
                i += 2;
            }
            '!' if next == Some('=') => {
                toks.push((at, Tok::NotEq));
                i += 2;
            }
            '!' => {
                toks.push((at, Tok::Not));
                i += 1;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(err(at, "unterminated string")),
                        Some((_, '"')) => break,
                        Some((_, '\\')) => {
                            let (_, escaped) = *chars.get(i + 1).ok_or_else(|| err(at, "unterminated string"))?;
                            s.push(escaped);
                            i += 2;
                        }
                        Some((_, ch)) => {
                            s.push(*ch);
                            i += 1;
                        }
                    }
                }
                toks.push((at, Tok::Str(s)));
                i += 1;
            }
            c if c.is_ascii_digit() || (c == '-' && next.is_some_and(|n| n.is_ascii_digit())) => {
                let start = i;
                i += 1;
                while chars.get(i).is_some_and(|(_, c)| c.is_ascii_digit() || *c == '.') {
                    i += 1;
                }
                let end = chars.get(i).map_or(text.len(), |(p, _)| *p);
                let n = text[chars[start].0..end]
                    .parse()
                    .map_err(|_| err(at, "malformed number"))?;
                toks.push((at, Tok::Num(n)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while chars
                    .get(i)
                    .is_some_and(|(_, c)| c.is_alphanumeric() || *c == '_' || *c == '.')
                {
                    i += 1;
                }
                let end = chars.get(i).map_or(text.len(), |(p, _)| *p);
                toks.push((at, Tok::Ident(text[chars[start].0..end].to_string())));
            }
            other => return Err(err(at, &format!("unexpected character {other:?}"))),
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> GuardError {
        GuardError {
            source_text: self.text.to_string(),
            offset: self.toks.get(self.pos).map_or(self.text.len(), |(o, _)| *o),
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Node, GuardError> {
        let mut left = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.bump();
            left = Node::Or(Box::new(left), Box::new(self.and()?));
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Node, GuardError> {
        let mut left = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.bump();
            left = Node::And(Box::new(left), Box::new(self.unary()?));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Node, GuardError> {
        match self.peek() {
            Some(Tok::Not) => {
                self.bump();
                Ok(Node::Not(Box::new(self.unary()?)))
            }
            Some(Tok::LParen) => {
                self.bump();
                let inner = self.expr()?;
                if self.bump() != Some(Tok::RParen) {
                    self.pos -= 1;
                    return Err(self.err("expected ')'"));
                }
                Ok(inner)
            }
            _ => {
                let left = self.operand()?;
                match self.peek() {
                    Some(Tok::EqEq) => {
                        self.bump();
                        Ok(Node::Eq(left, self.operand()?))
                    }
                    Some(Tok::NotEq) => {
                        self.bump();
                        Ok(Node::Ne(left, self.operand()?))
                    }
                    _ => Ok(Node::Truthy(left)),
                }
            }
        }
    }

    fn operand(&mut self) -> Result<Operand, GuardError> {
        let op = match self.peek() {
            Some(Tok::Ident(name)) => match name.as_str() {
                "true" => Operand::Literal(Value::Bool(true)),
                "false" => Operand::Literal(Value::Bool(false)),
                "null" => Operand::Literal(Value::Null),
                _ => Operand::Field(name.clone()),
            },
            Some(Tok::Str(s)) => Operand::Literal(Value::String(s.clone())),
            Some(Tok::Num(n)) => Operand::Literal(serde_json::Number::from_f64(*n).map_or(Value::Null, Value::Number)),
            _ => return Err(self.err("expected a field or literal")),
        };
        self.bump();
        Ok(op)
    }
}

fn resolve<'a>(op: &'a Operand, ctx: &'a Map<String, Value>) -> &'a Value {
    static NULL: Value = Value::Null;
    match op {
        Operand::Field(name) => ctx.get(name).unwrap_or(&NULL),
        Operand::Literal(v) => v,
    }
}

fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.as_f64() == y.as_f64(),
        _ => a == b,
    }
}

fn truthy(v: &Value) -> bool {
    match v {
        Value::Null | Value::Bool(false) => false,
        Value::String(s) => !s.is_empty(),
        Value::Array(a) => !a.is_empty(),
        _ => true,
    }
}

fn eval(node: &Node, ctx: &Map<String, Value>) -> bool {
    match node {
        Node::Or(a, b) => eval(a, ctx) || eval(b, ctx),
        Node::And(a, b) => eval(a, ctx) && eval(b, ctx),
        Node::Not(a) => !eval(a, ctx),
        Node::Eq(a, b) => values_equal(resolve(a, ctx), resolve(b, ctx)),
        Node::Ne(a, b) => !values_equal(resolve(a, ctx), resolve(b, ctx)),
        Node::Truthy(a) => truthy(resolve(a, ctx)),
    }
}

impl Guard {
    pub fn parse(text: &str) -> Result<Guard, GuardError> {
        let mut p = Parser {
            text,
            toks: lex(text)?,
            pos: 0,
        };
        let root = p.expr()?;
        if p.pos < p.toks.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Guard {
            text: text.to_string(),
            root,
        })
    }

    pub fn eval(&self, ctx: &Map<String, Value>) -> bool {
        eval(&self.root, ctx)
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}
