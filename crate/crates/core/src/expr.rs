//! Condition and arithmetic expression languages.
//!
//! Conditions guard dynamic anchors:
//!
//! ```text
//! expr       := or_expr
//! or_expr    := and_expr ("or" and_expr)*
//! and_expr   := unary ("and" unary)*
//! unary      := "not" unary | comparison | "(" expr ")"
//! comparison := operand (("=="|"!="|"<"|"<="|">"|">=") operand)?
//! operand    := identifier | number | "'" text "'" | "true" | "false"
//! ```
//!
//! Field expressions reuse the same lexer with `+ - * /`, unary minus and
//! parentheses over numbers and the variables `x`, `y`, `z`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Parse failure at a 0-based byte offset into the source text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("PARSE_ERROR at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    fn new(offset: usize, message: impl Into<String>) -> Self {
        ParseError { offset, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("UNKNOWN_VARIABLE: `{0}` is not in the context")]
    UnknownVariable(String),
    #[error("TYPE_ERROR: {0}")]
    Type(String),
}

impl ConditionError {
    pub fn code(&self) -> &'static str {
        match self {
            ConditionError::Parse(_) => "PARSE_ERROR",
            ConditionError::UnknownVariable(_) => "UNKNOWN_VARIABLE",
            ConditionError::Type(_) => "TYPE_ERROR",
        }
    }
}

/// A value in a caller-supplied evaluation context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ContextValue {
    Bool(bool),
    Number(f64),
    Text(String),
}

pub type Context = BTreeMap<String, ContextValue>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Keyword {
    And,
    Or,
    Not,
    True,
    False,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Keyword(Keyword),
    Number(f64),
    Text(String),
    Cmp(Comparator),
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Keyword(k) => format!("keyword `{}`", format!("{k:?}").to_lowercase()),
            Token::Number(n) => format!("number {n}"),
            Token::Text(t) => format!("text '{t}'"),
            Token::Cmp(c) => format!("`{c}`"),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::Plus => "`+`".into(),
            Token::Minus => "`-`".into(),
            Token::Star => "`*`".into(),
            Token::Slash => "`/`".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => {
                i += 1;
                out.push((start, Token::LParen));
            }
            b')' => {
                i += 1;
                out.push((start, Token::RParen));
            }
            b'+' => {
                i += 1;
                out.push((start, Token::Plus));
            }
            b'-' => {
                i += 1;
                out.push((start, Token::Minus));
            }
            b'*' => {
                i += 1;
                out.push((start, Token::Star));
            }
            b'/' => {
                i += 1;
                out.push((start, Token::Slash));
            }
            b'=' | b'!' | b'<' | b'>' => {
                let two = bytes.get(i + 1) == Some(&b'=');
                let cmp = match (c, two) {
                    (b'=', true) => Comparator::Eq,
                    (b'!', true) => Comparator::Ne,
                    (b'<', true) => Comparator::Le,
                    (b'>', true) => Comparator::Ge,
                    (b'<', false) => Comparator::Lt,
                    (b'>', false) => Comparator::Gt,
                    _ => return Err(ParseError::new(start, format!("expected `{}=`", c as char))),
                };
                i += if two { 2 } else { 1 };
                out.push((start, Token::Cmp(cmp)));
            }
            b'\'' => {
                let close = src[i + 1..]
                    .find('\'')
                    .ok_or_else(|| ParseError::new(start, "unterminated text literal"))?;
                out.push((start, Token::Text(src[i + 1..i + 1 + close].to_string())));
                i += close + 2;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    let frac = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i == frac {
                        return Err(ParseError::new(i, "expected digits after `.`"));
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    let digits = j;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    if j == digits {
                        return Err(ParseError::new(j, "expected exponent digits"));
                    }
                    i = j;
                }
                let text = &src[start..i];
                let value = text
                    .parse::<f64>()
                    .map_err(|_| ParseError::new(start, format!("malformed number `{text}`")))?;
                if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                    return Err(ParseError::new(i, "identifier may not follow a number"));
                }
                out.push((start, Token::Number(value)));
            }
            b'a'..=b'z' | b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_lowercase() || bytes[i].is_ascii_digit() || bytes[i] == b'_')
                {
                    i += 1;
                }
                if i < bytes.len() && bytes[i].is_ascii_uppercase() {
                    return Err(ParseError::new(i, "identifiers are lowercase"));
                }
                let word = &src[start..i];
                let token = match word {
                    "and" => Token::Keyword(Keyword::And),
                    "or" => Token::Keyword(Keyword::Or),
                    "not" => Token::Keyword(Keyword::Not),
                    "true" => Token::Keyword(Keyword::True),
                    "false" => Token::Keyword(Keyword::False),
                    _ => Token::Ident(word.to_string()),
                };
                out.push((start, token));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::new(start, format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push((src.len(), Token::End));
    Ok(out)
}

struct Cursor {
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Cursor {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Cursor { tokens: tokenize(src)?, pos: 0 })
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos].1
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].0
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].1.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat_keyword(&mut self, kw: Keyword) -> bool {
        if *self.peek() == Token::Keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::new(
            self.offset(),
            format!("expected {expected}, found {}", self.peek().describe()),
        )
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            Token::End => Ok(()),
            _ => Err(self.unexpected("end of input")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Variable(String),
    Number(f64),
    Text(String),
    Bool(bool),
}

/// Parsed condition syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Or(Vec<Condition>),
    And(Vec<Condition>),
    Not(Box<Condition>),
    Compare { op: Comparator, left: Operand, right: Operand },
    Operand(Operand),
}

impl Condition {
    pub fn parse(src: &str) -> Result<Condition, ParseError> {
        let mut cursor = Cursor::new(src)?;
        let expr = parse_or(&mut cursor)?;
        cursor.expect_end()?;
        Ok(expr)
    }

    /// Short-circuit evaluation against `context`; nothing else is consulted.
    pub fn evaluate(&self, context: &Context) -> Result<bool, ConditionError> {
        match self {
            Condition::Or(items) => {
                for item in items {
                    if item.evaluate(context)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Condition::And(items) => {
                for item in items {
                    if !item.evaluate(context)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Condition::Not(inner) => Ok(!inner.evaluate(context)?),
            Condition::Compare { op, left, right } => {
                compare(*op, &lookup(left, context)?, &lookup(right, context)?)
            }
            Condition::Operand(operand) => match lookup(operand, context)? {
                ContextValue::Bool(b) => Ok(b),
                other => Err(ConditionError::Type(format!(
                    "{} is not a boolean",
                    type_name(&other)
                ))),
            },
        }
    }
}

/// Parse and evaluate in one step.
pub fn evaluate_condition(src: &str, context: &Context) -> Result<bool, ConditionError> {
    Ok(Condition::parse(src)?.evaluate(context)?)
}

fn parse_or(c: &mut Cursor) -> Result<Condition, ParseError> {
    let mut items = vec![parse_and(c)?];
    while c.eat_keyword(Keyword::Or) {
        items.push(parse_and(c)?);
    }
    Ok(if items.len() == 1 { items.pop().unwrap() } else { Condition::Or(items) })
}

fn parse_and(c: &mut Cursor) -> Result<Condition, ParseError> {
    let mut items = vec![parse_unary(c)?];
    while c.eat_keyword(Keyword::And) {
        items.push(parse_unary(c)?);
    }
    Ok(if items.len() == 1 { items.pop().unwrap() } else { Condition::And(items) })
}

fn parse_unary(c: &mut Cursor) -> Result<Condition, ParseError> {
    if c.eat_keyword(Keyword::Not) {
        return Ok(Condition::Not(Box::new(parse_unary(c)?)));
    }
    if *c.peek() == Token::LParen {
        c.bump();
        let inner = parse_or(c)?;
        if *c.peek() != Token::RParen {
            return Err(c.unexpected("`)`"));
        }
        c.bump();
        return Ok(inner);
    }
    let left = parse_operand(c)?;
    if let Token::Cmp(op) = *c.peek() {
        c.bump();
        let right = parse_operand(c)?;
        return Ok(Condition::Compare { op, left, right });
    }
    Ok(Condition::Operand(left))
}

fn parse_operand(c: &mut Cursor) -> Result<Operand, ParseError> {
    match c.peek().clone() {
        Token::Ident(name) => {
            c.bump();
            Ok(Operand::Variable(name))
        }
        Token::Number(n) => {
            c.bump();
            Ok(Operand::Number(n))
        }
        Token::Minus => {
            let minus = c.offset();
            c.bump();
            match c.peek().clone() {
                Token::Number(n) => {
                    c.bump();
                    Ok(Operand::Number(-n))
                }
                _ => Err(ParseError::new(minus, "`-` must prefix a number")),
            }
        }
        Token::Text(t) => {
            c.bump();
            Ok(Operand::Text(t))
        }
        Token::Keyword(Keyword::True) => {
            c.bump();
            Ok(Operand::Bool(true))
        }
        Token::Keyword(Keyword::False) => {
            c.bump();
            Ok(Operand::Bool(false))
        }
        _ => Err(c.unexpected("an operand")),
    }
}

fn lookup(operand: &Operand, context: &Context) -> Result<ContextValue, ConditionError> {
    Ok(match operand {
        Operand::Variable(name) => context
            .get(name)
            .cloned()
            .ok_or_else(|| ConditionError::UnknownVariable(name.clone()))?,
        Operand::Number(n) => ContextValue::Number(*n),
        Operand::Text(t) => ContextValue::Text(t.clone()),
        Operand::Bool(b) => ContextValue::Bool(*b),
    })
}

fn type_name(v: &ContextValue) -> &'static str {
    match v {
        ContextValue::Bool(_) => "boolean",
        ContextValue::Number(_) => "number",
        ContextValue::Text(_) => "text",
    }
}

fn compare(op: Comparator, a: &ContextValue, b: &ContextValue) -> Result<bool, ConditionError> {
    use ContextValue::*;
    match (a, b) {
        (Number(x), Number(y)) => Ok(match op {
            Comparator::Eq => x == y,
            Comparator::Ne => x != y,
            Comparator::Lt => x < y,
            Comparator::Le => x <= y,
            Comparator::Gt => x > y,
            Comparator::Ge => x >= y,
        }),
        (Text(_), Text(_)) | (Bool(_), Bool(_)) => match op {
            Comparator::Eq => Ok(a == b),
            Comparator::Ne => Ok(a != b),
            _ => Err(ConditionError::Type(format!("`{op}` is not defined on {}", type_name(a)))),
        },
        _ => Err(ConditionError::Type(format!(
            "cannot compare {} with {}",
            type_name(a),
            type_name(b)
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Arithmetic expression over `x`, `y`, `z`.
#[derive(Debug, Clone, PartialEq)]
pub enum Arith {
    Operand(Operand),
    Neg(Box<Arith>),
    Binary(ArithOp, Box<Arith>, Box<Arith>),
}

impl Arith {
    pub fn parse(src: &str) -> Result<Arith, ParseError> {
        let mut cursor = Cursor::new(src)?;
        let expr = parse_sum(&mut cursor)?;
        cursor.expect_end()?;
        Ok(expr)
    }

    /// Numeric value at `(x, y, z)`, or a message describing why there is none.
    pub fn evaluate(&self, at: [f64; 3]) -> Result<f64, String> {
        let value = match self {
            Arith::Operand(Operand::Number(n)) => *n,
            Arith::Operand(Operand::Variable(v)) => match v.as_str() {
                "x" => at[0],
                "y" => at[1],
                "z" => at[2],
                other => return Err(format!("unknown variable `{other}`")),
            },
            Arith::Operand(Operand::Text(_)) => return Err("text is not numeric".into()),
            Arith::Operand(Operand::Bool(_)) => return Err("boolean is not numeric".into()),
            Arith::Neg(inner) => -inner.evaluate(at)?,
            Arith::Binary(op, l, r) => {
                let (l, r) = (l.evaluate(at)?, r.evaluate(at)?);
                match op {
                    ArithOp::Add => l + r,
                    ArithOp::Sub => l - r,
                    ArithOp::Mul => l * r,
                    ArithOp::Div => l / r,
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(format!("non-finite result {value}"))
        }
    }
}

fn parse_sum(c: &mut Cursor) -> Result<Arith, ParseError> {
    let mut left = parse_product(c)?;
    loop {
        let op = match c.peek() {
            Token::Plus => ArithOp::Add,
            Token::Minus => ArithOp::Sub,
            _ => return Ok(left),
        };
        c.bump();
        left = Arith::Binary(op, Box::new(left), Box::new(parse_product(c)?));
    }
}

fn parse_product(c: &mut Cursor) -> Result<Arith, ParseError> {
    let mut left = parse_factor(c)?;
    loop {
        let op = match c.peek() {
            Token::Star => ArithOp::Mul,
            Token::Slash => ArithOp::Div,
            _ => return Ok(left),
        };
        c.bump();
        left = Arith::Binary(op, Box::new(left), Box::new(parse_factor(c)?));
    }
}

fn parse_factor(c: &mut Cursor) -> Result<Arith, ParseError> {
    match c.peek() {
        Token::Minus => {
            c.bump();
            Ok(Arith::Neg(Box::new(parse_factor(c)?)))
        }
        Token::LParen => {
            c.bump();
            let inner = parse_sum(c)?;
            if *c.peek() != Token::RParen {
                return Err(c.unexpected("`)`"));
            }
            c.bump();
            Ok(inner)
        }
        _ => Ok(Arith::Operand(parse_operand(c)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(pairs: &[(&str, ContextValue)]) -> Context {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn server_room_condition() {
        let c = ctx(&[("user_zone", ContextValue::Text("serverroom".into()))]);
        assert!(evaluate_condition("user_zone == 'serverroom'", &c).unwrap());
        let c = ctx(&[("user_zone", ContextValue::Text("lobby".into()))]);
        assert!(!evaluate_condition("user_zone == 'serverroom'", &c).unwrap());
    }

    #[test]
    fn literals_and_connectives() {
        assert!(evaluate_condition("true and not false", &Context::new()).unwrap());
        assert!(evaluate_condition("false or (true and true)", &Context::new()).unwrap());
        assert!(evaluate_condition("not not true", &Context::new()).unwrap());
    }

    #[test]
    fn missing_operand_position() {
        let err = Condition::parse("user_zone ==").unwrap_err();
        assert_eq!(err.offset, 12);
    }

    #[test]
    fn precedence_and_binds_tighter_than_or() {
        let c = ctx(&[
            ("a", ContextValue::Bool(true)),
            ("b", ContextValue::Bool(false)),
            ("c", ContextValue::Bool(false)),
        ]);
        // a or (b and c)
        assert!(evaluate_condition("a or b and c", &c).unwrap());
        assert!(!evaluate_condition("(a or b) and c", &c).unwrap());
    }

    #[test]
    fn numeric_comparisons() {
        let c = ctx(&[("temp", ContextValue::Number(21.5))]);
        assert!(evaluate_condition("temp > 20 and temp <= 21.5", &c).unwrap());
        assert!(evaluate_condition("temp != -3", &c).unwrap());
        assert!(!evaluate_condition("temp >= 1e3", &c).unwrap());
    }

    #[test]
    fn type_and_variable_errors() {
        let c = ctx(&[("zone", ContextValue::Text("a".into())), ("n", ContextValue::Number(1.0))]);
        assert_eq!(evaluate_condition("zone < 'b'", &c).unwrap_err().code(), "TYPE_ERROR");
        assert_eq!(evaluate_condition("zone == n", &c).unwrap_err().code(), "TYPE_ERROR");
        assert_eq!(evaluate_condition("n", &c).unwrap_err().code(), "TYPE_ERROR");
        assert_eq!(evaluate_condition("missing", &c).unwrap_err().code(), "UNKNOWN_VARIABLE");
        // short-circuit never touches the right side
        assert!(!evaluate_condition("false and missing", &c).unwrap());
        assert!(evaluate_condition("true or missing", &c).unwrap());
    }

    #[test]
    fn arithmetic() {
        let e = Arith::parse("2 * x + y / 4 - -z").unwrap();
        assert_eq!(e.evaluate([1.0, 8.0, 3.0]).unwrap(), 2.0 + 2.0 + 3.0);
        assert_eq!(Arith::parse("293.15").unwrap().evaluate([9.0; 3]).unwrap(), 293.15);
        assert!(Arith::parse("true").unwrap().evaluate([0.0; 3]).is_err());
        assert!(Arith::parse("1 / (x - x)").unwrap().evaluate([1.0; 3]).is_err());
        assert!(Arith::parse("w").unwrap().evaluate([1.0; 3]).is_err());
        assert_eq!(Arith::parse("(x + 1").unwrap_err().offset, 6);
    }
}
