//! Recursive-descent parser for the cohort query language.
//!
//! ```text
//! query      := or
//! or         := and { "or" and }
//! and        := unary { "and" unary }
//! unary      := "not" unary | primary
//! primary    := "(" query ")" | boolLit | compare | membership | existsBp | hasEvent
//! compare    := field cmp literal
//! membership := field "in" "[" literal { "," literal } "]"
//! existsBp   := "exists" "(" "bp" "." series "," "hours" "(" number "," number ")" ","
//!               "value" cmp number ")"
//! hasEvent   := "has_event" "(" ident [ "," "hours" "(" number "," number ")" ] ")"
//! ```
//!
//! Keywords match case-insensitively; field names are kept verbatim.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::ast::{CmpOp, CohortQueryAst, Literal, Window};
use crate::dataset::BpType;

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ParseError {
    /// Byte offset into the input.
    pub offset: usize,
    pub expected_tokens: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at byte {}: expected {}, found {}",
            self.offset,
            self.expected_tokens.join(" | "),
            self.found
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Cmp(CmpOp),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(n) => write!(f, "number {n}"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Cmp(op) => write!(f, "`{}`", op.symbol()),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset: usize, found: String| ParseError { offset, expected_tokens: vec!["token".into()], found };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'[' => Tok::LBracket,
            b']' => Tok::RBracket,
            b',' => Tok::Comma,
            b'.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => Tok::Dot,
            b'=' | b'!' | b'<' | b'>' => {
                let two = bytes.get(i + 1) == Some(&b'=');
                let op = match (c, two) {
                    (b'=', true) => CmpOp::Eq,
                    (b'!', true) => CmpOp::Ne,
                    (b'<', true) => CmpOp::Le,
                    (b'>', true) => CmpOp::Ge,
                    (b'<', false) => CmpOp::Lt,
                    (b'>', false) => CmpOp::Gt,
                    _ => return Err(err(i, format!("`{}`", c as char))),
                };
                i += if two { 2 } else { 1 };
                out.push((Tok::Cmp(op), start));
                continue;
            }
            b'"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => return Err(err(start, "unterminated string".into())),
                        Some(b'"') => break,
                        Some(b'\\') => {
                            match bytes.get(i + 1) {
                                Some(b'"') => s.push('"'),
                                Some(b'\\') => s.push('\\'),
                                _ => return Err(err(i, "invalid escape".into())),
                            }
                            i += 2;
                        }
                        Some(_) => {
                            let ch = src[i..].chars().next().expect("in bounds");
                            s.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                i += 1;
                out.push((Tok::Str(s), start));
                continue;
            }
            b'0'..=b'9' | b'-' | b'.' => {
                let mut j = i + usize::from(c == b'-');
                let digits_start = j;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'.' {
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text = &src[i..j];
                let has_digit = src[digits_start..j].bytes().any(|b| b.is_ascii_digit());
                match text.parse::<f64>() {
                    Ok(v) if has_digit && v.is_finite() => {
                        i = j;
                        out.push((Tok::Number(v), start));
                        continue;
                    }
                    _ => return Err(err(start, format!("`{}`", if text.is_empty() { "-" } else { text }))),
                }
            }
            c if c == b'_' || c.is_ascii_alphabetic() => {
                let mut j = i;
                while j < bytes.len() && (bytes[j] == b'_' || bytes[j].is_ascii_alphanumeric()) {
                    j += 1;
                }
                let id = src[i..j].to_owned();
                i = j;
                out.push((Tok::Ident(id), start));
                continue;
            }
            _ => {
                let ch = src[i..].chars().next().expect("in bounds");
                return Err(err(i, format!("`{ch}`")));
            }
        };
        i += 1;
        out.push((tok, start));
    }
    out.push((Tok::Eof, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

fn is_kw(tok: &Tok, kw: &str) -> bool {
    matches!(tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.offset(),
            expected_tokens: expected.iter().map(|s| (*s).to_owned()).collect(),
            found: self.peek().to_string(),
        })
    }

    fn expect(&mut self, tok: Tok, label: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(&[label])
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if is_kw(self.peek(), kw) {
            self.bump();
            Ok(())
        } else {
            self.error(&[kw])
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.peek() {
            Tok::Number(v) => {
                let v = *v;
                self.bump();
                Ok(v)
            }
            _ => self.error(&["number"]),
        }
    }

    fn cmp(&mut self) -> Result<CmpOp, ParseError> {
        match self.peek() {
            Tok::Cmp(op) => {
                let op = *op;
                self.bump();
                Ok(op)
            }
            _ => self.error(&["==", "!=", "<", "<=", ">", ">="]),
        }
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(Literal::Number(v))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Literal::Text(s))
            }
            _ => self.error(&["number", "string"]),
        }
    }

    fn query(&mut self) -> Result<CohortQueryAst, ParseError> {
        let mut children = vec![self.and()?];
        while is_kw(self.peek(), "or") {
            self.bump();
            children.push(self.and()?);
        }
        Ok(if children.len() == 1 { children.pop().expect("one child") } else { CohortQueryAst::or(children) })
    }

    fn and(&mut self) -> Result<CohortQueryAst, ParseError> {
        let mut children = vec![self.unary()?];
        while is_kw(self.peek(), "and") {
            self.bump();
            children.push(self.unary()?);
        }
        Ok(if children.len() == 1 { children.pop().expect("one child") } else { CohortQueryAst::and(children) })
    }

    fn unary(&mut self) -> Result<CohortQueryAst, ParseError> {
        if is_kw(self.peek(), "not") {
            self.bump();
            return Ok(CohortQueryAst::not(self.unary()?));
        }
        self.primary()
    }

    fn window(&mut self) -> Result<Window, ParseError> {
        let at = self.pos;
        self.expect_kw("hours")?;
        self.expect(Tok::LParen, "(")?;
        let lo = self.number()?;
        self.expect(Tok::Comma, ",")?;
        let hi = self.number()?;
        self.expect(Tok::RParen, ")")?;
        Window::new(lo, hi).ok_or_else(|| ParseError {
            offset: self.toks[at].1,
            expected_tokens: vec!["window with 0 <= lo < hi".into()],
            found: format!("hours({lo},{hi})"),
        })
    }

    fn primary(&mut self) -> Result<CohortQueryAst, ParseError> {
        const START: &[&str] = &["(", "true", "false", "not", "exists", "has_event", "field"];
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let q = self.query()?;
                self.expect(Tok::RParen, ")")?;
                Ok(q)
            }
            Tok::Ident(id) if id.eq_ignore_ascii_case("true") || id.eq_ignore_ascii_case("false") => {
                self.bump();
                Ok(CohortQueryAst::bool(id.eq_ignore_ascii_case("true")))
            }
            Tok::Ident(id) if id.eq_ignore_ascii_case("exists") && *self.peek_at(1) == Tok::LParen => {
                self.bump();
                self.bump();
                self.expect_kw("bp")?;
                self.expect(Tok::Dot, ".")?;
                let series = match self.peek() {
                    Tok::Ident(s) => match s.parse::<BpType>() {
                        Ok(b) => b,
                        Err(_) => return self.error(&["sbp", "dbp", "map"]),
                    },
                    _ => return self.error(&["sbp", "dbp", "map"]),
                };
                self.bump();
                self.expect(Tok::Comma, ",")?;
                let window = self.window()?;
                self.expect(Tok::Comma, ",")?;
                self.expect_kw("value")?;
                let op = self.cmp()?;
                let threshold = self.number()?;
                self.expect(Tok::RParen, ")")?;
                Ok(CohortQueryAst::ExistsBp { series, window, op, threshold })
            }
            Tok::Ident(id) if id.eq_ignore_ascii_case("has_event") && *self.peek_at(1) == Tok::LParen => {
                self.bump();
                self.bump();
                let kind = match self.peek() {
                    Tok::Ident(k) => k.clone(),
                    _ => return self.error(&["event kind"]),
                };
                self.bump();
                let window = if *self.peek() == Tok::Comma {
                    self.bump();
                    Some(self.window()?)
                } else {
                    None
                };
                self.expect(Tok::RParen, ")")?;
                Ok(CohortQueryAst::HasEvent { kind, window })
            }
            Tok::Ident(field) => {
                self.bump();
                match self.peek() {
                    Tok::Cmp(_) => {
                        let op = self.cmp()?;
                        let value = self.literal()?;
                        Ok(CohortQueryAst::Compare { field, op, value })
                    }
                    t if is_kw(t, "in") => {
                        self.bump();
                        self.expect(Tok::LBracket, "[")?;
                        let mut values = vec![self.literal()?];
                        while *self.peek() == Tok::Comma {
                            self.bump();
                            values.push(self.literal()?);
                        }
                        self.expect(Tok::RBracket, "]")?;
                        Ok(CohortQueryAst::In { field, values })
                    }
                    _ => self.error(&["==", "!=", "<", "<=", ">", ">=", "in"]),
                }
            }
            _ => self.error(START),
        }
    }
}

pub fn parse(text: &str) -> Result<CohortQueryAst, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let q = p.query()?;
    if *p.peek() != Tok::Eof {
        return p.error(&["and", "or", "end of input"]);
    }
    Ok(q)
}
