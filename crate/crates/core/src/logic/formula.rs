//! Finite-trace linear temporal formulas: syntax tree, text syntax and evaluation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One trace position: the propositions that hold there.
pub type Letter = BTreeSet<String>;

/// A finite, nonempty sequence of letters.
pub type Trace = Vec<Letter>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Formula {
    True,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Finally(Box<Formula>),
    Globally(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    WeakUntil(Box<Formula>, Box<Formula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("position {position} is outside a trace of length {len}")]
    OutOfRange { position: usize, len: usize },
    #[error("formula syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
}

impl Formula {
    pub fn atom(p: impl Into<String>) -> Self {
        Formula::Atom(p.into())
    }

    pub fn falsum() -> Self {
        Formula::Not(Box::new(Formula::True))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(f: Formula, g: Formula) -> Self {
        Formula::And(Box::new(f), Box::new(g))
    }

    pub fn or(f: Formula, g: Formula) -> Self {
        Formula::Or(Box::new(f), Box::new(g))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn finally(f: Formula) -> Self {
        Formula::Finally(Box::new(f))
    }

    pub fn globally(f: Formula) -> Self {
        Formula::Globally(Box::new(f))
    }

    pub fn until(f: Formula, g: Formula) -> Self {
        Formula::Until(Box::new(f), Box::new(g))
    }

    pub fn weak_until(f: Formula, g: Formula) -> Self {
        Formula::WeakUntil(Box::new(f), Box::new(g))
    }

    /// Nesting height; atoms and `true` have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 1,
            Formula::Not(f) | Formula::Next(f) | Formula::Finally(f) | Formula::Globally(f) => 1 + f.depth(),
            Formula::And(f, g) | Formula::Or(f, g) | Formula::Until(f, g) | Formula::WeakUntil(f, g) => {
                1 + f.depth().max(g.depth())
            }
        }
    }

    pub fn atoms(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Formula::True => {}
            Formula::Atom(p) => {
                out.insert(p);
            }
            Formula::Not(f) | Formula::Next(f) | Formula::Finally(f) | Formula::Globally(f) => f.collect_atoms(out),
            Formula::And(f, g) | Formula::Or(f, g) | Formula::Until(f, g) | Formula::WeakUntil(f, g) => {
                f.collect_atoms(out);
                g.collect_atoms(out);
            }
        }
    }

    pub fn parse(text: &str) -> Result<Formula, LogicError> {
        Parser::new(text)?.formula()
    }
}

/// Truth of `f` at position `i` of `t` under finite-trace semantics with strong next.
pub fn eval(f: &Formula, t: &[Letter], i: usize) -> Result<bool, LogicError> {
    if i >= t.len() {
        return Err(LogicError::OutOfRange { position: i, len: t.len() });
    }
    Ok(holds(f, t, i))
}

fn holds(f: &Formula, t: &[Letter], i: usize) -> bool {
    let n = t.len();
    match f {
        Formula::True => true,
        Formula::Atom(p) => t[i].contains(p),
        Formula::Not(f) => !holds(f, t, i),
        Formula::And(f, g) => holds(f, t, i) && holds(g, t, i),
        Formula::Or(f, g) => holds(f, t, i) || holds(g, t, i),
        Formula::Next(f) => i + 1 < n && holds(f, t, i + 1),
        Formula::Finally(f) => (i..n).any(|j| holds(f, t, j)),
        Formula::Globally(f) => (i..n).all(|j| holds(f, t, j)),
        Formula::Until(f, g) => until_from(f, g, t, i).is_some(),
        Formula::WeakUntil(f, g) => {
            // Either g arrives with f holding until then, or f never stops.
            until_from(f, g, t, i).is_some() || (i..n).all(|j| holds(f, t, j))
        }
    }
}

/// First position `j ≥ i` where `g` holds with `f` holding on `[i, j)`.
fn until_from(f: &Formula, g: &Formula, t: &[Letter], i: usize) -> Option<usize> {
    for j in i..t.len() {
        if holds(g, t, j) {
            return Some(j);
        }
        if !holds(f, t, j) {
            return None;
        }
    }
    None
}

/// A trace whose positions each carry exactly one proposition.
pub fn word<S: AsRef<str>>(letters: &[S]) -> Trace {
    letters.iter().map(|l| BTreeSet::from([l.as_ref().to_string()])).collect()
}

// Binding strength, loosest first. Unary operators bind tightest.
const P_OR: u8 = 1;
const P_AND: u8 = 2;
const P_UNTIL: u8 = 3;
const P_UNARY: u8 = 4;

fn is_bare(p: &str) -> bool {
    let mut chars = p.chars();
    let Some(first) = chars.next() else { return false };
    (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '?' | '-' | '.'))
        && !matches!(p, "X" | "F" | "G" | "U" | "WU" | "true" | "false")
}

impl Formula {
    fn prec(&self) -> u8 {
        match self {
            Formula::Or(..) => P_OR,
            Formula::And(..) => P_AND,
            Formula::Until(..) | Formula::WeakUntil(..) => P_UNTIL,
            _ => P_UNARY,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        if self.prec() < outer {
            f.write_str("(")?;
            self.write_body(f)?;
            f.write_str(")")
        } else {
            self.write_body(f)
        }
    }

    fn write_body(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::Not(x) if **x == Formula::True => f.write_str("false"),
            Formula::Atom(p) if is_bare(p) => f.write_str(p),
            Formula::Atom(p) => write!(f, "\"{}\"", p.replace('\\', "\\\\").replace('"', "\\\"")),
            Formula::Not(x) => unary(f, "!", x),
            Formula::Next(x) => unary(f, "X ", x),
            Formula::Finally(x) => unary(f, "F ", x),
            Formula::Globally(x) => unary(f, "G ", x),
            // Left operands of & and | may share the level; right ones may not.
            Formula::And(a, b) => binary(f, a, "&", b, P_AND, P_AND + 1),
            Formula::Or(a, b) => binary(f, a, "|", b, P_OR, P_OR + 1),
            // U and WU associate to the right.
            Formula::Until(a, b) => binary(f, a, "U", b, P_UNTIL + 1, P_UNTIL),
            Formula::WeakUntil(a, b) => binary(f, a, "WU", b, P_UNTIL + 1, P_UNTIL),
        }
    }
}

fn unary(f: &mut fmt::Formatter<'_>, op: &str, x: &Formula) -> fmt::Result {
    f.write_str(op)?;
    x.write_prec(f, P_UNARY)
}

fn binary(f: &mut fmt::Formatter<'_>, a: &Formula, op: &str, b: &Formula, left: u8, right: u8) -> fmt::Result {
    a.write_prec(f, left)?;
    write!(f, " {op} ")?;
    b.write_prec(f, right)
}

/// Canonical text form; parsing it yields the same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

impl FromStr for Formula {
    type Err = LogicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Formula::parse(s)
    }
}

impl TryFrom<String> for Formula {
    type Error = LogicError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Formula::parse(&s)
    }
}

impl From<Formula> for String {
    fn from(f: Formula) -> Self {
        f.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Word(String),
    Bang,
    Amp,
    Bar,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, LogicError> {
    let err = |offset, message: &str| LogicError::Syntax { offset, message: message.to_string() };
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < bytes.len() {
        let (at, c) = bytes[k];
        match c {
            c if c.is_whitespace() => k += 1,
            '!' | '¬' => {
                out.push((at, Tok::Bang));
                k += 1;
            }
            '&' | '∧' => {
                out.push((at, Tok::Amp));
                k += 1;
            }
            '|' | '∨' => {
                out.push((at, Tok::Bar));
                k += 1;
            }
            '(' => {
                out.push((at, Tok::LParen));
                k += 1;
            }
            ')' => {
                out.push((at, Tok::RParen));
                k += 1;
            }
            '"' | '\'' => {
                let quote = c;
                let mut s = String::new();
                k += 1;
                loop {
                    let Some(&(_, c)) = bytes.get(k) else { return Err(err(at, "unterminated quoted atom")) };
                    k += 1;
                    match c {
                        '\\' => {
                            let Some(&(_, e)) = bytes.get(k) else { return Err(err(at, "dangling escape")) };
                            s.push(e);
                            k += 1;
                        }
                        c if c == quote => break,
                        c => s.push(c),
                    }
                }
                out.push((at, Tok::Atom(s)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&(_, c)) = bytes.get(k) {
                    if c.is_ascii_alphanumeric() || matches!(c, '_' | '?' | '-' | '.') {
                        s.push(c);
                        k += 1;
                    } else {
                        break;
                    }
                }
                out.push((at, Tok::Word(s)));
            }
            _ => return Err(err(at, &format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, LogicError> {
        Ok(Parser { toks: lex(text)?, pos: 0, end: text.len() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn fail<T>(&self, message: &str) -> Result<T, LogicError> {
        Err(LogicError::Syntax { offset: self.offset(), message: message.to_string() })
    }

    fn formula(&mut self) -> Result<Formula, LogicError> {
        let f = self.or()?;
        if self.pos != self.toks.len() {
            return self.fail("trailing input");
        }
        Ok(f)
    }

    fn or(&mut self) -> Result<Formula, LogicError> {
        let mut f = self.and()?;
        while self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            f = Formula::or(f, self.and()?);
        }
        Ok(f)
    }

    fn and(&mut self) -> Result<Formula, LogicError> {
        let mut f = self.until()?;
        while self.peek() == Some(&Tok::Amp) {
            self.pos += 1;
            f = Formula::and(f, self.until()?);
        }
        Ok(f)
    }

    fn until(&mut self) -> Result<Formula, LogicError> {
        let f = self.unary()?;
        match self.peek() {
            Some(Tok::Word(w)) if w == "U" => {
                self.pos += 1;
                Ok(Formula::until(f, self.until()?))
            }
            Some(Tok::Word(w)) if w == "WU" => {
                self.pos += 1;
                Ok(Formula::weak_until(f, self.until()?))
            }
            _ => Ok(f),
        }
    }

    fn unary(&mut self) -> Result<Formula, LogicError> {
        let Some(tok) = self.peek().cloned() else { return self.fail("unexpected end of formula") };
        self.pos += 1;
        match tok {
            Tok::Bang => Ok(Formula::not(self.unary()?)),
            Tok::LParen => {
                let f = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.fail("expected `)`");
                }
                self.pos += 1;
                Ok(f)
            }
            Tok::Atom(p) => Ok(Formula::Atom(p)),
            Tok::Word(w) => match w.as_str() {
                "X" => Ok(Formula::next(self.unary()?)),
                "F" => Ok(Formula::finally(self.unary()?)),
                "G" => Ok(Formula::globally(self.unary()?)),
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::falsum()),
                "U" | "WU" => {
                    self.pos -= 1;
                    self.fail("binary operator without left operand")
                }
                _ => Ok(Formula::Atom(w)),
            },
            _ => {
                self.pos -= 1;
                self.fail("expected a formula")
            }
        }
    }
}
