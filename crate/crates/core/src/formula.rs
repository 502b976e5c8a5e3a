//! CTL* formulas over equality atoms.
//!
//! The surface syntax is ASCII (`!`, `&`, `|`, `->`, `A E X F G U R`) with
//! the Unicode connectives `¬ ∧ ∨ →` accepted on input. Binding, loosest to
//! tightest: `->` (right associative), `|`, `&`, `U`/`R` (right associative),
//! then the prefix operators. A word made only of the letters `A E X F G`
//! is read as a chain of prefix operators, so `AG p` is `A(G p)`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// An atomic proposition: either a bare name `p` or an equality `var=VALUE`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    variable: Option<String>,
    value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid atom token {0:?}")]
pub struct AtomError(pub String);

fn valid_token(s: &str) -> bool {
    !s.is_empty() && !s.contains('=') && !s.chars().any(char::is_whitespace)
}

impl Atom {
    /// A bare proposition. Keywords and words that lex as operator chains
    /// (`true`, `U`, `AG`, ...) are rejected.
    pub fn new(value: impl Into<String>) -> Result<Self, AtomError> {
        let value = value.into();
        let reserved = value == "true"
            || value == "false"
            || value == "U"
            || value == "R"
            || value.chars().all(|c| PREFIX_OPS.contains(c));
        if !valid_token(&value) || reserved {
            return Err(AtomError(value));
        }
        Ok(Atom {
            variable: None,
            value,
        })
    }

    pub fn equality(variable: impl Into<String>, value: impl Into<String>) -> Result<Self, AtomError> {
        let (variable, value) = (variable.into(), value.into());
        if !valid_token(&variable) {
            return Err(AtomError(variable));
        }
        if !valid_token(&value) {
            return Err(AtomError(value));
        }
        Ok(Atom {
            variable: Some(variable),
            value,
        })
    }

    pub fn variable(&self) -> Option<&str> {
        self.variable.as_deref()
    }

    pub fn value(&self) -> &str {
        &self.value
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variable {
            Some(var) => write!(f, "{}={}", var, self.value),
            None => f.write_str(&self.value),
        }
    }
}

impl FromStr for Atom {
    type Err = AtomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('=') {
            Some((var, value)) => Atom::equality(var.trim(), value.trim()),
            None => Atom::new(s.trim()),
        }
    }
}

/// CTL* abstract syntax. Every node is a path formula; [`Formula::classify`]
/// tells whether it is also a state formula.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Box<Formula>),
    Forall(Box<Formula>),
    Next(Box<Formula>),
    Finally(Box<Formula>),
    Globally(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Release(Box<Formula>, Box<Formula>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    StateFormula,
    PathFormula,
}

impl Formula {
    pub fn atom(atom: Atom) -> Self {
        Formula::Atom(atom)
    }

    /// Shorthand for tests and fixtures; panics on an invalid token.
    pub fn prop(text: &str) -> Self {
        Formula::Atom(text.parse().expect("valid atom"))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn exists(f: Formula) -> Self {
        Formula::Exists(Box::new(f))
    }

    pub fn forall(f: Formula) -> Self {
        Formula::Forall(Box::new(f))
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

    pub fn until(a: Formula, b: Formula) -> Self {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn release(a: Formula, b: Formula) -> Self {
        Formula::Release(Box::new(a), Box::new(b))
    }

    /// Strongest class of the formula. Arity is fixed by the type, so every
    /// value is at least a path formula.
    pub fn classify(&self) -> Classification {
        if self.is_state_formula() {
            Classification::StateFormula
        } else {
            Classification::PathFormula
        }
    }

    pub fn is_state_formula(&self) -> bool {
        use Formula::*;
        match self {
            True | False | Atom(_) | Exists(_) | Forall(_) => true,
            Not(a) => a.is_state_formula(),
            And(a, b) | Or(a, b) | Implies(a, b) => a.is_state_formula() && b.is_state_formula(),
            Next(_) | Finally(_) | Globally(_) | Until(..) | Release(..) => false,
        }
    }

    /// True iff every temporal operator sits directly under a path
    /// quantifier and every quantifier governs exactly one temporal operator
    /// whose operands are state formulas.
    pub fn is_ctl(&self) -> bool {
        use Formula::*;
        match self {
            True | False | Atom(_) => true,
            Not(a) => a.is_ctl(),
            And(a, b) | Or(a, b) | Implies(a, b) => a.is_ctl() && b.is_ctl(),
            Exists(p) | Forall(p) => match p.as_ref() {
                Next(g) | Finally(g) | Globally(g) => g.is_ctl(),
                Until(g, h) | Release(g, h) => g.is_ctl() && h.is_ctl(),
                _ => false,
            },
            Next(_) | Finally(_) | Globally(_) | Until(..) | Release(..) => false,
        }
    }

    /// Number of X, F, G, U and R nodes.
    pub fn temporal_count(&self) -> usize {
        use Formula::*;
        match self {
            True | False | Atom(_) => 0,
            Not(a) | Exists(a) | Forall(a) => a.temporal_count(),
            And(a, b) | Or(a, b) | Implies(a, b) => a.temporal_count() + b.temporal_count(),
            Next(a) | Finally(a) | Globally(a) => 1 + a.temporal_count(),
            Until(a, b) | Release(a, b) => 1 + a.temporal_count() + b.temporal_count(),
        }
    }

    pub fn has_quantifier(&self) -> bool {
        use Formula::*;
        match self {
            True | False | Atom(_) => false,
            Exists(_) | Forall(_) => true,
            Not(a) | Next(a) | Finally(a) | Globally(a) => a.has_quantifier(),
            And(a, b) | Or(a, b) | Implies(a, b) | Until(a, b) | Release(a, b) => {
                a.has_quantifier() || b.has_quantifier()
            }
        }
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        use Formula::*;
        match self {
            True | False => {}
            Atom(a) => {
                out.insert(a.clone());
            }
            Not(a) | Exists(a) | Forall(a) | Next(a) | Finally(a) | Globally(a) => a.collect_atoms(out),
            And(a, b) | Or(a, b) | Implies(a, b) | Until(a, b) | Release(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Rewrites into the basis {Atom, True, Not, And, E, X, U}, bottom-up,
    /// cancelling double negations as they appear.
    pub fn normalize(&self) -> Formula {
        use Formula::*;
        match self {
            True => True,
            False => negate(True),
            Atom(a) => Atom(a.clone()),
            Not(a) => negate(a.normalize()),
            And(a, b) => Formula::and(a.normalize(), b.normalize()),
            Or(a, b) => negate(Formula::and(negate(a.normalize()), negate(b.normalize()))),
            Implies(a, b) => negate(Formula::and(a.normalize(), negate(b.normalize()))),
            Exists(a) => Formula::exists(a.normalize()),
            Forall(a) => negate(Formula::exists(negate(a.normalize()))),
            Next(a) => Formula::next(a.normalize()),
            Finally(a) => Formula::until(True, a.normalize()),
            Globally(a) => negate(Formula::until(True, negate(a.normalize()))),
            Until(a, b) => Formula::until(a.normalize(), b.normalize()),
            Release(a, b) => negate(Formula::until(negate(a.normalize()), negate(b.normalize()))),
        }
    }

    pub fn pretty(&self) -> String {
        self.to_string()
    }

    fn precedence(&self) -> u8 {
        use Formula::*;
        match self {
            Implies(..) => 1,
            Or(..) => 2,
            And(..) => 3,
            Until(..) | Release(..) => 4,
            Not(_) | Exists(_) | Forall(_) | Next(_) | Finally(_) | Globally(_) => 5,
            True | False | Atom(_) => 6,
        }
    }
}

/// Negation that cancels an outer `!`.
pub(crate) fn negate(f: Formula) -> Formula {
    match f {
        Formula::Not(inner) => *inner,
        other => Formula::not(other),
    }
}

fn write_child(out: &mut fmt::Formatter<'_>, child: &Formula, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(out, "({child})")
    } else {
        write!(out, "{child}")
    }
}

fn write_prefix(out: &mut fmt::Formatter<'_>, op: &str, child: &Formula) -> fmt::Result {
    if child.precedence() >= 5 {
        write!(out, "{op} {child}")
    } else {
        write!(out, "{op}({child})")
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula::*;
        match self {
            True => out.write_str("true"),
            False => out.write_str("false"),
            Atom(a) => write!(out, "{a}"),
            Not(a) => {
                out.write_str("!")?;
                write_child(out, a, 5)
            }
            Exists(a) => write!(out, "E({a})"),
            Forall(a) => write!(out, "A({a})"),
            Next(a) => write_prefix(out, "X", a),
            Finally(a) => write_prefix(out, "F", a),
            Globally(a) => write_prefix(out, "G", a),
            Implies(a, b) => {
                write_child(out, a, 2)?;
                out.write_str(" -> ")?;
                write_child(out, b, 1)
            }
            Or(a, b) => {
                write_child(out, a, 2)?;
                out.write_str(" | ")?;
                write_child(out, b, 3)
            }
            And(a, b) => {
                write_child(out, a, 3)?;
                out.write_str(" & ")?;
                write_child(out, b, 4)
            }
            Until(a, b) | Release(a, b) => {
                write_child(out, a, 5)?;
                out.write_str(if matches!(self, Until(..)) { " U " } else { " R " })?;
                write_child(out, b, 4)
            }
        }
    }
}

impl FromStr for Formula {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}

/// Parse failure with a 1-based character position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at position {position}: expected {}, found {found}", expected.join(" or "))]
pub struct SyntaxError {
    pub position: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Bang,
    Amp,
    Bar,
    Arrow,
    Eq,
    Prefix(char),
    Until,
    Release,
    True,
    False,
    Ident(String),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Bang => "'!'".into(),
            Tok::Amp => "'&'".into(),
            Tok::Bar => "'|'".into(),
            Tok::Arrow => "'->'".into(),
            Tok::Eq => "'='".into(),
            Tok::Prefix(c) => format!("'{c}'"),
            Tok::Until => "'U'".into(),
            Tok::Release => "'R'".into(),
            Tok::True => "'true'".into(),
            Tok::False => "'false'".into(),
            Tok::Ident(s) => format!("identifier {s:?}"),
        }
    }
}

const PREFIX_OPS: &str = "AEXFG";

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks: Vec<(Tok, usize)> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '!' | '¬' => Some(Tok::Bang),
            '&' | '∧' => Some(Tok::Amp),
            '|' | '∨' => Some(Tok::Bar),
            '→' => Some(Tok::Arrow),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = single {
            toks.push((tok, pos));
            i += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            toks.push((Tok::Arrow, pos));
            i += 2;
            continue;
        }
        if !is_ident_start(c) {
            return Err(SyntaxError {
                position: pos,
                expected: vec!["formula token".into()],
                found: format!("{c:?}"),
            });
        }
        let start = i;
        while i < chars.len() && is_ident_char(chars[i]) {
            i += 1;
        }
        let word: String = chars[start..i].iter().collect();
        let after_eq = matches!(toks.last(), Some((Tok::Eq, _)));
        let before_eq = chars[i..].iter().find(|c| !c.is_whitespace()) == Some(&'=');
        if after_eq || before_eq {
            toks.push((Tok::Ident(word), pos));
        } else if word == "true" {
            toks.push((Tok::True, pos));
        } else if word == "false" {
            toks.push((Tok::False, pos));
        } else if word == "U" {
            toks.push((Tok::Until, pos));
        } else if word == "R" {
            toks.push((Tok::Release, pos));
        } else if word.chars().all(|c| PREFIX_OPS.contains(c)) {
            for (k, op) in word.chars().enumerate() {
                toks.push((Tok::Prefix(op), pos + k));
            }
        } else {
            toks.push((Tok::Ident(word), pos));
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn position(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(_, p)| *p)
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        SyntaxError {
            position: self.position(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().map_or_else(|| "end of input".to_string(), Tok::describe),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn implies(&mut self) -> Result<Formula, SyntaxError> {
        let lhs = self.or()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, SyntaxError> {
        let mut lhs = self.and()?;
        while self.eat(&Tok::Bar) {
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, SyntaxError> {
        let mut lhs = self.until()?;
        while self.eat(&Tok::Amp) {
            lhs = Formula::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, SyntaxError> {
        let lhs = self.unary()?;
        if self.eat(&Tok::Until) {
            return Ok(Formula::until(lhs, self.until()?));
        }
        if self.eat(&Tok::Release) {
            return Ok(Formula::release(lhs, self.until()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, SyntaxError> {
        const START: &[&str] = &["'!'", "'A'", "'E'", "'X'", "'F'", "'G'", "'('", "atom", "'true'", "'false'"];
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error(START));
        };
        self.at += 1;
        match tok {
            Tok::Bang => Ok(Formula::not(self.unary()?)),
            Tok::Prefix(op) => {
                let inner = self.unary()?;
                Ok(match op {
                    'A' => Formula::forall(inner),
                    'E' => Formula::exists(inner),
                    'X' => Formula::next(inner),
                    'F' => Formula::finally(inner),
                    _ => Formula::globally(inner),
                })
            }
            Tok::LParen => {
                let inner = self.implies()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.error(&["')'", "binary operator"]));
                }
                Ok(inner)
            }
            Tok::True => Ok(Formula::True),
            Tok::False => Ok(Formula::False),
            Tok::Ident(name) => {
                if self.eat(&Tok::Eq) {
                    match self.peek().cloned() {
                        Some(Tok::Ident(value)) => {
                            self.at += 1;
                            Ok(Formula::Atom(Atom::equality(name, value).expect("lexer yields valid tokens")))
                        }
                        _ => Err(self.error(&["identifier"])),
                    }
                } else {
                    Ok(Formula::Atom(Atom::new(name).expect("lexer yields valid tokens")))
                }
            }
            _ => {
                self.at -= 1;
                Err(self.error(START))
            }
        }
    }
}

/// Parses one formula; the whole input must be consumed.
pub fn parse_formula(text: &str) -> Result<Formula, SyntaxError> {
    let toks = lex(text)?;
    let mut parser = Parser {
        toks,
        at: 0,
        end: text.chars().count() + 1,
    };
    let f = parser.implies()?;
    if parser.peek().is_some() {
        return Err(parser.error(&["binary operator", "end of input"]));
    }
    Ok(f)
}
