//! CTL formulas and their textual syntax.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    AX(Box<Formula>),
    EX(Box<Formula>),
    AF(Box<Formula>),
    EF(Box<Formula>),
    AG(Box<Formula>),
    EG(Box<Formula>),
    AU(Box<Formula>, Box<Formula>),
    EU(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(name: &str) -> Formula {
        Formula::Atom(name.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Formula {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Formula) -> Formula {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Formula) -> Formula {
        Formula::Or(Box::new(self), Box::new(other))
    }

    /// Atom names in order of first occurrence.
    pub fn atoms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(name) => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            Formula::Not(a)
            | Formula::AX(a)
            | Formula::EX(a)
            | Formula::AF(a)
            | Formula::EF(a)
            | Formula::AG(a)
            | Formula::EG(a) => a.collect_atoms(out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::AU(a, b)
            | Formula::EU(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 0,
            Formula::Not(a)
            | Formula::AX(a)
            | Formula::EX(a)
            | Formula::AF(a)
            | Formula::EF(a)
            | Formula::AG(a)
            | Formula::EG(a) => 1 + a.depth(),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::AU(a, b)
            | Formula::EU(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(name) => f.write_str(name),
            Formula::Not(a) => match **a {
                Formula::And(..) | Formula::Or(..) | Formula::Implies(..) => write!(f, "!({a})"),
                _ => write!(f, "!{a}"),
            },
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::AX(a) => write!(f, "AX({a})"),
            Formula::EX(a) => write!(f, "EX({a})"),
            Formula::AF(a) => write!(f, "AF({a})"),
            Formula::EF(a) => write!(f, "EF({a})"),
            Formula::AG(a) => write!(f, "AG({a})"),
            Formula::EG(a) => write!(f, "EG({a})"),
            Formula::AU(a, b) => write!(f, "A[{a} U {b}]"),
            Formula::EU(a, b) => write!(f, "E[{a} U {b}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("property syntax error at column {column}: {message}")]
pub struct FormulaParseError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Sym(&'static str),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

const SYMBOLS: [&str; 8] = ["->", "!", "&", "|", "(", ")", "[", "]"];
const UNARY: [&str; 6] = ["AX", "EX", "AF", "EF", "AG", "EG"];

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, FormulaParseError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut k = 0;
    'outer: while k < bytes.len() {
        let c = bytes[k] as char;
        if c.is_whitespace() {
            k += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = k;
            while k < bytes.len() && (bytes[k].is_ascii_alphanumeric() || bytes[k] == b'_') {
                k += 1;
            }
            out.push((Tok::Ident(text[start..k].to_string()), start + 1));
            continue;
        }
        for sym in SYMBOLS {
            if text[k..].starts_with(sym) {
                out.push((Tok::Sym(sym), k + 1));
                k += sym.len();
                continue 'outer;
            }
        }
        let ch = text[k..].chars().next().unwrap_or('?');
        return Err(FormulaParseError {
            column: k + 1,
            message: format!("unexpected character '{ch}'"),
        });
    }
    Ok(out)
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, c)| *c)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, FormulaParseError> {
        Err(FormulaParseError {
            column: self.column(),
            message: message.into(),
        })
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), FormulaParseError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.error(format!("expected '{sym}'"))
        }
    }

    fn implies(&mut self) -> Result<Formula, FormulaParseError> {
        let lhs = self.or()?;
        if self.eat_sym("->") {
            let rhs = self.implies()?;
            Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<Formula, FormulaParseError> {
        let mut lhs = self.and()?;
        while self.eat_sym("|") {
            let rhs = self.and()?;
            lhs = Formula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, FormulaParseError> {
        let mut lhs = self.unary()?;
        while self.eat_sym("&") {
            let rhs = self.unary()?;
            lhs = Formula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<(Formula, Formula), FormulaParseError> {
        self.expect_sym("[")?;
        let lhs = self.implies()?;
        match self.peek() {
            Some(Tok::Ident(u)) if u == "U" => self.pos += 1,
            _ => return self.error("expected 'U'"),
        }
        let rhs = self.implies()?;
        self.expect_sym("]")?;
        Ok((lhs, rhs))
    }

    fn unary(&mut self) -> Result<Formula, FormulaParseError> {
        if self.eat_sym("!") {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.eat_sym("(") {
            let inner = self.implies()?;
            self.expect_sym(")")?;
            return Ok(inner);
        }
        let name = match self.peek() {
            Some(Tok::Ident(name)) => name.clone(),
            _ => return self.error("expected a formula"),
        };
        self.pos += 1;
        match name.as_str() {
            "true" => Ok(Formula::True),
            "false" => Ok(Formula::False),
            "A" | "E" => {
                let (a, b) = self.until()?;
                let (a, b) = (Box::new(a), Box::new(b));
                Ok(if name == "A" {
                    Formula::AU(a, b)
                } else {
                    Formula::EU(a, b)
                })
            }
            op if UNARY.contains(&op) => {
                let a = Box::new(self.unary()?);
                Ok(match op {
                    "AX" => Formula::AX(a),
                    "EX" => Formula::EX(a),
                    "AF" => Formula::AF(a),
                    "EF" => Formula::EF(a),
                    "AG" => Formula::AG(a),
                    _ => Formula::EG(a),
                })
            }
            "U" => {
                self.pos -= 1;
                self.error("unexpected 'U'")
            }
            _ => Ok(Formula::Atom(name)),
        }
    }
}

/// Parses a property.
///
/// Precedence from tightest: unary operators, `&`, `|`, then `->`
/// (right associative).
pub fn parse_formula(text: &str) -> Result<Formula, FormulaParseError> {
    let toks = tokenize(text)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        end: text.len() + 1,
    };
    let formula = parser.implies()?;
    if parser.pos < parser.toks.len() {
        return parser.error("unexpected trailing input");
    }
    Ok(formula)
}

impl FromStr for Formula {
    type Err = FormulaParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}
