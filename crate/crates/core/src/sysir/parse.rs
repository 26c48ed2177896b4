//! Parser for the line-oriented `.msys` system format.
//!
//! ```text
//! system counter
//! input en: bv[1]
//! state c: bv[4] init 0
//! next c = ite(en, add(c, 1), c)
//! label wrapped = eq(c, 0)
//! ```
//!
//! Numeric literals take their width from the surrounding expression.

use std::fmt;

use thiserror::Error;

use super::{IrBuilder, IrError, NodeId, Op, SystemIR};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: IrError,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u64),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

struct Line<'a> {
    number: usize,
    tokens: Vec<Token>,
    pos: usize,
    end_col: usize,
    _text: &'a str,
}

fn syntax(line: usize, column: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        kind: IrError::Invalid(msg.into()),
    }
}

fn parse_number(text: &str) -> Option<u64> {
    if let Some(bin) = text.strip_prefix("0b") {
        u64::from_str_radix(&bin.replace('_', ""), 2).ok()
    } else if let Some(hex) = text.strip_prefix("0x") {
        u64::from_str_radix(&hex.replace('_', ""), 16).ok()
    } else {
        text.replace('_', "").parse().ok()
    }
}

fn tokenize(number: usize, text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        let col = k + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            k += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = k;
            while k < chars.len() && (chars[k].is_ascii_alphanumeric() || chars[k] == '_') {
                k += 1;
            }
            tokens.push(Token {
                tok: Tok::Ident(chars[start..k].iter().collect()),
                col,
            });
        } else if c.is_ascii_digit() {
            let start = k;
            while k < chars.len() && (chars[k].is_ascii_alphanumeric() || chars[k] == '_') {
                k += 1;
            }
            let lexeme: String = chars[start..k].iter().collect();
            let value = parse_number(&lexeme)
                .ok_or_else(|| syntax(number, col, format!("invalid number '{lexeme}'")))?;
            tokens.push(Token {
                tok: Tok::Num(value),
                col,
            });
        } else if "()[],:=".contains(c) {
            tokens.push(Token {
                tok: Tok::Punct(c),
                col,
            });
            k += 1;
        } else {
            return Err(syntax(number, col, format!("unexpected character '{c}'")));
        }
    }
    Ok(tokens)
}

impl<'a> Line<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn col(&self) -> usize {
        self.peek().map_or(self.end_col, |t| t.col)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        syntax(self.number, self.col(), msg)
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), ParseError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(name),
                col,
            }) => {
                let out = (name.clone(), *col);
                self.pos += 1;
                Ok(out)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(name),
                ..
            }) if name == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected '{kw}'"))),
        }
    }

    fn number(&mut self) -> Result<u64, ParseError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Num(v), ..
            }) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.err("expected a number")),
        }
    }

    fn punct(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Punct(p), ..
            }) if *p == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected '{c}'"))),
        }
    }

    fn at_punct(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Punct(p), .. }) if *p == c)
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.pos < self.tokens.len() {
            Err(self.err("unexpected trailing input"))
        } else {
            Ok(())
        }
    }

    /// `bv[<width>]`
    fn bv_type(&mut self) -> Result<u32, ParseError> {
        self.keyword("bv")?;
        self.punct('[')?;
        let col = self.col();
        let w = self.number()?;
        self.punct(']')?;
        u32::try_from(w)
            .ok()
            .filter(|w| (1..=64).contains(w))
            .ok_or_else(|| syntax(self.number, col, format!("invalid width {w}")))
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let col = self.col();
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Ast {
                    kind: AstKind::Num(v),
                    line: self.number,
                    col,
                })
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.at_punct('(') {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if !self.at_punct(')') {
                        loop {
                            args.push(self.expr()?);
                            if self.at_punct(',') {
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                    }
                    self.punct(')')?;
                    Ok(Ast {
                        kind: AstKind::Call(name, args),
                        line: self.number,
                        col,
                    })
                } else {
                    Ok(Ast {
                        kind: AstKind::Var(name),
                        line: self.number,
                        col,
                    })
                }
            }
            _ => Err(self.err("expected an expression")),
        }
    }
}

#[derive(Debug, Clone)]
enum AstKind {
    Num(u64),
    Var(String),
    Call(String, Vec<Ast>),
}

#[derive(Debug, Clone)]
struct Ast {
    kind: AstKind,
    line: usize,
    col: usize,
}

impl Ast {
    fn err(&self, kind: IrError) -> ParseError {
        ParseError {
            line: self.line,
            column: self.col,
            kind,
        }
    }

    fn is_literal(&self) -> bool {
        matches!(self.kind, AstKind::Num(_))
    }

    fn literal(&self) -> Result<u64, ParseError> {
        match self.kind {
            AstKind::Num(v) => Ok(v),
            _ => Err(self.err(IrError::Invalid("expected a numeric constant".into()))),
        }
    }
}

struct Elaborator {
    builder: IrBuilder,
}

impl Elaborator {
    fn check(&self, ast: &Ast, id: NodeId, expected: Option<u32>) -> Result<NodeId, ParseError> {
        match expected {
            Some(w) if w != self.builder.width(id) => Err(ast.err(IrError::WidthMismatch {
                expected: w,
                found: self.builder.width(id),
            })),
            _ => Ok(id),
        }
    }

    fn arity(ast: &Ast, name: &str, args: &[Ast], n: usize) -> Result<(), ParseError> {
        if args.len() != n {
            Err(ast.err(IrError::Invalid(format!(
                "'{name}' takes {n} argument(s), got {}",
                args.len()
            ))))
        } else {
            Ok(())
        }
    }

    fn small(ast: &Ast) -> Result<u32, ParseError> {
        let v = ast.literal()?;
        u32::try_from(v).map_err(|_| ast.err(IrError::Invalid(format!("constant {v} too large"))))
    }

    /// Elaborates two operands that must share a width; a literal takes
    /// the width of its partner.
    fn pair(
        &mut self,
        a: &Ast,
        b: &Ast,
        expected: Option<u32>,
    ) -> Result<(NodeId, NodeId), ParseError> {
        if a.is_literal() && !b.is_literal() {
            let nb = self.elab(b, expected)?;
            let w = self.builder.width(nb);
            let na = self.elab(a, Some(w))?;
            Ok((na, nb))
        } else {
            let na = self.elab(a, expected)?;
            let w = self.builder.width(na);
            let nb = self.elab(b, Some(w))?;
            Ok((na, nb))
        }
    }

    fn elab(&mut self, ast: &Ast, expected: Option<u32>) -> Result<NodeId, ParseError> {
        let wrap = |e: IrError| ast.err(e);
        match &ast.kind {
            AstKind::Num(v) => {
                let w = expected.ok_or_else(|| {
                    ast.err(IrError::Invalid(format!(
                        "cannot infer the width of literal {v}"
                    )))
                })?;
                self.builder.constant(w, *v).map_err(wrap)
            }
            AstKind::Var(name) => {
                let id = self.builder.var_named(name).map_err(wrap)?;
                self.check(ast, id, expected)
            }
            AstKind::Call(name, args) => {
                let name = name.as_str();
                let id = match name {
                    "not" => {
                        Self::arity(ast, name, args, 1)?;
                        let a = self.elab(&args[0], expected)?;
                        self.builder.not(a)
                    }
                    "and" | "or" | "xor" | "add" | "sub" => {
                        Self::arity(ast, name, args, 2)?;
                        let op = match name {
                            "and" => Op::And,
                            "or" => Op::Or,
                            "xor" => Op::Xor,
                            "add" => Op::Add,
                            _ => Op::Sub,
                        };
                        let (a, b) = self.pair(&args[0], &args[1], expected)?;
                        self.builder.binary(op, a, b).map_err(wrap)?
                    }
                    "eq" | "ne" | "ult" | "ule" => {
                        Self::arity(ast, name, args, 2)?;
                        let op = match name {
                            "eq" => Op::Eq,
                            "ne" => Op::Ne,
                            "ult" => Op::Ult,
                            _ => Op::Ule,
                        };
                        let (a, b) = self.pair(&args[0], &args[1], None)?;
                        self.builder.binary(op, a, b).map_err(wrap)?
                    }
                    "shl" | "lshr" => {
                        Self::arity(ast, name, args, 2)?;
                        let a = self.elab(&args[0], expected)?;
                        let k = Self::small(&args[1])?;
                        if name == "shl" {
                            self.builder.shl(a, k).map_err(wrap)?
                        } else {
                            self.builder.lshr(a, k).map_err(wrap)?
                        }
                    }
                    "slice" => {
                        Self::arity(ast, name, args, 3)?;
                        let a = self.elab(&args[0], None)?;
                        let lo = Self::small(&args[1])?;
                        let hi = Self::small(&args[2])?;
                        self.builder.slice(a, lo, hi).map_err(wrap)?
                    }
                    "concat" => {
                        Self::arity(ast, name, args, 2)?;
                        let a = self.elab(&args[0], None)?;
                        let b = self.elab(&args[1], None)?;
                        self.builder.concat(a, b).map_err(wrap)?
                    }
                    "zext" => {
                        Self::arity(ast, name, args, 2)?;
                        let a = self.elab(&args[0], None)?;
                        let w = Self::small(&args[1])?;
                        self.builder.zext(a, w).map_err(wrap)?
                    }
                    "ite" => {
                        Self::arity(ast, name, args, 3)?;
                        let c = self.elab(&args[0], Some(1))?;
                        let (a, b) = self.pair(&args[1], &args[2], expected)?;
                        self.builder.ite(c, a, b).map_err(wrap)?
                    }
                    _ => {
                        return Err(ast.err(IrError::Invalid(format!(
                            "unknown operator '{name}'"
                        ))))
                    }
                };
                self.check(ast, id, expected)
            }
        }
    }
}

/// Parses and validates a system description.
pub fn parse_system(text: &str) -> Result<SystemIR, ParseError> {
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let tokens = tokenize(number, raw)?;
        if tokens.is_empty() {
            continue;
        }
        lines.push(Line {
            number,
            tokens,
            pos: 0,
            end_col: raw.chars().count() + 1,
            _text: raw,
        });
    }
    let mut iter = lines.into_iter();
    let mut first = iter
        .next()
        .ok_or_else(|| syntax(1, 1, "expected 'system'"))?;
    first.keyword("system")?;
    let (name, _) = first.ident("a system name")?;
    first.finish()?;

    let mut el = Elaborator {
        builder: IrBuilder::new(&name),
    };
    // next/label bodies may reference variables declared later
    let mut deferred: Vec<(Line, bool, String, usize)> = Vec::new();
    let mut state_lines: Vec<(String, usize, usize)> = Vec::new();
    for mut line in iter {
        let (kw, kw_col) = line.ident("a declaration keyword")?;
        match kw.as_str() {
            "input" | "state" => {
                let (var, col) = line.ident("a variable name")?;
                line.punct(':')?;
                let width = line.bv_type()?;
                let number = line.number;
                let at = |e: IrError| ParseError {
                    line: number,
                    column: col,
                    kind: e,
                };
                if kw == "input" {
                    line.finish()?;
                    el.builder.input(&var, width).map_err(at)?;
                } else {
                    line.keyword("init")?;
                    let init = line.number()?;
                    line.finish()?;
                    el.builder.state(&var, width, init).map_err(at)?;
                    state_lines.push((var, line.number, col));
                }
            }
            "next" | "label" => {
                let (target, col) = line.ident("a name")?;
                line.punct('=')?;
                deferred.push((line, kw == "next", target, col));
            }
            _ => {
                return Err(syntax(
                    line.number,
                    kw_col,
                    format!("unknown declaration '{kw}'"),
                ))
            }
        }
    }
    for (mut line, is_next, target, col) in deferred {
        let ast = line.expr()?;
        line.finish()?;
        let at = |e: IrError| ParseError {
            line: line.number,
            column: col,
            kind: e,
        };
        if is_next {
            let expected = match el.builder.lookup(&target) {
                Some(var) => el.builder.var_width(var),
                None => return Err(at(IrError::Undeclared(target))),
            };
            let id = el.elab(&ast, Some(expected))?;
            el.builder.set_next(&target, id).map_err(at)?;
        } else {
            let id = el.elab(&ast, Some(1))?;
            el.builder.add_label(&target, id).map_err(at)?;
        }
    }
    el.builder.build().map_err(|e| {
        let (line, column) = match &e {
            IrError::MissingNext(var) => state_lines
                .iter()
                .find(|(n, _, _)| n == var)
                .map_or((1, 1), |(_, l, c)| (*l, *c)),
            _ => (1, 1),
        };
        ParseError {
            line,
            column,
            kind: e,
        }
    })
}
