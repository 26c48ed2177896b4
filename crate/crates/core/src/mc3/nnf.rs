//! Negation normal form with weak-until duals.

use std::fmt;

use super::Formula;

/// A formula with negation only on atoms.
///
/// `EW`/`AW` are weak until; `EG φ` is `E[φ W false]` and `AG φ` is
/// `A[φ W false]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Nnf {
    True,
    False,
    Lit(String, bool),
    And(Box<Nnf>, Box<Nnf>),
    Or(Box<Nnf>, Box<Nnf>),
    EX(Box<Nnf>),
    AX(Box<Nnf>),
    EU(Box<Nnf>, Box<Nnf>),
    AU(Box<Nnf>, Box<Nnf>),
    EW(Box<Nnf>, Box<Nnf>),
    AW(Box<Nnf>, Box<Nnf>),
}

fn b(n: Nnf) -> Box<Nnf> {
    Box::new(n)
}

fn and(x: Nnf, y: Nnf) -> Nnf {
    Nnf::And(b(x), b(y))
}

fn or(x: Nnf, y: Nnf) -> Nnf {
    Nnf::Or(b(x), b(y))
}

/// Pushes negations down to atoms.
pub fn normalize_nnf(formula: &Formula) -> Nnf {
    nnf(formula, true)
}

fn nnf(f: &Formula, pos: bool) -> Nnf {
    match f {
        Formula::True => {
            if pos {
                Nnf::True
            } else {
                Nnf::False
            }
        }
        Formula::False => nnf(&Formula::True, !pos),
        Formula::Atom(name) => Nnf::Lit(name.clone(), pos),
        Formula::Not(a) => nnf(a, !pos),
        Formula::And(x, y) => {
            if pos {
                and(nnf(x, true), nnf(y, true))
            } else {
                or(nnf(x, false), nnf(y, false))
            }
        }
        Formula::Or(x, y) => {
            if pos {
                or(nnf(x, true), nnf(y, true))
            } else {
                and(nnf(x, false), nnf(y, false))
            }
        }
        Formula::Implies(x, y) => {
            if pos {
                or(nnf(x, false), nnf(y, true))
            } else {
                and(nnf(x, true), nnf(y, false))
            }
        }
        Formula::EX(a) => {
            if pos {
                Nnf::EX(b(nnf(a, true)))
            } else {
                Nnf::AX(b(nnf(a, false)))
            }
        }
        Formula::AX(a) => {
            if pos {
                Nnf::AX(b(nnf(a, true)))
            } else {
                Nnf::EX(b(nnf(a, false)))
            }
        }
        Formula::EF(a) => {
            if pos {
                Nnf::EU(b(Nnf::True), b(nnf(a, true)))
            } else {
                Nnf::AW(b(nnf(a, false)), b(Nnf::False))
            }
        }
        Formula::AF(a) => {
            if pos {
                Nnf::AU(b(Nnf::True), b(nnf(a, true)))
            } else {
                Nnf::EW(b(nnf(a, false)), b(Nnf::False))
            }
        }
        Formula::EG(a) => {
            if pos {
                Nnf::EW(b(nnf(a, true)), b(Nnf::False))
            } else {
                Nnf::AU(b(Nnf::True), b(nnf(a, false)))
            }
        }
        Formula::AG(a) => {
            if pos {
                Nnf::AW(b(nnf(a, true)), b(Nnf::False))
            } else {
                Nnf::EU(b(Nnf::True), b(nnf(a, false)))
            }
        }
        // ¬E[x U y] ≡ A[¬y W (¬x ∧ ¬y)], and dually for A
        Formula::EU(x, y) => {
            if pos {
                Nnf::EU(b(nnf(x, true)), b(nnf(y, true)))
            } else {
                Nnf::AW(b(nnf(y, false)), b(and(nnf(x, false), nnf(y, false))))
            }
        }
        Formula::AU(x, y) => {
            if pos {
                Nnf::AU(b(nnf(x, true)), b(nnf(y, true)))
            } else {
                Nnf::EW(b(nnf(y, false)), b(and(nnf(x, false), nnf(y, false))))
            }
        }
    }
}

impl Nnf {
    /// An equivalent [`Formula`]; weak until is expressed through its
    /// negated strong dual.
    pub fn to_formula(&self) -> Formula {
        let bx = |n: &Nnf| Box::new(n.to_formula());
        match self {
            Nnf::True => Formula::True,
            Nnf::False => Formula::False,
            Nnf::Lit(name, true) => Formula::atom(name),
            Nnf::Lit(name, false) => Formula::atom(name).not(),
            Nnf::And(x, y) => Formula::And(bx(x), bx(y)),
            Nnf::Or(x, y) => Formula::Or(bx(x), bx(y)),
            Nnf::EX(a) => Formula::EX(bx(a)),
            Nnf::AX(a) => Formula::AX(bx(a)),
            Nnf::EU(x, y) => Formula::EU(bx(x), bx(y)),
            Nnf::AU(x, y) => Formula::AU(bx(x), bx(y)),
            Nnf::EW(x, y) if **y == Nnf::False => Formula::EG(bx(x)),
            Nnf::AW(x, y) if **y == Nnf::False => Formula::AG(bx(x)),
            // E[x W y] ≡ ¬A[¬y U (¬x ∧ ¬y)]
            Nnf::EW(x, y) | Nnf::AW(x, y) => {
                let (x, y) = (x.to_formula(), y.to_formula());
                let stop = Box::new(x.not().and(y.clone().not()));
                let strong = if matches!(self, Nnf::EW(..)) {
                    Formula::AU(Box::new(y.not()), stop)
                } else {
                    Formula::EU(Box::new(y.not()), stop)
                };
                strong.not()
            }
        }
    }
}

impl fmt::Display for Nnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nnf::True => f.write_str("true"),
            Nnf::False => f.write_str("false"),
            Nnf::Lit(name, true) => f.write_str(name),
            Nnf::Lit(name, false) => write!(f, "!{name}"),
            Nnf::And(x, y) => write!(f, "({x} & {y})"),
            Nnf::Or(x, y) => write!(f, "({x} | {y})"),
            Nnf::EX(a) => write!(f, "EX({a})"),
            Nnf::AX(a) => write!(f, "AX({a})"),
            Nnf::EU(x, y) if **x == Nnf::True => write!(f, "EF({y})"),
            Nnf::AU(x, y) if **x == Nnf::True => write!(f, "AF({y})"),
            Nnf::EW(x, y) if **y == Nnf::False => write!(f, "EG({x})"),
            Nnf::AW(x, y) if **y == Nnf::False => write!(f, "AG({x})"),
            Nnf::EU(x, y) => write!(f, "E[{x} U {y}]"),
            Nnf::AU(x, y) => write!(f, "A[{x} U {y}]"),
            Nnf::EW(x, y) => write!(f, "E[{x} W {y}]"),
            Nnf::AW(x, y) => write!(f, "A[{x} W {y}]"),
        }
    }
}
