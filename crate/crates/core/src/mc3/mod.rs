//! CTL model checking: a two-valued fixpoint checker and the three-valued
//! checker built from its runs on pessimistic and optimistic completions.

mod check;
mod formula;
mod nnf;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use check::{model_check2, model_check3, Labelling, NnfNode};
pub use formula::{parse_formula, Formula, FormulaParseError};
pub use nnf::{normalize_nnf, Nnf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThreeValued {
    False,
    True,
    Unknown,
}

impl ThreeValued {
    pub fn is_known(self) -> bool {
        self != ThreeValued::Unknown
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            ThreeValued::True
        } else {
            ThreeValued::False
        }
    }

    pub fn to_bool(self) -> Option<bool> {
        match self {
            ThreeValued::True => Some(true),
            ThreeValued::False => Some(false),
            ThreeValued::Unknown => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ThreeValued::True => "true",
            ThreeValued::False => "false",
            ThreeValued::Unknown => "unknown",
        }
    }
}

impl fmt::Display for ThreeValued {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum McError {
    #[error("atom '{0}' is not a declared label")]
    UndeclaredAtom(String),
    #[error("label '{atom}' is unknown in state {state}")]
    UnknownLabel { atom: String, state: String },
    #[error(transparent)]
    Parse(#[from] FormulaParseError),
}
