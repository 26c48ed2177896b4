//! Built-in benchmark systems.

use std::fmt;
use std::str::FromStr;

use super::{parse_system, IrError, ParseError, SystemIR};

/// The 3-bit landing-gear controller with a 1-bit lever input.
///
/// `s0` is the least significant state bit. The controller gets stuck in
/// `101` after `000 -1-> 011 -> 111`.
pub const LANDING_GEAR_SOURCE: &str = "\
system landing_gear
input lever: bv[1]
state s0: bv[1] init 0
state s1: bv[1] init 0
state s2: bv[1] init 0
next s2 = ite(s0, or(s2, s1), ite(s1, lever, s2))
next s1 = ite(s2, and(s1, not(s0)), ite(or(s1, s0), 1, lever))
next s0 = ite(s2, ite(s1, and(s0, lever), or(s0, not(s0))), not(xor(s1, s0)))
label msb = eq(s2, 1)
";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BenchmarkKind {
    Recoverable,
    Nonrecoverable,
    LandingGear,
}

impl BenchmarkKind {
    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Recoverable => "recoverable",
            BenchmarkKind::Nonrecoverable => "nonrecoverable",
            BenchmarkKind::LandingGear => "landing-gear",
        }
    }

    pub fn is_parametric(self) -> bool {
        self != BenchmarkKind::LandingGear
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "recoverable" => Ok(BenchmarkKind::Recoverable),
            "nonrecoverable" => Ok(BenchmarkKind::Nonrecoverable),
            "landing-gear" | "landing_gear" => Ok(BenchmarkKind::LandingGear),
            other => Err(format!("unknown benchmark kind '{other}'")),
        }
    }
}

/// Source text of a parametric system: `v` tracks the running maximum of
/// input `n`, `u` is loaded from `z`, `c` counts freely, and in the
/// recoverable variant `r = 1` resets `v`.
pub fn benchmark_source(kind: BenchmarkKind, v: u32, u: u32, c: u32) -> Result<String, IrError> {
    if kind == BenchmarkKind::LandingGear {
        return Ok(LANDING_GEAR_SOURCE.to_string());
    }
    if v == 0 || u == 0 || c == 0 {
        return Err(IrError::Invalid(format!(
            "benchmark parameters must be positive, got V={v}, U={u}, C={c}"
        )));
    }
    let max = "ite(ule(n, v), v, n)";
    let next_v = match kind {
        BenchmarkKind::Recoverable => format!("ite(eq(r, 1), 0, {max})"),
        _ => max.to_string(),
    };
    Ok(format!(
        "system {name}\n\
         input n: bv[{v}]\n\
         input z: bv[{u}]\n\
         input r: bv[1]\n\
         state v: bv[{v}] init 0\n\
         state u: bv[{u}] init 0\n\
         state c: bv[{c}] init 0\n\
         next v = {next_v}\n\
         next u = z\n\
         next c = add(c, 1)\n\
         label v_zero = eq(v, 0)\n",
        name = kind.name(),
    ))
}

pub fn generate_benchmark(kind: BenchmarkKind, v: u32, u: u32, c: u32) -> Result<SystemIR, ParseError> {
    let text = benchmark_source(kind, v, u, c).map_err(|kind| ParseError {
        line: 0,
        column: 0,
        kind,
    })?;
    parse_system(&text)
}
