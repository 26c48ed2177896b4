//! Random systems and formulas shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tvar::mc3::Formula;
use tvar::sysir::{IrBuilder, NodeId, Op, SystemIR, VarRef};

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Splits `total` into 1..=max_parts positive widths.
fn split_widths(rng: &mut ChaCha8Rng, total: u32, max_parts: u32) -> Vec<u32> {
    let parts = rng.gen_range(1..=max_parts.min(total));
    let mut cuts: Vec<u32> = (1..total).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<u32> = cuts.into_iter().take(parts as usize - 1).collect();
    cuts.sort_unstable();
    let mut out = Vec::new();
    let mut prev = 0;
    for c in cuts.into_iter().chain([total]) {
        out.push(c - prev);
        prev = c;
    }
    out
}

struct Gen<'a> {
    b: IrBuilder,
    rng: &'a mut ChaCha8Rng,
    vars: Vec<(VarRef, u32)>,
}

impl Gen<'_> {
    fn leaf(&mut self, width: u32, allow_inputs: bool) -> NodeId {
        let pool: Vec<(VarRef, u32)> = self
            .vars
            .iter()
            .copied()
            .filter(|(v, _)| allow_inputs || matches!(v, VarRef::State(_)))
            .collect();
        if pool.is_empty() || self.rng.gen_bool(0.15) {
            let value = self.rng.gen_range(0..(1u64 << width));
            return self.b.constant(width, value).unwrap();
        }
        let (var, w) = *pool.choose(self.rng).unwrap();
        let node = self.b.var(var);
        if w == width {
            node
        } else if w > width {
            let lo = self.rng.gen_range(0..=(w - width));
            self.b.slice(node, lo, lo + width - 1).unwrap()
        } else {
            self.b.zext(node, width).unwrap()
        }
    }

    fn expr(&mut self, width: u32, depth: u32, allow_inputs: bool) -> NodeId {
        if depth == 0 || self.rng.gen_bool(0.2) {
            return self.leaf(width, allow_inputs);
        }
        let d = depth - 1;
        match self.rng.gen_range(0..10) {
            0 => {
                let a = self.expr(width, d, allow_inputs);
                self.b.not(a)
            }
            1..=4 => {
                let op = *[Op::And, Op::Or, Op::Xor, Op::Add, Op::Sub].choose(self.rng).unwrap();
                let a = self.expr(width, d, allow_inputs);
                let c = self.expr(width, d, allow_inputs);
                self.b.binary(op, a, c).unwrap()
            }
            5 | 6 => {
                let cond = self.expr(1, d, allow_inputs);
                let a = self.expr(width, d, allow_inputs);
                let c = self.expr(width, d, allow_inputs);
                self.b.ite(cond, a, c).unwrap()
            }
            7 if width > 1 => {
                let k = self.rng.gen_range(1..width);
                let a = self.expr(width, d, allow_inputs);
                if self.rng.gen_bool(0.5) {
                    self.b.shl(a, k).unwrap()
                } else {
                    self.b.lshr(a, k).unwrap()
                }
            }
            8 if width > 1 => {
                let hi = self.rng.gen_range(1..width);
                let a = self.expr(hi, d, allow_inputs);
                let c = self.expr(width - hi, d, allow_inputs);
                self.b.concat(a, c).unwrap()
            }
            _ if width == 1 => {
                let w = self.rng.gen_range(1..=4);
                let op = *[Op::Eq, Op::Ne, Op::Ult, Op::Ule].choose(self.rng).unwrap();
                let a = self.expr(w, d, allow_inputs);
                let c = self.expr(w, d, allow_inputs);
                self.b.binary(op, a, c).unwrap()
            }
            _ => self.leaf(width, allow_inputs),
        }
    }
}

/// A random system with state width in `1..=max_w`, input width in
/// `1..=max_y` and between one and three labels `p0`, `p1`, ...
pub fn random_system(rng: &mut ChaCha8Rng, max_w: u32, max_y: u32) -> SystemIR {
    let w = rng.gen_range(1..=max_w);
    let y = rng.gen_range(1..=max_y);
    let state_widths = split_widths(rng, w, 3);
    let input_widths = split_widths(rng, y, 2);
    let mut g = Gen {
        b: IrBuilder::new("random"),
        rng,
        vars: Vec::new(),
    };
    for (k, &width) in input_widths.iter().enumerate() {
        let v = g.b.input(&format!("i{k}"), width).unwrap();
        g.vars.push((v, width));
    }
    for (k, &width) in state_widths.iter().enumerate() {
        let init = g.rng.gen_range(0..(1u64 << width));
        let v = g.b.state(&format!("x{k}"), width, init).unwrap();
        g.vars.push((v, width));
    }
    for (k, &width) in state_widths.iter().enumerate() {
        let e = g.expr(width, 3, true);
        g.b.set_next(&format!("x{k}"), e).unwrap();
    }
    let labels = g.rng.gen_range(1..=3);
    for k in 0..labels {
        let e = g.expr(1, 2, false);
        g.b.add_label(&format!("p{k}"), e).unwrap();
    }
    g.b.build().unwrap()
}

/// A random CTL formula of depth at most `depth` over `atoms`.
pub fn random_formula(rng: &mut ChaCha8Rng, atoms: &[String], depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.15) {
        return match rng.gen_range(0..12) {
            0 => Formula::True,
            1 => Formula::False,
            _ => Formula::atom(atoms.choose(rng).unwrap()),
        };
    }
    let sub = |rng: &mut ChaCha8Rng| Box::new(random_formula(rng, atoms, depth - 1));
    match rng.gen_range(0..13) {
        0 => Formula::Not(sub(rng)),
        1 => Formula::And(sub(rng), sub(rng)),
        2 => Formula::Or(sub(rng), sub(rng)),
        3 => Formula::Implies(sub(rng), sub(rng)),
        4 => Formula::AX(sub(rng)),
        5 => Formula::EX(sub(rng)),
        6 => Formula::AF(sub(rng)),
        7 => Formula::EF(sub(rng)),
        8 => Formula::AG(sub(rng)),
        9 => Formula::EG(sub(rng)),
        10 => Formula::AU(sub(rng), sub(rng)),
        11 => Formula::EU(sub(rng), sub(rng)),
        _ => Formula::AG(Box::new(Formula::EF(sub(rng)))),
    }
}

pub fn label_names(ir: &SystemIR) -> Vec<String> {
    ir.label_names().map(str::to_string).collect()
}
