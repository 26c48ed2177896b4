//! Backward dependency marking through the expression DAG.

use super::{mask, NodeId, Op, SystemIR};
use crate::bitvec3::{TBit, TBitVec};

fn width_mask_up_to_msb(d: u64) -> u64 {
    if d == 0 {
        0
    } else {
        let msb = 63 - d.leading_zeros();
        mask(msb + 1)
    }
}

impl SystemIR {
    fn propagate(
        &self,
        order: &[NodeId],
        values: &[TBitVec],
        demand: &mut [u64],
    ) -> (u64, u64) {
        let (mut state_bits, mut input_bits) = (0u64, 0u64);
        for &id in order.iter().rev() {
            let d = demand[id.index()] & values[id.index()].unknown_mask();
            if d == 0 {
                continue;
            }
            let node = &self.nodes[id.index()];
            let arg_width = |k: usize| self.nodes[node.args[k].index()].width;
            let mut push = |k: usize, bits: u64| demand[node.args[k].index()] |= bits;
            match node.op {
                Op::Const(_) => {}
                Op::State(k) => state_bits |= d << self.states[k].var.offset,
                Op::Input(k) => input_bits |= d << self.inputs[k].offset,
                Op::Not => push(0, d),
                Op::And | Op::Or | Op::Xor => {
                    push(0, d);
                    push(1, d);
                }
                Op::Add | Op::Sub => {
                    let low = width_mask_up_to_msb(d);
                    push(0, low);
                    push(1, low);
                }
                Op::Eq | Op::Ne | Op::Ult | Op::Ule => {
                    let all = mask(arg_width(0));
                    push(0, all);
                    push(1, all);
                }
                Op::Shl(k) => push(0, d >> k),
                Op::Lshr(k) => push(0, (d << k) & mask(arg_width(0))),
                Op::Slice { lo, .. } => push(0, d << lo),
                Op::Concat => {
                    let low_width = arg_width(1);
                    push(0, d >> low_width);
                    push(1, d & mask(low_width));
                }
                Op::Zext => push(0, d & mask(arg_width(0))),
                Op::Ite => match values[node.args[0].index()].bit(0) {
                    TBit::One => push(1, d),
                    TBit::Zero => push(2, d),
                    TBit::Unknown => {
                        push(0, 1);
                        push(1, d);
                        push(2, d);
                    }
                },
            }
        }
        (state_bits, input_bits)
    }

    /// Unknown state and input bits that may affect the `target` bits of
    /// f̂basic(ŝ, î). Bits that are concrete in the result are ignored.
    pub fn backward_mark(&self, state: &TBitVec, input: &TBitVec, target: u64) -> (u64, u64) {
        let mut values = self.scratch();
        self.eval_abstract_nodes(&self.step_order, state, Some(input), &mut values);
        let mut demand = vec![0u64; self.nodes.len()];
        for (s, id) in self.states.iter().zip(&self.next) {
            demand[id.index()] |= (target >> s.var.offset) & mask(s.var.width);
        }
        self.propagate(&self.step_order, &values, &mut demand)
    }

    /// Unknown state bits that may affect label `label` at ŝ.
    pub fn label_mark(&self, state: &TBitVec, label: usize) -> u64 {
        let mut values = self.scratch();
        self.eval_abstract_nodes(&self.label_order, state, None, &mut values);
        let mut demand = vec![0u64; self.nodes.len()];
        demand[self.labels[label].1.index()] = 1;
        self.propagate(&self.label_order, &values, &mut demand).0
    }
}
