//! Finite-state machine description: declarations, the next-state
//! expression DAG, label predicates, and their concrete and three-valued
//! evaluation.
//!
//! State and input variables are flattened into single bit-vectors in
//! declaration order, least significant bit first within each variable.

mod bench;
mod mark;
mod parse;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::bitvec3::{BitVecError, CBitVec, TBit, TBitVec, MAX_WIDTH};

pub use bench::{generate_benchmark, BenchmarkKind, LANDING_GEAR_SOURCE};
pub use parse::{parse_system, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("undeclared variable '{0}'")]
    Undeclared(String),
    #[error("duplicate declaration of '{0}'")]
    Duplicate(String),
    #[error("width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: u32, found: u32 },
    #[error("state variable '{0}' has no next-state expression")]
    MissingNext(String),
    #[error("label '{0}' must not read input variables")]
    LabelReadsInput(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    BitVec(#[from] BitVecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Const(u64),
    State(usize),
    Input(usize),
    Not,
    And,
    Or,
    Xor,
    Add,
    Sub,
    Eq,
    Ne,
    Ult,
    Ule,
    Shl(u32),
    Lshr(u32),
    Slice { lo: u32, hi: u32 },
    /// First argument is the high part.
    Concat,
    Zext,
    /// Condition, then-branch, else-branch.
    Ite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub op: Op,
    pub args: Vec<NodeId>,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub width: u32,
    /// Bit offset in the flattened vector.
    pub offset: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateDecl {
    pub var: VarDecl,
    pub init: u64,
}

/// Label value of one atomic proposition: `Some(b)` or `None` for ⊥.
pub type LabelValue = Option<bool>;

/// A validated system description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemIR {
    name: String,
    inputs: Vec<VarDecl>,
    states: Vec<StateDecl>,
    nodes: Vec<Node>,
    next: Vec<NodeId>,
    labels: Vec<(String, NodeId)>,
    state_width: u32,
    input_width: u32,
    step_order: Vec<NodeId>,
    label_order: Vec<NodeId>,
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl SystemIR {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn inputs(&self) -> &[VarDecl] {
        &self.inputs
    }

    pub fn states(&self) -> &[StateDecl] {
        &self.states
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    /// Next-state expression per state variable, in declaration order.
    pub fn next_exprs(&self) -> &[NodeId] {
        &self.next
    }

    pub fn labels(&self) -> &[(String, NodeId)] {
        &self.labels
    }

    pub fn label_names(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|(n, _)| n.as_str())
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|(n, _)| n == name)
    }

    /// Flattened state width `w`.
    pub fn state_width(&self) -> u32 {
        self.state_width
    }

    /// Flattened input width `y`.
    pub fn input_width(&self) -> u32 {
        self.input_width
    }

    pub fn init_state(&self) -> CBitVec {
        let value = self
            .states
            .iter()
            .fold(0u64, |acc, s| acc | (s.init << s.var.offset));
        CBitVec::new(self.state_width, value).expect("init fits by construction")
    }

    /// The state variable and bit within it for a flattened state bit.
    pub fn state_bit_owner(&self, bit: u32) -> Option<(usize, u32)> {
        self.states.iter().enumerate().find_map(|(k, s)| {
            (bit >= s.var.offset && bit < s.var.offset + s.var.width)
                .then(|| (k, bit - s.var.offset))
        })
    }

    /// The input variable and bit within it for a flattened input bit.
    pub fn input_bit_owner(&self, bit: u32) -> Option<(usize, u32)> {
        self.inputs.iter().enumerate().find_map(|(k, v)| {
            (bit >= v.offset && bit < v.offset + v.width).then(|| (k, bit - v.offset))
        })
    }

    fn eval_concrete_nodes(&self, order: &[NodeId], state: u64, input: u64, values: &mut [u64]) {
        for &id in order {
            let node = &self.nodes[id.index()];
            let arg = |k: usize| values[node.args[k].index()];
            let m = mask(node.width);
            let v = match node.op {
                Op::Const(c) => c,
                Op::State(k) => {
                    let d = &self.states[k].var;
                    (state >> d.offset) & mask(d.width)
                }
                Op::Input(k) => {
                    let d = &self.inputs[k];
                    (input >> d.offset) & mask(d.width)
                }
                Op::Not => !arg(0) & m,
                Op::And => arg(0) & arg(1),
                Op::Or => arg(0) | arg(1),
                Op::Xor => arg(0) ^ arg(1),
                Op::Add => arg(0).wrapping_add(arg(1)) & m,
                Op::Sub => arg(0).wrapping_sub(arg(1)) & m,
                Op::Eq => u64::from(arg(0) == arg(1)),
                Op::Ne => u64::from(arg(0) != arg(1)),
                Op::Ult => u64::from(arg(0) < arg(1)),
                Op::Ule => u64::from(arg(0) <= arg(1)),
                Op::Shl(k) => (arg(0) << k) & m,
                Op::Lshr(k) => arg(0) >> k,
                Op::Slice { lo, .. } => (arg(0) >> lo) & m,
                Op::Concat => {
                    let low_width = self.nodes[node.args[1].index()].width;
                    (arg(0) << low_width) | arg(1)
                }
                Op::Zext => arg(0),
                Op::Ite => {
                    if arg(0) == 1 {
                        arg(1)
                    } else {
                        arg(2)
                    }
                }
            };
            values[id.index()] = v;
        }
    }

    fn check_state_width(&self, s: u32) {
        assert_eq!(s, self.state_width, "state width mismatch");
    }

    fn check_input_width(&self, i: u32) {
        assert_eq!(i, self.input_width, "input width mismatch");
    }

    /// Concrete successor of `state` under `input`.
    pub fn concrete_next(&self, state: CBitVec, input: CBitVec) -> CBitVec {
        self.check_state_width(state.width());
        self.check_input_width(input.width());
        let mut values = vec![0u64; self.nodes.len()];
        self.eval_concrete_nodes(&self.step_order, state.value(), input.value(), &mut values);
        let next = self.states.iter().zip(&self.next).fold(0u64, |acc, (s, id)| {
            acc | (values[id.index()] << s.var.offset)
        });
        CBitVec::new(self.state_width, next).expect("next fits by construction")
    }

    /// Concrete label values of `state`, in label declaration order.
    pub fn concrete_labels(&self, state: CBitVec) -> Vec<bool> {
        self.check_state_width(state.width());
        let mut values = vec![0u64; self.nodes.len()];
        self.eval_concrete_nodes(&self.label_order, state.value(), 0, &mut values);
        self.labels
            .iter()
            .map(|(_, id)| values[id.index()] == 1)
            .collect()
    }

    /// Concrete step: successor and the labels of `state`.
    pub fn concrete_step(&self, state: CBitVec, input: CBitVec) -> (CBitVec, Vec<bool>) {
        (self.concrete_next(state, input), self.concrete_labels(state))
    }

    pub(crate) fn eval_abstract_nodes(
        &self,
        order: &[NodeId],
        state: &TBitVec,
        input: Option<&TBitVec>,
        values: &mut [TBitVec],
    ) {
        // widths are checked at construction, so the transformers cannot fail
        for &id in order {
            let node = &self.nodes[id.index()];
            let arg = |k: usize| &values[node.args[k].index()];
            let bit = |t: TBit| TBitVec::from_bits(&[t]).expect("width 1");
            let v = match node.op {
                Op::Const(c) => TBitVec::concrete(node.width, c).expect("const fits"),
                Op::State(k) => {
                    let d = &self.states[k].var;
                    state.slice(d.offset, d.offset + d.width - 1).expect("in range")
                }
                Op::Input(k) => {
                    let d = &self.inputs[k];
                    input
                        .expect("step expressions need an input")
                        .slice(d.offset, d.offset + d.width - 1)
                        .expect("in range")
                }
                Op::Not => arg(0).not(),
                Op::And => arg(0).and(arg(1)).expect("typed"),
                Op::Or => arg(0).or(arg(1)).expect("typed"),
                Op::Xor => arg(0).xor(arg(1)).expect("typed"),
                Op::Add => arg(0).add(arg(1)).expect("typed"),
                Op::Sub => arg(0).sub(arg(1)).expect("typed"),
                Op::Eq => bit(arg(0).eq(arg(1)).expect("typed")),
                Op::Ne => bit(arg(0).ne(arg(1)).expect("typed")),
                Op::Ult => bit(arg(0).ult(arg(1)).expect("typed")),
                Op::Ule => bit(arg(0).ule(arg(1)).expect("typed")),
                Op::Shl(k) => arg(0).shl(k).expect("typed"),
                Op::Lshr(k) => arg(0).lshr(k).expect("typed"),
                Op::Slice { lo, hi } => arg(0).slice(lo, hi).expect("typed"),
                Op::Concat => arg(0).concat(arg(1)).expect("typed"),
                Op::Zext => arg(0).zext(node.width).expect("typed"),
                Op::Ite => TBitVec::ite(arg(0).bit(0), arg(1), arg(2)).expect("typed"),
            };
            values[id.index()] = v;
        }
    }

    fn scratch(&self) -> Vec<TBitVec> {
        let filler = TBitVec::top(1).expect("width 1");
        vec![filler; self.nodes.len()]
    }

    /// Three-valued successor f̂basic(ŝ, î).
    pub fn abstract_next(&self, state: &TBitVec, input: &TBitVec) -> TBitVec {
        self.check_state_width(state.width());
        self.check_input_width(input.width());
        let mut values = self.scratch();
        self.eval_abstract_nodes(&self.step_order, state, Some(input), &mut values);
        self.assemble_next(&values)
    }

    fn assemble_next(&self, values: &[TBitVec]) -> TBitVec {
        let (mut value, mut unknown) = (0u64, 0u64);
        for (s, id) in self.states.iter().zip(&self.next) {
            let v = &values[id.index()];
            value |= v.value_mask() << s.var.offset;
            unknown |= v.unknown_mask() << s.var.offset;
        }
        TBitVec::from_masks(self.state_width, value, unknown).expect("fits by construction")
    }

    /// Three-valued labels of `state`; `None` is ⊥.
    pub fn abstract_labels(&self, state: &TBitVec) -> Vec<LabelValue> {
        self.check_state_width(state.width());
        let mut values = self.scratch();
        self.eval_abstract_nodes(&self.label_order, state, None, &mut values);
        self.labels
            .iter()
            .map(|(_, id)| values[id.index()].bit(0).to_bool())
            .collect()
    }

    /// Three-valued step: f̂basic(ŝ, î) and the labels of ŝ.
    pub fn abstract_eval(&self, state: &TBitVec, input: &TBitVec) -> (TBitVec, Vec<LabelValue>) {
        (self.abstract_next(state, input), self.abstract_labels(state))
    }

    /// f̂basic(ŝ, î) using reusable buffers; concrete arguments take the
    /// word-level path.
    pub fn step_with(&self, state: &TBitVec, input: &TBitVec, scratch: &mut EvalScratch) -> TBitVec {
        if let (Some(s), Some(i)) = (state.as_concrete(), input.as_concrete()) {
            scratch.concrete.resize(self.nodes.len(), 0);
            self.eval_concrete_nodes(&self.step_order, s.value(), i.value(), &mut scratch.concrete);
            let next = self.states.iter().zip(&self.next).fold(0u64, |acc, (s, id)| {
                acc | (scratch.concrete[id.index()] << s.var.offset)
            });
            return TBitVec::concrete(self.state_width, next).expect("fits by construction");
        }
        if scratch.abstract_values.len() != self.nodes.len() {
            scratch.abstract_values = self.scratch();
        }
        self.eval_abstract_nodes(&self.step_order, state, Some(input), &mut scratch.abstract_values);
        self.assemble_next(&scratch.abstract_values)
    }

    pub fn into_shared(self) -> Arc<SystemIR> {
        Arc::new(self)
    }
}

impl fmt::Display for SystemIR {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "system {} (w={}, y={}, {} labels)",
            self.name,
            self.state_width,
            self.input_width,
            self.labels.len()
        )
    }
}

/// Evaluation buffers for [`SystemIR::step_with`].
#[derive(Debug, Default)]
pub struct EvalScratch {
    concrete: Vec<u64>,
    abstract_values: Vec<TBitVec>,
}

/// Incremental construction of a [`SystemIR`] with eager width checking.
#[derive(Debug, Default)]
pub struct IrBuilder {
    name: String,
    inputs: Vec<VarDecl>,
    states: Vec<StateDecl>,
    nodes: Vec<Node>,
    next: HashMap<usize, NodeId>,
    labels: Vec<(String, NodeId)>,
    names: HashMap<String, VarRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRef {
    State(usize),
    Input(usize),
}

impl IrBuilder {
    pub fn new(name: &str) -> Self {
        IrBuilder {
            name: name.to_string(),
            ..Default::default()
        }
    }

    fn push(&mut self, op: Op, args: Vec<NodeId>, width: u32) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node { op, args, width });
        id
    }

    pub fn width(&self, id: NodeId) -> u32 {
        self.nodes[id.index()].width
    }

    pub fn lookup(&self, name: &str) -> Option<VarRef> {
        self.names.get(name).copied()
    }

    pub fn var_width(&self, var: VarRef) -> u32 {
        match var {
            VarRef::State(k) => self.states[k].var.width,
            VarRef::Input(k) => self.inputs[k].width,
        }
    }

    fn check_new_name(&self, name: &str, width: u32) -> Result<(), IrError> {
        if self.names.contains_key(name) {
            return Err(IrError::Duplicate(name.to_string()));
        }
        if width == 0 || width > MAX_WIDTH {
            return Err(BitVecError::InvalidWidth(width).into());
        }
        Ok(())
    }

    pub fn input(&mut self, name: &str, width: u32) -> Result<VarRef, IrError> {
        self.check_new_name(name, width)?;
        let offset = self.inputs.iter().map(|d| d.width).sum();
        self.inputs.push(VarDecl {
            name: name.to_string(),
            width,
            offset,
        });
        let var = VarRef::Input(self.inputs.len() - 1);
        self.names.insert(name.to_string(), var);
        Ok(var)
    }

    pub fn state(&mut self, name: &str, width: u32, init: u64) -> Result<VarRef, IrError> {
        self.check_new_name(name, width)?;
        CBitVec::new(width, init)?;
        let offset = self.states.iter().map(|d| d.var.width).sum();
        self.states.push(StateDecl {
            var: VarDecl {
                name: name.to_string(),
                width,
                offset,
            },
            init,
        });
        let var = VarRef::State(self.states.len() - 1);
        self.names.insert(name.to_string(), var);
        Ok(var)
    }

    pub fn var(&mut self, var: VarRef) -> NodeId {
        let width = self.var_width(var);
        match var {
            VarRef::State(k) => self.push(Op::State(k), vec![], width),
            VarRef::Input(k) => self.push(Op::Input(k), vec![], width),
        }
    }

    pub fn var_named(&mut self, name: &str) -> Result<NodeId, IrError> {
        let var = self
            .lookup(name)
            .ok_or_else(|| IrError::Undeclared(name.to_string()))?;
        Ok(self.var(var))
    }

    pub fn constant(&mut self, width: u32, value: u64) -> Result<NodeId, IrError> {
        CBitVec::new(width, value)?;
        Ok(self.push(Op::Const(value), vec![], width))
    }

    fn same(&self, a: NodeId, b: NodeId) -> Result<u32, IrError> {
        let (wa, wb) = (self.width(a), self.width(b));
        if wa != wb {
            Err(IrError::WidthMismatch {
                expected: wa,
                found: wb,
            })
        } else {
            Ok(wa)
        }
    }

    pub fn not(&mut self, a: NodeId) -> NodeId {
        let w = self.width(a);
        self.push(Op::Not, vec![a], w)
    }

    /// Any same-width binary operator (`And`..`Sub`) or comparison.
    pub fn binary(&mut self, op: Op, a: NodeId, b: NodeId) -> Result<NodeId, IrError> {
        let w = self.same(a, b)?;
        let width = match op {
            Op::And | Op::Or | Op::Xor | Op::Add | Op::Sub => w,
            Op::Eq | Op::Ne | Op::Ult | Op::Ule => 1,
            other => return Err(IrError::Invalid(format!("{other:?} is not binary"))),
        };
        Ok(self.push(op, vec![a, b], width))
    }

    pub fn shl(&mut self, a: NodeId, amount: u32) -> Result<NodeId, IrError> {
        let w = self.width(a);
        if amount >= w {
            return Err(BitVecError::IndexOutOfRange { index: amount, width: w }.into());
        }
        Ok(self.push(Op::Shl(amount), vec![a], w))
    }

    pub fn lshr(&mut self, a: NodeId, amount: u32) -> Result<NodeId, IrError> {
        let w = self.width(a);
        if amount >= w {
            return Err(BitVecError::IndexOutOfRange { index: amount, width: w }.into());
        }
        Ok(self.push(Op::Lshr(amount), vec![a], w))
    }

    pub fn slice(&mut self, a: NodeId, lo: u32, hi: u32) -> Result<NodeId, IrError> {
        let w = self.width(a);
        if hi >= w || lo > hi {
            return Err(BitVecError::IndexOutOfRange { index: hi, width: w }.into());
        }
        Ok(self.push(Op::Slice { lo, hi }, vec![a], hi - lo + 1))
    }

    pub fn concat(&mut self, high: NodeId, low: NodeId) -> Result<NodeId, IrError> {
        let w = self.width(high) + self.width(low);
        if w > MAX_WIDTH {
            return Err(BitVecError::InvalidWidth(w).into());
        }
        Ok(self.push(Op::Concat, vec![high, low], w))
    }

    pub fn zext(&mut self, a: NodeId, width: u32) -> Result<NodeId, IrError> {
        if width < self.width(a) || width > MAX_WIDTH {
            return Err(BitVecError::InvalidWidth(width).into());
        }
        Ok(self.push(Op::Zext, vec![a], width))
    }

    pub fn ite(&mut self, cond: NodeId, then: NodeId, otherwise: NodeId) -> Result<NodeId, IrError> {
        if self.width(cond) != 1 {
            return Err(IrError::WidthMismatch {
                expected: 1,
                found: self.width(cond),
            });
        }
        let w = self.same(then, otherwise)?;
        Ok(self.push(Op::Ite, vec![cond, then, otherwise], w))
    }

    pub fn set_next(&mut self, state: &str, expr: NodeId) -> Result<(), IrError> {
        let k = match self.lookup(state) {
            Some(VarRef::State(k)) => k,
            Some(VarRef::Input(_)) => {
                return Err(IrError::Invalid(format!("'{state}' is an input, not a state")))
            }
            None => return Err(IrError::Undeclared(state.to_string())),
        };
        let expected = self.states[k].var.width;
        if self.width(expr) != expected {
            return Err(IrError::WidthMismatch {
                expected,
                found: self.width(expr),
            });
        }
        if self.next.insert(k, expr).is_some() {
            return Err(IrError::Duplicate(format!("next {state}")));
        }
        Ok(())
    }

    pub fn add_label(&mut self, name: &str, expr: NodeId) -> Result<(), IrError> {
        if self.labels.iter().any(|(n, _)| n == name) {
            return Err(IrError::Duplicate(name.to_string()));
        }
        if self.width(expr) != 1 {
            return Err(IrError::WidthMismatch {
                expected: 1,
                found: self.width(expr),
            });
        }
        if self.reads_input(expr) {
            return Err(IrError::LabelReadsInput(name.to_string()));
        }
        self.labels.push((name.to_string(), expr));
        Ok(())
    }

    fn cone(&self, roots: impl IntoIterator<Item = NodeId>) -> Vec<NodeId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<NodeId> = roots.into_iter().collect();
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id.index()], true) {
                continue;
            }
            stack.extend(self.nodes[id.index()].args.iter().copied());
        }
        // arguments always precede their users, so index order is topological
        (0..self.nodes.len() as u32)
            .map(NodeId)
            .filter(|id| seen[id.index()])
            .collect()
    }

    fn reads_input(&self, expr: NodeId) -> bool {
        self.cone([expr])
            .iter()
            .any(|id| matches!(self.nodes[id.index()].op, Op::Input(_)))
    }

    pub fn build(self) -> Result<SystemIR, IrError> {
        if self.states.is_empty() {
            return Err(IrError::Invalid("at least one state variable is required".into()));
        }
        if self.inputs.is_empty() {
            return Err(IrError::Invalid("at least one input variable is required".into()));
        }
        let state_width: u32 = self.states.iter().map(|s| s.var.width).sum();
        let input_width: u32 = self.inputs.iter().map(|s| s.width).sum();
        if state_width > MAX_WIDTH {
            return Err(BitVecError::InvalidWidth(state_width).into());
        }
        if input_width > MAX_WIDTH {
            return Err(BitVecError::InvalidWidth(input_width).into());
        }
        let mut next = Vec::with_capacity(self.states.len());
        for (k, s) in self.states.iter().enumerate() {
            match self.next.get(&k) {
                Some(&id) => next.push(id),
                None => return Err(IrError::MissingNext(s.var.name.clone())),
            }
        }
        let step_order = self.cone(next.iter().copied());
        let label_order = self.cone(self.labels.iter().map(|(_, id)| *id));
        Ok(SystemIR {
            name: self.name,
            inputs: self.inputs,
            states: self.states,
            nodes: self.nodes,
            next,
            labels: self.labels,
            state_width,
            input_width,
            step_order,
            label_order,
        })
    }
}
