//! Abstract generating automaton: precision maps, qualified inputs and the
//! decayed step function.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::bitvec3::{TBitVec, MAX_WIDTH};
use crate::sysir::{EvalScratch, LabelValue, SystemIR};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrecisionError {
    #[error("state width {found} does not match expected width {expected}")]
    WidthMismatch { expected: u32, found: u32 },
    #[error("bit {bit} out of range for width {width}")]
    BitOutOfRange { bit: u32, width: u32 },
    #[error("precision bit {bit} at {state} was cleared")]
    ClearedBit { state: TBitVec, bit: u32 },
}

pub(crate) fn width_mask(width: u32) -> u64 {
    if width >= MAX_WIDTH {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Renders the low `width` bits of `mask`, most significant first.
pub fn render_mask(mask: u64, width: u32) -> String {
    (0..width)
        .rev()
        .map(|k| if mask >> k & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Per-state precision masks over a default.
///
/// A set bit means "precise": a split input bit for input precision, a
/// non-decayed result bit for step precision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecisionMap {
    state_width: u32,
    width: u32,
    default_mask: u64,
    overrides: BTreeMap<TBitVec, u64>,
}

impl PrecisionMap {
    /// Masks of `width` bits keyed by states of `state_width` bits.
    pub fn new(state_width: u32, width: u32, default_full: bool) -> Self {
        PrecisionMap {
            state_width,
            width,
            default_mask: if default_full { width_mask(width) } else { 0 },
            overrides: BTreeMap::new(),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn default_mask(&self) -> u64 {
        self.default_mask
    }

    pub fn overrides(&self) -> impl Iterator<Item = (&TBitVec, u64)> {
        self.overrides.iter().map(|(s, m)| (s, *m))
    }

    /// Precision set directly at `state` (p̂).
    pub fn raw_mask(&self, state: &TBitVec) -> u64 {
        self.default_mask | self.overrides.get(state).copied().unwrap_or(0)
    }

    /// Precision of `state` closed over every override state covering it.
    ///
    /// A state inherits the precision of coarser states, so a state that
    /// covers another is never more precise than it.
    pub fn monotone_mask(&self, state: &TBitVec) -> u64 {
        if self.default_mask == width_mask(self.width) {
            return self.default_mask;
        }
        self.overrides
            .iter()
            .filter(|(s, _)| s.covers_unchecked(state))
            .fold(self.default_mask, |acc, (_, m)| acc | m)
    }

    /// Sets `bit` at `state`; returns whether the raw mask changed.
    pub fn raise(&mut self, state: &TBitVec, bit: u32) -> Result<bool, PrecisionError> {
        if state.width() != self.state_width {
            return Err(PrecisionError::WidthMismatch {
                expected: self.state_width,
                found: state.width(),
            });
        }
        if bit >= self.width {
            return Err(PrecisionError::BitOutOfRange {
                bit,
                width: self.width,
            });
        }
        if self.raw_mask(state) >> bit & 1 == 1 {
            return Ok(false);
        }
        *self.overrides.entry(*state).or_insert(0) |= 1 << bit;
        Ok(true)
    }

    /// Fails if any bit set in `pred` is clear here.
    pub fn check_extends(&self, pred: &PrecisionMap) -> Result<(), PrecisionError> {
        let cleared = pred.default_mask & !self.default_mask;
        if cleared != 0 {
            return Err(PrecisionError::ClearedBit {
                state: TBitVec::top(self.state_width).expect("valid width"),
                bit: cleared.trailing_zeros(),
            });
        }
        for (state, mask) in &pred.overrides {
            let cleared = mask & !self.raw_mask(state);
            if cleared != 0 {
                return Err(PrecisionError::ClearedBit {
                    state: *state,
                    bit: cleared.trailing_zeros(),
                });
            }
        }
        Ok(())
    }
}

/// Initial precision presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Full input and step precision from the start.
    Naive,
    /// Unsplit inputs, full step precision.
    Input,
    /// Unsplit inputs and fully decayed steps.
    Decay,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Naive, Strategy::Input, Strategy::Decay];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::Input => "input",
            Strategy::Decay => "decay",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Strategy::Naive),
            "input" => Ok(Strategy::Input),
            "decay" => Ok(Strategy::Decay),
            other => Err(format!("unknown strategy '{other}' (expected naive, input or decay)")),
        }
    }
}

/// Deliberate defects used to check that the audits can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Decay by the raw step precision instead of its monotone closure.
    DropDecayClosure,
    /// Omit the last qualified input whenever inputs are split.
    MissingSplitInput,
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "drop-decay-closure" => Ok(Fault::DropDecayClosure),
            "missing-split-input" => Ok(Fault::MissingSplitInput),
            other => Err(format!("unknown fault '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrecisionEntry {
    pub state: String,
    pub pq: String,
    pub pf: String,
}

/// The abstract generating automaton for one verification run.
#[derive(Debug, Clone)]
pub struct AbstractGA {
    ir: Arc<SystemIR>,
    pq: PrecisionMap,
    pf: PrecisionMap,
    fault: Fault,
}

impl AbstractGA {
    pub fn new(ir: Arc<SystemIR>, strategy: Strategy) -> Self {
        let (split, full_step) = match strategy {
            Strategy::Naive => (true, true),
            Strategy::Input => (false, true),
            Strategy::Decay => (false, false),
        };
        AbstractGA {
            pq: PrecisionMap::new(ir.state_width(), ir.input_width(), split),
            pf: PrecisionMap::new(ir.state_width(), ir.state_width(), full_step),
            ir,
            fault: Fault::None,
        }
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = fault;
        self
    }

    pub fn fault(&self) -> Fault {
        self.fault
    }

    pub fn ir(&self) -> &Arc<SystemIR> {
        &self.ir
    }

    pub fn pq(&self) -> &PrecisionMap {
        &self.pq
    }

    pub fn pf(&self) -> &PrecisionMap {
        &self.pf
    }

    pub fn pq_mut(&mut self) -> &mut PrecisionMap {
        &mut self.pq
    }

    pub fn pf_mut(&mut self) -> &mut PrecisionMap {
        &mut self.pf
    }

    pub fn initial_state(&self) -> TBitVec {
        self.ir.init_state().into()
    }

    /// m̂_q(ŝ).
    pub fn input_mask(&self, state: &TBitVec) -> u64 {
        self.pq.monotone_mask(state)
    }

    /// m̂_f(ŝ), or p̂_f(ŝ) under [`Fault::DropDecayClosure`].
    pub fn step_mask(&self, state: &TBitVec) -> u64 {
        match self.fault {
            Fault::DropDecayClosure => self.pf.raw_mask(state),
            _ => self.pf.monotone_mask(state),
        }
    }

    /// q̂(ŝ): split bits range over both values, the rest stay `X`.
    /// Ordered by the split bits read as a binary number.
    pub fn qualified_inputs(&self, state: &TBitVec) -> Vec<TBitVec> {
        let mut out = qualified_for_mask(self.ir.input_width(), self.input_mask(state));
        if self.fault == Fault::MissingSplitInput && out.len() > 1 {
            out.pop();
        }
        out
    }

    /// f̂(ŝ, î): f̂basic with imprecise result bits forced to `X`.
    pub fn abstract_step(&self, state: &TBitVec, input: &TBitVec) -> TBitVec {
        self.ir.abstract_next(state, input).decay(self.step_mask(state))
    }

    pub(crate) fn step_with_mask(
        &self,
        state: &TBitVec,
        input: &TBitVec,
        step_mask: u64,
        scratch: &mut EvalScratch,
    ) -> TBitVec {
        self.ir.step_with(state, input, scratch).decay(step_mask)
    }

    pub fn labels(&self, state: &TBitVec) -> Vec<LabelValue> {
        self.ir.abstract_labels(state)
    }

    /// Override entries in a diagnostic form, one per state with any
    /// non-default precision.
    pub fn precision_entries(&self) -> Vec<PrecisionEntry> {
        let mut states: Vec<TBitVec> = self
            .pq
            .overrides()
            .chain(self.pf.overrides())
            .map(|(s, _)| *s)
            .collect();
        states.sort();
        states.dedup();
        states
            .iter()
            .map(|s| PrecisionEntry {
                state: s.to_string(),
                pq: render_mask(self.pq.raw_mask(s), self.pq.width()),
                pf: render_mask(self.pf.raw_mask(s), self.pf.width()),
            })
            .collect()
    }
}

/// All vectors with `X` outside `mask` and every combination inside it.
pub fn qualified_for_mask(width: u32, mask: u64) -> Vec<TBitVec> {
    let unknown = width_mask(width) & !mask;
    let positions: Vec<u32> = (0..width).filter(|k| mask >> k & 1 == 1).collect();
    let count = 1u64
        .checked_shl(positions.len() as u32)
        .filter(|_| positions.len() < 40)
        .expect("too many split input bits to enumerate");
    (0..count)
        .map(|n| {
            let value = positions
                .iter()
                .enumerate()
                .fold(0u64, |acc, (j, &p)| acc | ((n >> j & 1) << p));
            TBitVec::from_masks(width, value, unknown).expect("valid width")
        })
        .collect()
}
