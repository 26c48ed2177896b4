//! Three-valued bits and bit-vectors.
//!
//! A [`TBitVec`] stores up to 64 bits, each of which is `0`, `1` or `X`
//! (unknown). Bit 0 is the least significant bit; the textual form is
//! most-significant-first, e.g. `0X1`.
//!
//! All transformers here are sound (every concrete result is covered),
//! monotone in the covering order and exact when every argument is concrete.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Largest supported vector width.
pub const MAX_WIDTH: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitVecError {
    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: u32, right: u32 },
    #[error("invalid width {0} (must be 1..={MAX_WIDTH})")]
    InvalidWidth(u32),
    #[error("value {value} does not fit in {width} bits")]
    ValueTooWide { value: u64, width: u32 },
    #[error("index {index} out of range for width {width}")]
    IndexOutOfRange { index: u32, width: u32 },
    #[error("cannot parse three-valued bit-vector from {0:?}")]
    Parse(String),
}

/// A single three-valued bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TBit {
    Zero,
    One,
    Unknown,
}

impl TBit {
    pub fn from_bool(b: bool) -> Self {
        if b {
            TBit::One
        } else {
            TBit::Zero
        }
    }

    /// `None` for [`TBit::Unknown`].
    pub fn to_bool(self) -> Option<bool> {
        match self {
            TBit::Zero => Some(false),
            TBit::One => Some(true),
            TBit::Unknown => None,
        }
    }

    pub fn is_known(self) -> bool {
        self != TBit::Unknown
    }

    /// Whether `self` covers `other`, i.e. γ(other) ⊆ γ(self).
    pub fn covers(self, other: TBit) -> bool {
        self == TBit::Unknown || self == other
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> TBit {
        match self {
            TBit::Zero => TBit::One,
            TBit::One => TBit::Zero,
            TBit::Unknown => TBit::Unknown,
        }
    }

    pub fn and(self, other: TBit) -> TBit {
        match (self, other) {
            (TBit::Zero, _) | (_, TBit::Zero) => TBit::Zero,
            (TBit::One, TBit::One) => TBit::One,
            _ => TBit::Unknown,
        }
    }

    pub fn or(self, other: TBit) -> TBit {
        match (self, other) {
            (TBit::One, _) | (_, TBit::One) => TBit::One,
            (TBit::Zero, TBit::Zero) => TBit::Zero,
            _ => TBit::Unknown,
        }
    }

    pub fn xor(self, other: TBit) -> TBit {
        match (self.to_bool(), other.to_bool()) {
            (Some(a), Some(b)) => TBit::from_bool(a ^ b),
            _ => TBit::Unknown,
        }
    }

    pub fn join(self, other: TBit) -> TBit {
        if self == other {
            self
        } else {
            TBit::Unknown
        }
    }

    pub fn to_char(self) -> char {
        match self {
            TBit::Zero => '0',
            TBit::One => '1',
            TBit::Unknown => 'X',
        }
    }
}

impl fmt::Display for TBit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn check_width(width: u32) -> Result<(), BitVecError> {
    if width == 0 || width > MAX_WIDTH {
        Err(BitVecError::InvalidWidth(width))
    } else {
        Ok(())
    }
}

/// A concrete bit-vector of a fixed width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CBitVec {
    width: u32,
    value: u64,
}

impl CBitVec {
    pub fn new(width: u32, value: u64) -> Result<Self, BitVecError> {
        check_width(width)?;
        if value & !width_mask(width) != 0 {
            return Err(BitVecError::ValueTooWide { value, width });
        }
        Ok(CBitVec { width, value })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn bit(&self, index: u32) -> bool {
        (self.value >> index) & 1 == 1
    }
}

impl fmt::Display for CBitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in (0..self.width).rev() {
            write!(f, "{}", if self.bit(k) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl From<CBitVec> for TBitVec {
    fn from(c: CBitVec) -> Self {
        TBitVec {
            width: c.width,
            value: c.value,
            unknown: 0,
        }
    }
}

/// A vector of three-valued bits.
///
/// Stored as a pair of masks: `unknown` marks the `X` bits and `value`
/// holds the known bits (always zero where `unknown` is set).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TBitVec {
    width: u32,
    value: u64,
    unknown: u64,
}

impl TBitVec {
    /// Builds a vector from raw masks; known bits are taken from `value`
    /// wherever `unknown` is clear.
    pub fn from_masks(width: u32, value: u64, unknown: u64) -> Result<Self, BitVecError> {
        check_width(width)?;
        let mask = width_mask(width);
        if (value | unknown) & !mask != 0 {
            return Err(BitVecError::ValueTooWide {
                value: value | unknown,
                width,
            });
        }
        Ok(TBitVec {
            width,
            value: value & !unknown,
            unknown,
        })
    }

    pub fn concrete(width: u32, value: u64) -> Result<Self, BitVecError> {
        Ok(CBitVec::new(width, value)?.into())
    }

    /// All bits unknown.
    pub fn top(width: u32) -> Result<Self, BitVecError> {
        check_width(width)?;
        Ok(TBitVec {
            width,
            value: 0,
            unknown: width_mask(width),
        })
    }

    /// Bits given least significant first.
    pub fn from_bits(bits: &[TBit]) -> Result<Self, BitVecError> {
        let width = bits.len() as u32;
        check_width(width)?;
        let mut value = 0;
        let mut unknown = 0;
        for (k, b) in bits.iter().enumerate() {
            match b {
                TBit::Zero => {}
                TBit::One => value |= 1 << k,
                TBit::Unknown => unknown |= 1 << k,
            }
        }
        Ok(TBitVec {
            width,
            value,
            unknown,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Known-one bits.
    pub fn value_mask(&self) -> u64 {
        self.value
    }

    pub fn unknown_mask(&self) -> u64 {
        self.unknown
    }

    pub fn bit(&self, index: u32) -> TBit {
        debug_assert!(index < self.width);
        if (self.unknown >> index) & 1 == 1 {
            TBit::Unknown
        } else {
            TBit::from_bool((self.value >> index) & 1 == 1)
        }
    }

    pub fn with_bit(&self, index: u32, bit: TBit) -> Result<Self, BitVecError> {
        if index >= self.width {
            return Err(BitVecError::IndexOutOfRange {
                index,
                width: self.width,
            });
        }
        let m = 1u64 << index;
        let (mut value, mut unknown) = (self.value & !m, self.unknown & !m);
        match bit {
            TBit::Zero => {}
            TBit::One => value |= m,
            TBit::Unknown => unknown |= m,
        }
        Ok(TBitVec {
            width: self.width,
            value,
            unknown,
        })
    }

    pub fn bits(&self) -> impl Iterator<Item = TBit> + '_ {
        (0..self.width).map(move |k| self.bit(k))
    }

    pub fn is_concrete(&self) -> bool {
        self.unknown == 0
    }

    /// The concrete value if there are no unknown bits.
    pub fn as_concrete(&self) -> Option<CBitVec> {
        self.is_concrete().then_some(CBitVec {
            width: self.width,
            value: self.value,
        })
    }

    pub fn unknown_count(&self) -> u32 {
        self.unknown.count_ones()
    }

    fn same_width(&self, other: &TBitVec) -> Result<(), BitVecError> {
        if self.width != other.width {
            Err(BitVecError::WidthMismatch {
                left: self.width,
                right: other.width,
            })
        } else {
            Ok(())
        }
    }

    /// Mask of bits that may be one.
    fn may_one(&self) -> u64 {
        self.value | self.unknown
    }

    /// Mask of bits that may be zero.
    fn may_zero(&self) -> u64 {
        !self.value & width_mask(self.width)
    }

    fn from_may(width: u32, may_zero: u64, may_one: u64) -> TBitVec {
        let mask = width_mask(width);
        let unknown = may_zero & may_one & mask;
        TBitVec {
            width,
            value: may_one & !unknown & mask,
            unknown,
        }
    }

    /// `self` covers `other` iff γ(other) ⊆ γ(self).
    pub fn covers(&self, other: &TBitVec) -> Result<bool, BitVecError> {
        self.same_width(other)?;
        Ok(self.covers_unchecked(other))
    }

    pub(crate) fn covers_unchecked(&self, other: &TBitVec) -> bool {
        other.unknown & !self.unknown == 0 && (self.value ^ other.value) & !self.unknown == 0
    }

    pub fn gamma_contains(&self, c: CBitVec) -> Result<bool, BitVecError> {
        if self.width != c.width {
            return Err(BitVecError::WidthMismatch {
                left: self.width,
                right: c.width,
            });
        }
        Ok((self.value ^ c.value) & !self.unknown == 0)
    }

    /// Enumerates γ(self) in ascending numeric order.
    pub fn concretizations(&self) -> impl Iterator<Item = CBitVec> + '_ {
        let positions: Vec<u32> = (0..self.width)
            .filter(|k| (self.unknown >> k) & 1 == 1)
            .collect();
        let count = 1u64 << positions.len();
        (0..count).map(move |combo| {
            let mut value = self.value;
            for (j, &pos) in positions.iter().enumerate() {
                if (combo >> j) & 1 == 1 {
                    value |= 1 << pos;
                }
            }
            CBitVec {
                width: self.width,
                value,
            }
        })
    }

    /// Smallest and largest unsigned value in γ(self).
    pub fn bounds(&self) -> (u64, u64) {
        (self.value, self.value | self.unknown)
    }

    pub fn not(&self) -> TBitVec {
        TBitVec {
            width: self.width,
            value: !(self.value | self.unknown) & width_mask(self.width),
            unknown: self.unknown,
        }
    }

    pub fn and(&self, other: &TBitVec) -> Result<TBitVec, BitVecError> {
        self.same_width(other)?;
        Ok(Self::from_may(
            self.width,
            self.may_zero() | other.may_zero(),
            self.may_one() & other.may_one(),
        ))
    }

    pub fn or(&self, other: &TBitVec) -> Result<TBitVec, BitVecError> {
        self.same_width(other)?;
        Ok(Self::from_may(
            self.width,
            self.may_zero() & other.may_zero(),
            self.may_one() | other.may_one(),
        ))
    }

    pub fn xor(&self, other: &TBitVec) -> Result<TBitVec, BitVecError> {
        self.same_width(other)?;
        let unknown = self.unknown | other.unknown;
        Ok(TBitVec {
            width: self.width,
            value: (self.value ^ other.value) & !unknown,
            unknown,
        })
    }

    /// Ripple-carry addition modulo 2^width with a Kleene full adder.
    pub fn add(&self, other: &TBitVec) -> Result<TBitVec, BitVecError> {
        self.same_width(other)?;
        Ok(self.ripple(other, TBit::Zero))
    }

    /// `self - other` computed as `self + !other + 1`.
    pub fn sub(&self, other: &TBitVec) -> Result<TBitVec, BitVecError> {
        self.same_width(other)?;
        Ok(self.ripple(&other.not(), TBit::One))
    }

    fn ripple(&self, other: &TBitVec, carry_in: TBit) -> TBitVec {
        if self.is_concrete() && other.is_concrete() {
            let sum = self
                .value
                .wrapping_add(other.value)
                .wrapping_add(u64::from(carry_in == TBit::One));
            return TBitVec {
                width: self.width,
                value: sum & width_mask(self.width),
                unknown: 0,
            };
        }
        let mut carry = carry_in;
        let mut value = 0;
        let mut unknown = 0;
        for k in 0..self.width {
            let a = self.bit(k);
            let b = other.bit(k);
            match a.xor(b).xor(carry) {
                TBit::Zero => {}
                TBit::One => value |= 1 << k,
                TBit::Unknown => unknown |= 1 << k,
            }
            // majority written so that two agreeing known inputs decide it
            carry = a.and(b).or(a.and(carry)).or(b.and(carry));
        }
        TBitVec {
            width: self.width,
            value,
            unknown,
        }
    }

    pub fn eq(&self, other: &TBitVec) -> Result<TBit, BitVecError> {
        self.same_width(other)?;
        let known_both = !self.unknown & !other.unknown & width_mask(self.width);
        if (self.value ^ other.value) & known_both != 0 {
            Ok(TBit::Zero)
        } else if self.unknown | other.unknown == 0 {
            Ok(TBit::One)
        } else {
            Ok(TBit::Unknown)
        }
    }

    pub fn ne(&self, other: &TBitVec) -> Result<TBit, BitVecError> {
        Ok(self.eq(other)?.not())
    }

    /// Unsigned less-than.
    pub fn ult(&self, other: &TBitVec) -> Result<TBit, BitVecError> {
        self.same_width(other)?;
        let (amin, amax) = self.bounds();
        let (bmin, bmax) = other.bounds();
        Ok(if amax < bmin {
            TBit::One
        } else if amin >= bmax {
            TBit::Zero
        } else {
            TBit::Unknown
        })
    }

    /// Unsigned less-or-equal.
    pub fn ule(&self, other: &TBitVec) -> Result<TBit, BitVecError> {
        self.same_width(other)?;
        let (amin, amax) = self.bounds();
        let (bmin, bmax) = other.bounds();
        Ok(if amax <= bmin {
            TBit::One
        } else if amin > bmax {
            TBit::Zero
        } else {
            TBit::Unknown
        })
    }

    /// Logical shift left by a constant; zeros are shifted in.
    pub fn shl(&self, amount: u32) -> Result<TBitVec, BitVecError> {
        if amount >= self.width {
            return Err(BitVecError::IndexOutOfRange {
                index: amount,
                width: self.width,
            });
        }
        let mask = width_mask(self.width);
        Ok(TBitVec {
            width: self.width,
            value: (self.value << amount) & mask,
            unknown: (self.unknown << amount) & mask,
        })
    }

    /// Logical shift right by a constant; zeros are shifted in.
    pub fn lshr(&self, amount: u32) -> Result<TBitVec, BitVecError> {
        if amount >= self.width {
            return Err(BitVecError::IndexOutOfRange {
                index: amount,
                width: self.width,
            });
        }
        Ok(TBitVec {
            width: self.width,
            value: self.value >> amount,
            unknown: self.unknown >> amount,
        })
    }

    /// Bits `lo..=hi`.
    pub fn slice(&self, lo: u32, hi: u32) -> Result<TBitVec, BitVecError> {
        if hi >= self.width {
            return Err(BitVecError::IndexOutOfRange {
                index: hi,
                width: self.width,
            });
        }
        if lo > hi {
            return Err(BitVecError::IndexOutOfRange {
                index: lo,
                width: hi + 1,
            });
        }
        let width = hi - lo + 1;
        let mask = width_mask(width);
        Ok(TBitVec {
            width,
            value: (self.value >> lo) & mask,
            unknown: (self.unknown >> lo) & mask,
        })
    }

    /// `self` becomes the high part, `low` the low part.
    pub fn concat(&self, low: &TBitVec) -> Result<TBitVec, BitVecError> {
        let width = self.width + low.width;
        check_width(width)?;
        Ok(TBitVec {
            width,
            value: (self.value << low.width) | low.value,
            unknown: (self.unknown << low.width) | low.unknown,
        })
    }

    /// Zero-extension to `width` bits.
    pub fn zext(&self, width: u32) -> Result<TBitVec, BitVecError> {
        check_width(width)?;
        if width < self.width {
            return Err(BitVecError::InvalidWidth(width));
        }
        Ok(TBitVec {
            width,
            value: self.value,
            unknown: self.unknown,
        })
    }

    /// Least upper bound in the covering order.
    pub fn join(&self, other: &TBitVec) -> Result<TBitVec, BitVecError> {
        self.same_width(other)?;
        let unknown = self.unknown | other.unknown | (self.value ^ other.value);
        Ok(TBitVec {
            width: self.width,
            value: self.value & !unknown,
            unknown,
        })
    }

    /// Multiplexer; an unknown condition joins both branches.
    pub fn ite(cond: TBit, then: &TBitVec, otherwise: &TBitVec) -> Result<TBitVec, BitVecError> {
        then.same_width(otherwise)?;
        match cond {
            TBit::One => Ok(*then),
            TBit::Zero => Ok(*otherwise),
            TBit::Unknown => then.join(otherwise),
        }
    }

    /// Forces every bit whose mask bit is clear to `X`.
    pub fn decay(&self, keep: u64) -> TBitVec {
        let mask = width_mask(self.width);
        let unknown = (self.unknown | !keep) & mask;
        TBitVec {
            width: self.width,
            value: self.value & !unknown,
            unknown,
        }
    }
}

impl fmt::Display for TBitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in (0..self.width).rev() {
            write!(f, "{}", self.bit(k).to_char())?;
        }
        Ok(())
    }
}

impl FromStr for TBitVec {
    type Err = BitVecError;

    /// Accepts `0X1` or `"0X1"`; the first character is the most
    /// significant bit.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        let body = trimmed
            .strip_prefix('"')
            .and_then(|t| t.strip_suffix('"'))
            .unwrap_or(trimmed);
        let mut bits = Vec::with_capacity(body.len());
        for ch in body.chars().rev() {
            bits.push(match ch {
                '0' => TBit::Zero,
                '1' => TBit::One,
                'X' | 'x' => TBit::Unknown,
                _ => return Err(BitVecError::Parse(s.to_string())),
            });
        }
        if bits.is_empty() || bits.len() > MAX_WIDTH as usize {
            return Err(BitVecError::Parse(s.to_string()));
        }
        TBitVec::from_bits(&bits)
    }
}
