//! Fixed-width bit vectors, the operand type of every nOP.

use core::fmt;

/// Widest value any nOP may produce.
pub const MAX_WIDTH: u32 = 128;

/// A value tagged with an explicit bit width.
///
/// The stored value is always masked to `width` bits, so two vectors compare
/// equal only when both width and masked value agree.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVec {
    value: u128,
    width: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid bit width {0} (expected 1..=128)")]
pub struct InvalidWidth(pub u32);

#[inline]
pub fn mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

impl BitVec {
    pub fn new(value: u128, width: u32) -> Result<Self, InvalidWidth> {
        if width == 0 || width > MAX_WIDTH {
            return Err(InvalidWidth(width));
        }
        Ok(BitVec {
            value: value & mask(width),
            width: width as u8,
        })
    }

    /// Like [`BitVec::new`] for widths already known to be valid.
    ///
    /// Panics on an out-of-range width.
    #[track_caller]
    pub fn from_u128(value: u128, width: u32) -> Self {
        Self::new(value, width).expect("bit width out of range")
    }

    #[track_caller]
    pub fn from_u64(value: u64, width: u32) -> Self {
        Self::from_u128(value as u128, width)
    }

    /// Two's-complement encoding of `value` truncated to `width` bits.
    #[track_caller]
    pub fn from_i128(value: i128, width: u32) -> Self {
        Self::from_u128(value as u128, width)
    }

    pub fn zero(width: u32) -> Self {
        Self::from_u128(0, width)
    }

    pub fn bool(b: bool) -> Self {
        BitVec { value: b as u128, width: 1 }
    }

    #[inline]
    pub fn value(self) -> u128 {
        self.value
    }

    #[inline]
    pub fn width(self) -> u32 {
        self.width as u32
    }

    /// Low 64 bits of the value.
    #[inline]
    pub fn as_u64(self) -> u64 {
        self.value as u64
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn msb(self) -> bool {
        (self.value >> (self.width - 1)) & 1 == 1
    }

    /// The value interpreted as two's complement at its own width.
    pub fn as_signed(self) -> i128 {
        let w = self.width();
        if w == 128 {
            self.value as i128
        } else if self.msb() {
            (self.value | !mask(w)) as i128
        } else {
            self.value as i128
        }
    }

    /// Keeps the low `width` bits.
    pub fn truncate(self, width: u32) -> Self {
        Self::from_u128(self.value, width)
    }

    pub fn zero_extend(self, width: u32) -> Self {
        Self::from_u128(self.value, width)
    }

    pub fn sign_extend(self, width: u32) -> Self {
        Self::from_i128(self.as_signed(), width)
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}:{}", self.value, self.width)
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'h{:x}", self.width, self.value)
    }
}
