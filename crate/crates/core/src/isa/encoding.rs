//! 32-bit instruction encodings: fixed opcode bits plus operand fields.

use alloc::string::String;
use alloc::vec::Vec;

/// Bits `hi..=lo` of the word must equal `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedField {
    pub hi: u32,
    pub lo: u32,
    pub value: u32,
}

/// An operand made of one or more bit ranges, listed most significant first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperandField {
    pub name: String,
    pub segments: Vec<(u32, u32)>,
    /// Assembler view: the written value is two's complement.
    pub signed: bool,
    /// Assembler view: number of implicit low zero bits dropped from the value.
    pub scale: u32,
    /// Assembler view: the written value is a target address relative to the instruction.
    pub pcrel: bool,
    /// Assembler view: the operand is written as a register name.
    pub register: bool,
}

impl OperandField {
    pub fn new(name: impl Into<String>, segments: Vec<(u32, u32)>) -> Self {
        let name = name.into();
        let register = is_register_name(&name) && segments.iter().map(|(h, l)| h - l + 1).sum::<u32>() == 5;
        OperandField { name, segments, signed: false, scale: 0, pcrel: false, register }
    }

    pub fn signed(mut self) -> Self {
        self.signed = true;
        self
    }

    pub fn scaled(mut self, scale: u32) -> Self {
        self.scale = scale;
        self
    }

    pub fn pcrel(mut self) -> Self {
        self.pcrel = true;
        self
    }

    pub fn width(&self) -> u32 {
        self.segments.iter().map(|(h, l)| h - l + 1).sum()
    }

    /// Concatenates the segments of `word`, first segment in the high bits.
    pub fn extract(&self, word: u32) -> u64 {
        let mut v = 0u64;
        for &(hi, lo) in &self.segments {
            let w = hi - lo + 1;
            v = (v << w) | ((word >> lo) as u64 & ((1u64 << w) - 1));
        }
        v
    }

    /// Scatters `value` (already `width()` bits) into the segments.
    pub fn insert(&self, word: u32, value: u64) -> u32 {
        let mut word = word;
        let mut shift = self.width();
        for &(hi, lo) in &self.segments {
            let w = hi - lo + 1;
            shift -= w;
            let bits = ((value >> shift) & ((1u64 << w) - 1)) as u32;
            let m = (((1u64 << w) - 1) as u32) << lo;
            word = (word & !m) | (bits << lo);
        }
        word
    }
}

fn is_register_name(n: &str) -> bool {
    matches!(n, "rd" | "rs" | "rt") || (n.starts_with("rs") && n[2..].chars().all(|c| c.is_ascii_digit()))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodingError {
    #[error("bit range [{0}:{1}] is outside a 32-bit word or reversed")]
    Range(u32, u32),
    #[error("bit {0} is covered twice")]
    Overlap(u32),
    #[error("fixed value {value:#x} does not fit bits [{hi}:{lo}]")]
    Value { hi: u32, lo: u32, value: u32 },
    #[error("operand `{0}` has no bits")]
    Empty(String),
    #[error("operand `{0}` is listed twice")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Encoding {
    pub fixed: Vec<FixedField>,
    pub operands: Vec<OperandField>,
}

impl Encoding {
    pub fn new(fixed: Vec<FixedField>, operands: Vec<OperandField>) -> Result<Self, EncodingError> {
        let e = Encoding { fixed, operands };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<(), EncodingError> {
        let mut used = 0u64;
        let mut claim = |hi: u32, lo: u32| -> Result<(), EncodingError> {
            if hi > 31 || lo > hi {
                return Err(EncodingError::Range(hi, lo));
            }
            for b in lo..=hi {
                if used >> b & 1 == 1 {
                    return Err(EncodingError::Overlap(b));
                }
                used |= 1 << b;
            }
            Ok(())
        };
        for f in &self.fixed {
            claim(f.hi, f.lo)?;
            let w = f.hi - f.lo + 1;
            if w < 32 && f.value >> w != 0 {
                return Err(EncodingError::Value { hi: f.hi, lo: f.lo, value: f.value });
            }
        }
        for (i, o) in self.operands.iter().enumerate() {
            if o.segments.is_empty() {
                return Err(EncodingError::Empty(o.name.clone()));
            }
            if self.operands[..i].iter().any(|p| p.name == o.name) {
                return Err(EncodingError::Duplicate(o.name.clone()));
            }
            for &(hi, lo) in &o.segments {
                claim(hi, lo)?;
            }
        }
        Ok(())
    }

    /// `(mask, value)` such that a word matches iff `word & mask == value`.
    pub fn match_bits(&self) -> (u32, u32) {
        let mut mask = 0u32;
        let mut value = 0u32;
        for f in &self.fixed {
            let w = f.hi - f.lo + 1;
            let m = if w == 32 { u32::MAX } else { ((1u32 << w) - 1) << f.lo };
            mask |= m;
            value |= (f.value << f.lo) & m;
        }
        (mask, value)
    }

    pub fn matches(&self, word: u32) -> bool {
        let (m, v) = self.match_bits();
        word & m == v
    }

    pub fn operand(&self, name: &str) -> Option<&OperandField> {
        self.operands.iter().find(|o| o.name == name)
    }

    /// A word matching both encodings, if one exists.
    pub fn overlap_witness(&self, other: &Encoding) -> Option<u32> {
        let (ma, va) = self.match_bits();
        let (mb, vb) = other.match_bits();
        let common = ma & mb;
        if va & common == vb & common {
            Some(va | vb)
        } else {
            None
        }
    }

    /// Builds a word from raw field values (each truncated to its width).
    pub fn encode(&self, values: &[(&str, u64)]) -> u32 {
        let (_, mut word) = self.match_bits();
        for (name, v) in values {
            if let Some(o) = self.operand(name) {
                word = o.insert(word, *v);
            }
        }
        word
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_segment_operand_round_trips() {
        // B-type offset: imm[12|10:5] at 31:25 and imm[4:1|11] at 11:7.
        let f = OperandField::new("imm", alloc::vec![(31, 31), (7, 7), (30, 25), (11, 8)]);
        assert_eq!(f.width(), 12);
        for v in [0u64, 1, 0x800, 0xfff, 0x5a5, 0x3c3] {
            assert_eq!(f.extract(f.insert(0, v)), v);
        }
        // imm bit 11 (second segment, bit 10 of the field) sits at word bit 7.
        assert_eq!(f.insert(0, 1 << 10), 1 << 7);
    }

    #[test]
    fn overlap_detection() {
        let a = Encoding::new(alloc::vec![FixedField { hi: 6, lo: 0, value: 0x13 }], alloc::vec![]).unwrap();
        let b = Encoding::new(
            alloc::vec![FixedField { hi: 6, lo: 0, value: 0x13 }, FixedField { hi: 14, lo: 12, value: 1 }],
            alloc::vec![],
        )
        .unwrap();
        let c = Encoding::new(alloc::vec![FixedField { hi: 6, lo: 0, value: 0x33 }], alloc::vec![]).unwrap();
        let w = a.overlap_witness(&b).unwrap();
        assert!(a.matches(w) && b.matches(w));
        assert!(a.overlap_witness(&c).is_none());
        assert!(Encoding::new(
            alloc::vec![FixedField { hi: 6, lo: 0, value: 0x13 }],
            alloc::vec![OperandField::new("rd", alloc::vec![(11, 5)])]
        )
        .is_err());
    }
}
