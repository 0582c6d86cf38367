//! Architectural machine state and the effects an instruction applies to it.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::bitvec::BitVec;

pub const NUM_REGS: usize = 32;

/// Read-only view of the architectural state seen by storage nOPs.
pub trait StateView {
    fn reg(&self, index: usize) -> u64;
    fn mem_byte(&self, addr: u64) -> u8;
    fn pc(&self) -> u64;
}

/// PC, a 32 x 64-bit register file with `x0` hardwired to zero and a sparse
/// little-endian byte memory.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct MachineState {
    pub pc: u64,
    regs: [u64; NUM_REGS],
    mem: BTreeMap<u64, u8>,
}

impl MachineState {
    pub fn new(pc: u64) -> Self {
        MachineState {
            pc,
            ..Default::default()
        }
    }

    pub fn regs(&self) -> &[u64; NUM_REGS] {
        &self.regs
    }

    pub fn set_reg(&mut self, index: usize, value: u64) {
        if index != 0 {
            self.regs[index] = value;
        }
    }

    pub fn memory(&self) -> &BTreeMap<u64, u8> {
        &self.mem
    }

    pub fn write_byte(&mut self, addr: u64, byte: u8) {
        // Zero bytes are stored too so the memory map records every address
        // ever written; equality compares what software observes.
        self.mem.insert(addr, byte);
    }

    pub fn write_le(&mut self, addr: u64, bytes: usize, value: u128) {
        for i in 0..bytes {
            self.write_byte(addr.wrapping_add(i as u64), (value >> (8 * i)) as u8);
        }
    }

    pub fn read_le(&self, addr: u64, bytes: usize) -> u128 {
        let mut v = 0u128;
        for i in 0..bytes {
            v |= (self.mem_byte(addr.wrapping_add(i as u64)) as u128) << (8 * i);
        }
        v
    }

    pub fn apply(&mut self, effect: &Effect) {
        match *effect {
            Effect::RegWrite { index, value } => self.set_reg(index as usize, value.as_u64()),
            Effect::MemWrite { addr, bytes, value } => {
                self.write_le(addr, bytes as usize, value.value())
            }
            Effect::PcUpdate(pc) => self.pc = pc.as_u64(),
        }
    }

    pub fn apply_delta(&mut self, delta: &StateDelta) {
        for e in delta.effects() {
            self.apply(e);
        }
    }

    /// Architectural equality ignoring memory bytes that hold zero, so a
    /// state that stored 0 somewhere equals one that never touched it.
    pub fn same_architectural(&self, other: &MachineState) -> bool {
        if self.pc != other.pc || self.regs != other.regs {
            return false;
        }
        let nz = |m: &BTreeMap<u64, u8>| m.iter().filter(|(_, b)| **b != 0).map(|(a, b)| (*a, *b)).collect::<Vec<_>>();
        nz(&self.mem) == nz(&other.mem)
    }
}

impl StateView for MachineState {
    fn reg(&self, index: usize) -> u64 {
        if index == 0 {
            0
        } else {
            self.regs[index]
        }
    }

    fn mem_byte(&self, addr: u64) -> u8 {
        self.mem.get(&addr).copied().unwrap_or(0)
    }

    fn pc(&self) -> u64 {
        self.pc
    }
}

impl fmt::Debug for MachineState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let regs: Vec<_> = self
            .regs
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0)
            .map(|(i, v)| (i, *v))
            .collect();
        f.debug_struct("MachineState")
            .field("pc", &format_args!("{:#x}", self.pc))
            .field("regs", &regs)
            .field("mem_bytes", &self.mem.len())
            .finish()
    }
}

/// One observable effect of executing an instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Effect {
    RegWrite { index: u8, value: BitVec },
    MemWrite { addr: u64, bytes: u8, value: BitVec },
    PcUpdate(BitVec),
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::RegWrite { index, value } => write!(f, "x{index} <- {:#x}", value.value()),
            Effect::MemWrite { addr, bytes, value } => {
                write!(f, "mem[{addr:#x}..+{bytes}] <- {:#x}", value.value())
            }
            Effect::PcUpdate(pc) => write!(f, "pc <- {:#x}", pc.value()),
        }
    }
}

/// Ordered effects of one instruction execution; the PC update comes last.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct StateDelta(Vec<Effect>);

impl StateDelta {
    pub fn new(effects: Vec<Effect>) -> Self {
        StateDelta(effects)
    }

    pub fn effects(&self) -> &[Effect] {
        &self.0
    }

    pub fn push(&mut self, e: Effect) {
        self.0.push(e);
    }

    pub fn next_pc(&self) -> Option<u64> {
        match self.0.last() {
            Some(Effect::PcUpdate(pc)) => Some(pc.as_u64()),
            _ => None,
        }
    }

    /// Exactly one `PcUpdate`, in last position.
    pub fn is_well_formed(&self) -> bool {
        let pcs = self.0.iter().filter(|e| matches!(e, Effect::PcUpdate(_))).count();
        pcs == 1 && matches!(self.0.last(), Some(Effect::PcUpdate(_)))
    }

    /// Stable 64-bit fingerprint (FNV-1a over the effect encoding).
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::default();
        for e in &self.0 {
            match *e {
                Effect::RegWrite { index, value } => {
                    h.write(&[1, index]);
                    h.write_bv(value);
                }
                Effect::MemWrite { addr, bytes, value } => {
                    h.write(&[2, bytes]);
                    h.write(&addr.to_le_bytes());
                    h.write_bv(value);
                }
                Effect::PcUpdate(pc) => {
                    h.write(&[3]);
                    h.write_bv(pc);
                }
            }
        }
        h.finish()
    }
}

/// Overlay of pending writes on top of a base state, so reads later in an
/// instruction observe writes made earlier in the same instruction.
pub struct Overlay<'a, S: StateView + ?Sized> {
    base: &'a S,
    effects: &'a [Effect],
}

impl<'a, S: StateView + ?Sized> Overlay<'a, S> {
    pub fn new(base: &'a S, effects: &'a [Effect]) -> Self {
        Overlay { base, effects }
    }
}

impl<S: StateView + ?Sized> StateView for Overlay<'_, S> {
    fn reg(&self, index: usize) -> u64 {
        if index == 0 {
            return 0;
        }
        for e in self.effects.iter().rev() {
            if let Effect::RegWrite { index: i, value } = e {
                if *i as usize == index {
                    return value.as_u64();
                }
            }
        }
        self.base.reg(index)
    }

    fn mem_byte(&self, addr: u64) -> u8 {
        for e in self.effects.iter().rev() {
            if let Effect::MemWrite { addr: a, bytes, value } = e {
                let off = addr.wrapping_sub(*a);
                if off < *bytes as u64 {
                    return (value.value() >> (8 * off)) as u8;
                }
            }
        }
        self.base.mem_byte(addr)
    }

    fn pc(&self) -> u64 {
        self.base.pc()
    }
}

#[derive(Clone, Copy)]
pub(crate) struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv {
    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn write_bv(&mut self, v: BitVec) {
        self.write(&[v.width() as u8]);
        self.write(&v.value().to_le_bytes());
    }

    pub(crate) fn finish(self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x0_is_hardwired() {
        let mut s = MachineState::new(0);
        s.apply(&Effect::RegWrite {
            index: 0,
            value: BitVec::from_u64(5, 64),
        });
        assert_eq!(s.reg(0), 0);
        s.set_reg(3, 9);
        assert_eq!(s.reg(3), 9);
    }

    #[test]
    fn memory_is_little_endian() {
        let mut s = MachineState::new(0);
        s.write_le(0x100, 4, 0x1122_3344);
        assert_eq!(s.mem_byte(0x100), 0x44);
        assert_eq!(s.mem_byte(0x103), 0x11);
        assert_eq!(s.read_le(0x101, 2), 0x2233);
    }

    #[test]
    fn overlay_sees_pending_writes() {
        let mut s = MachineState::new(0);
        s.set_reg(1, 7);
        let effects = [
            Effect::RegWrite { index: 1, value: BitVec::from_u64(9, 64) },
            Effect::MemWrite { addr: 8, bytes: 2, value: BitVec::from_u64(0xabcd, 16) },
        ];
        let o = Overlay::new(&s, &effects);
        assert_eq!(o.reg(1), 9);
        assert_eq!(o.mem_byte(9), 0xab);
        assert_eq!(o.mem_byte(10), 0);
    }
}
