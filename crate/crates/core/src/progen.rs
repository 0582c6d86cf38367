//! Random terminating assembly programs for differential testing.
//!
//! Programs use the base integer instructions (and the SHA-2 ones when the
//! ISA has them), bounded counted loops, forward skips, a subroutine call,
//! and loads/stores into a small data window so store-to-load forwarding
//! and memory ordering are exercised. Every program ends in `halt`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::isa::Isa;

/// Base address of the data window, loaded into `x10` with `lui`.
pub const DATA_BASE: u64 = 0x2000;
/// Bytes of the data window addressed by generated loads and stores.
pub const DATA_SPAN: u64 = 256;

#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    pub blocks: usize,
    pub ops_per_block: usize,
    pub branches: bool,
    pub memory: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { blocks: 6, ops_per_block: 6, branches: true, memory: true }
    }
}

struct Gen<'a> {
    r: ChaCha8Rng,
    isa: &'a Isa,
    out: String,
    label: usize,
}

const DATA_REGS: [&str; 9] = ["x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9"];
const R_OPS: &[&str] = &["add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and", "addw", "subw", "sllw", "srlw", "sraw"];
const I_OPS: &[&str] = &["addi", "slti", "sltiu", "xori", "ori", "andi", "addiw"];
const SHIFT64: &[&str] = &["slli", "srli", "srai"];
const SHIFT32: &[&str] = &["slliw", "srliw", "sraiw"];
const UNARY: &[&str] = &[
    "sha256sig0", "sha256sig1", "sha256sum0", "sha256sum1", "sha512sig0", "sha512sig1", "sha512sum0", "sha512sum1",
];
const LOADS: &[(&str, u64)] = &[("lb", 1), ("lh", 2), ("lw", 4), ("ld", 8), ("lbu", 1), ("lhu", 2), ("lwu", 4)];
const STORES: &[(&str, u64)] = &[("sb", 1), ("sh", 2), ("sw", 4), ("sd", 8)];
const BRANCHES: &[&str] = &["beq", "bne", "blt", "bge", "bltu", "bgeu"];

impl Gen<'_> {
    fn below(&mut self, n: u64) -> u64 {
        self.r.next_u64() % n
    }

    fn pick<'s>(&mut self, xs: &[&'s str]) -> &'s str {
        let avail: Vec<&str> = xs.iter().copied().filter(|m| self.isa.by_name(m).is_some()).collect();
        avail[self.below(avail.len() as u64) as usize]
    }

    fn reg(&mut self) -> &'static str {
        DATA_REGS[self.below(DATA_REGS.len() as u64) as usize]
    }

    fn imm12(&mut self) -> i64 {
        self.below(4096) as i64 - 2048
    }

    fn line(&mut self, s: String) {
        self.out.push_str("    ");
        self.out.push_str(&s);
        self.out.push('\n');
    }

    fn offset(&mut self, size: u64) -> u64 {
        // A few hot slots make forwarding and overlap likely.
        let slot = if self.below(2) == 0 { self.below(4) * 8 } else { self.below(DATA_SPAN / size) * size };
        slot.min(DATA_SPAN - size)
    }

    fn op(&mut self, memory: bool) {
        let (d, a, b) = (self.reg(), self.reg(), self.reg());
        let has_unary = UNARY.iter().any(|m| self.isa.by_name(m).is_some());
        let choice = self.below(if memory { 10 } else { 7 });
        match choice {
            0 | 1 => {
                let m = self.pick(R_OPS);
                self.line(format!("{m} {d}, {a}, {b}"));
            }
            2 | 3 => {
                let m = self.pick(I_OPS);
                let k = self.imm12();
                self.line(format!("{m} {d}, {a}, {k}"));
            }
            4 => {
                if self.below(2) == 0 {
                    let m = self.pick(SHIFT64);
                    let k = self.below(64);
                    self.line(format!("{m} {d}, {a}, {k}"));
                } else {
                    let m = self.pick(SHIFT32);
                    let k = self.below(32);
                    self.line(format!("{m} {d}, {a}, {k}"));
                }
            }
            5 => {
                let k = self.below(1 << 20) as i64 - (1 << 19);
                let m = if self.below(2) == 0 { "lui" } else { "auipc" };
                self.line(format!("{m} {d}, {k}"));
            }
            6 => {
                if has_unary {
                    let m = self.pick(UNARY);
                    self.line(format!("{m} {d}, {a}"));
                } else {
                    let m = self.pick(R_OPS);
                    self.line(format!("{m} {d}, {a}, {b}"));
                }
            }
            7 | 8 => {
                let (m, size) = LOADS[self.below(LOADS.len() as u64) as usize];
                let off = self.offset(size);
                self.line(format!("{m} {d}, {off}(x10)"));
            }
            _ => {
                let (m, size) = STORES[self.below(STORES.len() as u64) as usize];
                let off = self.offset(size);
                self.line(format!("{m} {b}, {off}(x10)"));
            }
        }
    }

    fn fresh(&mut self) -> String {
        self.label += 1;
        format!("L{}", self.label)
    }
}

/// A random program whose every path halts.
pub fn random_program(isa: &Isa, seed: u64, opts: &GenOptions) -> String {
    let mut g = Gen { r: ChaCha8Rng::seed_from_u64(seed), isa, out: String::new(), label: 0 };
    g.out.push_str("_start:\n");
    g.line(format!("lui x10, {}", DATA_BASE >> 12));
    for r in DATA_REGS {
        let k = g.imm12();
        g.line(format!("addi {r}, x0, {k}"));
    }
    let mut call_used = false;
    for _ in 0..opts.blocks {
        let kind = if opts.branches { g.below(4) } else { 0 };
        let n = 1 + g.below(opts.ops_per_block as u64) as usize;
        match kind {
            1 => {
                // Counted loop on a dedicated counter register.
                let top = g.fresh();
                let count = 1 + g.below(6);
                g.line(format!("addi x20, x0, {count}"));
                g.out.push_str(&format!("{top}:\n"));
                for _ in 0..n {
                    g.op(opts.memory);
                }
                g.line("addi x20, x20, -1".into());
                g.line(format!("bne x20, x0, {top}"));
            }
            2 => {
                let skip = g.fresh();
                let m = g.pick(BRANCHES);
                let (a, b) = (g.reg(), g.reg());
                g.line(format!("{m} {a}, {b}, {skip}"));
                for _ in 0..n {
                    g.op(opts.memory);
                }
                g.out.push_str(&format!("{skip}:\n"));
            }
            3 if !call_used => {
                call_used = true;
                g.line("jal x21, sub".into());
            }
            _ => {
                for _ in 0..n {
                    g.op(opts.memory);
                }
            }
        }
    }
    g.line("halt".into());
    g.out.push_str("sub:\n");
    for _ in 0..3 {
        g.op(opts.memory);
    }
    g.line("jalr x0, 0(x21)".into());
    g.out
}
