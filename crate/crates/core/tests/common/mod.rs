#![allow(dead_code)]

use nanoop_core::timing::{TimingEntry, TimingTable};
use nanoop_core::MachineState;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn below(r: &mut ChaCha8Rng, n: u64) -> u64 {
    r.next_u64() % n
}

/// Measured rows plus fixed test values for the remaining AL kinds.
pub fn table() -> TimingTable {
    let mut t = TimingTable::new(0.5);
    let rows: &[(&str, f64, f64)] = &[
        ("UNSIGN_EXTEND", 0.09, 1037.5),
        ("COND_ASSIGN", 0.18, 1931.8),
        ("CONCAT", 0.27, 2061.4),
        ("AND", 0.12, 1805.8),
        ("OR", 0.12, 1968.1),
        ("NOT", 0.09, 1257.5),
        ("XOR", 0.16, 2309.0),
        ("ADD", 0.35, 3200.0),
        ("SUB", 0.36, 3300.0),
        ("SIGNED_MUL", 1.40, 18000.0),
        ("SLL", 0.30, 2900.0),
        ("SRL", 0.30, 2900.0),
        ("SRA", 0.30, 3000.0),
        ("SLICE", 0.02, 50.0),
        ("SIGN_EXTEND", 0.09, 1100.0),
        ("CMP_GE_S", 0.30, 2200.0),
        ("CMP_GE_U", 0.30, 2100.0),
        ("CMP_GT_S", 0.30, 2200.0),
        ("CMP_GT_U", 0.30, 2100.0),
        ("CMP_LT_S", 0.30, 2200.0),
        ("CMP_LT_U", 0.30, 2100.0),
        ("CMP_LE_S", 0.30, 2200.0),
        ("CMP_LE_U", 0.30, 2100.0),
        ("CMP_NE", 0.20, 1500.0),
        ("CMP_EQ", 0.20, 1500.0),
    ];
    for (n, d, a) in rows {
        t.insert(*n, TimingEntry::new(*d, *a));
    }
    t
}

fn sx(v: u64, bits: u32) -> u64 {
    (((v << (64 - bits)) as i64) >> (64 - bits)) as u64
}

fn bits(w: u32, hi: u32, lo: u32) -> u64 {
    ((w >> lo) as u64) & ((1u64 << (hi - lo + 1)) - 1)
}

/// Independent RV64I + scalar SHA-2 interpreter working from the raw word.
/// Returns `None` for words outside the supported set.
pub fn reference_step(s: &MachineState, w: u32) -> Option<MachineState> {
    let mut n = s.clone();
    let rd = bits(w, 11, 7) as usize;
    let r1 = s.regs()[bits(w, 19, 15) as usize];
    let r2 = s.regs()[bits(w, 24, 20) as usize];
    let f3 = bits(w, 14, 12);
    let f7 = bits(w, 31, 25);
    let imm_i = sx(bits(w, 31, 20), 12);
    let imm_s = sx((bits(w, 31, 25) << 5) | bits(w, 11, 7), 12);
    let imm_b = sx((bits(w, 31, 31) << 12) | (bits(w, 7, 7) << 11) | (bits(w, 30, 25) << 5) | (bits(w, 11, 8) << 1), 13);
    let imm_u = sx(bits(w, 31, 12) << 12, 32);
    let imm_j = sx((bits(w, 31, 31) << 20) | (bits(w, 19, 12) << 12) | (bits(w, 20, 20) << 11) | (bits(w, 30, 21) << 1), 21);
    let pc = s.pc;
    let mut next = pc.wrapping_add(4);
    let load = |addr: u64, bytes: usize| s.read_le(addr, bytes) as u64;
    match bits(w, 6, 0) as u32 {
        0b0110111 => n.set_reg(rd, imm_u),
        0b0010111 => n.set_reg(rd, pc.wrapping_add(imm_u)),
        0b1101111 => {
            n.set_reg(rd, pc.wrapping_add(4));
            next = pc.wrapping_add(imm_j);
        }
        0b1100111 if f3 == 0 => {
            n.set_reg(rd, pc.wrapping_add(4));
            next = r1.wrapping_add(imm_i) & !1;
        }
        0b1100011 => {
            let t = match f3 {
                0 => r1 == r2,
                1 => r1 != r2,
                4 => (r1 as i64) < (r2 as i64),
                5 => (r1 as i64) >= (r2 as i64),
                6 => r1 < r2,
                7 => r1 >= r2,
                _ => return None,
            };
            if t {
                next = pc.wrapping_add(imm_b);
            }
        }
        0b0000011 => {
            let a = r1.wrapping_add(imm_i);
            let v = match f3 {
                0 => sx(load(a, 1), 8),
                1 => sx(load(a, 2), 16),
                2 => sx(load(a, 4), 32),
                3 => load(a, 8),
                4 => load(a, 1),
                5 => load(a, 2),
                6 => load(a, 4),
                _ => return None,
            };
            n.set_reg(rd, v);
        }
        0b0100011 => {
            let a = r1.wrapping_add(imm_s);
            let size = match f3 {
                0 => 1,
                1 => 2,
                2 => 4,
                3 => 8,
                _ => return None,
            };
            n.write_le(a, size, r2 as u128);
        }
        0b0010011 => {
            let sh = bits(w, 25, 20) as u32;
            let v = match f3 {
                0 => r1.wrapping_add(imm_i),
                2 => ((r1 as i64) < (imm_i as i64)) as u64,
                3 => (r1 < imm_i) as u64,
                4 => r1 ^ imm_i,
                6 => r1 | imm_i,
                7 => r1 & imm_i,
                1 if bits(w, 31, 26) == 0 => r1 << sh,
                5 if bits(w, 31, 26) == 0 => r1 >> sh,
                5 if bits(w, 31, 26) == 0b010000 => ((r1 as i64) >> sh) as u64,
                1 if f7 == 0b0001000 => sha(bits(w, 24, 20), r1)?,
                _ => return None,
            };
            n.set_reg(rd, v);
        }
        0b0110011 => {
            let v = match (f7, f3) {
                (0, 0) => r1.wrapping_add(r2),
                (0x20, 0) => r1.wrapping_sub(r2),
                (0, 1) => r1 << (r2 & 63),
                (0, 2) => ((r1 as i64) < (r2 as i64)) as u64,
                (0, 3) => (r1 < r2) as u64,
                (0, 4) => r1 ^ r2,
                (0, 5) => r1 >> (r2 & 63),
                (0x20, 5) => ((r1 as i64) >> (r2 & 63)) as u64,
                (0, 6) => r1 | r2,
                (0, 7) => r1 & r2,
                _ => return None,
            };
            n.set_reg(rd, v);
        }
        0b0011011 => {
            let sh = bits(w, 24, 20) as u32;
            let x = r1 as u32;
            let v = match (f7, f3) {
                (_, 0) => r1.wrapping_add(imm_i) as u32,
                (0, 1) => x << sh,
                (0, 5) => x >> sh,
                (0x20, 5) => ((x as i32) >> sh) as u32,
                _ => return None,
            };
            n.set_reg(rd, v as i32 as i64 as u64);
        }
        0b0111011 => {
            let (x, y) = (r1 as u32, r2 as u32);
            let v = match (f7, f3) {
                (0, 0) => x.wrapping_add(y),
                (0x20, 0) => x.wrapping_sub(y),
                (0, 1) => x << (y & 31),
                (0, 5) => x >> (y & 31),
                (0x20, 5) => ((x as i32) >> (y & 31)) as u32,
                _ => return None,
            };
            n.set_reg(rd, v as i32 as i64 as u64);
        }
        _ => return None,
    }
    n.pc = next;
    Some(n)
}

fn sha(sel: u64, x: u64) -> Option<u64> {
    let y = x as u32;
    let s32 = |v: u32| v as i32 as i64 as u64;
    Some(match sel {
        0b00000 => s32(y.rotate_right(2) ^ y.rotate_right(13) ^ y.rotate_right(22)),
        0b00001 => s32(y.rotate_right(6) ^ y.rotate_right(11) ^ y.rotate_right(25)),
        0b00010 => s32(y.rotate_right(7) ^ y.rotate_right(18) ^ (y >> 3)),
        0b00011 => s32(y.rotate_right(17) ^ y.rotate_right(19) ^ (y >> 10)),
        0b00100 => x.rotate_right(28) ^ x.rotate_right(34) ^ x.rotate_right(39),
        0b00101 => x.rotate_right(14) ^ x.rotate_right(18) ^ x.rotate_right(41),
        0b00110 => x.rotate_right(1) ^ x.rotate_right(8) ^ (x >> 7),
        0b00111 => x.rotate_right(19) ^ x.rotate_right(61) ^ (x >> 6),
        _ => return None,
    })
}

/// Positive placeholder coefficients; tests only rely on ordering.
pub fn coeffs() -> nanoop_core::ppa::Coefficients {
    let mut c = nanoop_core::ppa::Coefficients::default();
    for (i, (name, _)) in c.fields().into_iter().enumerate() {
        c.set(name, 10.0 + 7.0 * i as f64);
    }
    c
}
