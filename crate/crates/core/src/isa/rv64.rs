//! The base RV64I-style instruction set (without FENCE, ECALL and EBREAK)
//! and the scalar SHA-2 extension, with their RISC-V encodings.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{instantiate_instruction, Encoding, FixedField, Instruction, IsaError, OperandField};
use crate::nop::NopRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    R,
    I,
    /// I-type with a 6-bit shift amount and funct6 in [31:26].
    Shift64,
    /// I-type with a 5-bit shift amount and funct7 in [31:25].
    Shift32,
    /// I-type used by loads and `jalr`: `rd, imm(rs1)`.
    Load,
    S,
    B,
    U,
    J,
    /// `rd, rs1` with funct7 and a fixed rs2 field.
    Unary,
}

/// Encoding spec: format, opcode, funct3, upper funct bits (funct7, funct6,
/// or the fixed rs2 value for [`Format::Unary`] in the low 5 bits).
#[derive(Debug, Clone, Copy)]
pub struct Spec {
    pub name: &'static str,
    pub format: Format,
    pub opcode: u32,
    pub funct3: u32,
    pub funct7: u32,
    pub source: &'static str,
}

macro_rules! spec {
    ($dir:literal, $name:literal, $fmt:ident, $op:expr, $f3:expr, $f7:expr) => {
        Spec {
            name: $name,
            format: Format::$fmt,
            opcode: $op,
            funct3: $f3,
            funct7: $f7,
            source: include_str!(concat!("../../isa/", $dir, "/", $name, ".nop")),
        }
    };
}

const OP: u32 = 0b0110011;
const OP_IMM: u32 = 0b0010011;
const OP_32: u32 = 0b0111011;
const OP_IMM_32: u32 = 0b0011011;
const LOAD: u32 = 0b0000011;
const STORE: u32 = 0b0100011;
const BRANCH: u32 = 0b1100011;

pub const BASE: &[Spec] = &[
    spec!("rv64i", "lui", U, 0b0110111, 0, 0),
    spec!("rv64i", "auipc", U, 0b0010111, 0, 0),
    spec!("rv64i", "jal", J, 0b1101111, 0, 0),
    spec!("rv64i", "jalr", Load, 0b1100111, 0, 0),
    spec!("rv64i", "beq", B, BRANCH, 0, 0),
    spec!("rv64i", "bne", B, BRANCH, 1, 0),
    spec!("rv64i", "blt", B, BRANCH, 4, 0),
    spec!("rv64i", "bge", B, BRANCH, 5, 0),
    spec!("rv64i", "bltu", B, BRANCH, 6, 0),
    spec!("rv64i", "bgeu", B, BRANCH, 7, 0),
    spec!("rv64i", "lb", Load, LOAD, 0, 0),
    spec!("rv64i", "lh", Load, LOAD, 1, 0),
    spec!("rv64i", "lw", Load, LOAD, 2, 0),
    spec!("rv64i", "ld", Load, LOAD, 3, 0),
    spec!("rv64i", "lbu", Load, LOAD, 4, 0),
    spec!("rv64i", "lhu", Load, LOAD, 5, 0),
    spec!("rv64i", "lwu", Load, LOAD, 6, 0),
    spec!("rv64i", "sb", S, STORE, 0, 0),
    spec!("rv64i", "sh", S, STORE, 1, 0),
    spec!("rv64i", "sw", S, STORE, 2, 0),
    spec!("rv64i", "sd", S, STORE, 3, 0),
    spec!("rv64i", "addi", I, OP_IMM, 0, 0),
    spec!("rv64i", "slti", I, OP_IMM, 2, 0),
    spec!("rv64i", "sltiu", I, OP_IMM, 3, 0),
    spec!("rv64i", "xori", I, OP_IMM, 4, 0),
    spec!("rv64i", "ori", I, OP_IMM, 6, 0),
    spec!("rv64i", "andi", I, OP_IMM, 7, 0),
    spec!("rv64i", "slli", Shift64, OP_IMM, 1, 0b000000),
    spec!("rv64i", "srli", Shift64, OP_IMM, 5, 0b000000),
    spec!("rv64i", "srai", Shift64, OP_IMM, 5, 0b010000),
    spec!("rv64i", "add", R, OP, 0, 0),
    spec!("rv64i", "sub", R, OP, 0, 0b0100000),
    spec!("rv64i", "sll", R, OP, 1, 0),
    spec!("rv64i", "slt", R, OP, 2, 0),
    spec!("rv64i", "sltu", R, OP, 3, 0),
    spec!("rv64i", "xor", R, OP, 4, 0),
    spec!("rv64i", "srl", R, OP, 5, 0),
    spec!("rv64i", "sra", R, OP, 5, 0b0100000),
    spec!("rv64i", "or", R, OP, 6, 0),
    spec!("rv64i", "and", R, OP, 7, 0),
    spec!("rv64i", "addiw", I, OP_IMM_32, 0, 0),
    spec!("rv64i", "slliw", Shift32, OP_IMM_32, 1, 0),
    spec!("rv64i", "srliw", Shift32, OP_IMM_32, 5, 0),
    spec!("rv64i", "sraiw", Shift32, OP_IMM_32, 5, 0b0100000),
    spec!("rv64i", "addw", R, OP_32, 0, 0),
    spec!("rv64i", "subw", R, OP_32, 0, 0b0100000),
    spec!("rv64i", "sllw", R, OP_32, 1, 0),
    spec!("rv64i", "srlw", R, OP_32, 5, 0),
    spec!("rv64i", "sraw", R, OP_32, 5, 0b0100000),
];

/// Scalar SHA-256/SHA-512 instructions; `funct7` holds the fixed rs2 value.
pub const ZKNH: &[Spec] = &[
    spec!("zknh", "sha256sig0", Unary, OP_IMM, 1, 0b00010),
    spec!("zknh", "sha256sig1", Unary, OP_IMM, 1, 0b00011),
    spec!("zknh", "sha256sum0", Unary, OP_IMM, 1, 0b00000),
    spec!("zknh", "sha256sum1", Unary, OP_IMM, 1, 0b00001),
    spec!("zknh", "sha512sig0", Unary, OP_IMM, 1, 0b00110),
    spec!("zknh", "sha512sig1", Unary, OP_IMM, 1, 0b00111),
    spec!("zknh", "sha512sum0", Unary, OP_IMM, 1, 0b00100),
    spec!("zknh", "sha512sum1", Unary, OP_IMM, 1, 0b00101),
];

fn fixed(hi: u32, lo: u32, value: u32) -> FixedField {
    FixedField { hi, lo, value }
}

fn reg(name: &str, hi: u32) -> OperandField {
    OperandField::new(name, vec![(hi, hi - 4)])
}

/// Encoding and assembly syntax for a format.
pub fn encoding(format: Format, opcode: u32, funct3: u32, funct7: u32) -> (Encoding, &'static str) {
    let op = fixed(6, 0, opcode);
    let f3 = fixed(14, 12, funct3);
    let (fixed_fields, operands, syntax) = match format {
        Format::R => (vec![op, f3, fixed(31, 25, funct7)], vec![reg("rd", 11), reg("rs1", 19), reg("rs2", 24)], "rd, rs1, rs2"),
        Format::I => (
            vec![op, f3],
            vec![reg("rd", 11), reg("rs1", 19), OperandField::new("imm", vec![(31, 20)]).signed()],
            "rd, rs1, imm",
        ),
        Format::Load => (
            vec![op, f3],
            vec![reg("rd", 11), reg("rs1", 19), OperandField::new("imm", vec![(31, 20)]).signed()],
            "rd, imm(rs1)",
        ),
        Format::Shift64 => (
            vec![op, f3, fixed(31, 26, funct7)],
            vec![reg("rd", 11), reg("rs1", 19), OperandField::new("shamt", vec![(25, 20)])],
            "rd, rs1, shamt",
        ),
        Format::Shift32 => (
            vec![op, f3, fixed(31, 25, funct7)],
            vec![reg("rd", 11), reg("rs1", 19), OperandField::new("shamt", vec![(24, 20)])],
            "rd, rs1, shamt",
        ),
        Format::S => (
            vec![op, f3],
            vec![reg("rs1", 19), reg("rs2", 24), OperandField::new("imm", vec![(31, 25), (11, 7)]).signed()],
            "rs2, imm(rs1)",
        ),
        Format::B => (
            vec![op, f3],
            vec![
                reg("rs1", 19),
                reg("rs2", 24),
                OperandField::new("imm", vec![(31, 31), (7, 7), (30, 25), (11, 8)]).signed().scaled(1).pcrel(),
            ],
            "rs1, rs2, imm",
        ),
        Format::U => (vec![op], vec![reg("rd", 11), OperandField::new("imm", vec![(31, 12)]).signed()], "rd, imm"),
        Format::J => (
            vec![op],
            vec![
                reg("rd", 11),
                OperandField::new("imm", vec![(31, 31), (19, 12), (20, 20), (30, 21)]).signed().scaled(1).pcrel(),
            ],
            "rd, imm",
        ),
        Format::Unary => (
            vec![op, f3, fixed(31, 25, 0b0001000), fixed(24, 20, funct7)],
            vec![reg("rd", 11), reg("rs1", 19)],
            "rd, rs1",
        ),
    };
    (Encoding::new(fixed_fields, operands).expect("built-in encodings are well formed"), syntax)
}

pub fn instantiate(spec: &Spec, registry: &NopRegistry) -> Result<Instruction, IsaError> {
    let (enc, syntax) = encoding(spec.format, spec.opcode, spec.funct3, spec.funct7);
    instantiate_instruction(spec.source, enc, Some(String::from(syntax)), registry)
}

/// The 49 base instructions.
pub fn base_instructions() -> Vec<Instruction> {
    let reg = NopRegistry::new();
    BASE.iter().map(|s| instantiate(s, &reg).expect("built-in instruction compiles")).collect()
}

pub fn zknh_instructions() -> Vec<Instruction> {
    let reg = NopRegistry::new();
    ZKNH.iter().map(|s| instantiate(s, &reg).expect("built-in instruction compiles")).collect()
}

pub fn base_isa() -> super::Isa {
    super::Isa::new(base_instructions()).expect("base encodings are disjoint")
}

/// Base ISA extended with the SHA-2 instructions.
pub fn zknh_isa() -> super::Isa {
    let mut isa = base_isa();
    for i in zknh_instructions() {
        isa = isa.extend(i).expect("SHA-2 encodings are disjoint from the base");
    }
    isa
}
