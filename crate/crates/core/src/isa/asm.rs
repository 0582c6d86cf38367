//! Two-pass assembler for bare-metal test programs.
//!
//! Each instruction is written as its mnemonic followed by operands in the
//! order of the instruction's syntax template (`rd, imm(rs1)` and so on).
//! Directives: `.org`, `.word`, `.dword`, `.half`, `.byte`, `.zero`,
//! `.align`, `.equ`; `.text`, `.data` and `.globl` are accepted and ignored.
//! Instructions go to instruction memory, data directives to data memory,
//! both at the shared location counter.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Instruction, Isa, Program};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct AssembleError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> AssembleError {
    AssembleError { line, message: message.into() }
}

const ABI: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7",
    "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6",
];

pub(crate) fn register(name: &str) -> Option<u64> {
    let n = name.trim();
    if n == "fp" {
        return Some(8);
    }
    if let Some(d) = n.strip_prefix('x') {
        return d.parse::<u64>().ok().filter(|r| *r < 32 && !d.starts_with('+'));
    }
    ABI.iter().position(|a| *a == n).map(|i| i as u64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Item {
    Operand(String),
    Punct(char),
}

fn template(syntax: &str) -> Vec<Item> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in syntax.chars() {
        if matches!(c, ',' | '(' | ')') {
            if !cur.trim().is_empty() {
                out.push(Item::Operand(cur.trim().to_string()));
            }
            cur.clear();
            out.push(Item::Punct(c));
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() {
        out.push(Item::Operand(cur.trim().to_string()));
    }
    out
}

fn split_operands(text: &str) -> Vec<Item> {
    // Same tokenisation as templates: atoms between `,`, `(` and `)`.
    template(text)
}

fn parse_int(s: &str) -> Option<i128> {
    let s = s.trim().replace('_', "");
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b.to_string()),
        None => (false, s.clone()),
    };
    let v = if let Some(h) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i128::from_str_radix(h, 16).ok()?
    } else if let Some(b) = body.strip_prefix("0b") {
        i128::from_str_radix(b, 2).ok()?
    } else if body.chars().next()?.is_ascii_digit() {
        body.parse::<i128>().ok()?
    } else {
        return None;
    };
    Some(if neg { -v } else { v })
}

/// Evaluates `a + b - c` over integers and symbols.
fn eval_expr(text: &str, symbols: &BTreeMap<String, i128>, line: usize) -> Result<i128, AssembleError> {
    let t = text.trim();
    if t.is_empty() {
        return Err(err(line, "missing operand"));
    }
    let mut total = 0i128;
    let mut sign = 1i128;
    let mut term = String::new();
    let flush = |term: &mut String, sign: i128, total: &mut i128| -> Result<(), AssembleError> {
        let s = term.trim();
        if s.is_empty() {
            return Ok(());
        }
        let v = match parse_int(s) {
            Some(v) => v,
            None => *symbols.get(s).ok_or_else(|| err(line, alloc::format!("undefined symbol `{s}`")))?,
        };
        *total += sign * v;
        term.clear();
        Ok(())
    };
    for c in t.chars() {
        match c {
            '+' | '-' => {
                let empty = term.trim().is_empty();
                flush(&mut term, sign, &mut total)?;
                sign = if c == '-' {
                    if empty {
                        -sign
                    } else {
                        -1
                    }
                } else if empty {
                    sign
                } else {
                    1
                };
            }
            _ => term.push(c),
        }
    }
    flush(&mut term, sign, &mut total)?;
    Ok(total)
}

enum Line {
    Instr { mnemonic: String, operands: String },
    Directive { name: String, args: String },
}

fn strip_comment(s: &str) -> &str {
    let mut end = s.len();
    for pat in ["#", "//", ";"] {
        if let Some(i) = s.find(pat) {
            end = end.min(i);
        }
    }
    &s[..end]
}

/// Assembles `text` against the mnemonics of `isa`. The entry point is the
/// `_start` label when defined, else the lowest instruction address.
pub fn assemble(text: &str, isa: &Isa) -> Result<Program, AssembleError> {
    let mut symbols: BTreeMap<String, i128> = BTreeMap::new();
    let mut lines: Vec<(usize, u64, Line)> = Vec::new();
    let mut lc: u64 = 0;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let mut rest = strip_comment(raw).trim();
        while let Some(i) = rest.find(':') {
            let label = rest[..i].trim();
            if label.is_empty() || !label.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.') {
                break;
            }
            if symbols.insert(label.to_string(), lc as i128).is_some() {
                return Err(err(line, alloc::format!("label `{label}` defined twice")));
            }
            rest = rest[i + 1..].trim();
        }
        if rest.is_empty() {
            continue;
        }
        let (head, tail) = match rest.find(char::is_whitespace) {
            Some(i) => (&rest[..i], rest[i..].trim()),
            None => (rest, ""),
        };
        if let Some(d) = head.strip_prefix('.') {
            let args: Vec<&str> = if tail.is_empty() { Vec::new() } else { tail.split(',').map(str::trim).collect() };
            let value = |i: usize, symbols: &BTreeMap<String, i128>| -> Result<i128, AssembleError> {
                eval_expr(args.get(i).copied().unwrap_or(""), symbols, line)
            };
            match d {
                "org" => lc = value(0, &symbols)? as u64,
                "align" => {
                    let a = 1u64 << value(0, &symbols)?.clamp(0, 16);
                    lc = lc.div_ceil(a) * a;
                }
                "zero" | "space" => lc += value(0, &symbols)? as u64,
                "equ" | "set" => {
                    let name = args.first().copied().unwrap_or("").to_string();
                    let v = value(1, &symbols)?;
                    symbols.insert(name, v);
                }
                "byte" | "half" | "word" | "dword" | "quad" => {
                    let size = data_size(d);
                    lines.push((line, lc, Line::Directive { name: d.to_string(), args: tail.to_string() }));
                    lc += size * args.len() as u64;
                }
                "text" | "data" | "globl" | "global" | "section" => {}
                _ => return Err(err(line, alloc::format!("unknown directive `.{d}`"))),
            }
            continue;
        }
        if !lc.is_multiple_of(4) {
            return Err(err(line, alloc::format!("instruction at unaligned address {lc:#x}")));
        }
        lines.push((line, lc, Line::Instr { mnemonic: head.to_ascii_lowercase(), operands: tail.to_string() }));
        lc += 4;
    }

    let mut prog = Program::default();
    for (line, addr, l) in &lines {
        let (line, addr) = (*line, *addr);
        match l {
            Line::Directive { name, args } => {
                let size = data_size(name);
                for (i, a) in args.split(',').enumerate() {
                    let v = eval_expr(a, &symbols, line)?;
                    let bits = size * 8;
                    if bits < 128 && (v >= 1i128 << bits || v < -(1i128 << (bits - 1))) {
                        return Err(err(line, alloc::format!("value {v} does not fit in {size} bytes")));
                    }
                    for b in 0..size {
                        prog.data.insert(addr + i as u64 * size + b, (v >> (8 * b)) as u8);
                    }
                }
            }
            Line::Instr { mnemonic, operands } => {
                let word = encode_line(isa, mnemonic, operands, addr, &symbols, line)?;
                prog.imem.insert(addr, word);
            }
        }
    }
    prog.entry = match symbols.get("_start") {
        Some(&v) => v as u64,
        None => prog.imem.keys().next().copied().unwrap_or(0),
    };
    if prog.entry % 4 != 0 {
        return Err(err(0, "entry point is not 4-byte aligned"));
    }
    Ok(prog)
}

fn data_size(d: &str) -> u64 {
    match d {
        "byte" => 1,
        "half" => 2,
        "word" => 4,
        _ => 8,
    }
}

fn encode_line(
    isa: &Isa,
    mnemonic: &str,
    operands: &str,
    pc: u64,
    symbols: &BTreeMap<String, i128>,
    line: usize,
) -> Result<u32, AssembleError> {
    if let Some(id) = isa.by_name(mnemonic) {
        let ins = isa.instruction(id);
        let tpl = template(&ins.syntax);
        let got = split_operands(operands);
        let usage = || alloc::format!("usage: {} {}", ins.name, ins.syntax);
        if tpl.len() != got.len() {
            return Err(err(line, alloc::format!("wrong operands for `{mnemonic}`; {}", usage())));
        }
        let mut fields: Vec<(String, String)> = Vec::new();
        for (t, g) in tpl.iter().zip(&got) {
            match (t, g) {
                (Item::Punct(a), Item::Punct(b)) if a == b => {}
                (Item::Operand(name), Item::Operand(text)) => fields.push((name.clone(), text.clone())),
                _ => return Err(err(line, alloc::format!("malformed operands for `{mnemonic}`; {}", usage()))),
            }
        }
        return encode_fields(ins, &fields, pc, symbols, line);
    }
    let ops: Vec<String> = operands.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    let arg = |i: usize| -> Result<String, AssembleError> {
        ops.get(i).cloned().ok_or_else(|| err(line, alloc::format!("`{mnemonic}` needs {} operands", i + 1)))
    };
    let (target, fields): (&str, Vec<(&str, String)>) = match mnemonic {
        "nop" => ("addi", alloc::vec![("rd", "x0".into()), ("rs1", "x0".into()), ("imm", "0".into())]),
        "mv" => ("addi", alloc::vec![("rd", arg(0)?), ("rs1", arg(1)?), ("imm", "0".into())]),
        "li" => ("addi", alloc::vec![("rd", arg(0)?), ("rs1", "x0".into()), ("imm", arg(1)?)]),
        "not" => ("xori", alloc::vec![("rd", arg(0)?), ("rs1", arg(1)?), ("imm", "-1".into())]),
        "j" => ("jal", alloc::vec![("rd", "x0".into()), ("imm", arg(0)?)]),
        "ret" => ("jalr", alloc::vec![("rd", "x0".into()), ("rs1", "x1".into()), ("imm", "0".into())]),
        "beqz" => ("beq", alloc::vec![("rs1", arg(0)?), ("rs2", "x0".into()), ("imm", arg(1)?)]),
        "bnez" => ("bne", alloc::vec![("rs1", arg(0)?), ("rs2", "x0".into()), ("imm", arg(1)?)]),
        _ => return Err(err(line, alloc::format!("unknown mnemonic `{mnemonic}`"))),
    };
    let arity = match mnemonic {
        "nop" | "ret" => 0,
        "j" => 1,
        _ => 2,
    };
    if ops.len() != arity {
        return Err(err(line, alloc::format!("`{mnemonic}` takes {arity} operands")));
    }
    let id = isa
        .by_name(target)
        .ok_or_else(|| err(line, alloc::format!("`{mnemonic}` needs instruction `{target}` in the ISA")))?;
    let fields: Vec<(String, String)> = fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    encode_fields(isa.instruction(id), &fields, pc, symbols, line)
}

fn encode_fields(
    ins: &Instruction,
    fields: &[(String, String)],
    pc: u64,
    symbols: &BTreeMap<String, i128>,
    line: usize,
) -> Result<u32, AssembleError> {
    let mut values: Vec<(&str, u64)> = Vec::new();
    for op in &ins.encoding.operands {
        let text = fields
            .iter()
            .find(|(n, _)| *n == op.name)
            .map(|(_, t)| t.as_str())
            .ok_or_else(|| err(line, alloc::format!("missing operand `{}` for `{}`", op.name, ins.name)))?;
        let w = op.width();
        let raw: i128 = if op.register {
            register(text).ok_or_else(|| err(line, alloc::format!("`{text}` is not a register")))? as i128
        } else {
            let mut v = eval_expr(text, symbols, line)?;
            if op.pcrel {
                v -= pc as i128;
            }
            if op.scale > 0 {
                if v & ((1 << op.scale) - 1) != 0 {
                    return Err(err(
                        line,
                        alloc::format!("operand `{}` = {v} is not a multiple of {}", op.name, 1 << op.scale),
                    ));
                }
                v >>= op.scale;
            }
            v
        };
        let lo = if op.signed { -(1i128 << (w - 1)) } else { 0 };
        let hi = (1i128 << w) - 1;
        if raw < lo || raw > hi {
            return Err(err(line, alloc::format!("operand `{}` = {raw} out of range for {w} bits", op.name)));
        }
        values.push((op.name.as_str(), (raw & hi) as u64));
    }
    Ok(ins.encode(&values))
}
