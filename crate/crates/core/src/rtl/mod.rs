//! Verilog text for fused functional units, and an interpreter for the
//! emitted subset used to check the text against the pattern.
//!
//! Each fused op becomes one combinational module: data inputs `in0..`,
//! literal parameters `P0..` as Verilog `parameter`s, one wire per pattern
//! node in evaluation order and outputs `out0..`.

mod interp;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

pub use interp::{parse_module, InterpError, Module};

use crate::dfg::{FusedOp, PatArg, PatOp, Pattern};
use crate::nop::{Category, NopKind};
use crate::state::Fnv;

/// Longest file stem before the key is shortened and hashed.
pub const MAX_FILE_STEM: usize = 120;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("`{name}` has {inputs} data inputs; at most {max} are supported")]
    TooManyInputs { name: String, inputs: usize, max: usize },
    #[error("`{0}` cannot be emitted as combinational logic")]
    UnsupportedKind(String),
    #[error("expected {expected} parameter values, got {got}")]
    Params { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitOptions {
    /// Data inputs a fused unit may take; literal parameters do not count.
    pub max_data_inputs: usize,
    /// Parameter defaults, for emitting one instantiation; zeros otherwise.
    pub params: Option<Vec<u64>>,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions { max_data_inputs: 2, params: None }
    }
}

fn hash_key(key: &str) -> u64 {
    let mut h = Fnv::default();
    h.write(key.as_bytes());
    h.finish()
}

/// Verilog module name: the pattern name plus a short key hash.
pub fn module_name(p: &Pattern) -> String {
    let mut s = String::from("fused_");
    s.extend(p.name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }));
    let _ = write!(s, "_{:08x}", hash_key(&p.key) as u32);
    s
}

/// File stem for a key: characters outside `[A-Za-z0-9_-]` become `_`;
/// long stems are cut and suffixed with a hash of the full key.
pub fn file_stem(key: &str) -> String {
    let s: String = key.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    if s.len() <= MAX_FILE_STEM {
        return s;
    }
    alloc::format!("{}_{:016x}", &s[..MAX_FILE_STEM - 17], hash_key(key))
}

fn range(w: u32) -> String {
    alloc::format!("[{}:0]", w - 1)
}

fn arg_name(a: &PatArg) -> String {
    match a {
        PatArg::Input(i) => alloc::format!("in{i}"),
        PatArg::Param(i) => alloc::format!("P{i}"),
        PatArg::Node(i) => alloc::format!("n{i}"),
    }
}

fn low_bits(name: &str, bits: u32, width: u32) -> String {
    if bits == width {
        name.to_string()
    } else {
        alloc::format!("{name}[{}:0]", bits - 1)
    }
}

/// Right-hand side for one pattern node.
fn node_expr(k: NopKind, args: &[String], widths: &[u32], statics: &[i64]) -> String {
    use NopKind::*;
    let (a, b) = (args.first().map(String::as_str).unwrap_or(""), args.get(1).map(String::as_str).unwrap_or(""));
    match k {
        And => alloc::format!("{a} & {b}"),
        Or => alloc::format!("{a} | {b}"),
        Xor => alloc::format!("{a} ^ {b}"),
        Not => alloc::format!("~{a}"),
        Add => alloc::format!("{a} + {b}"),
        Sub => alloc::format!("{a} - {b}"),
        SignedMul => alloc::format!("$signed({a}) * $signed({b})"),
        Sll => alloc::format!("{a} << {b}"),
        Srl => alloc::format!("{a} >> {b}"),
        Sra => alloc::format!("$signed({a}) >>> {b}"),
        Slice => alloc::format!("{a}[{}:{}]", statics[0], statics[1]),
        Concat => {
            let (hw, lw) = (statics[0] as u32, statics[1] as u32);
            alloc::format!("{{{}, {}}}", low_bits(a, hw, widths[0]), low_bits(b, lw, widths[1]))
        }
        SignExtend | UnsignExtend => {
            let (from, to) = (statics[0] as u32, statics[1] as u32);
            let src = low_bits(a, from, widths[0]);
            if to == from {
                src
            } else if k == SignExtend {
                alloc::format!("{{{{{}{{{a}[{}]}}}}, {src}}}", to - from, from - 1)
            } else {
                alloc::format!("{{{}'d0, {src}}}", to - from)
            }
        }
        CmpGeS => alloc::format!("$signed({a}) >= $signed({b})"),
        CmpGtS => alloc::format!("$signed({a}) > $signed({b})"),
        CmpLtS => alloc::format!("$signed({a}) < $signed({b})"),
        CmpLeS => alloc::format!("$signed({a}) <= $signed({b})"),
        CmpGeU => alloc::format!("{a} >= {b}"),
        CmpGtU => alloc::format!("{a} > {b}"),
        CmpLtU => alloc::format!("{a} < {b}"),
        CmpLeU => alloc::format!("{a} <= {b}"),
        CmpNe => alloc::format!("{a} != {b}"),
        CmpEq => alloc::format!("{a} == {b}"),
        CondAssign => alloc::format!("{a} ? {b} : {}", args[2]),
        RegRead | RegWrite | MemRead | MemWrite | IncPc | UpdatePc | CondUpdatePc => unreachable!(),
    }
}

/// Emits the module for `op`.
pub fn emit_fused_op(op: &FusedOp, opts: &EmitOptions) -> Result<String, EmitError> {
    let p = &op.pattern;
    if p.inputs.len() > opts.max_data_inputs {
        return Err(EmitError::TooManyInputs { name: p.name.clone(), inputs: p.inputs.len(), max: opts.max_data_inputs });
    }
    let defaults = match &opts.params {
        Some(v) if v.len() != p.params.len() => return Err(EmitError::Params { expected: p.params.len(), got: v.len() }),
        Some(v) => v.clone(),
        None => alloc::vec![0; p.params.len()],
    };
    let mut kinds = Vec::new();
    for n in &p.nodes {
        match &n.op {
            PatOp::Nop(k) if k.category() == Category::Al => kinds.push(*k),
            other => return Err(EmitError::UnsupportedKind(other.name().into())),
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "// {}: {} nodes, latency {} cycles", p.name, p.size(), op.latency);
    let _ = writeln!(s, "// key {}", p.key);
    let _ = write!(s, "module {}", module_name(p));
    if !p.params.is_empty() {
        s.push_str(" #(\n");
        for (i, (w, v)) in p.params.iter().zip(&defaults).enumerate() {
            let sep = if i + 1 < p.params.len() { "," } else { "" };
            let _ = writeln!(s, "    parameter {} P{i} = {w}'d{}{sep}", range(*w), *v as u128 & crate::bitvec::mask(*w));
        }
        s.push(')');
    }
    s.push_str(" (\n");
    let mut ports: Vec<String> = p.inputs.iter().enumerate().map(|(i, w)| alloc::format!("    input  wire {} in{i}", range(*w))).collect();
    ports.extend(p.output_widths().iter().enumerate().map(|(i, w)| alloc::format!("    output wire {} out{i}", range(*w))));
    s.push_str(&ports.join(",\n"));
    s.push_str("\n);\n");
    for &i in p.topo_order() {
        let n = &p.nodes[i];
        let args: Vec<String> = n.args.iter().map(arg_name).collect();
        let widths: Vec<u32> = n
            .args
            .iter()
            .map(|a| match *a {
                PatArg::Input(k) => p.inputs[k],
                PatArg::Param(k) => p.params[k],
                PatArg::Node(k) => p.nodes[k].width,
            })
            .collect();
        let rhs = node_expr(kinds[i], &args, &widths, &n.statics);
        let _ = writeln!(s, "    wire {} n{i} = {rhs};", range(n.width));
    }
    for (o, &i) in p.outputs.iter().enumerate() {
        let _ = writeln!(s, "    assign out{o} = n{i};");
    }
    s.push_str("endmodule\n");
    Ok(s)
}
