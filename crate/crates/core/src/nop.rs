//! The nOP vocabulary: kinds, width rules and evaluation semantics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::bitvec::{mask, BitVec, MAX_WIDTH};
use crate::state::{Effect, StateView};

/// Width of a register index operand.
pub const REG_INDEX_WIDTH: u32 = 5;
/// Width of registers, addresses and the PC.
pub const XLEN: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Storage,
    Pc,
    Al,
}

/// Role of one positional argument of an nOP call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgRole {
    /// A dataflow operand.
    Data,
    /// A compile-time integer (width, byte count or bit index).
    Static,
}

use ArgRole::{Data as D, Static as S};

macro_rules! nop_kinds {
    ($( $variant:ident => $name:literal, $cat:ident, [$($role:ident),*]; )*) => {
        /// Every built-in nOP.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum NopKind {
            $($variant,)*
        }

        impl NopKind {
            pub const ALL: &'static [NopKind] = &[$(NopKind::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(NopKind::$variant => $name,)*
                }
            }

            pub fn category(self) -> Category {
                match self {
                    $(NopKind::$variant => Category::$cat,)*
                }
            }

            /// Positional argument layout as written in an nOP call.
            pub fn signature(self) -> &'static [ArgRole] {
                match self {
                    $(NopKind::$variant => &[$($role),*],)*
                }
            }
        }
    };
}

nop_kinds! {
    RegRead => "REG_READ", Storage, [D];
    RegWrite => "REG_WRITE", Storage, [D, D];
    MemRead => "MEM_READ", Storage, [D, S];
    MemWrite => "MEM_WRITE", Storage, [D, S, D];
    IncPc => "INC_PC", Pc, [D];
    UpdatePc => "UPDATE_PC", Pc, [D];
    CondUpdatePc => "COND_UPDATE_PC", Pc, [D, D, D];
    And => "AND", Al, [D, D];
    Or => "OR", Al, [D, D];
    Xor => "XOR", Al, [D, D];
    Not => "NOT", Al, [D];
    Add => "ADD", Al, [D, D];
    Sub => "SUB", Al, [D, D];
    SignedMul => "SIGNED_MUL", Al, [D, D];
    Sll => "SLL", Al, [D, D];
    Srl => "SRL", Al, [D, D];
    Sra => "SRA", Al, [D, D];
    Slice => "SLICE", Al, [D, S, S];
    Concat => "CONCAT", Al, [D, S, D, S];
    SignExtend => "SIGN_EXTEND", Al, [D, S, S];
    UnsignExtend => "UNSIGN_EXTEND", Al, [D, S, S];
    CmpGeS => "CMP_GE_S", Al, [D, D];
    CmpGeU => "CMP_GE_U", Al, [D, D];
    CmpGtS => "CMP_GT_S", Al, [D, D];
    CmpGtU => "CMP_GT_U", Al, [D, D];
    CmpLtS => "CMP_LT_S", Al, [D, D];
    CmpLtU => "CMP_LT_U", Al, [D, D];
    CmpLeS => "CMP_LE_S", Al, [D, D];
    CmpLeU => "CMP_LE_U", Al, [D, D];
    CmpNe => "CMP_NE", Al, [D, D];
    CmpEq => "CMP_EQ", Al, [D, D];
    CondAssign => "COND_ASSIGN", Al, [D, D, D];
}

impl NopKind {
    pub fn from_name(name: &str) -> Option<NopKind> {
        NopKind::ALL.iter().copied().find(|k| k.name() == name)
    }

    pub fn data_arity(self) -> usize {
        self.signature().iter().filter(|r| **r == ArgRole::Data).count()
    }

    pub fn static_arity(self) -> usize {
        self.signature().len() - self.data_arity()
    }

    /// Whether the node yields a value (writes and PC updates do not).
    pub fn has_output(self) -> bool {
        !matches!(
            self,
            NopKind::RegWrite | NopKind::MemWrite | NopKind::IncPc | NopKind::UpdatePc | NopKind::CondUpdatePc
        )
    }

    /// Operand order is irrelevant for canonicalization.
    pub fn is_commutative(self) -> bool {
        matches!(
            self,
            NopKind::And | NopKind::Or | NopKind::Xor | NopKind::Add | NopKind::CmpEq | NopKind::CmpNe
        )
    }

    pub fn is_compare(self) -> bool {
        matches!(
            self,
            NopKind::CmpGeS
                | NopKind::CmpGeU
                | NopKind::CmpGtS
                | NopKind::CmpGtU
                | NopKind::CmpLtS
                | NopKind::CmpLtU
                | NopKind::CmpLeS
                | NopKind::CmpLeU
                | NopKind::CmpNe
                | NopKind::CmpEq
        )
    }
}

impl fmt::Display for NopKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WidthError {
    #[error("{op}: expected {expected} data operands, got {got}")]
    Arity { op: String, expected: usize, got: usize },
    #[error("{op}: expected {expected} static arguments, got {got}")]
    StaticArity { op: String, expected: usize, got: usize },
    #[error("{op}: operand widths {a} and {b} must match")]
    Mismatch { op: String, a: u32, b: u32 },
    #[error("{op}: operand {slot} must be {expected} bits wide, got {got}")]
    Expected { op: String, slot: usize, expected: u32, got: u32 },
    #[error("{op}: {msg}")]
    Rule { op: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Width(#[from] WidthError),
    #[error("memory access of {0} bytes (expected 1, 2, 4 or 8)")]
    Memory(i64),
}

fn rule(kind: NopKind, msg: impl Into<String>) -> WidthError {
    WidthError::Rule { op: kind.name().into(), msg: msg.into() }
}

fn expect_width(kind: NopKind, slot: usize, expected: u32, got: u32) -> Result<(), WidthError> {
    if expected != got {
        return Err(WidthError::Expected { op: kind.name().into(), slot, expected, got });
    }
    Ok(())
}

fn same(kind: NopKind, a: u32, b: u32) -> Result<(), WidthError> {
    if a != b {
        return Err(WidthError::Mismatch { op: kind.name().into(), a, b });
    }
    Ok(())
}

fn static_width(kind: NopKind, v: i64, what: &str) -> Result<u32, WidthError> {
    if v < 1 || v > MAX_WIDTH as i64 {
        return Err(rule(kind, alloc::format!("{what} {v} out of range 1..=128")));
    }
    Ok(v as u32)
}

pub fn mem_bytes(kind: NopKind, v: i64) -> Result<u32, EvalError> {
    let _ = kind;
    match v {
        1 | 2 | 4 | 8 => Ok(v as u32),
        _ => Err(EvalError::Memory(v)),
    }
}

/// Output width of a built-in nOP, or `None` for kinds without an output.
///
/// `inputs` are the data-operand widths and `statics` the integer arguments,
/// each in call order.
pub fn infer_width(kind: NopKind, inputs: &[u32], statics: &[i64]) -> Result<Option<u32>, EvalError> {
    if inputs.len() != kind.data_arity() {
        return Err(WidthError::Arity { op: kind.name().into(), expected: kind.data_arity(), got: inputs.len() }.into());
    }
    if statics.len() != kind.static_arity() {
        return Err(WidthError::StaticArity {
            op: kind.name().into(),
            expected: kind.static_arity(),
            got: statics.len(),
        }
        .into());
    }
    use NopKind::*;
    let w = match kind {
        RegRead => {
            expect_width(kind, 0, REG_INDEX_WIDTH, inputs[0])?;
            Some(XLEN)
        }
        RegWrite => {
            expect_width(kind, 0, REG_INDEX_WIDTH, inputs[0])?;
            expect_width(kind, 1, XLEN, inputs[1])?;
            None
        }
        MemRead => {
            expect_width(kind, 0, XLEN, inputs[0])?;
            Some(8 * mem_bytes(kind, statics[0])?)
        }
        MemWrite => {
            expect_width(kind, 0, XLEN, inputs[0])?;
            let n = mem_bytes(kind, statics[0])?;
            if inputs[1] < 8 * n {
                return Err(rule(kind, alloc::format!("value of {} bits is narrower than {n} bytes", inputs[1])).into());
            }
            None
        }
        IncPc | UpdatePc => {
            expect_width(kind, 0, XLEN, inputs[0])?;
            None
        }
        CondUpdatePc => {
            expect_width(kind, 0, 1, inputs[0])?;
            expect_width(kind, 1, XLEN, inputs[1])?;
            expect_width(kind, 2, XLEN, inputs[2])?;
            None
        }
        And | Or | Xor | Add | Sub => {
            same(kind, inputs[0], inputs[1])?;
            Some(inputs[0])
        }
        Not => Some(inputs[0]),
        SignedMul => {
            let w = inputs[0] + inputs[1];
            if w > MAX_WIDTH {
                return Err(rule(kind, alloc::format!("product width {w} exceeds 128")).into());
            }
            Some(w)
        }
        Sll | Srl | Sra => Some(inputs[0]),
        Slice => {
            let (hi, lo) = (statics[0], statics[1]);
            if lo < 0 || hi < lo {
                return Err(rule(kind, alloc::format!("bit range [{hi}:{lo}] is empty or negative")).into());
            }
            if hi >= inputs[0] as i64 {
                return Err(rule(kind, alloc::format!("bit {hi} outside a {}-bit operand", inputs[0])).into());
            }
            Some((hi - lo + 1) as u32)
        }
        Concat => {
            let hw = static_width(kind, statics[0], "high width")?;
            let lw = static_width(kind, statics[1], "low width")?;
            if hw > inputs[0] {
                return Err(rule(kind, alloc::format!("declared {hw} bits but high operand has {}", inputs[0])).into());
            }
            if lw > inputs[1] {
                return Err(rule(kind, alloc::format!("declared {lw} bits but low operand has {}", inputs[1])).into());
            }
            if hw + lw > MAX_WIDTH {
                return Err(rule(kind, "result wider than 128 bits").into());
            }
            Some(hw + lw)
        }
        SignExtend | UnsignExtend => {
            let from = static_width(kind, statics[0], "source width")?;
            let to = static_width(kind, statics[1], "target width")?;
            if from > inputs[0] {
                return Err(rule(kind, alloc::format!("declared {from} bits but operand has {}", inputs[0])).into());
            }
            if to < from {
                return Err(rule(kind, alloc::format!("target width {to} is narrower than source width {from}")).into());
            }
            Some(to)
        }
        CmpGeS | CmpGeU | CmpGtS | CmpGtU | CmpLtS | CmpLtU | CmpLeS | CmpLeU | CmpNe | CmpEq => {
            same(kind, inputs[0], inputs[1])?;
            Some(1)
        }
        CondAssign => {
            expect_width(kind, 0, 1, inputs[0])?;
            same(kind, inputs[1], inputs[2])?;
            Some(inputs[1])
        }
    };
    Ok(w)
}

/// Evaluates a pure arithmetic/logic nOP.
///
/// Widths are assumed to satisfy [`infer_width`]; callers that cannot
/// guarantee that should go through [`eval_nop`].
pub fn eval_al(kind: NopKind, x: &[BitVec], s: &[i64]) -> BitVec {
    use NopKind::*;
    let w = x[0].width();
    let bin = |v: u128| BitVec::from_u128(v, w);
    match kind {
        And => bin(x[0].value() & x[1].value()),
        Or => bin(x[0].value() | x[1].value()),
        Xor => bin(x[0].value() ^ x[1].value()),
        Not => bin(!x[0].value()),
        Add => bin(x[0].value().wrapping_add(x[1].value())),
        Sub => bin(x[0].value().wrapping_sub(x[1].value())),
        SignedMul => {
            let ow = w + x[1].width();
            BitVec::from_i128(x[0].as_signed().wrapping_mul(x[1].as_signed()), ow)
        }
        Sll => {
            let amt = x[1].value();
            if amt >= w as u128 { bin(0) } else { bin(x[0].value() << amt) }
        }
        Srl => {
            let amt = x[1].value();
            if amt >= w as u128 { bin(0) } else { bin(x[0].value() >> amt) }
        }
        Sra => {
            let amt = x[1].value().min(w as u128 - 1) as u32;
            BitVec::from_i128(x[0].as_signed() >> amt, w)
        }
        Slice => {
            let (hi, lo) = (s[0] as u32, s[1] as u32);
            BitVec::from_u128(x[0].value() >> lo, hi - lo + 1)
        }
        Concat => {
            let (hw, lw) = (s[0] as u32, s[1] as u32);
            let hi = x[0].value() & mask(hw);
            let lo = x[1].value() & mask(lw);
            BitVec::from_u128((hi << lw) | lo, hw + lw)
        }
        SignExtend => x[0].truncate(s[0] as u32).sign_extend(s[1] as u32),
        UnsignExtend => x[0].truncate(s[0] as u32).zero_extend(s[1] as u32),
        CmpGeS => BitVec::bool(x[0].as_signed() >= x[1].as_signed()),
        CmpGeU => BitVec::bool(x[0].value() >= x[1].value()),
        CmpGtS => BitVec::bool(x[0].as_signed() > x[1].as_signed()),
        CmpGtU => BitVec::bool(x[0].value() > x[1].value()),
        CmpLtS => BitVec::bool(x[0].as_signed() < x[1].as_signed()),
        CmpLtU => BitVec::bool(x[0].value() < x[1].value()),
        CmpLeS => BitVec::bool(x[0].as_signed() <= x[1].as_signed()),
        CmpLeU => BitVec::bool(x[0].value() <= x[1].value()),
        CmpNe => BitVec::bool(x[0] != x[1]),
        CmpEq => BitVec::bool(x[0] == x[1]),
        CondAssign => {
            if x[0].value() == 1 { x[1] } else { x[2] }
        }
        RegRead | RegWrite | MemRead | MemWrite | IncPc | UpdatePc | CondUpdatePc => {
            panic!("{kind} is not an arithmetic/logic nOP")
        }
    }
}

/// Result of evaluating one nOP: an optional value plus the effects it emits.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NopOutcome {
    pub value: Option<BitVec>,
    pub effects: Vec<Effect>,
}

/// Evaluates any built-in nOP against `state`.
pub fn eval_nop<S: StateView + ?Sized>(
    kind: NopKind,
    inputs: &[BitVec],
    statics: &[i64],
    state: &S,
) -> Result<NopOutcome, EvalError> {
    let widths: Vec<u32> = inputs.iter().map(|v| v.width()).collect();
    infer_width(kind, &widths, statics)?;
    use NopKind::*;
    let out = match kind {
        RegRead => NopOutcome {
            value: Some(BitVec::from_u64(state.reg(inputs[0].value() as usize), XLEN)),
            effects: Vec::new(),
        },
        RegWrite => {
            let index = inputs[0].value() as u8;
            let effects = if index == 0 {
                Vec::new()
            } else {
                alloc::vec![Effect::RegWrite { index, value: inputs[1] }]
            };
            NopOutcome { value: None, effects }
        }
        MemRead => {
            let n = statics[0] as usize;
            let addr = inputs[0].as_u64();
            let mut v = 0u128;
            for i in 0..n {
                v |= (state.mem_byte(addr.wrapping_add(i as u64)) as u128) << (8 * i);
            }
            NopOutcome { value: Some(BitVec::from_u128(v, 8 * n as u32)), effects: Vec::new() }
        }
        MemWrite => {
            let n = statics[0] as u32;
            NopOutcome {
                value: None,
                effects: alloc::vec![Effect::MemWrite {
                    addr: inputs[0].as_u64(),
                    bytes: n as u8,
                    value: inputs[1].truncate(8 * n),
                }],
            }
        }
        IncPc => NopOutcome {
            value: None,
            effects: alloc::vec![Effect::PcUpdate(BitVec::from_u64(inputs[0].as_u64().wrapping_add(4), XLEN))],
        },
        UpdatePc => NopOutcome { value: None, effects: alloc::vec![Effect::PcUpdate(inputs[0])] },
        CondUpdatePc => {
            let next = if inputs[0].value() == 1 {
                inputs[1]
            } else {
                BitVec::from_u64(inputs[2].as_u64().wrapping_add(4), XLEN)
            };
            NopOutcome { value: None, effects: alloc::vec![Effect::PcUpdate(next)] }
        }
        _ => NopOutcome { value: Some(eval_al(kind, inputs, statics)), effects: Vec::new() },
    };
    Ok(out)
}

/// A user-registered arithmetic/logic nOP.
///
/// Custom kinds are always pure; they can be fused, timed and emitted like
/// built-in AL kinds once registered together with a timing entry.
pub struct CustomNop {
    pub name: String,
    pub data_arity: usize,
    pub static_arity: usize,
    pub commutative: bool,
    pub width: fn(&[u32], &[i64]) -> Result<u32, WidthError>,
    pub eval: fn(&[BitVec], &[i64]) -> BitVec,
    /// Renders a right-hand side from operand expressions and static args.
    pub rtl: Option<fn(&[String], &[i64]) -> String>,
}

impl CustomNop {
    pub fn signature(&self) -> Vec<ArgRole> {
        let mut v = alloc::vec![ArgRole::Data; self.data_arity];
        v.extend(core::iter::repeat_n(ArgRole::Static, self.static_arity));
        v
    }
}

impl fmt::Debug for CustomNop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomNop")
            .field("name", &self.name)
            .field("data_arity", &self.data_arity)
            .field("static_arity", &self.static_arity)
            .finish()
    }
}

impl PartialEq for CustomNop {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl Eq for CustomNop {}

/// Resolves nOP names, including registered custom kinds.
#[derive(Debug, Clone, Default)]
pub struct NopRegistry {
    custom: BTreeMap<String, Arc<CustomNop>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NopRef {
    Builtin(NopKind),
    Custom(Arc<CustomNop>),
}

impl NopRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a custom kind. Fails if the name shadows an existing kind.
    pub fn register(&mut self, nop: CustomNop) -> Result<Arc<CustomNop>, String> {
        if NopKind::from_name(&nop.name).is_some() || self.custom.contains_key(&nop.name) {
            return Err(alloc::format!("nOP `{}` is already defined", nop.name));
        }
        let nop = Arc::new(nop);
        self.custom.insert(nop.name.clone(), nop.clone());
        Ok(nop)
    }

    pub fn lookup(&self, name: &str) -> Option<NopRef> {
        NopKind::from_name(name)
            .map(NopRef::Builtin)
            .or_else(|| self.custom.get(name).cloned().map(NopRef::Custom))
    }

    pub fn custom(&self, name: &str) -> Option<&Arc<CustomNop>> {
        self.custom.get(name)
    }

    /// Every known name, built-ins first.
    pub fn names(&self) -> Vec<String> {
        NopKind::ALL
            .iter()
            .map(|k| String::from(k.name()))
            .chain(self.custom.keys().cloned())
            .collect()
    }
}
