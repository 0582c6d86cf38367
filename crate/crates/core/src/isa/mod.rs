//! Instructions, instruction sets, the decoder and the ISA-level simulator.

mod asm;
pub mod rv64;
pub mod encoding;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

pub use asm::{assemble, AssembleError};
pub use encoding::{Encoding, EncodingError, FixedField, OperandField};

use crate::bitvec::BitVec;
use crate::dfg::{apply_fusion, fused_ops, merge_redundant, FusedOp, Graph, GraphError};
use crate::dsl::{self, Diagnostic};
use crate::nop::{EvalError, NopRegistry};
use crate::state::{MachineState, StateDelta};
use crate::timing::{collect_patterns, plan_fusion, MissingTiming, TimingTable};

/// PC value that ends ISA and uarch simulation.
pub const HALT_PC: u64 = 0xFFFF_FFFF_FFFF_FFFC;
/// Encoding of the built-in `halt` instruction (the RISC-V ECALL word).
pub const HALT_WORD: u32 = 0x0000_0073;
pub const HALT_NAME: &str = "halt";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IsaError {
    #[error("instruction `{name}` does not compile:\n{}", dsl::render(.diagnostics))]
    Compile { name: String, diagnostics: Vec<Diagnostic> },
    #[error("operands of `{name}` do not match its encoding (missing from encoding: {missing:?}; unused encoding fields: {extra:?})")]
    EncodingMismatch { name: String, missing: Vec<String>, extra: Vec<String> },
    #[error("encoding of `{name}`: {error}")]
    Encoding { name: String, error: EncodingError },
    #[error("instructions `{a}` and `{b}` both decode word {word:#010x}")]
    DecodeConflict { a: String, b: String, word: u32 },
    #[error("instruction `{0}` is defined twice")]
    DuplicateName(String),
    #[error("instruction `{name}`: {error}")]
    Graph { name: String, error: GraphError },
}

/// A compiled nOP function bound to its encoding.
#[derive(Debug, Clone)]
pub struct Instruction {
    pub name: String,
    pub graph: Graph,
    pub encoding: Encoding,
    /// Operand order of the assembly syntax, e.g. `rd, imm(rs1)`.
    pub syntax: String,
    pub source: String,
    /// For each graph operand, its index in `encoding.operands`.
    binding: Vec<usize>,
}

impl Instruction {
    /// Binds a compiled graph to an encoding, checking that operand names
    /// and widths agree.
    pub fn from_graph(graph: Graph, encoding: Encoding, source: String, syntax: Option<String>) -> Result<Self, IsaError> {
        let name = graph.name.clone();
        encoding.validate().map_err(|error| IsaError::Encoding { name: name.clone(), error })?;
        let ops = graph.operands();
        let missing: Vec<String> =
            ops.iter().filter(|(n, _)| encoding.operand(n).is_none()).map(|(n, _)| n.clone()).collect();
        let extra: Vec<String> = encoding
            .operands
            .iter()
            .filter(|o| !ops.iter().any(|(n, _)| *n == o.name))
            .map(|o| o.name.clone())
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(IsaError::EncodingMismatch { name, missing, extra });
        }
        let mut binding = Vec::with_capacity(ops.len());
        for (n, w) in &ops {
            let idx = encoding.operands.iter().position(|o| o.name == *n).unwrap();
            if encoding.operands[idx].width() != *w {
                return Err(IsaError::EncodingMismatch { name, missing: alloc::vec![n.clone()], extra: alloc::vec![n.clone()] });
            }
            binding.push(idx);
        }
        graph.validate(true).map_err(|error| IsaError::Graph { name: name.clone(), error })?;
        let syntax = syntax.unwrap_or_else(|| ops.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(", "));
        Ok(Instruction { name, graph, encoding, syntax, source, binding })
    }

    pub fn bind(&self, word: u32) -> Vec<BitVec> {
        self.binding
            .iter()
            .map(|&i| {
                let f = &self.encoding.operands[i];
                BitVec::from_u64(f.extract(word), f.width())
            })
            .collect()
    }

    /// Encodes raw field values by operand name.
    pub fn encode(&self, values: &[(&str, u64)]) -> u32 {
        self.encoding.encode(values)
    }

    /// Fused ops used by this instruction's graph.
    pub fn applied_patterns(&self) -> Vec<Arc<FusedOp>> {
        fused_ops(&self.graph)
    }

    pub fn is_fused(&self) -> bool {
        self.graph.fused_count() > 0
    }

    fn with_graph(&self, graph: Graph) -> Self {
        Instruction { graph, ..self.clone() }
    }
}

/// Compiles `source` against the operand widths of `encoding`.
pub fn instantiate_instruction(
    source: &str,
    encoding: Encoding,
    syntax: Option<String>,
    registry: &NopRegistry,
) -> Result<Instruction, IsaError> {
    let ast = dsl::parse(source).map_err(|diagnostics| IsaError::Compile { name: "?".into(), diagnostics })?;
    encoding.validate().map_err(|error| IsaError::Encoding { name: ast.name.clone(), error })?;
    let params: Vec<&str> = ast.params.iter().map(|(p, _)| p.as_str()).collect();
    let missing: Vec<String> =
        params.iter().filter(|p| encoding.operand(p).is_none()).map(|p| p.to_string()).collect();
    let extra: Vec<String> =
        encoding.operands.iter().filter(|o| !params.contains(&o.name.as_str())).map(|o| o.name.clone()).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(IsaError::EncodingMismatch { name: ast.name, missing, extra });
    }
    let widths: BTreeMap<String, u32> = encoding.operands.iter().map(|o| (o.name.clone(), o.width())).collect();
    let compiled = dsl::compile(&ast, &widths, registry)
        .map_err(|diagnostics| IsaError::Compile { name: ast.name.clone(), diagnostics })?;
    Instruction::from_graph(compiled.graph, encoding, source.to_string(), syntax)
}

/// The built-in halt instruction: jumps to [`HALT_PC`].
pub fn halt_instruction() -> Instruction {
    let src = alloc::format!("def {HALT_NAME}():\n    UPDATE_PC({HALT_PC:#x})\n");
    let enc = Encoding::new(alloc::vec![FixedField { hi: 31, lo: 0, value: HALT_WORD }], alloc::vec![]).unwrap();
    instantiate_instruction(&src, enc, None, &NopRegistry::new()).expect("halt compiles")
}

/// Index into [`Isa::instruction`]; the last index is the built-in halt.
pub type InstrId = usize;

/// An ordered, decodable set of instructions plus the fusion patterns
/// applied to them.
#[derive(Debug, Clone)]
pub struct Isa {
    instrs: Vec<Instruction>,
    halt: Instruction,
    patterns: Vec<Arc<FusedOp>>,
    matchers: Vec<(u32, u32)>,
}

impl Isa {
    pub fn new(instrs: Vec<Instruction>) -> Result<Self, IsaError> {
        let mut isa = Isa { instrs: Vec::new(), halt: halt_instruction(), patterns: Vec::new(), matchers: Vec::new() };
        isa.matchers.push(isa.halt.encoding.match_bits());
        for i in instrs {
            isa = isa.extend(i)?;
        }
        Ok(isa)
    }

    /// A new ISA with `instr` appended, re-checking decoder disjointness.
    pub fn extend(&self, instr: Instruction) -> Result<Self, IsaError> {
        if instr.name == HALT_NAME || self.by_name(&instr.name).is_some() {
            return Err(IsaError::DuplicateName(instr.name));
        }
        for other in self.instrs.iter().chain(core::iter::once(&self.halt)) {
            if let Some(word) = other.encoding.overlap_witness(&instr.encoding) {
                return Err(IsaError::DecodeConflict { a: other.name.clone(), b: instr.name.clone(), word });
            }
        }
        let mut next = self.clone();
        next.instrs.push(instr);
        next.rebuild_matchers();
        Ok(next)
    }

    fn rebuild_matchers(&mut self) {
        self.matchers = self.instrs.iter().chain(core::iter::once(&self.halt)).map(|i| i.encoding.match_bits()).collect();
    }

    /// Number of user instructions (the built-in halt is not counted).
    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instrs
    }

    pub fn instruction(&self, id: InstrId) -> &Instruction {
        if id == self.instrs.len() {
            &self.halt
        } else {
            &self.instrs[id]
        }
    }

    pub fn halt_id(&self) -> InstrId {
        self.instrs.len()
    }

    pub fn by_name(&self, name: &str) -> Option<InstrId> {
        if name == HALT_NAME {
            return Some(self.halt_id());
        }
        self.instrs.iter().position(|i| i.name == name)
    }

    /// Fusion patterns in force, in application order.
    pub fn patterns(&self) -> &[Arc<FusedOp>] {
        &self.patterns
    }

    /// Distinct fused ops that at least one instruction uses, by key.
    pub fn used_patterns(&self) -> Vec<Arc<FusedOp>> {
        let mut seen: BTreeMap<String, Arc<FusedOp>> = BTreeMap::new();
        for i in &self.instrs {
            for f in i.applied_patterns() {
                seen.entry(f.pattern.key.clone()).or_insert(f);
            }
        }
        seen.into_values().collect()
    }

    /// The unique instruction whose fixed fields match `word`.
    pub fn decode(&self, word: u32) -> Option<InstrId> {
        self.matchers.iter().position(|&(m, v)| word & m == v)
    }

    /// All instructions whose fixed fields match `word`; at most one for a
    /// well-formed ISA.
    pub fn decode_all(&self, word: u32) -> Vec<InstrId> {
        self.matchers.iter().enumerate().filter(|(_, &(m, v))| word & m == v).map(|(i, _)| i).collect()
    }

    /// Applies `f` to every instruction graph.
    pub fn map_graphs(&self, mut f: impl FnMut(&Graph) -> Graph) -> Self {
        let mut next = self.clone();
        next.instrs = self.instrs.iter().map(|i| i.with_graph(f(&i.graph))).collect();
        next
    }

    pub fn merge_redundant(&self) -> Self {
        self.map_graphs(merge_redundant)
    }

    /// Applies `patterns` greedily, in order, to every instruction.
    pub fn fuse_with(&self, patterns: &[Arc<FusedOp>]) -> Self {
        let mut next = self.map_graphs(|g| apply_fusion(g, patterns));
        next.patterns = patterns.to_vec();
        next
    }
}

/// Collects every pattern whose gain reaches `threshold` across the ISA and
/// applies them largest first to every instruction.
pub fn auto_fuse(isa: &Isa, threshold: f64, table: &TimingTable, max_size: usize) -> Result<Isa, MissingTiming> {
    let collected = collect_patterns(isa.instrs.iter().map(|i| &i.graph), threshold, table, max_size)?;
    let plan = plan_fusion(&collected, table)?;
    Ok(isa.fuse_with(&plan))
}

/// A bare-metal program: instruction memory, initial data and registers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub entry: u64,
    pub imem: BTreeMap<u64, u32>,
    pub data: BTreeMap<u64, u8>,
    pub regs: BTreeMap<usize, u64>,
}

impl Program {
    pub fn initial_state(&self) -> MachineState {
        let mut s = MachineState::new(self.entry);
        for (&a, &b) in &self.data {
            s.write_byte(a, b);
        }
        for (&r, &v) in &self.regs {
            s.set_reg(r, v);
        }
        s
    }

    pub fn fetch(&self, pc: u64) -> Option<u32> {
        self.imem.get(&pc).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Halted,
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("illegal instruction {word:?} at pc {pc:#x}")]
    Illegal { pc: u64, word: Option<u32> },
    #[error("at pc {pc:#x}: {error}")]
    Eval { pc: u64, error: EvalError },
    #[error("instruction at pc {pc:#x} did not update the PC")]
    NoPcUpdate { pc: u64 },
}

#[derive(Debug, Clone)]
pub struct IsaReport {
    pub state: MachineState,
    pub counts: BTreeMap<String, u64>,
    /// Executed instructions, excluding the final halt.
    pub executed: u64,
    pub termination: Termination,
    /// PCs in execution order when tracing was requested.
    pub trace: Option<Vec<u64>>,
}

/// Executes one instruction word at `state.pc`, returning its id and effects
/// without applying them.
pub fn step(isa: &Isa, prog: &Program, state: &MachineState) -> Result<(InstrId, StateDelta), SimError> {
    let pc = state.pc;
    let word = prog.fetch(pc).ok_or(SimError::Illegal { pc, word: None })?;
    let id = isa.decode(word).ok_or(SimError::Illegal { pc, word: Some(word) })?;
    let ins = isa.instruction(id);
    let delta = ins.graph.eval(&ins.bind(word), state).map_err(|error| SimError::Eval { pc, error })?;
    if delta.next_pc().is_none() {
        return Err(SimError::NoPcUpdate { pc });
    }
    Ok((id, delta))
}

/// Runs `prog` one instruction at a time until it reaches [`HALT_PC`] or
/// has executed `budget` instructions.
pub fn isa_simulate(isa: &Isa, prog: &Program, budget: u64, trace: bool) -> Result<IsaReport, SimError> {
    let mut state = prog.initial_state();
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut per_id = alloc::vec![0u64; isa.len() + 1];
    let mut executed = 0u64;
    let mut pcs = if trace { Some(Vec::new()) } else { None };
    let termination = loop {
        if state.pc == HALT_PC {
            break Termination::Halted;
        }
        if executed >= budget {
            break Termination::BudgetExceeded;
        }
        let (id, delta) = step(isa, prog, &state)?;
        if let Some(t) = pcs.as_mut() {
            t.push(state.pc);
        }
        state.apply_delta(&delta);
        if id != isa.halt_id() {
            per_id[id] += 1;
            executed += 1;
        }
    };
    for (id, &n) in per_id.iter().enumerate().take(isa.len()) {
        if n > 0 {
            counts.insert(isa.instruction(id).name.clone(), n);
        }
    }
    Ok(IsaReport { state, counts, executed, termination, trace: pcs })
}
