//! Verification at three levels: single instructions against input/output
//! cases, programs on the ISA-level simulator, and programs on the
//! cycle-level simulator cross-checked against the ISA level.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::bitvec::BitVec;
use crate::dfg::Graph;
use crate::isa::{assemble, isa_simulate, Instruction, Isa, Program, Termination};
use crate::state::{Effect, MachineState, StateView, NUM_REGS};
use crate::timing::TimingTable;
use crate::uarch::{simulate, ProcessorConfig, SimOptions, SimStatus};

/// One expected outcome of executing an instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expect {
    Reg { index: usize, value: u64 },
    /// Little-endian bytes written starting at `addr`.
    Mem { addr: u64, bytes: Vec<u8> },
    Pc(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionTestCase {
    pub name: String,
    pub initial: MachineState,
    /// Operand values by operand name.
    pub operands: Vec<(String, u64)>,
    pub expect: Vec<Expect>,
}

/// A check on the final state of a program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assertion {
    Reg { index: usize, value: u64 },
    Mem { addr: u64, bytes: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramTestCase {
    pub name: String,
    pub source: String,
    /// Extra initial memory contents.
    pub data: Vec<(u64, Vec<u8>)>,
    pub assertions: Vec<Assertion>,
    /// Instruction budget for the ISA level.
    pub max_instructions: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    /// `x5`, `mem[0x1000]`, `pc` or `cosim x5`.
    pub field: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseResult {
    pub name: String,
    pub mismatches: Vec<Mismatch>,
    /// Set when the case could not be run to completion.
    pub error: Option<String>,
    /// Cycles at the processor level.
    pub cycles: Option<u64>,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.mismatches.is_empty()
    }

    fn failed(name: &str, error: impl ToString) -> CaseResult {
        CaseResult { name: name.into(), mismatches: Vec::new(), error: Some(error.to_string()), cycles: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub cases: Vec<CaseResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(CaseResult::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseResult> {
        self.cases.iter().filter(|c| !c.passed())
    }
}

fn hex(v: u64) -> String {
    alloc::format!("{v:#x}")
}

fn mismatch(field: String, expected: String, actual: String) -> Mismatch {
    Mismatch { field, expected, actual }
}

/// Runs one case against a graph. Every register, memory byte and PC
/// written must be expected, and every expectation must be met.
pub fn run_graph_case(graph: &Graph, case: &InstructionTestCase) -> CaseResult {
    let mut args = Vec::new();
    for (name, width) in graph.operands() {
        let Some((_, v)) = case.operands.iter().find(|(n, _)| *n == name) else {
            return CaseResult::failed(&case.name, alloc::format!("operand `{name}` is not bound"));
        };
        // Negative values written as sign-extended 64-bit words are accepted.
        let negative = width < 64 && (*v as i64) < 0 && (*v as i64) >> (width - 1) == -1;
        if width < 64 && *v >> width != 0 && !negative {
            return CaseResult::failed(&case.name, alloc::format!("operand `{name}` = {v:#x} does not fit {width} bits"));
        }
        args.push(BitVec::from_u64(*v, width));
    }
    let delta = match graph.eval(&args, &case.initial) {
        Ok(d) => d,
        Err(e) => return CaseResult::failed(&case.name, e),
    };
    let mut regs: BTreeMap<usize, u64> = BTreeMap::new();
    let mut mem: BTreeMap<u64, u8> = BTreeMap::new();
    let mut pc = None;
    for e in delta.effects() {
        match *e {
            Effect::RegWrite { index, value } => {
                if index != 0 {
                    regs.insert(index as usize, value.as_u64());
                }
            }
            Effect::MemWrite { addr, bytes, value } => {
                for i in 0..bytes as u64 {
                    mem.insert(addr.wrapping_add(i), (value.value() >> (8 * i)) as u8);
                }
            }
            Effect::PcUpdate(v) => pc = Some(v.as_u64()),
        }
    }
    let mut out = Vec::new();
    let mut want_regs = BTreeMap::new();
    let mut want_mem = BTreeMap::new();
    for x in &case.expect {
        match x {
            Expect::Reg { index, value } => {
                want_regs.insert(*index, *value);
            }
            Expect::Mem { addr, bytes } => {
                for (i, b) in bytes.iter().enumerate() {
                    want_mem.insert(addr.wrapping_add(i as u64), *b);
                }
            }
            Expect::Pc(p) => {
                if pc != Some(*p) {
                    out.push(mismatch("pc".into(), hex(*p), pc.map_or("not written".into(), hex)));
                }
            }
        }
    }
    let show = |v: Option<u64>| v.map_or("not written".into(), hex);
    let reg_keys: alloc::collections::BTreeSet<usize> = want_regs.keys().chain(regs.keys()).copied().collect();
    for r in reg_keys {
        let (w, a) = (want_regs.get(&r).copied(), regs.get(&r).copied());
        if r == 0 {
            // Writes to x0 are discarded, so only a non-zero expectation fails.
            if let Some(v) = w.filter(|v| *v != 0) {
                out.push(mismatch("x0".into(), hex(v), hex(0)));
            }
        } else if w != a {
            out.push(mismatch(alloc::format!("x{r}"), show(w), show(a)));
        }
    }
    let mem_keys: alloc::collections::BTreeSet<u64> = want_mem.keys().chain(mem.keys()).copied().collect();
    for m in mem_keys {
        let (w, a) = (want_mem.get(&m), mem.get(&m));
        if w != a {
            out.push(mismatch(
                alloc::format!("mem[{m:#x}]"),
                w.map_or("not written".into(), |b| alloc::format!("{b:#04x}")),
                a.map_or("not written".into(), |b| alloc::format!("{b:#04x}")),
            ));
        }
    }
    CaseResult { name: case.name.clone(), mismatches: out, error: None, cycles: None }
}

/// Checks an instruction's behaviour against input/output cases.
pub fn verify_instruction(instr: &Instruction, cases: &[InstructionTestCase]) -> Report {
    Report { cases: cases.iter().map(|c| run_graph_case(&instr.graph, c)).collect() }
}

/// Assembles a case and loads its extra data.
pub fn load_case(isa: &Isa, case: &ProgramTestCase) -> Result<Program, String> {
    let mut p = assemble(&case.source, isa).map_err(|e| e.to_string())?;
    for (addr, bytes) in &case.data {
        for (i, b) in bytes.iter().enumerate() {
            p.data.insert(addr.wrapping_add(i as u64), *b);
        }
    }
    Ok(p)
}

fn bad_register(assertions: &[Assertion]) -> Option<String> {
    assertions.iter().find_map(|a| match a {
        Assertion::Reg { index, .. } if *index >= NUM_REGS => Some(alloc::format!("register x{index} does not exist")),
        _ => None,
    })
}

fn check_assertions(state: &MachineState, assertions: &[Assertion]) -> Vec<Mismatch> {
    let mut out = Vec::new();
    for a in assertions {
        match a {
            Assertion::Reg { index, value } => {
                let got = state.reg(*index);
                if got != *value {
                    out.push(mismatch(alloc::format!("x{index}"), hex(*value), hex(got)));
                }
            }
            Assertion::Mem { addr, bytes } => {
                for (i, b) in bytes.iter().enumerate() {
                    let at = addr.wrapping_add(i as u64);
                    let got = state.mem_byte(at);
                    if got != *b {
                        out.push(mismatch(alloc::format!("mem[{at:#x}]"), alloc::format!("{b:#04x}"), alloc::format!("{got:#04x}")));
                    }
                }
            }
        }
    }
    out
}

fn isa_final_state(isa: &Isa, prog: &Program, budget: u64) -> Result<MachineState, String> {
    let r = isa_simulate(isa, prog, budget, false).map_err(|e| e.to_string())?;
    match r.termination {
        Termination::Halted => Ok(r.state),
        Termination::BudgetExceeded => Err(alloc::format!("did not halt within {budget} instructions")),
    }
}

/// Runs one program on the ISA-level simulator and checks its assertions.
pub fn run_isa_case(isa: &Isa, case: &ProgramTestCase) -> CaseResult {
    if let Some(e) = bad_register(&case.assertions) {
        return CaseResult::failed(&case.name, e);
    }
    let prog = match load_case(isa, case) {
        Ok(p) => p,
        Err(e) => return CaseResult::failed(&case.name, e),
    };
    match isa_final_state(isa, &prog, case.max_instructions) {
        Ok(s) => CaseResult { name: case.name.clone(), mismatches: check_assertions(&s, &case.assertions), error: None, cycles: None },
        Err(e) => CaseResult::failed(&case.name, e),
    }
}

pub fn verify_isa(isa: &Isa, cases: &[ProgramTestCase]) -> Report {
    Report { cases: cases.iter().map(|c| run_isa_case(isa, c)).collect() }
}

/// Runs one program on the cycle-level simulator, checks its assertions and
/// compares the final state with the ISA level.
pub fn run_processor_case(
    isa: &Isa,
    cfg: &ProcessorConfig,
    table: &TimingTable,
    opts: &SimOptions,
    case: &ProgramTestCase,
) -> CaseResult {
    if let Some(e) = bad_register(&case.assertions) {
        return CaseResult::failed(&case.name, e);
    }
    let prog = match load_case(isa, case) {
        Ok(p) => p,
        Err(e) => return CaseResult::failed(&case.name, e),
    };
    let r = match simulate(isa, &prog, cfg, table, opts) {
        Ok(r) => r,
        Err(e) => return CaseResult::failed(&case.name, e),
    };
    if r.status != SimStatus::Halted {
        return CaseResult::failed(&case.name, alloc::format!("did not halt within {} cycles", opts.max_cycles));
    }
    let mut mismatches = check_assertions(&r.state, &case.assertions);
    match isa_final_state(isa, &prog, case.max_instructions) {
        Ok(want) => mismatches.extend(state_diff(&want, &r.state).into_iter().map(|mut m| {
            m.field.insert_str(0, "cosim ");
            m
        })),
        Err(e) => return CaseResult::failed(&case.name, alloc::format!("ISA reference: {e}")),
    }
    CaseResult { name: case.name.clone(), mismatches, error: None, cycles: Some(r.cycles) }
}

pub fn verify_processor(
    isa: &Isa,
    cfg: &ProcessorConfig,
    table: &TimingTable,
    opts: &SimOptions,
    cases: &[ProgramTestCase],
) -> Result<Report, crate::uarch::ConfigError> {
    cfg.validate()?;
    Ok(Report { cases: cases.iter().map(|c| run_processor_case(isa, cfg, table, opts, c)).collect() })
}

/// Architectural differences, `want` against `got`. Memory bytes holding
/// zero are treated as untouched.
pub fn state_diff(want: &MachineState, got: &MachineState) -> Vec<Mismatch> {
    let mut out = Vec::new();
    if want.pc != got.pc {
        out.push(mismatch("pc".into(), hex(want.pc), hex(got.pc)));
    }
    for i in 0..want.regs().len() {
        if want.regs()[i] != got.regs()[i] {
            out.push(mismatch(alloc::format!("x{i}"), hex(want.regs()[i]), hex(got.regs()[i])));
        }
    }
    let addrs: alloc::collections::BTreeSet<u64> = want.memory().keys().chain(got.memory().keys()).copied().collect();
    for a in addrs {
        let (w, g) = (want.mem_byte(a), got.mem_byte(a));
        if w != g {
            out.push(mismatch(alloc::format!("mem[{a:#x}]"), alloc::format!("{w:#04x}"), alloc::format!("{g:#04x}")));
        }
    }
    out
}
