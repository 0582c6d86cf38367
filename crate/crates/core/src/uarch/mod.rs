//! Cycle-level out-of-order processor model scheduling individual nOPs.
//!
//! Fetch follows BTB predictions (not taken on a miss) into a fetch buffer.
//! Decode expands each instruction into one micro-op per executing nOP or
//! fused op, renames register reads onto in-flight register writes and
//! allocates ROB, load- and store-queue entries. Micro-ops issue oldest
//! first to a free unit of their class once operands are ready: ALU for
//! unfused arithmetic nOPs, EXT for fused ops, AGU for memory nOPs and BJU
//! for PC updates. Register reads and writes go through renaming and take
//! no unit. Loads wait for every older store address and forward from a
//! fully covering older store; stores write memory at retire. A resolved
//! PC that differs from the fetched path flushes younger work and
//! restarts fetch after a fixed penalty. Retirement is in order, up to the
//! decode width per cycle.
//!
//! Instructions whose register indices depend on loaded or register values
//! cannot be renamed at decode; they wait for an empty ROB and execute as a
//! unit against the architectural state.

pub mod btb;
pub mod cache;
pub mod config;

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use btb::{Btb, Replacement};
pub use cache::{Cache, CacheStats, Geometry, Hierarchy, MemLatency};
pub use config::{ConfigError, ProcessorConfig};

use crate::bitvec::BitVec;
use crate::dfg::{Node, Op};
use crate::isa::{InstrId, Isa, Program, HALT_PC};
use crate::nop::{eval_al, EvalError, NopKind, XLEN};
use crate::state::{Effect, MachineState, StateDelta, StateView};
use crate::timing::{cycle_delay, DelayScope, MissingTiming, TimingTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub max_cycles: u64,
    /// Seed of the `random` BTB replacement policy.
    pub seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { max_cycles: 50_000_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimStatus {
    Halted,
    CycleBudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UarchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing timing entry `{0}`")]
    Timing(String),
    #[error("illegal instruction {word:?} retired at pc {pc:#x}")]
    Illegal { pc: u64, word: Option<u32> },
    #[error("at pc {pc:#x}: {error}")]
    Eval { pc: u64, error: EvalError },
    #[error("no instruction retired for {0} cycles")]
    Deadlock(u64),
}

impl From<MissingTiming> for UarchError {
    fn from(m: MissingTiming) -> Self {
        UarchError::Timing(m.0)
    }
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub cycles: u64,
    /// Retired instructions, excluding the final halt.
    pub retired: u64,
    /// Retired nOPs and fused ops.
    pub retired_nops: u64,
    pub mispredictions: u64,
    /// L1, L2, L3 statistics.
    pub cache: [CacheStats; 3],
    pub dram_accesses: u64,
    pub state: MachineState,
    pub status: SimStatus,
    pub counts: BTreeMap<String, u64>,
}

impl SimReport {
    pub fn ipc(&self) -> f64 {
        if self.cycles == 0 {
            0.0
        } else {
            self.retired as f64 / self.cycles as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Alu,
    Ext,
    Load(u32),
    Store(u32),
    Bju,
    /// Register write: copies its value, no unit, no latency.
    Move,
}

#[derive(Debug, Clone)]
enum Kind {
    Operand(usize),
    Literal(BitVec),
    Pc,
    RegRead,
    Exec(Class),
}

/// Per-instruction decode information, built once per simulation.
struct Template {
    kinds: Vec<Kind>,
    latency: Vec<u32>,
    /// Nodes evaluated at decode to learn register indices.
    cone: Vec<usize>,
    serial: bool,
    serial_latency: u32,
    loads: usize,
    stores: usize,
    nops: u64,
}

fn is_pure(op: &Op) -> bool {
    match op {
        Op::Input(_) | Op::Literal(_) | Op::Pc | Op::Custom(_) | Op::Fused(_) => true,
        Op::Nop(k) => k.category() == crate::nop::Category::Al,
    }
}

fn template(isa: &Isa, id: InstrId, table: &TimingTable) -> Result<Template, MissingTiming> {
    let g = &isa.instruction(id).graph;
    let mut kinds = Vec::with_capacity(g.len());
    let mut latency = Vec::with_capacity(g.len());
    let mut next_operand = 0;
    let (mut loads, mut stores, mut nops) = (0, 0, 0);
    let mut in_cone = vec![false; g.len()];
    for n in g.nodes() {
        let kind = match &n.op {
            Op::Input(_) => {
                next_operand += 1;
                Kind::Operand(next_operand - 1)
            }
            Op::Literal(v) => Kind::Literal(*v),
            Op::Pc => Kind::Pc,
            Op::Nop(NopKind::RegRead) => {
                in_cone[n.inputs[0].node] = true;
                Kind::RegRead
            }
            Op::Nop(NopKind::RegWrite) => {
                in_cone[n.inputs[0].node] = true;
                Kind::Exec(Class::Move)
            }
            Op::Nop(NopKind::MemRead) => {
                loads += 1;
                Kind::Exec(Class::Load(n.statics[0] as u32))
            }
            Op::Nop(NopKind::MemWrite) => {
                stores += 1;
                Kind::Exec(Class::Store(n.statics[0] as u32))
            }
            Op::Nop(k) if k.category() == crate::nop::Category::Pc => Kind::Exec(Class::Bju),
            Op::Nop(_) | Op::Custom(_) => Kind::Exec(Class::Alu),
            Op::Fused(_) => Kind::Exec(Class::Ext),
        };
        if matches!(n.op, Op::Nop(_) | Op::Custom(_) | Op::Fused(_)) {
            nops += 1;
        }
        latency.push(match kind {
            Kind::Exec(Class::Alu) | Kind::Exec(Class::Ext) | Kind::Exec(Class::Bju) => {
                table.node_cycles(&n.op)?.unwrap_or(1)
            }
            Kind::Exec(Class::Store(_)) => 1,
            _ => 0,
        });
        kinds.push(kind);
    }
    // Close the cone over data inputs, walking backwards in topological order.
    for i in (0..g.len()).rev() {
        if in_cone[i] {
            for v in &g.node(i).inputs {
                in_cone[v.node] = true;
            }
        }
    }
    let cone: Vec<usize> = (0..g.len()).filter(|&i| in_cone[i]).collect();
    let serial = cone.iter().any(|&i| !is_pure(&g.node(i).op));
    let serial_latency = if serial { cycle_delay(g, table, DelayScope::Full)? } else { 0 };
    Ok(Template { kinds, latency, cone, serial, serial_latency, loads, stores, nops })
}

fn eval_pure(n: &Node, args: &[BitVec]) -> Vec<BitVec> {
    match &n.op {
        Op::Nop(k) => vec![eval_al(*k, args, &n.statics)],
        Op::Custom(c) => vec![(c.eval)(args, &n.statics)],
        Op::Fused(f) => f.pattern.eval(args),
        _ => unreachable!("not a pure operation"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Src {
    Const(BitVec),
    Uop(u64, u32),
}

const NOT_DONE: u64 = u64::MAX;

struct Uop<'a> {
    class: Class,
    node: &'a Node,
    latency: u32,
    inputs: Vec<Src>,
    done_at: u64,
    values: Vec<BitVec>,
    /// Younger micro-ops of other instructions reading this one: (id, slot).
    consumers: Vec<(u64, usize)>,
    addr: u64,
}

enum Eff {
    Reg(u8, u64),
    Mem(u64),
    Pc(u64),
}

struct Entry {
    pc: u64,
    instr: Option<InstrId>,
    predicted: u64,
    first_uop: u64,
    end_uop: u64,
    effects: Vec<Eff>,
    reg_writes: Vec<(u8, u64)>,
    pc_uop: Option<u64>,
    resolved: bool,
    mispredicted: bool,
    serial: Option<(StateDelta, u64)>,
    fault: Option<UarchError>,
    loads: usize,
    stores: usize,
}

struct Fetched {
    pc: u64,
    word: Option<u32>,
    instr: Option<InstrId>,
    predicted: u64,
    cycle: u64,
}

struct Machine<'a> {
    isa: &'a Isa,
    prog: &'a Program,
    cfg: &'a ProcessorConfig,
    templates: &'a [Template],
    arch: MachineState,
    btb: Btb,
    mem: Hierarchy,
    fetch_pc: u64,
    fetch_resume: u64,
    fetch_stalled: bool,
    fbuf: VecDeque<Fetched>,
    rob: VecDeque<Entry>,
    uops: VecDeque<Uop<'a>>,
    uop_base: u64,
    pending: Vec<u64>,
    stores: Vec<u64>,
    rename: [Option<Src>; 32],
    lq_used: usize,
    sq_used: usize,
    serial_block: bool,
    retired: u64,
    retired_nops: u64,
    mispredictions: u64,
    counts: Vec<u64>,
}

/// Runs `prog` on the modelled processor until the halt instruction retires
/// or `opts.max_cycles` elapse.
pub fn simulate(
    isa: &Isa,
    prog: &Program,
    cfg: &ProcessorConfig,
    table: &TimingTable,
    opts: &SimOptions,
) -> Result<SimReport, UarchError> {
    cfg.validate()?;
    let templates = (0..=isa.len()).map(|id| template(isa, id, table)).collect::<Result<Vec<_>, _>>()?;
    let mut m = Machine {
        isa,
        prog,
        cfg,
        templates: &templates,
        arch: prog.initial_state(),
        btb: Btb::new(cfg.btb_size_bytes, cfg.btb_replace, opts.seed),
        mem: Hierarchy::new(cfg.l1(), cfg.l2(), cfg.l3(), cfg.mem_latency),
        fetch_pc: prog.entry,
        fetch_resume: 0,
        fetch_stalled: false,
        fbuf: VecDeque::new(),
        rob: VecDeque::new(),
        uops: VecDeque::new(),
        uop_base: 0,
        pending: Vec::new(),
        stores: Vec::new(),
        rename: [None; 32],
        lq_used: 0,
        sq_used: 0,
        serial_block: false,
        retired: 0,
        retired_nops: 0,
        mispredictions: 0,
        counts: vec![0; isa.len() + 1],
    };
    let mut last_retire = 0u64;
    let mut cycle = 0u64;
    let status = loop {
        if m.arch.pc == HALT_PC {
            break SimStatus::Halted;
        }
        if cycle >= opts.max_cycles {
            break SimStatus::CycleBudgetExceeded;
        }
        m.resolve(cycle);
        if m.retire(cycle)? {
            last_retire = cycle;
        }
        if m.arch.pc == HALT_PC {
            cycle += 1;
            break SimStatus::Halted;
        }
        m.issue(cycle);
        m.decode(cycle);
        m.fetch(cycle);
        if cycle - last_retire > 1_000_000 {
            return Err(UarchError::Deadlock(cycle - last_retire));
        }
        cycle += 1;
    };
    let mut counts = BTreeMap::new();
    for (id, &n) in m.counts.iter().enumerate().take(isa.len()) {
        if n > 0 {
            counts.insert(isa.instruction(id).name.clone(), n);
        }
    }
    Ok(SimReport {
        cycles: cycle,
        retired: m.retired,
        retired_nops: m.retired_nops,
        mispredictions: m.mispredictions,
        cache: m.mem.stats(),
        dram_accesses: m.mem.dram_accesses,
        state: m.arch,
        status,
        counts,
    })
}

impl<'a> Machine<'a> {
    fn uop(&self, id: u64) -> &Uop<'a> {
        &self.uops[(id - self.uop_base) as usize]
    }

    fn uop_mut(&mut self, id: u64) -> &mut Uop<'a> {
        &mut self.uops[(id - self.uop_base) as usize]
    }

    fn next_uop(&self) -> u64 {
        self.uop_base + self.uops.len() as u64
    }

    fn value(&self, s: Src) -> BitVec {
        match s {
            Src::Const(v) => v,
            Src::Uop(id, port) => self.uop(id).values[port as usize],
        }
    }

    fn available(&self, s: Src, cycle: u64) -> bool {
        match s {
            Src::Const(_) => true,
            Src::Uop(id, _) => self.uop(id).done_at <= cycle,
        }
    }

    fn fetch(&mut self, cycle: u64) {
        if cycle < self.fetch_resume || self.fetch_stalled {
            return;
        }
        for _ in 0..self.cfg.fetch_width {
            if self.fbuf.len() >= self.cfg.fetch_buffer_entries {
                break;
            }
            let pc = self.fetch_pc;
            let word = self.prog.fetch(pc);
            let instr = word.and_then(|w| self.isa.decode(w));
            if instr.is_none() {
                self.fbuf.push_back(Fetched { pc, word, instr, predicted: pc.wrapping_add(4), cycle });
                self.fetch_stalled = true;
                break;
            }
            let target = self.btb.lookup(pc);
            let predicted = target.unwrap_or(pc.wrapping_add(4));
            self.fbuf.push_back(Fetched { pc, word, instr, predicted, cycle });
            self.fetch_pc = predicted;
            if target.is_some() {
                break;
            }
        }
    }

    fn decode(&mut self, cycle: u64) {
        for _ in 0..self.cfg.decode_width {
            let Some(f) = self.fbuf.front() else { break };
            if f.cycle >= cycle || self.serial_block || self.rob.len() >= self.cfg.rob_entries {
                break;
            }
            let Some(id) = f.instr else {
                let f = self.fbuf.pop_front().unwrap();
                let at = self.next_uop();
                self.rob.push_back(Entry {
                    pc: f.pc,
                    instr: None,
                    predicted: f.predicted,
                    first_uop: at,
                    end_uop: at,
                    effects: Vec::new(),
                    reg_writes: Vec::new(),
                    pc_uop: None,
                    resolved: true,
                    mispredicted: false,
                    serial: None,
                    fault: Some(UarchError::Illegal { pc: f.pc, word: f.word }),
                    loads: 0,
                    stores: 0,
                });
                continue;
            };
            let templates = self.templates;
            let t = &templates[id];
            if self.lq_used + t.loads > self.cfg.lq_entries || self.sq_used + t.stores > self.cfg.sq_entries {
                break;
            }
            if t.serial && !self.rob.is_empty() {
                break;
            }
            let f = self.fbuf.pop_front().unwrap();
            let entry = if t.serial { self.decode_serial(f, id, cycle) } else { self.decode_one(f, id) };
            self.lq_used += entry.loads;
            self.sq_used += entry.stores;
            self.rob.push_back(entry);
        }
    }

    fn decode_serial(&mut self, f: Fetched, id: InstrId, cycle: u64) -> Entry {
        let ins = self.isa.instruction(id);
        let word = f.word.unwrap();
        let mut s = self.arch.clone();
        s.pc = f.pc;
        let at = self.next_uop();
        let (serial, fault) = match ins.graph.eval(&ins.bind(word), &s) {
            Ok(d) => (Some((d, cycle + self.templates[id].serial_latency as u64)), None),
            Err(error) => (None, Some(UarchError::Eval { pc: f.pc, error })),
        };
        self.serial_block = true;
        Entry {
            pc: f.pc,
            instr: Some(id),
            predicted: f.predicted,
            first_uop: at,
            end_uop: at,
            effects: Vec::new(),
            reg_writes: Vec::new(),
            pc_uop: None,
            resolved: fault.is_some(),
            mispredicted: false,
            serial,
            fault,
            loads: 0,
            stores: 0,
        }
    }

    fn decode_one(&mut self, f: Fetched, id: InstrId) -> Entry {
        let isa = self.isa;
        let ins = isa.instruction(id);
        let g = &ins.graph;
        let word = f.word.unwrap();
        let operands = ins.bind(word);
        let templates = self.templates;
        let t = &templates[id];
        // Decode-time values of the register-index cone.
        let mut known: Vec<Vec<BitVec>> = vec![Vec::new(); g.len()];
        for &i in &t.cone {
            let n = g.node(i);
            known[i] = match &t.kinds[i] {
                Kind::Operand(k) => vec![operands[*k]],
                Kind::Literal(v) => vec![*v],
                Kind::Pc => vec![BitVec::from_u64(f.pc, XLEN)],
                _ => {
                    let args: Vec<BitVec> = n.inputs.iter().map(|v| known[v.node][v.port as usize]).collect();
                    eval_pure(n, &args)
                }
            };
        }
        let first = self.next_uop();
        let mut src: Vec<Src> = vec![Src::Const(BitVec::zero(1)); g.len()];
        let mut effects = Vec::new();
        let mut reg_writes = Vec::new();
        let mut pc_uop = None;
        for (i, n) in g.nodes().iter().enumerate() {
            let resolve = |v: &crate::dfg::ValueRef, src: &[Src]| match src[v.node] {
                Src::Uop(id, _) => Src::Uop(id, v.port),
                c => c,
            };
            match &t.kinds[i] {
                Kind::Operand(k) => src[i] = Src::Const(operands[*k]),
                Kind::Literal(v) => src[i] = Src::Const(*v),
                Kind::Pc => src[i] = Src::Const(BitVec::from_u64(f.pc, XLEN)),
                Kind::RegRead => {
                    let r = known[n.inputs[0].node][n.inputs[0].port as usize].value() as usize;
                    src[i] = if r == 0 {
                        Src::Const(BitVec::zero(XLEN))
                    } else {
                        self.rename[r].unwrap_or(Src::Const(BitVec::from_u64(self.arch.reg(r), XLEN)))
                    };
                }
                Kind::Exec(class) => {
                    let uid = self.next_uop();
                    let inputs: Vec<Src> = n.inputs.iter().map(|v| resolve(v, &src)).collect();
                    for (slot, s) in inputs.iter().enumerate() {
                        if let Src::Uop(p, _) = *s {
                            if p < first {
                                self.uop_mut(p).consumers.push((uid, slot));
                            }
                        }
                    }
                    self.uops.push_back(Uop {
                        class: *class,
                        node: n,
                        latency: t.latency[i],
                        inputs,
                        done_at: NOT_DONE,
                        values: Vec::new(),
                        consumers: Vec::new(),
                        addr: 0,
                    });
                    self.pending.push(uid);
                    src[i] = Src::Uop(uid, 0);
                    match class {
                        Class::Move => {
                            let r = known[n.inputs[0].node][n.inputs[0].port as usize].value() as u8;
                            effects.push(Eff::Reg(r, uid));
                            if r != 0 {
                                self.rename[r as usize] = Some(Src::Uop(uid, 0));
                                reg_writes.push((r, uid));
                            }
                        }
                        Class::Store(_) => {
                            effects.push(Eff::Mem(uid));
                            self.stores.push(uid);
                        }
                        Class::Bju => {
                            effects.push(Eff::Pc(uid));
                            pc_uop = Some(uid);
                        }
                        _ => {}
                    }
                }
            }
        }
        Entry {
            pc: f.pc,
            instr: Some(id),
            predicted: f.predicted,
            first_uop: first,
            end_uop: self.next_uop(),
            effects,
            reg_writes,
            pc_uop,
            resolved: false,
            mispredicted: false,
            serial: None,
            fault: None,
            loads: t.loads,
            stores: t.stores,
        }
    }

    fn issue(&mut self, cycle: u64) {
        let mut free = [self.cfg.alu, self.cfg.ext, self.cfg.agu, self.cfg.bju];
        let mut i = 0;
        while i < self.pending.len() {
            let id = self.pending[i];
            let class = self.uop(id).class;
            let unit = match class {
                Class::Alu => Some(0),
                Class::Ext => Some(1),
                Class::Load(_) | Class::Store(_) => Some(2),
                Class::Bju => Some(3),
                Class::Move => None,
            };
            if unit.is_some_and(|u| free[u] == 0) || !self.uop(id).inputs.iter().all(|s| self.available(*s, cycle)) {
                i += 1;
                continue;
            }
            let args: Vec<BitVec> = self.uop(id).inputs.iter().map(|s| self.value(*s)).collect();
            let node = self.uop(id).node;
            let (values, latency, addr) = match class {
                Class::Move => (vec![args[1]], 0, 0),
                Class::Alu | Class::Ext => (eval_pure(node, &args), self.uop(id).latency, 0),
                Class::Bju => (vec![next_pc(node, &args)], self.uop(id).latency, 0),
                Class::Store(bytes) => (vec![args[1].truncate(8 * bytes)], 1, args[0].as_u64()),
                Class::Load(bytes) => match self.load(id, args[0].as_u64(), bytes) {
                    Some((v, lat)) => (vec![v], lat, args[0].as_u64()),
                    None => {
                        i += 1;
                        continue;
                    }
                },
            };
            if let Some(u) = unit {
                free[u] -= 1;
            }
            let u = self.uop_mut(id);
            u.values = values;
            u.done_at = cycle + latency as u64;
            u.addr = addr;
            self.pending.remove(i);
        }
    }

    /// Value and latency of a load, or `None` while an older store blocks it.
    fn load(&mut self, id: u64, addr: u64, bytes: u32) -> Option<(BitVec, u32)> {
        let (lo, hi) = (addr as u128, addr as u128 + bytes as u128);
        let mut youngest: Option<u64> = None;
        for &s in &self.stores {
            if s > id {
                break;
            }
            let st = self.uop(s);
            if st.done_at == NOT_DONE {
                return None;
            }
            let Class::Store(sb) = st.class else { unreachable!() };
            let (slo, shi) = (st.addr as u128, st.addr as u128 + sb as u128);
            if slo < hi && lo < shi {
                youngest = Some(s);
            }
        }
        if let Some(s) = youngest {
            let st = self.uop(s);
            let Class::Store(sb) = st.class else { unreachable!() };
            let (slo, shi) = (st.addr as u128, st.addr as u128 + sb as u128);
            if slo <= lo && hi <= shi {
                let shift = 8 * (lo - slo) as u32;
                let v = BitVec::from_u128(st.values[0].value() >> shift, 8 * bytes);
                return Some((v, self.cfg.forward_latency));
            }
            return None;
        }
        let v = self.arch.read_le(addr, bytes as usize);
        let lat = self.mem.access(addr, false);
        Some((BitVec::from_u128(v, 8 * bytes), lat))
    }

    fn resolve(&mut self, cycle: u64) {
        for k in 0..self.rob.len() {
            let e = &self.rob[k];
            if e.resolved {
                continue;
            }
            let actual = match (&e.serial, e.pc_uop) {
                (Some((d, done)), _) if *done <= cycle => d.next_pc().unwrap_or(e.pc.wrapping_add(4)),
                (None, Some(u)) if self.uop(u).done_at <= cycle => self.uop(u).values[0].as_u64(),
                _ => continue,
            };
            let e = &mut self.rob[k];
            e.resolved = true;
            if actual != e.predicted {
                e.mispredicted = true;
                self.flush_after(k);
                self.fetch_pc = actual;
                self.fetch_resume = cycle + self.cfg.redirect_penalty as u64;
                self.fetch_stalled = false;
                return;
            }
        }
    }

    fn flush_after(&mut self, k: usize) {
        let end = self.rob[k].end_uop;
        self.rob.truncate(k + 1);
        while self.next_uop() > end {
            self.uops.pop_back();
        }
        self.pending.retain(|&u| u < end);
        self.stores.retain(|&u| u < end);
        for u in self.uops.iter_mut() {
            u.consumers.retain(|(c, _)| *c < end);
        }
        self.fbuf.clear();
        self.lq_used = self.rob.iter().map(|e| e.loads).sum();
        self.sq_used = self.rob.iter().map(|e| e.stores).sum();
        self.serial_block = self.rob.iter().any(|e| e.serial.is_some());
        self.rename = [None; 32];
        for e in &self.rob {
            for &(r, u) in &e.reg_writes {
                self.rename[r as usize] = Some(Src::Uop(u, 0));
            }
        }
    }

    fn ready_to_retire(&self, e: &Entry, cycle: u64) -> bool {
        if e.fault.is_some() {
            return true;
        }
        if !e.resolved {
            return false;
        }
        if let Some((_, done)) = &e.serial {
            return *done <= cycle;
        }
        (e.first_uop..e.end_uop).all(|u| self.uop(u).done_at <= cycle)
    }

    /// Retires up to the decode width; true if anything retired.
    fn retire(&mut self, cycle: u64) -> Result<bool, UarchError> {
        let mut any = false;
        for _ in 0..self.cfg.decode_width {
            let Some(e) = self.rob.front() else { break };
            if !self.ready_to_retire(e, cycle) {
                break;
            }
            let e = self.rob.pop_front().unwrap();
            if let Some(f) = e.fault {
                return Err(f);
            }
            any = true;
            let id = e.instr.unwrap();
            if let Some((d, _)) = &e.serial {
                for eff in d.effects() {
                    if let Effect::MemWrite { addr, .. } = eff {
                        self.mem.access(*addr, true);
                    }
                }
                self.arch.apply_delta(d);
                self.serial_block = false;
            }
            for eff in &e.effects {
                match *eff {
                    Eff::Reg(r, u) => self.arch.set_reg(r as usize, self.uop(u).values[0].as_u64()),
                    Eff::Mem(u) => {
                        let st = self.uop(u);
                        let Class::Store(bytes) = st.class else { unreachable!() };
                        let (addr, v) = (st.addr, st.values[0].value());
                        self.arch.write_le(addr, bytes as usize, v);
                        self.mem.access(addr, true);
                    }
                    Eff::Pc(u) => self.arch.pc = self.uop(u).values[0].as_u64(),
                }
            }
            if self.arch.pc != e.pc.wrapping_add(4) && self.arch.pc != HALT_PC {
                self.btb.update(e.pc, self.arch.pc);
            }
            if id != self.isa.halt_id() {
                self.retired += 1;
                self.counts[id] += 1;
                if e.mispredicted {
                    self.mispredictions += 1;
                }
            }
            self.retired_nops += self.templates[id].nops;
            // Hand retired values to younger readers and drop the micro-ops.
            for u in e.first_uop..e.end_uop {
                let consumers = core::mem::take(&mut self.uop_mut(u).consumers);
                for (c, slot) in consumers {
                    if let Src::Uop(p, port) = self.uop(c).inputs[slot] {
                        let v = self.uop(p).values[port as usize];
                        self.uop_mut(c).inputs[slot] = Src::Const(v);
                    }
                }
            }
            for r in self.rename.iter_mut() {
                if let Some(Src::Uop(u, _)) = *r {
                    if u < e.end_uop {
                        *r = None;
                    }
                }
            }
            while self.uop_base < e.end_uop {
                self.uops.pop_front();
                self.uop_base += 1;
            }
            self.stores.retain(|&u| u >= e.end_uop);
            self.lq_used -= e.loads;
            self.sq_used -= e.stores;
            if self.arch.pc == HALT_PC {
                break;
            }
        }
        Ok(any)
    }
}

fn next_pc(node: &Node, args: &[BitVec]) -> BitVec {
    match node.op {
        Op::Nop(NopKind::IncPc) => BitVec::from_u64(args[0].as_u64().wrapping_add(4), XLEN),
        Op::Nop(NopKind::UpdatePc) => args[0],
        Op::Nop(NopKind::CondUpdatePc) => {
            if args[0].value() == 1 {
                args[1]
            } else {
                BitVec::from_u64(args[2].as_u64().wrapping_add(4), XLEN)
            }
        }
        _ => unreachable!("not a PC nOP"),
    }
}
