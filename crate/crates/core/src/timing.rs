//! Arrival-time/area tables, cycle delays and timing-aware pattern collection.
//!
//! Times are held as integer picoseconds so cycle counts come from exact
//! integer ceiling division.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::dfg::{enumerate_subgraphs, extract, FusedOp, Graph, Op, PatOp, Pattern};
use crate::nop::{Category, NopKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no timing entry for `{0}`")]
pub struct MissingTiming(pub String);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingEntry {
    pub arrival_ps: u64,
    pub area: f64,
}

impl TimingEntry {
    pub fn new(arrival_ns: f64, area: f64) -> Self {
        TimingEntry { arrival_ps: ns_to_ps(arrival_ns), area }
    }

    pub fn arrival_ns(&self) -> f64 {
        self.arrival_ps as f64 / 1000.0
    }
}

/// Largest pattern considered by [`collect_patterns`] unless overridden.
pub const DEFAULT_MAX_PATTERN_SIZE: usize = 4;

pub fn ns_to_ps(ns: f64) -> u64 {
    libm::round(ns * 1000.0) as u64
}

/// Fixed cycle latencies of storage and PC nOPs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedLatency {
    pub reg_read: u32,
    pub reg_write: u32,
    /// Memory nOPs outside the cache model (an L1 hit).
    pub mem: u32,
    pub pc: u32,
}

impl Default for FixedLatency {
    fn default() -> Self {
        FixedLatency { reg_read: 1, reg_write: 1, mem: 2, pc: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingTable {
    entries: BTreeMap<String, TimingEntry>,
    pub clock_ps: u64,
    pub fixed: FixedLatency,
}

impl TimingTable {
    pub fn new(cycle_ns: f64) -> Self {
        assert!(cycle_ns > 0.0, "cycle time must be positive");
        TimingTable { entries: BTreeMap::new(), clock_ps: ns_to_ps(cycle_ns), fixed: FixedLatency::default() }
    }

    pub fn insert(&mut self, name: impl Into<String>, entry: TimingEntry) {
        self.entries.insert(name.into(), entry);
    }

    pub fn get(&self, name: &str) -> Result<TimingEntry, MissingTiming> {
        self.entries.get(name).copied().ok_or_else(|| MissingTiming(name.into()))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &TimingEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn cycle_ns(&self) -> f64 {
        self.clock_ps as f64 / 1000.0
    }

    pub fn with_cycle_ns(mut self, cycle_ns: f64) -> Self {
        assert!(cycle_ns > 0.0, "cycle time must be positive");
        self.clock_ps = ns_to_ps(cycle_ns);
        self
    }

    /// Whole cycles needed to cover `ps`, at least one.
    pub fn cycles(&self, ps: u64) -> u32 {
        ps.div_ceil(self.clock_ps).max(1) as u32
    }

    fn pat_entry(&self, op: &PatOp) -> Result<TimingEntry, MissingTiming> {
        self.get(op.name())
    }

    /// Latency in cycles of one node, or `None` for nodes that take no time
    /// (operands, literals, the PC value).
    pub fn node_cycles(&self, op: &Op) -> Result<Option<u32>, MissingTiming> {
        Ok(match op {
            Op::Input(_) | Op::Pc | Op::Literal(_) => None,
            Op::Nop(k) => Some(match k.category() {
                Category::Al => self.cycles(self.get(k.name())?.arrival_ps),
                Category::Pc => self.fixed.pc,
                Category::Storage => match k {
                    NopKind::RegRead => self.fixed.reg_read,
                    NopKind::RegWrite => self.fixed.reg_write,
                    _ => self.fixed.mem,
                },
            }),
            Op::Custom(c) => Some(self.cycles(self.get(&c.name)?.arrival_ps)),
            Op::Fused(f) => Some(f.latency),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayScope {
    /// Only arithmetic/logic and fused nodes contribute; data edges only.
    Arithmetic,
    /// Storage and PC nodes add their fixed latencies; effect order counts.
    Full,
}

/// Longest path through `g` where each node costs its cycle latency.
pub fn cycle_delay(g: &Graph, table: &TimingTable, scope: DelayScope) -> Result<u32, MissingTiming> {
    let n = g.len();
    let mut finish = vec![0u32; n];
    let mut prev_effect: Option<usize> = None;
    for id in 0..n {
        let node = g.node(id);
        let mut start = node.inputs.iter().map(|v| finish[v.node]).max().unwrap_or(0);
        if scope == DelayScope::Full && node.op.is_effectful() {
            if let Some(p) = prev_effect {
                start = start.max(finish[p]);
            }
            prev_effect = Some(id);
        }
        let own = match node.op.category() {
            Some(Category::Storage | Category::Pc) if scope == DelayScope::Arithmetic => 0,
            _ => table.node_cycles(&node.op)?.unwrap_or(0),
        };
        finish[id] = start + own;
    }
    Ok(finish.into_iter().max().unwrap_or(0))
}

/// Critical-path figures of a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternDelay {
    /// Summed arrival time along the critical path.
    pub arrival_ps: u64,
    /// Sum of per-node cycle latencies along the critical path.
    pub init_cycles: u32,
    /// Cycles of the same path executed as one fused unit.
    pub opt_cycles: u32,
}

impl PatternDelay {
    pub fn gain(&self) -> f64 {
        1.0 - self.opt_cycles as f64 / self.init_cycles as f64
    }
}

/// The critical path is the maximum-arrival path; among equal arrivals the
/// one with more unfused cycles is taken.
pub fn pattern_delay(p: &Pattern, table: &TimingTable) -> Result<PatternDelay, MissingTiming> {
    let mut best: Vec<(u64, u32)> = vec![(0, 0); p.nodes.len()];
    for &i in p.topo_order() {
        let node = &p.nodes[i];
        let e = table.pat_entry(&node.op)?;
        let pred = node
            .args
            .iter()
            .filter_map(|a| match a {
                crate::dfg::PatArg::Node(k) => Some(best[*k]),
                _ => None,
            })
            .max()
            .unwrap_or((0, 0));
        best[i] = (pred.0 + e.arrival_ps, pred.1 + table.cycles(e.arrival_ps));
    }
    let (arrival_ps, init_cycles) = best.into_iter().max().unwrap_or((0, 0));
    Ok(PatternDelay { arrival_ps, init_cycles, opt_cycles: table.cycles(arrival_ps) })
}

pub fn pattern_gain(p: &Pattern, table: &TimingTable) -> Result<f64, MissingTiming> {
    Ok(pattern_delay(p, table)?.gain())
}

/// Timing entry of a pattern implemented as one unit: critical-path arrival
/// and the summed area of every member.
pub fn fused_entry(p: &Pattern, table: &TimingTable) -> Result<TimingEntry, MissingTiming> {
    let d = pattern_delay(p, table)?;
    let mut area = 0.0;
    for n in &p.nodes {
        area += table.pat_entry(&n.op)?.area;
    }
    Ok(TimingEntry { arrival_ps: d.arrival_ps, area })
}

pub fn fused_op(p: &Pattern, table: &TimingTable) -> Result<FusedOp, MissingTiming> {
    let e = fused_entry(p, table)?;
    Ok(FusedOp { pattern: p.clone(), latency: table.cycles(e.arrival_ps), arrival_ps: e.arrival_ps, area: e.area })
}

#[derive(Debug, Clone)]
pub struct Collected {
    pub pattern: Pattern,
    pub delay: PatternDelay,
}

impl Collected {
    pub fn gain(&self) -> f64 {
        self.delay.gain()
    }
}

/// Every distinct pattern (by canonical key) among the connected convex AL
/// subgraphs of `graphs` whose gain reaches `threshold`, ordered by key.
pub fn collect_patterns<'a>(
    graphs: impl IntoIterator<Item = &'a Graph>,
    threshold: f64,
    table: &TimingTable,
    max_size: usize,
) -> Result<Vec<Collected>, MissingTiming> {
    let mut found: BTreeMap<String, Collected> = BTreeMap::new();
    for g in graphs {
        for set in enumerate_subgraphs(g, max_size) {
            let inst = extract(g, &set);
            if found.contains_key(&inst.pattern.key) {
                continue;
            }
            let delay = pattern_delay(&inst.pattern, table)?;
            if delay.gain() >= threshold {
                found.insert(inst.pattern.key.clone(), Collected { pattern: inst.pattern, delay });
            }
        }
    }
    Ok(found.into_values().collect())
}

/// Fused ops in greedy application order: larger patterns first, then
/// higher gain, then key.
pub fn plan_fusion(collected: &[Collected], table: &TimingTable) -> Result<Vec<Arc<FusedOp>>, MissingTiming> {
    let mut v: Vec<&Collected> = collected.iter().collect();
    v.sort_by(|a, b| {
        b.pattern
            .size()
            .cmp(&a.pattern.size())
            .then(b.gain().total_cmp(&a.gain()))
            .then(a.pattern.key.cmp(&b.pattern.key))
    });
    v.into_iter().map(|c| fused_op(&c.pattern, table).map(Arc::new)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfg::GraphBuilder;

    fn table() -> TimingTable {
        let mut t = TimingTable::new(0.5);
        t.insert("XOR", TimingEntry::new(0.16, 2309.0));
        t.insert("NOT", TimingEntry::new(0.09, 1257.5));
        t.insert("UNSIGN_EXTEND", TimingEntry::new(0.09, 1037.5));
        t
    }

    fn xor_chain(n: usize) -> Graph {
        let mut b = GraphBuilder::new("x");
        let mut acc = b.input("a", 64);
        for i in 0..n {
            let k = b.input(alloc::format!("k{i}"), 64);
            acc = b.nop(NopKind::Xor, &[acc, k], &[]).unwrap();
        }
        b.finish_fragment().unwrap()
    }

    #[test]
    fn xor_chain_gain() {
        let g = xor_chain(3);
        let t = table();
        assert_eq!(cycle_delay(&g, &t, DelayScope::Arithmetic).unwrap(), 3);
        let all: Vec<usize> = (0..g.len()).filter(|i| g.node(*i).op.is_fusable()).collect();
        let p = extract(&g, &all).pattern;
        let d = pattern_delay(&p, &t).unwrap();
        assert_eq!((d.arrival_ps, d.init_cycles, d.opt_cycles), (480, 3, 1));
        assert!((d.gain() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn missing_entry_is_named() {
        let mut b = GraphBuilder::new("m");
        let a = b.input("a", 8);
        b.nop(NopKind::Add, &[a, a], &[]).unwrap();
        let g = b.finish_fragment().unwrap();
        assert_eq!(cycle_delay(&g, &table(), DelayScope::Arithmetic), Err(MissingTiming("ADD".into())));
    }

    #[test]
    fn threshold_is_monotone() {
        let g = xor_chain(4);
        let t = table();
        let lo = collect_patterns([&g], 0.0, &t, 4).unwrap();
        let hi = collect_patterns([&g], 0.6, &t, 4).unwrap();
        assert!(hi.len() < lo.len());
        assert!(hi.iter().all(|h| lo.iter().any(|l| l.pattern.key == h.pattern.key)));
        assert!(collect_patterns([&g], 0.99, &t, 4).unwrap().is_empty());
    }
}
