//! Line-oriented text form of a graph, used for golden files.
//!
//! ```text
//! graph addi
//! node 0 input rd : 5
//! node 3 nop REG_READ : 64
//! node 5 nop SIGN_EXTEND 12 64 : 64
//! node 8 fused 1 320 4618 in:64;XOR:64(#0,#2);... : 64
//! edge 1 -> 3.0
//! order 3 7 8
//! ```
//!
//! Node ids are dense and topological; edges are `producer[.port] -> consumer.slot`
//! and appear grouped by consumer in slot order.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::bitvec::BitVec;
use crate::nop::{NopRef, NopRegistry};

use super::graph::{Graph, Node, Op, ValueRef};
use super::pattern::{FusedOp, Pattern};

pub fn dump(g: &Graph) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "graph {}", g.name);
    for (id, n) in g.nodes().iter().enumerate() {
        let _ = write!(s, "node {id} ");
        match &n.op {
            Op::Input(name) => {
                let _ = write!(s, "input {name}");
            }
            Op::Pc => s.push_str("pc"),
            Op::Literal(v) => {
                let _ = write!(s, "literal {:#x}", v.value());
            }
            Op::Nop(k) => {
                let _ = write!(s, "nop {}", k.name());
            }
            Op::Custom(c) => {
                let _ = write!(s, "custom {}", c.name);
            }
            Op::Fused(f) => {
                let _ = write!(s, "fused {} {} {} {}", f.latency, f.arrival_ps, f.area, f.pattern.key);
            }
        }
        for st in &n.statics {
            let _ = write!(s, " {st}");
        }
        s.push_str(" :");
        if n.widths.is_empty() {
            s.push_str(" -");
        }
        for (i, w) in n.widths.iter().enumerate() {
            let _ = write!(s, "{}{w}", if i == 0 { " " } else { "," });
        }
        s.push('\n');
    }
    for (id, n) in g.nodes().iter().enumerate() {
        for (slot, v) in n.inputs.iter().enumerate() {
            if v.port == 0 {
                let _ = writeln!(s, "edge {} -> {id}.{slot}", v.node);
            } else {
                let _ = writeln!(s, "edge {}.{} -> {id}.{slot}", v.node, v.port);
            }
        }
    }
    if !g.effect_order().is_empty() {
        s.push_str("order");
        for o in g.effect_order() {
            let _ = write!(s, " {o}");
        }
        s.push('\n');
    }
    s
}

fn parse_num<T: core::str::FromStr>(tok: &str, line: usize) -> Result<T, String> {
    tok.parse().map_err(|_| alloc::format!("line {line}: bad number `{tok}`"))
}

fn parse_port(tok: &str, line: usize) -> Result<(usize, u32), String> {
    match tok.split_once('.') {
        Some((a, b)) => Ok((parse_num(a, line)?, parse_num(b, line)?)),
        None => Ok((parse_num(tok, line)?, 0)),
    }
}

/// Parses [`dump`] output. Custom nOPs must be present in `registry`.
pub fn load(text: &str, registry: &NopRegistry) -> Result<Graph, String> {
    let mut name = String::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut edges: Vec<(usize, usize, ValueRef)> = Vec::new();
    let mut order = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "graph" => name = toks.get(1).copied().unwrap_or("").to_string(),
            "node" => {
                let colon = toks.iter().position(|t| *t == ":").ok_or(alloc::format!("line {ln}: missing `:`"))?;
                let id: usize = parse_num(toks.get(1).ok_or(alloc::format!("line {ln}: missing id"))?, ln)?;
                if id != nodes.len() {
                    return Err(alloc::format!("line {ln}: node ids must be dense and ascending"));
                }
                let head = &toks[2..colon];
                let widths: Vec<u32> = match toks.get(colon + 1) {
                    Some(&"-") | None => vec![],
                    Some(ws) => ws.split(',').map(|w| parse_num(w, ln)).collect::<Result<_, _>>()?,
                };
                let bad = || alloc::format!("line {ln}: malformed node");
                let (op, rest) = match *head.first().ok_or_else(bad)? {
                    "input" => (Op::Input(head.get(1).ok_or_else(bad)?.to_string()), &head[2..]),
                    "pc" => (Op::Pc, &head[1..]),
                    "literal" => {
                        let t = head.get(1).ok_or_else(bad)?;
                        let v = u128::from_str_radix(t.trim_start_matches("0x"), 16).map_err(|_| bad())?;
                        let w = *widths.first().ok_or_else(bad)?;
                        (Op::Literal(BitVec::new(v, w).map_err(|e| e.to_string())?), &head[2..])
                    }
                    "nop" | "custom" => {
                        let n = head.get(1).ok_or_else(bad)?;
                        let op = match registry.lookup(n) {
                            Some(NopRef::Builtin(k)) => Op::Nop(k),
                            Some(NopRef::Custom(c)) => Op::Custom(c),
                            None => return Err(alloc::format!("line {ln}: unknown nOP `{n}`")),
                        };
                        (op, &head[2..])
                    }
                    "fused" => {
                        if head.len() < 5 {
                            return Err(bad());
                        }
                        let pattern = Pattern::from_key(head[4], registry).map_err(|e| alloc::format!("line {ln}: {e}"))?;
                        let f = FusedOp {
                            pattern,
                            latency: parse_num(head[1], ln)?,
                            arrival_ps: parse_num(head[2], ln)?,
                            area: parse_num(head[3], ln)?,
                        };
                        (Op::Fused(Arc::new(f)), &head[5..])
                    }
                    other => return Err(alloc::format!("line {ln}: unknown node kind `{other}`")),
                };
                let statics = rest.iter().map(|t| parse_num(t, ln)).collect::<Result<Vec<i64>, _>>()?;
                nodes.push(Node { op, statics, inputs: vec![], widths });
            }
            "edge" => {
                if toks.len() != 4 || toks[2] != "->" {
                    return Err(alloc::format!("line {ln}: malformed edge"));
                }
                let (src, port) = parse_port(toks[1], ln)?;
                let (dst, slot) = parse_port(toks[3], ln)?;
                edges.push((dst, slot as usize, ValueRef { node: src, port }));
            }
            "order" => {
                order = toks[1..].iter().map(|t| parse_num(t, ln)).collect::<Result<_, _>>()?;
            }
            other => return Err(alloc::format!("line {ln}: unknown directive `{other}`")),
        }
    }
    edges.sort_by_key(|(d, s, _)| (*d, *s));
    for (dst, slot, v) in edges {
        let node = nodes.get_mut(dst).ok_or(alloc::format!("edge into missing node {dst}"))?;
        if node.inputs.len() != slot {
            return Err(alloc::format!("node {dst}: input slots must be contiguous"));
        }
        node.inputs.push(v);
    }
    let g = Graph::from_parts(name, nodes, order).map_err(|e| e.to_string())?;
    g.validate(false).map_err(|e| e.to_string())?;
    Ok(g)
}
