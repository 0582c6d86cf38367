//! Merging of redundant nOP calls.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::nop::NopKind;

use super::graph::{Graph, Node, Op, ValueRef};

/// Deduplicates pure nodes with identical (op, statics, inputs), and register
/// reads of the same index with no register write ordered between them.
pub fn merge_redundant(g: &Graph) -> Graph {
    let mut nodes: Vec<Node> = Vec::with_capacity(g.len());
    let mut remap: Vec<usize> = Vec::with_capacity(g.len());
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut order = Vec::new();
    let mut writes = 0usize;
    for n in g.nodes() {
        let inputs: Vec<ValueRef> = n.inputs.iter().map(|v| ValueRef { node: remap[v.node], port: v.port }).collect();
        let key = match &n.op {
            Op::Literal(v) => Some(alloc::format!("lit {:x}:{}", v.value(), v.width())),
            Op::Pc => Some(String::from("pc")),
            Op::Nop(NopKind::RegRead) => Some(alloc::format!("rr@{writes}")),
            Op::Nop(NopKind::RegWrite) => {
                writes += 1;
                None
            }
            Op::Nop(k) if !n.op.is_effectful() => Some(String::from(k.name())),
            Op::Custom(c) => Some(alloc::format!("custom {}", c.name)),
            Op::Fused(f) => Some(alloc::format!("fused {}", f.pattern.key)),
            _ => None,
        };
        let key = key.map(|mut k| {
            for s in &n.statics {
                let _ = write!(k, " s{s}");
            }
            for v in &inputs {
                let _ = write!(k, " {}.{}", v.node, v.port);
            }
            k
        });
        if let Some(k) = &key {
            if let Some(&existing) = seen.get(k) {
                remap.push(existing);
                continue;
            }
        }
        let id = nodes.len();
        if n.op.is_effectful() {
            order.push(id);
        }
        nodes.push(Node { op: n.op.clone(), statics: n.statics.clone(), inputs, widths: n.widths.clone() });
        if let Some(k) = key {
            seen.insert(k, id);
        }
        remap.push(id);
    }
    Graph::from_parts(g.name.clone(), nodes, order).expect("merging keeps the graph acyclic")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfg::graph::GraphBuilder;

    #[test]
    fn common_subexpression() {
        let mut b = GraphBuilder::new("cse");
        let x = b.input("a", 8);
        let y = b.input("b", 8);
        let p = b.nop(NopKind::Xor, &[x, y], &[]).unwrap();
        let q = b.nop(NopKind::Xor, &[x, y], &[]).unwrap();
        b.nop(NopKind::Add, &[p, q], &[]).unwrap();
        let g = merge_redundant(&b.finish_fragment().unwrap());
        assert_eq!(g.nodes().iter().filter(|n| n.op == Op::Nop(NopKind::Xor)).count(), 1);
        let add = g.nodes().iter().find(|n| n.op == Op::Nop(NopKind::Add)).unwrap();
        assert_eq!(add.inputs[0], add.inputs[1]);
    }

    fn reads(with_write: bool) -> usize {
        let mut b = GraphBuilder::new("rr");
        let rs = b.input("rs1", 5);
        let a = b.nop(NopKind::RegRead, &[rs], &[]).unwrap();
        if with_write {
            b.nop(NopKind::RegWrite, &[rs, a], &[]).unwrap();
        }
        let c = b.nop(NopKind::RegRead, &[rs], &[]).unwrap();
        b.nop(NopKind::Add, &[a, c], &[]).unwrap();
        let g = merge_redundant(&b.finish_fragment().unwrap());
        g.nodes().iter().filter(|n| n.op == Op::Nop(NopKind::RegRead)).count()
    }

    #[test]
    fn register_reads_merge_only_without_intervening_write() {
        assert_eq!(reads(false), 1);
        assert_eq!(reads(true), 2);
    }
}
