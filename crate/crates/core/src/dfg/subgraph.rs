//! Connected, convex subgraphs of fusable nodes.

use alloc::vec;
use alloc::vec::Vec;

use super::graph::{Graph, NodeId};

/// Dense bit set over node ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSet {
    words: Vec<u64>,
}

impl NodeSet {
    pub fn new(n: usize) -> Self {
        NodeSet { words: vec![0; n.div_ceil(64)] }
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn union_with(&mut self, other: &NodeSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    pub fn intersects(&self, other: &NodeSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }
}

/// Strict descendants of every node over data and effect-order edges.
pub fn reachability(g: &Graph) -> Vec<NodeSet> {
    let succ = g.successors();
    let n = g.len();
    let mut reach = vec![NodeSet::new(n); n];
    for id in (0..n).rev() {
        let mut r = NodeSet::new(n);
        for &s in &succ[id] {
            r.insert(s);
            r.union_with(&reach[s]);
        }
        reach[id] = r;
    }
    reach
}

/// True when no path leaves `set` and re-enters it.
pub fn is_convex(reach: &[NodeSet], set: &[NodeId]) -> bool {
    let n = reach.len();
    let mut members = NodeSet::new(n);
    let mut below = NodeSet::new(n);
    for &s in set {
        members.insert(s);
        below.union_with(&reach[s]);
    }
    (0..n).all(|x| members.contains(x) || !below.contains(x) || !reach[x].intersects(&members))
}

/// Undirected adjacency among fusable nodes through data edges.
fn fusable_adjacency(g: &Graph) -> Vec<Vec<NodeId>> {
    let mut adj = vec![Vec::new(); g.len()];
    for (id, n) in g.nodes().iter().enumerate() {
        if !n.op.is_fusable() {
            continue;
        }
        for v in &n.inputs {
            if g.node(v.node).op.is_fusable() && v.node != id {
                if !adj[id].contains(&v.node) {
                    adj[id].push(v.node);
                }
                if !adj[v.node].contains(&id) {
                    adj[v.node].push(id);
                }
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    adj
}

/// Every connected convex set of 2..=`max_size` fusable nodes, each once,
/// as sorted id lists in ascending lexicographic order.
pub fn enumerate_subgraphs(g: &Graph, max_size: usize) -> Vec<Vec<NodeId>> {
    enumerate_sized(g, 2, max_size)
}

pub(crate) fn enumerate_sized(g: &Graph, min_size: usize, max_size: usize) -> Vec<Vec<NodeId>> {
    let adj = fusable_adjacency(g);
    let reach = reachability(g);
    let mut out = Vec::new();
    for v in 0..g.len() {
        if !g.node(v).op.is_fusable() {
            continue;
        }
        let ext: Vec<NodeId> = adj[v].iter().copied().filter(|u| *u > v).collect();
        let mut sub = vec![v];
        extend(&adj, &mut sub, ext, v, min_size, max_size, &mut |s| {
            let mut s = s.to_vec();
            s.sort_unstable();
            if is_convex(&reach, &s) {
                out.push(s);
            }
        });
    }
    out.sort();
    out
}

// ESU-style extension: each connected set is produced exactly once, from its
// smallest vertex, by only adding vertices exclusive to the newest member.
fn extend(
    adj: &[Vec<NodeId>],
    sub: &mut Vec<NodeId>,
    mut ext: Vec<NodeId>,
    root: NodeId,
    min_size: usize,
    max_size: usize,
    emit: &mut dyn FnMut(&[NodeId]),
) {
    if sub.len() >= min_size {
        emit(sub);
    }
    if sub.len() == max_size {
        return;
    }
    while let Some(w) = ext.pop() {
        let mut next = ext.clone();
        for &u in &adj[w] {
            if u > root
                && !sub.contains(&u)
                && !next.contains(&u)
                && u != w
                && !sub.iter().any(|s| adj[*s].contains(&u))
            {
                next.push(u);
            }
        }
        sub.push(w);
        extend(adj, sub, next, root, min_size, max_size, emit);
        sub.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfg::graph::GraphBuilder;
    use crate::nop::NopKind;

    #[test]
    fn chain_of_three() {
        let mut b = GraphBuilder::new("chain");
        let x = b.input("x", 8);
        let a = b.nop(NopKind::Not, &[x], &[]).unwrap();
        let bb = b.nop(NopKind::Not, &[a], &[]).unwrap();
        let c = b.nop(NopKind::Not, &[bb], &[]).unwrap();
        let g = b.finish_fragment().unwrap();
        let (a, bb, c) = (a.node, bb.node, c.node);
        let subs = enumerate_subgraphs(&g, 3);
        assert_eq!(subs, vec![vec![a, bb], vec![a, bb, c], vec![bb, c]]);
    }

    #[test]
    fn storage_only_graph_has_no_candidates() {
        let mut b = GraphBuilder::new("mv");
        let rs = b.input("rs1", 5);
        let rd = b.input("rd", 5);
        let v = b.nop(NopKind::RegRead, &[rs], &[]).unwrap();
        b.nop(NopKind::RegWrite, &[rd, v], &[]).unwrap();
        let g = b.finish_fragment().unwrap();
        assert!(enumerate_subgraphs(&g, 4).is_empty());
    }

    #[test]
    fn non_convex_pair_is_skipped() {
        // x = NOT(i); r = REG_READ(SLICE(x)); y = ADD(x, r): {x, y} is left
        // and re-entered through the register read.
        let mut b = GraphBuilder::new("nc");
        let i = b.input("i", 64);
        let x = b.nop(NopKind::Not, &[i], &[]).unwrap();
        let idx = b.nop(NopKind::Slice, &[x], &[4, 0]).unwrap();
        let r = b.nop(NopKind::RegRead, &[idx], &[]).unwrap();
        let y = b.nop(NopKind::Add, &[x, r], &[]).unwrap();
        let g = b.finish_fragment().unwrap();
        let subs = enumerate_subgraphs(&g, 3);
        assert!(!subs.contains(&vec![x.node, y.node]));
        assert!(subs.contains(&vec![x.node, idx.node]));
    }
}
