//! Greedy pattern fusion.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::graph::{Graph, Node, NodeId, Op, ValueRef};
use super::pattern::{extract, FusedOp, Pattern};
use super::subgraph::enumerate_sized;

fn op_signature_of_pattern(p: &Pattern) -> Vec<&str> {
    let mut v: Vec<&str> = p.nodes.iter().map(|n| n.op.name()).collect();
    v.sort_unstable();
    v
}

/// Finds the first instance of `pattern` in `g`, scanning candidate node
/// sets in ascending lexicographic id order.
pub fn find_match(g: &Graph, pattern: &Pattern) -> Option<Vec<NodeId>> {
    let want = op_signature_of_pattern(pattern);
    let size = pattern.size();
    let candidates = if size == 1 {
        (0..g.len()).filter(|i| g.node(*i).op.is_fusable()).map(|i| vec![i]).collect()
    } else {
        enumerate_sized(g, size, size)
    };
    candidates.into_iter().find(|set| {
        let mut ops: Vec<&str> = set.iter().map(|n| g.node(*n).op.name()).collect();
        ops.sort_unstable();
        ops == want && extract(g, set).pattern.key == pattern.key
    })
}

/// Replaces `set` (which must be an instance of `op.pattern`) by one fused node.
pub fn fuse_set(g: &Graph, set: &[NodeId], op: &Arc<FusedOp>) -> Graph {
    let inst = extract(g, set);
    debug_assert_eq!(inst.pattern.key, op.pattern.key);
    let first = set[0];
    // Old id -> new id; members map to the fused node, which takes the place
    // of the first member.
    let mut new_id = vec![usize::MAX; g.len()];
    let mut next = 0;
    for id in 0..g.len() {
        if id == first || !set.contains(&id) {
            new_id[id] = next;
            next += 1;
        }
    }
    let fused_id = new_id[first];
    let port_of = |v: ValueRef| -> ValueRef {
        if let Some(p) = inst.outputs.iter().position(|o| *o == v.node) {
            ValueRef { node: fused_id, port: p as u32 }
        } else {
            ValueRef { node: new_id[v.node], port: v.port }
        }
    };
    let mut nodes = Vec::with_capacity(next);
    for id in 0..g.len() {
        if id == first {
            let inputs = inst.data_inputs.iter().chain(inst.params.iter()).map(|v| port_of(*v)).collect();
            nodes.push(Node {
                op: Op::Fused(op.clone()),
                statics: vec![],
                inputs,
                widths: op.pattern.output_widths(),
            });
        } else if !set.contains(&id) {
            let n = g.node(id);
            nodes.push(Node {
                op: n.op.clone(),
                statics: n.statics.clone(),
                inputs: n.inputs.iter().map(|v| port_of(*v)).collect(),
                widths: n.widths.clone(),
            });
        }
    }
    let order = g.effect_order().iter().map(|o| new_id[*o]).collect();
    Graph::from_parts(g.name.clone(), nodes, order).expect("convex fusion keeps the graph acyclic")
}

/// Applies `patterns` in the given order, fusing every non-overlapping
/// match of each before moving to the next.
pub fn apply_fusion(g: &Graph, patterns: &[Arc<FusedOp>]) -> Graph {
    let mut g = g.clone();
    for op in patterns {
        while let Some(set) = find_match(&g, &op.pattern) {
            g = fuse_set(&g, &set, op);
        }
    }
    drop_dead_literals(&g)
}

fn drop_dead_literals(g: &Graph) -> Graph {
    let consumers = g.consumers();
    let keep: Vec<bool> =
        (0..g.len()).map(|i| !matches!(g.node(i).op, Op::Literal(_)) || !consumers[i].is_empty()).collect();
    if keep.iter().all(|k| *k) {
        return g.clone();
    }
    let mut new_id = vec![usize::MAX; g.len()];
    let mut nodes = Vec::new();
    for id in 0..g.len() {
        if keep[id] {
            new_id[id] = nodes.len();
            let n = g.node(id);
            nodes.push(Node {
                op: n.op.clone(),
                statics: n.statics.clone(),
                inputs: n.inputs.iter().map(|v| ValueRef { node: new_id[v.node], port: v.port }).collect(),
                widths: n.widths.clone(),
            });
        }
    }
    let order = g.effect_order().iter().map(|o| new_id[*o]).collect();
    Graph::from_parts(g.name.clone(), nodes, order).expect("removing literals keeps the graph acyclic")
}

/// Pattern ops of a graph's fused nodes, in node order.
pub fn fused_ops(g: &Graph) -> Vec<Arc<FusedOp>> {
    g.nodes()
        .iter()
        .filter_map(|n| match &n.op {
            Op::Fused(f) => Some(f.clone()),
            _ => None,
        })
        .collect()
}
