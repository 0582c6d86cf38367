use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use crate::bitvec::BitVec;
use crate::nop::{eval_al, eval_nop, infer_width, Category, CustomNop, EvalError, NopKind, WidthError, XLEN};
use crate::state::{Effect, Overlay, StateDelta, StateView};

use super::pattern::FusedOp;

pub type NodeId = usize;

/// One output port of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueRef {
    pub node: NodeId,
    pub port: u32,
}

impl ValueRef {
    pub fn new(node: NodeId) -> Self {
        ValueRef { node, port: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    /// An encoding operand, bound per execution.
    Input(String),
    /// The address of the executing instruction.
    Pc,
    Literal(BitVec),
    Nop(NopKind),
    Custom(Arc<CustomNop>),
    Fused(Arc<FusedOp>),
}

impl Op {
    pub fn category(&self) -> Option<Category> {
        match self {
            Op::Nop(k) => Some(k.category()),
            Op::Custom(_) | Op::Fused(_) => Some(Category::Al),
            _ => None,
        }
    }

    /// Unfused AL nOPs, the only nodes eligible for fusion.
    pub fn is_fusable(&self) -> bool {
        matches!(self, Op::Nop(k) if k.category() == Category::Al) || matches!(self, Op::Custom(_))
    }

    pub fn is_effectful(&self) -> bool {
        matches!(self.category(), Some(Category::Storage | Category::Pc))
    }

    pub fn name(&self) -> &str {
        match self {
            Op::Input(n) => n,
            Op::Pc => "pc",
            Op::Literal(_) => "literal",
            Op::Nop(k) => k.name(),
            Op::Custom(c) => &c.name,
            Op::Fused(f) => &f.pattern.name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub op: Op,
    pub statics: Vec<i64>,
    pub inputs: Vec<ValueRef>,
    /// Width of each output port.
    pub widths: Vec<u32>,
}

impl Node {
    pub fn width(&self) -> u32 {
        self.widths[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("node {0} uses a value from node {1} that is not produced earlier")]
    Forward(NodeId, NodeId),
    #[error("node {node}: {err}")]
    Width { node: NodeId, err: WidthError },
    #[error("node {node}: width {got} recorded, {expected} inferred")]
    WidthRecord { node: NodeId, expected: u32, got: u32 },
    #[error("missing terminal PC update")]
    MissingPcUpdate,
    #[error("multiple PC updates (nodes {0} and {1})")]
    MultiplePcUpdates(NodeId, NodeId),
    #[error("PC update at node {0} is followed by further effects")]
    PcNotLast(NodeId),
    #[error("effect order is inconsistent")]
    Order,
    #[error("graph contains a cycle")]
    Cycle,
}

/// Dataflow graph of one instruction's semantics.
///
/// Nodes are kept in a topological order that also respects the effect
/// order, so evaluating nodes by ascending id is always valid.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    pub name: String,
    nodes: Vec<Node>,
    /// Storage and PC nodes in program order.
    order: Vec<NodeId>,
    port_base: Vec<usize>,
}

impl Graph {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn effect_order(&self) -> &[NodeId] {
        &self.order
    }

    /// Operand names and widths in binding order.
    pub fn operands(&self) -> Vec<(String, u32)> {
        self.nodes
            .iter()
            .filter_map(|n| match &n.op {
                Op::Input(name) => Some((name.clone(), n.width())),
                _ => None,
            })
            .collect()
    }

    pub fn width_of(&self, v: ValueRef) -> u32 {
        self.nodes[v.node].widths[v.port as usize]
    }

    /// Consumers of each node, as (consumer, slot).
    pub fn consumers(&self) -> Vec<Vec<(NodeId, usize)>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (id, n) in self.nodes.iter().enumerate() {
            for (slot, v) in n.inputs.iter().enumerate() {
                out[v.node].push((id, slot));
            }
        }
        out
    }

    /// Successors over data and effect-order edges.
    pub fn successors(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (id, n) in self.nodes.iter().enumerate() {
            for v in &n.inputs {
                if !out[v.node].contains(&id) {
                    out[v.node].push(id);
                }
            }
        }
        for w in self.order.windows(2) {
            if !out[w[0]].contains(&w[1]) {
                out[w[0]].push(w[1]);
            }
        }
        out
    }

    /// Number of fused nodes.
    pub fn fused_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.op, Op::Fused(_))).count()
    }

    /// Builds a graph from nodes in any order, renumbering topologically.
    ///
    /// Ties are broken by the original position, which keeps renumbering
    /// stable for graphs that are already sorted.
    pub fn from_parts(name: impl Into<String>, nodes: Vec<Node>, order: Vec<NodeId>) -> Result<Graph, GraphError> {
        let n = nodes.len();
        let mut indeg = vec![0usize; n];
        let mut succ: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        let mut add_edge = |a: NodeId, b: NodeId, indeg: &mut Vec<usize>| {
            succ[a].push(b);
            indeg[b] += 1;
        };
        for (id, node) in nodes.iter().enumerate() {
            for v in &node.inputs {
                if v.node >= n {
                    return Err(GraphError::Forward(id, v.node));
                }
                add_edge(v.node, id, &mut indeg);
            }
        }
        for w in order.windows(2) {
            add_edge(w[0], w[1], &mut indeg);
        }
        let mut heap: BinaryHeap<Reverse<NodeId>> = (0..n).filter(|i| indeg[*i] == 0).map(Reverse).collect();
        let mut sorted = Vec::with_capacity(n);
        while let Some(Reverse(id)) = heap.pop() {
            sorted.push(id);
            for &s in &succ[id] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    heap.push(Reverse(s));
                }
            }
        }
        if sorted.len() != n {
            return Err(GraphError::Cycle);
        }
        let mut new_id = vec![0usize; n];
        for (new, &old) in sorted.iter().enumerate() {
            new_id[old] = new;
        }
        let mut slots: Vec<Option<Node>> = nodes.into_iter().map(Some).collect();
        let renumbered = sorted
            .iter()
            .map(|&old| {
                let mut node = slots[old].take().unwrap();
                for v in &mut node.inputs {
                    v.node = new_id[v.node];
                }
                node
            })
            .collect();
        let order = order.into_iter().map(|o| new_id[o]).collect();
        Ok(Graph::assemble(name.into(), renumbered, order))
    }

    fn assemble(name: String, nodes: Vec<Node>, order: Vec<NodeId>) -> Graph {
        let mut port_base = Vec::with_capacity(nodes.len());
        let mut acc = 0;
        for n in &nodes {
            port_base.push(acc);
            acc += n.widths.len().max(1);
        }
        Graph { name, nodes, order, port_base }
    }

    /// Structural check: topological ids, width consistency and effect order.
    /// With `require_pc`, exactly one PC update must end the effect order.
    pub fn validate(&self, require_pc: bool) -> Result<(), GraphError> {
        for (id, n) in self.nodes.iter().enumerate() {
            for v in &n.inputs {
                if v.node >= id || v.port as usize >= self.nodes[v.node].widths.len() {
                    return Err(GraphError::Forward(id, v.node));
                }
            }
            let ins: Vec<u32> = n.inputs.iter().map(|v| self.width_of(*v)).collect();
            let expected: Vec<u32> = match &n.op {
                Op::Nop(k) => infer_width(*k, &ins, &n.statics)
                    .map_err(|e| GraphError::Width {
                        node: id,
                        err: match e {
                            EvalError::Width(w) => w,
                            EvalError::Memory(b) => WidthError::Rule {
                                op: k.name().into(),
                                msg: alloc::format!("{b}-byte access"),
                            },
                        },
                    })?
                    .into_iter()
                    .collect(),
                Op::Custom(c) => {
                    if ins.len() != c.data_arity {
                        return Err(GraphError::Width {
                            node: id,
                            err: WidthError::Arity { op: c.name.clone(), expected: c.data_arity, got: ins.len() },
                        });
                    }
                    vec![(c.width)(&ins, &n.statics).map_err(|err| GraphError::Width { node: id, err })?]
                }
                Op::Fused(f) => {
                    f.pattern.check_inputs(&ins).map_err(|err| GraphError::Width { node: id, err })?;
                    f.pattern.output_widths()
                }
                Op::Pc => vec![XLEN],
                Op::Input(_) | Op::Literal(_) => n.widths.clone(),
            };
            if expected != n.widths {
                return Err(GraphError::WidthRecord {
                    node: id,
                    expected: expected.first().copied().unwrap_or(0),
                    got: n.widths.first().copied().unwrap_or(0),
                });
            }
        }
        let effectful: Vec<NodeId> = (0..self.nodes.len()).filter(|i| self.nodes[*i].op.is_effectful()).collect();
        if effectful != self.order {
            return Err(GraphError::Order);
        }
        let pcs: Vec<NodeId> = self
            .order
            .iter()
            .copied()
            .filter(|i| self.nodes[*i].op.category() == Some(Category::Pc))
            .collect();
        if require_pc {
            match pcs.as_slice() {
                [] => return Err(GraphError::MissingPcUpdate),
                [p] => {
                    if self.order.last() != Some(p) {
                        return Err(GraphError::PcNotLast(*p));
                    }
                }
                [a, b, ..] => return Err(GraphError::MultiplePcUpdates(*a, *b)),
            }
        }
        Ok(())
    }

    /// Executes the graph against `state` with `operands` bound in
    /// [`Graph::operands`] order.
    pub fn eval<S: StateView + ?Sized>(&self, operands: &[BitVec], state: &S) -> Result<StateDelta, EvalError> {
        let total = self.port_base.last().copied().unwrap_or(0) + self.nodes.last().map_or(0, |n| n.widths.len().max(1));
        let mut values = vec![BitVec::zero(1); total];
        let mut effects: Vec<Effect> = Vec::new();
        let mut next_operand = 0;
        let mut args: Vec<BitVec> = Vec::with_capacity(4);
        for (id, n) in self.nodes.iter().enumerate() {
            args.clear();
            args.extend(n.inputs.iter().map(|v| values[self.port_base[v.node] + v.port as usize]));
            let base = self.port_base[id];
            match &n.op {
                Op::Input(_) => {
                    let v = operands[next_operand];
                    next_operand += 1;
                    values[base] = v.zero_extend(n.width()).truncate(n.width());
                }
                Op::Pc => values[base] = BitVec::from_u64(state.pc(), XLEN),
                Op::Literal(v) => values[base] = *v,
                Op::Nop(k) if k.category() == Category::Al => values[base] = eval_al(*k, &args, &n.statics),
                Op::Nop(k) => {
                    let out = {
                        let view = Overlay::new(state, &effects);
                        eval_nop(*k, &args, &n.statics, &view)?
                    };
                    if let Some(v) = out.value {
                        values[base] = v;
                    }
                    effects.extend(out.effects);
                }
                Op::Custom(c) => values[base] = (c.eval)(&args, &n.statics),
                Op::Fused(f) => {
                    for (i, v) in f.pattern.eval(&args).into_iter().enumerate() {
                        values[base + i] = v;
                    }
                }
            }
        }
        Ok(StateDelta::new(effects))
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::text::dump(self))
    }
}

/// Incremental graph construction in program order.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    name: String,
    nodes: Vec<Node>,
    order: Vec<NodeId>,
}

impl GraphBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        GraphBuilder { name: name.into(), ..Default::default() }
    }

    pub fn width_of(&self, v: ValueRef) -> u32 {
        self.nodes[v.node].widths[v.port as usize]
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, node: Node) -> ValueRef {
        let id = self.nodes.len();
        if node.op.is_effectful() {
            self.order.push(id);
        }
        self.nodes.push(node);
        ValueRef::new(id)
    }

    pub fn input(&mut self, name: impl Into<String>, width: u32) -> ValueRef {
        self.push(Node { op: Op::Input(name.into()), statics: vec![], inputs: vec![], widths: vec![width] })
    }

    pub fn pc(&mut self) -> ValueRef {
        self.push(Node { op: Op::Pc, statics: vec![], inputs: vec![], widths: vec![XLEN] })
    }

    pub fn literal(&mut self, v: BitVec) -> ValueRef {
        self.push(Node { op: Op::Literal(v), statics: vec![], inputs: vec![], widths: vec![v.width()] })
    }

    /// Adds a built-in nOP. Returns the value for kinds with an output and the
    /// node itself (port 0) otherwise.
    pub fn nop(&mut self, kind: NopKind, inputs: &[ValueRef], statics: &[i64]) -> Result<ValueRef, EvalError> {
        let ws: Vec<u32> = inputs.iter().map(|v| self.width_of(*v)).collect();
        let out = infer_width(kind, &ws, statics)?;
        Ok(self.push(Node {
            op: Op::Nop(kind),
            statics: statics.to_vec(),
            inputs: inputs.to_vec(),
            widths: out.into_iter().collect(),
        }))
    }

    pub fn custom(&mut self, op: Arc<CustomNop>, inputs: &[ValueRef], statics: &[i64]) -> Result<ValueRef, WidthError> {
        let ws: Vec<u32> = inputs.iter().map(|v| self.width_of(*v)).collect();
        if ws.len() != op.data_arity {
            return Err(WidthError::Arity { op: op.name.clone(), expected: op.data_arity, got: ws.len() });
        }
        let w = (op.width)(&ws, statics)?;
        Ok(self.push(Node { op: Op::Custom(op), statics: statics.to_vec(), inputs: inputs.to_vec(), widths: vec![w] }))
    }

    /// Graph with full instruction validation (terminal PC update required).
    pub fn finish(self) -> Result<Graph, GraphError> {
        let g = Graph::from_parts(self.name, self.nodes, self.order)?;
        g.validate(true)?;
        Ok(g)
    }

    /// Graph without the PC-update requirement, for fragments and tests.
    pub fn finish_fragment(self) -> Result<Graph, GraphError> {
        let g = Graph::from_parts(self.name, self.nodes, self.order)?;
        g.validate(false)?;
        Ok(g)
    }
}
