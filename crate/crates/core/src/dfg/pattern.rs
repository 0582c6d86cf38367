//! Fusable patterns, their canonical keys and fused-op templates.
//!
//! A pattern is a connected group of AL nodes lifted out of a graph. Values
//! entering from outside become boundary inputs, and literal operands become
//! parameters, so one pattern covers every instance that differs only in
//! its constants (e.g. rotate amounts).
//!
//! The canonical key is the lexicographically smallest serialization of the
//! pattern over all node numberings compatible with a refined colouring.
//! Commutative operands are sorted before serialization, so keys agree
//! exactly for isomorphic patterns and differ otherwise.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::bitvec::BitVec;
use crate::nop::{eval_al, infer_width, CustomNop, NopKind, NopRef, NopRegistry, WidthError};
use crate::state::Fnv;

use super::graph::{Graph, NodeId, Op, ValueRef};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatOp {
    Nop(NopKind),
    Custom(Arc<CustomNop>),
}

impl PatOp {
    pub fn name(&self) -> &str {
        match self {
            PatOp::Nop(k) => k.name(),
            PatOp::Custom(c) => &c.name,
        }
    }

    pub fn is_commutative(&self) -> bool {
        match self {
            PatOp::Nop(k) => k.is_commutative(),
            PatOp::Custom(c) => c.commutative,
        }
    }

    fn from_op(op: &Op) -> Option<PatOp> {
        match op {
            Op::Nop(k) => Some(PatOp::Nop(*k)),
            Op::Custom(c) => Some(PatOp::Custom(c.clone())),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatArg {
    Input(usize),
    Param(usize),
    Node(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatNode {
    pub op: PatOp,
    pub statics: Vec<i64>,
    pub args: Vec<PatArg>,
    pub width: u32,
}

/// A literal-abstracted template of fused AL nOPs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub key: String,
    pub name: String,
    /// Widths of boundary data inputs.
    pub inputs: Vec<u32>,
    /// Widths of literal parameters.
    pub params: Vec<u32>,
    /// Nodes in canonical order.
    pub nodes: Vec<PatNode>,
    /// Node indices providing output ports, in port order.
    pub outputs: Vec<usize>,
    topo: Vec<usize>,
}

/// A pattern instantiated as a functional unit.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedOp {
    pub pattern: Pattern,
    /// Cycles, from the fused critical-path arrival time.
    pub latency: u32,
    pub arrival_ps: u64,
    pub area: f64,
}

impl Eq for FusedOp {}

impl Pattern {
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn output_widths(&self) -> Vec<u32> {
        self.outputs.iter().map(|o| self.nodes[*o].width).collect()
    }

    /// Widths expected on the fused node's inputs: data inputs, then params.
    pub fn input_widths(&self) -> Vec<u32> {
        self.inputs.iter().chain(self.params.iter()).copied().collect()
    }

    pub fn check_inputs(&self, widths: &[u32]) -> Result<(), WidthError> {
        let expected = self.input_widths();
        if expected.len() != widths.len() {
            return Err(WidthError::Arity { op: self.name.clone(), expected: expected.len(), got: widths.len() });
        }
        for (slot, (e, g)) in expected.iter().zip(widths).enumerate() {
            if e != g {
                return Err(WidthError::Expected { op: self.name.clone(), slot, expected: *e, got: *g });
            }
        }
        Ok(())
    }

    /// Evaluation order of the nodes (producers first).
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Evaluates the template; `args` holds data inputs then params.
    pub fn eval(&self, args: &[BitVec]) -> Vec<BitVec> {
        let np = self.inputs.len();
        let mut vals: Vec<Option<BitVec>> = vec![None; self.nodes.len()];
        let mut xs = Vec::with_capacity(3);
        for &i in &self.topo {
            let node = &self.nodes[i];
            xs.clear();
            for a in &node.args {
                xs.push(match *a {
                    PatArg::Input(k) => args[k],
                    PatArg::Param(k) => args[np + k],
                    PatArg::Node(k) => vals[k].expect("pattern topological order"),
                });
            }
            vals[i] = Some(match &node.op {
                PatOp::Nop(k) => eval_al(*k, &xs, &node.statics),
                PatOp::Custom(c) => (c.eval)(&xs, &node.statics),
            });
        }
        self.outputs.iter().map(|o| vals[*o].unwrap()).collect()
    }

    fn with_topo(mut self) -> Self {
        let n = self.nodes.len();
        let mut done = vec![false; n];
        let mut topo = Vec::with_capacity(n);
        while topo.len() < n {
            let before = topo.len();
            for i in 0..n {
                if !done[i]
                    && self.nodes[i].args.iter().all(|a| match a {
                        PatArg::Node(k) => done[*k],
                        _ => true,
                    })
                {
                    done[i] = true;
                    topo.push(i);
                }
            }
            assert!(topo.len() > before, "pattern is cyclic");
        }
        self.topo = topo;
        self
    }

    /// Rebuilds a pattern from its canonical key.
    pub fn from_key(key: &str, registry: &NopRegistry) -> Result<Pattern, String> {
        let entries: Vec<&str> = key.split(';').collect();
        let mut pos_kind: Vec<Option<usize>> = Vec::new(); // position -> internal node index
        let mut pos_input: Vec<Option<usize>> = Vec::new();
        let mut inputs = Vec::new();
        let mut internal = 0;
        for e in &entries {
            if let Some(w) = e.strip_prefix("in:") {
                pos_input.push(Some(inputs.len()));
                pos_kind.push(None);
                inputs.push(w.parse::<u32>().map_err(|_| alloc::format!("bad input entry `{e}`"))?);
            } else {
                pos_input.push(None);
                pos_kind.push(Some(internal));
                internal += 1;
            }
        }
        let mut nodes = Vec::new();
        let mut params = Vec::new();
        let mut outputs = Vec::new();
        for e in &entries {
            if e.starts_with("in:") {
                continue;
            }
            let bad = || alloc::format!("bad node entry `{e}`");
            let (head, rest) = e.split_once(':').ok_or_else(bad)?;
            let op = match registry.lookup(head).ok_or_else(|| alloc::format!("unknown nOP `{head}`"))? {
                NopRef::Builtin(k) => PatOp::Nop(k),
                NopRef::Custom(c) => PatOp::Custom(c),
            };
            let open = rest.find('(').ok_or_else(bad)?;
            let (mut spec, args) = (&rest[..open], rest[open + 1..].strip_suffix(')').ok_or_else(bad)?);
            let output = spec.ends_with('*');
            if output {
                spec = &spec[..spec.len() - 1];
            }
            let (wtxt, statics) = match spec.find('[') {
                Some(b) => {
                    let inner = spec[b + 1..].strip_suffix(']').ok_or_else(bad)?;
                    let st = inner
                        .split(',')
                        .map(|s| s.parse::<i64>().map_err(|_| bad()))
                        .collect::<Result<Vec<_>, _>>()?;
                    (&spec[..b], st)
                }
                None => (spec, Vec::new()),
            };
            let width: u32 = wtxt.parse().map_err(|_| bad())?;
            let mut pargs = Vec::new();
            if !args.is_empty() {
                for a in args.split(',') {
                    if let Some(p) = a.strip_prefix('#') {
                        let p: usize = p.parse().map_err(|_| bad())?;
                        match (pos_input.get(p), pos_kind.get(p)) {
                            (Some(Some(i)), _) => pargs.push(PatArg::Input(*i)),
                            (_, Some(Some(k))) => pargs.push(PatArg::Node(*k)),
                            _ => return Err(bad()),
                        }
                    } else if let Some(w) = a.strip_prefix('p') {
                        pargs.push(PatArg::Param(params.len()));
                        params.push(w.parse::<u32>().map_err(|_| bad())?);
                    } else {
                        return Err(bad());
                    }
                }
            }
            if output {
                outputs.push(nodes.len());
            }
            nodes.push(PatNode { op, statics, args: pargs, width });
        }
        let p = Pattern { key: key.to_string(), name: String::new(), inputs, params, nodes, outputs, topo: vec![] };
        let mut p = p.with_topo();
        p.name = pattern_name(&p);
        p.check_widths()?;
        Ok(p)
    }

    fn check_widths(&self) -> Result<(), String> {
        for n in &self.nodes {
            let ws: Vec<u32> = n
                .args
                .iter()
                .map(|a| match *a {
                    PatArg::Input(k) => self.inputs[k],
                    PatArg::Param(k) => self.params[k],
                    PatArg::Node(k) => self.nodes[k].width,
                })
                .collect();
            let w = match &n.op {
                PatOp::Nop(k) => infer_width(*k, &ws, &n.statics).map_err(|e| e.to_string())?,
                PatOp::Custom(c) => Some((c.width)(&ws, &n.statics).map_err(|e| e.to_string())?),
            };
            if w != Some(n.width) {
                return Err(alloc::format!("width mismatch in pattern node {}", n.op.name()));
            }
        }
        Ok(())
    }
}

/// A pattern located in a concrete graph.
#[derive(Debug, Clone)]
pub struct Instance {
    pub pattern: Pattern,
    /// Graph values feeding the pattern's data inputs, in input order.
    pub data_inputs: Vec<ValueRef>,
    /// Literal nodes feeding the params, in param order.
    pub params: Vec<ValueRef>,
    /// Graph node behind each output port.
    pub outputs: Vec<NodeId>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Pseudo {
    Node(NodeId),
    Boundary(ValueRef),
}

enum RawArg {
    Pseudo(usize),
    Param(u32, ValueRef),
}

/// Lifts the node set `set` out of `g` as a canonical pattern instance.
///
/// `set` must contain only fusable AL nodes.
pub fn extract(g: &Graph, set: &[NodeId]) -> Instance {
    let consumers = g.consumers();
    let in_set = |id: NodeId| set.contains(&id);
    let mut pseudo: Vec<Pseudo> = set.iter().map(|&n| Pseudo::Node(n)).collect();
    let mut raw_args: Vec<Vec<RawArg>> = Vec::with_capacity(set.len());
    for &n in set {
        let node = g.node(n);
        let mut args = Vec::new();
        for v in &node.inputs {
            if in_set(v.node) {
                args.push(RawArg::Pseudo(set.iter().position(|x| *x == v.node).unwrap()));
            } else if let Op::Literal(_) = g.node(v.node).op {
                args.push(RawArg::Param(g.width_of(*v), *v));
            } else {
                let b = Pseudo::Boundary(*v);
                let idx = match pseudo.iter().position(|p| *p == b) {
                    Some(i) => i,
                    None => {
                        pseudo.push(b);
                        pseudo.len() - 1
                    }
                };
                args.push(RawArg::Pseudo(idx));
            }
        }
        raw_args.push(args);
    }
    let is_output: Vec<bool> = set
        .iter()
        .map(|&n| consumers[n].is_empty() || consumers[n].iter().any(|(c, _)| !in_set(*c)))
        .collect();

    let k = set.len();
    let np = pseudo.len();
    let label = |i: usize| -> String {
        match pseudo[i] {
            Pseudo::Boundary(v) => alloc::format!("in:{}", g.width_of(v)),
            Pseudo::Node(n) => {
                let node = g.node(n);
                let mut s = alloc::format!("{}:{}", node.op.name(), node.width());
                if !node.statics.is_empty() {
                    s.push('[');
                    for (j, x) in node.statics.iter().enumerate() {
                        if j > 0 {
                            s.push(',');
                        }
                        let _ = write!(s, "{x}");
                    }
                    s.push(']');
                }
                if is_output[i] {
                    s.push('*');
                }
                s
            }
        }
    };
    let labels: Vec<String> = (0..np).map(label).collect();
    let commutative: Vec<bool> = (0..np)
        .map(|i| match pseudo[i] {
            Pseudo::Node(n) => PatOp::from_op(&g.node(n).op).is_some_and(|o| o.is_commutative()),
            Pseudo::Boundary(_) => false,
        })
        .collect();

    // Colour refinement.
    let mut color: Vec<u64> = labels
        .iter()
        .map(|l| {
            let mut h = Fnv::default();
            h.write(l.as_bytes());
            h.finish()
        })
        .collect();
    let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); np];
    for (i, args) in raw_args.iter().enumerate() {
        for (slot, a) in args.iter().enumerate() {
            if let RawArg::Pseudo(p) = a {
                users[*p].push((i, slot));
            }
        }
    }
    for _ in 0..np {
        let next: Vec<u64> = (0..np)
            .map(|i| {
                let mut h = Fnv::default();
                h.write(&color[i].to_le_bytes());
                if i < k {
                    let mut ins: Vec<(usize, u64)> = raw_args[i]
                        .iter()
                        .enumerate()
                        .map(|(slot, a)| {
                            let c = match a {
                                RawArg::Pseudo(p) => color[*p],
                                RawArg::Param(w, _) => 0x5000 + *w as u64,
                            };
                            (if commutative[i] { 0 } else { slot }, c)
                        })
                        .collect();
                    ins.sort_unstable();
                    for (s, c) in ins {
                        h.write(&(s as u64).to_le_bytes());
                        h.write(&c.to_le_bytes());
                    }
                }
                h.write(&[0xff]);
                let mut outs: Vec<(usize, u64)> = users[i]
                    .iter()
                    .map(|(u, slot)| (if commutative[*u] { 0 } else { *slot }, color[*u]))
                    .collect();
                outs.sort_unstable();
                for (s, c) in outs {
                    h.write(&(s as u64).to_le_bytes());
                    h.write(&c.to_le_bytes());
                }
                h.finish()
            })
            .collect();
        let classes = |c: &[u64]| {
            let mut v = c.to_vec();
            v.sort_unstable();
            v.dedup();
            v.len()
        };
        let stable = classes(&next) == classes(&color);
        color = next;
        if stable {
            break;
        }
    }

    // Group pseudo nodes into colour classes ordered by colour.
    let mut classes: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for i in 0..np {
        classes.entry(color[i]).or_default().push(i);
    }
    let classes: Vec<Vec<usize>> = classes.into_values().collect();

    let mut best: Option<(String, Vec<usize>)> = None;
    let mut perm: Vec<usize> = classes.iter().flatten().copied().collect();
    let mut offsets = Vec::new();
    let mut acc = 0;
    for c in &classes {
        offsets.push(acc);
        acc += c.len();
    }
    let mut pos = vec![0usize; np];
    let mut visit = |perm: &[usize]| {
        for (p, &i) in perm.iter().enumerate() {
            pos[i] = p;
        }
        let s = serialize(perm, &pos, &labels, &raw_args, &commutative, k);
        if best.as_ref().is_none_or(|(b, _)| s < *b) {
            best = Some((s, perm.to_vec()));
        }
    };
    permute_classes(&mut perm, &classes.iter().map(|c| c.len()).collect::<Vec<_>>(), &offsets, 0, &mut visit);
    let (key, order) = best.expect("non-empty pattern");

    // Build the template in canonical order.
    let mut pos = vec![0usize; np];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p;
    }
    let mut input_of = vec![usize::MAX; np];
    let mut node_of = vec![usize::MAX; np];
    let mut data_inputs = Vec::new();
    let mut n_nodes = 0;
    for &i in &order {
        match pseudo[i] {
            Pseudo::Boundary(v) => {
                input_of[i] = data_inputs.len();
                data_inputs.push(v);
            }
            Pseudo::Node(_) => {
                node_of[i] = n_nodes;
                n_nodes += 1;
            }
        }
    }
    let mut nodes = Vec::new();
    let mut params = Vec::new();
    let mut param_refs = Vec::new();
    let mut outputs = Vec::new();
    let mut out_nodes = Vec::new();
    for &i in &order {
        let Pseudo::Node(gid) = pseudo[i] else { continue };
        let node = g.node(gid);
        let mut args: Vec<(String, PatArgRaw)> = raw_args[i]
            .iter()
            .map(|a| match a {
                RawArg::Pseudo(p) => (alloc::format!("#{}", pos[*p]), PatArgRaw::Pseudo(*p)),
                RawArg::Param(w, v) => (alloc::format!("p{w}"), PatArgRaw::Param(*w, *v)),
            })
            .collect();
        if commutative[i] {
            args.sort_by(|a, b| a.0.cmp(&b.0));
        }
        let pargs = args
            .into_iter()
            .map(|(_, a)| match a {
                PatArgRaw::Pseudo(p) => match pseudo[p] {
                    Pseudo::Boundary(_) => PatArg::Input(input_of[p]),
                    Pseudo::Node(_) => PatArg::Node(node_of[p]),
                },
                PatArgRaw::Param(w, v) => {
                    params.push(w);
                    param_refs.push(v);
                    PatArg::Param(params.len() - 1)
                }
            })
            .collect();
        if is_output[i] {
            outputs.push(nodes.len());
            out_nodes.push(gid);
        }
        nodes.push(PatNode {
            op: PatOp::from_op(&node.op).expect("fusable node"),
            statics: node.statics.clone(),
            args: pargs,
            width: node.width(),
        });
    }
    let pattern = Pattern {
        key,
        name: String::new(),
        inputs: data_inputs.iter().map(|v| g.width_of(*v)).collect(),
        params,
        nodes,
        outputs,
        topo: vec![],
    }
    .with_topo();
    let mut pattern = pattern;
    pattern.name = pattern_name(&pattern);
    Instance { pattern, data_inputs, params: param_refs, outputs: out_nodes }
}

enum PatArgRaw {
    Pseudo(usize),
    Param(u32, ValueRef),
}

fn serialize(
    perm: &[usize],
    pos: &[usize],
    labels: &[String],
    raw_args: &[Vec<RawArg>],
    commutative: &[bool],
    k: usize,
) -> String {
    let mut out = String::new();
    for (p, &i) in perm.iter().enumerate() {
        if p > 0 {
            out.push(';');
        }
        out.push_str(&labels[i]);
        if i < k {
            let mut args: Vec<String> = raw_args[i]
                .iter()
                .map(|a| match a {
                    RawArg::Pseudo(q) => alloc::format!("#{}", pos[*q]),
                    RawArg::Param(w, _) => alloc::format!("p{w}"),
                })
                .collect();
            if commutative[i] {
                args.sort();
            }
            out.push('(');
            out.push_str(&args.join(","));
            out.push(')');
        }
    }
    out
}

/// Visits every permutation that only reorders elements within a class.
fn permute_classes(
    perm: &mut [usize],
    sizes: &[usize],
    offsets: &[usize],
    class: usize,
    visit: &mut dyn FnMut(&[usize]),
) {
    if class == sizes.len() {
        visit(perm);
        return;
    }
    let (off, len) = (offsets[class], sizes[class]);
    heap_permute(perm, off, len, len, &mut |perm| permute_classes(perm, sizes, offsets, class + 1, visit));
}

fn heap_permute(perm: &mut [usize], off: usize, len: usize, k: usize, f: &mut dyn FnMut(&mut [usize])) {
    if k <= 1 {
        f(perm);
        return;
    }
    for i in 0..k - 1 {
        heap_permute(perm, off, len, k - 1, f);
        if k.is_multiple_of(2) {
            perm.swap(off + i, off + k - 1);
        } else {
            perm.swap(off, off + k - 1);
        }
    }
    heap_permute(perm, off, len, k - 1, f);
}

/// Human-readable pattern name. Recognizes rotates and same-op trees, and
/// otherwise joins the member nOP names.
pub fn pattern_name(p: &Pattern) -> String {
    let kinds: Vec<&str> = p.nodes.iter().map(|n| n.op.name()).collect();
    if p.nodes.len() == 3 && p.inputs.len() == 1 && p.outputs.len() == 1 {
        let root = &p.nodes[p.outputs[0]];
        if root.op == PatOp::Nop(NopKind::Or) {
            let mut shifts: Vec<&str> = root
                .args
                .iter()
                .filter_map(|a| match a {
                    PatArg::Node(k) => Some(p.nodes[*k].op.name()),
                    _ => None,
                })
                .collect();
            shifts.sort();
            if shifts == ["SLL", "SRL"] {
                return "ror".into();
            }
        }
    }
    if p.outputs.len() == 1 && kinds.iter().all(|k| *k == kinds[0]) {
        if let PatOp::Nop(k @ (NopKind::Xor | NopKind::And | NopKind::Or | NopKind::Add)) = p.nodes[0].op {
            return alloc::format!("{}{}", k.name().to_lowercase(), p.nodes.len() + 1);
        }
    }
    let mut s = String::new();
    for (i, k) in kinds.iter().enumerate() {
        if i > 0 {
            s.push('_');
        }
        s.push_str(&k.to_lowercase());
    }
    s
}
