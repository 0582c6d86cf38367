use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::bitvec::{BitVec, MAX_WIDTH};
use crate::dfg::{Graph, GraphBuilder, ValueRef};
use crate::nop::{ArgRole, Category, EvalError, NopKind, NopRef, NopRegistry, WidthError, REG_INDEX_WIDTH, XLEN};

use super::ast::{BinOp, Expr, Function, Stmt, Target, UnOp};
use super::{Diagnostic, Span};

pub const MAX_LOOP_BOUND: i128 = 64;
pub const MAX_NODES: usize = 4096;

#[derive(Debug, Clone)]
pub struct Compiled {
    pub graph: Graph,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Copy)]
enum Val {
    Const(i128),
    Node(ValueRef),
}

type CResult<T> = Result<T, Diagnostic>;

struct Ctx<'a> {
    b: GraphBuilder,
    registry: &'a NopRegistry,
    scopes: Vec<BTreeMap<String, Val>>,
    pc: Option<ValueRef>,
    effects: Vec<(Span, bool)>,
    reg_writes: Vec<(ValueRef, Span)>,
    warnings: Vec<Diagnostic>,
}

/// Compiles a parsed function: unrolls loops, flattens nested calls, folds
/// constant expressions, lowers variable built-ins to nOPs and checks widths.
///
/// `widths` gives the encoding width of every parameter.
pub fn compile(f: &Function, widths: &BTreeMap<String, u32>, registry: &NopRegistry) -> Result<Compiled, Vec<Diagnostic>> {
    let mut cx = Ctx {
        b: GraphBuilder::new(f.name.clone()),
        registry,
        scopes: vec![BTreeMap::new()],
        pc: None,
        effects: Vec::new(),
        reg_writes: Vec::new(),
        warnings: Vec::new(),
    };
    let mut errors = Vec::new();
    for (p, sp) in &f.params {
        if p == "pc" {
            errors.push(Diagnostic::error(*sp, "`pc` is implicit and cannot be a parameter"));
            continue;
        }
        match widths.get(p) {
            Some(&w) if (1..=MAX_WIDTH).contains(&w) => {
                let v = cx.b.input(p.clone(), w);
                cx.scopes[0].insert(p.clone(), Val::Node(v));
            }
            Some(&w) => errors.push(Diagnostic::error(*sp, alloc::format!("operand `{p}` has invalid width {w}"))),
            None => errors.push(
                Diagnostic::error(*sp, alloc::format!("operand `{p}` has no encoding width"))
                    .with_hint("every parameter must name an operand field of the instruction encoding"),
            ),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    if let Err(d) = cx.block(&f.body) {
        return Err(vec![d]);
    }
    let pcs: Vec<Span> = cx.effects.iter().filter(|(_, pc)| *pc).map(|(s, _)| *s).collect();
    match pcs.as_slice() {
        [] => {
            return Err(vec![Diagnostic::error(f.span, "missing terminal PC update")
                .with_hint("end the function with INC_PC(pc), UPDATE_PC(target) or COND_UPDATE_PC(cond, target, pc)")])
        }
        [_] => {
            if !cx.effects.last().is_some_and(|(_, pc)| *pc) {
                return Err(vec![Diagnostic::error(pcs[0], "PC update must be the last effect of the function")
                    .with_hint("move register and memory writes before the PC update")]);
            }
        }
        [_, second, ..] => {
            return Err(vec![Diagnostic::error(*second, "multiple PC updates")
                .with_hint("an instruction updates the PC exactly once; merge the cases with COND_UPDATE_PC")])
        }
    }
    for (i, (idx, _)) in cx.reg_writes.iter().enumerate() {
        if let Some((_, sp)) = cx.reg_writes[i + 1..].iter().find(|(j, _)| j == idx) {
            cx.warnings.push(Diagnostic::warning(*sp, "register written more than once; the last write wins"));
        }
    }
    let warnings = cx.warnings;
    match cx.b.finish() {
        Ok(graph) => Ok(Compiled { graph, warnings }),
        Err(e) => Err(vec![Diagnostic::error(f.span, e.to_string())]),
    }
}

fn fits(v: i128, width: u32) -> bool {
    if width >= 128 {
        return true;
    }
    let max_u = (1i128 << width) - 1;
    let min_s = -(1i128 << (width - 1));
    v >= min_s && v <= max_u
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + (ca != *cb) as usize).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

impl Ctx<'_> {
    fn lookup(&self, name: &str) -> Option<Val> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn define(&mut self, name: String, v: Val, span: Span, function_scope: bool) -> CResult<()> {
        if name == "pc" {
            return Err(Diagnostic::error(span, "`pc` cannot be assigned"));
        }
        if self.lookup(&name).is_some() {
            return Err(Diagnostic::error(span, alloc::format!("`{name}` is already defined"))
                .with_hint("each name is assigned once; pick a new name, or index it (e.g. `t[i]`) inside loops"));
        }
        let scope = if function_scope { 0 } else { self.scopes.len() - 1 };
        self.scopes[scope].insert(name, v);
        Ok(())
    }

    fn check_size(&self, span: Span) -> CResult<()> {
        if self.b.len() > MAX_NODES {
            return Err(Diagnostic::error(span, alloc::format!("unrolled function exceeds {MAX_NODES} nodes")));
        }
        Ok(())
    }

    fn block(&mut self, body: &[Stmt]) -> CResult<()> {
        for s in body {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> CResult<()> {
        match s {
            Stmt::Pass => Ok(()),
            Stmt::Expr(Expr::Str(_)) => Ok(()),
            Stmt::Expr(e @ Expr::Call { name, span, .. }) => {
                let v = self.call(e)?;
                if let Some(Val::Node(_)) = v {
                    if !matches!(self.registry.lookup(name), Some(NopRef::Builtin(k)) if k.category() == Category::Storage) {
                        self.warnings.push(Diagnostic::warning(*span, alloc::format!("result of `{name}` is unused")));
                    }
                }
                self.check_size(*span)
            }
            Stmt::Expr(e) => Err(Diagnostic::error(e.span(), "statement has no effect")
                .with_hint("statements are nOP calls or assignments")),
            Stmt::Assign { target, value, span } => {
                let v = self.value(value)?;
                match target {
                    Target::Name(n) => self.define(n.clone(), v, *span, false)?,
                    Target::Indexed(n, idx) => {
                        let k = self.constant(idx, "an index")?;
                        self.define(alloc::format!("{n}[{k}]"), v, *span, true)?;
                    }
                }
                self.check_size(*span)
            }
            Stmt::For { var, start, end, body, span } => {
                let lo = self.constant(start, "a loop bound")?;
                let hi = self.constant(end, "a loop bound")?;
                if hi - lo > MAX_LOOP_BOUND {
                    return Err(Diagnostic::error(*span, alloc::format!("loop runs {} times; the limit is {MAX_LOOP_BOUND}", hi - lo)));
                }
                if self.lookup(var).is_some() {
                    return Err(Diagnostic::error(*span, alloc::format!("loop variable `{var}` is already defined")));
                }
                for i in lo..hi.max(lo) {
                    let mut scope = BTreeMap::new();
                    scope.insert(var.clone(), Val::Const(i));
                    self.scopes.push(scope);
                    let r = self.block(body);
                    self.scopes.pop();
                    r?;
                    self.check_size(*span)?;
                }
                Ok(())
            }
        }
    }

    fn constant(&mut self, e: &Expr, what: &str) -> CResult<i128> {
        match self.value(e)? {
            Val::Const(v) => Ok(v),
            Val::Node(_) => Err(Diagnostic::error(e.span(), alloc::format!("{what} must be a compile-time constant"))),
        }
    }

    fn value(&mut self, e: &Expr) -> CResult<Val> {
        match e {
            Expr::Int(v, _) => Ok(Val::Const(*v)),
            Expr::Str(sp) => Err(Diagnostic::error(*sp, "strings are only allowed as docstrings")),
            Expr::Name(n, sp) => {
                if let Some(v) = self.lookup(n) {
                    return Ok(v);
                }
                if n == "pc" {
                    let v = match self.pc {
                        Some(v) => v,
                        None => {
                            let v = self.b.pc();
                            self.pc = Some(v);
                            v
                        }
                    };
                    return Ok(Val::Node(v));
                }
                Err(Diagnostic::error(*sp, alloc::format!("undefined name `{n}`"))
                    .with_hint("assign it before use or add it to the parameter list"))
            }
            Expr::Index(n, idx, sp) => {
                let k = self.constant(idx, "an index")?;
                let key = alloc::format!("{n}[{k}]");
                self.lookup(&key).ok_or_else(|| Diagnostic::error(*sp, alloc::format!("undefined name `{key}`")))
            }
            Expr::Call { span, name, .. } => match self.call(e)? {
                Some(v) => Ok(v),
                None => Err(Diagnostic::error(*span, alloc::format!("`{name}` does not produce a value"))),
            },
            Expr::Unary { op, expr, span } => {
                let v = self.value(expr)?;
                match (op, v) {
                    (UnOp::Neg, Val::Const(c)) => Ok(Val::Const(c.wrapping_neg())),
                    (UnOp::Not, Val::Const(c)) => Ok(Val::Const(!c)),
                    (UnOp::Neg, Val::Node(x)) => {
                        let w = self.b.width_of(x);
                        let z = self.literal(0, w, *span)?;
                        self.emit(NopKind::Sub, &[z, x], &[], *span)
                    }
                    (UnOp::Not, Val::Node(x)) => self.emit(NopKind::Not, &[x], &[], *span),
                }
            }
            Expr::Binary { op, lhs, rhs, span } => {
                let a = self.value(lhs)?;
                let b = self.value(rhs)?;
                if let (Val::Const(x), Val::Const(y)) = (a, b) {
                    return fold(*op, x, y, *span).map(Val::Const);
                }
                let kind = match op {
                    BinOp::Add => NopKind::Add,
                    BinOp::Sub => NopKind::Sub,
                    BinOp::And => NopKind::And,
                    BinOp::Or => NopKind::Or,
                    BinOp::Xor => NopKind::Xor,
                    BinOp::Shl => NopKind::Sll,
                    BinOp::Shr => NopKind::Srl,
                    BinOp::Mul => {
                        return Err(Diagnostic::error(*span, "`*` is only allowed between constants")
                            .with_hint("multiply values with SIGNED_MUL"))
                    }
                };
                let (x, y) = match (a, b) {
                    (Val::Node(x), Val::Node(y)) => (x, y),
                    (Val::Node(x), Val::Const(c)) => {
                        let w = self.b.width_of(x);
                        (x, self.literal(c, w, rhs.span())?)
                    }
                    (Val::Const(c), Val::Node(y)) => {
                        let w = if matches!(kind, NopKind::Sll | NopKind::Srl) { XLEN } else { self.b.width_of(y) };
                        (self.literal(c, w, lhs.span())?, y)
                    }
                    (Val::Const(_), Val::Const(_)) => unreachable!(),
                };
                self.emit(kind, &[x, y], &[], *span)
            }
        }
    }

    fn literal(&mut self, v: i128, width: u32, span: Span) -> CResult<ValueRef> {
        if !fits(v, width) {
            return Err(Diagnostic::error(span, alloc::format!("constant {v} does not fit in {width} bits")));
        }
        Ok(self.b.literal(BitVec::from_i128(v, width)))
    }

    fn emit(&mut self, kind: NopKind, inputs: &[ValueRef], statics: &[i64], span: Span) -> CResult<Val> {
        let before = self.b.len();
        let v = self.b.nop(kind, inputs, statics).map_err(|e| width_diag(kind.name(), e, span))?;
        debug_assert_eq!(self.b.len(), before + 1);
        if kind.category() != Category::Al {
            self.effects.push((span, kind.category() == Category::Pc));
        }
        Ok(Val::Node(v))
    }

    /// Evaluates a call. Returns `None` for nOPs without an output.
    fn call(&mut self, e: &Expr) -> CResult<Option<Val>> {
        let Expr::Call { name, args, span } = e else { unreachable!() };
        let span = *span;
        let op = match self.registry.lookup(name) {
            Some(op) => op,
            None => {
                let mut d = Diagnostic::error(span, alloc::format!("unknown nOP `{name}`"));
                let best = self
                    .registry
                    .names()
                    .into_iter()
                    .map(|n| (edit_distance(&n, name), n))
                    .min();
                if let Some((dist, n)) = best {
                    if dist <= 3 {
                        d = d.with_hint(alloc::format!("did you mean `{n}`?"));
                    }
                }
                return Err(d);
            }
        };
        let roles: Vec<ArgRole> = match &op {
            NopRef::Builtin(k) => k.signature().to_vec(),
            NopRef::Custom(c) => c.signature(),
        };
        if args.len() != roles.len() {
            let layout: Vec<&str> = roles.iter().map(|r| if *r == ArgRole::Data { "value" } else { "constant" }).collect();
            return Err(Diagnostic::error(
                span,
                alloc::format!("`{name}` takes {} arguments, got {}", roles.len(), args.len()),
            )
            .with_hint(alloc::format!("expected ({})", layout.join(", "))));
        }
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push((self.value(a)?, a.span()));
        }
        let mut statics = Vec::new();
        for ((v, sp), r) in vals.iter().zip(&roles) {
            if *r == ArgRole::Static {
                match v {
                    Val::Const(c) if i64::try_from(*c).is_ok() => statics.push(*c as i64),
                    Val::Const(_) => return Err(Diagnostic::error(*sp, "constant out of range")),
                    Val::Node(_) => {
                        return Err(Diagnostic::error(*sp, alloc::format!("this argument of `{name}` must be a constant"))
                            .with_hint("widths, byte counts and bit positions are compile-time integers"))
                    }
                }
            }
        }
        let data: Vec<(Val, Span)> =
            vals.iter().zip(&roles).filter(|(_, r)| **r == ArgRole::Data).map(|(v, _)| *v).collect();
        let node_width = data.iter().find_map(|(v, _)| match v {
            Val::Node(x) => Some(self.b.width_of(*x)),
            _ => None,
        });
        let mut inputs = Vec::with_capacity(data.len());
        for (slot, (v, sp)) in data.iter().enumerate() {
            let x = match v {
                Val::Node(x) => *x,
                Val::Const(c) => {
                    let w = match &op {
                        NopRef::Builtin(k) => literal_width(*k, slot, &statics, &data, &self.b),
                        NopRef::Custom(_) => node_width.unwrap_or(XLEN),
                    };
                    self.literal(*c, w, *sp)?
                }
            };
            inputs.push(x);
        }
        match op {
            NopRef::Builtin(k) => {
                let v = self.emit(k, &inputs, &statics, span)?;
                if k == NopKind::RegWrite {
                    self.reg_writes.push((inputs[0], span));
                }
                Ok(if k.has_output() { Some(v) } else { None })
            }
            NopRef::Custom(c) => {
                let v = self.b.custom(c.clone(), &inputs, &statics).map_err(|e| width_diag(&c.name, e.into(), span))?;
                Ok(Some(Val::Node(v)))
            }
        }
    }
}

/// Width given to a constant data argument, chosen from the nOP's typing
/// rule and the other operands.
fn literal_width(kind: NopKind, slot: usize, statics: &[i64], data: &[(Val, Span)], b: &GraphBuilder) -> u32 {
    use NopKind::*;
    let sibling = || {
        data.iter()
            .enumerate()
            .filter(|(i, _)| *i != slot)
            .find_map(|(i, (v, _))| match v {
                Val::Node(x) if !(kind == CondAssign && i == 0) => Some(b.width_of(*x)),
                _ => None,
            })
            .unwrap_or(XLEN)
    };
    let st = |i: usize| statics.get(i).copied().unwrap_or(XLEN as i64).clamp(1, MAX_WIDTH as i64) as u32;
    match (kind, slot) {
        (RegRead | RegWrite, 0) => REG_INDEX_WIDTH,
        (RegWrite, 1) => XLEN,
        (MemRead | MemWrite, 0) => XLEN,
        (MemWrite, _) => 8 * st(0).min(16),
        (IncPc | UpdatePc, _) => XLEN,
        (CondUpdatePc, 0) => 1,
        (CondUpdatePc, _) => XLEN,
        (CondAssign, 0) => 1,
        (Sll | Srl | Sra, 0) => XLEN,
        (Sll | Srl | Sra, _) => sibling(),
        (Concat, 0) => st(0),
        (Concat, _) => st(1),
        (SignExtend | UnsignExtend, _) => st(0),
        (Slice | Not, _) => XLEN,
        _ => sibling(),
    }
}

fn fold(op: BinOp, x: i128, y: i128, span: Span) -> CResult<i128> {
    Ok(match op {
        BinOp::Add => x.wrapping_add(y),
        BinOp::Sub => x.wrapping_sub(y),
        BinOp::Mul => x.wrapping_mul(y),
        BinOp::And => x & y,
        BinOp::Or => x | y,
        BinOp::Xor => x ^ y,
        BinOp::Shl | BinOp::Shr => {
            if !(0..128).contains(&y) {
                return Err(Diagnostic::error(span, alloc::format!("shift amount {y} out of range")));
            }
            if op == BinOp::Shl {
                x.wrapping_shl(y as u32)
            } else {
                x >> y
            }
        }
    })
}

fn width_diag(op: &str, e: EvalError, span: Span) -> Diagnostic {
    let d = Diagnostic::error(span, e.to_string());
    match e {
        EvalError::Width(WidthError::Mismatch { a, b, .. }) => {
            let (lo, hi) = (a.min(b), a.max(b));
            d.with_hint(alloc::format!(
                "operands of {op} must have equal widths; widen the {lo}-bit operand with SIGN_EXTEND(x, {lo}, {hi}) or UNSIGN_EXTEND(x, {lo}, {hi})"
            ))
        }
        EvalError::Width(WidthError::Expected { slot, expected, got, .. }) => {
            if expected > got {
                d.with_hint(alloc::format!(
                    "argument {} must be {expected} bits; extend it with SIGN_EXTEND or UNSIGN_EXTEND",
                    slot + 1
                ))
            } else {
                d.with_hint(alloc::format!("argument {} must be {expected} bits; narrow it with SLICE", slot + 1))
            }
        }
        EvalError::Memory(_) => d.with_hint("memory accesses move 1, 2, 4 or 8 bytes"),
        _ => d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfg::Op;
    use crate::dsl::{compile_source, syntax_feedback};

    fn widths(list: &[(&str, u32)]) -> BTreeMap<String, u32> {
        list.iter().map(|(n, w)| (String::from(*n), *w)).collect()
    }

    const ADDI: &str = "def addi(rd, rs1, imm):\n    x = REG_READ(rs1)\n    y = ADD(x, SIGN_EXTEND(imm, 12, 64))\n    REG_WRITE(rd, y)\n    INC_PC(pc)\n";

    fn nop_count(g: &Graph) -> usize {
        g.nodes().iter().filter(|n| matches!(n.op, Op::Nop(_))).count()
    }

    #[test]
    fn addi_has_five_nops() {
        let c = compile_source(ADDI, &widths(&[("rd", 5), ("rs1", 5), ("imm", 12)]), &NopRegistry::new()).unwrap();
        assert_eq!(nop_count(&c.graph), 5);
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn constant_expressions_fold() {
        let src = "def f(rd, rs1):\n    x = AND(REG_READ(rs1), (1 << 4) - 1)\n    REG_WRITE(rd, x)\n    INC_PC(pc)\n";
        let c = compile_source(src, &widths(&[("rd", 5), ("rs1", 5)]), &NopRegistry::new()).unwrap();
        assert_eq!(nop_count(&c.graph), 4);
        let lit = c.graph.nodes().iter().find_map(|n| match n.op {
            Op::Literal(v) if v.width() == 64 => Some(v.value()),
            _ => None,
        });
        assert_eq!(lit, Some(15));
    }

    #[test]
    fn missing_pc_update() {
        let src = "def f(rd):\n    REG_WRITE(rd, 1)\n";
        let e = compile_source(src, &widths(&[("rd", 5)]), &NopRegistry::new()).unwrap_err();
        assert!(e[0].message.contains("missing terminal PC update"));
    }

    #[test]
    fn misspelled_nop_gets_a_suggestion() {
        let src = "def f(rd, rs1):\n    x = REG_REED(rs1)\n    INC_PC(pc)\n";
        let (ok, d) = syntax_feedback(src, &widths(&[("rd", 5), ("rs1", 5)]), &NopRegistry::new());
        assert!(!ok);
        assert_eq!(d[0].span, Span { line: 2, col: 9 });
        assert!(d[0].hint.as_deref().unwrap().contains("REG_READ"));
    }

    #[test]
    fn width_mismatch_suggests_extension() {
        let src = "def f(rd, rs1, imm):\n    REG_WRITE(rd, ADD(REG_READ(rs1), imm))\n    INC_PC(pc)\n";
        let (ok, d) = syntax_feedback(src, &widths(&[("rd", 5), ("rs1", 5), ("imm", 12)]), &NopRegistry::new());
        assert!(!ok);
        assert!(d[0].hint.as_deref().unwrap().contains("SIGN_EXTEND(x, 12, 64)"));
    }

    #[test]
    fn loops_unroll_with_indexed_names() {
        let src = "def f(rd, rs1):\n    a[0] = REG_READ(rs1)\n    for i in range(3):\n        t = ADD(a[i], i + 1)\n        a[i + 1] = t\n    REG_WRITE(rd, a[3])\n    INC_PC(pc)\n";
        let c = compile_source(src, &widths(&[("rd", 5), ("rs1", 5)]), &NopRegistry::new()).unwrap();
        assert_eq!(c.graph.nodes().iter().filter(|n| n.op == Op::Nop(NopKind::Add)).count(), 3);
    }

    #[test]
    fn reassignment_is_rejected() {
        let src = "def f(rd):\n    x = 1\n    x = 2\n    INC_PC(pc)\n";
        let e = compile_source(src, &widths(&[("rd", 5)]), &NopRegistry::new()).unwrap_err();
        assert!(e[0].message.contains("already defined"));
    }

    #[test]
    fn duplicate_register_write_warns() {
        let src = "def f(rd):\n    REG_WRITE(rd, 1)\n    REG_WRITE(rd, 2)\n    INC_PC(pc)\n";
        let c = compile_source(src, &widths(&[("rd", 5)]), &NopRegistry::new()).unwrap();
        assert_eq!(c.warnings.len(), 1);
    }
}
