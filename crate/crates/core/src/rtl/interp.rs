//! Parser and evaluator for the Verilog subset the emitter produces:
//! one module of parameters, input/output ports, wires with net
//! assignments and `assign` statements over sized vectors up to 128 bits.
//! Expression sizing and signedness follow the Verilog rules: operands of
//! context-determined operators are extended to the widest of the
//! expression and its destination, signed only when every operand is.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::bitvec::{mask, BitVec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InterpError {
    #[error("syntax error near token {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("`{0}` is declared twice")]
    Redeclared(String),
    #[error("`{0}` is not declared")]
    Undeclared(String),
    #[error("`{0}` has no driver")]
    Undriven(String),
    #[error("`{0}` is driven twice")]
    MultiplyDriven(String),
    #[error("combinational loop through `{0}`")]
    Loop(String),
    #[error("width {0} is outside 1..=128")]
    Width(u32),
    #[error("expected {expected} inputs, got {got}")]
    Inputs { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num { size: Option<u32>, value: u128 },
    Sym(&'static str),
}

const SYMS: &[&str] = &[
    ">>>", "<<", ">>", ">=", "<=", "==", "!=", "(", ")", "[", "]", "{", "}", ",", ";", ":", "=", "#", "?", "~", "&",
    "|", "^", "+", "-", "*", "<", ">",
];

fn lex(src: &str) -> Result<Vec<Tok>, InterpError> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, msg: &str| InterpError::Syntax { pos, msg: msg.into() };
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if b[i..].starts_with(b"//") {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'$') {
                i += 1;
            }
            out.push(Tok::Ident(src[s..i].to_string()));
        } else if c.is_ascii_digit() {
            let s = i;
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'_') {
                i += 1;
            }
            let first: String = src[s..i].chars().filter(|c| *c != '_').collect();
            let first: u128 = first.parse().map_err(|_| err(out.len(), "bad number"))?;
            if i < b.len() && b[i] == b'\'' {
                let radix = match b.get(i + 1) {
                    Some(b'd') => 10,
                    Some(b'h') => 16,
                    Some(b'b') => 2,
                    _ => return Err(err(out.len(), "unknown radix")),
                };
                i += 2;
                let s = i;
                while i < b.len() && (b[i].is_ascii_hexdigit() || b[i] == b'_') {
                    i += 1;
                }
                let digits: String = src[s..i].chars().filter(|c| *c != '_').collect();
                let value = u128::from_str_radix(&digits, radix).map_err(|_| err(out.len(), "bad literal"))?;
                out.push(Tok::Num { size: Some(first as u32), value });
            } else {
                out.push(Tok::Num { size: None, value: first });
            }
        } else {
            let sym = SYMS.iter().find(|s| b[i..].starts_with(s.as_bytes())).ok_or_else(|| err(out.len(), "unexpected character"))?;
            out.push(Tok::Sym(sym));
            i += sym.len();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Expr {
    Lit { width: u32, value: u128 },
    Net(String),
    Select { net: String, hi: u32, lo: u32 },
    Signed(Box<Expr>),
    Not(Box<Expr>),
    Bin(&'static str, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Concat(Vec<Expr>),
    Repeat(u32, Box<Expr>),
}

/// A parsed module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Module {
    pub name: String,
    /// Name, width and default value.
    pub params: Vec<(String, u32, u128)>,
    pub inputs: Vec<(String, u32)>,
    pub outputs: Vec<(String, u32)>,
    widths: BTreeMap<String, u32>,
    drivers: BTreeMap<String, Expr>,
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

type PResult<T> = Result<T, InterpError>;

impl Parser {
    fn err<T>(&self, msg: &str) -> PResult<T> {
        Err(InterpError::Syntax { pos: self.pos, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(t)) if *t == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(t)) if t == s)
    }

    fn sym(&mut self, s: &str) -> PResult<()> {
        if self.is_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&alloc::format!("expected `{s}`"))
        }
    }

    fn kw(&mut self, s: &str) -> PResult<()> {
        if self.is_kw(s) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&alloc::format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) if !s.starts_with('$') => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected a name"),
        }
    }

    fn int(&mut self) -> PResult<u128> {
        match self.peek() {
            Some(Tok::Num { size: None, value }) => {
                let v = *value;
                self.pos += 1;
                Ok(v)
            }
            _ => self.err("expected an integer"),
        }
    }

    /// Optional `[hi:0]`; width 1 when absent.
    fn range(&mut self) -> PResult<u32> {
        if !self.is_sym("[") {
            return Ok(1);
        }
        self.sym("[")?;
        let hi = self.int()?;
        self.sym(":")?;
        if self.int()? != 0 {
            return self.err("ranges must end at bit 0");
        }
        self.sym("]")?;
        let w = hi as u32 + 1;
        if w > 128 {
            return Err(InterpError::Width(w));
        }
        Ok(w)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let c = self.binary(0)?;
        if self.is_sym("?") {
            self.sym("?")?;
            let a = self.expr()?;
            self.sym(":")?;
            let b = self.expr()?;
            return Ok(Expr::Cond(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(c)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: &[&[&str]] =
            &[&["|"], &["^"], &["&"], &["==", "!="], &["<", "<=", ">", ">="], &["<<", ">>", ">>>"], &["+", "-"], &["*"]];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(Tok::Sym(s)) = self.peek() {
            let Some(op) = LEVELS[level].iter().find(|o| *o == s) else { break };
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.is_sym("~") {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num { size, value }) => {
                self.pos += 1;
                let width = size.unwrap_or(32);
                if width == 0 || width > 128 {
                    return Err(InterpError::Width(width));
                }
                Ok(Expr::Lit { width, value: value & mask(width) })
            }
            Some(Tok::Ident(s)) if s == "$signed" => {
                self.pos += 1;
                self.sym("(")?;
                let e = self.expr()?;
                self.sym(")")?;
                Ok(Expr::Signed(Box::new(e)))
            }
            Some(Tok::Ident(_)) => {
                let net = self.ident()?;
                if !self.is_sym("[") {
                    return Ok(Expr::Net(net));
                }
                self.sym("[")?;
                let hi = self.int()? as u32;
                let lo = if self.is_sym(":") {
                    self.sym(":")?;
                    self.int()? as u32
                } else {
                    hi
                };
                self.sym("]")?;
                if lo > hi {
                    return self.err("reversed bit range");
                }
                Ok(Expr::Select { net, hi, lo })
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.sym(")")?;
                Ok(e)
            }
            Some(Tok::Sym("{")) => {
                self.pos += 1;
                let first = self.expr()?;
                if self.is_sym("{") {
                    let Expr::Lit { value, .. } = first else { return self.err("replication count must be a constant") };
                    self.sym("{")?;
                    let inner = self.expr()?;
                    self.sym("}")?;
                    self.sym("}")?;
                    return Ok(Expr::Repeat(value as u32, Box::new(inner)));
                }
                let mut parts = alloc::vec![first];
                while self.is_sym(",") {
                    self.pos += 1;
                    parts.push(self.expr()?);
                }
                self.sym("}")?;
                Ok(Expr::Concat(parts))
            }
            _ => self.err("expected an expression"),
        }
    }
}

/// Parses one module.
pub fn parse_module(src: &str) -> Result<Module, InterpError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    p.kw("module")?;
    let name = p.ident()?;
    let mut m = Module {
        name,
        params: Vec::new(),
        inputs: Vec::new(),
        outputs: Vec::new(),
        widths: BTreeMap::new(),
        drivers: BTreeMap::new(),
    };
    let declare = |m: &mut Module, n: &str, w: u32| -> PResult<()> {
        if m.widths.insert(n.to_string(), w).is_some() {
            return Err(InterpError::Redeclared(n.into()));
        }
        Ok(())
    };
    if p.is_sym("#") {
        p.sym("#")?;
        p.sym("(")?;
        loop {
            p.kw("parameter")?;
            let w = p.range()?;
            let n = p.ident()?;
            p.sym("=")?;
            let Expr::Lit { value, .. } = p.primary()? else { return p.err("parameter default must be a literal") };
            declare(&mut m, &n, w)?;
            m.params.push((n, w, value & mask(w)));
            if !p.is_sym(",") {
                break;
            }
            p.sym(",")?;
        }
        p.sym(")")?;
    }
    p.sym("(")?;
    loop {
        let input = if p.is_kw("input") {
            true
        } else if p.is_kw("output") {
            false
        } else {
            return p.err("expected a port");
        };
        p.pos += 1;
        if p.is_kw("wire") {
            p.pos += 1;
        }
        let w = p.range()?;
        let n = p.ident()?;
        declare(&mut m, &n, w)?;
        if input { &mut m.inputs } else { &mut m.outputs }.push((n, w));
        if !p.is_sym(",") {
            break;
        }
        p.sym(",")?;
    }
    p.sym(")")?;
    p.sym(";")?;
    loop {
        if p.is_kw("endmodule") {
            p.pos += 1;
            break;
        }
        let drive = |m: &mut Module, n: String, e: Expr| -> PResult<()> {
            if !m.widths.contains_key(&n) {
                return Err(InterpError::Undeclared(n));
            }
            if m.inputs.iter().any(|(i, _)| *i == n) || m.params.iter().any(|(i, _, _)| *i == n) {
                return Err(InterpError::MultiplyDriven(n));
            }
            if m.drivers.contains_key(&n) {
                return Err(InterpError::MultiplyDriven(n));
            }
            m.drivers.insert(n, e);
            Ok(())
        };
        if p.is_kw("wire") {
            p.pos += 1;
            let w = p.range()?;
            let n = p.ident()?;
            declare(&mut m, &n, w)?;
            if p.is_sym("=") {
                p.sym("=")?;
                let e = p.expr()?;
                drive(&mut m, n, e)?;
            }
        } else if p.is_kw("assign") {
            p.pos += 1;
            let n = p.ident()?;
            p.sym("=")?;
            let e = p.expr()?;
            drive(&mut m, n, e)?;
        } else {
            return p.err("expected `wire`, `assign` or `endmodule`");
        }
        p.sym(";")?;
    }
    if p.pos != p.toks.len() {
        return p.err("text after endmodule");
    }
    for n in m.widths.keys() {
        let is_source = m.inputs.iter().any(|(i, _)| i == n) || m.params.iter().any(|(i, _, _)| i == n);
        if !is_source && !m.drivers.contains_key(n) {
            return Err(InterpError::Undriven(n.clone()));
        }
    }
    // Every referenced net must exist.
    fn refs(e: &Expr, out: &mut Vec<String>) {
        match e {
            Expr::Net(n) | Expr::Select { net: n, .. } => out.push(n.clone()),
            Expr::Signed(a) | Expr::Not(a) | Expr::Repeat(_, a) => refs(a, out),
            Expr::Bin(_, a, b) => {
                refs(a, out);
                refs(b, out);
            }
            Expr::Cond(a, b, c) => {
                refs(a, out);
                refs(b, out);
                refs(c, out);
            }
            Expr::Concat(v) => v.iter().for_each(|x| refs(x, out)),
            Expr::Lit { .. } => {}
        }
    }
    for e in m.drivers.values() {
        let mut r = Vec::new();
        refs(e, &mut r);
        if let Some(n) = r.into_iter().find(|n| !m.widths.contains_key(n)) {
            return Err(InterpError::Undeclared(n));
        }
    }
    Ok(m)
}

struct Eval<'a> {
    m: &'a Module,
    values: BTreeMap<&'a str, u128>,
    active: Vec<&'a str>,
}

fn extend(v: u128, from: u32, to: u32, signed: bool) -> u128 {
    let v = v & mask(from);
    if signed && to > from && (v >> (from - 1)) & 1 == 1 {
        (v | !mask(from)) & mask(to)
    } else {
        v & mask(to)
    }
}

fn as_signed(v: u128, w: u32) -> i128 {
    if w == 128 {
        v as i128
    } else if (v >> (w - 1)) & 1 == 1 {
        (v | !mask(w)) as i128
    } else {
        v as i128
    }
}

impl<'a> Eval<'a> {
    fn self_width(&self, e: &Expr) -> u32 {
        match e {
            Expr::Lit { width, .. } => *width,
            Expr::Net(n) => self.m.widths[n],
            Expr::Select { hi, lo, .. } => hi - lo + 1,
            Expr::Signed(a) | Expr::Not(a) => self.self_width(a),
            Expr::Bin(op, a, b) => match *op {
                "==" | "!=" | "<" | "<=" | ">" | ">=" => 1,
                "<<" | ">>" | ">>>" => self.self_width(a),
                _ => self.self_width(a).max(self.self_width(b)),
            },
            Expr::Cond(_, a, b) => self.self_width(a).max(self.self_width(b)),
            Expr::Concat(v) => v.iter().map(|x| self.self_width(x)).sum(),
            Expr::Repeat(n, a) => n * self.self_width(a),
        }
    }

    fn signed(&self, e: &Expr) -> bool {
        match e {
            Expr::Signed(_) => true,
            Expr::Not(a) => self.signed(a),
            Expr::Bin(op, a, b) => match *op {
                "==" | "!=" | "<" | "<=" | ">" | ">=" => false,
                "<<" | ">>" | ">>>" => self.signed(a),
                _ => self.signed(a) && self.signed(b),
            },
            Expr::Cond(_, a, b) => self.signed(a) && self.signed(b),
            _ => false,
        }
    }

    fn net(&mut self, n: &'a str) -> Result<u128, InterpError> {
        if let Some(v) = self.values.get(n) {
            return Ok(*v);
        }
        if self.active.contains(&n) {
            return Err(InterpError::Loop(n.into()));
        }
        self.active.push(n);
        let e = &self.m.drivers[n];
        let w = self.m.widths[n];
        let ew = self.self_width(e).max(w);
        if ew > 128 {
            return Err(InterpError::Width(ew));
        }
        let v = self.eval(e, ew, self.signed(e))? & mask(w);
        self.active.pop();
        self.values.insert(n, v);
        Ok(v)
    }

    /// Value of `e` sized to `w` bits under signedness `s`.
    fn eval(&mut self, e: &'a Expr, w: u32, s: bool) -> Result<u128, InterpError> {
        Ok(match e {
            Expr::Lit { width, value } => extend(*value, *width, w, s),
            Expr::Net(n) => {
                let v = self.net(n)?;
                extend(v, self.m.widths[n], w, s)
            }
            Expr::Select { net, hi, lo } => {
                let nw = self.m.widths[net.as_str()];
                if *hi >= nw {
                    return Err(InterpError::Width(*hi + 1));
                }
                let v = self.net(net)?;
                extend(v >> lo, hi - lo + 1, w, false)
            }
            Expr::Signed(a) => {
                let aw = self.self_width(a);
                let v = self.eval(a, aw, self.signed(a))?;
                extend(v, aw, w, s)
            }
            Expr::Not(a) => !self.eval(a, w, s)? & mask(w),
            Expr::Bin(op, a, b) => match *op {
                "==" | "!=" | "<" | "<=" | ">" | ">=" => {
                    let ow = self.self_width(a).max(self.self_width(b));
                    let os = self.signed(a) && self.signed(b);
                    let (x, y) = (self.eval(a, ow, os)?, self.eval(b, ow, os)?);
                    let ord = if os { as_signed(x, ow).cmp(&as_signed(y, ow)) } else { x.cmp(&y) };
                    use core::cmp::Ordering::*;
                    let r = match *op {
                        "==" => ord == Equal,
                        "!=" => ord != Equal,
                        "<" => ord == Less,
                        "<=" => ord != Greater,
                        ">" => ord == Greater,
                        _ => ord != Less,
                    };
                    r as u128
                }
                "<<" | ">>" | ">>>" => {
                    let x = self.eval(a, w, s)?;
                    let bw = self.self_width(b);
                    let amt = self.eval(b, bw, false)?;
                    match *op {
                        "<<" => if amt >= w as u128 { 0 } else { (x << amt) & mask(w) },
                        ">>" => if amt >= w as u128 { 0 } else { x >> amt },
                        _ => {
                            if s {
                                let sh = amt.min(w as u128 - 1) as u32;
                                (as_signed(x, w) >> sh) as u128 & mask(w)
                            } else if amt >= w as u128 {
                                0
                            } else {
                                x >> amt
                            }
                        }
                    }
                }
                _ => {
                    let (x, y) = (self.eval(a, w, s)?, self.eval(b, w, s)?);
                    let r = match *op {
                        "&" => x & y,
                        "|" => x | y,
                        "^" => x ^ y,
                        "+" => x.wrapping_add(y),
                        "-" => x.wrapping_sub(y),
                        _ => x.wrapping_mul(y),
                    };
                    r & mask(w)
                }
            },
            Expr::Cond(c, a, b) => {
                let cw = self.self_width(c);
                if self.eval(c, cw, self.signed(c))? != 0 {
                    self.eval(a, w, s)?
                } else {
                    self.eval(b, w, s)?
                }
            }
            Expr::Concat(parts) => {
                let mut v = 0u128;
                let mut total = 0;
                for p in parts {
                    let pw = self.self_width(p);
                    v = (v << pw) | self.eval(p, pw, self.signed(p))?;
                    total += pw;
                }
                extend(v, total, w, false)
            }
            Expr::Repeat(n, a) => {
                let aw = self.self_width(a);
                let x = self.eval(a, aw, self.signed(a))?;
                let mut v = 0u128;
                for _ in 0..*n {
                    v = (v << aw) | x;
                }
                extend(v, n * aw, w, false)
            }
        })
    }
}

impl Module {
    /// Evaluates every output. `params` overrides the parameter defaults.
    pub fn eval(&self, inputs: &[BitVec], params: Option<&[BitVec]>) -> Result<Vec<BitVec>, InterpError> {
        if inputs.len() != self.inputs.len() {
            return Err(InterpError::Inputs { expected: self.inputs.len(), got: inputs.len() });
        }
        let mut ev = Eval { m: self, values: BTreeMap::new(), active: Vec::new() };
        for ((n, w), v) in self.inputs.iter().zip(inputs) {
            ev.values.insert(n, v.value() & mask(*w));
        }
        for (i, (n, w, d)) in self.params.iter().enumerate() {
            let v = params.and_then(|p| p.get(i)).map_or(*d, |v| v.value());
            ev.values.insert(n, v & mask(*w));
        }
        self.outputs.iter().map(|(n, w)| Ok(BitVec::from_u128(ev.net(n)?, *w))).collect()
    }
}
