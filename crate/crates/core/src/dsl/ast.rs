use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use super::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub params: Vec<(String, Span)>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Name(String),
    Indexed(String, Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign { target: Target, value: Expr, span: Span },
    Expr(Expr),
    For { var: String, start: Expr, end: Expr, body: Vec<Stmt>, span: Span },
    Pass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Shl,
    Shr,
    And,
    Or,
    Xor,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Xor => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i128, Span),
    Name(String, Span),
    Index(String, Box<Expr>, Span),
    Call { name: String, args: Vec<Expr>, span: Span },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr>, span: Span },
    Unary { op: UnOp, expr: Box<Expr>, span: Span },
    /// A bare string literal (docstring); only valid as a statement.
    Str(Span),
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Int(_, s)
            | Expr::Name(_, s)
            | Expr::Index(_, _, s)
            | Expr::Call { span: s, .. }
            | Expr::Binary { span: s, .. }
            | Expr::Unary { span: s, .. }
            | Expr::Str(s) => *s,
        }
    }
}

impl Function {
    /// Number of nOP call sites, counting nested calls, before unrolling.
    pub fn call_count(&self) -> usize {
        fn expr(e: &Expr) -> usize {
            match e {
                Expr::Call { args, .. } => 1 + args.iter().map(expr).sum::<usize>(),
                Expr::Binary { lhs, rhs, .. } => expr(lhs) + expr(rhs),
                Expr::Unary { expr: e, .. } => expr(e),
                Expr::Index(_, e, _) => expr(e),
                _ => 0,
            }
        }
        fn stmts(s: &[Stmt]) -> usize {
            s.iter()
                .map(|s| match s {
                    Stmt::Assign { value, .. } => expr(value),
                    Stmt::Expr(e) => expr(e),
                    Stmt::For { body, .. } => stmts(body),
                    Stmt::Pass => 0,
                })
                .sum()
        }
        stmts(&self.body)
    }
}
