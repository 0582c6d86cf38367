use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::ast::{BinOp, Expr, Function, Stmt, Target, UnOp};
use super::lexer::{lex, Tok};
use super::{Diagnostic, Span};

const UNSUPPORTED: &[&str] = &[
    "while", "if", "elif", "else", "return", "import", "from", "class", "lambda", "with", "try", "except",
    "finally", "break", "continue", "yield", "global", "nonlocal", "del", "assert", "raise", "async", "await",
];

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

/// Parses one `def` into an AST. Everything outside the DSL subset is a
/// syntax error with a span.
pub fn parse(source: &str) -> Result<Function, Vec<Diagnostic>> {
    let toks = lex(source).map_err(|d| vec![d])?;
    let mut p = Parser { toks, pos: 0 };
    p.function().map_err(|d| vec![d])
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, ctx: &str) -> PResult<Span> {
        if *self.peek() == want {
            Ok(self.bump().1)
        } else {
            Err(Diagnostic::error(
                self.span(),
                alloc::format!("expected {} {ctx}, found {}", want.describe(), self.peek().describe()),
            ))
        }
    }

    fn ident(&mut self, ctx: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let sp = self.bump().1;
                if UNSUPPORTED.contains(&s.as_str()) {
                    return Err(unsupported(&s, sp));
                }
                Ok((s, sp))
            }
            other => Err(Diagnostic::error(self.span(), alloc::format!("expected a name {ctx}, found {}", other.describe()))),
        }
    }

    fn function(&mut self) -> PResult<Function> {
        while *self.peek() == Tok::Newline {
            self.bump();
        }
        match self.peek().clone() {
            Tok::Ident(k) if k == "def" => {}
            Tok::Ident(k) if UNSUPPORTED.contains(&k.as_str()) => return Err(unsupported(&k, self.span())),
            other => {
                return Err(Diagnostic::error(self.span(), alloc::format!("expected `def`, found {}", other.describe()))
                    .with_hint("an nOP function starts with `def name(operands):`"))
            }
        }
        let span = self.bump().1;
        let (name, _) = self.ident("after `def`")?;
        self.expect(Tok::LParen, "after the function name")?;
        let mut params = Vec::new();
        while *self.peek() != Tok::RParen {
            let (p, sp) = self.ident("in the parameter list")?;
            if params.iter().any(|(q, _)| *q == p) {
                return Err(Diagnostic::error(sp, alloc::format!("duplicate parameter `{p}`")));
            }
            params.push((p, sp));
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::RParen, "to close the parameter list")?;
        self.expect(Tok::Colon, "after the parameter list")?;
        let body = self.block()?;
        while *self.peek() == Tok::Newline {
            self.bump();
        }
        if *self.peek() != Tok::Eof {
            return Err(Diagnostic::error(self.span(), "only one function per file is allowed"));
        }
        Ok(Function { name, params, body, span })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(Tok::Newline, "before an indented block")?;
        self.expect(Tok::Indent, "to start the block")?;
        let mut body = Vec::new();
        while !matches!(self.peek(), Tok::Dedent | Tok::Eof) {
            body.push(self.statement()?);
        }
        if *self.peek() == Tok::Dedent {
            self.bump();
        }
        Ok(body)
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let sp = self.span();
        if let Tok::Ident(k) = self.peek().clone() {
            match k.as_str() {
                "for" => return self.for_loop(),
                "pass" => {
                    self.bump();
                    self.end_of_statement()?;
                    return Ok(Stmt::Pass);
                }
                "def" => {
                    return Err(Diagnostic::error(sp, "nested functions are not supported"));
                }
                k if UNSUPPORTED.contains(&k) => return Err(unsupported(k, sp)),
                _ => {}
            }
        }
        let e = self.expr()?;
        if *self.peek() == Tok::Assign {
            let target = match e {
                Expr::Name(n, _) => Target::Name(n),
                Expr::Index(n, i, _) => Target::Indexed(n, *i),
                other => {
                    return Err(Diagnostic::error(other.span(), "only a name or `name[index]` can be assigned"));
                }
            };
            self.bump();
            let value = self.expr()?;
            self.end_of_statement()?;
            return Ok(Stmt::Assign { target, value, span: sp });
        }
        self.end_of_statement()?;
        Ok(Stmt::Expr(e))
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        match self.peek() {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::Dedent | Tok::Eof => Ok(()),
            other => Err(Diagnostic::error(self.span(), alloc::format!("unexpected {} after statement", other.describe()))),
        }
    }

    fn for_loop(&mut self) -> PResult<Stmt> {
        let span = self.bump().1;
        let (var, _) = self.ident("after `for`")?;
        match self.bump() {
            (Tok::Ident(k), _) if k == "in" => {}
            (t, sp) => return Err(Diagnostic::error(sp, alloc::format!("expected `in`, found {}", t.describe()))),
        }
        match self.bump() {
            (Tok::Ident(k), _) if k == "range" => {}
            (_, sp) => {
                return Err(Diagnostic::error(sp, "loops must iterate over `range(N)` with a constant bound")
                    .with_hint("write `for i in range(4):`"))
            }
        }
        self.expect(Tok::LParen, "after `range`")?;
        let first = self.expr()?;
        let (start, end) = if *self.peek() == Tok::Comma {
            self.bump();
            let second = self.expr()?;
            (first, second)
        } else {
            (Expr::Int(0, first.span()), first)
        };
        self.expect(Tok::RParen, "to close `range(`")?;
        self.expect(Tok::Colon, "after the loop header")?;
        let body = self.block()?;
        Ok(Stmt::For { var, start, end, body, span })
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: &[&[(Tok, BinOp)]] = &[
            &[(Tok::Pipe, BinOp::Or)],
            &[(Tok::Caret, BinOp::Xor)],
            &[(Tok::Amp, BinOp::And)],
            &[(Tok::Shl, BinOp::Shl), (Tok::Shr, BinOp::Shr)],
            &[(Tok::Plus, BinOp::Add), (Tok::Minus, BinOp::Sub)],
            &[(Tok::Star, BinOp::Mul)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let Some((_, op)) = LEVELS[level].iter().find(|(t, _)| t == self.peek()) else { break };
            let op = *op;
            let span = self.bump().1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(Expr::Unary { op: UnOp::Neg, expr: Box::new(self.unary()?), span })
            }
            Tok::Tilde => {
                self.bump();
                Ok(Expr::Unary { op: UnOp::Not, expr: Box::new(self.unary()?), span })
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let (tok, span) = self.bump();
        match tok {
            Tok::Int(v) => Ok(Expr::Int(v, span)),
            Tok::Str => Ok(Expr::Str(span)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "to close `(`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if UNSUPPORTED.contains(&name.as_str()) || name == "def" || name == "for" {
                    return Err(unsupported(&name, span));
                }
                match self.peek() {
                    Tok::LParen => {
                        self.bump();
                        let mut args = Vec::new();
                        while *self.peek() != Tok::RParen {
                            args.push(self.expr()?);
                            if *self.peek() == Tok::Comma {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                        self.expect(Tok::RParen, alloc::format!("to close the call to `{name}`").as_str())?;
                        Ok(Expr::Call { name, args, span })
                    }
                    Tok::LBracket => {
                        self.bump();
                        let idx = self.expr()?;
                        self.expect(Tok::RBracket, "to close the index")?;
                        Ok(Expr::Index(name, Box::new(idx), span))
                    }
                    _ => Ok(Expr::Name(name, span)),
                }
            }
            other => Err(Diagnostic::error(span, alloc::format!("expected an expression, found {}", other.describe()))),
        }
    }
}

fn unsupported(kw: &str, span: Span) -> Diagnostic {
    let d = Diagnostic::error(span, alloc::format!("`{kw}` is not supported in nOP functions"));
    match kw {
        "if" | "else" | "elif" => d.with_hint("select values with COND_ASSIGN and branch with COND_UPDATE_PC"),
        "while" => d.with_hint("use `for i in range(N):` with a constant N"),
        "return" => d.with_hint("nOP functions have no return value; write results with REG_WRITE or MEM_WRITE"),
        _ => d,
    }
}
