use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{Diagnostic, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i128),
    Str,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Assign,
    Plus,
    Minus,
    Star,
    Shl,
    Shr,
    Amp,
    Pipe,
    Caret,
    Tilde,
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => alloc::format!("`{s}`"),
            Tok::Int(v) => alloc::format!("`{v}`"),
            Tok::Str => "string".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Assign => "`=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Shl => "`<<`".into(),
            Tok::Shr => "`>>`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Caret => "`^`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Indent => "indentation".into(),
            Tok::Dedent => "dedent".into(),
            Tok::Eof => "end of file".into(),
        }
    }
}

pub(crate) fn lex(src: &str) -> Result<Vec<(Tok, Span)>, Diagnostic> {
    let mut out: Vec<(Tok, Span)> = Vec::new();
    let mut indents: Vec<u32> = vec![0];
    let mut depth = 0usize;
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut line = 1u32;
    let mut line_start = 0usize;
    let mut at_line_start = true;
    let span_at = |i: usize, line: u32, line_start: usize| Span { line, col: (i - line_start) as u32 + 1 };

    while i < chars.len() {
        if at_line_start && depth == 0 {
            // Measure indentation; skip blank and comment-only lines.
            let mut j = i;
            let mut width = 0u32;
            while j < chars.len() && (chars[j] == ' ' || chars[j] == '\t') {
                width += if chars[j] == '\t' { 4 } else { 1 };
                j += 1;
            }
            if j >= chars.len() {
                break;
            }
            if chars[j] == '\n' || chars[j] == '\r' || chars[j] == '#' {
                while j < chars.len() && chars[j] != '\n' {
                    j += 1;
                }
                i = j + 1;
                line += 1;
                line_start = i;
                continue;
            }
            let sp = span_at(j, line, line_start);
            let cur = *indents.last().unwrap();
            if width > cur {
                indents.push(width);
                out.push((Tok::Indent, sp));
            } else {
                while width < *indents.last().unwrap() {
                    indents.pop();
                    out.push((Tok::Dedent, sp));
                }
                if width != *indents.last().unwrap() {
                    return Err(Diagnostic::error(sp, "inconsistent indentation")
                        .with_hint("indent every line of a block by the same amount"));
                }
            }
            i = j;
            at_line_start = false;
        }
        let c = chars[i];
        let sp = span_at(i, line, line_start);
        match c {
            '\n' => {
                if depth == 0 && !matches!(out.last(), Some((Tok::Newline, _)) | None) {
                    out.push((Tok::Newline, sp));
                }
                i += 1;
                line += 1;
                line_start = i;
                at_line_start = depth == 0;
            }
            ' ' | '\t' | '\r' => i += 1,
            '\\' if chars.get(i + 1) == Some(&'\n') => {
                i += 2;
                line += 1;
                line_start = i;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '"' | '\'' => {
                let triple = chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c);
                let open = if triple { 3 } else { 1 };
                let mut j = i + open;
                loop {
                    if j >= chars.len() {
                        return Err(Diagnostic::error(sp, "unterminated string"));
                    }
                    if chars[j] == '\n' {
                        if !triple {
                            return Err(Diagnostic::error(sp, "unterminated string"));
                        }
                        line += 1;
                        line_start = j + 1;
                    }
                    if chars[j] == c && (!triple || (chars.get(j + 1) == Some(&c) && chars.get(j + 2) == Some(&c))) {
                        j += open;
                        break;
                    }
                    j += 1;
                }
                out.push((Tok::Str, sp));
                i = j;
            }
            '(' | '[' => {
                depth += 1;
                out.push((if c == '(' { Tok::LParen } else { Tok::LBracket }, sp));
                i += 1;
            }
            ')' | ']' => {
                depth = depth.saturating_sub(1);
                out.push((if c == ')' { Tok::RParen } else { Tok::RBracket }, sp));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, sp));
                i += 1;
            }
            ':' => {
                out.push((Tok::Colon, sp));
                i += 1;
            }
            '=' if chars.get(i + 1) != Some(&'=') => {
                out.push((Tok::Assign, sp));
                i += 1;
            }
            '+' => {
                out.push((Tok::Plus, sp));
                i += 1;
            }
            '-' => {
                out.push((Tok::Minus, sp));
                i += 1;
            }
            '*' if chars.get(i + 1) != Some(&'*') => {
                out.push((Tok::Star, sp));
                i += 1;
            }
            '<' if chars.get(i + 1) == Some(&'<') => {
                out.push((Tok::Shl, sp));
                i += 2;
            }
            '>' if chars.get(i + 1) == Some(&'>') => {
                out.push((Tok::Shr, sp));
                i += 2;
            }
            '&' => {
                out.push((Tok::Amp, sp));
                i += 1;
            }
            '|' => {
                out.push((Tok::Pipe, sp));
                i += 1;
            }
            '^' => {
                out.push((Tok::Caret, sp));
                i += 1;
            }
            '~' => {
                out.push((Tok::Tilde, sp));
                i += 1;
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let text: String = chars[i..j].iter().filter(|c| **c != '_').collect();
                let (digits, radix) = if let Some(h) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
                    (h.to_string(), 16)
                } else if let Some(b) = text.strip_prefix("0b").or_else(|| text.strip_prefix("0B")) {
                    (b.to_string(), 2)
                } else if let Some(o) = text.strip_prefix("0o").or_else(|| text.strip_prefix("0O")) {
                    (o.to_string(), 8)
                } else {
                    (text.clone(), 10)
                };
                let v = u128::from_str_radix(&digits, radix)
                    .ok()
                    .filter(|v| *v <= i128::MAX as u128)
                    .ok_or_else(|| Diagnostic::error(sp, alloc::format!("invalid integer literal `{text}`")))?;
                out.push((Tok::Int(v as i128), sp));
                i = j;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                out.push((Tok::Ident(chars[i..j].iter().collect()), sp));
                i = j;
            }
            other => {
                let what = match other {
                    '=' => "comparison `==` is not supported; use a CMP_* nOP".to_string(),
                    '*' => "`**` is not supported".to_string(),
                    '<' | '>' => "comparison operators are not supported; use a CMP_* nOP".to_string(),
                    '/' | '%' => alloc::format!("operator `{other}` is not supported"),
                    _ => alloc::format!("unexpected character `{other}`"),
                };
                return Err(Diagnostic::error(sp, what));
            }
        }
    }
    let end = Span { line, col: (chars.len().saturating_sub(line_start)) as u32 + 1 };
    if !matches!(out.last(), Some((Tok::Newline, _)) | None) {
        out.push((Tok::Newline, end));
    }
    while indents.len() > 1 {
        indents.pop();
        out.push((Tok::Dedent, end));
    }
    out.push((Tok::Eof, end));
    Ok(out)
}
