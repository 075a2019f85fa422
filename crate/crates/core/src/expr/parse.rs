//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' exponent)?
//! exponent:= '-'? INT ('^' exponent)? | '(' exponent ')'
//! primary := NUM | NAME | NAME '\''* '(' expr ')' | '(' expr ')'
//!          | 'D' '(' expr (',' NAME)+ ')' | 'ln' '(' expr ')' | 'exp' '(' expr ')'
//! ```
//!
//! `u_tx` is shorthand for `D(u,t,x)` when every independent variable has a
//! one-character name.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use super::diff::total_derivative;
use super::{Expr, Rational, SymbolKind};
use crate::context::VariableContext;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Name(String, u32),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    End,
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { chars: src.chars().collect(), pos: 0, _src: src };
        let mut out = Vec::new();
        loop {
            let t = lx.next()?;
            let end = t.0 == Tok::End;
            out.push(t);
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.chars.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        self.pos += 1;
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            d if d.is_ascii_digit() => {
                let mut digits: String = d.to_string();
                let mut frac = String::new();
                while let Some(&n) = self.chars.get(self.pos) {
                    if n.is_ascii_digit() {
                        digits.push(n);
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                if self.chars.get(self.pos) == Some(&'.') {
                    self.pos += 1;
                    while let Some(&n) = self.chars.get(self.pos) {
                        if n.is_ascii_digit() {
                            frac.push(n);
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
                let whole: BigInt = (digits.clone() + &frac).parse().map_err(|_| Error::Syntax {
                    position: start,
                    message: "bad number".to_string(),
                })?;
                let scale = num_traits::pow(BigInt::from(10), frac.len());
                Tok::Num(Rational::new(whole, scale))
            }
            a if a.is_ascii_alphabetic() => {
                let mut name: String = a.to_string();
                while let Some(&n) = self.chars.get(self.pos) {
                    if n.is_ascii_alphanumeric() || n == '_' {
                        name.push(n);
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let mut primes = 0;
                while self.chars.get(self.pos) == Some(&'\'') {
                    primes += 1;
                    self.pos += 1;
                }
                Tok::Name(name, primes)
            }
            other => {
                return Err(Error::Syntax { position: start, message: format!("unexpected character `{other}`") })
            }
        };
        Ok((tok, start))
    }
}

struct Parser<'c> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    ctx: &'c VariableContext,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { position: self.at(), message: message.into() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = lhs + self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = lhs * self.unary()?;
                }
                Tok::Slash => {
                    self.bump();
                    let at = self.at();
                    let rhs = self.unary()?;
                    if rhs.is_zero() {
                        return Err(Error::Syntax { position: at, message: "division by zero".to_string() });
                    }
                    lhs = lhs / rhs;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let at = self.at();
        let k = self.exponent()?;
        if base.is_zero() && k < 0 {
            return Err(Error::Syntax { position: at, message: "division by zero".to_string() });
        }
        Ok(Expr::pow(base, k))
    }

    fn exponent(&mut self) -> Result<i64> {
        if *self.peek() == Tok::LParen {
            self.bump();
            let k = self.exponent()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(k);
        }
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let k = match self.bump() {
            Tok::Num(q) if q.is_integer() => q.to_integer().to_i64(),
            _ => None,
        };
        let Some(mut k) = k else {
            return self.err("exponent must be an integer");
        };
        if negative {
            k = -k;
        }
        if *self.peek() == Tok::Caret {
            self.bump();
            let e = self.exponent()?;
            let e = u32::try_from(e).ok();
            k = match e.and_then(|e| k.checked_pow(e)) {
                Some(v) => v,
                None => return self.err("exponent out of range"),
            };
        }
        Ok(k)
    }

    fn primary(&mut self) -> Result<Expr> {
        let at = self.at();
        match self.bump() {
            Tok::Num(q) => Ok(Expr::num(q)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Name(name, primes) => self.named(name, primes, at),
            Tok::End => self.err("unexpected end of input"),
            t => Err(Error::Syntax { position: at, message: format!("unexpected token {t:?}") }),
        }
    }

    fn named(&mut self, name: String, primes: u32, at: usize) -> Result<Expr> {
        let call = *self.peek() == Tok::LParen;
        if primes > 0 && self.ctx.kind_of(&name) != Some(SymbolKind::Function) {
            return Err(Error::Syntax { position: at, message: format!("`{name}` is not a function") });
        }
        match name.as_str() {
            "D" if call => {
                self.bump();
                let inner_at = self.at();
                let inner = self.expr()?;
                if let super::Node::Sym(s) = inner.node() {
                    return Err(Error::Syntax {
                        position: inner_at,
                        message: format!("derivative of non-dependent symbol `{}`", s.name),
                    });
                }
                let mut out = inner;
                let mut saw_var = false;
                while *self.peek() == Tok::Comma {
                    self.bump();
                    let vat = self.at();
                    match self.bump() {
                        Tok::Name(v, 0) => {
                            if self.ctx.kind_of(&v) != Some(SymbolKind::Independent) {
                                return Err(match self.ctx.kind_of(&v) {
                                    None => Error::Undeclared { name: v, position: vat },
                                    Some(_) => Error::NotIndependent(v),
                                });
                            }
                            out = total_derivative(&out, &v, self.ctx)?;
                            saw_var = true;
                        }
                        _ => return Err(Error::Syntax { position: vat, message: "expected variable name".into() }),
                    }
                }
                if !saw_var {
                    return self.err("D(...) needs at least one variable");
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(out)
            }
            "ln" | "exp" if call => {
                self.bump();
                let arg = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(if name == "ln" { Expr::ln(arg) } else { Expr::exp(arg) })
            }
            _ => {
                if let Some((base, suffix)) = name.split_once('_') {
                    return self.shorthand(base, suffix, at);
                }
                match self.ctx.kind_of(&name) {
                    Some(SymbolKind::Function) => {
                        if !call {
                            return Err(Error::Syntax {
                                position: at,
                                message: format!("function `{name}` needs an argument"),
                            });
                        }
                        self.bump();
                        let arg = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        self.ctx.apply_function(&name, primes, arg)
                    }
                    Some(_) => self.ctx.symbol(&name),
                    None => Err(Error::Undeclared { name, position: at }),
                }
            }
        }
    }

    fn shorthand(&self, base: &str, suffix: &str, at: usize) -> Result<Expr> {
        match self.ctx.kind_of(base) {
            Some(SymbolKind::Dependent) => {}
            None => return Err(Error::Undeclared { name: base.to_string(), position: at }),
            Some(_) => return Err(Error::NotDependent(base.to_string())),
        }
        if self.ctx.independents().iter().any(|v| v.chars().count() != 1) || suffix.is_empty() {
            return Err(Error::Syntax {
                position: at,
                message: "`_` shorthand needs one-character independent variables".to_string(),
            });
        }
        let vars: Vec<String> = suffix.chars().map(|c| c.to_string()).collect();
        let refs: Vec<&str> = vars.iter().map(String::as_str).collect();
        for v in &refs {
            if self.ctx.kind_of(v) != Some(SymbolKind::Independent) {
                return Err(Error::NotIndependent(v.to_string()));
            }
        }
        self.ctx.derivative(base, &refs)
    }
}

/// Parses `text` against the declarations of `ctx`.
pub fn parse(text: &str, ctx: &VariableContext) -> Result<Expr> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser { toks, pos: 0, ctx };
    if *p.peek() == Tok::End {
        return p.err("empty expression");
    }
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}
