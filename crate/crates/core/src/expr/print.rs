//! Canonical text form. Output re-parses to the same tree.

use core::fmt::{self, Display, Formatter, Write};

use num_traits::{One, Signed};

use super::{Expr, Node, Rational};

fn write_rational(f: &mut Formatter<'_>, q: &Rational) -> fmt::Result {
    if q.is_integer() {
        write!(f, "{}", q.numer())
    } else {
        write!(f, "{}/{}", q.numer(), q.denom())
    }
}

/// Sign and magnitude of a term inside a sum.
fn split_sign(e: &Expr) -> (bool, Expr) {
    match e.node() {
        Node::Num(q) if q.is_negative() => (true, Expr::num(-q)),
        Node::Mul(fs) => match fs[0].node() {
            Node::Num(q) if q.is_negative() => {
                let mut rest = fs.clone();
                rest[0] = Expr::num(-q);
                (true, Expr::mul(rest))
            }
            _ => (false, e.clone()),
        },
        _ => (false, e.clone()),
    }
}

fn write_power_base(f: &mut Formatter<'_>, b: &Expr) -> fmt::Result {
    match b.node() {
        Node::Sym(_) | Node::Deriv(_) | Node::Func(_) | Node::Ln(_) | Node::Exp(_) => write!(f, "{b}"),
        Node::Num(q) if !q.is_negative() && q.is_integer() => write!(f, "{b}"),
        _ => write!(f, "({b})"),
    }
}

fn write_pow(f: &mut Formatter<'_>, b: &Expr, k: i64) -> fmt::Result {
    write_power_base(f, b)?;
    write!(f, "^{k}")
}

fn write_factor(f: &mut Formatter<'_>, e: &Expr) -> fmt::Result {
    match e.node() {
        Node::Add(_) | Node::Mul(_) => write!(f, "({e})"),
        Node::Num(q) if q.is_negative() || !q.is_integer() => write!(f, "({e})"),
        _ => write!(f, "{e}"),
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Num(q) => write_rational(f, q),
            Node::Sym(s) => f.write_str(&s.name),
            Node::Deriv(d) => {
                if d.index.is_empty() {
                    f.write_str(&d.base)
                } else {
                    write!(f, "D({}", d.base)?;
                    for v in &d.index {
                        write!(f, ",{v}")?;
                    }
                    f.write_char(')')
                }
            }
            Node::Func(app) => {
                f.write_str(&app.name)?;
                for _ in 0..app.prime {
                    f.write_char('\'')?;
                }
                write!(f, "({})", app.arg)
            }
            Node::Ln(a) => write!(f, "ln({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Pow(b, -1) => {
                f.write_str("1/")?;
                write_power_base(f, b)
            }
            Node::Pow(b, k) if *k < 0 => {
                f.write_str("1/")?;
                write_pow(f, b, -k)
            }
            Node::Pow(b, k) => write_pow(f, b, *k),
            Node::Add(ts) => {
                for (i, t) in ts.iter().enumerate() {
                    let (neg, mag) = split_sign(t);
                    match (i, neg) {
                        (0, true) => f.write_char('-')?,
                        (0, false) => {}
                        (_, true) => f.write_str(" - ")?,
                        (_, false) => f.write_str(" + ")?,
                    }
                    write!(f, "{mag}")?;
                }
                Ok(())
            }
            Node::Mul(fs) => {
                let mut rest = &fs[..];
                let mut first = true;
                if let Node::Num(q) = fs[0].node() {
                    rest = &fs[1..];
                    if *q == -Rational::one() {
                        f.write_char('-')?;
                    } else {
                        write_rational(f, q)?;
                        first = false;
                    }
                }
                let is_den = |g: &&Expr| matches!(g.node(), Node::Pow(_, k) if *k < 0);
                for g in rest.iter().filter(|g| !is_den(g)) {
                    if !first {
                        f.write_char('*')?;
                    }
                    write_factor(f, g)?;
                    first = false;
                }
                // negative powers become divisions
                for g in rest.iter().filter(is_den) {
                    let Node::Pow(b, k) = g.node() else { unreachable!() };
                    if first {
                        f.write_char('1')?;
                        first = false;
                    }
                    f.write_char('/')?;
                    if *k == -1 {
                        write_power_base(f, b)?;
                    } else {
                        write_pow(f, b, -k)?;
                    }
                }
                Ok(())
            }
        }
    }
}
