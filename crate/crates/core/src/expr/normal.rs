//! Canonical form.
//!
//! Every expression maps to `num / (p1^k1 * ... * pn^kn)` where `num` is a
//! Laurent polynomial over atoms and the `pi` are polynomials with at least
//! two terms, no monomial factor and leading coefficient one. Atoms are
//! symbols, derivative atoms, function applications with normalized
//! arguments, and `ln`/`exp` of normalized arguments.
//!
//! Two expressions are equal iff the numerator of their difference is the
//! zero polynomial, independently of how the denominators were factored.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::{One, ToPrimitive, Zero};

use super::poly::{Monomial, Poly};
use super::{Expr, Node, Rational};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct RatFn {
    pub(crate) num: Poly,
    pub(crate) den: BTreeMap<Poly, u32>,
}

impl RatFn {
    fn poly(p: Poly) -> Self {
        RatFn { num: p, den: BTreeMap::new() }
    }

    fn constant(q: Rational) -> Self {
        Self::poly(Poly::constant(q))
    }

    fn atom(a: Expr) -> Self {
        Self::poly(Poly::term(Monomial::atom(a, 1), Rational::one()))
    }

    fn den_poly(factors: &BTreeMap<Poly, u32>) -> Poly {
        factors.iter().fold(Poly::one(), |acc, (p, k)| acc.mul(&p.pow(*k)))
    }

    fn cancel(mut self) -> Self {
        if self.num.is_zero() {
            self.den.clear();
            return self;
        }
        let mut den = BTreeMap::new();
        for (p, k) in core::mem::take(&mut self.den) {
            let mut k = k;
            while k > 0 {
                match self.num.div_exact(&p) {
                    Some(q) => {
                        self.num = q;
                        k -= 1;
                    }
                    None => break,
                }
            }
            if k > 0 {
                den.insert(p, k);
            }
        }
        self.den = den;
        self
    }

    fn add(&self, other: &RatFn) -> RatFn {
        if self.den.is_empty() && other.den.is_empty() {
            return Self::poly(self.num.add(&other.num));
        }
        let mut den = self.den.clone();
        for (p, k) in &other.den {
            let e = den.entry(p.clone()).or_insert(0);
            *e = (*e).max(*k);
        }
        let lift = |r: &RatFn| {
            let missing: BTreeMap<Poly, u32> = den
                .iter()
                .filter_map(|(p, k)| {
                    let have = r.den.get(p).copied().unwrap_or(0);
                    (k > &have).then(|| (p.clone(), k - have))
                })
                .collect();
            r.num.mul(&Self::den_poly(&missing))
        };
        let num = lift(self).add(&lift(other));
        RatFn { num, den }.cancel()
    }

    fn mul(&self, other: &RatFn) -> RatFn {
        let mut den = self.den.clone();
        for (p, k) in &other.den {
            *den.entry(p.clone()).or_insert(0) += k;
        }
        let out = RatFn { num: self.num.mul(&other.num), den };
        if self.den.is_empty() && other.den.is_empty() {
            out
        } else {
            out.cancel()
        }
    }

    fn recip(&self) -> Result<RatFn> {
        if self.num.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let (c, m, p) = self.num.primitive_parts();
        let num = Self::den_poly(&self.den).mul_term(&m.inv(), &c.recip());
        let mut den = BTreeMap::new();
        if p.as_constant().is_none() {
            den.insert(p, 1);
        }
        Ok(RatFn { num, den }.cancel())
    }

    fn powi(&self, k: i64) -> Result<RatFn> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let k = k.unsigned_abs() as u32;
        if base.den.is_empty() {
            if let Some((m, q)) = base.num.single_term() {
                return Ok(Self::poly(Poly::term(m.pow(k as i64), super::rational_pow(q, k as i64))));
            }
            return Ok(Self::poly(base.num.pow(k)));
        }
        let den = base.den.iter().map(|(p, e)| (p.clone(), e * k)).collect();
        Ok(RatFn { num: base.num.pow(k), den })
    }
}

fn to_ratfn(e: &Expr) -> Result<RatFn> {
    Ok(match e.node() {
        Node::Num(q) => RatFn::constant(q.clone()),
        Node::Sym(_) | Node::Deriv(_) => RatFn::atom(e.clone()),
        Node::Func(app) => {
            let arg = normalize(&app.arg)?;
            RatFn::atom(Expr::func(app.name.clone(), app.prime, arg))
        }
        Node::Add(ts) => {
            let mut acc = RatFn::constant(Rational::zero());
            for t in ts {
                acc = acc.add(&to_ratfn(t)?);
            }
            acc
        }
        Node::Mul(fs) => {
            let mut acc = RatFn::constant(Rational::one());
            for f in fs {
                acc = acc.mul(&to_ratfn(f)?);
                if acc.num.is_zero() {
                    // still check the remaining factors for division by zero
                    for g in fs {
                        to_ratfn(g)?;
                    }
                    return Ok(acc);
                }
            }
            acc
        }
        Node::Pow(b, k) => to_ratfn(b)?.powi(*k)?,
        Node::Ln(a) => {
            let arg = normalize(a)?;
            match exp_exponent(&arg) {
                Some(sum) => to_ratfn(&sum)?,
                None if arg.is_one() => RatFn::constant(Rational::zero()),
                None if arg.is_zero() => return Err(Error::Invalid("ln(0)".into())),
                None => RatFn::atom(Expr::ln(arg)),
            }
        }
        Node::Exp(a) => exp_ratfn(&to_ratfn(a)?)?,
    })
}

/// `exp` of a normalized argument: sums split into products, integer
/// multiples become powers, and `exp(k*ln(z))` collapses to `z^k`.
/// `a` for an argument that is a product of powers of exponentials
/// `exp(a_1)^k_1 * ...`, so that `ln` of it is `sum k_i a_i`.
fn exp_exponent(arg: &Expr) -> Option<Expr> {
    let single = |f: &Expr| match f.node() {
        Node::Exp(inner) => Some(inner.clone()),
        Node::Pow(b, k) => match b.node() {
            Node::Exp(inner) => Some(Expr::int(*k) * inner.clone()),
            _ => None,
        },
        _ => None,
    };
    match arg.node() {
        Node::Mul(fs) => fs.iter().map(single).collect::<Option<Vec<_>>>().map(Expr::add),
        _ => single(arg),
    }
}

fn exp_ratfn(arg: &RatFn) -> Result<RatFn> {
    if !arg.den.is_empty() {
        return Ok(RatFn::atom(Expr::exp(from_ratfn(arg))));
    }
    let mut acc = RatFn::constant(Rational::one());
    for (m, q) in &arg.num.terms {
        let factor = if m.is_one() {
            RatFn::atom(Expr::exp(Expr::num(q.clone())))
        } else if q.is_integer() {
            let k = q.to_integer().to_i64().ok_or_else(|| Error::Invalid("exponent too large".into()))?;
            match m.0.as_slice() {
                [(atom, 1)] if matches!(atom.node(), Node::Ln(_)) => {
                    let Node::Ln(z) = atom.node() else { unreachable!() };
                    to_ratfn(z)?.powi(k)?
                }
                _ => {
                    let base = Expr::exp(monomial_expr(m, &Rational::one()));
                    RatFn::poly(Poly::term(Monomial::atom(base, k), Rational::one()))
                }
            }
        } else {
            RatFn::atom(Expr::exp(monomial_expr(m, q)))
        };
        acc = acc.mul(&factor);
    }
    Ok(acc)
}

fn monomial_expr(m: &Monomial, q: &Rational) -> Expr {
    let mut factors = Vec::with_capacity(m.0.len() + 1);
    factors.push(Expr::num(q.clone()));
    // numerator factors first, matching the printed `a*b/c` order
    factors.extend(m.0.iter().filter(|(_, k)| *k > 0).map(|(a, k)| Expr::pow(a.clone(), *k)));
    factors.extend(m.0.iter().filter(|(_, k)| *k < 0).map(|(a, k)| Expr::pow(a.clone(), *k)));
    Expr::mul(factors)
}

fn poly_expr(p: &Poly) -> Expr {
    Expr::add(p.terms.iter().rev().map(|(m, q)| monomial_expr(m, q)).collect())
}

fn from_ratfn(r: &RatFn) -> Expr {
    let num = poly_expr(&r.num);
    if r.den.is_empty() {
        return num;
    }
    let mut factors = alloc::vec![num];
    factors.extend(r.den.iter().map(|(p, k)| Expr::pow(poly_expr(p), -(*k as i64))));
    Expr::mul(factors)
}

pub(crate) fn normalize(e: &Expr) -> Result<Expr> {
    Ok(from_ratfn(&to_ratfn(e)?))
}

/// The numerator of the canonical form with its rational and monomial
/// content removed, so that `e = c * m * p / den` for the returned `p`.
/// Used to clear nonvanishing factors from an equation `e = 0`.
pub fn primitive_numerator(e: &Expr) -> Result<Expr> {
    let r = to_ratfn(e)?;
    if r.num.is_zero() {
        return Ok(Expr::zero());
    }
    let (_, _, p) = r.num.primitive_parts();
    Ok(poly_expr(&p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::VariableContext;
    use crate::expr::parse;

    fn ctx() -> VariableContext {
        VariableContext::build(&["t", "x", "y"], &["u"], &["c1", "c2"], &["f", "g"]).unwrap()
    }

    fn n(s: &str) -> Expr {
        parse(s, &ctx()).unwrap().normalize().unwrap()
    }

    #[test]
    fn commutativity_and_coefficients_cancel() {
        assert!(n("D(u,x)*f(u) - f(u)*D(u,x)").is_zero());
        assert!(n("2*D(u,t) + D(u,t) - 3*D(u,t)").is_zero());
        assert!(n("D(f(u), x) - f'(u)*D(u,x)").is_zero());
    }

    #[test]
    fn fractions_cancel() {
        assert!(n("(x + y)/(x + y) - 1").is_zero());
        assert!(n("(x^2 - y^2)/(x - y) - x - y").is_zero());
        assert!(n("1/(x+y) + 1/(x-y) - 2*x/(x^2 - y^2)").is_zero());
        assert!(n("x/x^3 - 1/x^2").is_zero());
    }

    #[test]
    fn exp_and_ln_rules() {
        assert!(n("exp(2*t) - exp(t)^2").is_zero());
        assert!(n("exp(t + x) - exp(t)*exp(x)").is_zero());
        assert!(n("exp(3*ln(x)) - x^3").is_zero());
        assert!(n("ln(exp(x + y)) - x - y").is_zero());
        assert!(n("exp(-t)*exp(t) - 1").is_zero());
    }

    #[test]
    fn idempotent() {
        for s in ["(x + y)^3/(t - c1) - f(u)*D(u,x,x)", "exp(t)*x/(1 + x^2) + ln(y)", "-3/2*c2^2*D(u,y)"] {
            let once = n(s);
            assert_eq!(once.normalize().unwrap(), once);
        }
    }

    #[test]
    fn division_by_zero_reported() {
        let e = parse("1/(x - x)", &ctx()).unwrap();
        assert_eq!(e.normalize(), Err(Error::DivisionByZero));
    }
}
