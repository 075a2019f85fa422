//! Total and partial derivatives.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::{DerivAtom, Expr, Node, SymbolKind};
use crate::context::VariableContext;
use crate::error::{Error, Result};

/// Differentiates through sums, products, powers, `ln` and `exp`, delegating
/// the atoms to `leaf`. Arbitrary functions use the chain rule
/// `d f^(k)(a) = f^(k+1)(a) * d a`.
fn differentiate<F>(e: &Expr, leaf: &F) -> Expr
where
    F: Fn(&Expr) -> Expr,
{
    match e.node() {
        Node::Num(_) => Expr::zero(),
        Node::Sym(_) | Node::Deriv(_) => leaf(e),
        Node::Func(app) => {
            let inner = differentiate(&app.arg, leaf);
            if inner.is_zero() {
                return Expr::zero();
            }
            Expr::func(app.name.clone(), app.prime + 1, app.arg.clone()) * inner
        }
        Node::Add(ts) => Expr::add(ts.iter().map(|t| differentiate(t, leaf)).collect()),
        Node::Mul(fs) => {
            let mut terms = Vec::new();
            for (i, f) in fs.iter().enumerate() {
                let df = differentiate(f, leaf);
                if df.is_zero() {
                    continue;
                }
                let mut factors: Vec<Expr> = fs.clone();
                factors[i] = df;
                terms.push(Expr::mul(factors));
            }
            Expr::add(terms)
        }
        Node::Pow(b, k) => {
            let db = differentiate(b, leaf);
            if db.is_zero() {
                return Expr::zero();
            }
            Expr::mul(vec![Expr::int(*k), Expr::pow(b.clone(), k - 1), db])
        }
        Node::Ln(a) => {
            let da = differentiate(a, leaf);
            if da.is_zero() {
                return Expr::zero();
            }
            da * a.clone().recip()
        }
        Node::Exp(a) => {
            let da = differentiate(a, leaf);
            if da.is_zero() {
                return Expr::zero();
            }
            e.clone() * da
        }
    }
}

/// Total derivative `D_var e`: explicit dependence on `var` plus the chain
/// rule through every derivative atom. The result is not normalized.
pub fn total_derivative(e: &Expr, var: &str, ctx: &VariableContext) -> Result<Expr> {
    let pos = ctx.independent_position(var).ok_or_else(|| Error::NotIndependent(var.to_string()))?;
    let var_name = ctx.independents()[pos].clone();
    let leaf = |atom: &Expr| match atom.node() {
        Node::Sym(s) if s.kind == SymbolKind::Independent && s.name == var_name => Expr::one(),
        Node::Deriv(d) => match ctx.dependent(&d.base) {
            Some(dep) if dep.args.contains(&var_name) => {
                let mut index = d.index.clone();
                index.push(var_name.clone());
                Expr::deriv(DerivAtom { base: d.base.clone(), index: ctx.sort_index(index) })
            }
            _ => Expr::zero(),
        },
        _ => Expr::zero(),
    };
    Ok(differentiate(e, &leaf))
}

/// Applies `D_{v1} D_{v2} ...` in order.
pub fn total_derivative_many(e: &Expr, vars: &[impl AsRef<str>], ctx: &VariableContext) -> Result<Expr> {
    let mut out = e.clone();
    for v in vars {
        out = total_derivative(&out, v.as_ref(), ctx)?;
    }
    Ok(out)
}

/// Partial derivative with respect to an atom (a symbol or a derivative
/// atom), treating every other atom as independent of it.
pub fn partial(e: &Expr, atom: &Expr) -> Expr {
    let leaf = |a: &Expr| if a == atom { Expr::one() } else { Expr::zero() };
    differentiate(e, &leaf)
}

impl Expr {
    pub fn total_derivative(&self, var: &str, ctx: &VariableContext) -> Result<Expr> {
        total_derivative(self, var, ctx)
    }

    pub fn partial(&self, atom: &Expr) -> Expr {
        partial(self, atom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn ctx() -> VariableContext {
        VariableContext::build(&["t", "x", "y"], &["u"], &["c1"], &["f", "g"]).unwrap()
    }

    fn p(s: &str) -> Expr {
        parse(s, &ctx()).unwrap()
    }

    fn same(a: &Expr, b: &Expr) -> bool {
        (a - b).normalizes_to_zero().unwrap()
    }

    #[test]
    fn total_derivative_examples() {
        let c = ctx();
        assert!(same(&p("-D(u,t)").total_derivative("t", &c).unwrap(), &p("-D(u,t,t)")));
        assert!(same(
            &p("f(u)*D(u,x)").total_derivative("x", &c).unwrap(),
            &p("f'(u)*D(u,x)^2 + f(u)*D(u,x,x)")
        ));
        assert!(same(&p("x*y").total_derivative("x", &c).unwrap(), &p("y")));
        assert!(p("c1").total_derivative("x", &c).unwrap().normalizes_to_zero().unwrap());
    }

    #[test]
    fn rejects_non_independent() {
        assert_eq!(p("u").total_derivative("c1", &ctx()), Err(Error::NotIndependent("c1".into())));
    }

    #[test]
    fn partial_through_function() {
        let u = p("u");
        assert!(same(&p("f(u)*u^2").partial(&u), &p("f'(u)*u^2 + 2*f(u)*u")));
        assert!(same(&p("exp(u)*ln(u)").partial(&u), &p("exp(u)*ln(u) + exp(u)/u")));
        let ux = p("D(u,x)");
        assert!(same(&p("D(u,x)^3*g(u)").partial(&ux), &p("3*D(u,x)^2*g(u)")));
    }
}
