//! Simultaneous substitution.

use alloc::string::ToString;
use alloc::vec::Vec;

use super::diff::total_derivative_many;
use super::{multiset_difference, Expr, Node};
use crate::context::VariableContext;
use crate::error::{Error, Result};

/// Replaces atoms simultaneously. Keys are symbols or derivative atoms.
///
/// A key `u_J` also rewrites every higher derivative `u_{J+K}` as `D_K`
/// applied to the bound value; when several keys match an atom the one with
/// the longest multi-index wins. A bound value that contains an atom its own
/// key would rewrite is rejected as cyclic.
pub fn substitute(e: &Expr, bindings: &[(Expr, Expr)], ctx: &VariableContext) -> Result<Expr> {
    for (k, _) in bindings {
        if !matches!(k.node(), Node::Sym(_) | Node::Deriv(_)) {
            return Err(Error::Invalid("substitution keys must be atoms".to_string()));
        }
    }
    for (k, v) in bindings {
        let mut cyclic = false;
        v.visit(&mut |sub| cyclic |= key_matches(k, sub).is_some());
        if cyclic {
            return Err(Error::CyclicBinding(k.to_string()));
        }
    }
    e.map_atoms(&mut |atom| {
        let mut best: Option<(usize, &Expr, Vec<alloc::sync::Arc<str>>)> = None;
        for (k, v) in bindings {
            if let Some(rest) = key_matches(k, atom) {
                let depth = match k.node() {
                    Node::Deriv(d) => d.index.len() + 1,
                    _ => 0,
                };
                if best.as_ref().is_none_or(|(b, _, _)| depth > *b) {
                    best = Some((depth, v, rest));
                }
            }
        }
        match best {
            None => Ok(None),
            Some((_, v, rest)) if rest.is_empty() => Ok(Some(v.clone())),
            Some((_, v, rest)) => total_derivative_many(v, &rest, ctx).map(Some),
        }
    })
}

/// If `key` rewrites `atom`, the extra multi-index to differentiate by.
fn key_matches(key: &Expr, atom: &Expr) -> Option<Vec<alloc::sync::Arc<str>>> {
    match (key.node(), atom.node()) {
        (Node::Sym(a), Node::Sym(b)) if a == b => Some(Vec::new()),
        (Node::Deriv(k), Node::Deriv(d)) if k.base == d.base => multiset_difference(&d.index, &k.index),
        _ => None,
    }
}

impl Expr {
    pub fn substitute(&self, bindings: &[(Expr, Expr)], ctx: &VariableContext) -> Result<Expr> {
        substitute(self, bindings, ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn ctx() -> VariableContext {
        VariableContext::build(&["t", "x"], &["u"], &[], &["f"]).unwrap()
    }

    fn p(s: &str) -> Expr {
        parse(s, &ctx()).unwrap()
    }

    #[test]
    fn examples() {
        let c = ctx();
        let r = p("D(u,t,t) - D(u,x,x)").substitute(&[(p("D(u,t,t)"), p("D(u,x,x)"))], &c).unwrap();
        assert!(r.normalizes_to_zero().unwrap());

        let r = p("D(u,t,t,t)").substitute(&[(p("D(u,t,t)"), p("f(u)"))], &c).unwrap();
        assert!((r - p("f'(u)*D(u,t)")).normalizes_to_zero().unwrap());

        let r = p("D(u,t)").substitute(&[(p("u"), p("t^2"))], &c).unwrap();
        assert!((r - p("2*t")).normalizes_to_zero().unwrap());
    }

    #[test]
    fn simultaneous() {
        let c = ctx();
        let r = p("t + x").substitute(&[(p("t"), p("x")), (p("x"), p("2*t"))], &c).unwrap();
        assert!((r - p("x + 2*t")).normalizes_to_zero().unwrap());
    }

    #[test]
    fn cyclic_binding_rejected() {
        let c = ctx();
        let err = p("D(u,t)").substitute(&[(p("u"), p("D(u,x) + t"))], &c).unwrap_err();
        assert!(matches!(err, Error::CyclicBinding(_)));
    }
}
